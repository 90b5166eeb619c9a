"""Time-stepped pass simulation, parameter sweeps and footprint maps.

At every REM update instant the satellite queries the REM, recomputes the
arrival angles it believes in from its current position and solves for new
weights. Between updates those weights stay frozen while capacity is
evaluated every ``eval_step_s`` against the true geometry.

Every random stream derives from ``master_seed``: the solver seed of update
``i`` is ``SeedSequence([master_seed, SOLVER, i])``, the REM error seed and
the node placement draw use their own tags.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .array import ArrayGeometry
from .geom import (
    R_EARTH,
    REFERENCE_ORBIT,
    OrbitalElements,
    arrival_many,
    ecef_to_arrival,
    great_circle_km,
    ground_displace,
    is_visible,
    latlon_to_ecef,
    propagate,
)
from .link import BeamformingMode, LinkBudget, channel
from .opt.objective import ObjectiveSpec
from .opt.solvers import SolverConfig, solve
from .rem import GroundNode, RemPolicy, Role, WorldState, query

log = logging.getLogger(__name__)

SOLVER_STREAM = 1
REM_STREAM = 2
PLACEMENT_STREAM = 3

SWEEP_COLUMNS = ("param_name", "param_value", "delta_t_s", "seed", "mean_total_bps")
FOOTPRINT_FLOOR_DB = -300.0


def derive_seed(master_seed: int, *tags: int) -> int:
    return int(np.random.SeedSequence([master_seed, *tags]).generate_state(1)[0])


@dataclass(frozen=True)
class Placement:
    """Random node layout in a disc around a centre point.

    Without an explicit centre the disc is centred on the sub-satellite point
    halfway through the pass.
    """

    n_users: int = 2
    n_interferers: int = 2
    radius_km: float = 500.0
    user_eirp_w: float = 10.0
    interferer_eirp_w: float = 10.0
    min_separation_km: float = 0.0
    center_lat_deg: float | None = None
    center_lon_deg: float | None = None

    def __post_init__(self):
        if self.n_users < 1 or self.n_interferers < 0:
            raise ValueError("placement needs n_users >= 1 and n_interferers >= 0")
        if self.radius_km <= 0:
            raise ValueError("placement radius_km must be positive")


def draw_world(placement: Placement, center, rng: np.random.Generator,
               carrier_hz: float = 1.575e9) -> WorldState:
    """Area-uniform draw in the disc, rejecting points closer than the minimum spacing."""
    center = np.asarray(center, dtype=float)
    center = center / np.linalg.norm(center) * R_EARTH
    total = placement.n_users + placement.n_interferers
    points = []
    attempts = 0
    while len(points) < total:
        attempts += 1
        if attempts > 100_000:
            raise ValueError("could not place nodes with the requested minimum separation")
        dist = placement.radius_km * math.sqrt(rng.random())
        p = ground_displace(center, dist, rng.uniform(0.0, 2 * math.pi))
        if points and placement.min_separation_km > 0:
            if np.min(great_circle_km(np.array(points), p, R_EARTH)) < placement.min_separation_km:
                continue
        points.append(p)
    users = [GroundNode(f"U{k + 1}", Role.USER, tuple(points[k]), placement.user_eirp_w, carrier_hz)
             for k in range(placement.n_users)]
    interferers = [
        GroundNode(f"I{j + 1}", Role.INTERFERER, tuple(points[placement.n_users + j]),
                   placement.interferer_eirp_w, carrier_hz)
        for j in range(placement.n_interferers)]
    return WorldState(tuple(users), tuple(interferers))


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything one pass needs. Times are seconds from the pass start;
    the pass itself starts ``epoch_offset_s`` after the orbital epoch."""

    orbital: OrbitalElements = REFERENCE_ORBIT
    geometry: ArrayGeometry = field(default_factory=ArrayGeometry)
    budget: LinkBudget = field(default_factory=LinkBudget)
    world: WorldState | None = None
    placement: Placement | None = None
    rem_policy: RemPolicy = field(default_factory=RemPolicy)
    mode: BeamformingMode = BeamformingMode.ANALOG
    solver: SolverConfig = field(default_factory=SolverConfig)
    duration_s: float = 150.0
    eval_step_s: float = 0.01
    master_seed: int = 0
    epoch_offset_s: float = 0.0
    reoptimize_each_step: bool = False
    freeze_satellite: bool = False

    def __post_init__(self):
        if not self.duration_s > 0:
            raise ValueError("duration_s must be positive")
        if not self.eval_step_s > 0:
            raise ValueError("eval_step_s must be positive")
        if self.eval_step_s > self.rem_policy.update_interval_s * (1 + 1e-9):
            raise ValueError("eval_step_s must not exceed the REM update interval")
        if self.epoch_offset_s < 0:
            raise ValueError("epoch_offset_s must be non-negative")
        if self.world is None and self.placement is None:
            raise ValueError("scenario needs either explicit nodes or a placement")
        self.steps_per_update()

    def steps_per_update(self) -> int:
        ratio = self.rem_policy.update_interval_s / self.eval_step_s
        spu = int(round(ratio))
        if spu < 1 or abs(spu - ratio) > 1e-6 * ratio:
            raise ValueError("REM update interval must be a whole number of evaluation steps")
        return spu

    @property
    def n_steps(self) -> int:
        return int(round(self.duration_s / self.eval_step_s)) + 1

    def satellite_positions(self, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        if self.freeze_satellite:
            pos = propagate(self.orbital, self.epoch_offset_s)
            return np.broadcast_to(pos, times.shape + (3,)).copy()
        return propagate(self.orbital, self.epoch_offset_s + times)

    def resolved_world(self) -> WorldState:
        if self.world is not None:
            return self.world
        p = self.placement
        if p.center_lat_deg is not None and p.center_lon_deg is not None:
            center = latlon_to_ecef(p.center_lat_deg, p.center_lon_deg)
        else:
            center = self.satellite_positions(self.duration_s / 2.0)
        rng = np.random.default_rng(derive_seed(self.master_seed, PLACEMENT_STREAM))
        return draw_world(p, center, rng, self.budget.carrier_frequency_hz)

    def resolved_policy(self) -> RemPolicy:
        return replace(self.rem_policy, error_seed=derive_seed(self.master_seed, REM_STREAM))


@dataclass
class CapacityTrace:
    t_s: np.ndarray
    per_user_bps: np.ndarray
    total_bps: np.ndarray
    rem_update: np.ndarray
    user_ids: tuple[str, ...] = ()

    @property
    def mean_total_bps(self) -> float:
        return float(np.mean(self.total_bps))

    def interval_slices(self):
        """Index ranges ``[start, stop)`` between consecutive REM updates."""
        starts = np.flatnonzero(self.rem_update)
        stops = np.append(starts[1:], len(self.t_s))
        return list(zip(starts, stops))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_s", *(f"user_{k + 1}_bps" for k in range(self.per_user_bps.shape[1])),
                        "total_bps", "rem_update"])
            for i in range(len(self.t_s)):
                w.writerow([repr(float(self.t_s[i])),
                            *(repr(float(c)) for c in self.per_user_bps[i]),
                            repr(float(self.total_bps[i])), int(self.rem_update[i])])


def _spec_from_snapshot(config: ScenarioConfig, sat, snapshot) -> ObjectiveSpec:
    users = [(ecef_to_arrival(sat, n.ecef), n.eirp_w) for n in snapshot.users]
    interferers = [(ecef_to_arrival(sat, n.ecef), n.eirp_w) for n in snapshot.interferers]
    return ObjectiveSpec(config.mode, users, interferers, config.geometry, config.budget)


def _per_user_capacity(config: ScenarioConfig, W, Hu, Pu, Hi, Pi):
    """Capacity of each user over a block of epochs.

    ``W`` is ``(S, MN)``; ``Hu`` ``(T, K, MN)``; ``Hi`` ``(T, J, MN)``.
    """
    K = Hu.shape[1]
    noise = config.budget.noise_power_w
    streams = W if config.mode is BeamformingMode.DIGITAL else np.repeat(W[:1], K, axis=0)
    sig = np.abs(np.einsum("tkd,kd->tk", Hu, streams)) ** 2 * Pu
    if Hi.shape[1]:
        intf = (np.abs(np.einsum("tjd,kd->tkj", Hi, streams)) ** 2) @ Pi
    else:
        intf = np.zeros_like(sig)
    den = intf + noise * np.sum(np.abs(streams) ** 2, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        gamma = np.where(den > 0, sig / den, 0.0)
    return config.budget.bandwidth_hz * np.log2(1.0 + gamma)


def run_pass(config: ScenarioConfig, snapshots: list | None = None) -> CapacityTrace:
    """Simulate one pass and return the capacity time series.

    If ``snapshots`` is a list, every REM snapshot the solver saw is appended.
    """
    world = config.resolved_world()
    policy = config.resolved_policy()
    policy.check(world)
    spu = config.steps_per_update()
    n = config.n_steps
    times = np.arange(n) * config.eval_step_s
    sats = config.satellite_positions(times)

    lam = config.budget.wavelength_m
    users = np.array([u.ecef for u in world.users])
    Pu = np.array([u.eirp_w for u in world.users])
    Hu = channel(config.geometry, arrival_many(sats, users), lam)
    if world.interferers:
        ints = np.array([j.ecef for j in world.interferers])
        Pi = np.array([j.eirp_w for j in world.interferers])
        Hi = channel(config.geometry, arrival_many(sats, ints), lam)
    else:
        Pi = np.zeros(0)
        Hi = np.zeros((n, 0, config.geometry.size), dtype=complex)

    per_user = np.empty((n, world.n_users))
    update = np.zeros(n, dtype=bool)
    update[::spu] = True
    block = 1 if config.reoptimize_each_step else spu
    for start in range(0, n, block):
        stop = min(start + block, n)
        snapshot = query(world, policy, times[start])
        if snapshots is not None:
            snapshots.append(snapshot)
        spec = _spec_from_snapshot(config, sats[start], snapshot)
        solver = replace(config.solver,
                         seed=derive_seed(config.master_seed, SOLVER_STREAM, start))
        res = solve(spec, solver)
        W = np.array([w.weights for w in res.weights])
        per_user[start:stop] = _per_user_capacity(
            config, W, Hu[start:stop], Pu, Hi[start:stop], Pi)
    lam_factor = config.mode.lambda_factor(world.n_users)
    return CapacityTrace(times, per_user, lam_factor * per_user.sum(axis=1), update,
                         tuple(u.id for u in world.users))


# -- sweeps -------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    param_name: str
    param_value: float
    delta_t_s: float
    seed: int
    mean_total_bps: float


def _seeds(config, seeds):
    return [config.master_seed] if seeds is None else list(seeds)


def _with_dt(config: ScenarioConfig, dt: float) -> ScenarioConfig:
    return replace(config, rem_policy=replace(config.rem_policy, update_interval_s=dt))


def sweep_delta_t(config: ScenarioConfig, delta_t_values: Sequence[float],
                  seeds: Sequence[int] | None = None) -> list[SweepRow]:
    rows = []
    for seed in _seeds(config, seeds):
        for dt in delta_t_values:
            trace = run_pass(replace(_with_dt(config, dt), master_seed=seed))
            rows.append(SweepRow("delta_t_s", float(dt), float(dt), seed, trace.mean_total_bps))
    return rows


def sweep_partial(config: ScenarioConfig, q_values: Sequence[int],
                  delta_t_values: Sequence[float] | None = None,
                  seeds: Sequence[int] | None = None) -> list[SweepRow]:
    """Mean capacity for each number of REM-known interferers ``Q``."""
    if delta_t_values is None:
        delta_t_values = [config.rem_policy.update_interval_s]
    rows = []
    for seed in _seeds(config, seeds):
        for dt in delta_t_values:
            for q in q_values:
                cfg = _with_dt(config, dt)
                cfg = replace(cfg, master_seed=seed,
                              rem_policy=replace(cfg.rem_policy, known_interferer_count=int(q)))
                trace = run_pass(cfg)
                rows.append(SweepRow("q", float(q), float(dt), seed, trace.mean_total_bps))
    return rows


def sweep_error(config: ScenarioConfig, error_values_km: Sequence[float],
                array_sizes: Sequence[ArrayGeometry] | None = None,
                seeds: Sequence[int] | None = None) -> list[SweepRow]:
    """Mean capacity versus REM position error, optionally for several arrays.

    With more than one array the parameter name carries the array label,
    e.g. ``error_km@8x8``.
    """
    arrays = list(array_sizes) if array_sizes else [config.geometry]
    rows = []
    for seed in _seeds(config, seeds):
        for geometry in arrays:
            name = "error_km" if len(arrays) == 1 else f"error_km@{geometry.label}"
            for err in error_values_km:
                cfg = replace(config, geometry=geometry, master_seed=seed,
                              rem_policy=replace(config.rem_policy,
                                                 position_error_km=float(err)))
                trace = run_pass(cfg)
                rows.append(SweepRow(name, float(err), config.rem_policy.update_interval_s,
                                     seed, trace.mean_total_bps))
    return rows


def sweep_array_size(config: ScenarioConfig, sizes: Sequence[int],
                     seeds: Sequence[int] | None = None) -> list[SweepRow]:
    """Square ``n x n`` arrays with the configured spacing."""
    rows = []
    for seed in _seeds(config, seeds):
        for n in sizes:
            geometry = replace(config.geometry, m_rows=int(n), n_cols=int(n))
            trace = run_pass(replace(config, geometry=geometry, master_seed=seed))
            rows.append(SweepRow("array_size", float(n), config.rem_policy.update_interval_s,
                                 seed, trace.mean_total_bps))
    return rows


def write_sweep_csv(rows: Sequence[SweepRow], path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([r.param_name, repr(r.param_value), repr(r.delta_t_s), r.seed,
                        repr(r.mean_total_bps)])


def mean_by(rows: Sequence[SweepRow], *keys: str) -> dict:
    """Average ``mean_total_bps`` over seeds, grouped by the given row fields."""
    groups: dict = {}
    for r in rows:
        groups.setdefault(tuple(getattr(r, k) for k in keys), []).append(r.mean_total_bps)
    return {k if len(keys) > 1 else k[0]: float(np.mean(v)) for k, v in groups.items()}


# -- footprint ----------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    lat_min_deg: float = -44.0
    lat_max_deg: float = -10.0
    lon_min_deg: float = 112.0
    lon_max_deg: float = 154.0
    resolution_deg: float = 1.0

    def __post_init__(self):
        if self.lat_min_deg > self.lat_max_deg or self.lon_min_deg > self.lon_max_deg:
            raise ValueError("grid bounds are inverted")
        if not self.resolution_deg > 0:
            raise ValueError("grid resolution must be positive")

    def axes(self):
        def axis(lo, hi):
            n = int(math.floor((hi - lo) / self.resolution_deg + 1e-9)) + 1
            return lo + self.resolution_deg * np.arange(n)
        return axis(self.lat_min_deg, self.lat_max_deg), axis(self.lon_min_deg, self.lon_max_deg)


@dataclass
class FootprintGrid:
    """Received power over the visible grid cells, in dB relative to the peak cell.

    ``node_rel_power_db`` gives the same quantity at the true node positions.
    """

    lat_deg: np.ndarray
    lon_deg: np.ndarray
    rel_power_db: np.ndarray
    node_ids: tuple[str, ...]
    node_roles: tuple[Role, ...]
    node_rel_power_db: np.ndarray
    time_s: float

    def level(self, role: Role) -> np.ndarray:
        mask = np.array([r is role for r in self.node_roles])
        return self.node_rel_power_db[mask]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["lat_deg", "lon_deg", "rel_power_db"])
            for la, lo, p in zip(self.lat_deg, self.lon_deg, self.rel_power_db):
                w.writerow([repr(float(la)), repr(float(lo)), repr(float(p))])

    def write_nodes_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", "role", "rel_power_db"])
            for i, r, p in zip(self.node_ids, self.node_roles, self.node_rel_power_db):
                w.writerow([i, r.value, repr(float(p))])


def footprint(config: ScenarioConfig, grid: GridSpec, t: float) -> FootprintGrid:
    """Solve once at ``t`` and map the resulting receive pattern over the grid.

    A 1 W reference transmitter is placed in each cell; digital streams are
    combined by summing their received powers.
    """
    world = config.resolved_world()
    policy = config.resolved_policy()
    policy.check(world)
    sat = config.satellite_positions(np.array([t]))[0]

    lats, lons = grid.axes()
    LA, LO = np.meshgrid(lats, lons, indexing="ij")
    cells = latlon_to_ecef(LA.ravel(), LO.ravel())
    visible = is_visible(sat, cells)
    if not np.any(visible):
        raise ValueError("footprint grid is entirely below the satellite horizon")

    snapshot = query(world, policy, t)
    spec = _spec_from_snapshot(config, sat, snapshot)
    res = solve(spec, replace(config.solver, seed=derive_seed(config.master_seed, SOLVER_STREAM, 0)))
    W = np.array([w.weights for w in res.weights])

    def power(points):
        H = channel(config.geometry, arrival_many(sat, points), config.budget.wavelength_m)[0]
        return np.sum(np.abs(H @ W.T) ** 2, axis=-1)

    cell_power = power(cells[visible])
    peak = cell_power.max()
    nodes = world.users + world.interferers
    node_power = power(np.array([n.ecef for n in nodes]))
    with np.errstate(divide="ignore"):
        rel = np.maximum(10 * np.log10(cell_power / peak), FOOTPRINT_FLOOR_DB)
        node_rel = np.maximum(10 * np.log10(node_power / peak), FOOTPRINT_FLOOR_DB)
    return FootprintGrid(LA.ravel()[visible], LO.ravel()[visible], rel,
                         tuple(n.id for n in nodes), tuple(n.role for n in nodes),
                         node_rel, float(t))
