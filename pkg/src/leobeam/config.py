"""Scenario configuration files.

A scenario is a YAML mapping whose sections mirror :class:`ScenarioConfig`.
Field names carry their unit (``_km``, ``_hz``, ``_s``, ``_w``). Ground nodes
are listed by latitude/longitude and converted to Earth-fixed coordinates on
load; alternatively a ``placement`` section draws them at random from the
master seed. Validation errors point at the offending line.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from .array import ArrayGeometry
from .geom import REFERENCE_ORBIT, OrbitalElements, latlon_to_ecef
from .link import BeamformingMode, LinkBudget
from .opt.solvers import Algorithm, SolverConfig
from .rem import GroundNode, RemPolicy, Role, WorldState
from .sim import GridSpec, Placement, ScenarioConfig

DESK_EVAL_STEP_S = 0.1
SWEEP_AXES = ("delta_t", "q", "error_km", "array_size")


class ConfigError(ValueError):
    def __init__(self, message: str, path: tuple = (), line: int | None = None,
                 source: str = "<config>"):
        self.message = message
        self.path = tuple(path)
        self.line = line
        self.source = source
        super().__init__(str(self))

    @property
    def field(self) -> str:
        return ".".join(str(p) for p in self.path)

    def __str__(self):
        loc = f"{self.source}:{self.line}" if self.line else self.source
        where = f" {self.field}:" if self.path else ""
        return f"{loc}:{where} {self.message}"


def _line_map(node, path=(), out=None) -> dict:
    """Map key paths to 1-based source lines."""
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = path + (k.value,)
            out[key] = k.start_mark.line + 1
            _line_map(v, key, out)
            out[key] = k.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_map(v, path + (i,), out)
    return out


@dataclass
class LoadedConfig:
    scenario: ScenarioConfig
    bench: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    footprint: dict = field(default_factory=dict)
    resolved: dict = field(default_factory=dict)
    sha256: str = ""
    source: str = "<config>"


class _Reader:
    def __init__(self, data, lines, source):
        self.data = data
        self.lines = lines
        self.source = source

    def error(self, path, message):
        line = None
        for cut in range(len(path), -1, -1):
            if tuple(path[:cut]) in self.lines:
                line = self.lines[tuple(path[:cut])]
                break
        return ConfigError(message, path, line, self.source)

    def section(self, path, allowed):
        node = self.data
        for p in path:
            if isinstance(node, dict):
                node = node.get(p)
            elif isinstance(node, list) and isinstance(p, int) and p < len(node):
                node = node[p]
            else:
                node = None
        if node is None:
            return {}
        if not isinstance(node, dict):
            raise self.error(path, "expected a mapping")
        for key in node:
            if key not in allowed:
                raise self.error(path + (key,), f"unknown field (allowed: {', '.join(sorted(allowed))})")
        return node

    def number(self, sec, path, key, default, kind=float, positive=False, nonneg=False):
        if key not in sec or sec[key] is None:
            return default
        raw = sec[key]
        try:
            if isinstance(raw, bool):
                raise TypeError
            value = kind(float(raw)) if kind is int else kind(raw)
            if kind is int and float(raw) != value:
                raise ValueError
        except (TypeError, ValueError):
            raise self.error(path + (key,), f"expected {kind.__name__}, got {raw!r}") from None
        if positive and not value > 0:
            raise self.error(path + (key,), f"must be positive, got {value}")
        if nonneg and value < 0:
            raise self.error(path + (key,), f"must be non-negative, got {value}")
        return value

    def boolean(self, sec, path, key, default):
        if key not in sec:
            return default
        if not isinstance(sec[key], bool):
            raise self.error(path + (key,), f"expected true/false, got {sec[key]!r}")
        return sec[key]

    def number_list(self, sec, path, key, default, kind=float):
        if key not in sec:
            return default
        raw = sec[key]
        if not isinstance(raw, list):
            raw = [raw]
        try:
            return [kind(float(v)) if kind is int else kind(v) for v in raw]
        except (TypeError, ValueError):
            raise self.error(path + (key,), f"expected a list of numbers, got {raw!r}") from None


_TOP = {"master_seed", "duration_s", "eval_step_s", "epoch_offset_s", "mode",
        "reoptimize_each_step", "orbit", "array", "link", "rem", "solver", "nodes",
        "placement", "bench", "sweep", "footprint"}
_ORBIT = {f.name for f in fields(OrbitalElements)}
_ARRAY = {f.name for f in fields(ArrayGeometry)}
_LINK = {f.name for f in fields(LinkBudget)}
_REM = {"update_interval_s", "known_interferers", "position_error_km", "random_subset"}
_SOLVER = {f.name for f in fields(SolverConfig)} - {"seed"}
_NODE = {"id", "role", "lat_deg", "lon_deg", "alt_m", "eirp_w"}
_PLACEMENT = {"users", "interferers", "radius_km", "user_eirp_w", "interferer_eirp_w",
              "min_separation_km", "center_lat_deg", "center_lon_deg"}
_BENCH = {"trials", "algorithms", "users", "interferers", "user_eirp_w", "interferer_eirp_w",
          "max_off_nadir_deg", "altitude_km", "seed"}
_SWEEP = {"axis", "values", "delta_t_s", "seeds", "array_sizes"}
_FOOTPRINT = {f.name for f in fields(GridSpec)} | {"time_s"}

_SOLVER_INT = {"seed", "budget_evals", "local_evals", "restarts", "scatter_points",
               "population", "tournament", "elite", "swarm_size"}


def parse_config(text: str, source: str = "<config>", seed_override: int | None = None) -> LoadedConfig:
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"YAML parse error: {getattr(exc, 'problem', exc)}", (), line, source) from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", (), 1, source)
    rd = _Reader(data, _line_map(root) if root is not None else {}, source)
    top = rd.section((), _TOP)

    master_seed = rd.number(top, (), "master_seed", 0, int, nonneg=True)
    if seed_override is not None:
        master_seed = int(seed_override)
    duration = rd.number(top, (), "duration_s", 150.0, positive=True)
    eval_step = rd.number(top, (), "eval_step_s", DESK_EVAL_STEP_S, positive=True)
    epoch = rd.number(top, (), "epoch_offset_s", 0.0, nonneg=True)
    mode_raw = top.get("mode", "analog")
    try:
        mode = BeamformingMode(str(mode_raw).lower())
    except ValueError:
        raise rd.error(("mode",), f"expected analog or digital, got {mode_raw!r}") from None
    reopt = rd.boolean(top, (), "reoptimize_each_step", False)

    sec = rd.section(("orbit",), _ORBIT)
    orbit_vals = {k: rd.number(sec, ("orbit",), k, getattr(REFERENCE_ORBIT, k)) for k in _ORBIT}
    try:
        orbital = OrbitalElements(**orbit_vals)
    except ValueError as exc:
        raise rd.error(("orbit",), str(exc)) from None

    sec = rd.section(("array",), _ARRAY)
    d = ArrayGeometry()
    geometry = ArrayGeometry(
        rd.number(sec, ("array",), "m_rows", d.m_rows, int, positive=True),
        rd.number(sec, ("array",), "n_cols", d.n_cols, int, positive=True),
        rd.number(sec, ("array",), "dx_wavelengths", d.dx_wavelengths, positive=True),
        rd.number(sec, ("array",), "dy_wavelengths", d.dy_wavelengths, positive=True))

    sec = rd.section(("link",), _LINK)
    d = LinkBudget()
    budget = LinkBudget(*(rd.number(sec, ("link",), k, getattr(d, k), positive=True)
                          for k in ("carrier_frequency_hz", "bandwidth_hz", "noise_temperature_k")))

    world, placement = _read_nodes(rd, top, budget)

    sec = rd.section(("rem",), _REM)
    known = sec.get("known_interferers", "all")
    if isinstance(known, str) and known.lower() == "all":
        known = None
    else:
        known = rd.number(sec, ("rem",), "known_interferers", None, int, nonneg=True)
        n_int = world.n_interferers if world is not None else placement.n_interferers
        if known > n_int:
            raise rd.error(("rem", "known_interferers"),
                           f"Q={known} exceeds the number of interferers J={n_int}")
    policy = RemPolicy(
        update_interval_s=rd.number(sec, ("rem",), "update_interval_s", 1.0, positive=True),
        known_interferer_count=known,
        position_error_km=rd.number(sec, ("rem",), "position_error_km", 0.0, nonneg=True),
        random_subset=rd.boolean(sec, ("rem",), "random_subset", False))

    sec = rd.section(("solver",), _SOLVER)
    kwargs = {}
    for key, value in sec.items():
        if key == "algorithm":
            try:
                kwargs[key] = Algorithm.parse(value)
            except ValueError as exc:
                raise rd.error(("solver", key), str(exc)) from None
        else:
            kind = int if key in _SOLVER_INT else float
            kwargs[key] = rd.number(sec, ("solver",), key, None, kind)
    try:
        solver = SolverConfig(**kwargs)
    except ValueError as exc:
        raise rd.error(("solver",), str(exc)) from None

    try:
        scenario = ScenarioConfig(
            orbital=orbital, geometry=geometry, budget=budget, world=world,
            placement=placement, rem_policy=policy, mode=mode, solver=solver,
            duration_s=duration, eval_step_s=eval_step, master_seed=master_seed,
            epoch_offset_s=epoch, reoptimize_each_step=reopt)
    except ValueError as exc:
        raise rd.error(("eval_step_s",), str(exc)) from None

    bench = _read_bench(rd, solver)
    sweep = _read_sweep(rd)
    footprint = _read_footprint(rd)
    loaded = LoadedConfig(scenario, bench, sweep, footprint, source=source,
                          sha256=config_sha256(text))
    loaded.resolved = resolved_dict(loaded, top.get("nodes"))
    return loaded


def _read_nodes(rd: _Reader, top, budget):
    nodes_raw = top.get("nodes")
    has_placement = "placement" in top
    if nodes_raw is not None and has_placement:
        raise rd.error(("placement",), "give either nodes or placement, not both")
    if nodes_raw is None:
        # without explicit nodes a default random placement is drawn
        sec = rd.section(("placement",), _PLACEMENT) if has_placement else {}
        p = ("placement",)
        d = Placement()
        try:
            placement = Placement(
                n_users=rd.number(sec, p, "users", d.n_users, int),
                n_interferers=rd.number(sec, p, "interferers", d.n_interferers, int, nonneg=True),
                radius_km=rd.number(sec, p, "radius_km", d.radius_km, positive=True),
                user_eirp_w=rd.number(sec, p, "user_eirp_w", d.user_eirp_w, positive=True),
                interferer_eirp_w=rd.number(sec, p, "interferer_eirp_w", d.interferer_eirp_w,
                                            positive=True),
                min_separation_km=rd.number(sec, p, "min_separation_km", 0.0, nonneg=True),
                center_lat_deg=rd.number(sec, p, "center_lat_deg", None),
                center_lon_deg=rd.number(sec, p, "center_lon_deg", None))
        except ValueError as exc:
            raise rd.error(p, str(exc)) from None
        return None, placement

    if not isinstance(nodes_raw, list):
        raise rd.error(("nodes",), "expected a list of nodes")
    users, interferers = [], []
    counts = {Role.USER: 0, Role.INTERFERER: 0}
    seen = set()
    for i, raw in enumerate(nodes_raw):
        path = ("nodes", i)
        if not isinstance(raw, dict):
            raise rd.error(path, "expected a mapping")
        sec = rd.section(path, _NODE)
        try:
            role = Role(str(sec.get("role", "")).lower())
        except ValueError:
            raise rd.error(path + ("role",), "role must be user or interferer") from None
        counts[role] += 1
        default_id = ("U" if role is Role.USER else "I") + str(counts[role])
        node_id = str(sec.get("id", default_id))
        if node_id in seen:
            raise rd.error(path + ("id",), f"duplicate node id {node_id!r}")
        seen.add(node_id)
        for key in ("lat_deg", "lon_deg"):
            if key not in sec:
                raise rd.error(path, f"missing {key}")
        lat = rd.number(sec, path, "lat_deg", None)
        if not -90 <= lat <= 90:
            raise rd.error(path + ("lat_deg",), "latitude must lie in [-90, 90]")
        lon = rd.number(sec, path, "lon_deg", None)
        alt_m = rd.number(sec, path, "alt_m", 0.0)
        eirp = rd.number(sec, path, "eirp_w", 10.0, positive=True)
        pos = latlon_to_ecef(lat, lon, alt_m / 1000.0)
        node = GroundNode(node_id, role, tuple(pos), eirp, budget.carrier_frequency_hz)
        (users if role is Role.USER else interferers).append(node)
    if not users:
        raise rd.error(("nodes",), "at least one user is required")
    return WorldState(tuple(users), tuple(interferers)), None


def _read_bench(rd, solver):
    sec = rd.section(("bench",), _BENCH)
    p = ("bench",)
    algs = sec.get("algorithms", [a.value for a in Algorithm])
    if not isinstance(algs, list) or not algs:
        raise rd.error(p + ("algorithms",), "expected a non-empty list")
    try:
        algs = [Algorithm.parse(a).value for a in algs]
    except ValueError as exc:
        raise rd.error(p + ("algorithms",), str(exc)) from None
    return {
        "trials": rd.number(sec, p, "trials", 10, int, positive=True),
        "algorithms": algs,
        "users": rd.number(sec, p, "users", 1, int, positive=True),
        "interferers": rd.number(sec, p, "interferers", 4, int, nonneg=True),
        "user_eirp_w": rd.number(sec, p, "user_eirp_w", 10.0, positive=True),
        "interferer_eirp_w": rd.number(sec, p, "interferer_eirp_w", 1e4, positive=True),
        "max_off_nadir_deg": rd.number(sec, p, "max_off_nadir_deg", 55.0, positive=True),
        "altitude_km": rd.number(sec, p, "altitude_km", 800.0, positive=True),
        "seed": rd.number(sec, p, "seed", 0, int, nonneg=True),
    }


def _read_sweep(rd):
    sec = rd.section(("sweep",), _SWEEP)
    p = ("sweep",)
    axis = sec.get("axis")
    if axis is not None and axis not in SWEEP_AXES:
        raise rd.error(p + ("axis",), f"unknown axis {axis!r} (supported: {', '.join(SWEEP_AXES)})")
    seeds = sec.get("seeds", 1)
    if isinstance(seeds, list):
        seeds = rd.number_list(sec, p, "seeds", [], int)
    else:
        seeds = rd.number(sec, p, "seeds", 1, int, positive=True)
    return {
        "axis": axis,
        "values": rd.number_list(sec, p, "values", None),
        "delta_t_s": rd.number_list(sec, p, "delta_t_s", None),
        "seeds": seeds,
        "array_sizes": rd.number_list(sec, p, "array_sizes", None, int),
    }


def _read_footprint(rd):
    sec = rd.section(("footprint",), _FOOTPRINT)
    p = ("footprint",)
    d = GridSpec()
    out = {k: rd.number(sec, p, k, getattr(d, k)) for k in
           ("lat_min_deg", "lat_max_deg", "lon_min_deg", "lon_max_deg", "resolution_deg")}
    out["time_s"] = rd.number(sec, p, "time_s", 0.0, nonneg=True)
    try:
        GridSpec(**{k: v for k, v in out.items() if k != "time_s"})
    except ValueError as exc:
        raise rd.error(p, str(exc)) from None
    return out


def config_sha256(text: str) -> str:
    """Hash of the config text with line endings normalised."""
    norm = text.replace("\r\n", "\n").replace("\r", "\n")
    return hashlib.sha256(norm.encode("utf-8")).hexdigest()


def resolved_dict(loaded: LoadedConfig, raw_nodes=None) -> dict[str, Any]:
    """Config with every default filled in; parses back to the same scenario."""
    sc = loaded.scenario
    out: dict[str, Any] = {
        "master_seed": sc.master_seed,
        "duration_s": sc.duration_s,
        "eval_step_s": sc.eval_step_s,
        "epoch_offset_s": sc.epoch_offset_s,
        "mode": sc.mode.value,
        "reoptimize_each_step": sc.reoptimize_each_step,
        "orbit": {k: getattr(sc.orbital, k) for k in
                  ("semi_major_axis_km", "eccentricity", "inclination_deg", "raan_deg",
                   "arg_periapsis_deg", "true_anomaly_deg")},
        "array": {k: getattr(sc.geometry, k) for k in
                  ("m_rows", "n_cols", "dx_wavelengths", "dy_wavelengths")},
        "link": {k: getattr(sc.budget, k) for k in
                 ("carrier_frequency_hz", "bandwidth_hz", "noise_temperature_k")},
        "rem": {
            "update_interval_s": sc.rem_policy.update_interval_s,
            "known_interferers": ("all" if sc.rem_policy.known_interferer_count is None
                                  else sc.rem_policy.known_interferer_count),
            "position_error_km": sc.rem_policy.position_error_km,
            "random_subset": sc.rem_policy.random_subset,
        },
        "solver": {f.name: (getattr(sc.solver, f.name).value if f.name == "algorithm"
                            else getattr(sc.solver, f.name))
                   for f in fields(SolverConfig) if f.name != "seed"},
    }
    if sc.placement is not None:
        p = sc.placement
        out["placement"] = {
            "users": p.n_users, "interferers": p.n_interferers, "radius_km": p.radius_km,
            "user_eirp_w": p.user_eirp_w, "interferer_eirp_w": p.interferer_eirp_w,
            "min_separation_km": p.min_separation_km,
        }
        if p.center_lat_deg is not None:
            out["placement"]["center_lat_deg"] = p.center_lat_deg
            out["placement"]["center_lon_deg"] = p.center_lon_deg
    else:
        nodes = []
        raw_nodes = raw_nodes or []
        for raw, world_node in zip(raw_nodes, _ordered_nodes(sc.world, raw_nodes)):
            nodes.append({
                "id": world_node.id,
                "role": world_node.role.value,
                "lat_deg": float(raw["lat_deg"]),
                "lon_deg": float(raw["lon_deg"]),
                "alt_m": float(raw.get("alt_m", 0.0)),
                "eirp_w": world_node.eirp_w,
            })
        out["nodes"] = nodes
    out["bench"] = dict(loaded.bench)
    out["sweep"] = {k: v for k, v in loaded.sweep.items() if v is not None}
    out["footprint"] = dict(loaded.footprint)
    return out


def _ordered_nodes(world: WorldState, raw_nodes):
    """World nodes in the order they appeared in the file."""
    users = iter(world.users)
    ints = iter(world.interferers)
    for raw in raw_nodes:
        yield next(users) if str(raw.get("role", "")).lower() == "user" else next(ints)


def load_config(path, seed_override: int | None = None) -> LoadedConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", (), None, str(path)) from None
    return parse_config(text, str(path), seed_override)
