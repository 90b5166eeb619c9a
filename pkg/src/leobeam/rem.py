"""Ground truth registry and the satellite's view of it through the REM.

The radio environment map (REM) hands the satellite snapshots that can be
stale (refreshed every ``update_interval_s``), partial (only ``Q`` of the
``J`` interferers) and erroneous (interferer positions displaced by a fixed
ground distance in a random bearing). Users are always reported exactly.
"""

from __future__ import annotations

import csv
import enum
import math
import re
import zlib
from dataclasses import dataclass, field

import numpy as np

from .geom import ArrivalDirection, ecef_to_arrival, ground_displace

# Guards floor(t / dt) against t = i*dt landing one ulp low.
_FLOOR_EPS = 1e-9


class Role(enum.Enum):
    USER = "user"
    INTERFERER = "interferer"


@dataclass(frozen=True)
class GroundNode:
    id: str
    role: Role
    position: tuple[float, float, float]
    eirp_w: float
    carrier_hz: float = 1.575e9

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))
        object.__setattr__(self, "position", tuple(float(c) for c in self.position))
        if len(self.position) != 3 or not all(math.isfinite(c) for c in self.position):
            raise ValueError(f"node {self.id}: position must be three finite numbers")
        if not self.eirp_w > 0:
            raise ValueError(f"node {self.id}: eirp_w must be positive")

    @property
    def ecef(self) -> np.ndarray:
        return np.array(self.position)


def natural_key(node_id: str):
    """Sort key treating digit runs numerically, so I2 sorts before I10."""
    return [int(tok) if tok.isdigit() else tok for tok in re.split(r"(\d+)", node_id)]


@dataclass(frozen=True)
class WorldState:
    users: tuple[GroundNode, ...]
    interferers: tuple[GroundNode, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "interferers", tuple(self.interferers))
        if not self.users:
            raise ValueError("world needs at least one user")
        ids = [n.id for n in self.users + self.interferers]
        if len(set(ids)) != len(ids):
            raise ValueError("node ids must be unique")
        if any(n.role is not Role.USER for n in self.users):
            raise ValueError("users list holds a non-user node")
        if any(n.role is not Role.INTERFERER for n in self.interferers):
            raise ValueError("interferers list holds a non-interferer node")

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_interferers(self) -> int:
        return len(self.interferers)


@dataclass(frozen=True)
class RemPolicy:
    """How faithfully the REM tracks the world.

    ``known_interferer_count`` of ``None`` means every interferer is known.
    """

    update_interval_s: float = 1.0
    known_interferer_count: int | None = None
    position_error_km: float = 0.0
    error_seed: int = 0
    random_subset: bool = False

    def __post_init__(self):
        if not self.update_interval_s > 0:
            raise ValueError("update_interval_s must be positive")
        if self.known_interferer_count is not None and self.known_interferer_count < 0:
            raise ValueError("known_interferer_count must be >= 0")
        if self.position_error_km < 0:
            raise ValueError("position_error_km must be >= 0")

    def check(self, world: WorldState):
        q = self.known_interferer_count
        if q is not None and q > world.n_interferers:
            raise ValueError(
                f"known_interferer_count={q} exceeds the {world.n_interferers} interferers")

    def update_index(self, t: float) -> int:
        return int(math.floor(t / self.update_interval_s + _FLOOR_EPS))


@dataclass(frozen=True)
class RemSnapshot:
    timestamp_s: float
    update_index: int
    users: tuple[GroundNode, ...]
    interferers: tuple[GroundNode, ...] = field(default=())


def _node_rng(policy: RemPolicy, index: int, node_id: str, purpose: int):
    return np.random.default_rng(
        [policy.error_seed, index, zlib.crc32(node_id.encode()), purpose])


def _known_interferers(world: WorldState, policy: RemPolicy, index: int):
    nodes = sorted(world.interferers, key=lambda n: natural_key(n.id))
    q = policy.known_interferer_count
    if q is None or q >= len(nodes):
        return nodes
    if policy.random_subset:
        rng = np.random.default_rng([policy.error_seed, index, 0x5EB])
        pick = np.sort(rng.choice(len(nodes), size=q, replace=False))
        return [nodes[i] for i in pick]
    return nodes[:q]


def query(world: WorldState, policy: RemPolicy, t: float) -> RemSnapshot:
    """Latest REM snapshot available at time ``t``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    policy.check(world)
    i = policy.update_index(t)
    reported = []
    for node in _known_interferers(world, policy, i):
        if policy.position_error_km > 0:
            bearing = _node_rng(policy, i, node.id, 1).uniform(0.0, 2 * math.pi)
            pos = ground_displace(node.ecef, policy.position_error_km, bearing)
            node = GroundNode(node.id, node.role, tuple(pos), node.eirp_w, node.carrier_hz)
        reported.append(node)
    return RemSnapshot(i * policy.update_interval_s, i, world.users, tuple(reported))


def perturbed_arrival(sat, true_node: GroundNode, reported_position):
    """True and REM-estimated arrival directions of one node.

    The angle error is whatever the reported position implies geometrically.
    """
    true = ecef_to_arrival(sat, true_node.ecef)
    est = ecef_to_arrival(sat, np.asarray(reported_position, dtype=float))
    return true, est


def angle_error(true: ArrivalDirection, est: ArrivalDirection):
    """(off-nadir error, wrapped azimuth error) in radians."""
    d_theta = est.off_nadir_rad - true.off_nadir_rad
    d_phi = math.remainder(est.azimuth_rad - true.azimuth_rad, 2 * math.pi)
    return d_theta, d_phi


def write_snapshot_csv(snapshots, path):
    """Write one snapshot or a sequence of them, one row per reported node."""
    if isinstance(snapshots, RemSnapshot):
        snapshots = [snapshots]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp_s", "id", "role", "x_km", "y_km", "z_km", "eirp_w"])
        for snap in snapshots:
            for node in snap.users + snap.interferers:
                w.writerow([repr(float(snap.timestamp_s)), node.id, node.role.value,
                            *(repr(c) for c in node.position), repr(node.eirp_w)])
