"""Total-capacity objective over raw (amplitude, phase) parameter vectors.

A candidate for one stream is ``2*MN`` reals: raw amplitudes in ``[0, 1]``
followed by unwrapped phases. Raw amplitudes summing above one are rescaled
onto the simplex face, which keeps every solver's search space a box. In
digital mode the candidate concatenates one such block per user.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..array import ArrayGeometry, WeightVector
from ..geom import ArrivalDirection
from ..link import BeamformingMode, LinkBudget, channel, sinr_batch


def _stack_channels(geometry, budget, nodes):
    if not nodes:
        return np.zeros((0, geometry.size), dtype=complex), np.zeros(0)
    dirs = ArrivalDirection(np.array([d.azimuth_rad for d, _ in nodes], dtype=float),
                            np.array([d.off_nadir_rad for d, _ in nodes], dtype=float),
                            np.array([d.range_km for d, _ in nodes], dtype=float))
    H = channel(geometry, dirs, budget.wavelength_m)
    return H, np.array([p for _, p in nodes], dtype=float)


@dataclass(frozen=True, eq=False)
class ObjectiveSpec:
    """One instance of the weight-design problem.

    ``users`` and ``interferers`` are sequences of ``(ArrivalDirection, eirp_w)``
    pairs as the optimizer believes them to be.
    """

    mode: BeamformingMode
    users: Sequence
    interferers: Sequence
    geometry: ArrayGeometry = field(default_factory=ArrayGeometry)
    budget: LinkBudget = field(default_factory=LinkBudget)
    noise_power_w: float | None = None

    def __post_init__(self):
        if len(self.users) < 1:
            raise ValueError("objective needs at least one user (K >= 1)")
        for _, p in list(self.users) + list(self.interferers):
            if p < 0:
                raise ValueError("EIRP must be non-negative")
        Hu, Pu = _stack_channels(self.geometry, self.budget, list(self.users))
        Hi, Pi = _stack_channels(self.geometry, self.budget, list(self.interferers))
        object.__setattr__(self, "user_channels", Hu)
        object.__setattr__(self, "user_powers", Pu)
        object.__setattr__(self, "interferer_channels", Hi)
        object.__setattr__(self, "interferer_powers", Pi)
        if self.noise_power_w is None:
            object.__setattr__(self, "noise_power_w", self.budget.noise_power_w)

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_streams(self) -> int:
        return self.n_users if self.mode is BeamformingMode.DIGITAL else 1

    @property
    def stream_dim(self) -> int:
        return 2 * self.geometry.size

    @property
    def dim(self) -> int:
        return self.n_streams * self.stream_dim

    def stream(self, k: int) -> "ObjectiveSpec":
        """Single-user digital sub-problem for stream ``k``.

        Digital capacity is a sum of terms each depending on one stream only,
        so the streams can be optimized independently.
        """
        return ObjectiveSpec(BeamformingMode.DIGITAL, [self.users[k]], self.interferers,
                             self.geometry, self.budget, self.noise_power_w)

    # -- mapping -----------------------------------------------------------

    def decode(self, X) -> np.ndarray:
        """Raw candidates ``(P, dim)`` to complex weights ``(P, S, MN)``."""
        X = np.asarray(X, dtype=float)
        n = self.geometry.size
        blocks = X.reshape(X.shape[0], self.n_streams, 2 * n)
        amp = np.clip(blocks[..., :n], 0.0, 1.0)
        total = amp.sum(axis=-1, keepdims=True)
        amp = np.where(total > 1.0, amp / np.where(total > 0, total, 1.0), amp)
        return amp * np.exp(1j * blocks[..., n:])

    def weight_vectors(self, candidate) -> list[WeightVector]:
        W = self.decode(np.asarray(candidate, dtype=float)[None, :])[0]
        return [WeightVector(w) for w in W]

    def encode(self, weights: Sequence) -> np.ndarray:
        """Inverse of :meth:`decode` for feasible weight vectors."""
        parts = []
        for w in weights:
            w = np.asarray(w.weights if isinstance(w, WeightVector) else w, dtype=complex)
            parts.append(np.concatenate([np.abs(w), np.mod(np.angle(w), 2 * np.pi)]))
        return np.concatenate(parts)

    # -- evaluation --------------------------------------------------------

    def sinr_for_weights(self, W) -> np.ndarray:
        """Per-user SINR ``(P, K)`` for decoded weights ``(P, S, MN)``."""
        if self.mode is BeamformingMode.ANALOG:
            W = W[:, 0, :]
        return sinr_batch(W, self.user_channels, self.user_powers,
                          self.interferer_channels, self.interferer_powers,
                          self.noise_power_w)

    def sinr(self, X) -> np.ndarray:
        return self.sinr_for_weights(self.decode(np.atleast_2d(X)))

    def capacity_batch(self, X) -> np.ndarray:
        """Total capacity (bit/s) of each row of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise ValueError(f"candidate length {X.shape[1]} != {self.dim}")
        gamma = self.sinr(X)
        lam = self.mode.lambda_factor(self.n_users)
        return lam * self.budget.bandwidth_hz * np.log2(1.0 + gamma).sum(axis=1)

    def default_candidate(self) -> np.ndarray:
        """Uniform amplitudes ``1/MN`` phased toward user 1 (per stream in digital)."""
        n = self.geometry.size
        blocks = []
        for s in range(self.n_streams):
            h = self.user_channels[s]
            blocks.append(np.concatenate([np.full(n, 1.0 / n),
                                          np.mod(-np.angle(h), 2 * np.pi)]))
        return np.concatenate(blocks)

    def scales(self) -> np.ndarray:
        """Characteristic step size of each raw coordinate."""
        n = self.geometry.size
        block = np.concatenate([np.full(n, 1.0 / n), np.ones(n)])
        return np.tile(block, self.n_streams)

    def lower_bounds(self) -> np.ndarray:
        n = self.geometry.size
        return np.tile(np.concatenate([np.zeros(n), np.full(n, -np.inf)]), self.n_streams)

    def upper_bounds(self) -> np.ndarray:
        n = self.geometry.size
        return np.tile(np.concatenate([np.ones(n), np.full(n, np.inf)]), self.n_streams)


def evaluate_objective(spec: ObjectiveSpec, candidate) -> float:
    """Total capacity in bit/s for a single raw candidate."""
    c = np.asarray(candidate, dtype=float)
    if c.ndim != 1 or c.size != spec.dim:
        raise ValueError(f"candidate length {c.size} != {spec.dim}")
    return float(spec.capacity_batch(c[None, :])[0])
