"""Planar array geometry, steering vectors and array factor.

Elements are stacked column-major: all M rows of column 1, then column 2,
and so on, so element ``(m, n)`` (zero-based) sits at flat index ``m + n*M``.
The array lies in the satellite's local North-East plane with boresight
along Down, so arrival directions from :mod:`leobeam.geom` plug in directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .geom import ArrivalDirection

SUM_TOL = 1e-9


@dataclass(frozen=True)
class ArrayGeometry:
    m_rows: int = 4
    n_cols: int = 4
    dx_wavelengths: float = 0.5
    dy_wavelengths: float = 0.5

    def __post_init__(self):
        if self.m_rows < 1 or self.n_cols < 1:
            raise ValueError("array needs at least one row and one column")
        if self.dx_wavelengths <= 0 or self.dy_wavelengths <= 0:
            raise ValueError("element spacings must be positive")

    @property
    def size(self) -> int:
        return self.m_rows * self.n_cols

    @property
    def label(self) -> str:
        return f"{self.m_rows}x{self.n_cols}"

    @cached_property
    def _grid_indices(self):
        m = np.tile(np.arange(self.m_rows), self.n_cols)
        n = np.repeat(np.arange(self.n_cols), self.m_rows)
        return m, n

    def element_positions(self, wavelength: float) -> np.ndarray:
        """``(MN, 3)`` element coordinates in the units of ``wavelength``."""
        m, n = self._grid_indices
        return np.stack([m * self.dx_wavelengths * wavelength,
                         n * self.dy_wavelengths * wavelength,
                         np.zeros(self.size)], axis=-1)

    def grid_offsets(self) -> np.ndarray:
        """``(MN, 2)`` element offsets in wavelengths (x, y)."""
        m, n = self._grid_indices
        return np.stack([m * self.dx_wavelengths, n * self.dy_wavelengths], axis=-1)


class WeightVector:
    """Feasible complex excitations ``a * exp(j*psi)`` for one data stream.

    Enforces ``sum(a) <= 1``. Phases are reported in ``[0, 2*pi)``.
    """

    def __init__(self, weights):
        w = np.asarray(weights, dtype=complex).ravel()
        if w.size == 0:
            raise ValueError("weight vector is empty")
        total = float(np.abs(w).sum())
        if total > 1.0 + SUM_TOL:
            raise ValueError(f"sum of amplitudes {total:.12g} exceeds 1")
        self.weights = w

    @classmethod
    def from_polar(cls, amplitudes, phases) -> "WeightVector":
        a = np.asarray(amplitudes, dtype=float)
        if np.any(a < 0):
            raise ValueError("amplitudes must be non-negative")
        return cls(a * np.exp(1j * np.asarray(phases, dtype=float)))

    @property
    def amplitudes(self) -> np.ndarray:
        return np.abs(self.weights)

    @property
    def phases(self) -> np.ndarray:
        psi = np.mod(np.angle(self.weights), 2 * np.pi)
        return np.where(psi >= 2 * np.pi, 0.0, psi)

    def __len__(self):
        return self.weights.size

    def __array__(self, dtype=None, copy=None):
        return self.weights if dtype is None else self.weights.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, WeightVector):
            return NotImplemented
        return np.array_equal(self.weights, other.weights)

    def __repr__(self):
        return f"WeightVector(n={self.weights.size}, sum_abs={self.amplitudes.sum():.6g})"


def _as_weights(weights) -> np.ndarray:
    if isinstance(weights, WeightVector):
        return weights.weights
    return np.asarray(weights, dtype=complex)


def wave_vector(direction: ArrivalDirection, wavelength: float) -> np.ndarray:
    """Wave vector ``(2*pi/lambda) * (sin t cos p, sin t sin p, cos t)``."""
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    th = np.asarray(direction.off_nadir_rad, dtype=float)
    ph = np.asarray(direction.azimuth_rad, dtype=float)
    k = 2 * np.pi / wavelength
    return k * np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1)


def steering_vector(geometry: ArrayGeometry, direction: ArrivalDirection,
                    wavelength: float) -> np.ndarray:
    """Per-element phase delays ``exp(-j k.r)``.

    Shape ``(MN,)`` for a single direction, ``(n, MN)`` for array-valued ones.
    """
    k = wave_vector(direction, wavelength)
    r = geometry.element_positions(wavelength)
    return np.exp(-1j * (k @ r.T))


def array_factor(geometry: ArrayGeometry, weights, direction: ArrivalDirection,
                 wavelength: float):
    """Weighted double sum over the lattice, evaluated term by term."""
    w = _as_weights(weights)
    if w.shape[-1] != geometry.size:
        raise ValueError(f"expected {geometry.size} weights, got {w.shape[-1]}")
    th = np.asarray(direction.off_nadir_rad, dtype=float)[..., None]
    ph = np.asarray(direction.azimuth_rad, dtype=float)[..., None]
    offsets = geometry.grid_offsets()
    # spacings are already in wavelengths, so 2*pi/lambda * d reduces to 2*pi*d
    phase = 2 * np.pi * (offsets[:, 0] * np.sin(th) * np.cos(ph)
                         + offsets[:, 1] * np.sin(th) * np.sin(ph))
    af = np.sum(w * np.exp(-1j * phase), axis=-1)
    return af[()] if af.ndim == 0 else af


def element_factor(direction: ArrivalDirection):
    """Isotropic elements."""
    return np.ones_like(np.asarray(direction.off_nadir_rad, dtype=float))[()]


def total_field(geometry: ArrayGeometry, weights, direction: ArrivalDirection,
                wavelength: float):
    return element_factor(direction) * array_factor(geometry, weights, direction, wavelength)


def array_output(weights, inputs):
    """Combiner output ``W^T X`` for stacked element inputs."""
    w = _as_weights(weights)
    x = np.asarray(inputs, dtype=complex)
    if w.shape[-1] != x.shape[-1]:
        raise ValueError(f"dimension mismatch: {w.shape[-1]} weights, {x.shape[-1]} inputs")
    return np.sum(w * x, axis=-1)[()]


def conjugate_match(geometry: ArrayGeometry, direction: ArrivalDirection,
                    wavelength: float) -> WeightVector:
    """Uniform-amplitude weights phased to peak the array factor at ``direction``."""
    v = steering_vector(geometry, direction, wavelength)
    return WeightVector(np.conj(v) / geometry.size)
