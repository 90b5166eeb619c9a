"""Channel vectors, SINR and capacity for analog and digital beamforming.

All inner products use the combiner form ``W^T H`` (the array output of the
stacked element signals). Under that convention the array factor of a weight
vector is exactly its gain toward a direction and the matched filter is
``W ~ conj(H)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .array import ArrayGeometry, WeightVector, steering_vector
from .geom import ArrivalDirection

BOLTZMANN = 1.38e-23  # J/K
SPEED_OF_LIGHT = 299_792_458.0  # m/s


@dataclass(frozen=True)
class LinkBudget:
    """Uplink receiver parameters. Defaults: L-band, 20 MHz, 290 K."""

    carrier_frequency_hz: float = 1.575e9
    bandwidth_hz: float = 20e6
    noise_temperature_k: float = 290.0

    def __post_init__(self):
        for name in ("carrier_frequency_hz", "bandwidth_hz", "noise_temperature_k"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency_hz

    @property
    def noise_power_w(self) -> float:
        return BOLTZMANN * self.bandwidth_hz * self.noise_temperature_k


class BeamformingMode(enum.Enum):
    ANALOG = "analog"
    DIGITAL = "digital"

    def lambda_factor(self, n_users: int) -> float:
        if n_users < 1:
            raise ValueError("need at least one user")
        return 1.0 / n_users if self is BeamformingMode.ANALOG else 1.0


def fspl_amplitude(wavelength, range_):
    """Amplitude path-loss factor ``lambda / (4*pi*range)`` (same length units).

    Its square is the power-domain free-space loss.
    """
    rho = np.asarray(range_, dtype=float)
    if np.any(rho <= 0):
        raise ValueError("range must be positive")
    return (wavelength / (4 * np.pi * rho))[()]


def fspl_db(wavelength, range_):
    """Free-space loss in dB (positive number)."""
    return -20.0 * np.log10(fspl_amplitude(wavelength, range_))


def channel(geometry: ArrayGeometry, direction: ArrivalDirection, wavelength_m: float):
    """Channel vector(s) ``L * V(k)`` with range taken from ``direction.range_km``."""
    amp = fspl_amplitude(wavelength_m, np.asarray(direction.range_km) * 1e3)
    v = steering_vector(geometry, direction, wavelength_m)
    return np.asarray(amp)[..., None] * v


def _weights(w):
    arr = np.asarray(w.weights if isinstance(w, WeightVector) else w, dtype=complex)
    if arr.size == 0:
        raise ValueError("weight vector is empty")
    return arr


def sinr_batch(weights, user_channels, user_powers, interferer_channels,
               interferer_powers, noise_power):
    """SINR of every user for every candidate weight vector.

    ``weights`` is ``(P, MN)``, or ``(P, K, MN)`` when each user has its own
    stream. Returns ``(P, K)``. A zero weight vector yields zero SINR.
    """
    W = np.asarray(weights, dtype=complex)
    Hu = np.atleast_2d(np.asarray(user_channels, dtype=complex))
    Pu = np.atleast_1d(np.asarray(user_powers, dtype=float))
    Hi = np.asarray(interferer_channels, dtype=complex).reshape(-1, Hu.shape[-1])
    Pi = np.atleast_1d(np.asarray(interferer_powers, dtype=float)).reshape(-1)
    if np.any(Pu < 0) or np.any(Pi < 0) or noise_power < 0:
        raise ValueError("powers must be non-negative")
    if W.ndim == 2:
        sig = np.abs(W @ Hu.T) ** 2 * Pu                      # (P, K)
        intf = (np.abs(W @ Hi.T) ** 2) @ Pi                   # (P,)
        noise = noise_power * np.sum(np.abs(W) ** 2, axis=-1)  # (P,)
        den = (intf + noise)[:, None]
    else:
        sig = np.abs(np.einsum("pkd,kd->pk", W, Hu)) ** 2 * Pu
        intf = (np.abs(np.einsum("pkd,jd->pkj", W, Hi)) ** 2) @ Pi
        noise = noise_power * np.sum(np.abs(W) ** 2, axis=-1)
        den = intf + noise
    with np.errstate(divide="ignore", invalid="ignore"):
        gamma = np.where(den > 0, sig / den, 0.0)
    return gamma


def sinr(weights, user_channel, user_power, interferer_channels, interferer_powers,
         noise_power) -> float:
    """Linear SINR of one user after combining with ``weights``.

    ``P_k |W^T H_k|^2 / (sum_j P_j |W^T H_j|^2 + noise * ||W||^2)``
    """
    w = _weights(weights)
    gamma = sinr_batch(w[None, :], np.asarray(user_channel)[None, :], [user_power],
                       interferer_channels, interferer_powers, noise_power)
    return float(gamma[0, 0])


def throughput(gamma, bandwidth_hz):
    """Shannon rate in bit/s."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise ValueError("SINR must be non-negative")
    return (bandwidth_hz * np.log2(1.0 + g))[()]


def total_capacity(mode: BeamformingMode, per_user_capacities) -> float:
    caps = np.asarray(per_user_capacities, dtype=float)
    if caps.size == 0:
        raise ValueError("no users")
    return float(mode.lambda_factor(caps.size) * caps.sum())


def beam_gain(weights, channel_vectors):
    """Combined power gain ``|W^T H|^2`` for one or more channels."""
    return np.abs(np.asarray(channel_vectors, dtype=complex) @ _weights(weights)) ** 2
