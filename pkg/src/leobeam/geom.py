"""Orbit propagation and satellite-centred arrival geometry.

Everything lives on a spherical Earth. Positions are Earth-fixed Cartesian
vectors in kilometres (shape ``(3,)`` or ``(n, 3)``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MU_EARTH = 398600.4418  # km^3/s^2
OMEGA_EARTH = 7.2921159e-5  # rad/s
R_EARTH = 6371.0  # km, mean spherical radius used for ground nodes
R_EQUATORIAL = 6378.137  # km

KEPLER_TOL = 1e-12
KEPLER_MAX_ITER = 50


def _wrap_deg(angle: float) -> float:
    wrapped = math.fmod(angle, 360.0)
    if wrapped < 0.0:
        wrapped += 360.0
    # fmod can hand back 360.0 for tiny negative inputs
    return 0.0 if wrapped >= 360.0 else wrapped


@dataclass(frozen=True)
class OrbitalElements:
    """Classical Keplerian element set; angles in degrees."""

    semi_major_axis_km: float
    eccentricity: float
    inclination_deg: float
    raan_deg: float
    arg_periapsis_deg: float
    true_anomaly_deg: float

    def __post_init__(self):
        values = (self.semi_major_axis_km, self.eccentricity, self.inclination_deg,
                  self.raan_deg, self.arg_periapsis_deg, self.true_anomaly_deg)
        if not all(math.isfinite(v) for v in values):
            raise ValueError("orbital elements must be finite")
        if self.semi_major_axis_km <= R_EQUATORIAL:
            raise ValueError(
                f"semi_major_axis_km={self.semi_major_axis_km} is inside the Earth")
        if not 0.0 <= self.eccentricity < 1.0:
            raise ValueError(f"eccentricity={self.eccentricity} must lie in [0, 1)")
        for name in ("inclination_deg", "raan_deg", "arg_periapsis_deg", "true_anomaly_deg"):
            object.__setattr__(self, name, _wrap_deg(float(getattr(self, name))))

    @property
    def period_s(self) -> float:
        return 2.0 * math.pi * math.sqrt(self.semi_major_axis_km ** 3 / MU_EARTH)

    @property
    def mean_motion(self) -> float:
        """Mean motion in rad/s."""
        return math.sqrt(MU_EARTH / self.semi_major_axis_km ** 3)


# Reference LEO orbit (800 km altitude, near-polar).
REFERENCE_ORBIT = OrbitalElements(
    semi_major_axis_km=7173.0,
    eccentricity=0.0,
    inclination_deg=86.39,
    raan_deg=146.16,
    arg_periapsis_deg=269.5,
    true_anomaly_deg=0.6,
)


@dataclass(frozen=True)
class ArrivalDirection:
    """Direction of a ground point seen from the satellite.

    ``off_nadir_rad`` is the polar angle measured from the nadir (array
    boresight) and ``azimuth_rad`` is measured from local North toward East.
    Fields may be scalars or equally shaped arrays.
    """

    azimuth_rad: float | np.ndarray
    off_nadir_rad: float | np.ndarray
    range_km: float | np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.range_km) <= 0):
            raise ValueError("range_km must be positive")
        az = np.asarray(self.azimuth_rad)
        if np.any((az < 0) | (az >= 2 * np.pi)):
            raise ValueError("azimuth_rad must lie in [0, 2*pi)")
        th = np.asarray(self.off_nadir_rad)
        if np.any((th < 0) | (th > np.pi)):
            raise ValueError("off_nadir_rad must lie in [0, pi]")

    @classmethod
    def from_angles(cls, azimuth_rad, off_nadir_rad, range_km=1.0) -> "ArrivalDirection":
        """Build a direction, wrapping the azimuth into [0, 2*pi)."""
        az = np.mod(azimuth_rad, 2 * np.pi)
        az = np.where(az >= 2 * np.pi, 0.0, az)
        if np.ndim(az) == 0:
            az = float(az)
        return cls(az, off_nadir_rad, range_km)

    def __len__(self):
        return int(np.size(self.range_km))

    def __getitem__(self, idx) -> "ArrivalDirection":
        return ArrivalDirection(np.asarray(self.azimuth_rad)[idx],
                                np.asarray(self.off_nadir_rad)[idx],
                                np.asarray(self.range_km)[idx])


def _rot1(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot3(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def solve_kepler(mean_anomaly, eccentricity: float):
    """Eccentric anomaly from mean anomaly by Newton iteration."""
    M = np.asarray(mean_anomaly, dtype=float)
    if eccentricity > 0.8:
        E = M + eccentricity * np.sign(np.sin(M))
    else:
        E = M.copy()
    for _ in range(KEPLER_MAX_ITER):
        step = (E - eccentricity * np.sin(E) - M) / (1.0 - eccentricity * np.cos(E))
        E = E - step
        if np.all(np.abs(step) < KEPLER_TOL):
            break
    return E


def _anomaly_to_mean(nu: float, e: float) -> float:
    E = 2.0 * math.atan2(math.sqrt(1.0 - e) * math.sin(nu / 2.0),
                         math.sqrt(1.0 + e) * math.cos(nu / 2.0))
    return E - e * math.sin(E)


def propagate_inertial(elements: OrbitalElements, t):
    """Two-body position in the inertial frame (km) at ``t`` seconds after epoch."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("t must be non-negative")
    e = elements.eccentricity
    a = elements.semi_major_axis_km
    M0 = _anomaly_to_mean(math.radians(elements.true_anomaly_deg), e)
    E = solve_kepler(M0 + elements.mean_motion * t_arr, e)
    nu = 2.0 * np.arctan2(math.sqrt(1.0 + e) * np.sin(E / 2.0),
                          math.sqrt(1.0 - e) * np.cos(E / 2.0))
    r = a * (1.0 - e * np.cos(E))
    perifocal = np.stack([r * np.cos(nu), r * np.sin(nu), np.zeros_like(r)], axis=-1)
    rot = (_rot3(math.radians(elements.raan_deg))
           @ _rot1(math.radians(elements.inclination_deg))
           @ _rot3(math.radians(elements.arg_periapsis_deg)))
    return perifocal @ rot.T


def inertial_to_ecef(r_inertial, t):
    """Rotate inertial positions into the Earth-fixed frame (Earth angle 0 at t=0)."""
    r = np.asarray(r_inertial, dtype=float)
    g = OMEGA_EARTH * np.asarray(t, dtype=float)
    c, s = np.cos(g), np.sin(g)
    x, y, z = r[..., 0], r[..., 1], r[..., 2]
    return np.stack([c * x + s * y, -s * x + c * y, z], axis=-1)


def propagate(elements: OrbitalElements, t):
    """Satellite Earth-fixed position (km) at ``t`` seconds after epoch.

    ``t`` may be a scalar (result shape ``(3,)``) or an array (``(n, 3)``).
    """
    return inertial_to_ecef(propagate_inertial(elements, t), t)


def latlon_to_ecef(lat_deg, lon_deg, alt_km=0.0, radius_km: float = R_EARTH):
    lat = np.radians(lat_deg)
    lon = np.radians(lon_deg)
    r = radius_km + np.asarray(alt_km, dtype=float)
    return np.stack([r * np.cos(lat) * np.cos(lon),
                     r * np.cos(lat) * np.sin(lon),
                     r * np.sin(lat)], axis=-1)


def ecef_to_latlon(position):
    """Geocentric latitude, longitude (degrees) and radius (km)."""
    p = np.asarray(position, dtype=float)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    r = np.sqrt(x * x + y * y + z * z)
    return np.degrees(np.arcsin(z / r)), np.degrees(np.arctan2(y, x)), r


def ned_basis(sat):
    """Rows are the North, East and Down unit vectors at ``sat`` (geocentric)."""
    p = np.asarray(sat, dtype=float)
    lat = np.arctan2(p[2], math.hypot(p[0], p[1]))
    lon = math.atan2(p[1], p[0])
    sl, cl = math.sin(lat), math.cos(lat)
    so, co = math.sin(lon), math.cos(lon)
    return np.array([
        [-sl * co, -sl * so, cl],
        [-so, co, 0.0],
        [-cl * co, -cl * so, -sl],
    ])


def ecef_to_ned(sat, ground):
    """Ground positions expressed in the satellite's NED frame (km)."""
    rel = np.asarray(ground, dtype=float) - np.asarray(sat, dtype=float)
    return rel @ ned_basis(sat).T


def ecef_to_arrival(sat, ground) -> ArrivalDirection:
    """Arrival direction of ``ground`` (one point or ``(n, 3)``) seen from ``sat``."""
    sat = np.asarray(sat, dtype=float)
    ground = np.asarray(ground, dtype=float)
    ned = ecef_to_ned(sat, ground)
    rng = np.linalg.norm(ned, axis=-1)
    if np.any(rng == 0):
        raise ValueError("satellite and ground positions coincide")
    if np.any(np.linalg.norm(ground, axis=-1) >= np.linalg.norm(sat)):
        raise ValueError("ground point must lie below the satellite radius")
    theta = np.arccos(np.clip(ned[..., 2] / rng, -1.0, 1.0))
    phi = np.mod(np.arctan2(ned[..., 1], ned[..., 0]), 2 * np.pi)
    phi = np.where(phi >= 2 * np.pi, 0.0, phi)
    if ned.ndim == 1:
        return ArrivalDirection(float(phi), float(theta), float(rng))
    return ArrivalDirection(phi, theta, rng)


def arrival_to_ecef(sat, direction: ArrivalDirection):
    """Inverse of :func:`ecef_to_arrival`."""
    th = np.asarray(direction.off_nadir_rad)
    ph = np.asarray(direction.azimuth_rad)
    rho = np.asarray(direction.range_km)
    ned = np.stack([rho * np.sin(th) * np.cos(ph),
                    rho * np.sin(th) * np.sin(ph),
                    rho * np.cos(th)], axis=-1)
    return np.asarray(sat, dtype=float) + ned @ ned_basis(sat)


def ground_displace(ground, distance_km: float, bearing_rad: float):
    """Move a ground point ``distance_km`` along the surface toward ``bearing_rad``.

    The bearing is measured from local North toward East. The point travels on
    the great circle leaving along that tangent direction, so the result stays
    on the sphere through ``ground`` and the surface distance is exact.
    """
    if distance_km < 0:
        raise ValueError("distance_km must be non-negative")
    p = np.asarray(ground, dtype=float)
    if distance_km == 0:
        return p.copy()
    radius = float(np.linalg.norm(p))
    up = p / radius
    north, east, _ = ned_basis(p)
    tangent = math.cos(bearing_rad) * north + math.sin(bearing_rad) * east
    delta = distance_km / radius
    return radius * (math.cos(delta) * up + math.sin(delta) * tangent)


def great_circle_km(a, b, radius_km: float | None = None):
    """Surface distance between two points (km) on a sphere."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if radius_km is None:
        radius_km = float(np.linalg.norm(a, axis=-1).mean())
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    dot = np.sum(a * b, axis=-1)
    return radius_km * np.arctan2(cross, dot)


def slant_range_km(off_nadir_rad, sat_radius_km: float, ground_radius_km: float = R_EARTH):
    """Range to the Earth surface along a ray ``off_nadir_rad`` from nadir.

    Returns NaN where the ray misses the Earth.
    """
    th = np.asarray(off_nadir_rad, dtype=float)
    disc = ground_radius_km ** 2 - (sat_radius_km * np.sin(th)) ** 2
    with np.errstate(invalid="ignore"):
        return np.where(disc >= 0, sat_radius_km * np.cos(th) - np.sqrt(disc), np.nan)


def is_visible(sat, ground):
    """True where the satellite is above the local horizon of ``ground``."""
    g = np.asarray(ground, dtype=float)
    return np.sum(g * (np.asarray(sat, dtype=float) - g), axis=-1) > 0


def arrival_many(sats, grounds) -> ArrivalDirection:
    """Arrival directions for every (satellite epoch, ground point) pair.

    ``sats`` is ``(T, 3)`` and ``grounds`` ``(N, 3)``; fields come back ``(T, N)``.
    """
    sats = np.atleast_2d(np.asarray(sats, dtype=float))
    grounds = np.atleast_2d(np.asarray(grounds, dtype=float))
    lat = np.arctan2(sats[:, 2], np.hypot(sats[:, 0], sats[:, 1]))
    lon = np.arctan2(sats[:, 1], sats[:, 0])
    sl, cl, so, co = np.sin(lat), np.cos(lat), np.sin(lon), np.cos(lon)
    north = np.stack([-sl * co, -sl * so, cl], axis=-1)
    east = np.stack([-so, co, np.zeros_like(so)], axis=-1)
    down = np.stack([-cl * co, -cl * so, -sl], axis=-1)
    rel = grounds[None, :, :] - sats[:, None, :]
    n = np.einsum("tnc,tc->tn", rel, north)
    e = np.einsum("tnc,tc->tn", rel, east)
    d = np.einsum("tnc,tc->tn", rel, down)
    rng = np.sqrt(n * n + e * e + d * d)
    if np.any(rng == 0):
        raise ValueError("satellite and ground positions coincide")
    theta = np.arccos(np.clip(d / rng, -1.0, 1.0))
    phi = np.mod(np.arctan2(e, n), 2 * np.pi)
    phi = np.where(phi >= 2 * np.pi, 0.0, phi)
    return ArrivalDirection(phi, theta, rng)
