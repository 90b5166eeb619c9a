import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from leobeam.geom import (
    MU_EARTH,
    R_EARTH,
    REFERENCE_ORBIT,
    ArrivalDirection,
    OrbitalElements,
    arrival_many,
    arrival_to_ecef,
    ecef_to_arrival,
    ecef_to_latlon,
    ecef_to_ned,
    great_circle_km,
    ground_displace,
    is_visible,
    latlon_to_ecef,
    ned_basis,
    propagate,
    propagate_inertial,
    slant_range_km,
    solve_kepler,
)


def _rot_z(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _two_body_period(elements):
    """Time for the integrated trajectory to sweep a full revolution."""
    # start one millisecond in so the central difference needs no negative time
    dt = 1e-3
    r0 = propagate_inertial(elements, dt)
    v0 = (propagate_inertial(elements, 2 * dt) - propagate_inertial(elements, 0.0)) / (2 * dt)

    def rhs(t, y):
        r = y[:3]
        return np.concatenate([y[3:], -MU_EARTH * r / np.linalg.norm(r) ** 3])

    h = np.cross(r0, v0)
    side = np.cross(h, r0)

    def back_at_start(t, y):
        return float(np.dot(y[:3], side))
    back_at_start.direction = 1.0

    T0 = 2 * math.pi * math.sqrt(elements.semi_major_axis_km ** 3 / MU_EARTH)
    sol = solve_ivp(rhs, (0.0, 1.2 * T0), np.concatenate([r0, v0]), method="DOP853",
                    rtol=1e-12, atol=1e-9, events=back_at_start, dense_output=True)
    crossings = [t for t in sol.t_events[0] if t > 0.5 * T0]
    return crossings[0], sol, dt


# -- orbital elements ---------------------------------------------------------

def test_elements_validation():
    with pytest.raises(ValueError):
        OrbitalElements(6000.0, 0.0, 0, 0, 0, 0)
    with pytest.raises(ValueError):
        OrbitalElements(7000.0, 1.0, 0, 0, 0, 0)
    with pytest.raises(ValueError):
        OrbitalElements(7000.0, 0.0, float("nan"), 0, 0, 0)
    el = OrbitalElements(7000.0, 0.0, -10.0, 370.0, 720.0, -0.5)
    assert 0 <= el.inclination_deg < 360 and el.raan_deg == pytest.approx(10.0)
    assert el.true_anomaly_deg == pytest.approx(359.5)


def test_table1_radius_at_epoch():
    r = np.linalg.norm(propagate(REFERENCE_ORBIT, 0.0))
    assert r == pytest.approx(7173.0, abs=1e-6)


def test_period_against_numerical_integration():
    T_closed = 2 * math.pi * math.sqrt(7173.0 ** 3 / 398600.4418)
    T_num, sol, t0 = _two_body_period(REFERENCE_ORBIT)
    assert REFERENCE_ORBIT.period_s == pytest.approx(T_closed, rel=1e-12)
    assert T_num == pytest.approx(T_closed, rel=1e-6)
    # analytic propagation follows the integrated trajectory
    for t in np.linspace(0, T_closed, 7):
        assert np.allclose(propagate_inertial(REFERENCE_ORBIT, t + t0), sol.sol(t)[:3], atol=1e-4)


def test_inertial_position_repeats_after_one_period():
    el = REFERENCE_ORBIT
    a = propagate_inertial(el, 0.0)
    b = propagate_inertial(el, el.period_s)
    assert np.linalg.norm(a - b) < 1e-6


def test_circular_radius_constant_over_period():
    t = np.linspace(0, REFERENCE_ORBIT.period_s, 500)
    r = np.linalg.norm(propagate(REFERENCE_ORBIT, t), axis=-1)
    assert np.ptp(r) / 7173.0 < 1e-6


def test_equatorial_quarter_period():
    el = OrbitalElements(7000.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    T = el.period_s
    p = propagate(el, T / 4)
    rot = -7.2921159e-5 * T / 4  # Earth turns under the satellite
    expected = 7000.0 * np.array([math.cos(math.pi / 2 + rot), math.sin(math.pi / 2 + rot), 0])
    assert np.allclose(p, expected, atol=1e-6)


def test_eccentric_orbit_radius_and_kepler():
    el = OrbitalElements(9000.0, 0.3, 40.0, 10.0, 30.0, 50.0)
    r0 = np.linalg.norm(propagate(el, 0.0))
    nu = math.radians(50.0)
    assert r0 == pytest.approx(9000 * (1 - 0.09) / (1 + 0.3 * math.cos(nu)), rel=1e-12)
    M = np.linspace(-3, 9, 50)
    for e in (0.0, 0.3, 0.9):
        E = solve_kepler(M, e)
        assert np.allclose(E - e * np.sin(E), M, atol=1e-11)


def test_subsatellite_point_over_central_australia():
    lat, lon, _ = ecef_to_latlon(propagate(REFERENCE_ORBIT, 1092.0))
    assert lat == pytest.approx(-24.8, abs=0.2)
    assert lon == pytest.approx(139.9, abs=0.2)


# -- arrival directions -------------------------------------------------------

def test_arrival_direction_validation():
    with pytest.raises(ValueError):
        ArrivalDirection(0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        ArrivalDirection(2 * math.pi, 0.0, 1.0)
    with pytest.raises(ValueError):
        ArrivalDirection(0.0, -0.1, 1.0)
    d = ArrivalDirection.from_angles(-math.pi / 2, 0.3, 5.0)
    assert d.azimuth_rad == pytest.approx(1.5 * math.pi)


def test_nadir_arrival():
    sat = latlon_to_ecef(0.0, 0.0, 800.0)
    d = ecef_to_arrival(sat, latlon_to_ecef(0.0, 0.0))
    assert d.off_nadir_rad == pytest.approx(0.0, abs=1e-12)
    assert d.range_km == pytest.approx(800.0, rel=1e-12)


def test_arrival_against_triangle_oracle():
    # satellite 800 km above (0, 0), ground at (0, 7.2 deg) on a 6373 km sphere
    Rs, Rg, gamma = R_EARTH + 800.0, 6373.0, math.radians(7.2)
    sat = latlon_to_ecef(0.0, 0.0, 800.0)
    ground = latlon_to_ecef(0.0, 7.2, radius_km=Rg)
    d = ecef_to_arrival(sat, ground)
    rho = math.sqrt(Rs ** 2 + Rg ** 2 - 2 * Rs * Rg * math.cos(gamma))
    theta = math.asin(Rg * math.sin(gamma) / rho)
    assert d.range_km == pytest.approx(rho, rel=1e-12)
    assert d.off_nadir_rad == pytest.approx(theta, rel=1e-12)
    assert d.azimuth_rad == pytest.approx(math.pi / 2, abs=1e-12)  # due East


def test_arrival_rejects_bad_geometry():
    sat = latlon_to_ecef(0.0, 0.0, 800.0)
    with pytest.raises(ValueError):
        ecef_to_arrival(sat, sat)
    with pytest.raises(ValueError):
        ecef_to_arrival(sat, latlon_to_ecef(0.0, 0.0, 900.0))


def test_ned_basis_orthonormal_and_down_is_geocentric():
    sat = latlon_to_ecef(-30.0, 140.0, 800.0)
    B = ned_basis(sat)
    assert np.allclose(B @ B.T, np.eye(3), atol=1e-14)
    assert np.allclose(B[2], -sat / np.linalg.norm(sat), atol=1e-14)
    assert B[0][2] > 0  # North has positive z in the southern hemisphere too


def test_round_trip_ten_thousand_pairs():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(100):
        lat, lon = rng.uniform(-89, 89), rng.uniform(-180, 180)
        sat = latlon_to_ecef(lat, lon, rng.uniform(300, 2000))
        glat = lat + rng.uniform(-15, 15, 100)
        glon = lon + rng.uniform(-15, 15, 100)
        ground = latlon_to_ecef(np.clip(glat, -90, 90), glon, rng.uniform(0, 5, 100))
        d = ecef_to_arrival(sat, ground)
        back = arrival_to_ecef(sat, d)
        worst = max(worst, float(np.max(np.linalg.norm(back - ground, axis=-1)
                                        / np.linalg.norm(ground, axis=-1))))
        ned = ecef_to_ned(sat, ground)
        assert np.allclose(ned @ ned_basis(sat) + sat, ground, rtol=0, atol=1e-8)
    assert worst <= 1e-9


@settings(max_examples=100, deadline=None)
@given(lat=st.floats(-80, 80), lon=st.floats(-180, 180), dlat=st.floats(-10, 10),
       dlon=st.floats(-10, 10), alt=st.floats(300, 2000), angle=st.floats(-math.pi, math.pi))
def test_arrival_rotation_equivariant(lat, lon, dlat, dlon, alt, angle):
    sat = latlon_to_ecef(lat, lon, alt)
    ground = latlon_to_ecef(np.clip(lat + dlat, -90, 90), lon + dlon)
    R = _rot_z(angle)
    a = ecef_to_arrival(sat, ground)
    b = ecef_to_arrival(R @ sat, R @ ground)
    assert b.off_nadir_rad == pytest.approx(a.off_nadir_rad, abs=1e-9)
    assert b.range_km == pytest.approx(a.range_km, rel=1e-9)
    if a.off_nadir_rad > 1e-6:  # azimuth is undefined at nadir
        assert math.remainder(b.azimuth_rad - a.azimuth_rad, 2 * math.pi) == pytest.approx(0, abs=1e-7)


def test_arrival_many_matches_single():
    rng = np.random.default_rng(2)
    sats = propagate(REFERENCE_ORBIT, 1017 + np.linspace(0, 150, 7))
    grounds = latlon_to_ecef(rng.uniform(-35, -15, 9), rng.uniform(125, 150, 9))
    many = arrival_many(sats, grounds)
    for t, sat in enumerate(sats):
        one = ecef_to_arrival(sat, grounds)
        assert np.allclose(many.off_nadir_rad[t], one.off_nadir_rad, atol=1e-12)
        assert np.allclose(many.range_km[t], one.range_km, rtol=1e-12)
        assert np.allclose(np.exp(1j * many.azimuth_rad[t]), np.exp(1j * one.azimuth_rad), atol=1e-12)


# -- ground displacement ------------------------------------------------------

def test_displace_zero_is_identity():
    g = latlon_to_ecef(-20.0, 130.0)
    assert np.array_equal(ground_displace(g, 0.0, 1.234), g)


def test_displace_one_degree_north():
    g = latlon_to_ecef(0.0, 30.0)
    lat, lon, r = ecef_to_latlon(ground_displace(g, 111.19, 0.0))
    assert lat == pytest.approx(111.19 / (R_EARTH * math.pi / 180), abs=1e-9)
    assert lat == pytest.approx(1.0, abs=1e-3)
    assert lon == pytest.approx(30.0, abs=1e-9) and r == pytest.approx(R_EARTH)


@settings(max_examples=100, deadline=None)
@given(lat=st.floats(-85, 85), lon=st.floats(-180, 180), d=st.floats(0.1, 500),
       bearing=st.floats(0, 2 * math.pi))
def test_displace_exact_distance(lat, lon, d, bearing):
    g = latlon_to_ecef(lat, lon)
    moved = ground_displace(g, d, bearing)
    assert np.linalg.norm(moved) == pytest.approx(R_EARTH, rel=1e-12)
    assert great_circle_km(g, moved, R_EARTH) == pytest.approx(d, rel=1e-9)


@settings(max_examples=100, deadline=None)
@given(lat=st.floats(-45, 45), lon=st.floats(-180, 180), d=st.floats(0.01, 5),
       bearing=st.floats(0, 2 * math.pi))
def test_displace_small_round_trip(lat, lon, d, bearing):
    # the bearing drifts by about d*tan(lat)/R along a great circle, so the
    # return leg misses the start by O(d^2/R); small steps keep that below 1e-3 d
    g = latlon_to_ecef(lat, lon)
    back = ground_displace(ground_displace(g, d, bearing), d, bearing + math.pi)
    assert np.linalg.norm(back - g) <= 1e-3 * d


def test_displace_bearing_east():
    g = latlon_to_ecef(-25.0, 135.0)
    moved = ground_displace(g, 10.0, math.pi / 2)
    ned = ecef_to_ned(g * 1.0001, moved)  # frame of a point just above g
    assert abs(ned[0]) < 1e-2 * 10 and ned[1] > 9.9


def test_displace_rejects_negative():
    with pytest.raises(ValueError):
        ground_displace(latlon_to_ecef(0, 0), -1.0, 0.0)


# -- visibility and slant range -------------------------------------------------

def test_visibility_and_slant_range():
    sat = latlon_to_ecef(0.0, 0.0, 800.0)
    assert is_visible(sat, latlon_to_ecef(0.0, 10.0))
    assert not is_visible(sat, latlon_to_ecef(0.0, 60.0))
    assert slant_range_km(0.0, R_EARTH + 800.0) == pytest.approx(800.0)
    assert math.isnan(float(slant_range_km(math.radians(80), R_EARTH + 800.0)))
    g = latlon_to_ecef(0.0, 7.0)
    d = ecef_to_arrival(sat, g)
    assert float(slant_range_km(d.off_nadir_rad, R_EARTH + 800.0)) == pytest.approx(d.range_km, rel=1e-10)


def test_latlon_round_trip():
    lat, lon, r = ecef_to_latlon(latlon_to_ecef(-33.87, 151.21, 1.0))
    assert (lat, lon, r) == pytest.approx((-33.87, 151.21, R_EARTH + 1.0))
