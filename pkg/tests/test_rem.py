import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leobeam.geom import R_EARTH, great_circle_km, latlon_to_ecef
from leobeam.rem import (
    GroundNode,
    RemPolicy,
    RemSnapshot,
    Role,
    WorldState,
    angle_error,
    natural_key,
    perturbed_arrival,
    query,
    write_snapshot_csv,
)


def _node(nid, role, lat, lon, eirp=10.0):
    return GroundNode(nid, role, tuple(latlon_to_ecef(lat, lon)), eirp)


def _world(n_int=4):
    users = [_node("U1", Role.USER, -25.0, 140.0), _node("U2", Role.USER, -27.0, 142.0)]
    ints = [_node(f"I{j}", Role.INTERFERER, -20.0 - j, 135.0 + j, 100.0) for j in range(n_int, 0, -1)]
    return WorldState(users, ints)


def test_node_and_world_validation():
    with pytest.raises(ValueError):
        GroundNode("a", "user", (0.0, 0.0, math.nan), 1.0)
    with pytest.raises(ValueError):
        GroundNode("a", "user", (1.0, 0.0, 0.0), 0.0)
    with pytest.raises(ValueError):
        GroundNode("a", "satellite", (1.0, 0.0, 0.0), 1.0)
    u = _node("U", Role.USER, 0, 0)
    with pytest.raises(ValueError):
        WorldState([])
    with pytest.raises(ValueError):
        WorldState([u, u])
    with pytest.raises(ValueError):
        WorldState([u], [_node("X", Role.USER, 1, 1)])
    with pytest.raises(ValueError):
        RemPolicy(update_interval_s=0.0)
    with pytest.raises(ValueError):
        RemPolicy(position_error_km=-1.0)


def test_natural_ordering():
    assert sorted(["I10", "I2", "I1"], key=natural_key) == ["I1", "I2", "I10"]


def test_staleness_timestamp():
    snap = query(_world(), RemPolicy(update_interval_s=5.0), 12.3)
    assert snap.timestamp_s == 10.0 and snap.update_index == 2
    # exact multiples land on their own update even with float noise
    assert query(_world(), RemPolicy(update_interval_s=0.1), 0.3).update_index == 3
    assert query(_world(), RemPolicy(update_interval_s=5.0), 0.0).timestamp_s == 0.0
    with pytest.raises(ValueError):
        query(_world(), RemPolicy(), -1.0)


def test_full_knowledge_reports_truth():
    w = _world()
    snap = query(w, RemPolicy(), 3.0)
    assert snap.users == w.users
    assert {n.id for n in snap.interferers} == {n.id for n in w.interferers}
    truth = {n.id: n for n in w.interferers}
    assert all(n == truth[n.id] for n in snap.interferers)


def test_partial_knowledge_keeps_lowest_ids():
    snap = query(_world(), RemPolicy(known_interferer_count=2), 0.0)
    assert [n.id for n in snap.interferers] == ["I1", "I2"]
    assert query(_world(), RemPolicy(known_interferer_count=0), 0.0).interferers == ()
    with pytest.raises(ValueError, match="known_interferer_count"):
        query(_world(), RemPolicy(known_interferer_count=5), 0.0)


def test_random_subset_is_seeded():
    pol = RemPolicy(known_interferer_count=2, random_subset=True, error_seed=4)
    picks = {tuple(n.id for n in query(_world(), pol, float(t)).interferers) for t in range(30)}
    assert all(len(p) == 2 for p in picks) and len(picks) > 1
    a = [n.id for n in query(_world(), pol, 7.0).interferers]
    assert a == [n.id for n in query(_world(), pol, 7.0).interferers]


def test_position_error_is_exact_ground_distance():
    w = _world()
    snap = query(w, RemPolicy(position_error_km=100.0, error_seed=3), 0.0)
    truth = {n.id: n for n in w.interferers}
    for n in snap.interferers:
        d = great_circle_km(truth[n.id].ecef, n.ecef)
        assert d == pytest.approx(100.0, rel=1e-9)
        assert np.linalg.norm(n.ecef) == pytest.approx(R_EARTH, rel=1e-12)
    # users are never perturbed
    assert snap.users == w.users


def test_error_constant_within_interval_and_redrawn_across():
    pol = RemPolicy(update_interval_s=5.0, position_error_km=50.0, error_seed=1)
    a, b = query(_world(), pol, 5.0), query(_world(), pol, 9.99)
    c = query(_world(), pol, 10.0)
    assert a.interferers == b.interferers
    assert a.interferers != c.interferers
    assert query(_world(), pol, 5.0) == a


def test_zero_error_matches_truth():
    w = _world()
    assert query(w, RemPolicy(position_error_km=0.0, error_seed=9), 1.0).interferers == \
        query(w, RemPolicy(), 1.0).interferers


def test_perturbed_arrival_at_nadir():
    ground = latlon_to_ecef(0.0, 0.0)
    sat = latlon_to_ecef(0.0, 0.0, 800.0)
    node = GroundNode("I1", Role.INTERFERER, tuple(ground), 1.0)
    snap = query(WorldState([_node("U", Role.USER, 1, 1)], [node]),
                 RemPolicy(position_error_km=100.0, error_seed=2), 0.0)
    true, est = perturbed_arrival(sat, node, snap.interferers[0].ecef)
    assert true.off_nadir_rad == pytest.approx(0.0, abs=1e-12)
    # flat-earth estimate atan(100/800) = 7.13 deg; curvature makes it a bit smaller
    d_theta, _ = angle_error(true, est)
    assert math.degrees(d_theta) == pytest.approx(math.degrees(math.atan(100 / 800)), abs=0.3)


@settings(max_examples=50, deadline=None)
@given(lat=st.floats(-60, 60), lon=st.floats(-180, 180), err=st.floats(1, 100),
       bearing=st.floats(0, 2 * math.pi), seed=st.integers(0, 1000))
def test_angle_error_shrinks_with_altitude(lat, lon, err, bearing, seed):
    ground = latlon_to_ecef(lat, lon)
    node = GroundNode("I1", Role.INTERFERER, tuple(ground), 1.0)
    snap = query(WorldState([_node("U", Role.USER, lat, lon)], [node]),
                 RemPolicy(position_error_km=err, error_seed=seed), 0.0)
    errs = []
    for h in (400.0, 800.0, 1600.0):
        true, est = perturbed_arrival(latlon_to_ecef(lat, lon, h), node, snap.interferers[0].ecef)
        # angular separation of the two arrival directions
        u = lambda d: np.array([math.sin(d.off_nadir_rad) * math.cos(d.azimuth_rad),
                                math.sin(d.off_nadir_rad) * math.sin(d.azimuth_rad),
                                math.cos(d.off_nadir_rad)])
        errs.append(math.acos(min(1.0, float(u(true) @ u(est)))))
    assert errs[0] > errs[1] > errs[2]


def test_snapshot_csv(tmp_path):
    pol = RemPolicy(update_interval_s=5.0, known_interferer_count=1)
    snaps = [query(_world(), pol, t) for t in (0.0, 5.0)]
    write_snapshot_csv(snaps, tmp_path / "s.csv")
    with open(tmp_path / "s.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 * 3
    assert [r["id"] for r in rows[:3]] == ["U1", "U2", "I1"]
    assert rows[3]["timestamp_s"] == "5.0" and rows[2]["role"] == "interferer"
    write_snapshot_csv(snaps[0], tmp_path / "one.csv")
    assert (tmp_path / "one.csv").read_text().count("\n") == 4
    assert isinstance(snaps[0], RemSnapshot)
