"""Paired-seed solver comparison on randomly drawn beamforming scenarios."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from ..array import ArrayGeometry
from ..geom import R_EARTH, ArrivalDirection, slant_range_km
from ..link import BeamformingMode, LinkBudget
from .objective import ObjectiveSpec
from .solvers import SolverConfig, solve

BENCH_COLUMNS = ("algorithm", "trial", "sinr_db", "capacity_bps", "wall_time_s", "eval_count")


@dataclass(frozen=True)
class BenchmarkRow:
    algorithm: str
    trial: int
    sinr_db: float
    capacity_bps: float
    wall_time_s: float
    eval_count: int


def random_scenario(rng: np.random.Generator, *, n_users: int = 1, n_interferers: int = 2,
                    geometry: ArrayGeometry | None = None, budget: LinkBudget | None = None,
                    mode: BeamformingMode = BeamformingMode.ANALOG,
                    altitude_km: float = 800.0, max_off_nadir_deg: float = 50.0,
                    user_eirp_w: float = 10.0, interferer_eirp_w: float = 100.0) -> ObjectiveSpec:
    """Users and interferers scattered over the visible cap below the satellite.

    Directions are uniform in solid angle up to ``max_off_nadir_deg``.
    """
    geometry = geometry or ArrayGeometry()
    budget = budget or LinkBudget()
    sat_radius = R_EARTH + altitude_km
    cos_max = np.cos(np.radians(max_off_nadir_deg))

    def draw(count, eirp):
        theta = np.arccos(1.0 - rng.random(count) * (1.0 - cos_max))
        phi = rng.uniform(0.0, 2 * np.pi, count)
        rho = slant_range_km(theta, sat_radius)
        return [(ArrivalDirection.from_angles(float(p), float(t), float(r)), eirp)
                for p, t, r in zip(phi, theta, rho)]

    users = draw(n_users, user_eirp_w)
    interferers = draw(n_interferers, interferer_eirp_w)
    return ObjectiveSpec(mode, users, interferers, geometry, budget)


def benchmark(spec: ObjectiveSpec | Callable[[np.random.Generator], ObjectiveSpec],
              configs: Sequence[SolverConfig], trials: int, seed: int = 0,
              labels: Sequence[str] | None = None) -> list[BenchmarkRow]:
    """Run every solver config on the same sequence of scenarios.

    ``spec`` is either a fixed problem or a factory drawing one from a
    generator; trial ``t`` draws its scenario from ``SeedSequence([seed, t])``
    and every config solves it with solver seed ``SeedSequence([config.seed, t])``
    folded to an integer, so rows are paired across algorithms.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    labels = list(labels) if labels is not None else [c.algorithm.short for c in configs]
    rows = []
    for t in range(trials):
        if callable(spec):
            scenario = spec(np.random.default_rng(np.random.SeedSequence([seed, t])))
        else:
            scenario = spec
        for label, cfg in zip(labels, configs):
            trial_seed = int(np.random.SeedSequence([cfg.seed, t]).generate_state(1)[0])
            res = solve(scenario, replace(cfg, seed=trial_seed))
            rows.append(BenchmarkRow(label, t, float(np.mean(res.sinr_db)),
                                     res.objective_value, res.wall_time_s, res.eval_count))
    return rows


def summarize(rows: Sequence[BenchmarkRow]) -> dict[str, dict[str, float]]:
    """Per-algorithm SINR box-plot statistics and mean wall time."""
    out = {}
    for alg in dict.fromkeys(r.algorithm for r in rows):
        sel = [r for r in rows if r.algorithm == alg]
        s = np.array([r.sinr_db for r in sel])
        q = np.percentile(s, [0, 25, 50, 75, 100])
        out[alg] = {
            "n": len(sel),
            "sinr_min_db": q[0], "sinr_q1_db": q[1], "sinr_median_db": q[2],
            "sinr_q3_db": q[3], "sinr_max_db": q[4], "sinr_mean_db": float(s.mean()),
            "capacity_mean_bps": float(np.mean([r.capacity_bps for r in sel])),
            "wall_time_mean_s": float(np.mean([r.wall_time_s for r in sel])),
            "eval_count_mean": float(np.mean([r.eval_count for r in sel])),
        }
    return out


def write_benchmark_csv(rows: Sequence[BenchmarkRow], path, with_timing: bool = True):
    """Raw benchmark rows. Without timing the wall-time column is left blank
    so the file is reproducible byte for byte."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BENCH_COLUMNS)
        for r in rows:
            w.writerow([r.algorithm, r.trial, repr(r.sinr_db), repr(r.capacity_bps),
                        repr(r.wall_time_s) if with_timing else "", r.eval_count])


def write_summary_csv(summary: dict, path, with_timing: bool = True):
    keys = ["n", "sinr_min_db", "sinr_q1_db", "sinr_median_db", "sinr_q3_db",
            "sinr_max_db", "sinr_mean_db", "capacity_mean_bps", "eval_count_mean"]
    if with_timing:
        keys.append("wall_time_mean_s")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["algorithm", *keys])
        for alg, stats in summary.items():
            w.writerow([alg, *(repr(float(stats[k])) if k != "n" else stats[k] for k in keys)])
