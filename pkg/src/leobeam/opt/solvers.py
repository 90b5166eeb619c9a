"""Black-box solvers for the beamforming weight problem.

Every solver starts by evaluating the default candidate (uniform amplitudes,
phased toward the first user) and then spends evaluations in an order that
does not depend on ``budget_evals``. A larger budget therefore replays the
same prefix of evaluations and can only improve the returned objective.
"""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..array import WeightVector
from ..link import BeamformingMode
from .objective import ObjectiveSpec

log = logging.getLogger(__name__)


class Algorithm(enum.Enum):
    LOCAL_ASCENT = "local_ascent"
    GLOBAL_SEARCH = "global_search"
    GENETIC = "genetic"
    PATTERN_SEARCH = "pattern_search"
    PARTICLE_SWARM = "particle_swarm"
    SIMULATED_ANNEALING = "simulated_annealing"

    @property
    def short(self) -> str:
        return _SHORT[self]

    @classmethod
    def parse(cls, value) -> "Algorithm":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        for alg in cls:
            if key in (alg.value, alg.short.lower(), alg.name.lower()):
                return alg
        raise ValueError(f"unknown algorithm {value!r}")


_SHORT = {
    Algorithm.LOCAL_ASCENT: "LA",
    Algorithm.GLOBAL_SEARCH: "GS",
    Algorithm.GENETIC: "GA",
    Algorithm.PATTERN_SEARCH: "PS",
    Algorithm.PARTICLE_SWARM: "PSW",
    Algorithm.SIMULATED_ANNEALING: "SAA",
}


@dataclass(frozen=True)
class SolverConfig:
    """Solver choice, seed, evaluation budget and per-algorithm knobs.

    Step-like parameters are in units of each coordinate's natural scale:
    ``1/MN`` for raw amplitudes and one radian for phases.
    """

    algorithm: Algorithm = Algorithm.LOCAL_ASCENT
    seed: int = 0
    budget_evals: int = 2000
    # local ascent / global search
    init_jitter: float = 0.1
    fd_step: float = 1e-6
    step_initial: float = 0.1
    step_max: float = 1.0
    step_min: float = 1e-10
    armijo: float = 1e-4
    local_evals: int = 4000
    restarts: int = 4
    scatter_points: int = 20
    # population initialisation spread (genetic, particle swarm)
    init_spread: float = 1.0
    # genetic
    population: int = 40
    tournament: int = 3
    blend_alpha: float = 0.5
    mutation_rate: float = 0.1
    mutation_scale: float = 0.2
    elite: int = 2
    # pattern search
    mesh_initial: float = 0.5
    mesh_max: float = 2.0
    mesh_tol: float = 1e-6
    # particle swarm
    swarm_size: int = 30
    inertia: float = 0.729
    cognitive: float = 1.49
    social: float = 1.49
    velocity_max: float = 1.0
    # simulated annealing
    initial_temperature: float = 0.05
    cooling: float = 0.995
    step_scale: float = 0.3

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm.parse(self.algorithm))
        if self.budget_evals < 1:
            raise ValueError("budget_evals must be >= 1")


@dataclass(eq=False)
class SolveResult:
    weights: list[WeightVector]
    candidate: np.ndarray
    objective_value: float
    sinr_db: np.ndarray
    eval_count: int
    wall_time_s: float = field(default=0.0)
    traces: list[np.ndarray] = field(default_factory=list)

    def __eq__(self, other):
        # wall time is a measurement, not part of the result's identity
        if not isinstance(other, SolveResult):
            return NotImplemented
        return (self.candidate.tobytes() == other.candidate.tobytes()
                and self.objective_value == other.objective_value
                and self.sinr_db.tobytes() == other.sinr_db.tobytes()
                and self.eval_count == other.eval_count
                and len(self.traces) == len(other.traces)
                and all(a.tobytes() == b.tobytes() for a, b in zip(self.traces, other.traces)))


class _Exhausted(Exception):
    pass


class _Tracker:
    """Counts evaluations against the budget and keeps the incumbent."""

    def __init__(self, spec: ObjectiveSpec, budget: int):
        self.spec = spec
        self.budget = budget
        self.count = 0
        self.best_x = None
        self.best_f = -np.inf
        self.trace: list[float] = []

    @property
    def remaining(self) -> int:
        return self.budget - self.count

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        n = min(len(X), self.remaining)
        if n <= 0:
            raise _Exhausted
        f = self.spec.capacity_batch(X[:n])
        running = self.best_f
        for i in range(n):
            if f[i] > running:
                running = f[i]
                self.best_f = float(f[i])
                self.best_x = X[i].copy()
            self.trace.append(running)
        self.count += n
        if n < len(X):
            raise _Exhausted
        return f


def _project(X, lo, hi):
    return np.clip(X, lo, hi)


# -- local ascent -------------------------------------------------------------

def _local_ascent(tr: _Tracker, x, f, cfg: SolverConfig, max_evals=None):
    """Projected finite-difference gradient ascent with backtracking."""
    spec = tr.spec
    scale, lo, hi = spec.scales(), spec.lower_bounds(), spec.upper_bounds()
    dim = x.size
    h = cfg.fd_step * scale
    t = cfg.step_initial
    start = tr.count
    while max_evals is None or tr.count - start < max_evals:
        # step backwards off the upper amplitude bound
        sign = np.where(x + h > hi, -1.0, 1.0)
        probes = x + np.diag(sign * h)
        g = (tr(probes) - f) / (sign * h)
        g[(x <= lo) & (g < 0)] = 0.0
        g[(x >= hi) & (g > 0)] = 0.0
        gs = scale * g
        norm = float(np.linalg.norm(gs))
        if norm == 0.0 or not np.isfinite(norm):
            break
        d = scale * gs / norm
        while True:
            xn = _project(x + t * d, lo, hi)
            fn = tr(xn)[0]
            if fn >= f + cfg.armijo * float(g @ (xn - x)) and fn > f:
                x, f = xn, fn
                t = min(2.0 * t, cfg.step_max)
                break
            t *= 0.5
            if t < cfg.step_min:
                return x, f
        if max_evals is not None and tr.count - start + dim + 1 > max_evals:
            break
    return x, f


def _run_local_ascent(tr, x0, f0, cfg, rng):
    spec = tr.spec
    x, f = x0.copy(), f0
    if cfg.init_jitter > 0:
        jitter = cfg.init_jitter * spec.scales() * rng.standard_normal(x.size)
        x = _project(x + jitter, spec.lower_bounds(), spec.upper_bounds())
        f = tr(x)[0]
    _local_ascent(tr, x, f, cfg)


def _run_global_search(tr, x0, f0, cfg, rng):
    spec = tr.spec
    lo, hi = spec.lower_bounds(), spec.upper_bounds()
    n = spec.geometry.size
    _local_ascent(tr, x0.copy(), f0, cfg, max_evals=cfg.local_evals)
    for _ in range(cfg.restarts):
        S = np.empty((cfg.scatter_points, spec.dim))
        blocks = S.reshape(cfg.scatter_points, spec.n_streams, 2 * n)
        blocks[..., :n] = (0.5 + rng.random((cfg.scatter_points, spec.n_streams, n))) / n
        blocks[..., n:] = rng.uniform(0.0, 2 * np.pi, (cfg.scatter_points, spec.n_streams, n))
        S = _project(S, lo, hi)
        fs = tr(S)
        i = int(np.argmax(fs))
        _local_ascent(tr, S[i].copy(), fs[i], cfg, max_evals=cfg.local_evals)


# -- population methods --------------------------------------------------------

def _initial_population(spec, x0, size, spread, rng):
    P = x0 + spread * spec.scales() * rng.standard_normal((size, x0.size))
    P[0] = x0
    return _project(P, spec.lower_bounds(), spec.upper_bounds())


def _run_genetic(tr, x0, f0, cfg, rng):
    spec = tr.spec
    lo, hi, scale = spec.lower_bounds(), spec.upper_bounds(), spec.scales()
    size, dim = cfg.population, spec.dim
    pop = _initial_population(spec, x0, size, cfg.init_spread, rng)
    fit = np.concatenate([[f0], tr(pop[1:])])
    n_child = size - cfg.elite

    def tournament():
        picks = rng.integers(0, size, (n_child, cfg.tournament))
        return picks[np.arange(n_child), np.argmax(fit[picks], axis=1)]

    while True:
        elite = np.argsort(fit)[::-1][:cfg.elite]
        p1, p2 = pop[tournament()], pop[tournament()]
        u = rng.uniform(-cfg.blend_alpha, 1.0 + cfg.blend_alpha, (n_child, dim))
        children = p1 + u * (p2 - p1)
        mask = rng.random((n_child, dim)) < cfg.mutation_rate
        children += mask * cfg.mutation_scale * scale * rng.standard_normal((n_child, dim))
        children = _project(children, lo, hi)
        child_fit = tr(children)
        pop = np.concatenate([pop[elite], children])
        fit = np.concatenate([fit[elite], child_fit])


def _run_particle_swarm(tr, x0, f0, cfg, rng):
    spec = tr.spec
    lo, hi, scale = spec.lower_bounds(), spec.upper_bounds(), spec.scales()
    size, dim = cfg.swarm_size, spec.dim
    vmax = cfg.velocity_max * scale
    X = _initial_population(spec, x0, size, cfg.init_spread, rng)
    V = 0.1 * scale * rng.uniform(-1.0, 1.0, (size, dim))
    f = np.concatenate([[f0], tr(X[1:])])
    pbest, pf = X.copy(), f.copy()
    g = int(np.argmax(pf))
    while True:
        r1 = rng.random((size, dim))
        r2 = rng.random((size, dim))
        V = (cfg.inertia * V + cfg.cognitive * r1 * (pbest - X)
             + cfg.social * r2 * (pbest[g] - X))
        V = np.clip(V, -vmax, vmax)
        Xn = _project(X + V, lo, hi)
        V = np.where(Xn != X + V, 0.0, V)
        X = Xn
        f = tr(X)
        better = f > pf
        pbest[better] = X[better]
        pf[better] = f[better]
        g = int(np.argmax(pf))


def _run_pattern_search(tr, x0, f0, cfg, rng):
    """Generalised pattern search on the coordinate basis, opportunistic polling."""
    spec = tr.spec
    lo, hi, scale = spec.lower_bounds(), spec.upper_bounds(), spec.scales()
    x, f = x0.copy(), f0
    mesh = cfg.mesh_initial
    dim = spec.dim
    while mesh >= cfg.mesh_tol:
        improved = False
        for i in range(dim):
            for sign in (1.0, -1.0):
                xn = x.copy()
                xn[i] = min(max(x[i] + sign * mesh * scale[i], lo[i]), hi[i])
                if xn[i] == x[i]:
                    continue
                fn = tr(xn)[0]
                if fn > f:
                    x, f = xn, fn
                    improved = True
                    break
            if improved:
                break
        mesh = min(2.0 * mesh, cfg.mesh_max) if improved else 0.5 * mesh


def _run_simulated_annealing(tr, x0, f0, cfg, rng):
    spec = tr.spec
    lo, hi, scale = spec.lower_bounds(), spec.upper_bounds(), spec.scales()
    x, f = x0.copy(), f0
    ref = abs(f0) if f0 != 0 else 1.0
    temp = cfg.initial_temperature
    while True:
        step = cfg.step_scale * np.sqrt(temp / cfg.initial_temperature) * scale
        xn = _project(x + step * rng.standard_normal(x.size), lo, hi)
        fn = tr(xn)[0]
        delta = (fn - f) / ref
        u = rng.random()
        if delta >= 0 or u < np.exp(delta / temp):
            x, f = xn, fn
        temp = max(temp * cfg.cooling, 1e-300)


_RUNNERS = {
    Algorithm.LOCAL_ASCENT: _run_local_ascent,
    Algorithm.GLOBAL_SEARCH: _run_global_search,
    Algorithm.GENETIC: _run_genetic,
    Algorithm.PATTERN_SEARCH: _run_pattern_search,
    Algorithm.PARTICLE_SWARM: _run_particle_swarm,
    Algorithm.SIMULATED_ANNEALING: _run_simulated_annealing,
}


def _solve_stream(spec: ObjectiveSpec, config: SolverConfig, seed_seq) -> _Tracker:
    rng = np.random.default_rng(seed_seq)
    tr = _Tracker(spec, config.budget_evals)
    x0 = spec.default_candidate()
    try:
        f0 = tr(x0)[0]
        _RUNNERS[config.algorithm](tr, x0, f0, config, rng)
    except _Exhausted:
        pass
    return tr


def solve(spec: ObjectiveSpec, config: SolverConfig) -> SolveResult:
    """Best feasible weights found within ``config.budget_evals`` evaluations.

    In digital mode each user's stream is optimized separately with its own
    budget of ``budget_evals`` evaluations; ``eval_count`` is the total.
    """
    if spec.n_users < 1:
        raise ValueError("objective needs at least one user")
    start = time.perf_counter()
    if spec.mode is BeamformingMode.DIGITAL:
        subs = [spec.stream(k) for k in range(spec.n_users)]
    else:
        subs = [spec]
    trackers = [_solve_stream(sub, config, np.random.SeedSequence([config.seed, k]))
                for k, sub in enumerate(subs)]
    wall = time.perf_counter() - start
    candidate = np.concatenate([t.best_x for t in trackers])
    # report phases in [0, 2*pi)
    n = spec.geometry.size
    blocks = candidate.reshape(spec.n_streams, 2 * n)
    blocks[:, n:] = np.mod(blocks[:, n:], 2 * np.pi)
    value = float(spec.capacity_batch(candidate[None, :])[0])
    gamma = spec.sinr(candidate[None, :])[0]
    with np.errstate(divide="ignore"):
        sinr_db = 10.0 * np.log10(gamma)
    log.debug("%s: C=%.6g bit/s in %d evals", config.algorithm.short, value,
              sum(t.count for t in trackers))
    return SolveResult(
        weights=spec.weight_vectors(candidate),
        candidate=candidate,
        objective_value=value,
        sinr_db=sinr_db,
        eval_count=sum(t.count for t in trackers),
        wall_time_s=wall,
        traces=[np.asarray(t.trace) for t in trackers],
    )
