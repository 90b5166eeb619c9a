from .benchmark import (
    BenchmarkRow, benchmark, random_scenario, summarize, write_benchmark_csv, write_summary_csv,
)
from .objective import ObjectiveSpec, evaluate_objective
from .solvers import Algorithm, SolverConfig, SolveResult, solve

__all__ = [
    "Algorithm", "BenchmarkRow", "ObjectiveSpec", "SolveResult", "SolverConfig",
    "benchmark", "evaluate_objective", "random_scenario", "solve", "summarize",
    "write_benchmark_csv", "write_summary_csv",
]
