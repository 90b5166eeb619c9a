"""Command-line driver: ``leobeam {run,bench,sweep,footprint,validate}``.

Every command reads one YAML scenario, writes ``manifest.json`` into the
output directory before any result, then the CSV results. Exit codes are
0 on success, 2 for configuration errors and 3 for runtime failures.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .array import ArrayGeometry
from .config import SWEEP_AXES, ConfigError, LoadedConfig, load_config
from .opt.benchmark import (
    benchmark,
    random_scenario,
    summarize,
    write_benchmark_csv,
    write_summary_csv,
)
from .opt.solvers import Algorithm
from .rem import write_snapshot_csv
from .sim import (
    GridSpec,
    footprint,
    run_pass,
    sweep_array_size,
    sweep_delta_t,
    sweep_error,
    sweep_partial,
    write_sweep_csv,
)

log = logging.getLogger("leobeam")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class UsageError(Exception):
    """Bad command-line values; reported like a config error."""


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


class _Manifest:
    def __init__(self, out_dir: Path, command: str, loaded: LoadedConfig, outputs: list[str]):
        self.path = out_dir / "manifest.json"
        self.data = {
            "artifact": "leobeam",
            "version": __version__,
            "command": command,
            "config_path": loaded.source,
            "config_sha256": loaded.sha256,
            "resolved_config": loaded.resolved,
            "outputs": [str(out_dir / o) for o in outputs],
            "started_utc": _now(),
            "finished_utc": None,
            "status": "running",
        }
        self._write()

    def _write(self):
        self.path.write_text(json.dumps(self.data, indent=2, sort_keys=True) + "\n")

    def finish(self, status: str):
        self.data["finished_utc"] = _now()
        self.data["status"] = status
        self._write()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.finish("ok" if exc_type is None else f"failed: {exc_type.__name__}")
        return False


def _parse_values(text: str | None, kind=float) -> list | None:
    if text is None:
        return None
    try:
        return [kind(float(v)) if kind is int else kind(v)
                for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise UsageError(f"--values: cannot parse {text!r} as a comma-separated list") from None


# -- commands -------------------------------------------------------------------

def cmd_validate(loaded: LoadedConfig, args, out_dir: Path) -> int:
    sc = loaded.scenario
    world = sc.resolved_world()
    print(f"{loaded.source}: ok  sha256={loaded.sha256[:12]}  "
          f"K={world.n_users} J={world.n_interferers} array={sc.geometry.label} "
          f"mode={sc.mode.value} steps={sc.n_steps}")
    if args.resolved:
        import yaml
        print(yaml.safe_dump(loaded.resolved, sort_keys=False), end="")
    return EXIT_OK


def cmd_run(loaded: LoadedConfig, args, out_dir: Path) -> int:
    outputs = ["trace.csv"] + (["rem_snapshots.csv"] if args.dump_rem else [])
    with _Manifest(out_dir, "run", loaded, outputs):
        snapshots = [] if args.dump_rem else None
        trace = run_pass(loaded.scenario, snapshots)
        trace.write_csv(out_dir / "trace.csv")
        if snapshots is not None:
            write_snapshot_csv(snapshots, out_dir / "rem_snapshots.csv")
    log.info("mean total capacity %.6g bit/s over %d steps", trace.mean_total_bps, len(trace.t_s))
    return EXIT_OK


def cmd_bench(loaded: LoadedConfig, args, out_dir: Path) -> int:
    sc, b = loaded.scenario, loaded.bench
    outputs = ["bench.csv"] + (["bench_summary.csv"] if args.summary else [])
    def factory(rng):
        return random_scenario(
            rng, n_users=b["users"], n_interferers=b["interferers"], geometry=sc.geometry,
            budget=sc.budget, mode=sc.mode, altitude_km=b["altitude_km"],
            max_off_nadir_deg=b["max_off_nadir_deg"], user_eirp_w=b["user_eirp_w"],
            interferer_eirp_w=b["interferer_eirp_w"])

    configs = [replace(sc.solver, algorithm=Algorithm.parse(a), seed=b["seed"])
               for a in b["algorithms"]]
    with _Manifest(out_dir, "bench", loaded, outputs):
        rows = benchmark(factory, configs, b["trials"], seed=sc.master_seed)
        write_benchmark_csv(rows, out_dir / "bench.csv", with_timing=args.timing)
        summary = summarize(rows)
        if args.summary:
            write_summary_csv(summary, out_dir / "bench_summary.csv", with_timing=args.timing)
    for alg, s in summary.items():
        log.info("%-4s mean SINR %7.2f dB  median %7.2f dB  mean wall %.3f s",
                 alg, s["sinr_mean_db"], s["sinr_median_db"], s["wall_time_mean_s"])
    return EXIT_OK


def cmd_sweep(loaded: LoadedConfig, args, out_dir: Path) -> int:
    sc, sw = loaded.scenario, loaded.sweep
    axis = args.axis or sw["axis"]
    if axis is None:
        raise UsageError(f"--axis: give one of {', '.join(SWEEP_AXES)} (or sweep.axis)")
    kind = int if axis in ("q", "array_size") else float
    values = _parse_values(args.values, kind)
    if values is None and sw["values"] is not None:
        values = [kind(v) for v in sw["values"]]
    if not values:
        raise UsageError("--values: no sweep values given (or sweep.values)")
    seeds = sw["seeds"]
    seeds = list(seeds) if isinstance(seeds, list) else [sc.master_seed + i for i in range(seeds)]
    dts = sw["delta_t_s"]

    world = sc.resolved_world()
    if axis == "q" and max(values) > world.n_interferers:
        raise UsageError(f"--values: Q={max(values)} exceeds the number of interferers "
                         f"J={world.n_interferers}")
    if axis == "array_size" and min(values) < 1:
        raise UsageError("--values: array sizes must be positive")

    with _Manifest(out_dir, f"sweep:{axis}", loaded, ["sweep.csv"]):
        if axis == "delta_t":
            rows = sweep_delta_t(sc, values, seeds)
        elif axis == "q":
            rows = sweep_partial(sc, values, dts, seeds)
        elif axis == "error_km":
            arrays = ([ArrayGeometry(n, n, sc.geometry.dx_wavelengths, sc.geometry.dy_wavelengths)
                       for n in sw["array_sizes"]] if sw["array_sizes"] else None)
            rows = sweep_error(sc, values, arrays, seeds)
        else:
            rows = sweep_array_size(sc, values, seeds)
        write_sweep_csv(rows, out_dir / "sweep.csv")
    log.info("wrote %d sweep rows", len(rows))
    return EXIT_OK


def cmd_footprint(loaded: LoadedConfig, args, out_dir: Path) -> int:
    fp = dict(loaded.footprint)
    for key in ("lat_min_deg", "lat_max_deg", "lon_min_deg", "lon_max_deg",
                "resolution_deg", "time_s"):
        value = getattr(args, key)
        if value is not None:
            fp[key] = value
    try:
        grid = GridSpec(*(fp[k] for k in ("lat_min_deg", "lat_max_deg", "lon_min_deg",
                                          "lon_max_deg", "resolution_deg")))
    except ValueError as exc:
        raise UsageError(f"grid: {exc}") from None
    with _Manifest(out_dir, "footprint", loaded, ["footprint.csv", "footprint_nodes.csv"]):
        result = footprint(loaded.scenario, grid, fp["time_s"])
        result.write_csv(out_dir / "footprint.csv")
        result.write_nodes_csv(out_dir / "footprint_nodes.csv")
    for role in sorted({r.value for r in result.node_roles}):
        levels = [p for p, r in zip(result.node_rel_power_db, result.node_roles) if r.value == role]
        log.info("%s levels %.1f .. %.1f dB", role, min(levels), max(levels))
    return EXIT_OK


_COMMANDS = {
    "validate": cmd_validate,
    "run": cmd_run,
    "bench": cmd_bench,
    "sweep": cmd_sweep,
    "footprint": cmd_footprint,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="scenario YAML file")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--seed", type=int, default=None, help="override master_seed")
    common.add_argument("--quiet", action="store_true", help="only report errors")

    parser = argparse.ArgumentParser(prog="leobeam", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="parse and check a config only")
    p.add_argument("--resolved", action="store_true", help="print the defaults-filled config")

    p = sub.add_parser("run", parents=[common], help="simulate one pass, write trace.csv")
    p.add_argument("--dump-rem", action="store_true", help="also write every REM snapshot")

    p = sub.add_parser("bench", parents=[common], help="compare solvers, write bench.csv")
    p.add_argument("--summary", action="store_true", help="also write per-algorithm statistics")
    p.add_argument("--timing", action="store_true",
                   help="record wall times (makes the CSV non-reproducible)")

    p = sub.add_parser("sweep", parents=[common], help="parameter sweep, write sweep.csv")
    p.add_argument("--axis", choices=SWEEP_AXES, default=None)
    p.add_argument("--values", default=None, help="comma-separated axis values")

    p = sub.add_parser("footprint", parents=[common], help="received-power map, write footprint.csv")
    p.add_argument("--lat-min", dest="lat_min_deg", type=float)
    p.add_argument("--lat-max", dest="lat_max_deg", type=float)
    p.add_argument("--lon-min", dest="lon_min_deg", type=float)
    p.add_argument("--lon-max", dest="lon_max_deg", type=float)
    p.add_argument("--resolution", dest="resolution_deg", type=float)
    p.add_argument("--time", dest="time_s", type=float, help="seconds into the pass")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr, force=True)
    try:
        loaded = load_config(args.config, seed_override=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.out)
    try:
        if args.command != "validate":
            out_dir.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](loaded, args, out_dir)
    except UsageError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # runtime failure of the simulation itself
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
