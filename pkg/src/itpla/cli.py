"""Command-line interface: ``itpla solve``, ``itpla bench`` and ``itpla render``.

Exit status: 0 on success, 1 on malformed input, 2 when ``solve`` could
only reach its answer through a phase that hit the step cap, 3 when
``bench`` finds a run whose trace breaks the count invariants.

Set ``ITPLA_LOG`` to a logging level name (DEBUG, INFO, WARNING, ...) to
change verbosity; the default is WARNING.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from importlib import resources
from pathlib import Path

from . import __version__
from . import config as config_mod
from .baseline import grid_sweep
from .geometry import SimplePolygon
from .io import (InputError, atomic_write, dumps_table, fmt, load_config, load_placement,
                 load_polygon, quantize, save_placement, save_trace)
from .metrics import total_misplacement, total_overlap
from .model import ModuleShape, Placement, upper_bound
from .solver import RunTrace, SolverConfig, best_run, itpla, multi_start

logger = logging.getLogger("itpla")

EXIT_OK, EXIT_INPUT, EXIT_DEGRADED, EXIT_INVARIANT = 0, 1, 2, 3
BENCH_COLUMNS = ("polygon", "itpla_count", "baseline_count", "bound", "wall_time")


def _setup_logging() -> None:
    name = os.environ.get("ITPLA_LOG", "WARNING").upper()
    level = logging.getLevelName(name)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if not isinstance(logging.getLevelName(name), int):
        logger.warning("ITPLA_LOG=%s is not a logging level; using WARNING", name)


def corpus_dir() -> Path:
    """Directory of the bundled benchmark polygons."""
    return Path(str(resources.files("itpla") / "corpus"))


def corpus_files(directory) -> list[Path]:
    return sorted(p for p in Path(directory).glob("*.json") if p.is_file())


def resolve_polygon(arg: str) -> SimplePolygon:
    """Load a polygon file, or a bundled corpus polygon by name
    (``hexagon``, ``dumbbell``, ...)."""
    path = Path(arg)
    if path.exists():
        return load_polygon(path)
    for p in corpus_files(corpus_dir()):
        if p.stem == arg or p.stem.split("_", 1)[-1] == arg:
            return load_polygon(p)
    raise InputError(f"{arg}: no such polygon file or bundled polygon")


def build_config(args, shape: ModuleShape) -> SolverConfig:
    config = load_config(args.config, shape) if args.config else SolverConfig.for_shape(shape)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.starts is not None:
        if args.starts < 1:
            raise InputError("--starts must be at least 1")
        changes["starts"] = args.starts
    return replace(config, **changes) if changes else config


def _shape(args) -> ModuleShape:
    try:
        return ModuleShape(args.shape, args.size)
    except ValueError as exc:
        raise InputError(f"--size/--shape: {exc}") from None


def print_config(args) -> None:
    if args.size is None and args.config is None:
        doc = config_mod.describe()
    else:
        if args.size is None:
            args.size = 1.0
        shape = _shape(args)
        doc = config_mod.as_dict(build_config(args, shape))
    print(json.dumps(doc, indent=2))


def finalize(placement: Placement, trace: RunTrace, config: SolverConfig) -> tuple[Placement, bool]:
    """Quantize the result to its serialized precision and restate the
    final trace row from it, so a reloaded placement.json reproduces that row."""
    q = quantize(placement)
    rec = trace.final
    rec.total_overlap = total_overlap(q)
    rec.total_misplacement = total_misplacement(q, None, config.connect_range)
    ok = rec.total_overlap <= config.tau_o and rec.total_misplacement <= config.tau_m
    return q, ok


def cmd_solve(args) -> int:
    from .plotting import plot_trace
    from .render import save_svg

    shape = _shape(args)
    polygon = resolve_polygon(args.polygon)
    config = build_config(args, shape)
    out = Path(args.out)
    logger.info("solving %s with %s modules of size %g, bound %d, %d start(s)",
                polygon.name, shape.kind.value, shape.size, upper_bound(polygon, shape), config.starts)

    result = multi_start(polygon, shape, config, workers=1, keep_snapshots=True)
    trace = result.traces[result.best_index]
    placement, acceptable = finalize(result.placement, trace, config)
    rec = trace.final

    meta = {"seed": trace.seed, "starts": config.starts, "bound": trace.bound,
            "module_count": len(placement), "total_overlap": float(fmt(rec.total_overlap)),
            "total_misplacement": float(fmt(rec.total_misplacement)),
            "acceptable": acceptable, "cap_degraded": trace.cap_degraded}
    save_placement(placement, out / "placement.json", **meta)
    save_trace(trace, out / "trace.csv")
    plot_trace(trace, out / "trace.png", title=f"{polygon.name}, seed {trace.seed}")
    save_svg(placement, out / "final.svg", title=f"{polygon.name}: {len(placement)} modules")
    k = 0
    for iteration, snap, victim in trace.snapshots:
        if victim is None:
            continue
        k += 1
        save_svg(snap, out / "snapshots" / f"removal_{k:03d}.svg",
                 title=f"iteration {iteration}: {len(snap)} modules, removing {victim}")

    print(f"{polygon.name}: {len(placement)} modules (bound {trace.bound}), "
          f"overlap {fmt(rec.total_overlap)}, misplacement {fmt(rec.total_misplacement)}, "
          f"seed {trace.seed} -> {out}")
    if trace.cap_degraded or not acceptable:
        logger.warning("result reached only through a capped phase or failed the thresholds "
                       "after quantization")
        return EXIT_DEGRADED
    return EXIT_OK


def trace_violations(trace: RunTrace, placement: Placement, config: SolverConfig) -> list[str]:
    """Broken count invariants of one run; empty when the run is sound."""
    problems = []
    rows = trace.records
    if not rows or rows[0].event != "init":
        return ["trace does not start with an init row"]
    if rows[0].module_count != trace.bound:
        problems.append(f"initial count {rows[0].module_count} != bound {trace.bound}")
    for prev, cur in zip(rows, rows[1:]):
        drop = prev.module_count - cur.module_count
        if drop < 0:
            problems.append(f"count rises at iteration {cur.iteration}")
        elif drop == 1 and cur.event != "remove":
            problems.append(f"decrement without removal at iteration {cur.iteration}")
        elif drop > 1:
            problems.append(f"count drops by {drop} at iteration {cur.iteration}")
        elif drop == 0 and cur.event == "remove":
            problems.append(f"removal without decrement at iteration {cur.iteration}")
    if rows[-1].event != "accept":
        problems.append("trace does not end with an accept row")
    mis = total_misplacement(placement, None, config.connect_range)
    if total_overlap(placement) > config.tau_o or mis > config.tau_m:
        problems.append("final placement is not acceptable")
    return problems


def _bench_job(job):
    kind, polygon, shape, config, arg = job
    t0 = time.perf_counter()
    if kind == "itpla":
        result = itpla(polygon, shape, config, seed=arg, keep_snapshots=False)
    else:
        result = grid_sweep(polygon, shape.size, *arg)
    return result, time.perf_counter() - t0


def run_bench(polygons: list[SimplePolygon], shape: ModuleShape, config: SolverConfig,
              workers: int = 1, sweep: tuple[int, int] = (32, 60)) -> tuple[list[dict], dict]:
    """Best-of-``config.starts`` ItPla against the grid sweep per polygon.

    Returns table rows and, per polygon name, the list of
    ``(placement, trace, violations)`` for every run.
    """
    jobs = []
    for poly in polygons:
        jobs.extend(("itpla", poly, shape, config, config.seed + k) for k in range(config.starts))
        jobs.append(("grid", poly, shape, config, sweep))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_bench_job, jobs))
    else:
        results = [_bench_job(j) for j in jobs]

    rows, runs = [], {}
    pos = 0
    for poly in polygons:
        chunk = results[pos:pos + config.starts + 1]
        pos += config.starts + 1
        placements = [r[0][0] for r in chunk[:-1]]
        traces = [r[0][1] for r in chunk[:-1]]
        best = best_run(placements, traces, config)
        runs[poly.name] = [(p, t, trace_violations(t, p, config)) for p, t in zip(placements, traces)]
        (grid_count, _pose), _ = chunk[-1]
        rows.append({"polygon": poly.name, "itpla_count": len(placements[best]),
                     "baseline_count": grid_count, "bound": upper_bound(poly, shape),
                     "wall_time": sum(r[1] for r in chunk)})
    return rows, runs


def cmd_bench(args) -> int:
    from .plotting import plot_bench

    shape = _shape(args)
    directory = Path(args.corpus) if args.corpus else corpus_dir()
    files = corpus_files(directory)
    if not files:
        raise InputError(f"{directory}: corpus is empty (no *.json polygons)")
    polygons = [load_polygon(p) for p in files]
    if args.starts is None:
        args.starts = 10
    config = build_config(args, shape)
    workers = args.workers or os.cpu_count() or 1

    rows, runs = run_bench(polygons, shape, config, workers, (args.offsets, args.rotations))
    out = Path(args.out)
    table = [[r["polygon"], r["itpla_count"], r["baseline_count"], r["bound"], f"{r['wall_time']:.3f}"]
             for r in rows]
    atomic_write(out, dumps_table(BENCH_COLUMNS, table))
    plot_bench(rows, out.with_suffix(".png"))
    for r in rows:
        print(f"{r['polygon']:>12}: itpla {r['itpla_count']:3d}  grid {r['baseline_count']:3d}  "
              f"bound {r['bound']:3d}  ({r['wall_time']:.1f} s)")

    status = EXIT_OK
    for name, items in runs.items():
        for placement, trace, problems in items:
            for msg in problems:
                print(f"invariant violated: {name} seed {trace.seed}: {msg}", file=sys.stderr)
                status = EXIT_INVARIANT
    return status


def cmd_render(args) -> int:
    from .render import save_svg

    placement = load_placement(args.placement)
    out = Path(args.out) if args.out else Path(args.placement).with_suffix(".svg")
    save_svg(placement, out, title=f"{placement.polygon.name or 'polygon'}: {len(placement)} modules")
    print(out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--shape", choices=("triangle", "circle"), default="triangle",
                        help="module shape (default: triangle)")
    common.add_argument("--size", type=float, default=None,
                        help="triangle side or circle radius (default: 1)")
    common.add_argument("--config", metavar="FILE", help="JSON file of solver and force settings")
    common.add_argument("--seed", type=int, help="base random seed (overrides the config file)")
    common.add_argument("--starts", type=int, help="number of multi-start runs (overrides the config file)")
    common.add_argument("--print-config", action="store_true",
                        help="print the resolved settings as JSON and exit")

    parser = argparse.ArgumentParser(prog="itpla", description=__doc__.split("\n\n")[0],
                                     epilog="Environment: ITPLA_LOG sets the log level (default WARNING).")
    parser.add_argument("--version", action="version", version=f"itpla {__version__}")
    parser.add_argument("--print-config", action="store_true",
                        help="print every setting with its default and exit")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("solve", parents=[common], help="place modules in one polygon")
    p.add_argument("--polygon", help="polygon JSON file, or the name of a bundled polygon")
    p.add_argument("--out", default="itpla-out", help="output directory (default: itpla-out)")
    p.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", parents=[common],
                       help="compare ItPla with the grid sweep on a polygon corpus")
    b.add_argument("--corpus", metavar="DIR", help="directory of polygon JSON files (default: bundled)")
    b.add_argument("--out", default="bench.csv", help="CSV table; a PNG chart is written next to it")
    b.add_argument("--workers", type=int, default=0, help="worker processes (default: CPU count)")
    b.add_argument("--offsets", type=int, default=32, help="grid sweep offsets per lattice axis")
    b.add_argument("--rotations", type=int, default=60, help="grid sweep rotations over 60 degrees")
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("render", help="draw a placement.json as SVG")
    r.add_argument("placement", help="placement.json written by solve")
    r.add_argument("--out", help="SVG path (default: next to the placement)")
    r.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command is None:
            if args.print_config:
                print(json.dumps(config_mod.describe(), indent=2))
                return EXIT_OK
            parser.print_help()
            return EXIT_INPUT
        if getattr(args, "print_config", False) and args.command != "render":
            print_config(args)
            return EXIT_OK
        if args.command == "solve" and not args.polygon:
            raise InputError("solve: --polygon is required")
        if getattr(args, "size", 0) is None:
            args.size = 1.0
        return args.func(args)
    except (InputError, config_mod.ConfigError) as exc:
        print(f"itpla: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
