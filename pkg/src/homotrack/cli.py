"""Command-line front end.

Subcommands: ``solve`` (total-degree start), ``track`` (start system and
solutions from files), ``bench-eval`` (per-stage evaluation timings) and
``start-pack`` (write a total-degree start system and its solutions).

Solution records and bench rows go out as JSON lines.  Exit codes: 0 on
success (per-path failures are data), 1 for unreadable or malformed input,
2 for bad options, 3 when every start solution of ``track`` is rejected.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from ._validation import check_gamma, check_precision, parse_path_range
from .evaldiff import BatchWorkspace, eval_system_batch, evaluate_system
from .homotopy import (
    StartFileError,
    load_start_data,
    make_homotopy,
    random_gamma,
    total_degree_start,
    write_start_data,
)
from .polysys import SystemSyntaxError, parse_system
from .tracker import SolutionSet, TrackConfig, default_workers, track_all
from .xprec import ExtComplex, ExtReal

log = logging.getLogger("homotrack")

EXIT_OK, EXIT_INPUT, EXIT_CONFIG, EXIT_NO_STARTS = 0, 1, 2, 3


class InputError(Exception):
    """Unreadable or malformed input file."""


class ConfigError(Exception):
    """Invalid option value."""


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None


def _system(path: str):
    try:
        return parse_system(_read(path))
    except SystemSyntaxError as exc:
        raise InputError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# options
# ---------------------------------------------------------------------------

def _track_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--precision", default="d", help="d, dd or qd (default d)")
    p.add_argument("--seed", type=int, default=0, help="seed for the random gamma (default 0)")
    p.add_argument("--gamma", help="explicit gamma as re,im (overrides --seed)")
    p.add_argument("--tol-residual", type=float, help="Newton residual tolerance")
    p.add_argument("--tol-update", type=float, help="Newton update tolerance")
    p.add_argument("--max-newton", type=int, default=3)
    p.add_argument("--h-init", type=float, default=0.05)
    p.add_argument("--h-min", type=float)
    p.add_argument("--h-max", type=float, default=0.1)
    p.add_argument("--batch", type=int, default=64, help="paths per lockstep batch")
    p.add_argument("--workers", type=int, help="worker processes (default $HOMOTRACK_WORKERS or 1)")
    p.add_argument("--path-range", help="half-open start index range a..b")
    p.add_argument("--log", help="write per-path progress records (JSON lines) here")
    p.add_argument("-o", "--output", help="solution records file (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="homotrack", description="Batched polynomial homotopy path tracking.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a system from its total-degree start system")
    p.add_argument("system")
    _track_options(p)

    p = sub.add_parser("track", help="track paths from a given start system and solutions")
    p.add_argument("system")
    p.add_argument("start_system")
    p.add_argument("start_solutions")
    _track_options(p)

    p = sub.add_parser("bench-eval", help="time the evaluation stages at random points")
    p.add_argument("system")
    p.add_argument("--precision", default="d,dd,qd", help="comma list of levels (default d,dd,qd)")
    p.add_argument("--evals", default="10,100,1000", help="comma list of evaluation counts")
    p.add_argument("--batch", type=int, default=64, help="points per evaluation call")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")

    p = sub.add_parser("start-pack", help="write the total-degree start system and its solutions")
    p.add_argument("system")
    p.add_argument("start_system", help="output file for the start system")
    p.add_argument("start_solutions", help="output file for the start solutions")
    p.add_argument("--precision", default="d")
    p.add_argument("--path-range", help="half-open start index range a..b")
    return parser


def _config(args, prec) -> TrackConfig:
    try:
        return TrackConfig(
            prec=prec,
            residual_tol=args.tol_residual,
            update_tol=args.tol_update,
            max_newton=args.max_newton,
            h_init=args.h_init,
            h_min=args.h_min,
            h_max=args.h_max,
            batch_size=args.batch,
            workers=default_workers() if args.workers is None else args.workers,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _precision(text: str):
    try:
        return check_precision(text)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _gamma(args, prec) -> ExtComplex:
    if args.gamma is None:
        return random_gamma(args.seed, prec)
    try:
        return check_gamma(args.gamma, prec)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _indices(args, total: int):
    if not args.path_range:
        return None
    try:
        return parse_path_range(args.path_range, total)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


@contextlib.contextmanager
def _opened(path: str | None):
    if path is None:
        yield sys.stdout
        return
    try:
        fh = open(path, "w")
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc.strerror or exc}") from None
    with fh:
        yield fh


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _printed(sols: SolutionSet, target, digits):
    """Coordinate strings per path and ``||f||_inf`` at the parsed-back strings."""
    n, m = sols.endpoints.shape
    prec = sols.endpoints.prec
    strings = [[sols.endpoints[i, j].to_strings(digits) for i in range(n)] for j in range(m)]
    finite = np.isfinite(sols.residual) & np.all(np.isfinite(sols.endpoints.to_complex()), axis=0)
    residual = sols.residual.astype(float).copy()
    keep = np.flatnonzero(finite)
    if keep.size:
        re = np.array([[Fraction(strings[j][i][0]) for j in keep] for i in range(n)], dtype=object)
        im = np.array([[Fraction(strings[j][i][1]) for j in keep] for i in range(n)], dtype=object)
        values, _ = evaluate_system(target, ExtComplex.from_parts(re, im, prec))
        residual[keep] = np.max(values.abs_hi(), axis=0)
    return strings, residual


def solution_records(sols: SolutionSet, target, digits: int | None = -1):
    """One dict per path, coordinates as decimal strings at full level precision.

    The residual is recomputed from the written coordinates, so reading a
    record back and evaluating ``target`` reproduces it.
    """
    strings, residual = _printed(sols, target, digits)
    for r in sols:
        yield {
            "path": r.path_id,
            "start_index": r.start_index,
            "x": [list(c) for c in strings[r.path_id]],
            "residual": float(residual[r.path_id]),
            "status": r.status.name.lower(),
            "annotation": r.annotation,
            "steps": r.steps,
            "newton_iterations": r.newton_iterations,
            "rejections": r.rejections,
            "wall_time": r.wall_time,
        }


def summary(sols: SolutionSet, gamma: ExtComplex, residual=None) -> dict:
    residual = sols.residual if residual is None else np.asarray(residual)
    ok = residual[sols.success]
    stats = (float(ok.min()), float(ok.max()), float(np.median(ok))) if ok.size else (None, None, None)
    return {
        "summary": {
            "paths": len(sols),
            **sols.counts(),
            "residual_min": stats[0],
            "residual_max": stats[1],
            "residual_median": stats[2],
            "precision": str(gamma.prec),
            "gamma": list(gamma.to_strings()),
            "batch_rounds": [int(x) for x in sols.batch_rounds],
        }
    }


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"not serializable: {type(x).__name__}")


def _write_solutions(args, sols: SolutionSet, h) -> None:
    records = list(solution_records(sols, h.target))
    with _opened(args.output) as out:
        for rec in records:
            out.write(json.dumps(rec, default=_json_default) + "\n")
        resid = [rec["residual"] for rec in records]
        out.write(json.dumps(summary(sols, h.gamma, resid), default=_json_default) + "\n")


def _run(args, h, starts, indices) -> SolutionSet:
    cfg = _config(args, h.prec)
    if args.log:
        with _opened(args.log) as stream:
            return track_all(h, starts, cfg, indices=indices, stream=stream)
    return track_all(h, starts, cfg, indices=indices)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_solve(args) -> int:
    f = _system(args.system)
    prec = _precision(args.precision)
    try:
        g, starts = total_degree_start(f, prec)
    except ValueError as exc:
        raise InputError(f"{args.system}: {exc}") from None
    h = make_homotopy(f, g, _gamma(args, prec))
    sols = _run(args, h, starts, _indices(args, len(starts)))
    _write_solutions(args, sols, h)
    return EXIT_OK


def cmd_track(args) -> int:
    f = _system(args.system)
    prec = _precision(args.precision)
    for path in (args.start_system, args.start_solutions):
        _read(path)
    try:
        g, starts = load_start_data(args.start_system, args.start_solutions, prec)
    except (SystemSyntaxError, StartFileError) as exc:
        raise InputError(str(exc)) from None
    if g.dimension != f.dimension or len(g) != len(f):
        raise InputError(f"{args.start_system}: start system does not match the target's shape")
    if len(starts) == 0:
        log.error("no usable start solutions in %s", args.start_solutions)
        return EXIT_NO_STARTS
    h = make_homotopy(f, g, _gamma(args, prec))
    sols = _run(args, h, starts, _indices(args, len(starts)))
    _write_solutions(args, sols, h)
    return EXIT_OK


def cmd_start_pack(args) -> int:
    f = _system(args.system)
    prec = _precision(args.precision)
    try:
        g, starts = total_degree_start(f, prec)
    except ValueError as exc:
        raise InputError(f"{args.system}: {exc}") from None
    idx = _indices(args, len(starts))
    write_start_data(args.start_system, args.start_solutions, g, starts, indices=idx, digits=None)
    log.info("wrote %d start solutions", len(starts) if idx is None else len(idx))
    return EXIT_OK


def bench_eval(system, precisions, evals, batch: int = 64, seed: int = 0):
    """Rows ``{precision, evals, mon, sum, coeff, total, checksum}``, times in seconds.

    Points and ``t`` values are drawn from ``seed`` before timing starts, so
    ``checksum`` (sum of ``|value|`` over all evaluations) depends only on the
    inputs.
    """
    rows = []
    g, _ = total_degree_start(system, precisions[0])
    for prec in precisions:
        h = make_homotopy(system, g, random_gamma(seed, prec))
        plan = h.plan
        ws = BatchWorkspace(plan)
        eval_system_batch(plan, h.gamma, ExtComplex.zeros((system.dimension, 1), prec), 0.5, ws)
        for n_evals in evals:
            rng = np.random.default_rng(seed)
            pts = rng.standard_normal((system.dimension, n_evals)) + 1j * rng.standard_normal((system.dimension, n_evals))
            ts = rng.uniform(0.0, 1.0, n_evals)
            chunks = []
            for a in range(0, n_evals, batch):
                chunks.append((ExtComplex.from_complex(pts[:, a : a + batch], prec),
                               ExtReal.from_float(ts[a : a + batch], prec)))
            ws.reset_timings()
            results = []
            t0 = time.perf_counter()
            for x, t in chunks:
                results.append(eval_system_batch(plan, h.gamma, x, t, ws)[0])
            total = time.perf_counter() - t0
            checksum = float(sum(np.sum(v.abs_hi()) for v in results))
            tm = ws.timings
            rows.append({"precision": str(prec), "evals": n_evals, "mon": tm["mon"], "sum": tm["sum"],
                         "coeff": tm["coeff"], "total": total, "checksum": checksum})
    return rows


def cmd_bench_eval(args) -> int:
    f = _system(args.system)
    precisions = [_precision(p.strip()) for p in args.precision.split(",") if p.strip()]
    try:
        evals = [int(v) for v in args.evals.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--evals must be a comma list of integers, got {args.evals!r}") from None
    if not precisions or not evals or min(evals) < 1 or args.batch < 1:
        raise ConfigError("need at least one precision, positive eval counts and a positive batch")
    try:
        rows = bench_eval(f, precisions, evals, args.batch, args.seed)
    except ValueError as exc:
        raise InputError(f"{args.system}: {exc}") from None
    with _opened(args.output) as out:
        for row in rows:
            out.write(json.dumps(row) + "\n")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "track": cmd_track, "bench-eval": cmd_bench_eval, "start-pack": cmd_start_pack}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"homotrack: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConfigError as exc:
        print(f"homotrack: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
