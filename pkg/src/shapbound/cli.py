"""Command-line front-end.

Subcommands:

* ``bounds`` -- run the branch-and-bound engine with the given stop
  criteria and write a result JSON (plus an optional per-iteration CSV
  trace).
* ``exact``  -- run the engine to queue exhaustion (precision target 0).
* ``oracle`` -- brute-force enumeration of the exact SHAP values (g <= 20).
* ``check``  -- run both and report whether the enumeration lies inside
  the engine's bounds; exits 0 iff contained.

Feature and output indices are 1-based on the command line.  JSON floats
are written with 17 significant digits so they round-trip exactly.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

import numpy as np

from . import engine, oracle
from .errors import ParseError, ShapBoundError, TooManyFeaturesError
from .network import load_network
from .valuefn import AttributionProblem

EXIT_OK = 0
EXIT_ENGINE = 1
EXIT_USAGE = 2
EXIT_IO = 3

_SELECT_FLAGS = {"max-diam": "max_diam", "min-diam": "min_diam"}
_SPLIT_FLAGS = {
    "in-order": "in_order",
    "smears": "smears",
    "strong": "strong_branching",
    "smart-ibp": "smart_branching_ibp",
}


class UsageError(Exception):
    """Semantic flag/input contract violation (exit code 2)."""


class _IOFailure(Exception):
    """File unreadable or unparseable (exit code 3)."""


def _format_float(x: float) -> str:
    return format(float(x), ".17g")


def _dump_json(obj, indent: int = 0) -> str:
    """Deterministic JSON writer emitting floats at 17 significant digits."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = [
            f"{inner}{json.dumps(str(key))}: {_dump_json(val, indent + 1)}"
            for key, val in obj.items()
        ]
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        parts = [f"{inner}{_dump_json(val, indent + 1)}" for val in obj]
        return "[\n" + ",\n".join(parts) + "\n" + pad + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(obj)
    return json.dumps(obj)


def _read_text(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise _IOFailure(f"cannot read {path}: {exc}") from exc


def load_csv_matrix(path: str) -> np.ndarray:
    """Load a numeric CSV; a non-numeric first row is treated as a header."""
    text = _read_text(path)
    rows = [row for row in csv.reader(text.splitlines()) if row]
    if not rows:
        raise _IOFailure(f"{path}: empty CSV")

    def parse(row):
        return [float(cell) for cell in row]

    try:
        first = parse(rows[0])
        data_rows = [first] + [parse(r) for r in rows[1:]]
    except ValueError:
        try:
            data_rows = [parse(r) for r in rows[1:]]
        except ValueError as exc:
            raise _IOFailure(
                f"{path}: non-numeric cell beyond the header: {exc}"
            ) from exc
        if not data_rows:
            raise _IOFailure(f"{path}: no data rows after the header")
    widths = {len(r) for r in data_rows}
    if len(widths) != 1:
        raise _IOFailure(f"{path}: rows have inconsistent column counts {widths}")
    return np.array(data_rows, dtype=np.float64)


def load_groups(path: str, n: int) -> tuple[tuple[int, ...], ...]:
    """Groups JSON: array of arrays of 1-based feature indices."""
    text = _read_text(path)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise _IOFailure(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, list) or not all(isinstance(grp, list) for grp in doc):
        raise _IOFailure(f"{path}: groups must be an array of arrays")
    groups = []
    for grp in doc:
        idx = []
        for v in grp:
            if not isinstance(v, int) or not 1 <= v <= n:
                raise UsageError(
                    f"group index {v!r} outside the 1-based feature range 1..{n}"
                )
            idx.append(v - 1)
        groups.append(tuple(idx))
    return tuple(groups)


def _add_data_flags(sub):
    sub.add_argument("--network", required=True, help="network JSON file")
    sub.add_argument("--instance", required=True,
                     help="explicand CSV (exactly one data row)")
    sub.add_argument("--background", required=True,
                     help="background CSV (one row per sample)")
    sub.add_argument("--groups", help="JSON array of arrays of 1-based indices")
    sub.add_argument("--value-fn", choices=("marginal", "baseline"),
                     default="marginal")
    sub.add_argument("--target-output", type=int, default=1,
                     help="1-based output index to attribute")
    sub.add_argument("--out", help="result JSON path (default: stdout)")


def _add_engine_flags(sub, with_stop=True):
    if with_stop:
        sub.add_argument("--delta", type=float,
                         help="absolute per-feature gap target")
        sub.add_argument("--hr-percent", type=float,
                         help="half-range target as percent of |f(x)_k|")
    sub.add_argument("--timeout", type=float, help="wall-clock limit in seconds")
    sub.add_argument("--max-iter", type=int, help="iteration guard")
    sub.add_argument("--batch", type=int, default=64, help="branches per step")
    sub.add_argument("--select", choices=sorted(_SELECT_FLAGS), default="max-diam")
    sub.add_argument("--split", choices=sorted(_SPLIT_FLAGS), default="smears")
    sub.add_argument("--prop", choices=("ibp", "lbp"), default="lbp")
    sub.add_argument("--trace", help="per-iteration CSV trace path")
    sub.add_argument("--trace-features", action="store_true",
                     help="include per-feature bounds in the trace CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shapbound",
        description="Provable anytime bounds on exact SHAP values of "
                    "feedforward networks.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p_bounds = subs.add_parser("bounds", help="run the bounding engine")
    _add_data_flags(p_bounds)
    _add_engine_flags(p_bounds)

    p_exact = subs.add_parser("exact",
                              help="run the engine to exhaustion (exact values)")
    _add_data_flags(p_exact)
    _add_engine_flags(p_exact, with_stop=False)

    p_oracle = subs.add_parser("oracle", help="brute-force enumeration (g <= 20)")
    _add_data_flags(p_oracle)

    p_check = subs.add_parser("check",
                              help="verify engine bounds against enumeration")
    _add_data_flags(p_check)
    _add_engine_flags(p_check)
    return parser


def _build_problem(args) -> AttributionProblem:
    net = load_network(_read_text(args.network))
    instance = load_csv_matrix(args.instance)
    if instance.shape[0] != 1:
        raise UsageError(
            f"--instance must contain exactly one data row, got {instance.shape[0]}"
        )
    background = load_csv_matrix(args.background)
    if args.value_fn == "baseline" and background.shape[0] != 1:
        raise UsageError("baseline requires exactly one background row")
    if not 1 <= args.target_output <= net.output_dim:
        raise UsageError(
            f"--target-output {args.target_output} outside 1..{net.output_dim}"
        )
    groups = None
    if args.groups:
        groups = load_groups(args.groups, net.input_dim)
    try:
        return AttributionProblem(
            net=net,
            explicand=instance[0],
            background=background,
            kind=args.value_fn,
            target_output=args.target_output - 1,
            groups=groups,
        )
    except (ValueError, ShapBoundError) as exc:
        raise UsageError(str(exc)) from exc


def _build_config(args, exact: bool = False) -> engine.EngineConfig:
    delta = getattr(args, "delta", None)
    hr_percent = getattr(args, "hr_percent", None)
    if exact:
        delta = 0.0
    cfg = engine.EngineConfig(
        batch_size=args.batch,
        select_strategy=_SELECT_FLAGS[args.select],
        split_strategy=_SPLIT_FLAGS[args.split],
        propagation=args.prop,
        delta=delta,
        hr_fraction=None if hr_percent is None else hr_percent / 100.0,
        timeout_seconds=args.timeout,
        max_iterations=args.max_iter,
    )
    try:
        cfg.validate()
    except ShapBoundError as exc:
        raise UsageError(str(exc)) from exc
    return cfg


def _config_echo(args, cfg: engine.EngineConfig) -> dict:
    return {
        "value_fn": args.value_fn,
        "target_output": args.target_output,
        "groups": args.groups,
        "batch_size": cfg.batch_size,
        "select_strategy": cfg.select_strategy,
        "split_strategy": cfg.split_strategy,
        "propagation": cfg.propagation,
        "delta": cfg.delta,
        "hr_fraction": cfg.hr_fraction,
        "timeout_seconds": cfg.timeout_seconds,
        "max_iterations": cfg.max_iterations,
        "prune_tol": cfg.prune_tol,
    }


def _feature_records(lb: np.ndarray, ub: np.ndarray) -> list[dict]:
    records = []
    for i in range(lb.shape[0]):
        lo = float(lb[i])
        hi = float(ub[i])
        records.append({
            "index": i + 1,
            "lb": lo,
            "ub": hi,
            "midpoint": (hi + lo) / 2.0,
            "half_range": (hi - lo) / 2.0,
        })
    return records


def _write_output(args, payload: dict):
    text = _dump_json(payload) + "\n"
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise _IOFailure(f"cannot write {args.out}: {exc}") from exc
    else:
        sys.stdout.write(text)


def _write_trace(args, result: engine.RunResult, g: int):
    if not getattr(args, "trace", None):
        return
    header = ["iteration", "active_branches", "pruned_total", "max_gap",
              "wall_seconds"]
    if args.trace_features:
        header += [f"lb_{i + 1}" for i in range(g)]
        header += [f"ub_{i + 1}" for i in range(g)]
    try:
        with open(args.trace, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for rec in result.trace:
                row = [rec.iteration, rec.active_branches, rec.pruned_total,
                       _format_float(rec.max_gap), _format_float(rec.wall_seconds)]
                if args.trace_features:
                    row += [_format_float(v) for v in rec.lb_phi]
                    row += [_format_float(v) for v in rec.ub_phi]
                writer.writerow(row)
    except OSError as exc:
        raise _IOFailure(f"cannot write {args.trace}: {exc}") from exc


def _run_engine_command(args, exact: bool) -> int:
    problem = _build_problem(args)
    cfg = _build_config(args, exact=exact)
    start = time.perf_counter()
    result = engine.run(problem, cfg)
    wall = time.perf_counter() - start
    payload = {
        "status": result.status,
        "features": _feature_records(result.bounds.lb_phi, result.bounds.ub_phi),
        "iterations": result.bounds.iteration,
        "branches_explored": result.bounds.branches_explored,
        "branches_pruned": result.bounds.branches_pruned,
        "wall_seconds": wall,
        "config": _config_echo(args, cfg),
    }
    _write_output(args, payload)
    _write_trace(args, result, problem.num_features)
    return EXIT_OK


def _run_oracle_command(args) -> int:
    problem = _build_problem(args)
    try:
        start = time.perf_counter()
        result = oracle.exact_shap(problem)
        wall = time.perf_counter() - start
    except TooManyFeaturesError as exc:
        raise UsageError(str(exc)) from exc
    payload = {
        "status": "ok",
        "features": [
            {"index": i + 1, "phi": float(v)} for i, v in enumerate(result.phi)
        ],
        "coalitions_evaluated": result.coalitions_evaluated,
        "wall_seconds": wall,
        "config": {
            "value_fn": args.value_fn,
            "target_output": args.target_output,
            "groups": args.groups,
        },
    }
    _write_output(args, payload)
    return EXIT_OK


def _run_check_command(args) -> int:
    problem = _build_problem(args)
    cfg = _build_config(args)
    try:
        start = time.perf_counter()
        report = oracle.check_engine(problem, cfg)
        wall = time.perf_counter() - start
    except TooManyFeaturesError as exc:
        raise UsageError(str(exc)) from exc
    payload = {
        "status": report.status,
        "contained": report.contained,
        "max_violation": report.max_violation,
        "max_abs_error": report.max_abs_error,
        "features": [
            {
                "index": i + 1,
                "phi": float(report.phi[i]),
                "lb": float(report.lb_phi[i]),
                "ub": float(report.ub_phi[i]),
            }
            for i in range(report.phi.shape[0])
        ],
        "wall_seconds": wall,
        "config": _config_echo(args, cfg),
    }
    _write_output(args, payload)
    return EXIT_OK if report.contained else EXIT_ENGINE


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "bounds":
            return _run_engine_command(args, exact=False)
        if args.command == "exact":
            return _run_engine_command(args, exact=True)
        if args.command == "oracle":
            return _run_oracle_command(args)
        if args.command == "check":
            return _run_check_command(args)
        parser.error(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (_IOFailure, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ShapBoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
