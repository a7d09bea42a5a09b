"""Command-line front end.

Exit codes: 0 success, 2 bad input (the offending field is named),
3 infeasible problem, 4 solver and oracle disagree.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import jsonschema

from . import __version__
from .core import Direction, MomentProblem, WeightedDistribution, validate_problem
from .errors import (
    BudgetOutOfRange,
    CapBelowMean,
    CapBelowSupport,
    ExtremalError,
    InfeasibleMean,
    MixedSlopeRequiresSegmentation,
    NegativeMean,
    NoFeasibleAllocation,
    NonMonotonicGrid,
    OutOfDomain,
    ParseError,
)
from .objective import BUILTINS, Expression, Objective, Tabulated, builtin
from .oracle import lp_extremal
from .quantum import (
    LzjcModel,
    PathSymmetricState,
    battery_optimal_state,
    lzjc_optimal,
    mzi_gap_to_optimal,
    mzi_noon_gap,
    mzi_optimal_state,
    mzi_qfi,
)
from .segment import SegmentOptions, Valuation, segmented_extremal
from .solver import check_feasible, extremal_expectation

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_MISMATCH = 0, 2, 3, 4
AGREEMENT_RTOL = 1e-9

_NUMBER = {"type": "number"}

PROBLEM_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["grid", "n_bar", "objective"],
    "properties": {
        "grid": {
            "oneOf": [
                {"type": "array", "items": _NUMBER, "minItems": 1},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["start", "stop", "step"],
                    "properties": {"start": _NUMBER, "stop": _NUMBER, "step": {"type": "number", "exclusiveMinimum": 0}},
                },
            ]
        },
        "p_bar": _NUMBER,
        "n_bar": _NUMBER,
        "direction": {"enum": ["max", "min"]},
        "objective": {
            "type": "object",
            "minProperties": 1,
            "maxProperties": 1,
            "additionalProperties": False,
            "properties": {
                "builtin": {
                    "type": "object",
                    "required": ["name"],
                    "properties": {"name": {"enum": sorted(BUILTINS)}},
                    "additionalProperties": _NUMBER,
                },
                "table": {
                    "oneOf": [
                        {"type": "array", "items": _NUMBER},
                        {"type": "object", "additionalProperties": _NUMBER},
                    ]
                },
                "expression": {"type": "string"},
            },
        },
        "options": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "resolution": {"type": "integer", "minimum": 3},
                "step_tol": {"type": "number", "exclusiveMinimum": 0},
                "valuation": {"enum": [v.value for v in Valuation]},
                "tolerance": {"type": "number", "exclusiveMinimum": 0},
                "seed": {"type": "integer"},
            },
        },
    },
}


class InputError(Exception):
    """Bad user input; ``field`` names the offending field."""

    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field


# ---------------------------------------------------------------- rendering

def _num(x: float) -> Any:
    x = float(x)
    if not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    if x.is_integer() and abs(x) < 2**53:
        return int(x)
    return x


def _dist(d: WeightedDistribution) -> list[dict]:
    return [{"x": _num(x), "weight": _num(w)} for x, w in d.items()]


def _g12(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if x is None:
        return ""
    return f"{float(x):.12g}"


def write_csv(path: str | Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_g12(v) for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")


def emit_plot_data(report: dict, path: str | Path) -> None:
    """Write the sweep or distribution payload of ``report`` as CSV."""
    if "sweep" in report:
        rows = report["sweep"]
        header = list(rows[0].keys())
        write_csv(path, header, [[r[h] for h in header] for r in rows])
    elif "distribution" in report:
        write_csv(path, ["support", "weight"], [[p["x"], p["weight"]] for p in report["distribution"]])
    else:
        raise ValueError("report has neither a sweep nor a distribution payload")


def _print(report: dict) -> None:
    sys.stdout.write(json.dumps(report, indent=2) + "\n")


def _header(command: str) -> dict:
    return {"tool": "extremal", "version": __version__, "command": command}


# ---------------------------------------------------------------- problem files

def _field_of(err: jsonschema.ValidationError) -> str:
    path = ".".join(str(p) for p in err.absolute_path)
    if err.validator == "additionalProperties" and isinstance(err.instance, dict):
        allowed = err.schema.get("properties", {})
        extra = sorted(k for k in err.instance if k not in allowed)
        if extra and err.schema.get("additionalProperties") is False:
            return ".".join(filter(None, [path, extra[0]]))
    return path or "(document)"


def load_problem_document(path: str | Path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError("problem-file", str(exc)) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError("problem-file", f"not valid JSON: {exc}") from None
    validator = jsonschema.Draft202012Validator(PROBLEM_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (len(list(e.absolute_path)), str(e.absolute_path)))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise InputError(_field_of(err), err.message)
    return doc


def expand_grid(spec) -> list[float]:
    if isinstance(spec, list):
        return [float(x) for x in spec]
    start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
    if stop < start:
        raise InputError("grid.stop", "stop is below start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    if count > 10_000_000:
        raise InputError("grid", f"range expands to {count} points")
    return [start + i * step for i in range(count)]


def build_objective(spec: dict, grid: Sequence[float]) -> Objective:
    (kind, body), = spec.items()
    if kind == "builtin":
        params = {k: v for k, v in body.items() if k != "name"}
        try:
            return builtin(body["name"], **params)
        except (TypeError, ValueError) as exc:
            raise InputError("objective.builtin", str(exc)) from None
    if kind == "table":
        if isinstance(body, list):
            if len(body) != len(grid):
                raise InputError("objective.table", f"{len(body)} values for {len(grid)} grid points")
            return Tabulated.from_values(grid, body)
        try:
            table = {float(k): float(v) for k, v in body.items()}
        except ValueError as exc:
            raise InputError("objective.table", f"keys must be numbers: {exc}") from None
        missing = [x for x in grid if x not in table]
        if missing:
            raise InputError("objective.table", f"no value for grid point {missing[0]!r}")
        return Tabulated(table)
    try:
        return Expression(body)
    except ParseError as exc:
        raise InputError("objective.expression", str(exc)) from None


def load_problem(path: str | Path):
    doc = load_problem_document(path)
    grid = expand_grid(doc["grid"])
    p_bar = doc.get("p_bar", 1.0)
    try:
        problem = validate_problem(grid, p_bar, doc["n_bar"])
    except NonMonotonicGrid as exc:
        raise InputError("grid", str(exc)) from None
    except BudgetOutOfRange as exc:
        raise InputError("p_bar", str(exc)) from None
    obj = build_objective(doc["objective"], problem.grid)
    direction = Direction.parse(doc.get("direction", "max"))
    return doc, problem, obj, direction, doc.get("options", {})


def _segment_options(opts: dict, problem: MomentProblem) -> SegmentOptions:
    kw = {"p_bar": problem.p_bar}
    for key in ("resolution", "step_tol", "seed"):
        if key in opts:
            kw[key] = opts[key]
    if "valuation" in opts:
        kw["valuation"] = Valuation(opts["valuation"])
    return SegmentOptions(**kw)


def _agree(value: float, reference: float, rtol: float) -> bool:
    return abs(value - reference) <= rtol * max(1.0, abs(reference))


def _oracle_block(problem, obj, direction, value, rtol, one_sided=False) -> dict:
    oracle = lp_extremal(problem, obj, direction)
    if one_sided:
        sign = 1.0 if direction is Direction.MAX else -1.0
        ok = sign * (value - oracle.best_value) <= rtol * max(1.0, abs(oracle.best_value))
    else:
        ok = _agree(value, oracle.best_value, rtol)
    return {
        "value": _num(oracle.best_value),
        "distribution": _dist(oracle.best_support),
        "candidates_examined": oracle.candidates_examined,
        "agreement": bool(ok),
        "check": "one-sided" if one_sided else "two-sided",
    }


def _problem_echo(problem: MomentProblem, obj: Objective, direction: Direction) -> dict:
    return {
        "grid_size": len(problem.grid),
        "grid_min": _num(problem.grid[0]),
        "grid_max": _num(problem.grid[-1]),
        "p_bar": _num(problem.p_bar),
        "n_bar": _num(problem.n_bar),
        "objective": obj.describe(),
        "direction": direction.value,
    }


def _segmented_payload(res) -> dict:
    return {
        "branch": "Segmented",
        "value": _num(res.value),
        "objective_value": _num(res.objective_value),
        "valuation": res.valuation.value,
        "distribution": _dist(res.distribution),
        "intervals": [
            {"lo": _num(iv.lo), "hi": _num(iv.hi), "slope": iv.slope.value, "p": _num(p), "n": _num(n)}
            for iv, (p, n) in zip(res.plan.intervals, res.allocations)
        ],
        "trace": {
            "evaluations": res.trace.evaluations,
            "refinement_steps": res.trace.refinement_steps,
            "boundary_faces": res.trace.boundary_faces,
            "kink_candidates": res.trace.kink_candidates,
            "notes": list(res.trace.notes),
        },
    }


def _solve(problem, obj, direction, opts, force_segment: bool) -> tuple[dict, float, list[str]]:
    notices = []
    if not force_segment:
        try:
            res = extremal_expectation(problem, obj, direction)
            payload = {"branch": res.branch.value, "value": _num(res.value), "distribution": _dist(res.distribution)}
            return payload, res.value, notices
        except MixedSlopeRequiresSegmentation as exc:
            notices.append(f"objective has mixed slope (breakpoints {list(exc.breakpoints)}); using segmentation")
    if len(problem.grid) == 1:
        res = extremal_expectation(problem, obj, direction)
        return {"branch": res.branch.value, "value": _num(res.value), "distribution": _dist(res.distribution)}, res.value, notices
    res = segmented_extremal(problem, obj, direction, _segment_options(opts, problem))
    return _segmented_payload(res), res.value, notices


def _cmd_problem(args, command: str) -> int:
    _, problem, obj, direction, opts = load_problem(args.problem)
    rtol = float(opts.get("tolerance", AGREEMENT_RTOL))
    payload, value, notices = _solve(problem, obj, direction, opts, force_segment=command == "segment")
    for note in notices:
        print(f"notice: {note}", file=sys.stderr)
    report = _header(command)
    report["input"] = _problem_echo(problem, obj, direction)
    if notices:
        report["notices"] = notices
    report["result"] = payload
    status = EXIT_OK
    if command == "verify" or not args.no_verify:
        block = _oracle_block(problem, obj, direction, value, rtol)
        report["oracle"] = block
        if not block["agreement"]:
            status = EXIT_MISMATCH
    _print(report)
    if args.csv:
        emit_plot_data({"distribution": payload["distribution"]}, args.csv)
    if status == EXIT_MISMATCH:
        print("error: solver and oracle disagree", file=sys.stderr)
    return status


# ---------------------------------------------------------------- quantum commands

def _parse_range(text: str, flag: str) -> list[float]:
    parts = text.split(":")
    try:
        lo, hi, step = (float(p) for p in parts) if len(parts) == 3 else (*map(float, parts), 1.0)
    except (TypeError, ValueError):
        raise InputError(flag, f"expected lo:hi[:step], got {text!r}") from None
    if step <= 0 or hi < lo:
        raise InputError(flag, f"empty or backwards range {text!r}")
    return expand_grid({"start": lo, "stop": hi, "step": step})


def _load_state(path: str) -> PathSymmetricState:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError("state", str(exc)) from None
    weights = doc.get("fock_weights") if isinstance(doc, dict) else None
    if not isinstance(weights, dict) or set(doc) != {"fock_weights"}:
        raise InputError("state", 'expected {"fock_weights": {"<level>": <weight>, ...}}')
    try:
        return PathSymmetricState({int(k): float(v) for k, v in weights.items()})
    except ValueError as exc:
        raise InputError("state.fock_weights", str(exc)) from None


def _cmd_mzi(args) -> int:
    report = _header("mzi")
    custom = _load_state(args.state) if args.state else None
    if args.sweep:
        n_bars = _parse_range(args.sweep, "--sweep")
        rows = []
        for n in n_bars:
            _, oi = mzi_optimal_state(n, args.cap)
            rows.append({"n_bar_total": n, "crb_noon": 1.0 / (n * n), "crb_oi": oi.crb})
        if custom is not None:
            n = custom.n_bar_total
            _, oi = mzi_optimal_state(n, args.cap)
            rows.append({"n_bar_total": n, "crb_noon": 1.0 / (n * n), "crb_oi": oi.crb,
                         "crb_custom": mzi_qfi(custom).crb})
            rows.sort(key=lambda r: (r["n_bar_total"], "crb_custom" in r))
            for r in rows:
                r.setdefault("crb_custom", None)
        report["input"] = {"sweep": args.sweep, "cap": args.cap}
        report["sweep"] = [{k: (_num(v) if v is not None else None) for k, v in r.items()} for r in rows]
        _print(report)
        if args.csv:
            emit_plot_data(report, args.csv)
        return EXIT_OK

    if args.nbar is None:
        raise InputError("--nbar", "required unless --sweep is given")
    state, qfi = mzi_optimal_state(args.nbar, args.cap)
    report["input"] = {"n_bar": _num(args.nbar), "cap": args.cap}
    report["optimal_state"] = {
        "fock_weights": [{"n": n, "weight": _num(w)} for n, w in state.fock_weights],
        "n_bar_total": _num(state.n_bar_total),
    }
    report["qfi"] = _qfi(qfi)
    report["noon"] = {"fisher_information": _num(args.nbar**2), "crb": _num(1.0 / args.nbar**2)}
    if custom is not None:
        report["state"] = {
            "n_bar_total": _num(custom.n_bar_total),
            "qfi": _qfi(mzi_qfi(custom)),
            "noon_gap": _num(mzi_noon_gap(custom)),
            "gap_to_optimal": _num(mzi_gap_to_optimal(custom, args.cap)),
        }
    _print(report)
    if args.csv:
        emit_plot_data({"distribution": [{"x": n, "weight": w} for n, w in state.fock_weights]}, args.csv)
    return EXIT_OK


def _qfi(q) -> dict:
    return {
        "fisher_information": _num(q.fisher_information),
        "crb": _num(q.crb),
        "n_bar": _num(q.n_bar),
        "beats_sql": q.beats_sql,
        "beats_heisenberg": q.beats_heisenberg,
    }


def _cmd_lzjc(args) -> int:
    try:
        model = LzjcModel(args.v, args.delta, args.truncation)
        model.objective
    except ValueError as exc:
        raise InputError("--v/--delta/--truncation", str(exc)) from None
    valuation = Valuation(args.valuation)
    report = _header("lzjc")
    report["input"] = {
        "v": _num(args.v), "delta": _num(args.delta), "truncation": args.truncation,
        "valuation": valuation.value, "breakpoint": args.breakpoint,
    }
    n_bars = _parse_range(args.sweep, "--sweep") if args.sweep else None
    if n_bars is None:
        if args.nbar is None:
            raise InputError("--nbar", "required unless --sweep is given")
        n_bars = [args.nbar]
    for n in n_bars:
        if not 0 <= n <= model.truncation:
            raise InfeasibleMean(f"N_bar={n!r} outside [0, {model.truncation}]")

    status = EXIT_OK
    rows = []
    for n in n_bars:
        dist, qfi, res = lzjc_optimal(model, n, valuation=valuation, breakpoint=args.breakpoint)
        block = None
        if not args.no_verify:
            problem = MomentProblem(model.grid, 1.0, float(n))
            one_sided = valuation is Valuation.CONTINUOUS
            block = _oracle_block(problem, model.objective, Direction.MAX, qfi.fisher_information,
                                  AGREEMENT_RTOL, one_sided=one_sided)
            block["feasible"] = check_feasible(dist, problem, 1e-9)
            block["agreement"] = block["agreement"] and block["feasible"]
            del block["distribution"]
            if not block["agreement"]:
                status = EXIT_MISMATCH
        rows.append((n, dist, qfi, res, block))

    if args.sweep:
        report["sweep"] = [
            {"n_bar": _num(n), "f_max": _num(q.fisher_information), "crb": _num(q.crb),
             "beats_sql": q.beats_sql, "beats_heisenberg": q.beats_heisenberg}
            for n, _, q, _, _ in rows
        ]
        if not args.no_verify:
            report["oracle"] = [{"n_bar": _num(n), **b} for n, _, _, _, b in rows]
    else:
        n, dist, qfi, res, block = rows[0]
        report["qfi"] = _qfi(qfi)
        report["distribution"] = _dist(dist)
        report["allocation"] = _segmented_payload(res)["intervals"]
        report["objective_value"] = _num(res.objective_value)
        if block is not None:
            report["oracle"] = block
    _print(report)
    if args.csv:
        emit_plot_data(report, args.csv)
    if status == EXIT_MISMATCH:
        print("error: lzjc optimum disagrees with the oracle", file=sys.stderr)
    return status


def _cmd_battery(args) -> int:
    dist = battery_optimal_state(args.nbar)
    report = _header("battery")
    report["input"] = {"n_bar": _num(args.nbar)}
    report["distribution"] = _dist(dist)
    _print(report)
    if args.csv:
        emit_plot_data(report, args.csv)
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="extremal", description="Extremal expectations under moment constraints.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, text in (
        ("solve", "closed-form solve; falls through to segmentation for mixed slopes"),
        ("segment", "always use the segmented solver"),
        ("verify", "solve and compare against vertex enumeration"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("problem", help="JSON problem file")
        p.add_argument("--csv", help="write the distribution as CSV")
        if name != "verify":
            p.add_argument("--no-verify", action="store_true", help="skip the oracle cross-check")
        else:
            p.set_defaults(no_verify=False)

    p = sub.add_parser("mzi", help="Mach-Zehnder QFI for NOON and optimal states")
    p.add_argument("--nbar", type=float)
    p.add_argument("--cap", type=int, required=True, help="highest Fock level allowed")
    p.add_argument("--state", help='JSON file {"fock_weights": {...}} with a state to compare')
    p.add_argument("--sweep", help="n_bar range lo:hi[:step]")
    p.add_argument("--csv")

    p = sub.add_parser("lzjc", help="optimal cavity state for the LZ-JC sweep")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--v", type=float, required=True)
    p.add_argument("--nbar", type=float)
    p.add_argument("--sweep", help="N_bar range lo:hi[:step]")
    p.add_argument("--breakpoint", choices=["discrete", "continuous"], default="discrete")
    p.add_argument("--truncation", type=int, default=100)
    p.add_argument("--valuation", choices=[v.value for v in Valuation], default=Valuation.CONTINUOUS.value)
    p.add_argument("--no-verify", action="store_true")
    p.add_argument("--csv")

    p = sub.add_parser("battery", help="optimal battery cavity state")
    p.add_argument("--nbar", type=float, required=True)
    p.add_argument("--csv")
    return parser


def dispatch(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command in ("solve", "segment", "verify"):
            return _cmd_problem(args, args.command)
        if args.command == "mzi":
            return _cmd_mzi(args)
        if args.command == "lzjc":
            return _cmd_lzjc(args)
        return _cmd_battery(args)
    except InputError as exc:
        print(f"error: field '{exc.field}': {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InfeasibleMean, NoFeasibleAllocation, CapBelowMean, CapBelowSupport, NegativeMean) as exc:
        print(f"error: infeasible: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (OutOfDomain, ExtremalError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main(argv: Sequence[str] | None = None) -> int:
    return dispatch(argv)


if __name__ == "__main__":
    sys.exit(main())
