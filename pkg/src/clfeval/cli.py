"""Command-line interface: ``clfeval {evaluate,calibrate,check,compare,project}``.

Exit status: 0 success, 1 usage error, 2 data error, 3 a property verdict
contradicts the expectation file (``check`` only).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .analysis import (
    SystemRun,
    correlation_matrix,
    ensemble_rank,
    ensemble_winners,
    project_precision,
    score_systems,
)
from .exceptions import ClfEvalError, UnknownMetricError
from .io import dumps_matrix, load_matrix, matrix_to_dict
from .matrix import calibrate, calibration_scaling
from .metrics import DEFAULT_ROSTER, TABLE_METRICS, evaluate_all, parse_metric
from .properties import (
    DEFAULT_SEED,
    PropertyId,
    SearchBudget,
    compare_with_expectations,
    load_expectations,
    property_table,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_CONTRADICTION = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _split(text: str | None) -> list[str]:
    if not text:
        return []
    return [x.strip() for x in text.split(",") if x.strip()]


def _metrics(args, default) -> list:
    names = []
    for chunk in args.metrics or []:
        names.extend(_split(chunk))
    metrics = [parse_metric(x) for x in names] if names else list(default)
    if getattr(args, "calibrated", False):
        metrics += [m.with_calibration() for m in metrics if not m.calibrated]
    return metrics


def _sep(args):
    if args.sep is None:
        return None
    return {"tab": "\t", "\\t": "\t", "comma": ","}.get(args.sep, args.sep)


def _labels(args):
    return _split(args.labels) or None


def _emit(text: str, args) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def _table(rows: Sequence[Sequence], head: Sequence[str]) -> str:
    rows = [[str(c) for c in r] for r in rows]
    widths = [max(len(x) for x in col) for col in zip(head, *rows)] if rows else [len(h) for h in head]
    lines = ["  ".join(h.ljust(w) for h, w in zip(head, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    return "\n".join(lines)


def _csv(rows, head) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(head)
    writer.writerows(rows)
    return buf.getvalue()


def _value_text(v):
    return "" if v is None else repr(v)


# --------------------------------------------------------------------------
# commands


def cmd_evaluate(args) -> int:
    m = load_matrix(args.input, _labels(args), _sep(args))
    scores = evaluate_all(m, _metrics(args, DEFAULT_ROSTER))
    records = [s.to_dict() for s in scores]
    if args.format == "json":
        text = json.dumps({"labels": list(m.labels.labels), "scores": records}, indent=2)
    else:
        rows = [(r["metric"], _value_text(r["value"]), ";".join(r["flags"])) for r in records]
        head = ("metric", "value", "flags")
        text = _csv(rows, head) if args.format == "csv" else _table(rows, head)
    _emit(text, args)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    m = load_matrix(args.input, _labels(args), _sep(args))
    lam = calibration_scaling(m)
    cal = calibrate(m)
    if args.format == "json":
        data = matrix_to_dict(cal)
        data["scaling"] = [float(x) for x in lam.factors]
        text = json.dumps(data, indent=2)
    else:
        head = ["pred\\gold"] + list(cal.labels.labels)
        rows = [[lab] + [repr(float(v)) for v in row] for lab, row in zip(cal.labels.labels, cal.cells)]
        rows.append(["scaling"] + [repr(float(x)) for x in lam.factors])
        text = _csv(rows, head) if args.format == "csv" else _table(rows, head)
    _emit(text, args)
    return EXIT_OK


def _properties(args) -> tuple:
    names = []
    for chunk in args.property or []:
        names.extend(_split(chunk))
    if not names:
        return tuple(PropertyId)
    out = []
    for name in names:
        try:
            out.append(PropertyId(name))
        except ValueError:
            raise UsageError(f"unknown property {name!r}; choose from {[p.value for p in PropertyId]}") from None
    return tuple(out)


def _witness_lines(report) -> list[str]:
    lines = []
    for row in report.rows:
        for prop, v in row.verdicts.items():
            w = v.witness
            if w is None or v.verdict.value != "refuted":
                continue
            cells = dumps_matrix(w.matrix)
            if w.kind == "unit_increment":
                (i, j), = w.cells
                what = f"add {w.delta:g} at (pred {w.matrix.labels.labels[i]}, gold {w.matrix.labels.labels[j]})"
            elif w.kind == "scaling_pair":
                what = f"scale columns by {list(w.scalings[0])} vs {list(w.scalings[1])}"
            elif w.kind == "chance":
                what = "chance matrix vs uniform baseline"
            else:
                what = w.kind
            lines.append(
                f"{row.metric.name} {prop.value}: {cells} {what}: {w.scores[0]!r} -> {w.scores[1]!r} [{w.origin}]"
            )
    return lines


def cmd_check(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    if args.max_n < 2:
        raise UsageError("--max-n must be at least 2")
    if args.max_mass < 1:
        raise UsageError("--max-mass must be at least 1")
    budget = SearchBudget(args.trials, args.seed, (2, args.max_n), (0, args.max_mass))
    metrics = _metrics(args, TABLE_METRICS)
    report = property_table(metrics, budget, _properties(args))
    expectations = load_expectations(args.expectations)
    problems = compare_with_expectations(report, expectations)
    if args.format == "json":
        data = report.to_dict()
        data["contradictions"] = problems
        text = json.dumps(data, indent=2)
    elif args.format == "csv":
        rows = []
        for row in report.rows:
            for prop, v in row.verdicts.items():
                cal = row.calibrated.get(prop)
                rows.append((row.metric.name, prop.value, v.verdict.value, "" if cal is None else cal.verdict.value))
        text = _csv(rows, ("metric", "property", "verdict", "calibrated_verdict"))
    else:
        parts = [report.render()]
        witnesses = _witness_lines(report)
        if witnesses:
            parts += ["", "witnesses:"] + [f"  {w}" for w in witnesses]
        parts += ["", f"contradictions: {len(problems)}"] + [f"  {p}" for p in problems]
        text = "\n".join(parts)
    _emit(text, args)
    return EXIT_CONTRADICTION if problems else EXIT_OK


def _system_names(paths, names):
    if names:
        if len(names) != len(paths):
            raise UsageError("--names needs one name per input")
        return names
    stems = [Path(p).stem for p in paths]
    if len(set(stems)) == len(stems):
        return stems
    return [f"{s}#{k + 1}" for k, s in enumerate(stems)]


def cmd_compare(args) -> int:
    paths = list(args.inputs)
    names = _system_names(paths, _split(args.names))
    runs = [SystemRun(name, load_matrix(p, _labels(args), _sep(args))) for name, p in zip(names, paths)]
    metrics = _metrics(args, DEFAULT_ROSTER)
    table = score_systems(runs, metrics)
    corr = correlation_matrix(table) if len(runs) >= 2 else None
    ensemble = None
    if args.ensemble is not None:
        subset = [parse_metric(x) for x in _split(args.ensemble)] if args.ensemble else list(table.metrics)
        ensemble = ensemble_rank(table, subset)
    if args.format == "json":
        data = {"ranking": table.to_dict(), "correlation": None if corr is None else corr.to_dict()}
        if ensemble is not None:
            data["ensemble"] = [vars(e) for e in ensemble]
            data["winners"] = ensemble_winners(ensemble)
        _emit(json.dumps(data, indent=2), args)
        return EXIT_OK
    parts = {"ranking.csv": table.to_csv()}
    if corr is not None:
        parts["correlation.csv"] = corr.to_csv()
    if ensemble is not None:
        rows = [(e.system, repr(e.mean_rank), repr(e.position), "tie" if e.tied else "") for e in ensemble]
        parts["ensemble.csv"] = _csv(rows, ("system", "mean_rank", "position", "tied"))
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in parts.items():
            (out / name).write_text(text)
    else:
        sys.stdout.write("\n".join(f"# {name}\n{text}" for name, text in parts.items()))
    if ensemble is not None:
        winners = ensemble_winners(ensemble)
        label = "winner" if len(winners) == 1 else "tied winners"
        print(f"ensemble {label}: {', '.join(winners)}", file=sys.stderr if not args.output else sys.stdout)
    return EXIT_OK


def _floats(text, name):
    try:
        return [float(x) for x in _split(text)]
    except ValueError:
        raise UsageError(f"{name} must be comma-separated numbers") from None


def cmd_project(args) -> int:
    labels = _labels(args)
    if args.input:
        try:
            data = json.loads(Path(args.input).read_text())
        except OSError as exc:
            raise ClfEvalError(f"cannot read {args.input}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ClfEvalError(f"{args.input}: invalid JSON: {exc.msg}") from None
        try:
            recalls, class_dist, pred_dist = data["recalls"], data["class_dist"], data["pred_dist"]
        except KeyError as exc:
            raise ClfEvalError(f"projection JSON lacks field {exc.args[0]!r}") from None
        labels = labels or data.get("labels")
    else:
        if not (args.recalls and args.class_dist and args.pred_dist):
            raise UsageError("give --input or all of --recalls, --class-dist, --pred-dist")
        recalls = _floats(args.recalls, "--recalls")
        class_dist = _floats(args.class_dist, "--class-dist")
        pred_dist = _floats(args.pred_dist, "--pred-dist")
    proj = project_precision(recalls, class_dist, pred_dist)
    if labels is not None and len(labels) != len(proj.raw):
        raise ClfEvalError("number of labels does not match the recall vector")
    data = proj.to_dict(labels)
    if args.format == "json":
        text = json.dumps(data, indent=2)
    else:
        rows = [
            (lab, repr(p), repr(r), "clamped" if c else "")
            for lab, p, r, c in zip(data["labels"], data["precision"], data["raw"], data["clamped"])
        ]
        rows.append(("macro", repr(data["macro_precision"]), "", ""))
        head = ("class", "precision", "raw", "flag")
        text = _csv(rows, head) if args.format == "csv" else _table(rows, head)
    _emit(text, args)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _common(p, *, inputs=False, metrics=True, calibrated=True):
    if inputs:
        p.add_argument("--inputs", nargs="+", required=True, help="prediction CSV/TSV files or matrix JSON files")
        p.add_argument("--names", help="comma-separated system names (default: file stems)")
    else:
        p.add_argument("--input", required=True, help="prediction CSV/TSV or matrix JSON")
    p.add_argument("--labels", help="comma-separated label order; unknown labels become errors")
    p.add_argument("--sep", help="prediction file separator (default: sniffed from the header; 'tab' or ',')")
    if metrics:
        p.add_argument("--metrics", "--metric", action="append", help="comma-separated metric names")
    if calibrated:
        p.add_argument("--calibrated", action="store_true", help="add the calibrated variant (name~) of each metric")
    p.add_argument("--format", choices=("json", "csv", "table"), default="table")
    p.add_argument("--output", help="write to this file (compare: directory) instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="clfeval", description="Confusion-matrix metrics, property checks and ranking analysis.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("evaluate", help="score one classifier under a metric roster")
    _common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("calibrate", help="rescale columns to equal class prevalence")
    _common(p, metrics=False, calibrated=False)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("check", help="run the property checks and compare with expectations")
    p.add_argument("--metrics", "--metric", action="append", help="comma-separated metric names")
    p.add_argument("--property", action="append", help="comma-separated property names (default: all)")
    p.add_argument("--trials", type=int, default=SearchBudget().trials)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--max-n", type=int, default=SearchBudget().matrix_size_range[1])
    p.add_argument("--max-mass", type=int, default=SearchBudget().mass_range[1])
    p.add_argument("--expectations", help="expectation JSON (default: bundled summary table)")
    p.add_argument("--format", choices=("json", "csv", "table"), default="table")
    p.add_argument("--output")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("compare", help="rank several systems and correlate the metric rankings")
    _common(p, inputs=True)
    p.add_argument(
        "--ensemble",
        nargs="?",
        const="",
        help="report mean-rank winners over these metrics (default: all table metrics)",
    )
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("project", help="estimate class precisions from recalls and class distributions")
    p.add_argument("--input", help='JSON with "recalls", "class_dist", "pred_dist" and optional "labels"')
    p.add_argument("--recalls")
    p.add_argument("--class-dist")
    p.add_argument("--pred-dist")
    p.add_argument("--labels")
    p.add_argument("--format", choices=("json", "csv", "table"), default="table")
    p.add_argument("--output")
    p.set_defaults(func=cmd_project)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UnknownMetricError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ClfEvalError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
