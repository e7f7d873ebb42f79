"""``fairaudit`` command line.

Subcommands: ``audit``, ``experiment``, ``kearns-study``, ``grid``, ``synth``.
Exit codes: 0 success, 2 validation error, 3 runtime error. Errors are
reported as a JSON document on stderr. Outputs are assembled in memory and
written only once everything has been computed, so a failed run leaves no
partial files behind.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import report as rp
from .ci_metrics import (
    ACCURACY,
    GRID_MODES,
    AuditConfig,
    PerformanceMetric,
    audit,
    grid_axis,
    mn_grid,
)
from .dataset import DatasetSchema, load_csv
from .errors import FairAuditError, InvalidRange, TooFewPoints, ValidationError
from .experiments import (
    CRITICAL_GROUP,
    DEFAULT_FRACTIONS,
    WHOLE_DATASET,
    SubsamplePlan,
    SynthSpec,
    kearns_small_group_study,
    run_subsample_all,
    run_subsample_group,
    synth_generate,
    trend,
)
from .learner import CELL_MAJORITY, EXTERNAL, LOGISTIC, CVConfig, PredictorSpec, fit_cv
from .subgroups import SubgroupKey, enumerate_subgroups
from .svg import heatmap_svg, series_svg

FROZEN = "frozen"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        sys.stderr.write(json.dumps({"error": "UsageError", "message": message}) + "\n")
        sys.exit(2)


def _csv_floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _n_values(text: str) -> list[int]:
    """``"1,2,5"`` or an inclusive range ``"1-200"``."""
    text = text.strip()
    try:
        if "-" in text and "," not in text:
            lo, hi = (int(t) for t in text.split("-", 1))
            return list(range(lo, hi + 1))
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad n list {text!r}") from None


def _formats(text: str) -> set[str]:
    out = {t.strip() for t in text.split(",") if t.strip()}
    bad = out - {"json", "csv", "svg"}
    if bad:
        raise argparse.ArgumentTypeError(f"unknown format(s): {sorted(bad)}")
    return out


def _common(p: argparse.ArgumentParser, data: bool = True) -> None:
    if data:
        p.add_argument("--data", required=True, help="CSV file with a header row")
        p.add_argument("--schema", required=True, help="JSON schema document")
        p.add_argument("--metric", default="accuracy", choices=["accuracy", "tpr", "tnr"])
        p.add_argument("--positive-class", default=None, help="class counted as positive for tpr/tnr")
        p.add_argument("--alpha", type=float, default=0.05, help="one-sided significance level")
        p.add_argument("--bonferroni", action="store_true", help="split alpha over all subgroups")
        p.add_argument("--clamp", action="store_true", help="clamp reported bounds to [0, 1]")
        p.add_argument(
            "--learner",
            default=None,
            choices=[FROZEN, CELL_MAJORITY, LOGISTIC, EXTERNAL],
            help="prediction source (default: frozen if the schema has a prediction column)",
        )
        p.add_argument("--command", default=None, help="external predictor command")
        p.add_argument("--folds", type=int, default=3)
    p.add_argument("--z", type=float, default=1.64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--format", type=_formats, default=None, help="comma list of json,csv,svg")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fairaudit", description="Intersectional fairness audits with confidence-interval metrics.")
    sub = parser.add_subparsers(dest="command_name", required=True, parser_class=_Parser)

    p = sub.add_parser("audit", help="audit predictions and write c1/c2 reports")
    _common(p)

    p = sub.add_parser("experiment", help="subsampling experiment on critical subgroups")
    _common(p)
    p.add_argument("--target", choices=[CRITICAL_GROUP, WHOLE_DATASET], default=CRITICAL_GROUP)
    p.add_argument("--group", action="append", default=[], help="subgroup key attr=val|attr=val (repeatable)")
    p.add_argument("--fractions", type=_csv_floats, default=list(DEFAULT_FRACTIONS))
    p.add_argument("--restore-all", action="store_true", help="re-add every removed record of a vanished class")

    p = sub.add_parser("kearns-study", help="weighted-disparity study on small subgroups")
    _common(p)
    p.add_argument("--alpha-cap", type=float, default=0.10)
    p.add_argument("--fractions", type=_csv_floats, default=list(DEFAULT_FRACTIONS))
    p.add_argument("--restore-all", action="store_true")

    p = sub.add_parser("grid", help="bound values over an (m, n) grid")
    _common(p, data=False)
    p.add_argument("--m-steps", type=int, default=101)
    p.add_argument("--n-values", type=_n_values, default=list(range(1, 101)))
    p.add_argument("--mode", choices=list(GRID_MODES) + ["all"], default="all")

    p = sub.add_parser("synth", help="generate a synthetic dataset with frozen predictions")
    _common(p, data=False)
    p.add_argument(
        "--group",
        action="append",
        required=True,
        help="KEY:SIZE:P, e.g. 'race=a|sex=x:100:0.8' (repeatable)",
    )
    return parser


# --- helpers -------------------------------------------------------------------


def _config(args) -> AuditConfig:
    kind = {"accuracy": ACCURACY, "tpr": "tpr", "tnr": "tnr"}[args.metric]
    metric = PerformanceMetric(kind, args.positive_class)
    return AuditConfig(z=args.z, alpha=args.alpha, bonferroni=args.bonferroni, clamp_bounds=args.clamp, metric=metric)


def _load(args):
    schema = DatasetSchema.from_json(args.schema)
    data = load_csv(args.data, schema)
    learner = args.learner or (FROZEN if schema.prediction_column else CELL_MAJORITY)
    if learner == FROZEN:
        if schema.prediction_column is None:
            raise ValidationError("frozen predictions need a prediction_column in the schema")
        spec = None
    else:
        spec = PredictorSpec(learner, command=args.command)
    return data, spec, CVConfig(args.folds, args.seed)


def _wants(args, fmt: str, default: set[str]) -> bool:
    return fmt in (args.format if args.format is not None else default)


def _flush(out_dir: Path, files: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, content in files.items():
        (out_dir / name).write_text(content, encoding="utf-8")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json_text(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _key_list(texts) -> list[SubgroupKey]:
    return [SubgroupKey.parse(t) for t in texts]


def _trends(points, fields=("m", "c1", "c2")) -> dict:
    out = {}
    for f in fields:
        try:
            out[f] = rp.trend_to_dict(trend(points, f))
        except TooFewPoints:
            out[f] = None
    return out


# --- subcommands ---------------------------------------------------------------


def cmd_audit(args) -> int:
    config = _config(args)
    data, spec, cv = _load(args)
    predictions = None if spec is None else fit_cv(data, spec, cv).predictions
    index = enumerate_subgroups(data)
    rep = audit(data, config, predictions, index=index)
    if config.metric.kind == ACCURACY and rep.overall is not None and rep.overall.m == 1.0:
        sys.stderr.write("warning: overall accuracy is 1.0\n")

    files = {}
    if _wants(args, "json", {"json", "csv"}):
        files["audit.json"] = _json_text(rp.report_to_dict(rep, rp.baselines_section(rep, index)))
    if _wants(args, "csv", {"json", "csv"}):
        files["tables.csv"] = _csv_text(["statistic", "subgroup", "category", "n", "value"], rp.tables_rows(rep))
        files["bounds.csv"] = _csv_text(["subgroup", "n", "m", "lower", "upper"], rp.bounds_rows(rep))
    _flush(Path(args.out_dir), files)
    return 0


def cmd_experiment(args) -> int:
    config = _config(args)
    data, spec, cv = _load(args)
    groups = _key_list(args.group)
    if not groups:
        preds = None if spec is None else fit_cv(data, spec, cv).predictions
        rep = audit(data, config, preds)
        groups = list(dict.fromkeys([rep.critical_min_acc, rep.critical_c1, rep.critical_c2]))

    series, summary = {}, {"target": args.target, "seed": args.seed, "nested": True, "groups": {}}
    for key in groups:
        plan = SubsamplePlan(tuple(args.fractions), args.target, args.seed, (key,), args.restore_all)
        if args.target == CRITICAL_GROUP:
            pts = run_subsample_group(data, key, plan, spec, cv, config)
        else:
            pts = run_subsample_all(data, [key], plan, spec, cv, config)
        series[str(key)] = pts
        summary["groups"][str(key)] = {"points": [rp.point_to_dict(p) for p in pts], "trends": _trends(pts)}

    files = {}
    if _wants(args, "csv", {"json", "csv", "svg"}):
        for k, pts in series.items():
            files[f"series_{rp.safe_filename(k)}.csv"] = _csv_text(rp.SERIES_COLUMNS, rp.series_rows(pts))
    if _wants(args, "json", {"json", "csv", "svg"}):
        files["summary.json"] = _json_text(summary)
    if _wants(args, "svg", {"json", "csv", "svg"}):
        files["series.svg"] = series_svg(series, title=f"subsample {args.target}")
    _flush(Path(args.out_dir), files)
    return 0


def cmd_kearns_study(args) -> int:
    config = _config(args)
    data, spec, cv = _load(args)
    plan = SubsamplePlan(tuple(args.fractions), CRITICAL_GROUP, args.seed, (), args.restore_all)
    result = kearns_small_group_study(data, plan, spec, cv, args.alpha_cap, config)

    summary = {"alpha_cap": args.alpha_cap, "seed": args.seed, "nested": True, "groups": {}}
    files = {}
    g_series, a_series = {}, {}
    for key, res in result.items():
        k = str(key)
        g_series[k], a_series[k] = res.group_points, res.all_points
        summary["groups"][k] = {
            "subsample_group": {
                "points": [rp.point_to_dict(p) for p in res.group_points],
                "trend": rp.trend_to_dict(res.group_trend),
            },
            "subsample_all": {
                "points": [rp.point_to_dict(p) for p in res.all_points],
                "trend": rp.trend_to_dict(res.all_trend),
            },
        }
        if _wants(args, "csv", {"json", "csv", "svg"}):
            name = rp.safe_filename(k)
            files[f"kearns_group_{name}.csv"] = _csv_text(rp.SERIES_COLUMNS, rp.series_rows(res.group_points))
            files[f"kearns_all_{name}.csv"] = _csv_text(rp.SERIES_COLUMNS, rp.series_rows(res.all_points))
    if _wants(args, "json", {"json", "csv", "svg"}):
        files["kearns_summary.json"] = _json_text(summary)
    if _wants(args, "svg", {"json", "csv", "svg"}):
        files["kearns_group.svg"] = series_svg(g_series, ("kearns",), "growing only the subgroup")
        files["kearns_all.svg"] = series_svg(a_series, ("kearns",), "growing the whole dataset")
    _flush(Path(args.out_dir), files)
    return 0


def cmd_grid(args) -> int:
    if args.m_steps < 2 or not args.n_values or min(args.n_values) < 1:
        raise InvalidRange("need --m-steps >= 2 and positive --n-values")
    modes = GRID_MODES if args.mode == "all" else (args.mode,)
    m_values = grid_axis(args.m_steps)
    files = {}
    for mode in modes:
        g = mn_grid(args.m_steps, args.n_values, args.z, mode)
        if _wants(args, "csv", {"csv", "svg"}):
            files[f"grid_{mode}.csv"] = _csv_text(["m", "n", "c"], rp.grid_rows(g, m_values, args.n_values))
        if _wants(args, "svg", {"csv", "svg"}):
            files[f"grid_{mode}.svg"] = heatmap_svg(g, m_values, args.n_values, title=f"c ({mode}), z={args.z:g}")
    _flush(Path(args.out_dir), files)
    return 0


def _parse_synth_group(text: str):
    try:
        key, size, p = text.rsplit(":", 2)
        return SubgroupKey.parse(key), int(size), float(p)
    except ValueError:
        raise ValidationError(f"bad --group {text!r}; expected KEY:SIZE:P") from None


def cmd_synth(args) -> int:
    spec = SynthSpec(tuple(_parse_synth_group(g) for g in args.group), args.seed)
    data = synth_generate(spec)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = data.schema.columns
    w.writerow(cols)
    table = dict(data.attributes)
    table["label"], table["prediction"] = data.labels, data.predictions
    for i in range(data.n):
        w.writerow([table[c][i] for c in cols])
    files = {"data.csv": buf.getvalue(), "schema.json": _json_text(data.schema.to_dict())}
    _flush(Path(args.out_dir), files)
    return 0


COMMANDS = {
    "audit": cmd_audit,
    "experiment": cmd_experiment,
    "kearns-study": cmd_kearns_study,
    "grid": cmd_grid,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command_name](args)
    except FairAuditError as exc:
        sys.stderr.write(json.dumps(exc.to_dict()) + "\n")
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to exit 3
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
