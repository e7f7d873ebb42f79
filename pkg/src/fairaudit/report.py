"""JSON and CSV emission for audits and experiments.

JSON keeps full float precision so a report can be re-read exactly. CSV
cells are produced by :func:`fmt` (10 significant digits); applying
:func:`fmt` to a JSON value always gives the matching CSV cell.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Mapping, Sequence

from . import baselines as bl
from .ci_metrics import (
    AuditConfig,
    AuditReport,
    CIBounds,
    GroupResult,
    GroupStats,
    PerformanceMetric,
)
from .errors import UndefinedRatio, ValidationError
from .experiments import SeriesPoint, TrendReport
from .subgroups import SubgroupIndex, SubgroupKey

SIG_DIGITS = 10


def fmt(x) -> str:
    if x is None:
        return ""
    return f"{float(x):.{SIG_DIGITS}g}"


def _clamp(x: float) -> float:
    return min(max(x, 0.0), 1.0)


def display_group(key: SubgroupKey) -> str:
    vals = key.values
    return vals[0] if len(vals) == 1 else "(" + ", ".join(vals) + ")"


def display_category(key: SubgroupKey) -> str:
    attrs = key.attributes
    return attrs[0] if len(attrs) == 1 else "[" + ", ".join(attrs) + "]"


def config_to_dict(config: AuditConfig) -> dict:
    return {
        "z": config.z,
        "alpha": config.alpha,
        "bonferroni": config.bonferroni,
        "clamp_bounds": config.clamp_bounds,
        "metric": config.metric.kind,
        "positive_class": config.metric.positive_class,
    }


def config_from_dict(d: Mapping) -> AuditConfig:
    metric = PerformanceMetric(d.get("metric", "accuracy"), d.get("positive_class"))
    return AuditConfig(
        z=float(d.get("z", 1.64)),
        alpha=float(d.get("alpha", 0.05)),
        bonferroni=bool(d.get("bonferroni", False)),
        clamp_bounds=bool(d.get("clamp_bounds", False)),
        metric=metric,
    )


def baselines_section(report: AuditReport, index: SubgroupIndex) -> dict:
    stats = {k: r.stats for k, r in report.per_group.items()}
    out: dict = {}
    if report.overall is None:
        return out
    typ = bl.typical_disparity(stats, report.overall)
    out["typical_disparity"] = {
        "aggregate": typ.aggregate,
        "per_group": {str(k): v for k, v in typ.per_group.items()},
    }
    alphas = {k: len(index.indices(k)) / index.universe_n for k in stats}
    kr = bl.kearns_result(stats, report.overall, alphas)
    out["kearns"] = {
        "aggregate": kr.aggregate,
        "per_group": {str(k): v for k, v in kr.per_group.items()},
        "alpha": {str(k): a for k, a in alphas.items()},
    }
    try:
        rr = bl.ratio_epsilon(stats)
        out["ratio_epsilon"] = {
            "aggregate": rr.aggregate,
            "per_group": {str(k): v for k, v in rr.per_group.items()},
        }
    except UndefinedRatio as exc:
        out["ratio_epsilon"] = {"error": exc.code, "key": exc.key}
    except ValidationError as exc:
        out["ratio_epsilon"] = {"error": exc.code, "message": str(exc)}
    return out


def report_to_dict(report: AuditReport, baselines: dict | None = None) -> dict:
    clamp = report.config.clamp_bounds
    groups = []
    for key in sorted(report.per_group, key=str):
        r = report.per_group[key]
        entry = {
            "key": str(key),
            "values": list(key.values),
            "n": r.stats.n,
            "m": r.stats.m,
            "lower": _clamp(r.bounds.lower) if clamp else r.bounds.lower,
            "upper": _clamp(r.bounds.upper) if clamp else r.bounds.upper,
        }
        if clamp:
            entry["lower_raw"] = r.bounds.lower
            entry["upper_raw"] = r.bounds.upper
        groups.append(entry)
    doc = {
        "c1": _clamp(report.c1) if clamp else report.c1,
        "c2": _clamp(report.c2) if clamp else report.c2,
        "min_m": report.min_m,
        "critical": {
            "min_m": str(report.critical_min_acc),
            "c1": str(report.critical_c1),
            "c2": str(report.critical_c2),
        },
        "z": report.z,
        "config": config_to_dict(report.config),
        "overall": None
        if report.overall is None
        else {"m": report.overall.m, "n": report.overall.n},
        "per_group": groups,
        "skipped": {str(k): why for k, why in sorted(report.skipped.items(), key=lambda kv: str(kv[0]))},
    }
    if clamp:
        doc["c1_raw"] = report.c1
        doc["c2_raw"] = report.c2
    if baselines is not None:
        doc["baselines"] = baselines
    return doc


def report_from_dict(doc: Mapping) -> AuditReport:
    """Rebuild an :class:`AuditReport`; c1/c2 are recomputed from the groups."""
    from .ci_metrics import _argmin

    config = config_from_dict(doc.get("config", {}))
    z = float(doc["z"])
    per_group = {}
    for g in doc["per_group"]:
        key = SubgroupKey.parse(g["key"])
        lower = g.get("lower_raw", g["lower"])
        upper = g.get("upper_raw", g["upper"])
        per_group[key] = GroupResult(GroupStats(g["m"], g["n"]), CIBounds(lower, upper, z))
    ms = {k: r.stats.m for k, r in per_group.items()}
    ups = {k: r.bounds.upper for k, r in per_group.items()}
    los = {k: r.bounds.lower for k, r in per_group.items()}
    g_m, g_1, g_2 = _argmin(ms), _argmin(ups), _argmin(los)
    overall = doc.get("overall")
    return AuditReport(
        per_group=per_group,
        c1=ups[g_1],
        c2=los[g_2],
        min_m=ms[g_m],
        critical_min_acc=g_m,
        critical_c1=g_1,
        critical_c2=g_2,
        z=z,
        config=config,
        skipped={SubgroupKey.parse(k): v for k, v in doc.get("skipped", {}).items()},
        overall=None if overall is None else GroupStats(overall["m"], overall["n"]),
    )


def write_json(doc, path: str | Path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n", encoding="utf-8")


def load_report(path: str | Path) -> AuditReport:
    return report_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def tables_rows(report: AuditReport) -> list[list[str]]:
    """Rows shaped like the per-dataset critical-subgroup tables."""
    clamp = report.config.clamp_bounds
    out = []
    for stat, key, value in (
        ("min_m", report.critical_min_acc, report.min_m),
        ("c1", report.critical_c1, _clamp(report.c1) if clamp else report.c1),
        ("c2", report.critical_c2, _clamp(report.c2) if clamp else report.c2),
    ):
        out.append([stat, display_group(key), display_category(key), str(report.stats(key).n), fmt(value)])
    return out


def write_tables_csv(report: AuditReport, path: str | Path) -> None:
    _write_rows(path, ["statistic", "subgroup", "category", "n", "value"], tables_rows(report))


def bounds_rows(report: AuditReport) -> list[list[str]]:
    clamp = report.config.clamp_bounds
    rows = []
    for key in sorted(report.per_group, key=str):
        r = report.per_group[key]
        lo, up = r.bounds.lower, r.bounds.upper
        if clamp:
            lo, up = _clamp(lo), _clamp(up)
        rows.append([str(key), str(r.stats.n), fmt(r.stats.m), fmt(lo), fmt(up)])
    return rows


def write_bounds_csv(report: AuditReport, path: str | Path) -> None:
    _write_rows(path, ["subgroup", "n", "m", "lower", "upper"], bounds_rows(report))


SERIES_COLUMNS = ["fraction", "n_present", "m", "c1", "c2", "kearns"]


def series_rows(points: Sequence[SeriesPoint]) -> list[list[str]]:
    return [
        [fmt(p.fraction), str(p.n_present), fmt(p.m), fmt(p.c1), fmt(p.c2), fmt(p.kearns)]
        for p in points
    ]


def write_series_csv(points: Sequence[SeriesPoint], path: str | Path) -> None:
    _write_rows(path, SERIES_COLUMNS, series_rows(points))


def read_series_csv(path: str | Path, group: SubgroupKey | None = None) -> list[SeriesPoint]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    key = group or SubgroupKey((("group", Path(path).stem),))

    def opt(v):
        return None if v == "" else float(v)

    return [
        SeriesPoint(float(r["fraction"]), key, int(r["n_present"]), opt(r["m"]), opt(r["c1"]), opt(r["c2"]), opt(r["kearns"]))
        for r in rows
    ]


def point_to_dict(p: SeriesPoint) -> dict:
    return {
        "fraction": p.fraction,
        "group": str(p.group),
        "n_present": p.n_present,
        "m": p.m,
        "c1": p.c1,
        "c2": p.c2,
        "kearns": p.kearns,
    }


def trend_to_dict(t: TrendReport | None) -> dict | None:
    if t is None:
        return None
    return {
        "field": t.field,
        "spearman_rho": t.spearman_rho,
        "ls_slope": t.ls_slope,
        "n_points": t.n_points,
        "verdict": t.verdict,
    }


def grid_rows(grid, m_values, n_values) -> list[list[str]]:
    rows = []
    for i, m in enumerate(m_values):
        for j, n in enumerate(n_values):
            rows.append([fmt(m), str(int(n)), fmt(grid[i][j])])
    return rows


def write_grid_csv(grid, m_values, n_values, path: str | Path) -> None:
    _write_rows(path, ["m", "n", "c"], grid_rows(grid, m_values, n_values))


def safe_filename(key: SubgroupKey | str) -> str:
    text = str(key)
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in text)
