"""Subsampling experiments.

Each experiment keeps a growing share of the data (10%, 20%, ... by
default), re-derives predictions (retraining with a learner, or reusing
frozen predictions), and records one tracked group's ``m``, ``c1``, ``c2``
and Kearns value per share. Shares are nested: the records kept at a
smaller fraction are always a subset of those kept at a larger one.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats as sstats

from .baselines import kearns_value
from .ci_metrics import AuditConfig, AuditReport, audit
from .dataset import CATEGORICAL, AttributeSpec, Dataset, DatasetSchema
from .errors import (
    NoPredictions,
    NoSmallSubgroups,
    TooFewPoints,
    UnknownSubgroup,
    ValidationError,
)
from .learner import CVConfig, PredictorSpec, derive_seed, ensure_label_coverage, fit_cv, thread_count
from .subgroups import SubgroupIndex, SubgroupKey, enumerate_subgroups

CRITICAL_GROUP = "critical-group"
WHOLE_DATASET = "whole-dataset"
DEFAULT_FRACTIONS = tuple(i / 10 for i in range(1, 11))

INCENTIVE_COMPATIBLE = "incentive-compatible"
DISINCENTIVE = "disincentive"
INCONCLUSIVE = "inconclusive"
RHO_THRESHOLD = 0.3

FIELDS = ("m", "c1", "c2", "kearns")


@dataclass(frozen=True)
class SubsamplePlan:
    fractions: tuple = DEFAULT_FRACTIONS
    target: str = CRITICAL_GROUP
    seed: int = 0
    tracked_groups: tuple = ()
    restore_all: bool = False

    def __post_init__(self):
        fr = tuple(float(f) for f in self.fractions)
        if not fr:
            raise ValidationError("need at least one fraction")
        if any(not 0.0 < f <= 1.0 for f in fr):
            raise ValidationError("fractions must lie in (0, 1]")
        if any(b <= a for a, b in zip(fr, fr[1:])):
            raise ValidationError("fractions must be strictly increasing")
        if self.target not in (CRITICAL_GROUP, WHOLE_DATASET):
            raise ValidationError(f"unknown target {self.target!r}")
        object.__setattr__(self, "fractions", fr)
        object.__setattr__(self, "tracked_groups", tuple(self.tracked_groups))


@dataclass(frozen=True)
class SeriesPoint:
    fraction: float
    group: SubgroupKey
    n_present: int
    m: float | None = None
    c1: float | None = None
    c2: float | None = None
    kearns: float | None = None


@dataclass(frozen=True)
class TrendReport:
    spearman_rho: float
    ls_slope: float
    n_points: int
    verdict: str
    field: str = "c2"


@dataclass(frozen=True)
class SynthSpec:
    groups: tuple  # of (SubgroupKey, size, true_correct_probability)
    seed: int = 0

    def __post_init__(self):
        groups = tuple((k if isinstance(k, SubgroupKey) else SubgroupKey.parse(k), int(s), float(p)) for k, s, p in self.groups)
        if not groups:
            raise ValidationError("need at least one group")
        attrs = groups[0][0].attributes
        for key, size, p in groups:
            if key.attributes != attrs:
                raise ValidationError("every synthetic group must use the same attributes in the same order")
            if size < 1:
                raise ValidationError("group sizes must be >= 1")
            if not 0.0 <= p <= 1.0:
                raise ValidationError("probabilities must lie in [0, 1]")
        object.__setattr__(self, "groups", groups)


@dataclass
class KearnsStudyResult:
    group_points: list
    group_trend: TrendReport | None
    all_points: list
    all_trend: TrendReport | None


def subsample_count(fraction: float, n: int) -> int:
    """``ceil(fraction * n)``, robust to float noise such as 0.3 * 10."""
    return min(n, math.ceil(round(fraction * n, 9)))


def _predictions(data: Dataset, spec: PredictorSpec | None, cv: CVConfig | None):
    if spec is None:
        if data.predictions is None:
            raise NoPredictions("frozen-prediction mode needs a prediction column")
        return data.predictions
    return fit_cv(data, spec, cv or CVConfig()).predictions


def evaluate(
    data: Dataset,
    spec: PredictorSpec | None = None,
    cv: CVConfig | None = None,
    config: AuditConfig | None = None,
) -> tuple[AuditReport, SubgroupIndex]:
    """Plain audit of ``data``: predict (or reuse frozen predictions) and aggregate."""
    index = enumerate_subgroups(data)
    report = audit(data, config, _predictions(data, spec, cv), index=index)
    return report, index


def series_point(report: AuditReport, index: SubgroupIndex, key: SubgroupKey, fraction: float) -> SeriesPoint:
    if key not in index:
        return SeriesPoint(fraction, key, 0)
    n_present = len(index.indices(key))
    if key not in report.per_group:
        return SeriesPoint(fraction, key, n_present)
    res = report.per_group[key]
    kearns = None
    if report.overall is not None:
        kearns = kearns_value(res.stats, report.overall, n_present / index.universe_n)
    return SeriesPoint(fraction, key, n_present, res.stats.m, res.bounds.upper, res.bounds.lower, kearns)


def _run_points(jobs, work):
    threads = thread_count()
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
            return list(pool.map(work, jobs))
    return [work(j) for j in jobs]


def _run_fractions(dataset, subsets, tracked, plan, spec, cv, config):
    def work(job):
        fraction, kept, removed = job
        if spec is not None:
            kept = ensure_label_coverage(kept, dataset, removed, plan.restore_all)
        report, index = evaluate(dataset.subset(kept), spec, cv, config)
        return [series_point(report, index, key, fraction) for key in tracked]

    points = []
    for batch in _run_points(subsets, work):
        points.extend(batch)
    return points


def subsample_indices(dataset: Dataset, plan: SubsamplePlan, critical: SubgroupKey | None = None) -> list:
    """``(fraction, kept, removed)`` per fraction, before any label-coverage fix.

    With ``critical`` given only that group is thinned and every other record
    is kept; otherwise the whole dataset is. ``kept`` is sorted, and the
    kept sets are nested across fractions.
    """
    if critical is None:
        rng = np.random.default_rng(derive_seed(plan.seed, "subsample", WHOLE_DATASET))
        order = rng.permutation(dataset.n)
        others = np.empty(0, dtype=np.intp)
    else:
        index = enumerate_subgroups(dataset)
        if critical not in index:
            raise UnknownSubgroup(f"no records in subgroup {critical}", key=str(critical))
        members = index.indices(critical)
        others = np.setdiff1d(np.arange(dataset.n), members)
        # permute positions within the group so the draw ignores the rest of the data
        rng = np.random.default_rng(derive_seed(plan.seed, "subsample", CRITICAL_GROUP, str(critical)))
        order = members[rng.permutation(len(members))]
    out = []
    for f in plan.fractions:
        k = subsample_count(f, len(order))
        out.append((f, np.union1d(others, order[:k]), order[k:]))
    return out


def run_subsample_group(
    dataset: Dataset,
    critical: SubgroupKey,
    plan: SubsamplePlan | None = None,
    spec: PredictorSpec | None = None,
    cv: CVConfig | None = None,
    config: AuditConfig | None = None,
) -> list[SeriesPoint]:
    """Grow only ``critical``: keep all other records plus a nested share of it.

    ``spec=None`` selects frozen-prediction mode. Points for ``critical``
    come first for each fraction, followed by any extra tracked groups.
    """
    plan = plan or SubsamplePlan(target=CRITICAL_GROUP)
    subsets = subsample_indices(dataset, plan, critical)
    tracked = [critical] + [k for k in plan.tracked_groups if k != critical]
    return _run_fractions(dataset, subsets, tracked, plan, spec, cv, config)


def run_subsample_all(
    dataset: Dataset,
    tracked: Sequence[SubgroupKey],
    plan: SubsamplePlan | None = None,
    spec: PredictorSpec | None = None,
    cv: CVConfig | None = None,
    config: AuditConfig | None = None,
) -> list[SeriesPoint]:
    """Grow the whole dataset; tracked groups may be absent at small shares."""
    plan = plan or SubsamplePlan(target=WHOLE_DATASET)
    tracked = list(tracked) or list(plan.tracked_groups)
    if not tracked:
        raise ValidationError("no groups to track")
    subsets = subsample_indices(dataset, plan)
    return _run_fractions(dataset, subsets, tracked, plan, spec, cv, config)


def trend(series: Sequence[SeriesPoint], field: str = "c2", group: SubgroupKey | None = None) -> TrendReport:
    """Rank correlation and least-squares slope of ``field`` against fraction.

    Absent points are ignored. For ``m``, ``c1`` and ``c2`` an upward trend
    (rho >= 0.3) means more data helps, i.e. the metric is incentive
    compatible. The Kearns value measures unfairness, so for it the
    reading is reversed.
    """
    if field not in FIELDS:
        raise ValidationError(f"field must be one of {FIELDS}")
    pts = [p for p in series if group is None or p.group == group]
    if group is None and len({p.group for p in pts}) > 1:
        raise ValidationError("series mixes several groups; pass group=")
    pts = [p for p in pts if getattr(p, field) is not None]
    if len(pts) < 3:
        raise TooFewPoints(f"need >= 3 present points, got {len(pts)}")
    x = np.array([p.fraction for p in pts], dtype=float)
    y = np.array([getattr(p, field) for p in pts], dtype=float)
    if np.ptp(y) == 0.0:
        rho = 0.0
    else:
        rho = float(sstats.spearmanr(x, y).statistic)
    slope = float(np.polyfit(x, y, 1)[0])
    signed = -rho if field == "kearns" else rho
    if signed >= RHO_THRESHOLD:
        verdict = INCENTIVE_COMPATIBLE
    elif signed <= -RHO_THRESHOLD:
        verdict = DISINCENTIVE
    else:
        verdict = INCONCLUSIVE
    return TrendReport(rho, slope, len(pts), verdict, field)


def kearns_small_group_study(
    dataset: Dataset,
    plan: SubsamplePlan | None = None,
    spec: PredictorSpec | None = None,
    cv: CVConfig | None = None,
    alpha_cap: float = 0.10,
    config: AuditConfig | None = None,
) -> dict:
    """Weighted-disparity series for every group holding at most ``alpha_cap`` of the data.

    Returns ``{key: KearnsStudyResult}`` with one series from growing only
    the group and one from growing the whole dataset.
    """
    plan = plan or SubsamplePlan()
    index = enumerate_subgroups(dataset)
    small = [k for k, idx in index.groups.items() if len(idx) / index.universe_n <= alpha_cap]
    if not small:
        raise NoSmallSubgroups(f"no subgroup holds at most {alpha_cap:.0%} of the records")
    out = {}
    for key in small:
        g_plan = SubsamplePlan(plan.fractions, CRITICAL_GROUP, plan.seed, (), plan.restore_all)
        a_plan = SubsamplePlan(plan.fractions, WHOLE_DATASET, plan.seed, (key,), plan.restore_all)
        g_pts = run_subsample_group(dataset, key, g_plan, spec, cv, config)
        a_pts = run_subsample_all(dataset, [key], a_plan, spec, cv, config)
        out[key] = KearnsStudyResult(g_pts, _maybe_trend(g_pts), a_pts, _maybe_trend(a_pts))
    return out


def _maybe_trend(points):
    try:
        return trend(points, "kearns")
    except TooFewPoints:
        return None


def synth_generate(spec: SynthSpec) -> Dataset:
    """Records with frozen predictions whose correctness is Bernoulli(p) per group.

    Every label is ``"1"``; a prediction is ``"1"`` on success and ``"0"``
    otherwise, so accuracy equals the success share.
    """
    attrs = spec.groups[0][0].attributes
    cats = {a: [] for a in attrs}
    for key, _, _ in spec.groups:
        for a, v in key.assignment:
            if v not in cats[a]:
                cats[a].append(v)
    schema = DatasetSchema(
        protected=tuple(AttributeSpec(a, CATEGORICAL, tuple(cats[a])) for a in attrs),
        label_column="label",
        prediction_column="prediction",
    )
    rng = np.random.default_rng(derive_seed(spec.seed, "synth"))
    columns = {a: [] for a in attrs}
    preds = []
    for key, size, p in spec.groups:
        for a, v in key.assignment:
            columns[a].extend([v] * size)
        hits = rng.random(size) < p
        preds.extend(np.where(hits, "1", "0").tolist())
    return Dataset(schema, columns, ["1"] * len(preds), preds)
