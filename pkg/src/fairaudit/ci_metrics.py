"""Confidence-interval sufficiency metrics.

For a group with metric proportion ``m`` over ``n`` records the standard
error is ``sqrt(m (1 - m) / n)``. The optimist's bound ``m + z*SE`` is the
largest threshold ``c`` the group cannot be shown to fall short of; the
pessimist's bound ``m - z*SE`` is the largest threshold the group is
certified to exceed. Aggregating by the minimum over groups gives the
dataset-level ``c1`` (optimist) and ``c2`` (pessimist).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dataset import Dataset
from .errors import (
    InvalidAlpha,
    InvalidRange,
    NoMeasurableGroups,
    NoPredictions,
    UndefinedRate,
    ValidationError,
)
from .subgroups import SubgroupIndex, SubgroupKey, enumerate_subgroups

ACCURACY = "accuracy"
TPR = "true-positive-rate"
TNR = "true-negative-rate"
_ALIASES = {"acc": ACCURACY, "tpr": TPR, "tnr": TNR}

DEFAULT_Z = 1.64


@dataclass(frozen=True)
class PerformanceMetric:
    kind: str = ACCURACY
    positive_class: str | None = None

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        if kind not in (ACCURACY, TPR, TNR):
            raise ValidationError(f"unknown metric {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind != ACCURACY:
            if self.positive_class is None:
                raise ValidationError(f"{kind} needs a positive_class")
            object.__setattr__(self, "positive_class", str(self.positive_class))


@dataclass(frozen=True)
class GroupStats:
    m: float
    n: int

    def __post_init__(self):
        if not 0.0 <= self.m <= 1.0:
            raise ValueError(f"m must lie in [0, 1], got {self.m}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")


@dataclass(frozen=True)
class CIBounds:
    lower: float
    upper: float
    z_used: float


@dataclass(frozen=True)
class AuditConfig:
    z: float = DEFAULT_Z
    alpha: float = 0.05
    bonferroni: bool = False
    clamp_bounds: bool = False
    metric: PerformanceMetric = field(default_factory=PerformanceMetric)

    def __post_init__(self):
        if not self.z > 0:
            raise ValidationError("z must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidAlpha(f"alpha must lie in (0, 1), got {self.alpha}")

    def z_for(self, k: int) -> float:
        """z used for every bound when ``k`` groups are tested at once."""
        return bonferroni_z(self.alpha, k) if self.bonferroni else self.z


class OptimistDecision(enum.Enum):
    REJECT_FAIR = "RejectFair"
    CANNOT_REJECT = "CannotReject"


class PessimistDecision(enum.Enum):
    CERTIFY = "CertifyAtLeastC"
    CANNOT_CERTIFY = "CannotCertify"


@dataclass(frozen=True)
class GroupResult:
    stats: GroupStats
    bounds: CIBounds


@dataclass
class AuditReport:
    per_group: dict  # SubgroupKey -> GroupResult
    c1: float
    c2: float
    min_m: float
    critical_min_acc: SubgroupKey
    critical_c1: SubgroupKey
    critical_c2: SubgroupKey
    z: float
    config: AuditConfig
    skipped: dict = field(default_factory=dict)  # SubgroupKey -> reason
    overall: GroupStats | None = None

    def bounds(self, key: SubgroupKey) -> CIBounds:
        return self.per_group[key].bounds

    def stats(self, key: SubgroupKey) -> GroupStats:
        return self.per_group[key].stats


# --- per-group metric --------------------------------------------------------


def group_metric(labels: Sequence, predictions: Sequence, metric: PerformanceMetric | None = None) -> GroupStats:
    """Proportion-valued metric over one subset of records.

    ``n`` is the number of records that enter the proportion: the whole
    subset for accuracy, only the positive (negative) records for TPR (TNR).
    """
    metric = metric or PerformanceMetric()
    if predictions is None:
        raise NoPredictions("no predictions supplied")
    labels = np.asarray(labels, dtype=str)
    predictions = np.asarray(predictions, dtype=str)
    if labels.shape != predictions.shape:
        raise NoPredictions("predictions and labels differ in length")
    if len(labels) == 0:
        raise ValueError("empty record subset")

    if metric.kind == ACCURACY:
        hits = labels == predictions
    else:
        pos = metric.positive_class
        mask = labels == pos if metric.kind == TPR else labels != pos
        if not mask.any():
            raise UndefinedRate(f"no records to condition {metric.kind} on")
        predicted_pos = predictions[mask] == pos
        hits = predicted_pos if metric.kind == TPR else ~predicted_pos
    return GroupStats(float(np.count_nonzero(hits)) / len(hits), int(len(hits)))


def ensemble_group_metric(
    model_predictions: Sequence[Sequence], labels: Sequence, metric: PerformanceMetric | None = None
) -> GroupStats:
    """Mean of each model's metric on the same subset; ``n`` is unchanged."""
    model_predictions = np.asarray(model_predictions, dtype=str)
    if model_predictions.ndim == 1:
        model_predictions = model_predictions[None, :]
    if len(model_predictions) == 0:
        raise NoPredictions("no models supplied")
    per_model = [group_metric(labels, p, metric) for p in model_predictions]
    m = math.fsum(s.m for s in per_model) / len(per_model)
    return GroupStats(min(max(m, 0.0), 1.0), per_model[0].n)


# --- bounds and tests ------------------------------------------------------------


def std_error(stats: GroupStats) -> float:
    return math.sqrt(stats.m * (1.0 - stats.m) / stats.n)


def optimist_bound(stats: GroupStats, z: float = DEFAULT_Z) -> float:
    """``m + z*SE``; not capped at 1."""
    return stats.m + z * std_error(stats)


def pessimist_bound(stats: GroupStats, z: float = DEFAULT_Z) -> float:
    """``m - z*SE``; may be negative."""
    return stats.m - z * std_error(stats)


def ci_bounds(stats: GroupStats, z: float = DEFAULT_Z) -> CIBounds:
    half = z * std_error(stats)
    return CIBounds(stats.m - half, stats.m + half, z)


def optimist_test(stats: GroupStats, c: float, z: float = DEFAULT_Z) -> OptimistDecision:
    if optimist_bound(stats, z) < c:
        return OptimistDecision.REJECT_FAIR
    return OptimistDecision.CANNOT_REJECT


def pessimist_test(stats: GroupStats, c: float, z: float = DEFAULT_Z) -> PessimistDecision:
    if pessimist_bound(stats, z) > c:
        return PessimistDecision.CERTIFY
    return PessimistDecision.CANNOT_CERTIFY


# --- aggregation ---------------------------------------------------------------


def _argmin(values: Mapping[SubgroupKey, float]) -> SubgroupKey:
    return min(values, key=lambda k: (values[k], str(k)))


def aggregate_audit(
    index: SubgroupIndex | None,
    per_group_stats: Mapping[SubgroupKey, GroupStats],
    config: AuditConfig | None = None,
    skipped: Mapping[SubgroupKey, str] | None = None,
    overall: GroupStats | None = None,
) -> AuditReport:
    """Combine per-group statistics into ``c1``, ``c2`` and critical subgroups.

    With Bonferroni enabled, ``alpha`` is split over every enumerated group
    in ``index`` (or over the measured groups when no index is given).
    Ties in the three argmins go to the smallest serialized key.
    """
    config = config or AuditConfig()
    if not per_group_stats:
        raise NoMeasurableGroups("no subgroup has a defined metric")
    k = len(index) if index is not None else len(per_group_stats)
    z = config.z_for(k)

    per_group = {key: GroupResult(s, ci_bounds(s, z)) for key, s in per_group_stats.items()}
    ms = {key: r.stats.m for key, r in per_group.items()}
    uppers = {key: r.bounds.upper for key, r in per_group.items()}
    lowers = {key: r.bounds.lower for key, r in per_group.items()}
    g_m, g_1, g_2 = _argmin(ms), _argmin(uppers), _argmin(lowers)
    return AuditReport(
        per_group=per_group,
        c1=uppers[g_1],
        c2=lowers[g_2],
        min_m=ms[g_m],
        critical_min_acc=g_m,
        critical_c1=g_1,
        critical_c2=g_2,
        z=z,
        config=config,
        skipped=dict(skipped or {}),
        overall=overall,
    )


def group_stats_table(
    dataset: Dataset,
    index: SubgroupIndex,
    metric: PerformanceMetric,
    predictions=None,
) -> tuple[dict, dict, GroupStats | None]:
    """Per-group stats, skipped groups with reasons, and the overall stats.

    ``predictions`` may be one prediction per record or a ``(models, n)``
    array; in the latter case each group's metric is the mean over models.
    """
    if predictions is None:
        predictions = dataset.predictions
    if predictions is None:
        raise NoPredictions("dataset has no prediction column and none were supplied")
    preds = np.asarray(predictions, dtype=str)
    if preds.ndim == 1:
        preds = preds[None, :]
    if preds.shape[1] != dataset.n:
        raise NoPredictions("need one prediction per record")

    stats, skipped = {}, {}
    for key, idx in index.groups.items():
        try:
            stats[key] = ensemble_group_metric(preds[:, idx], dataset.labels[idx], metric)
        except UndefinedRate as exc:
            skipped[key] = str(exc)
    try:
        overall = ensemble_group_metric(preds, dataset.labels, metric)
    except UndefinedRate:
        overall = None
    return stats, skipped, overall


def audit(
    dataset: Dataset,
    config: AuditConfig | None = None,
    predictions=None,
    index: SubgroupIndex | None = None,
) -> AuditReport:
    """Enumerate subgroups, measure each, and aggregate."""
    config = config or AuditConfig()
    index = index if index is not None else enumerate_subgroups(dataset)
    stats, skipped, overall = group_stats_table(dataset, index, config.metric, predictions)
    return aggregate_audit(index, stats, config, skipped=skipped, overall=overall)


# --- inverse normal ------------------------------------------------------------

# Acklam's rational approximation to the standard normal quantile.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _acklam(p: float) -> float:
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        )
    if p > 1.0 - _P_LOW:
        return -_acklam(1.0 - p)
    q = p - 0.5
    r = q * q
    return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
        ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
    )


def norm_ppf(p: float, refine: bool = True) -> float:
    """Standard normal quantile.

    The raw rational approximation has relative error below 1.15e-9; one
    Halley step against ``math.erfc`` brings it to double precision.
    """
    if not 0.0 < p < 1.0:
        raise InvalidAlpha(f"quantile probability must lie in (0, 1), got {p}")
    x = _acklam(p)
    if refine:
        e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
        u = e * math.sqrt(2.0 * math.pi) * math.exp(x * x / 2.0)
        x = x - u / (1.0 + x * u / 2.0)
    return x


def bonferroni_z(alpha: float, k: int = 1) -> float:
    """One-sided critical value at per-test level ``alpha / k``."""
    if not 0.0 < alpha < 1.0:
        raise InvalidAlpha(f"alpha must lie in (0, 1), got {alpha}")
    if int(k) < 1:
        raise InvalidAlpha(f"number of tests must be >= 1, got {k}")
    return norm_ppf(1.0 - alpha / int(k))


# --- (m, n) grid ---------------------------------------------------------------

GRID_MODES = ("lower", "upper_capped", "upper_raw")


def mn_grid(m_steps: int, n_values: Sequence[int], z: float = DEFAULT_Z, mode: str = "lower") -> np.ndarray:
    """Bound values over an evenly spaced ``m`` axis and the given sizes.

    Returns an array of shape ``(m_steps, len(n_values))`` where entry
    ``[i, j]`` is the bound at ``m = i / (m_steps - 1)`` and ``n_values[j]``.
    """
    if m_steps < 2:
        raise InvalidRange("m_steps must be >= 2")
    n = np.asarray(list(n_values), dtype=float)
    if n.size == 0 or np.any(n < 1):
        raise InvalidRange("n_values must be non-empty and >= 1")
    if mode not in GRID_MODES:
        raise InvalidRange(f"mode must be one of {GRID_MODES}")
    m = np.linspace(0.0, 1.0, m_steps)[:, None]
    half = z * np.sqrt(m * (1.0 - m) / n[None, :])
    if mode == "lower":
        return m - half
    upper = m + half
    if mode == "upper_capped":
        return np.minimum(upper, 1.0)
    return upper


def grid_axis(m_steps: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, m_steps)
