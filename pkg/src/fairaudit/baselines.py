"""Earlier fairness metrics, kept for comparison with the CI bounds.

* typical disparity: ``|m(G) - m(all)|``, aggregated by the max;
* Kearns-style weighting: ``alpha(G) * |m(G) - m(all)|`` with
  ``alpha(G) = n_G / n``;
* ratio epsilon: smallest ``eps`` with ``exp(-eps) <= m(G)/m(G') <= exp(eps)``
  for every pair of groups.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

from .ci_metrics import GroupStats
from .errors import UndefinedRatio, ValidationError
from .subgroups import SubgroupKey


@dataclass(frozen=True)
class BaselineResult:
    per_group: dict
    aggregate: float
    epsilon_threshold: float | None = None

    def passes(self, epsilon: float | None = None) -> bool:
        eps = self.epsilon_threshold if epsilon is None else epsilon
        if eps is None:
            raise ValueError("no epsilon to audit against")
        return self.aggregate < eps


@dataclass(frozen=True)
class KearnsAudit:
    fair: bool
    violating: tuple = ()
    values: dict = field(default_factory=dict)


def _m(x) -> float:
    return x.m if isinstance(x, GroupStats) else float(x)


def typical_disparity(
    per_group_stats: Mapping[SubgroupKey, GroupStats],
    overall: GroupStats,
    epsilon: float | None = None,
) -> BaselineResult:
    if not per_group_stats:
        raise ValidationError("need at least one group")
    ref = _m(overall)
    values = {k: abs(_m(s) - ref) for k, s in per_group_stats.items()}
    return BaselineResult(values, max(values.values()), epsilon)


def kearns_value(stats: GroupStats, overall: GroupStats, alpha_g: float) -> float:
    if not 0.0 < alpha_g <= 1.0:
        raise ValidationError(f"alpha(G) must lie in (0, 1], got {alpha_g}")
    return alpha_g * abs(_m(stats) - _m(overall))


def kearns_audit(
    per_group_stats: Mapping[SubgroupKey, GroupStats],
    overall: GroupStats,
    alphas: Mapping[SubgroupKey, float],
    epsilon: float,
) -> KearnsAudit:
    """Fair iff every group's weighted disparity is strictly below ``epsilon``."""
    if not epsilon > 0:
        raise ValidationError("epsilon must be positive")
    values = {k: kearns_value(s, overall, alphas[k]) for k, s in per_group_stats.items()}
    bad = tuple(sorted((k for k, v in values.items() if not v < epsilon), key=str))
    return KearnsAudit(not bad, bad, values)


def kearns_result(
    per_group_stats: Mapping[SubgroupKey, GroupStats],
    overall: GroupStats,
    alphas: Mapping[SubgroupKey, float],
    epsilon: float | None = None,
) -> BaselineResult:
    values = {k: kearns_value(s, overall, alphas[k]) for k, s in per_group_stats.items()}
    return BaselineResult(values, max(values.values()), epsilon)


def ratio_epsilon(
    per_group_stats: Mapping[SubgroupKey, GroupStats], epsilon: float | None = None
) -> BaselineResult:
    """Minimal feasible ratio epsilon, ``max ln m - min ln m``.

    ``per_group`` holds each group's worst log-ratio against any other group.
    """
    if len(per_group_stats) < 2:
        raise ValidationError("ratio metric needs at least two groups")
    logs = {}
    for k, s in sorted(per_group_stats.items(), key=lambda kv: str(kv[0])):
        m = _m(s)
        if m <= 0.0:
            raise UndefinedRatio(f"metric is zero for group {k}", key=str(k))
        logs[k] = math.log(m)
    hi, lo = max(logs.values()), min(logs.values())
    per_group = {k: max(hi - v, v - lo) for k, v in logs.items()}
    return BaselineResult(per_group, hi - lo, epsilon)
