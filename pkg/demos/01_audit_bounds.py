"""
Auditing a model with confidence-interval fairness metrics
==========================================================

A model is judged by its worst-served intersectional subgroup. Small
subgroups carry wide intervals, so the optimist's bound (c1) and the
pessimist's bound (c2) read the same data in opposite directions.
"""

import numpy as np

from fairaudit import AttributeSpec, AuditConfig, Dataset, DatasetSchema, audit

rng = np.random.default_rng(0)

# Two protected attributes; the (b, y) cell is tiny.
sizes = {("a", "x"): 800, ("a", "y"): 600, ("b", "x"): 400, ("b", "y"): 12}
accuracy = {("a", "x"): 0.85, ("a", "y"): 0.80, ("b", "x"): 0.78, ("b", "y"): 0.80}

race, sex, labels, preds = [], [], [], []
for cell, n in sizes.items():
    race += [cell[0]] * n
    sex += [cell[1]] * n
    y = rng.integers(0, 2, n)
    hit = rng.random(n) < accuracy[cell]
    labels += y.astype(str).tolist()
    preds += np.where(hit, y, 1 - y).astype(str).tolist()

schema = DatasetSchema(
    protected=(AttributeSpec("race", categories=("a", "b")), AttributeSpec("sex", categories=("x", "y"))),
    label_column="label",
    prediction_column="pred",
)
data = Dataset(schema, {"race": race, "sex": sex}, labels, preds)

# %%
# Every observed combination of attribute values becomes a subgroup
# (single attributes and the full intersection).
report = audit(data)
print(f"{'subgroup':<18}{'n':>6}{'m':>8}{'lower':>9}{'upper':>9}")
for key, r in sorted(report.per_group.items(), key=lambda kv: str(kv[0])):
    print(f"{str(key):<18}{r.stats.n:>6}{r.stats.m:>8.3f}{r.bounds.lower:>9.3f}{r.bounds.upper:>9.3f}")

# %%
# c1 is the smallest upper bound: the model cannot be declared unfair at
# any threshold below it. c2 is the smallest lower bound: the model is
# certified fair only at thresholds below it.
print()
print(f"min m(G) = {report.min_m:.3f}  at {report.critical_min_acc}")
print(f"c1       = {report.c1:.3f}  at {report.critical_c1}")
print(f"c2       = {report.c2:.3f}  at {report.critical_c2}")

# %%
# The tiny group does not drive c1 (its interval is wide, so its upper
# bound is high) but it does drive c2. An auditor who must prove fairness
# needs more data on that group; one who must prove unfairness does not.

# %%
# Testing many subgroups at once inflates false alarms. A Bonferroni
# correction splits alpha over every subgroup and widens each interval.
strict = audit(data, AuditConfig(bonferroni=True, alpha=0.05))
print(f"\nwith Bonferroni over {len(report.per_group)} groups: z = {strict.z:.3f}, c2 = {strict.c2:.3f}")
