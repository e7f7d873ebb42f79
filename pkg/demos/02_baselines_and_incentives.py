"""
Why not just compare group accuracies?
======================================

Three familiar disparity measures next to c2, on a population where a
small group is served badly.
"""

from fairaudit import GroupStats, SubgroupKey, kearns_audit, kearns_value, ratio_epsilon, typical_disparity

small, large = SubgroupKey.parse("g=small"), SubgroupKey.parse("g=large")

# %%
# Disparity against the overall rate treats a 10-person group exactly
# like a 10,000-person group.
stats = {small: GroupStats(0.15, 10), large: GroupStats(0.86, 990)}
overall = GroupStats((0.15 * 10 + 0.86 * 990) / 1000, 1000)
print("typical disparity:", round(typical_disparity(stats, overall).aggregate, 4))

# %%
# The weighted version multiplies the gap by the group's share of the
# data. A group holding 1% of the records cannot breach a 0.01 tolerance,
# however badly it is treated.
alphas = {small: 0.01, large: 0.99}
for k in stats:
    print(f"weighted disparity {k}: {kearns_value(stats[k], overall, alphas[k]):.4f}")
print("fair at eps=0.01:", kearns_audit(stats, overall, alphas, 0.01).fair)

# %%
# The ratio measure compares logs of the rates. A group at zero makes it
# undefined.
print("ratio epsilon:", round(ratio_epsilon(stats).aggregate, 4))

# %%
# Incentives: collecting more data on the small group raises its share
# and so raises the weighted disparity. The data collector is punished
# for looking. The pessimist's bound moves the other way: more data
# narrows the interval and lifts c2 towards the true rate.
from fairaudit import optimist_bound, pessimist_bound  # noqa: E402

for n in (10, 40, 160, 640):
    s = GroupStats(0.8, n)
    print(f"n={n:>4}  lower={pessimist_bound(s):.3f}  upper={optimist_bound(s):.3f}")
