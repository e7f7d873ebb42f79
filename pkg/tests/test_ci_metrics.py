import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairaudit.ci_metrics import (
    AuditConfig,
    GroupStats,
    OptimistDecision,
    PerformanceMetric,
    PessimistDecision,
    aggregate_audit,
    audit,
    bonferroni_z,
    ci_bounds,
    ensemble_group_metric,
    group_metric,
    mn_grid,
    norm_ppf,
    optimist_bound,
    optimist_test,
    pessimist_bound,
    pessimist_test,
    std_error,
)
from fairaudit.errors import InvalidAlpha, InvalidRange, NoMeasurableGroups, NoPredictions, UndefinedRate
from fairaudit.subgroups import SubgroupKey, enumerate_subgroups

from conftest import key, make_dataset
from oracles import normal_quantile_bisect, wald

Z = 1.64


def G(name):
    return SubgroupKey((("g", name),))


class TestGroupMetric:
    def test_accuracy(self):
        s = group_metric(["1", "0", "0"], ["1", "1", "0"])
        assert (s.m, s.n) == (pytest.approx(2 / 3, abs=1e-15), 3)

    def test_all_correct(self):
        assert group_metric(["1", "0"], ["1", "0"]).m == 1.0

    def test_tpr_counts_positives_only(self):
        s = group_metric(["1", "1", "0"], ["1", "0", "0"], PerformanceMetric("tpr", "1"))
        assert (s.m, s.n) == (0.5, 2)

    def test_tnr(self):
        s = group_metric(["1", "0", "0"], ["1", "1", "0"], PerformanceMetric("tnr", "1"))
        assert (s.m, s.n) == (0.5, 2)

    def test_undefined_rate(self):
        with pytest.raises(UndefinedRate):
            group_metric(["0", "0"], ["0", "1"], PerformanceMetric("tpr", "1"))

    def test_no_predictions(self):
        with pytest.raises(NoPredictions):
            group_metric(["1"], None)


class TestEnsemble:
    def test_mean_of_models(self):
        labels = ["1", "1", "1"]
        preds = [["1", "1", "1"], ["1", "1", "0"], ["1", "0", "0"]]
        s = ensemble_group_metric(preds, labels)
        assert s.n == 3
        assert s.m == pytest.approx((1 + 2 / 3 + 1 / 3) / 3, abs=1e-15)

    def test_single_model_identity(self):
        labels, p = ["1", "0", "1", "1"], ["1", "1", "1", "0"]
        assert ensemble_group_metric([p], labels) == group_metric(labels, p)

    def test_singleton_two_of_three_models(self):
        s = ensemble_group_metric([["1"], ["1"], ["0"]], ["1"])
        assert (s.m, s.n) == (pytest.approx(2 / 3), 1)
        assert pessimist_bound(s, Z) == pytest.approx(-0.1064367474, abs=1e-9)


class TestBounds:
    def test_std_error_closed_forms(self):
        assert std_error(GroupStats(0.5, 100)) == pytest.approx(0.05, abs=1e-15)
        assert std_error(GroupStats(1.0, 7)) == 0.0

    def test_std_error_bank_row(self):
        se = std_error(GroupStats(0.7766790276, 809))
        assert se == pytest.approx(math.sqrt(0.7766790276 * (1 - 0.7766790276) / 809), abs=1e-15)
        assert se == pytest.approx(0.0146423, abs=1e-7)

    @pytest.mark.parametrize(
        "m, n, fn, expected",
        [
            (0.7766790276, 809, optimist_bound, 0.8006925092),
            (0.8020050125, 4256, optimist_bound, 0.8120224970),
            (0.7766790276, 809, pessimist_bound, 0.7526655460),
            (2 / 3, 2, pessimist_bound, 0.12),
            (2 / 3, 1, pessimist_bound, -0.1064367474),
        ],
    )
    def test_table_rows(self, m, n, fn, expected):
        assert fn(GroupStats(m, n), Z) == pytest.approx(expected, abs=1e-9)

    def test_degenerate_proportion(self):
        for m in (0.0, 1.0):
            b = ci_bounds(GroupStats(m, 3), Z)
            assert b.lower == b.upper == m

    @settings(max_examples=300, deadline=None)
    @given(st.floats(0, 1), st.integers(1, 10_000), st.floats(0.1, 4))
    def test_matches_oracle_and_symmetric(self, m, n, z):
        b = ci_bounds(GroupStats(m, n), z)
        lo, up = wald(m, n, z)
        assert b.lower == pytest.approx(lo, abs=1e-12)
        assert b.upper == pytest.approx(up, abs=1e-12)
        assert abs((b.upper - m) - (m - b.lower)) <= 1e-12
        assert b.lower <= m <= b.upper

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0.01, 0.99), st.integers(1, 2_000))
    def test_quadrupling_n_halves_width(self, m, n):
        w1 = optimist_bound(GroupStats(m, n), Z) - pessimist_bound(GroupStats(m, n), Z)
        w4 = optimist_bound(GroupStats(m, 4 * n), Z) - pessimist_bound(GroupStats(m, 4 * n), Z)
        assert w4 == pytest.approx(w1 / 2, abs=1e-9)

    def test_monotone_in_m_on_restricted_region(self):
        ms = np.arange(0.2, 0.8 + 1e-12, 1e-3)
        for n in (5, 6, 10, 50, 1000):
            lo = [pessimist_bound(GroupStats(float(m), n), Z) for m in ms]
            up = [optimist_bound(GroupStats(float(m), n), Z) for m in ms]
            assert np.all(np.diff(lo) > 0) and np.all(np.diff(up) > 0)

    def test_not_monotone_everywhere(self):
        # small n, small m: the lower bound falls as m rises
        assert pessimist_bound(GroupStats(0.05, 1), Z) < pessimist_bound(GroupStats(0.0, 1), Z)


class TestHypothesisTests:
    def test_reject_at_population_1000(self):
        assert optimist_test(GroupStats(0.67, 1000), 0.7, Z) is OptimistDecision.REJECT_FAIR
        assert optimist_bound(GroupStats(0.67, 1000), Z) == pytest.approx(0.6944, abs=1e-4)

    def test_m_equal_c(self):
        assert optimist_test(GroupStats(0.70, 1000), 0.7, Z) is OptimistDecision.CANNOT_REJECT
        assert pessimist_test(GroupStats(0.70, 1000), 0.7, Z) is PessimistDecision.CANNOT_CERTIFY

    def test_small_group_not_rejected(self):
        assert optimist_bound(GroupStats(0.69, 50), Z) == pytest.approx(0.7972, abs=1e-4)
        assert optimist_test(GroupStats(0.69, 50), 0.7, Z) is OptimistDecision.CANNOT_REJECT

    def test_certify(self):
        assert pessimist_bound(GroupStats(0.78, 809), Z) == pytest.approx(0.7561, abs=1e-4)
        assert pessimist_test(GroupStats(0.78, 809), 0.75, Z) is PessimistDecision.CERTIFY

    def test_singleton_cannot_certify_zero(self):
        assert pessimist_test(GroupStats(2 / 3, 1), 0.0, Z) is PessimistDecision.CANNOT_CERTIFY

    def test_boundary_is_strict(self):
        s = GroupStats(0.8, 25)
        assert optimist_test(s, optimist_bound(s, Z), Z) is OptimistDecision.CANNOT_REJECT
        assert pessimist_test(s, pessimist_bound(s, Z), Z) is PessimistDecision.CANNOT_CERTIFY

    @settings(max_examples=500, deadline=None)
    @given(st.floats(0, 1), st.integers(1, 5000), st.floats(0, 1), st.floats(0.01, 5))
    def test_never_reject_and_certify_together(self, m, n, c, z):
        s = GroupStats(m, n)
        assert not (
            optimist_test(s, c, z) is OptimistDecision.REJECT_FAIR
            and pessimist_test(s, c, z) is PessimistDecision.CERTIFY
        )


class TestAggregate:
    def test_two_groups(self):
        rep = aggregate_audit(None, {G("1"): GroupStats(0.9, 100), G("2"): GroupStats(0.8, 25)})
        assert rep.c1 == pytest.approx(0.9312, abs=1e-12)
        assert rep.c2 == pytest.approx(0.6688, abs=1e-12)
        assert rep.critical_min_acc == rep.critical_c1 == rep.critical_c2 == G("2")

    def test_single_group(self):
        s = GroupStats(0.7, 40)
        rep = aggregate_audit(None, {G("only"): s})
        assert (rep.c1, rep.c2) == (optimist_bound(s, Z), pessimist_bound(s, Z))

    def test_critical_groups_can_differ(self):
        # large, low-accuracy group vs tiny group: the small one drives c2
        stats = {G("big"): GroupStats(0.80, 4256), G("small"): GroupStats(0.9, 10)}
        rep = aggregate_audit(None, stats)
        assert rep.critical_min_acc == rep.critical_c1 == G("big")
        assert rep.critical_c2 == G("small")

    def test_ties_broken_by_key(self):
        s = GroupStats(0.5, 10)
        rep = aggregate_audit(None, {G("b"): s, G("a"): s})
        assert rep.critical_min_acc == rep.critical_c1 == rep.critical_c2 == G("a")

    def test_no_groups(self):
        with pytest.raises(NoMeasurableGroups):
            aggregate_audit(None, {})

    def test_bonferroni_changes_z(self):
        stats = {G(str(i)): GroupStats(0.8, 50) for i in range(10)}
        rep = aggregate_audit(None, stats, AuditConfig(bonferroni=True))
        assert rep.z == pytest.approx(normal_quantile_bisect(1 - 0.005), abs=1e-9)
        assert rep.c2 == pytest.approx(wald(0.8, 50, rep.z)[0], abs=1e-12)

    def test_threshold_duality_scan(self):
        rng = np.random.default_rng(5)
        stats = {G(str(i)): GroupStats(float(rng.uniform(0.3, 1.0)), int(rng.integers(1, 300))) for i in range(8)}
        rep = aggregate_audit(None, stats)
        cs = np.arange(-0.5, 1.5, 1e-4)
        ok1 = [all(optimist_test(s, c) is OptimistDecision.CANNOT_REJECT for s in stats.values()) for c in cs]
        ok2 = [all(pessimist_test(s, c) is PessimistDecision.CERTIFY for s in stats.values()) for c in cs]
        assert abs(cs[np.flatnonzero(ok1).max()] - rep.c1) <= 1e-4
        assert abs(cs[np.flatnonzero(ok2).max()] - rep.c2) <= 1e-4

    def test_audit_on_dataset(self, toy):
        rep = audit(toy)
        s = rep.stats(key(race="a", sex="x"))
        assert (s.m, s.n) == (0.5, 2)
        assert rep.overall.m == pytest.approx(4 / 6)

    def test_audit_skips_undefined_rate(self, toy):
        rep = audit(toy, AuditConfig(metric=PerformanceMetric("tpr", "1")))
        assert not rep.skipped
        rows = [("a", "x", "0", "0"), ("a", "y", "1", "1"), ("a", "y", "1", "0")]
        rep = audit(make_dataset(rows), AuditConfig(metric=PerformanceMetric("tpr", "1")))
        assert key(race="a", sex="x") in rep.skipped
        assert key(race="a", sex="y") in rep.per_group


class TestInverseNormal:
    @pytest.mark.parametrize("p", [1e-10, 1e-4, 0.01, 0.02425, 0.1, 0.5, 0.9, 0.95, 0.995, 0.999999])
    def test_against_bisection(self, p):
        assert norm_ppf(p) == pytest.approx(normal_quantile_bisect(p), abs=1.15e-9)

    def test_unrefined_rational_is_already_close(self):
        for p in np.linspace(0.001, 0.999, 101):
            x = norm_ppf(float(p), refine=False)
            assert abs(x - normal_quantile_bisect(float(p))) <= 1.15e-9 * max(1.0, abs(x))

    def test_bonferroni_values(self):
        assert bonferroni_z(0.05, 1) == pytest.approx(1.6449, abs=1e-3)
        assert bonferroni_z(0.05, 10) == pytest.approx(2.5758, abs=1e-3)

    def test_increasing_in_k(self):
        zs = [bonferroni_z(0.05, k) for k in range(1, 200)]
        assert all(b > a for a, b in zip(zs, zs[1:]))

    @pytest.mark.parametrize("alpha, k", [(0.0, 1), (1.0, 1), (-0.1, 2), (0.05, 0)])
    def test_invalid(self, alpha, k):
        with pytest.raises(InvalidAlpha):
            bonferroni_z(alpha, k)


class TestGrid:
    def test_modes(self):
        n_vals = [1, 4, 10]
        lo = mn_grid(11, n_vals, Z, "lower")
        cap = mn_grid(11, n_vals, Z, "upper_capped")
        raw = mn_grid(11, n_vals, Z, "upper_raw")
        assert lo.shape == (11, 3)
        assert np.all(lo[-1] == 1.0)
        assert cap[9, 1] == 1.0
        assert raw[9, 1] == pytest.approx(0.9 + 1.64 * 0.15, abs=1e-12)
        assert raw[9, 1] == pytest.approx(1.146, abs=1e-12)
        assert np.all(cap <= 1.0) and np.all(raw >= cap - 1e-15)

    def test_invalid(self):
        with pytest.raises(InvalidRange):
            mn_grid(1, [1])
        with pytest.raises(InvalidRange):
            mn_grid(5, [])
