"""Estimators: naive MC, exact convolution, big-jump decomposition."""

import math

import numpy as np
import pytest

from gwtails import asymptotics as asy
from gwtails import estimators as est
from gwtails import offspring as off
from gwtails.errors import BadParam, TooLarge
from gwtails.rng import RngStreams


class TestNaiveMC:
    def test_almost_sure_growth_at_x_zero(self, weibull03):
        # pmf(0) = 0: the process never dies, so W_n > 0 always
        r = est.naive_mc(weibull03, 3, 0.0, 1000, RngStreams(1))
        assert r.estimate == 1.0

    def test_hand_enumerated_two_step(self, finite_2atom):
        # P{Z_2 > 2} = 27/64, threshold phrased in W units
        x = 2.5 / finite_2atom.mean_m**2
        r = est.naive_mc(finite_2atom, 2, x, 10**5, RngStreams(2))
        want = 27.0 / 64.0
        assert abs(r.estimate - want) <= 4 * r.std_error

    def test_zero_hits_rule_of_three(self, finite_2atom):
        r = est.naive_mc(finite_2atom, 2, 1e9, 1000, RngStreams(3))
        assert r.estimate == 0.0
        assert r.ci_high == pytest.approx(3.0 / 1000)
        assert r.ci_low == 0.0

    def test_replica_floor(self, finite_2atom):
        with pytest.raises(BadParam):
            est.naive_mc(finite_2atom, 2, 0.5, 99, RngStreams(0))

    def test_deterministic(self, finite_2atom):
        a = est.naive_mc(finite_2atom, 3, 0.7, 10**4, RngStreams(7))
        b = est.naive_mc(finite_2atom, 3, 0.7, 10**4, RngStreams(7))
        assert a == b

    def test_workers_do_not_change_result(self, finite_2atom):
        serial = est.naive_mc(finite_2atom, 3, 0.7, 40000, RngStreams(8), workers=1)
        parallel = est.naive_mc(finite_2atom, 3, 0.7, 40000, RngStreams(8), workers=2)
        assert serial == parallel

    def test_overflow_counted_as_exceedance(self):
        doubler = off.make_finite_support({2: 1.0})
        r = est.naive_mc(doubler, 70, 1.5, 200, RngStreams(9))
        assert r.overflowed == 200
        assert r.estimate == 1.0
        assert "overflowed" in r.note

    def test_unbiased_against_exact(self, finite_2atom):
        # grand mean over independent runs within 4 SE-of-the-mean of exact
        exact = est.exact_convolution(finite_2atom, 4, 6).estimate
        x = 6.5 / finite_2atom.mean_m**4
        runs = 30
        reps = 10**4
        means = [
            est.naive_mc(finite_2atom, 4, x, reps, RngStreams(100 + i)).estimate
            for i in range(runs)
        ]
        grand = float(np.mean(means))
        se = math.sqrt(exact * (1 - exact) / (runs * reps))
        assert abs(grand - exact) <= 4 * se


class TestExactConvolution:
    def test_hand_enumeration(self, finite_2atom):
        assert est.exact_convolution(finite_2atom, 2, 2).estimate == pytest.approx(
            27.0 / 64.0, abs=1e-14
        )

    def test_single_step_is_tail(self, finite_2atom):
        for t in (0, 1, 2):
            assert est.exact_convolution(finite_2atom, 1, t).estimate == pytest.approx(
                finite_2atom.tail(t), abs=1e-15
            )

    def test_root_generation(self, finite_2atom):
        assert est.exact_convolution(finite_2atom, 0, 0).estimate == 1.0
        assert est.exact_convolution(finite_2atom, 0, 1).estimate == 0.0

    def test_zero_std_error(self, finite_2atom):
        r = est.exact_convolution(finite_2atom, 3, 4)
        assert r.std_error == 0.0
        assert r.ci_low == r.estimate == r.ci_high

    def test_too_large_guard(self):
        wide = off.make_finite_support({0: 0.3, 8: 0.7})
        with pytest.raises(TooLarge):
            est.exact_convolution(wide, 10, 100)

    def test_needs_finite_support(self, pareto2):
        with pytest.raises(BadParam):
            est.exact_convolution(pareto2, 2, 5)

    def test_matches_independent_recursion(self, finite_2atom):
        # independent oracle: survival-style recursion on the pgf
        # P{Z_n <= t} computed by explicit enumeration over Z_1
        p0, p2 = 0.25, 0.75
        # P{Z_3 > 4}: condition on Z_1: 0 -> impossible; 2 -> two indep subtrees
        # of depth 2 summing > 4.  Enumerate Z_2' per subtree in {0, 2, 4}.
        sub = {0: p0, 2: 2 * p0 * p2 * p0 + 0, 4: 0}  # placeholder, replaced below
        # distribution of one depth-2 subtree size (root has one individual)
        d2 = {0: p0 + p2 * p0**2, 2: p2 * 2 * p0 * p2, 4: p2 * p2**2}
        assert abs(sum(d2.values()) - 1.0) < 1e-15
        # depth-3 from one root: root children 0 or 2, each child a depth-2 tree
        p_z3 = {}
        for a, pa in d2.items():
            for b, pb in d2.items():
                p_z3[a + b] = p_z3.get(a + b, 0.0) + p2 * pa * pb
        p_z3[0] = p_z3.get(0, 0.0) + p0
        want = sum(p for k, p in p_z3.items() if k > 4)
        got = est.exact_convolution(finite_2atom, 3, 4).estimate
        assert got == pytest.approx(want, abs=1e-14)


class TestBigJump:
    def test_n1_eps0_is_exactly_tail(self, pareto2):
        r = est.big_jump_estimator(pareto2, 1, 50.0, 0.0, 500, RngStreams(4))
        assert r.estimate == pareto2.tail(pareto2.mean_m * 50.0)
        assert r.std_error == 0.0

    def test_n1_with_eps(self, pareto2):
        r = est.big_jump_estimator(pareto2, 1, 50.0, 0.5, 500, RngStreams(4))
        assert r.estimate == pareto2.tail(pareto2.mean_m * 1.5 * 50.0)

    def test_breakdown_properties(self, pareto2):
        r = est.big_jump_estimator(pareto2, 4, 60.0, 0.0, 4000, RngStreams(5))
        bk = r.per_generation_breakdown
        assert len(bk) == 4
        assert all(b >= 0.0 for b in bk)
        assert sum(bk) <= 1.0
        assert sum(bk) == pytest.approx(r.estimate)

    def test_deterministic(self, pareto2):
        a = est.big_jump_estimator(pareto2, 3, 80.0, 0.0, 2000, RngStreams(6))
        b = est.big_jump_estimator(pareto2, 3, 80.0, 0.0, 2000, RngStreams(6))
        assert a == b

    def test_lower_bound_character_vs_naive(self, pareto2):
        # jump decomposition targets a sub-event union: it cannot sit
        # above the naive estimate by more than noise
        bj = est.big_jump_estimator(pareto2, 3, 100.0, 0.0, 2 * 10**4, RngStreams(7))
        nv = est.naive_mc(pareto2, 3, 100.0, 4 * 10**5, RngStreams(8))
        combined = math.hypot(bj.std_error, nv.std_error)
        assert bj.estimate <= nv.estimate + 3 * combined

    def test_breakdown_matches_productive_generation_weights(self, pareto2):
        r = est.big_jump_estimator(pareto2, 6, 1000.0, 0.0, 10**4, RngStreams(9))
        bk = np.array(r.per_generation_breakdown)
        emp = bk / bk.sum()
        want = asy.productive_generation_law(2.0, 2.0, 6)
        assert 0.5 * np.abs(emp - want).sum() <= 0.1

    def test_agreement_with_naive_at_moderate_depth(self, pareto2):
        # 1e-4-quantile scale: the two estimators agree within 3 joint SE
        # plus the decomposition's one-sided bias allowance
        x = 200.0
        bj = est.big_jump_estimator(pareto2, 3, x, 0.0, 4 * 10**4, RngStreams(10))
        nv = est.naive_mc(pareto2, 3, x, 10**6, RngStreams(11))
        combined = math.hypot(bj.std_error, nv.std_error)
        assert nv.estimate - bj.estimate <= 0.2 * nv.estimate + 3 * combined
        assert bj.estimate <= nv.estimate + 3 * combined

    def test_replica_floor(self, pareto2):
        with pytest.raises(BadParam):
            est.big_jump_estimator(pareto2, 2, 10.0, 0.0, 50, RngStreams(0))


class TestCompare:
    def test_single_row_table(self, finite_2atom):
        # m^2 x = 2.7: the exact estimator computes P{Z_2 > 2} = 27/64
        rows = est.compare_to_asymptotics(
            finite_2atom, [2], [1.2], "series", "exact", 0, RngStreams(1)
        )
        assert len(rows) == 1
        row = rows[0]
        assert row.n == 2 and row.x == 1.2
        assert row.estimate == pytest.approx(27.0 / 64.0)
        assert row.ratio == row.estimate / row.approximation

    def test_grid_table_with_naive(self, pareto2):
        rows = est.compare_to_asymptotics(
            pareto2, [2, 3], [20.0, 40.0], "series", "naive", 10**4, RngStreams(2)
        )
        assert len(rows) == 4
        for row in rows:
            assert 0.0 <= row.estimate <= 1.0
            assert row.approximation > 0.0

    def test_bad_tags(self, pareto2):
        with pytest.raises(BadParam):
            est.compare_to_asymptotics(pareto2, [2], [10.0], "nope", "naive", 100, RngStreams(0))
        with pytest.raises(BadParam):
            est.compare_to_asymptotics(pareto2, [2], [10.0], "series", "nope", 100, RngStreams(0))
