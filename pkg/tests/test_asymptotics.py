"""Closed-form approximators against frozen high-precision oracles."""

import math

import numpy as np
import pytest

from gwtails import asymptotics as asy
from gwtails import offspring as off
from gwtails.errors import BadParam, NoConvergence

# mpmath oracles at the pinned pareto(alpha=2) scale (see conftest)
SERIES_N5_X100 = 0.0002768470376495298
SERIES_INF_X100 = 0.0002859783420782477


class TestSeriesFinite:
    def test_frozen_value(self, pareto2):
        r = asy.series_tail(pareto2, 5, 100.0)
        assert r.value == pytest.approx(SERIES_N5_X100, rel=1e-12)
        assert r.method == "SeriesFinite"
        assert r.truncation_terms == 5

    def test_single_term_is_tail_mx(self, pareto2):
        r = asy.series_tail(pareto2, 1, 100.0)
        assert r.value == pareto2.tail(pareto2.mean_m * 100.0)

    def test_term_ratio_tends_to_m_pow_one_minus_alpha(self, pareto2):
        # successive summands scale like m^(1-alpha) = 1/2 for large x
        m = pareto2.mean_m
        x = 1e5
        terms = [m**i * pareto2.tail(m ** (i + 1) * x) for i in range(6)]
        ratios = [terms[i + 1] / terms[i] for i in range(5)]
        assert ratios[-1] == pytest.approx(0.5, abs=0.01)

    def test_monotone_in_n_and_x(self, pareto2):
        vals_n = [asy.series_tail(pareto2, n, 50.0).value for n in range(1, 8)]
        assert all(b >= a for a, b in zip(vals_n, vals_n[1:]))
        vals_x = [asy.series_tail(pareto2, 4, x).value for x in (10, 30, 90, 270)]
        assert all(b <= a for a, b in zip(vals_x, vals_x[1:]))

    def test_preconditions(self, pareto2):
        with pytest.raises(BadParam):
            asy.series_tail(pareto2, 0, 10.0)
        with pytest.raises(BadParam):
            asy.series_tail(pareto2, 3, 0.0)


class TestSeriesInfinite:
    def test_rigorous_matches_frozen(self, pareto2):
        r = asy.series_tail_infinite(pareto2, 100.0, 1e-9, mat_params=(0.5, 8.0))
        assert r.value == pytest.approx(SERIES_INF_X100, rel=1e-9)
        assert r.truncation_bound < 1e-9 * r.value
        assert "Matuszewska" in r.note

    def test_heuristic_matches_and_is_flagged(self, pareto2):
        r = asy.series_tail_infinite(pareto2, 100.0, 1e-9)
        assert r.value == pytest.approx(SERIES_INF_X100, rel=1e-8)
        assert math.isinf(r.truncation_bound)
        assert "heuristic" in r.note

    def test_weibull_series_collapses_to_first_term(self, weibull03):
        # rapidly varying: the sum is dominated by tail(mx), with the
        # second term's share vanishing as x grows
        excess = []
        for x in (300.0, 3000.0):
            r = asy.series_tail_infinite(weibull03, x)
            first = weibull03.tail(weibull03.mean_m * x)
            assert r.value >= first
            excess.append(r.value / first - 1.0)
        assert excess[0] < 0.2
        assert excess[1] < 0.01

    def test_rel_tol_consistency(self, pareto2):
        a = asy.series_tail_infinite(pareto2, 50.0, 1e-6, mat_params=(0.5, 8.0))
        b = asy.series_tail_infinite(pareto2, 50.0, 1e-10, mat_params=(0.5, 8.0))
        assert abs(a.value / b.value - 1.0) < 1e-5

    def test_dominates_every_finite_series(self, pareto2):
        inf_val = asy.series_tail_infinite(pareto2, 50.0, 1e-10, mat_params=(0.5, 8.0))
        for n in (1, 3, 10, 30):
            fin = asy.series_tail(pareto2, n, 50.0)
            assert inf_val.value >= fin.value
        # difference is the series tail, within the truncation bound
        fin30 = asy.series_tail(pareto2, 30, 50.0)
        assert inf_val.value - fin30.value == pytest.approx(
            sum(
                pareto2.mean_m**i * pareto2.tail(pareto2.mean_m ** (i + 1) * 50.0)
                for i in range(30, 60)
            ),
            rel=1e-6,
        )

    def test_no_convergence_budget(self, pareto2):
        with pytest.raises(NoConvergence):
            asy.series_tail_infinite(pareto2, 100.0, 1e-9, max_terms=3)


class TestWeibullApproximations:
    def test_principal_is_tail_mx(self, weibull03):
        r = asy.weibull_tail(weibull03, 100.0)
        assert r.value == weibull03.tail(weibull03.mean_m * 100.0)
        assert r.value == asy.series_tail(weibull03, 1, 100.0).value

    def test_principal_at_zero(self, weibull03):
        assert asy.weibull_tail(weibull03, 0.0).value == 1.0 - weibull03.pmf(0)

    def test_sandwich_brackets_principal(self, weibull03):
        m = weibull03.mean_m
        for x in (50.0, 200.0):
            v = asy.weibull_tail(weibull03, x).value
            assert weibull03.tail((m + 0.2) * x) <= v <= weibull03.tail((m - 0.2) * x)

    def test_corrected_reduces_at_zero_variance(self):
        x, m, beta = 1000.0, 2.0, 0.7
        r = asy.weibull_corrected_lower(beta, m, 0.0, x)
        assert r.value == pytest.approx(math.exp(-((m * x) ** beta)), rel=1e-15)

    def test_corrected_exceeds_principal(self):
        x, m, beta = 1000.0, 2.0, 0.7
        sigma_sq = asy.var_wn(1.0, m, math.inf)
        r = asy.weibull_corrected_lower(beta, m, sigma_sq, x)
        assert r.value > math.exp(-((m * x) ** beta))

    def test_corrected_rejects_low_beta(self):
        with pytest.raises(BadParam):
            asy.weibull_corrected_lower(0.5, 2.0, 1.0, 10.0)
        with pytest.raises(BadParam):
            asy.weibull_corrected_lower(0.3, 2.0, 1.0, 10.0)
        with pytest.raises(BadParam):
            asy.weibull_corrected_lower(1.0, 2.0, 1.0, 10.0)


class TestIndexOneIntegral:
    def test_infinite_matches_closed_form(self, logcorr):
        # smooth tail c u^-1 log^-(p+1) u integrates to (c/p) log^-p
        p, c, m = 2.0, 1.0, logcorr.mean_m
        for x in (1e3, 1e4):
            r = asy.index_one_tail(logcorr, math.inf, x)
            closed = c / (p * m * math.log(m)) * x**-1 * math.log(x) ** -p
            assert r.value == pytest.approx(closed, rel=1e-9)
            assert r.method == "IndexOneIntegralInfinite"

    def test_small_n_is_n_times_tail(self, logcorr):
        # n / log x -> 0 regime: the integral collapses to n tail(mx)
        x = 1e4
        r = asy.index_one_tail(logcorr, 2, x)
        assert r.value == pytest.approx(2.0 * logcorr.tail(logcorr.mean_m * x), rel=0.05)

    def test_large_finite_n_close_to_infinite(self, logcorr):
        x = 1e4
        n = int(20 * math.log(x))
        fin = asy.index_one_tail(logcorr, n, x)
        inf = asy.index_one_tail(logcorr, math.inf, x)
        assert abs(fin.value / inf.value - 1.0) < 0.01
        assert inf.value >= fin.value

    def test_monotone_approach_in_n(self, logcorr):
        x = 1e3
        vals = [asy.index_one_tail(logcorr, n, x).value for n in (5, 20, 80, 320)]
        inf = asy.index_one_tail(logcorr, math.inf, x).value
        gaps = [inf - v for v in vals]
        assert all(g >= 0 for g in gaps)
        assert all(b <= a for a, b in zip(gaps, gaps[1:]))

    def test_quadrature_error_is_small(self, logcorr):
        r = asy.index_one_tail(logcorr, math.inf, 1e4)
        assert r.quadrature_error < 1e-4 * r.value + 1e-12


class TestVarWn:
    def test_trivia(self):
        assert asy.var_wn(1.0, 2.0, 0) == 0.0
        assert asy.var_wn(1.0, 2.0, math.inf) == 0.5
        assert asy.var_wn(0.75, 1.5, math.inf) == pytest.approx(1.0)

    def test_monotone_in_n(self):
        vals = [asy.var_wn(1.0, 2.0, n) for n in range(10)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))

    def test_preconditions(self):
        with pytest.raises(BadParam):
            asy.var_wn(1.0, 1.0, 3)
        with pytest.raises(BadParam):
            asy.var_wn(-1.0, 2.0, 3)


class TestProductiveGeneration:
    def test_point_mass_for_single_generation(self):
        w = asy.productive_generation_law(2.0, 2.0, 1)
        assert w.tolist() == [1.0]

    def test_geometric_limit(self):
        w = asy.productive_generation_law(2.0, 2.0, math.inf, k_max=6)
        want = 0.5 ** (np.arange(7) + 1)
        assert np.allclose(w, want, rtol=1e-14)

    def test_normalisation_and_log_linearity(self):
        for alpha, m, n in ((2.0, 2.0, 6), (3.5, 1.5, 9), (1.7, 4.0, 4)):
            w = asy.productive_generation_law(alpha, m, n)
            assert abs(w.sum() - 1.0) <= 1e-12
            diffs = np.diff(np.log(w))
            assert np.allclose(diffs, -(alpha - 1.0) * math.log(m), atol=1e-12)

    def test_infinite_needs_k_max(self):
        with pytest.raises(BadParam):
            asy.productive_generation_law(2.0, 2.0, math.inf)


class TestExample1Regime:
    def test_classification_cuts(self):
        reg, _ = asy.example1_regime(2.0, 2.0, 1000, 1e4)
        assert reg == "super_log"
        reg, _ = asy.example1_regime(2.0, 2.0, 9, 1e4)
        assert reg == "proportional_log"
        reg, _ = asy.example1_regime(2.0, 2.0, 2, 1e4, cut_lo=0.25)
        assert reg == "sub_log"

    def test_super_log_matches_infinite_integral(self, logcorr):
        # n >> log x: the regime value equals the n = inf integral
        x = 1e4
        _, appr = asy.example1_regime(2.0, logcorr.mean_m, 1000, x)
        inf = asy.index_one_tail(logcorr, math.inf, x)
        assert appr.value == pytest.approx(inf.value, rel=0.02)

    def test_middle_formula_t_limits(self):
        p, m, x = 2.0, 2.0, 1e4
        lead = x**-1 * math.log(x) ** -p / (p * m * math.log(m))
        # t -> infinity recovers the super-log value
        big_t = lead * (1.0 - (1.0 + 1000.0 * math.log(m)) ** -p)
        assert big_t == pytest.approx(lead, rel=1e-4)
        # t -> 0 first-order expansion: lead * p * t * log m
        for t in (1e-3, 1e-4):
            mid = lead * (1.0 - (1.0 + t * math.log(m)) ** -p)
            first_order = lead * p * t * math.log(m)
            assert mid == pytest.approx(first_order, rel=5e-3 * math.sqrt(t / 1e-4))

    def test_ordering_at_fixed_x(self):
        x = 1e4
        _, sup = asy.example1_regime(2.0, 2.0, 1000, x)
        _, mid = asy.example1_regime(2.0, 2.0, 9, x)
        _, sub = asy.example1_regime(2.0, 2.0, 2, x, cut_lo=0.25)
        assert sup.value > mid.value > sub.value


class TestLemma32Lower:
    def test_below_series_for_all_a(self, pareto3):
        s = asy.series_tail(pareto3, 3, 100.0).value
        for a in (1.0, 3.0, 10.0, 100.0):
            v = asy.lemma32_lower(pareto3, 3, 100.0, a).value
            assert v <= s

    def test_vacuous_boundary_flagged(self, pareto3):
        m = pareto3.mean_m
        a_crit = math.sqrt(pareto3.variance / (m**2 - m))
        r = asy.lemma32_lower(pareto3, 3, 100.0, 0.9 * a_crit)
        assert r.value == 0.0
        assert "vacuous" in r.note

    def test_infinite_variance_vacuous(self, pareto2):
        r = asy.lemma32_lower(pareto2, 3, 100.0, 10.0)
        assert r.value == 0.0
        assert "infinite" in r.note

    def test_positive_value_example(self, pareto3):
        r = asy.lemma32_lower(pareto3, 3, 100.0, 10.0)
        assert 0.0 < r.value < asy.series_tail(pareto3, 3, 100.0).value

    def test_approaches_series_at_scale(self, weibull03):
        # sqrt-x-insensitive law: with A = x^(1/4) the gap closes as x grows
        gaps = []
        for x in (1e3, 1e5):
            a = x**0.25
            v = asy.lemma32_lower(weibull03, 4, x, a).value
            s = asy.series_tail(weibull03, 4, x).value
            gaps.append(1.0 - v / s)
        assert 0 <= gaps[1] < gaps[0]


class TestRegimeMachinery:
    def test_classification_of_all_families(
        self, pareto2, pareto35, weibull03, weibull07, logcorr, lognormal, finite_2atom
    ):
        want = {
            pareto2: "IRV_series",
            pareto35: "IRV_series",
            weibull03: "Weibull_principal",
            weibull07: "Weibull_corrected_needed",
            logcorr: "IndexOne_integral",
            lognormal: "Weibull_principal",
            finite_2atom: "Unclassified",
        }
        for law, regime in want.items():
            tag = asy.classify_regime(law)
            assert tag.regime == regime, law.family
            if tag.regime != "Unclassified":
                assert tag.justification
                assert all(r.verdict == "consistent" for r in tag.justification)

    def test_guard_warns_off_regime(self, weibull03):
        with pytest.warns(UserWarning, match="outside the regime"):
            asy.series_tail(weibull03, 3, 50.0, regime_guard=True)

    def test_guard_quiet_on_regime(self, pareto2):
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("error")
            asy.series_tail(pareto2, 3, 50.0, regime_guard=True)

    def test_negative_value_rejected(self):
        with pytest.raises(ValueError):
            asy.TailApproximation(value=-1.0, method="SeriesFinite")
