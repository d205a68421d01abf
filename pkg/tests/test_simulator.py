"""Trajectory simulation: exactness, event flags, forced jumps, overflow."""

import math

import numpy as np
import pytest

from gwtails import offspring as off
from gwtails import simulator as sim
from gwtails.errors import BadParam, PopulationOverflow
from gwtails.rng import RngStreams


class TestSimulate:
    def test_zero_generations(self, finite_2atom):
        rec = sim.simulate(finite_2atom, 0, RngStreams(1).stream(0))
        assert rec.sizes == [1]
        assert rec.w_values == [1.0]
        assert rec.gen_max_offspring == []
        assert rec.extinct_at is None

    def test_record_invariants(self, pareto2):
        for rep in range(50):
            rec = sim.simulate(pareto2, 8, RngStreams(2).stream(rep))
            assert rec.sizes[0] == 1
            m = pareto2.mean_m
            for k, (z, w) in enumerate(zip(rec.sizes, rec.w_values)):
                assert w == z / m**k  # recomputed, not accumulated
            for k in range(8):
                z, z1 = rec.sizes[k], rec.sizes[k + 1]
                gmax = rec.gen_max_offspring[k]
                if z > 0:
                    assert gmax <= z1 <= z * max(gmax, 1) or (z1 == 0 and gmax == 0)
            if rec.extinct_at is not None:
                assert all(s == 0 for s in rec.sizes[rec.extinct_at :])

    def test_one_step_law(self, finite_2atom):
        sizes, over = sim.simulate_batch(finite_2atom, 1, 10**6, RngStreams(3).stream(0))
        p2 = float(np.mean(sizes[:, 1] == 2))
        se = math.sqrt(0.75 * 0.25 / 10**6)
        assert abs(p2 - 0.75) <= 4 * se
        assert not over.any()

    def test_two_step_hand_enumeration(self, finite_2atom):
        # P{Z_2 > 2} = P{Z_1 = 2} P{both children have 2} = (3/4)^3 = 27/64
        sizes, _ = sim.simulate_batch(finite_2atom, 2, 10**6, RngStreams(4).stream(0))
        p = float(np.mean(sizes[:, 2] > 2))
        want = 27.0 / 64.0
        se = math.sqrt(want * (1 - want) / 10**6)
        assert abs(p - want) <= 4 * se

    def test_reproducibility_bit_for_bit(self, pareto2):
        r1 = sim.simulate(pareto2, 6, RngStreams(9).stream(5), stream_id="a")
        r2 = sim.simulate(pareto2, 6, RngStreams(9).stream(5), stream_id="a")
        assert r1 == r2
        s1, o1 = sim.simulate_batch(pareto2, 6, 4096, RngStreams(9).stream(6))
        s2, o2 = sim.simulate_batch(pareto2, 6, 4096, RngStreams(9).stream(6))
        assert np.array_equal(s1, s2) and np.array_equal(o1, o2)

    def test_batch_matches_martingale_mean(self, finite_2atom):
        sizes, _ = sim.simulate_batch(finite_2atom, 6, 10**5, RngStreams(5).stream(0))
        w = sizes[:, 6] / finite_2atom.mean_m**6
        se = w.std(ddof=1) / math.sqrt(len(w))
        assert abs(w.mean() - 1.0) <= 5 * se

    def test_population_overflow(self):
        doubler = off.make_finite_support({2: 1.0})
        with pytest.raises(PopulationOverflow):
            sim.simulate(doubler, 70, RngStreams(0).stream(0))

    def test_batch_overflow_flagged(self):
        doubler = off.make_finite_support({2: 1.0})
        sizes, over = sim.simulate_batch(doubler, 70, 4, RngStreams(0).stream(0))
        assert over.all()
        assert (sizes[:, -1] == sim.I64_MAX).all()

    def test_capped_marking(self, finite_2atom):
        rec = sim.simulate(finite_2atom, 10, RngStreams(11).stream(3), population_cap=2)
        if any(s > 2 for s in rec.sizes):
            first = next(i for i, s in enumerate(rec.sizes) if s > 2)
            assert rec.capped_at == first
        else:
            assert rec.capped_at is None

    def test_bad_cap(self, finite_2atom):
        with pytest.raises(BadParam):
            sim.simulate(finite_2atom, 1, RngStreams(0).stream(0), population_cap=2**63)


class TestEvents:
    def test_vacuous_threshold(self, pareto2):
        rec, flags = sim.simulate_with_events(
            pareto2, 6, 1e12, 0.0, RngStreams(6).stream(0)
        )
        assert all(flags.b_k_holds)
        assert not any(flags.a_k_fired)

    def test_x_zero_rejected(self, pareto2):
        with pytest.raises(BadParam):
            sim.simulate_with_events(pareto2, 4, 0.0, 0.0, RngStreams(0).stream(0))

    def test_b_flags_downward_closed(self, pareto2):
        for rep in range(200):
            _, flags = sim.simulate_with_events(
                pareto2, 6, 3.0, 0.0, RngStreams(7).stream(rep)
            )
            b = flags.b_k_holds
            assert all(b[i] or not b[i + 1] for i in range(len(b) - 1))
            # a_k requires b_k
            assert all(not a or bb for a, bb in zip(flags.a_k_fired, b))

    def test_flags_definition_matches_trajectory(self, pareto2):
        m = pareto2.mean_m
        x, eps = 5.0, 0.25
        for rep in range(100):
            rec, flags = sim.simulate_with_events(
                pareto2, 5, x, eps, RngStreams(8).stream(rep)
            )
            b = True
            for k in range(5):
                b = b and rec.sizes[k] <= m**k * x
                assert flags.b_k_holds[k] == b
                fired = b and rec.gen_max_offspring[k] > m ** (k + 1) * (1 + eps) * x
                assert flags.a_k_fired[k] == fired

    def test_monotone_coupling_in_x(self, pareto2):
        # common random numbers: raising x cannot ignite an unfired A_k.
        # The jump threshold rises with x while B_k only becomes easier, so
        # the statement is conditional on B_k holding at the smaller x.
        x1, x2 = 5.0, 10.0
        fired_somewhere = 0
        for rep in range(300):
            _, f1 = sim.simulate_with_events(pareto2, 5, x1, 0.0, RngStreams(10).stream(rep))
            _, f2 = sim.simulate_with_events(pareto2, 5, x2, 0.0, RngStreams(10).stream(rep))
            for k in range(5):
                assert f2.b_k_holds[k] or not f1.b_k_holds[k]  # B monotone in x
                if f1.b_k_holds[k] and not f1.a_k_fired[k]:
                    assert not f2.a_k_fired[k]
                fired_somewhere += f1.a_k_fired[k]
        assert fired_somewhere > 0  # the test exercised real events

    def test_threshold_factor_override(self, pareto2):
        # the (1 - eps) convention can be selected explicitly
        rec, f_plus = sim.simulate_with_events(
            pareto2, 4, 2.0, 0.5, RngStreams(12).stream(1)
        )
        _, f_minus = sim.simulate_with_events(
            pareto2, 4, 2.0, 0.5, RngStreams(12).stream(1), threshold_factor=0.5
        )
        assert f_minus.threshold_factor == 0.5
        assert f_plus.threshold_factor == 1.5
        for k in range(4):
            if f_plus.a_k_fired[k]:
                assert f_minus.a_k_fired[k]  # lower threshold fires at least as often


class TestForcedJump:
    def test_forced_draw_matches_conditional_tail(self, pareto2):
        # k=0: generation 1 is exactly the forced draw
        t = 50.0
        draws = np.empty(10**5, dtype=np.int64)
        for rep in range(len(draws)):
            rec = sim.simulate_forced_jump(pareto2, 1, 0, t, RngStreams(13).stream(rep))
            draws[rep] = rec.sizes[1]
        assert draws.min() > t
        for s in (25.0, 100.0):
            want = pareto2.tail(t + s) / pareto2.tail(t)
            emp = float(np.mean(draws > t + s))
            se = math.sqrt(want * (1 - want) / len(draws))
            assert abs(emp - want) <= 4 * se

    def test_threshold_zero_equals_plain_simulation_in_law(self, weibull03):
        # pmf(0) = 0 here, so conditioning on xi > 0 is the full support
        n = 10**4
        forced = np.empty(n, dtype=np.int64)
        plain = np.empty(n, dtype=np.int64)
        for rep in range(n):
            forced[rep] = sim.simulate_forced_jump(
                weibull03, 1, 0, 0.0, RngStreams(14).stream(rep)
            ).sizes[1]
            plain[rep] = sim.simulate(weibull03, 1, RngStreams(15).stream(rep)).sizes[1]
        for k in (1, 2, 3, 5):
            p_f = float(np.mean(forced == k))
            p_p = float(np.mean(plain == k))
            se = math.sqrt(2 * max(p_p, 1e-4) / n)
            assert abs(p_f - p_p) <= 4 * se, k

    def test_last_generation_boundary(self, pareto2):
        # forcing at k = n-1 leaves generations 0..n-1 exactly as unforced
        for rep in range(50):
            f = sim.simulate_forced_jump(pareto2, 4, 3, 100.0, RngStreams(16).stream(rep))
            u = sim.simulate(pareto2, 3, RngStreams(16).stream(rep))
            assert f.sizes[:4] == u.sizes

    def test_bad_k(self, pareto2):
        with pytest.raises(BadParam):
            sim.simulate_forced_jump(pareto2, 3, 3, 10.0, RngStreams(0).stream(0))

    def test_extinct_before_k_stays_extinct(self):
        dying = off.make_finite_support({0: 0.6, 5: 0.4})
        seen_extinct = 0
        for rep in range(200):
            rec = sim.simulate_forced_jump(dying, 4, 2, 3.0, RngStreams(17).stream(rep))
            if rec.sizes[2] == 0:
                seen_extinct += 1
                assert all(s == 0 for s in rec.sizes[2:])
        assert seen_extinct > 0

    def test_threshold_beyond_support_rejected(self):
        from gwtails.errors import ConditionalTailEmpty

        dying = off.make_finite_support({0: 0.6, 5: 0.4})
        with pytest.raises(ConditionalTailEmpty):
            for rep in range(50):
                sim.simulate_forced_jump(dying, 4, 2, 10.0, RngStreams(18).stream(rep))
