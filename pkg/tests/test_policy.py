import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chainucb.cover import DenseDistance, build_hierarchy, greedy_cover
from chainucb.gp import SearchSpace, init_posterior
from chainucb.kernel import KernelSpec
from chainucb.policy import (
    bound_constant,
    chaining_bonus,
    chaining_select,
    gp_ucb_beta,
    gp_ucb_select,
    level_weight,
    level_weights,
    random_select,
    regret_bound,
)

from .conftest import random_state


def five_point_state():
    space = SearchSpace(np.array([[0.0], [0.7], [1.5], [2.6], [4.0]]), KernelSpec("se", 1.0))
    return init_posterior(space, 0.0025).extend(1, 0.4).extend(3, -0.2)


class TestLevelWeight:
    def test_examples(self):
        assert level_weight(0.5, 3, 2, 1, 0.05) == pytest.approx(1.8389836324360342, rel=1e-12)
        assert level_weight(1.0, 1, 1, 1, 0.05) == pytest.approx(3.060810369511782, rel=1e-12)

    def test_closed_form(self):
        val = 0.25 * math.sqrt(2 * math.log(8 * 9 * 49 * math.pi**4 / (36 * 0.1)))
        assert level_weight(0.25, 7, 3, 7, 0.1) == pytest.approx(val, rel=1e-14)

    @settings(max_examples=300)
    @given(
        st.integers(1, 1000), st.integers(1, 30), st.integers(1, 500),
        st.floats(1e-4, 0.99), st.sampled_from(["size", "i", "t", "delta"]),
    )
    def test_monotone(self, size, i, t, delta, which):
        base = level_weight(0.5, size, i, t, delta)
        bumped = {
            "size": (size + 1, i, t, delta),
            "i": (size, i + 1, t, delta),
            "t": (size, i, t + 1, delta),
            "delta": (size, i, t, delta / 2),
        }[which]
        assert level_weight(0.5, *bumped) >= base >= 0

    @pytest.mark.parametrize("args", [(1.0, 1, 1, 0, 0.05), (1.0, 0, 1, 1, 0.05), (1.0, 1, 1, 1, 1.0)])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            level_weight(*args)


class TestChainingSelect:
    def test_prior_picks_first(self, rng):
        state = init_posterior(SearchSpace(rng.uniform(0, 5, (20, 2))), 0.01)
        d = chaining_select(state, build_hierarchy(state), 1, 0.05)
        assert d.chosen == 0

    def test_hand_recomputation(self):
        state = five_point_state()
        h = build_hierarchy(state)
        t, delta = 3, 0.05
        mu, sd = state.mean(), state.std()
        acq = []
        for x in range(5):
            total = mu[x]
            for lv in h.levels:
                eps = 2.0 ** (1 - lv.index)
                if sd.min() <= eps < sd[x]:
                    total += eps * math.sqrt(2 * math.log((lv.size + 1) * lv.index**2 * t**2 * math.pi**4 / (36 * delta)))
            acq.append(total)
        d = chaining_select(state, h, t, delta, keep_breakdown=True)
        assert d.chosen == int(np.argmax(acq))
        np.testing.assert_allclose(d.breakdown[0] + d.breakdown[1], acq, rtol=1e-12)

    def test_least_uncertain_point_gets_mean_only(self):
        state = five_point_state()
        h = build_hierarchy(state)
        d = chaining_select(state, h, 3, 0.05, keep_breakdown=True)
        x = int(np.argmin(state.std()))
        assert d.breakdown[1][x] == 0.0

    def test_bonus_independent_of_observations(self, rng):
        for _ in range(20):
            state = random_state(rng, size=40, n_obs=8)
            shifted = init_posterior(state.space, state.noise_var)
            c = float(rng.normal(0, 5))
            for x, y in zip(state.queried, state.observations):
                shifted.extend(int(x), float(y) + c)
            h, hs = build_hierarchy(state), build_hierarchy(shifted)
            b = chaining_bonus(state.std(), h, level_weights(h, 5, 0.05))
            bs = chaining_bonus(shifted.std(), hs, level_weights(hs, 5, 0.05))
            assert (b == bs).all()

    def test_bonus_monotone_in_sigma(self, rng):
        state = random_state(rng, size=60, n_obs=15)
        h = build_hierarchy(state)
        w = level_weights(h, 4, 0.05)
        sigma = np.linspace(0, 1.2, 200)
        assert (np.diff(chaining_bonus(sigma, h, w)) >= 0).all()

    def test_chosen_is_maximizer(self, rng):
        for _ in range(50):
            state = random_state(rng, size=30, n_obs=int(rng.integers(0, 12)))
            d = chaining_select(state, build_hierarchy(state), 2, 0.1, keep_breakdown=True)
            acq = d.breakdown[0] + d.breakdown[1]
            assert d.score == acq.max() and d.chosen == int(np.flatnonzero(acq == acq.max())[0])


class TestGpUcb:
    def test_beta_example(self):
        assert gp_ucb_beta(1, 0.05, 100) == pytest.approx(16.197205524025655, rel=1e-12)

    def test_prior_picks_first(self, rng):
        state = init_posterior(SearchSpace(rng.uniform(0, 5, (20, 2))), 0.01)
        assert gp_ucb_select(state, 1, 0.05).chosen == 0

    def test_hand_recomputation(self):
        state = five_point_state()
        beta = 2 * math.log(5 * 4 * math.pi**2 / (6 * 0.05))
        acq = state.mean() + math.sqrt(beta) * state.std()
        d = gp_ucb_select(state, 2, 0.05)
        assert d.chosen == int(np.argmax(acq)) and d.score == pytest.approx(acq.max(), rel=1e-12)

    def test_constant_shift_of_mean(self, rng):
        state = random_state(rng, size=40, n_obs=8)
        d = gp_ucb_select(state, 3, 0.05, keep_breakdown=True)
        mu, bonus = d.breakdown
        assert int(np.argmax(mu + 3.0 + bonus)) == d.chosen


class TestRandomSelect:
    def test_single_point(self):
        state = init_posterior(SearchSpace(np.zeros((1, 1))), 0.01)
        assert random_select(state, np.random.default_rng(0)).chosen == 0

    def test_deterministic(self, rng):
        state = random_state(rng, size=30, n_obs=5)
        r1, r2 = np.random.default_rng(4), np.random.default_rng(4)
        assert [random_select(state, r1).chosen for _ in range(20)] == [random_select(state, r2).chosen for _ in range(20)]

    def test_never_repeats_until_exhausted(self, rng):
        state = init_posterior(SearchSpace(rng.uniform(0, 1, (8, 1))), 0.01)
        gen = np.random.default_rng(1)
        picks = []
        for _ in range(8):
            x = random_select(state, gen).chosen
            picks.append(x)
            state.extend(x, 0.0)
        assert sorted(picks) == list(range(8))
        assert 0 <= random_select(state, gen).chosen < 8

    def test_uniform(self):
        state = init_posterior(SearchSpace(np.arange(10.0)[:, None]), 0.01)
        gen = np.random.default_rng(2)
        counts = np.bincount([random_select(state, gen).chosen for _ in range(20_000)], minlength=10)
        assert np.abs(counts / 20_000 - 0.1).max() <= 0.02


class TestRegretBound:
    def test_constant_example(self):
        assert bound_constant(1, 0.05) == pytest.approx(26.986691938388894, rel=1e-12)

    def test_small_sigma_term_vanishes(self):
        c = bound_constant(10, 0.05)
        s = 1e-8
        assert s * (c - 6 * math.log(s)) < 2e-6

    def test_identical_points_have_no_sum(self):
        space = SearchSpace(np.zeros((4, 1)))
        state = init_posterior(space, 0.01).extend(0, 1.0)
        h = build_hierarchy(state)
        s = float(state.std()[0])
        expected = s * (bound_constant(2, 0.05) - 6 * math.log(s))
        assert regret_bound(state, 0, 2, 0.05, h) == pytest.approx(expected, rel=1e-12)

    def test_matches_long_sum(self, rng):
        for _ in range(15):
            state = random_state(rng, size=40, n_obs=int(rng.integers(1, 20)))
            D = DenseDistance.from_posterior(state)
            x = int(rng.integers(40))
            n = state.n
            s = float(state.std()[x])
            total = 0.0
            for i in range(1, 400):
                r = 2.0**-i
                if r < s:
                    size = len(greedy_cover(np.arange(40), D, r))
                    total += r * math.sqrt(math.log(size))
            expected = s * (bound_constant(n, 0.05) - 6 * math.log(s)) + 9 * total
            assert regret_bound(state, x, n, 0.05, build_hierarchy(state, D)) == pytest.approx(expected, rel=1e-10)
            # the dyadic table answers every radius in the sum exactly
            assert regret_bound(state, x, n, 0.05, build_hierarchy(state)) == pytest.approx(expected, rel=1e-6)

    def test_nonnegative_and_decreasing_in_delta(self, rng):
        state = random_state(rng, size=30, n_obs=6)
        h = build_hierarchy(state)
        a = regret_bound(state, 3, 6, 0.05, h)
        b = regret_bound(state, 3, 6, 0.2, h)
        assert a >= b >= 0
