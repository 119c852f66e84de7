"""Acceptance criteria, each reported as one PASS/FAIL line in the terminal summary.

The full-size benchmark comparison takes close to an hour on one core; everything
else finishes in minutes.
"""

import itertools
import math

import numpy as np
import pytest

from chainucb.bench import ExperimentConfig, aggregate, bound_violation_stats, run_experiment
from chainucb.cover import build_hierarchy, greedy_cover, max_degree
from chainucb.gp import SearchSpace, init_posterior, sample_prior
from chainucb.kernel import KernelSpec

from .conftest import direct_posterior, random_state
from .test_cover import optimal_cover_size, random_pseudometric


class Rollup:
    """Collects the parts of a criterion checked by separate tests."""

    def __init__(self, number, title, parts):
        self.number, self.title, self.parts = number, title, parts
        self.results = {}

    def record(self, acceptance, part, passed, detail):
        self.results[part] = (passed, detail)
        missing = [p for p in self.parts if p not in self.results]
        ok = not missing and all(v[0] for v in self.results.values())
        text = "; ".join(f"{k}: {v[1]}" for k, v in self.results.items())
        if missing:
            text += f"; not run: {', '.join(missing)}"
        acceptance(self.number, self.title, ok, text)


BENCHMARKS = Rollup(4, "benchmark comparison against GP-UCB and random", ("sampled-gp", "graph-space", "himmelblau"))
INVARIANTS = Rollup(6, "invariant suites", ("variance", "pseudo-metric", "covers", "simple regret", "determinism"))


def test_posterior_matches_direct_solve(acceptance):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(20):
        state = random_state(rng, size=50, n_obs=0, box=6.0)
        for _ in range(30):
            state.extend(int(rng.integers(50)), float(rng.normal()))
        mu, cov, dist = direct_posterior(state.space.K, state.queried, state.observations, state.noise_var)
        idx = np.arange(50)
        worst = max(
            worst,
            np.abs(state.mean() - mu).max(),
            np.abs(state.variance() - np.diag(cov)).max(),
            np.abs(state.distance_block(idx) - dist).max(),
        )
    passed = worst <= 1e-8
    acceptance(1, "posterior equals direct solve", passed, f"max abs error {worst:.2e}")
    assert passed


def test_greedy_cover_quality(acceptance):
    rng = np.random.default_rng(7)
    worst_ratio, dominated = 0.0, True
    for _ in range(200):
        n = int(rng.integers(1, 16))
        D = random_pseudometric(rng, n)
        eps = float(rng.uniform(0.1, 2.0))
        cover = greedy_cover(np.arange(n), D, eps)
        dominated &= bool((D[:, cover].min(axis=1) <= eps).all())
        limit = (1 + math.log(max_degree(np.arange(n), D, eps))) * optimal_cover_size(D, eps)
        worst_ratio = max(worst_ratio, len(cover) / limit)
    passed = dominated and worst_ratio <= 1
    acceptance(2, "greedy cover dominates within 1 + ln d_max", passed, f"worst |T| / limit {worst_ratio:.3f}")
    assert passed


def test_regret_bound_monte_carlo(acceptance):
    cfg = ExperimentConfig(
        size=200, bandwidth=1.0, noise_sd=0.05, delta=0.05, n_init=0, n_iters=30, n_runs=100,
        bound=True, policies=("chaining-ucb",),
    )
    report = bound_violation_stats(run_experiment(cfg)["chaining-ucb"])
    passed = report.frequency <= 0.05 + 0.05
    acceptance(3, "regret bound violation frequency", passed, f"{report.violations}/{report.runs} runs")
    assert passed


def _benchmark_comparison(acceptance, objective, **kw):
    cfg = ExperimentConfig(objective=objective, n_runs=32, n_iters=100, **kw)
    res = run_experiment(cfg)
    final = {p: aggregate(ts).mean_simple[-1] for p, ts in res.items()}
    c, g, r = final["chaining-ucb"], final["gp-ucb"], final["random"]
    passed = c < r and c <= 1.25 * g
    BENCHMARKS.record(acceptance, objective, passed, f"S_100 chaining {c:.3g}, gp-ucb {g:.3g}, random {r:.3g}")
    assert passed


@pytest.mark.slow
def test_benchmark_sampled_gp(acceptance):
    _benchmark_comparison(acceptance, "sampled-gp", size=2000)


@pytest.mark.slow
def test_benchmark_graph_space(acceptance):
    _benchmark_comparison(acceptance, "graph-space", size=2000)


@pytest.mark.slow
def test_benchmark_himmelblau(acceptance):
    _benchmark_comparison(acceptance, "himmelblau", size=10_000, bandwidth=None)


@pytest.mark.slow
def test_cumulative_regret_trend(acceptance):
    cfg = ExperimentConfig(size=2000, n_runs=16, n_iters=200, policies=("chaining-ucb",))
    R = aggregate(run_experiment(cfg)["chaining-ucb"]).mean_cum

    def scaled(n):
        return R[n - 1] / math.sqrt(n * math.log(n) ** (cfg.dim + 2))

    early, late = scaled(50), scaled(200)
    passed = late <= 2 * early
    acceptance(5, "cumulative regret rate trend", passed, f"scaled R at 50: {early:.4f}, at 200: {late:.4f}")
    assert passed


class TestInvariantSuites:
    def _check(self, acceptance, part, cases, fn):
        failures = 0
        for k in range(cases):
            failures += not fn(np.random.default_rng([INVARIANTS.parts.index(part), k]))
        passed = failures == 0
        INVARIANTS.record(acceptance, part, passed, f"{cases - failures}/{cases}")
        assert passed

    def test_variance_monotone(self, acceptance):
        def case(rng):
            state = random_state(rng, size=25, n_obs=int(rng.integers(0, 10)))
            before = state.variance()
            state.extend(int(rng.integers(25)), float(rng.normal()))
            after = state.variance()
            return bool((after <= before + 1e-9).all() and after.min() >= 0)

        self._check(acceptance, "variance", 1000, case)

    def test_pseudo_metric(self, acceptance):
        def case(rng):
            state = random_state(rng, size=20, n_obs=int(rng.integers(0, 15)))
            D = state.distance_block(np.arange(20))
            sd = state.std()
            a, b, c = rng.integers(0, 20, 3)
            return bool(
                D[a, a] == 0
                and abs(D[a, b] - D[b, a]) <= 1e-12
                and D[a, c] <= D[a, b] + D[b, c] + 1e-7
                and D[a, b] <= sd[a] + sd[b] + 1e-7
            )

        self._check(acceptance, "pseudo-metric", 1000, case)

    def test_cover_nesting_and_domination(self, acceptance):
        def case(rng):
            state = random_state(rng, size=int(rng.integers(2, 40)), n_obs=int(rng.integers(0, 15)))
            h = build_hierarchy(state)
            prev = set()
            for lv in h.levels:
                members = set(lv.members.tolist())
                if not prev <= members or not h.distance.covered(lv.members, lv.radius).all():
                    return False
                prev = members
            return True

        self._check(acceptance, "covers", 1000, case)

    def test_simple_regret_monotone(self, acceptance):
        cfg = ExperimentConfig(size=30, n_init=2, n_iters=8, n_runs=334)
        traces = [t for ts in run_experiment(cfg).values() for t in ts]
        ok = [bool((np.diff(t.simple_regret) <= 0).all() and (np.diff(t.cum_regret) >= 0).all()) for t in traces]
        passed = all(ok)
        INVARIANTS.record(acceptance, "simple regret", passed, f"{sum(ok)}/{len(ok)}")
        assert passed

    def test_run_determinism(self, acceptance):
        kinds = itertools.cycle(["sampled-gp", "graph-space", "himmelblau"])
        good = 0
        cases = 1000
        for k in range(cases):
            kind = next(kinds)
            size = 36 if kind == "himmelblau" else 25
            cfg = ExperimentConfig(objective=kind, size=size, n_init=2, n_iters=3, n_runs=1, base_seed=k, bound=k % 2 == 0)
            a, b = run_experiment(cfg), run_experiment(cfg)
            same = all(
                np.array_equal(x.chosen, y.chosen)
                and np.array_equal(x.y, y.y)
                and np.array_equal(x.simple_regret, y.simple_regret)
                and (x.bound is None or np.array_equal(x.bound, y.bound))
                for p in cfg.policies
                for x, y in zip(a[p], b[p])
            )
            good += same
        passed = good == cases
        INVARIANTS.record(acceptance, "determinism", passed, f"{good}/{cases}")
        assert passed


def test_gaussian_tail_bound(acceptance):
    rng = np.random.default_rng(99)
    space = SearchSpace(rng.uniform(0, 3, (10, 2)), KernelSpec("se", 1.0))
    state = init_posterior(space, 0.0025)
    samples = np.array([sample_prior(space, rng) for _ in range(100_000)])
    worst = -np.inf
    for star, x in itertools.permutations(range(10), 2):
        d = state.pseudo_distance(star, x)
        gap = samples[:, star] - samples[:, x]
        for u in (1, 2, 4):
            freq = np.mean(gap > d * math.sqrt(2 * u))
            worst = max(worst, freq / math.exp(-u))
    passed = worst < 1
    acceptance(7, "Gaussian tail bound on prior differences", passed, f"worst frequency / e^-u {worst:.3f}")
    assert passed
