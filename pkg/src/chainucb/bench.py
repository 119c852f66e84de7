"""Objectives, experiment runs and regret bookkeeping.

Three objective families are supported:

``sampled-gp``
    A GP prior draw (SE kernel) on a stratified uniform design in a box.
``himmelblau``
    Negated, scaled Himmelblau function plus a linear trend on a square grid.
``graph-space``
    A GP prior draw over random small digraphs under the normalized
    shortest-path kernel.

Every run derives its random streams from ``base_seed + run`` and a name
(policy and purpose), so runs are reproducible and adding a policy never
changes the draws seen by another one.
"""

from __future__ import annotations

import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np
from scipy.stats import qmc

from .cover import build_hierarchy
from .gp import BANDWIDTH_GRID, SearchSpace, init_posterior, sample_prior, select_bandwidth
from .kernel import MAX_NODES, DirectedGraph, KernelSpec, kernel_classes, read_graphs
from .policy import chaining_select, gp_ucb_select, random_select, regret_bound

__all__ = [
    "POLICIES",
    "OBJECTIVES",
    "ConfigError",
    "RunError",
    "Objective",
    "ExperimentConfig",
    "RegretTrace",
    "Aggregate",
    "ViolationReport",
    "stream",
    "uniform_design",
    "himmelblau",
    "random_digraph",
    "make_gp_objective",
    "make_himmelblau_objective",
    "make_graph_objective",
    "make_objective",
    "run_single",
    "run_experiment",
    "aggregate",
    "bound_violation_stats",
]

POLICIES = ("chaining-ucb", "gp-ucb", "random")
OBJECTIVES = ("sampled-gp", "himmelblau", "graph-space")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class RunError(RuntimeError):
    """A single run failed; carries the run seed."""

    def __init__(self, seed, cause):
        super().__init__(f"run with seed {seed} failed: {cause}")
        self.seed = seed
        self.cause = cause


@dataclass
class Objective:
    space: SearchSpace
    truth: np.ndarray
    opt_value: float = field(init=False)
    opt_index: int = field(init=False)

    def __post_init__(self):
        self.truth = np.asarray(self.truth, dtype=float)
        if self.truth.shape != (self.space.size,):
            raise ValueError("truth must hold one value per candidate")
        self.opt_index = int(np.argmax(self.truth))
        self.opt_value = float(self.truth[self.opt_index])


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings of one experiment.

    ``bandwidth=None`` selects the SE bandwidth per run by marginal likelihood
    on the initial design. ``box=None`` means ``(0, 20)`` for ``sampled-gp``
    and ``(-6, 6)`` for ``himmelblau``. ``edge_prob=None`` uses
    ``2 / node_count`` for each generated graph.
    """

    objective: str = "sampled-gp"
    size: int = 2000
    dim: int = 2
    box: tuple | None = None
    noise_sd: float = 0.05
    delta: float = 0.05
    n_init: int = 10
    n_iters: int = 100
    n_runs: int = 32
    base_seed: int = 0
    bandwidth: float | None = 1.0
    policies: tuple = POLICIES
    bound: bool = False
    jitter: float = 1e-10
    max_sample_size: int = 5000
    himmelblau_scale: float = 100.0
    himmelblau_trend: tuple = (1.0, 1.0)
    min_nodes: int = 2
    max_nodes: int = MAX_NODES
    edge_prob: float | None = None
    graph_file: str | None = None

    def __post_init__(self):
        for name in ("box", "himmelblau_trend", "policies"):
            val = getattr(self, name)
            if val is not None and not isinstance(val, tuple):
                object.__setattr__(self, name, tuple(val))
        self.validate()

    def validate(self):
        def bad(key, msg):
            raise ConfigError(f"{key}: {msg}")

        if self.objective not in OBJECTIVES:
            bad("objective", f"must be one of {', '.join(OBJECTIVES)}")
        if not self.noise_sd > 0:
            bad("noise_sd", "must be positive")
        if not 0 < self.delta < 1:
            bad("delta", "must lie in (0, 1)")
        if self.n_init < 0:
            bad("n_init", "must be >= 0")
        if self.n_iters < 1:
            bad("n_iters", "must be >= 1")
        if self.n_runs < 1:
            bad("n_runs", "must be >= 1")
        if self.size < 1:
            bad("size", "must be >= 1")
        if self.dim < 1:
            bad("dim", "must be >= 1")
        if self.bandwidth is not None and not self.bandwidth > 0:
            bad("bandwidth", "must be positive or 'auto'")
        if not self.jitter > 0:
            bad("jitter", "must be positive")
        if self.box is not None and (len(self.box) != 2 or not self.box[0] < self.box[1]):
            bad("box", "needs two increasing numbers")
        if len(self.himmelblau_trend) != 2:
            bad("himmelblau_trend", "needs two numbers")
        if not self.himmelblau_scale > 0:
            bad("himmelblau_scale", "must be positive")
        if not self.policies:
            bad("policies", "at least one policy is required")
        for p in self.policies:
            if p not in POLICIES:
                bad("policies", f"unknown policy {p!r}")
        if len(set(self.policies)) != len(self.policies):
            bad("policies", "duplicate policy")
        if not 1 <= self.min_nodes <= self.max_nodes:
            bad("min_nodes", "must satisfy 1 <= min_nodes <= max_nodes")
        if self.edge_prob is not None and not 0 < self.edge_prob <= 1:
            bad("edge_prob", "must lie in (0, 1]")
        if self.objective == "himmelblau":
            if self.dim != 2:
                bad("dim", "himmelblau is two-dimensional")
            side = math.isqrt(self.size)
            if side * side != self.size:
                bad("size", "himmelblau grid size must be a perfect square")
        if self.n_init > self.size:
            bad("n_init", "initial design larger than the space")

    @property
    def resolved_box(self) -> tuple:
        if self.box is not None:
            return self.box
        return (-6.0, 6.0) if self.objective == "himmelblau" else (0.0, 20.0)

    @property
    def noise_var(self) -> float:
        return self.noise_sd**2

    def replace(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class RegretTrace:
    """Per-iteration record of one policy in one run.

    ``simple_regret`` counts the initial design as already-found points.
    """

    policy: str
    run: int
    chosen: np.ndarray
    y: np.ndarray
    inst_regret: np.ndarray
    simple_regret: np.ndarray
    cum_regret: np.ndarray
    bound: np.ndarray | None = None

    def __len__(self):
        return len(self.chosen)


@dataclass
class Aggregate:
    mean_simple: np.ndarray
    sd_simple: np.ndarray
    mean_cum: np.ndarray
    sd_cum: np.ndarray
    n_runs: int


@dataclass
class ViolationReport:
    runs: int
    violations: int
    frequency: float


def stream(seed: int, *names: str) -> np.random.Generator:
    """Independent generator keyed by a seed and a tuple of names."""
    key = tuple(zlib.crc32(n.encode()) for n in names)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def uniform_design(n: int, dim: int, box, rng: np.random.Generator) -> np.ndarray:
    """Latin-hypercube sample of ``n`` points in ``[lo, hi]^dim``."""
    lo, hi = box
    u = qmc.LatinHypercube(d=dim, seed=rng).random(n)
    return lo + (hi - lo) * u


def himmelblau(x, y, scale: float = 100.0, trend=(1.0, 1.0)):
    """``-((x^2 + y - 11)^2 + (x + y^2 - 7)^2) / scale + a x + b y``."""
    a, b = trend
    return -((x**2 + y - 11) ** 2 + (x + y**2 - 7) ** 2) / scale + a * x + b * y


def random_digraph(rng: np.random.Generator, min_nodes=2, max_nodes=MAX_NODES, edge_prob=None, retries=100) -> DirectedGraph:
    """Random digraph with a uniform node count; resampled until some pair is reachable."""
    for _ in range(retries):
        n = int(rng.integers(min_nodes, max_nodes + 1))
        p = 2.0 / n if edge_prob is None else edge_prob
        adj = rng.random((n, n)) < p
        np.fill_diagonal(adj, False)
        if adj.any():
            return DirectedGraph(n, frozenset(zip(*np.nonzero(adj))))
    raise RuntimeError(f"no graph with an edge after {retries} draws")


def _check_sample_size(config, size):
    if size > config.max_sample_size:
        raise ConfigError(
            f"size: {size} candidates exceed max_sample_size={config.max_sample_size} "
            "for the O(|X|^3) prior sampler"
        )


def make_gp_objective(config: ExperimentConfig, rng: np.random.Generator) -> Objective:
    """GP prior draw on a stratified uniform design."""
    _check_sample_size(config, config.size)
    points = uniform_design(config.size, config.dim, config.resolved_box, rng)
    space = SearchSpace(points, KernelSpec("se", config.bandwidth or 1.0))
    return Objective(space, sample_prior(space, rng, config.jitter))


def make_himmelblau_objective(config: ExperimentConfig) -> Objective:
    side = math.isqrt(config.size)
    lo, hi = config.resolved_box
    g = np.linspace(lo, hi, side)
    xx, yy = np.meshgrid(g, g, indexing="ij")
    points = np.column_stack([xx.ravel(), yy.ravel()])
    truth = himmelblau(points[:, 0], points[:, 1], config.himmelblau_scale, config.himmelblau_trend)
    space = SearchSpace(points, KernelSpec("se", config.bandwidth or 1.0))
    return Objective(space, truth)


def make_graph_objective(config: ExperimentConfig, rng: np.random.Generator) -> Objective:
    if config.graph_file:
        graphs = read_graphs(config.graph_file, max_nodes=config.max_nodes)
    else:
        graphs = [
            random_digraph(rng, config.min_nodes, config.max_nodes, config.edge_prob)
            for _ in range(config.size)
        ]
    space = SearchSpace(graphs, KernelSpec("shortest-path"))
    # graphs with identical kernel rows must share one value under the prior;
    # sampling one value per class keeps jitter from splitting them
    reps, labels = kernel_classes(graphs)
    _check_sample_size(config, len(reps))
    classes = SearchSpace([graphs[r] for r in reps], KernelSpec("shortest-path"))
    return Objective(space, sample_prior(classes, rng, config.jitter)[labels])


def make_objective(config: ExperimentConfig, run_seed: int) -> Objective:
    rng = stream(run_seed, "shared", "objective")
    if config.objective == "sampled-gp":
        return make_gp_objective(config, rng)
    if config.objective == "himmelblau":
        return make_himmelblau_objective(config)
    return make_graph_objective(config, rng)


def _run_policy(policy, objective, base_state, config, run, run_seed, best_init):
    state = base_state.copy()
    truth = objective.truth
    noise = stream(run_seed, policy, "noise")
    picker = stream(run_seed, policy, "select")
    n = config.n_iters
    chosen = np.zeros(n, dtype=int)
    ys = np.zeros(n)
    bound = np.full(n, np.nan) if config.bound and policy == "chaining-ucb" else None
    for s in range(n):
        t = state.n + 1
        if policy == "chaining-ucb":
            hierarchy = build_hierarchy(state)
            x = chaining_select(state, hierarchy, t, config.delta).chosen
            if bound is not None:
                bound[s] = regret_bound(state, x, t, config.delta, hierarchy)
        elif policy == "gp-ucb":
            x = gp_ucb_select(state, t, config.delta).chosen
        else:
            x = random_select(state, picker).chosen
        y = truth[x] + config.noise_sd * noise.standard_normal()
        state.extend(x, y)
        chosen[s], ys[s] = x, y
    inst = objective.opt_value - truth[chosen]
    best = np.maximum.accumulate(np.maximum(truth[chosen], best_init))
    return RegretTrace(policy, run, chosen, ys, inst, objective.opt_value - best, np.cumsum(inst), bound)


def run_single(config: ExperimentConfig, run: int, objective: Objective | None = None) -> dict:
    """One run of every configured policy; returns ``{policy: RegretTrace}``."""
    run_seed = config.base_seed + run
    try:
        if objective is None:
            objective = make_objective(config, run_seed)
        space = objective.space
        design_rng = stream(run_seed, "shared", "design")
        design = design_rng.choice(space.size, size=config.n_init, replace=False)
        init_noise = config.noise_sd * stream(run_seed, "shared", "init-noise").standard_normal(config.n_init)
        y_init = objective.truth[design] + init_noise
        if config.bandwidth is None and not space.is_graph:
            if config.n_init < 1:
                raise ConfigError("bandwidth: 'auto' needs n_init >= 1")
            bw = select_bandwidth(space, design, y_init, config.noise_var, BANDWIDTH_GRID)
            space = space.with_kernel(KernelSpec("se", bw))
            objective = Objective(space, objective.truth)
        base = init_posterior(space, config.noise_var)
        for x, y in zip(design, y_init):
            base.extend(x, y)
        best_init = objective.truth[design].max() if config.n_init else -np.inf
        return {
            p: _run_policy(p, objective, base, config, run, run_seed, best_init)
            for p in config.policies
        }
    except ConfigError:
        raise
    except Exception as exc:
        raise RunError(run_seed, exc) from exc


def _run_single_star(args):
    return run_single(*args)


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> dict:
    """All runs of an experiment; returns ``{policy: [RegretTrace per run]}``.

    A ``himmelblau`` objective is built once and shared; other objectives are
    redrawn per run. With ``jobs > 1`` runs execute in worker processes.
    """
    shared = make_himmelblau_objective(config) if config.objective == "himmelblau" else None
    tasks = [(config, r, shared) for r in range(config.n_runs)]
    if jobs > 1 and config.n_runs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_single_star, tasks))
    else:
        results = [_run_single_star(t) for t in tasks]
    return {p: [res[p] for res in results] for p in config.policies}


def aggregate(traces) -> Aggregate:
    """Mean and sample standard deviation (``n - 1``) of simple and cumulative regret.

    A single run gets a standard deviation of 0.
    """
    traces = list(traces)
    if not traces:
        raise ValueError("no traces to aggregate")
    lengths = {len(tr) for tr in traces}
    if len(lengths) != 1:
        raise ValueError("traces have unequal lengths")
    S = np.array([tr.simple_regret for tr in traces], dtype=float)
    R = np.array([tr.cum_regret for tr in traces], dtype=float)
    if len(traces) == 1:
        zero = np.zeros(S.shape[1])
        return Aggregate(S[0].copy(), zero, R[0].copy(), zero.copy(), 1)
    return Aggregate(S.mean(0), S.std(0, ddof=1), R.mean(0), R.std(0, ddof=1), len(traces))


def bound_violation_stats(traces) -> ViolationReport:
    """Fraction of runs where ``sup f - f(x_n)`` exceeds the bound at some iteration.

    The regret side comes from each trace's ``inst_regret``, which was
    computed from the objective's true values.
    """
    traces = list(traces)
    if not traces:
        raise ValueError("no traces")
    violations = 0
    for tr in traces:
        if tr.bound is None or np.isnan(tr.bound).any():
            raise ValueError(f"trace of run {tr.run} ({tr.policy}) carries no bound values")
        violations += bool(np.any(tr.inst_regret > tr.bound))
    return ViolationReport(len(traces), violations, violations / len(traces))
