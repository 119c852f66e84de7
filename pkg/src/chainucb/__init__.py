"""Chaining-UCB: GP bandit optimization with exploration from hierarchical covers."""

from .cover import (
    CoverHierarchy,
    CoverLevel,
    DenseDistance,
    DyadicDistance,
    build_hierarchy,
    greedy_cover,
    max_degree,
)
from .gp import (
    NumericalError,
    PosteriorState,
    SearchSpace,
    extend,
    init_posterior,
    log_marginal_likelihood,
    posterior_summary,
    pseudo_distance,
    sample_prior,
    select_bandwidth,
)
from .kernel import (
    DirectedGraph,
    KernelSpec,
    floyd_warshall,
    kernel_matrix,
    read_graphs,
    se_kernel,
    shortest_path_kernel,
    write_graphs,
)
from .policy import (
    Decision,
    chaining_select,
    gp_ucb_select,
    level_weight,
    random_select,
    regret_bound,
)

__version__ = "0.1.0"
