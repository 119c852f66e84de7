"""
The high-probability regret bound along one run
===============================================

With ``bound=True`` every Chaining-UCB step also records an upper bound on
``max f - f(x_t)`` that holds for all steps at once with probability
``1 - delta``. Here it is printed next to the true gap for one run, then
checked over 50 runs.
"""

import numpy as np

from chainucb.bench import ExperimentConfig, bound_violation_stats, run_experiment

config = ExperimentConfig(
    size=200, n_init=0, n_iters=30, n_runs=1, bound=True, policies=("chaining-ucb",)
)
(trace,) = run_experiment(config)["chaining-ucb"]

print(f"{'t':>3} {'gap':>8} {'bound':>8}")
for t in (0, 1, 2, 4, 9, 14, 19, 29):
    print(f"{t + 1:3d} {trace.inst_regret[t]:8.4f} {trace.bound[t]:8.4f}")

# the bound is loose by design: covering numbers are greedy estimates
many = run_experiment(config.replace(n_runs=50))["chaining-ucb"]
report = bound_violation_stats(many)
ratio = np.median([np.max(t.inst_regret / t.bound) for t in many])
print()
print(f"violations: {report.violations}/{report.runs} (delta = {config.delta})")
print(f"median over runs of the largest gap / bound ratio: {ratio:.3f}")
