"""
Chaining-UCB against GP-UCB and random search
=============================================

A scaled-down version of the simple-regret comparison: GP sample paths on a
500-point design, eight runs of 40 queries each. Runs take a few seconds.
"""

import time

import numpy as np

from chainucb.bench import ExperimentConfig, aggregate, run_experiment

config = ExperimentConfig(objective="sampled-gp", size=500, n_runs=8, n_iters=40)

start = time.perf_counter()
results = run_experiment(config)
print(f"{config.n_runs} runs in {time.perf_counter() - start:.1f} s")

checkpoints = [1, 5, 10, 20, 40]
print()
print("mean simple regret S_t")
print(f"{'policy':<14}" + "".join(f"{'t=' + str(t):>10}" for t in checkpoints))
for policy, traces in results.items():
    agg = aggregate(traces)
    print(f"{policy:<14}" + "".join(f"{agg.mean_simple[t - 1]:10.4f}" for t in checkpoints))

print()
print("mean cumulative regret R_40")
for policy, traces in results.items():
    print(f"  {policy:<14}{aggregate(traces).mean_cum[-1]:.3f}")

# how often did each policy revisit a point it had already queried?
print()
for policy, traces in results.items():
    repeats = np.mean([len(t.chosen) - len(np.unique(t.chosen)) for t in traces])
    print(f"  {policy:<14}mean repeated queries {repeats:.1f}")
