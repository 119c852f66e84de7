"""
Nested covers and the chaining bonus
====================================

After a few observations the posterior distance is small near the data and
large elsewhere. The hierarchy covers the space at radii 1, 1/2, 1/4, ...
down to the smallest posterior standard deviation, and each point's
exploration bonus sums the level weights above its own uncertainty.
"""

import numpy as np

from chainucb import KernelSpec, SearchSpace, build_hierarchy, init_posterior
from chainucb.policy import chaining_bonus, chaining_select, level_weights

rng = np.random.default_rng(0)
space = SearchSpace(rng.uniform(0, 10, (400, 2)), KernelSpec("se", 1.0))
state = init_posterior(space, 0.05**2)
for x in rng.choice(400, 25, replace=False):
    state.extend(int(x), float(rng.normal()))

h = build_hierarchy(state)
t = state.n + 1
weights = level_weights(h, t, delta=0.05)

print(f"smallest sd {h.sigma_min:.4f}, {len(h.levels)} levels")
print(f"{'level':>5} {'radius':>8} {'|T_i|':>6} {'new':>5} {'N(r)':>6} {'H_i':>8}")
for lv, w in zip(h.levels, weights):
    print(f"{lv.index:5d} {lv.radius:8.4f} {lv.size:6d} {len(lv.newly_added):5d} "
          f"{h.covering_number(lv.radius):6d} {w:8.4f}")

# the bonus is a step function of sd(x)
bonus = chaining_bonus(state.std(), h, weights)
order = np.argsort(state.std())
print()
print("sd and bonus at the least and most uncertain points:")
for i in list(order[:3]) + list(order[-3:]):
    print(f"  x={i:3d} sd={state.std()[i]:.4f} bonus={bonus[i]:.4f}")

d = chaining_select(state, h, t, 0.05)
print()
print(f"next query: {d.chosen} (acquisition {d.score:.4f})")
