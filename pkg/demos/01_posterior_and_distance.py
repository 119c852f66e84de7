"""
Posterior updates and the posterior pseudo-distance
===================================================

A GP posterior on a handful of points on a line, updated one observation at
a time, and the distance ``d_n(x, x') = sqrt(Var[f(x) - f(x') | data])``
that drives the cover hierarchy.
"""

import numpy as np

from chainucb import KernelSpec, SearchSpace, init_posterior

# eleven points on [0, 5], SE kernel with unit bandwidth
xs = np.linspace(0, 5, 11)
space = SearchSpace(xs[:, None], KernelSpec("se", 1.0))
state = init_posterior(space, noise_var=0.05**2)

# the prior: zero mean, unit variance, distance sqrt(2 - 2k)
print("prior sd:", np.round(state.std(), 3))
print("prior d(x=0, x=1):", round(state.pseudo_distance(0, 2), 4))

# observe f = sin at three points
for i in (2, 5, 9):
    state.extend(i, float(np.sin(xs[i])))

print()
print(f"{'x':>5} {'mean':>8} {'sd':>8} {'sin':>8}")
for x, m, s in zip(xs, state.mean(), state.std()):
    print(f"{x:5.1f} {m:8.3f} {s:8.3f} {np.sin(x):8.3f}")

# distances shrink near the data: two observed points are nearly
# indistinguishable once their values are known
print()
D = state.distance_block(np.arange(space.size))
print("d(observed 2, observed 5):", round(D[2, 5], 4))
print("d(unobserved 0, unobserved 10):", round(D[0, 10], 4))
print("d never exceeds sd(x) + sd(x'):", bool((D <= state.std()[:, None] + state.std()[None, :] + 1e-12).all()))
