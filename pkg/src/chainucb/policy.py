"""Acquisition policies and the high-probability regret bound.

* :func:`chaining_select` -- posterior mean plus a sum of per-level weights
  ``H_i`` over the cover levels whose radius lies in ``[sigma_min, sigma(x))``.
* :func:`gp_ucb_select` -- ``mu + sqrt(beta_t) sigma`` with the finite-space
  ``beta_t = 2 log(|X| t^2 pi^2 / (6 delta))``.
* :func:`random_select` -- uniform over never-queried candidates.

All argmax operations break ties towards the lowest index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cover import CoverHierarchy
from .gp import PosteriorState

__all__ = [
    "Decision",
    "level_weight",
    "level_weights",
    "chaining_bonus",
    "chaining_select",
    "gp_ucb_beta",
    "gp_ucb_select",
    "random_select",
    "bound_constant",
    "regret_bound",
]

PI4_OVER_36 = math.pi**4 / 36.0


@dataclass
class Decision:
    """Chosen candidate, its acquisition value and optional per-candidate terms."""

    chosen: int
    score: float
    breakdown: tuple | None = None


def _check_delta(delta):
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")


def level_weight(eps: float, size: int, i: int, t: int, delta: float) -> float:
    """Exploration weight of cover level ``i`` at iteration ``t``.

    ``H_i = eps * sqrt(2 log((size + 1) i^2 t^2 pi^4 / (36 delta)))`` where
    ``size`` is the number of points in the level's cover.
    """
    if t < 1 or i < 1 or size < 1:
        raise ValueError("need t >= 1, i >= 1 and size >= 1")
    _check_delta(delta)
    return eps * math.sqrt(2.0 * math.log((size + 1) * i * i * t * t * PI4_OVER_36 / delta))


def level_weights(hierarchy: CoverHierarchy, t: int, delta: float) -> np.ndarray:
    return np.array([level_weight(lv.radius, lv.size, lv.index, t, delta) for lv in hierarchy.levels])


def chaining_bonus(sigma: np.ndarray, hierarchy: CoverHierarchy, weights: np.ndarray) -> np.ndarray:
    """Sum of ``H_i`` over levels with ``sigma_min <= eps_i < sigma(x)``, per candidate."""
    radii = hierarchy.radii
    live = hierarchy.sigma_min <= radii
    mask = live[None, :] & (radii[None, :] < sigma[:, None])
    return mask.astype(float) @ weights


def chaining_select(
    state: PosteriorState,
    hierarchy: CoverHierarchy,
    t: int,
    delta: float,
    keep_breakdown: bool = False,
) -> Decision:
    """Chaining-UCB query for iteration ``t``; ``hierarchy`` must come from ``state``."""
    _check_delta(delta)
    mu = state.mean()
    weights = level_weights(hierarchy, t, delta)
    bonus = chaining_bonus(state.std(), hierarchy, weights)
    acq = mu + bonus
    x = int(np.argmax(acq))
    return Decision(x, float(acq[x]), (mu, bonus) if keep_breakdown else None)


def gp_ucb_beta(t: int, delta: float, space_size: int) -> float:
    if t < 1 or space_size < 1:
        raise ValueError("need t >= 1 and a nonempty space")
    _check_delta(delta)
    return 2.0 * math.log(space_size * t * t * math.pi**2 / (6.0 * delta))


def gp_ucb_select(
    state: PosteriorState,
    t: int,
    delta: float,
    space_size: int | None = None,
    keep_breakdown: bool = False,
) -> Decision:
    if space_size is None:
        space_size = state.space.size
    beta = gp_ucb_beta(t, delta, space_size)
    mu = state.mean()
    bonus = math.sqrt(beta) * state.std()
    acq = mu + bonus
    x = int(np.argmax(acq))
    return Decision(x, float(acq[x]), (mu, bonus) if keep_breakdown else None)


def random_select(state: PosteriorState, rng: np.random.Generator) -> Decision:
    """Uniform draw among never-queried candidates.

    Falls back to a uniform draw over the whole space once every candidate
    has been queried.
    """
    size = state.space.size
    seen = np.zeros(size, dtype=bool)
    seen[state.queried] = True
    pool = np.flatnonzero(~seen)
    if pool.size == 0:
        pool = np.arange(size)
    x = int(pool[rng.integers(pool.size)])
    return Decision(x, float("nan"))


def bound_constant(n: int, delta: float) -> float:
    """``c_{n,delta} = 6 sqrt(log(n^2 pi^4 / (36 delta))) + 15``."""
    _check_delta(delta)
    return 6.0 * math.sqrt(math.log(n * n * PI4_OVER_36 / delta)) + 15.0


def regret_bound(state: PosteriorState, x: int, n: int, delta: float, hierarchy: CoverHierarchy) -> float:
    """Upper bound on ``sup f - f(x)`` holding jointly over ``n`` with probability ``1 - delta``.

    ``sigma (c_{n,delta} - 6 log sigma) + 9 sum_{i: 2^-i < sigma} 2^-i sqrt(log N(2^-i))``
    with ``sigma = sigma_n(x)`` and ``N`` the greedy covering-number estimate
    of the whole space under ``d_n``. Greedy covers are never smaller than
    optimal ones, so the value is conservative.

    The sum is infinite but its terms freeze once ``2^-i`` drops below the
    smallest positive pairwise distance; that tail is added in closed form.
    """
    sigma = float(state.std()[x])
    if not sigma > 0:
        raise ValueError("posterior standard deviation at x must be positive")
    value = sigma * (bound_constant(n, delta) - 6.0 * math.log(sigma))
    floor = hierarchy.distance.min_positive()
    i = 1
    while 2.0**-i >= sigma:
        i += 1
    total = 0.0
    while 2.0**-i >= floor:
        total += 2.0**-i * math.sqrt(math.log(hierarchy.covering_number(2.0**-i)))
        i += 1
    # sum_{j >= i} 2^-j = 2^(1 - i)
    total += 2.0 ** (1 - i) * math.sqrt(math.log(hierarchy.covering_number(0.0)))
    return value + 9.0 * total
