"""Greedy epsilon-covers and the nested cover hierarchy.

An epsilon-cover of a set under a pseudo-distance ``d`` is a dominating set of
the threshold graph ``G[x, x'] = 1{d(x, x') <= epsilon}``. The greedy routine
repeatedly picks the uncovered point with the most uncovered neighbours
(itself included), which is within a ``1 + ln d_max(G)`` factor of the
smallest cover.

Two distance accessors are provided. :class:`DenseDistance` wraps a full
distance matrix and answers any radius. :class:`DyadicDistance` keeps, per
pair, only the finest dyadic radius ``2^(1 - i)`` the pair falls within, one
byte per pair. Every radius used by the hierarchy and by the regret bound is
such a power of two, so its threshold queries stay exact at an eighth of the
memory.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from ._fast import codes_from_kernel, greedy_codes, mirror_upper
from .gp import PosteriorState
from .kernel import se_kernel_block

__all__ = [
    "PairwiseDistance",
    "DenseDistance",
    "DyadicDistance",
    "dyadic_code",
    "ZERO_CODE",
    "CoverLevel",
    "CoverHierarchy",
    "greedy_cover",
    "max_degree",
    "build_hierarchy",
    "num_levels",
]

#: Code of pairs at distance exactly zero.
ZERO_CODE = 255


class PairwiseDistance:
    """Pairwise pseudo-distances memoized for one iteration.

    The stored values are the only ones ever compared against a threshold, so
    cover construction and cover verification agree bit for bit.
    """

    size: int

    def __len__(self):
        return self.size

    def adjacency(self, eps: float, active: np.ndarray) -> np.ndarray:
        """Boolean threshold graph ``d <= eps`` among the ``active`` points, locally indexed."""
        raise NotImplementedError

    def covered(self, members, eps: float) -> np.ndarray:
        """Mask of points within ``eps`` of at least one of ``members``."""
        raise NotImplementedError

    def min_positive(self) -> float:
        """A radius below which only zero-distance pairs are connected."""
        raise NotImplementedError

    def zero_adjacency(self) -> np.ndarray:
        """Graph of pairs at distance exactly zero, over all points."""
        raise NotImplementedError


class DenseDistance(PairwiseDistance):
    """Full symmetric distance matrix; the upper triangle is mirrored and the diagonal zeroed."""

    def __init__(self, D):
        D = np.asarray(D, dtype=float)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise ValueError("distance matrix must be square")
        D = np.triu(D, 1)
        D += D.T
        self.D = D
        self.size = D.shape[0]

    @classmethod
    def from_posterior(cls, state: PosteriorState) -> "DenseDistance":
        return cls(state.distance_block(np.arange(state.space.size)))

    def lookup(self, i: int, j: int) -> float:
        return float(self.D[i, j])

    def nearest(self, members) -> np.ndarray:
        """``d(x, T)`` for every point, ``inf`` when ``T`` is empty."""
        mask = _as_mask(members, self.size)
        if not mask.any():
            return np.full(self.size, math.inf)
        return self.D[:, mask].min(axis=1)

    def adjacency(self, eps, active):
        idx = np.flatnonzero(active)
        return self.D[np.ix_(idx, idx)] <= eps

    def covered(self, members, eps):
        return self.nearest(members) <= eps

    def min_positive(self) -> float:
        pos = self.D[self.D > 0]
        return float(pos.min()) if pos.size else math.inf

    def zero_adjacency(self):
        return self.D == 0


def dyadic_code(d) -> np.ndarray:
    """Largest ``i >= 1`` with ``d <= 2^(1 - i)``, as uint8.

    0 stands for ``d > 1`` and :data:`ZERO_CODE` for ``d == 0``. The code is
    read off the binary exponent, so ``code >= i`` is exactly
    ``d <= 2^(1 - i)`` for ``i < ZERO_CODE``.
    """
    d = np.asarray(d, dtype=float)
    m, e = np.frexp(d)
    code = np.clip(1 - e.astype(np.int64) + (m == 0.5), 0, ZERO_CODE - 1)
    code = np.where(d > 1.0, 0, np.where(d == 0.0, ZERO_CODE, code))
    return code.astype(np.uint8)


def _radius_level(eps: float) -> int:
    """Code threshold equivalent to ``d <= eps`` for a dyadic ``eps = 2^(1 - i)``."""
    m, e = math.frexp(eps)
    level = 2 - e
    if m != 0.5 or eps > 1 or level >= ZERO_CODE:
        raise ValueError(f"dyadic distances answer radii 2^-k in [2^-253, 1] only, got {eps!r}")
    return level


class DyadicDistance(PairwiseDistance):
    """Dyadic level codes of a pseudo-distance, one byte per pair.

    ``codes[x, x'] >= i`` holds exactly when ``d(x, x') <= 2^(1 - i)``.
    """

    def __init__(self, codes):
        codes = np.asarray(codes, dtype=np.uint8)
        if codes.ndim != 2 or codes.shape[0] != codes.shape[1]:
            raise ValueError("code matrix must be square")
        self.codes = codes
        self.size = codes.shape[0]

    @classmethod
    def from_matrix(cls, D) -> "DyadicDistance":
        """Codes of a distance matrix; only its strict upper triangle is read."""
        codes = np.triu(dyadic_code(D), 1)
        codes += codes.T
        np.fill_diagonal(codes, ZERO_CODE)
        return cls(codes)

    @classmethod
    def from_posterior(cls, state: PosteriorState, block: int | None = None) -> "DyadicDistance":
        """Codes of ``d_n`` for every pair, swept blockwise over the upper triangle."""
        n = state.space.size
        if block is None:
            block = max(1, min(n, 4_000_000 // n))
        space = state.space
        var = state.variance()
        V = state.cross
        dense = space.has_dense_kernel
        bw = space.kernel.bandwidth
        codes = np.empty((n, n), dtype=np.uint8)
        for start in range(0, n, block):
            stop = min(n, start + block)
            if dense:
                K = space.K[start:stop, start:]
            else:
                # self-pairs are coded directly, so the kernel diagonal is never read
                K = se_kernel_block(space.points[start:stop], space.points[start:], bw)
            cross = V[:, start:stop].T @ V[:, start:]
            codes_from_kernel(K, cross, var[start:stop], var[start:], start, start, codes[start:stop, start:])
        mirror_upper(codes)
        return cls(codes)

    def adjacency(self, eps, active):
        level = _radius_level(eps)
        idx = np.flatnonzero(active)
        if len(idx) == self.size:
            return self.codes >= level
        return self.codes[np.ix_(idx, idx)] >= level

    def best_code(self, members) -> np.ndarray:
        """``max_{t in T} codes[x, t]`` per point: the finest level at which ``T`` covers it."""
        idx = np.flatnonzero(_as_mask(members, self.size))
        out = np.zeros(self.size, dtype=np.uint8)
        for start in range(0, len(idx), 256):
            np.maximum(out, self.codes[idx[start : start + 256]].max(axis=0), out=out)
        return out

    def covered(self, members, eps):
        return self.best_code(members) >= _radius_level(eps)

    def min_positive(self) -> float:
        finite = self.codes[self.codes < ZERO_CODE]
        top = int(finite.max()) if finite.size else 0
        # every positive distance exceeds 2^(-top)
        return 2.0**-top

    def zero_adjacency(self):
        return self.codes == ZERO_CODE


def _as_mask(idx, size: int) -> np.ndarray:
    arr = np.asarray(idx)
    if arr.dtype == bool:
        if arr.shape != (size,):
            raise ValueError("boolean mask has the wrong length")
        return arr.copy()
    mask = np.zeros(size, dtype=bool)
    if arr.size:
        mask[arr.astype(int)] = True
    return mask


def _as_distance(distance) -> PairwiseDistance:
    if isinstance(distance, PairwiseDistance):
        return distance
    return DenseDistance(distance)


def _greedy(G: np.ndarray) -> np.ndarray:
    """Greedy dominating set of a symmetric boolean graph with self-loops, as a mask."""
    deg = G.sum(axis=1)
    # a point adjacent only to itself is picked whatever the order
    chosen = deg == 1
    uncovered = ~chosen
    heap = [(-int(deg[i]), int(i)) for i in np.flatnonzero(uncovered)]
    heapq.heapify(heap)
    while heap:
        key, i = heapq.heappop(heap)
        if not uncovered[i]:
            continue
        # degrees only shrink, so a stale key is requeued with its current value
        if -key != deg[i]:
            heapq.heappush(heap, (-int(deg[i]), i))
            continue
        if deg[i] <= 1:
            chosen |= uncovered
            break
        chosen[i] = True
        new = np.flatnonzero(G[i] & uncovered)
        uncovered[new] = False
        deg -= G[new].sum(axis=0)
    return chosen


def greedy_cover(candidates, distance, eps: float) -> np.ndarray:
    """Greedy epsilon-cover of ``candidates``.

    Parameters
    ----------
    candidates : index array or boolean mask
        Points to cover; cover points are drawn from the same set.
    distance : PairwiseDistance or ndarray
        Pseudo-distance accessor, or a dense distance matrix.
    eps : float
        Cover radius, must be positive.

    Returns
    -------
    ndarray of int
        Sorted indices ``T`` with ``d(x, T) <= eps`` for every candidate.

    Notes
    -----
    Degree ties go to the lowest index. Points whose only neighbour is
    themselves are taken directly, and once the best degree drops to one all
    remaining points are taken; both shortcuts give the same set as the plain
    one-point-per-step loop.
    """
    if not eps > 0:
        raise ValueError(f"epsilon must be positive, got {eps!r}")
    dist = _as_distance(distance)
    active = _as_mask(candidates, dist.size)
    if not active.any():
        return np.zeros(0, dtype=int)
    idx = np.flatnonzero(active)
    if isinstance(dist, DyadicDistance):
        return idx[greedy_codes(dist.codes, idx, _radius_level(eps))]
    return idx[_greedy(dist.adjacency(eps, active))]


def max_degree(candidates, distance, eps: float) -> int:
    """Largest closed-neighbourhood size in the threshold graph over ``candidates``."""
    dist = _as_distance(distance)
    active = _as_mask(candidates, dist.size)
    if not active.any():
        return 0
    return int(dist.adjacency(eps, active).sum(axis=1).max())


def num_levels(sigma_min: float) -> int:
    """Number of cover levels, ``ceil(1 - log2(sigma_min))``."""
    if not sigma_min > 0:
        raise ValueError(f"sigma_min must be positive, got {sigma_min!r}")
    return max(1, math.ceil(1.0 - math.log2(sigma_min)))


@dataclass
class CoverLevel:
    index: int
    radius: float
    members: np.ndarray
    newly_added: np.ndarray

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass
class CoverHierarchy:
    """Nested covers ``T_1 <= T_2 <= ...`` at radii ``2^(1 - i)``."""

    levels: list
    sigma_min: float
    distance: PairwiseDistance
    _cover_sizes: dict = field(default_factory=dict, repr=False)

    @property
    def radii(self) -> np.ndarray:
        return np.array([lv.radius for lv in self.levels])

    @property
    def sizes(self) -> np.ndarray:
        return np.array([lv.size for lv in self.levels], dtype=int)

    def covering_number(self, radius: float) -> int:
        """Greedy estimate of the covering number of the whole space at ``radius``.

        Cached per radius. ``radius == 0`` counts the groups of points at
        distance zero from each other.
        """
        radius = float(radius)
        if radius not in self._cover_sizes:
            dist = self.distance
            if isinstance(dist, DyadicDistance):
                level = ZERO_CODE if radius == 0 else _radius_level(radius)
                chosen = greedy_codes(dist.codes, np.arange(dist.size), level)
            elif radius == 0:
                chosen = _greedy(dist.zero_adjacency())
            else:
                chosen = _greedy(dist.adjacency(radius, np.ones(dist.size, dtype=bool)))
            self._cover_sizes[radius] = int(chosen.sum())
        return self._cover_sizes[radius]


def build_hierarchy(state: PosteriorState, distance: PairwiseDistance | None = None) -> CoverHierarchy:
    """Nested greedy covers of the search space under the posterior pseudo-distance.

    For ``i = 1 .. ceil(1 - log2(min sigma))`` the points farther than
    ``2^(1 - i)`` from ``T_{i-1}`` are covered greedily and the result is
    merged into ``T_i``. ``distance`` defaults to the dyadic codes of ``d_n``.
    """
    sigma_min = float(state.std().min())
    i_max = num_levels(sigma_min)
    if distance is None:
        distance = DyadicDistance.from_posterior(state)
    n = state.space.size
    members = np.zeros(n, dtype=bool)
    levels = []
    for i in range(1, i_max + 1):
        eps = 2.0 ** (1 - i)
        uncovered = ~distance.covered(members, eps)
        new = greedy_cover(uncovered, distance, eps)
        members[new] = True
        levels.append(CoverLevel(i, eps, np.flatnonzero(members), new))
    return CoverHierarchy(levels, sigma_min, distance)
