"""Gaussian-process posterior over a finite search space.

The posterior is maintained incrementally. With ``L`` the lower Cholesky
factor of ``C_n = K_n + noise_var * I`` we keep

* ``V = L^{-1} K[X_n, :]``, one row per observation and one column per
  candidate, and
* ``a = L^{-1} Y_n``,

so that ``mu_n = V^T a``, ``k_n(x, x') = k(x, x') - V[:, x] . V[:, x']`` and
``sigma_n^2(x) = k(x, x) - |V[:, x]|^2``. Appending an observation borders
``L`` with one row and appends one row to ``V``; nothing is refactorized.
"""

from __future__ import annotations

import copy
import math

import numpy as np
from scipy import linalg

from .kernel import DirectedGraph, KernelSpec, kernel_matrix, se_kernel_block

__all__ = [
    "NumericalError",
    "SearchSpace",
    "PosteriorState",
    "init_posterior",
    "extend",
    "posterior_summary",
    "pseudo_distance",
    "sample_prior",
    "log_marginal_likelihood",
    "select_bandwidth",
    "BANDWIDTH_GRID",
]

#: Bandwidth candidates for marginal-likelihood selection.
BANDWIDTH_GRID = np.logspace(-1, 1, 15)

# vector spaces up to this size keep a dense prior kernel matrix in memory
DENSE_KERNEL_LIMIT = 12_000


class NumericalError(np.linalg.LinAlgError):
    """A factorization broke down (nonpositive pivot)."""


class SearchSpace:
    """Finite indexed set of candidates with a unit-diagonal prior kernel.

    Parameters
    ----------
    points : array of shape (N, D) or sequence of DirectedGraph
        The candidates.
    kernel : KernelSpec
        Prior kernel. Graph candidates require ``kind="shortest-path"``.
    K : ndarray, optional
        Precomputed kernel matrix. Computed on demand otherwise.

    Notes
    -----
    Large vector spaces never materialize ``K``; kernel blocks are evaluated
    from the coordinates when requested.
    """

    def __init__(self, points, kernel: KernelSpec | None = None, K: np.ndarray | None = None):
        if len(points) == 0:
            raise ValueError("a search space needs at least one candidate")
        self.is_graph = isinstance(points[0], DirectedGraph)
        if kernel is None:
            kernel = KernelSpec("shortest-path" if self.is_graph else "se")
        if self.is_graph:
            if kernel.kind != "shortest-path":
                raise ValueError("graph candidates need the shortest-path kernel")
            self.points = list(points)
        else:
            if kernel.kind != "se":
                raise ValueError("vector candidates need the SE kernel")
            pts = np.asarray(points, dtype=float)
            if pts.ndim == 1:
                pts = pts[:, None]
            if pts.ndim != 2 or not np.all(np.isfinite(pts)):
                raise ValueError("vector candidates must be a finite (N, D) array")
            self.points = pts
        self.kernel = kernel
        self._K = None
        if K is not None:
            K = np.asarray(K, dtype=float)
            if K.shape != (self.size, self.size):
                raise ValueError(f"kernel matrix shape {K.shape} does not match {self.size} points")
            self._K = K
        elif self.is_graph:
            self._K = kernel_matrix(self.points, kernel)

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def has_dense_kernel(self) -> bool:
        return self._K is not None or self.size <= DENSE_KERNEL_LIMIT

    @property
    def K(self) -> np.ndarray:
        """Full prior kernel matrix (materialized and cached on first use)."""
        if self._K is None:
            self._K = kernel_matrix(self.points, self.kernel)
        return self._K

    def block(self, rows, cols=None) -> np.ndarray:
        """Prior kernel values ``K[rows][:, cols]`` (``cols=None`` means all)."""
        rows = np.atleast_1d(rows)
        if self._K is not None or self.has_dense_kernel:
            K = self.K
            return K[rows] if cols is None else K[np.ix_(rows, np.atleast_1d(cols))]
        B = self.points if cols is None else self.points[np.atleast_1d(cols)]
        out = se_kernel_block(self.points[rows], B, self.kernel.bandwidth)
        if cols is None:
            out[np.arange(len(rows)), rows] = 1.0
        else:
            out[rows[:, None] == np.atleast_1d(cols)[None, :]] = 1.0
        return out

    def with_kernel(self, kernel: KernelSpec) -> "SearchSpace":
        return SearchSpace(self.points, kernel)

    def __repr__(self):
        kind = "graphs" if self.is_graph else f"{self.points.shape[1]}-d points"
        return f"SearchSpace({self.size} {kind}, {self.kernel})"


class PosteriorState:
    """GP posterior after ``n`` noisy observations.

    Use :func:`init_posterior` to create one and :meth:`extend` to add data.
    Only :meth:`extend` mutates the state; use :meth:`copy` to branch.
    """

    def __init__(self, space: SearchSpace, noise_var: float):
        if not (noise_var > 0 and math.isfinite(noise_var)):
            raise ValueError(f"noise_var must be positive, got {noise_var!r}")
        self.space = space
        self.noise_var = float(noise_var)
        self.queried: list[int] = []
        self.observations: list[float] = []
        cap = 16
        self._chol = np.zeros((cap, cap))
        self._cross = np.zeros((cap, space.size))
        self._alpha = np.zeros(cap)
        self._mu = np.zeros(space.size)
        self._var = np.ones(space.size)

    @property
    def n(self) -> int:
        return len(self.queried)

    @property
    def chol(self) -> np.ndarray:
        """Lower Cholesky factor of ``C_n``."""
        return self._chol[: self.n, : self.n]

    @property
    def cross(self) -> np.ndarray:
        """``L^{-1} K[X_n, :]``, shape (n, |X|)."""
        return self._cross[: self.n]

    @property
    def alpha(self) -> np.ndarray:
        """``C_n^{-1} Y_n``."""
        n = self.n
        if n == 0:
            return np.zeros(0)
        return linalg.solve_triangular(self.chol, self._alpha[:n], lower=True, trans="T")

    def _grow(self):
        cap = 2 * self._chol.shape[0]
        chol = np.zeros((cap, cap))
        chol[: self.n, : self.n] = self.chol
        cross = np.zeros((cap, self.space.size))
        cross[: self.n] = self.cross
        alpha = np.zeros(cap)
        alpha[: self.n] = self._alpha[: self.n]
        self._chol, self._cross, self._alpha = chol, cross, alpha

    def extend(self, x: int, y: float) -> "PosteriorState":
        """Condition on observation ``y`` at candidate index ``x`` (in place)."""
        x = int(x)
        if not 0 <= x < self.space.size:
            raise IndexError(f"candidate index {x} out of range")
        y = float(y)
        if not math.isfinite(y):
            raise ValueError(f"observation must be finite, got {y!r}")
        n = self.n
        if n == self._chol.shape[0]:
            self._grow()
        # L^{-1} k_n(x) is already stored as a column of the cross term
        row = self._cross[:n, x]
        pivot_sq = 1.0 + self.noise_var - row @ row
        if not pivot_sq > 0:
            raise NumericalError(f"Cholesky breakdown: nonpositive pivot {pivot_sq!r}")
        pivot = math.sqrt(pivot_sq)
        self._chol[n, :n] = row
        self._chol[n, n] = pivot
        new = self.space.block([x])[0]
        if n:
            new = new - row @ self._cross[:n]
        new /= pivot
        a = (y - row @ self._alpha[:n]) / pivot
        self._cross[n] = new
        self._alpha[n] = a
        self._mu += a * new
        self._var -= new * new
        self.queried.append(x)
        self.observations.append(y)
        return self

    def copy(self) -> "PosteriorState":
        return copy.deepcopy(self)

    def __deepcopy__(self, memo):
        other = PosteriorState.__new__(PosteriorState)
        other.space = self.space
        other.noise_var = self.noise_var
        other.queried = list(self.queried)
        other.observations = list(self.observations)
        for name in ("_chol", "_cross", "_alpha", "_mu", "_var"):
            setattr(other, name, getattr(self, name).copy())
        return other

    # -- read access -------------------------------------------------------

    def mean(self) -> np.ndarray:
        return self._mu.copy()

    def variance(self) -> np.ndarray:
        """Posterior variance, clamped to ``[0, k(x, x)] = [0, 1]``."""
        return np.clip(self._var, 0.0, 1.0)

    def std(self) -> np.ndarray:
        return np.sqrt(self.variance())

    def covariance(self, x, x2) -> np.ndarray:
        """Posterior covariance block ``k_n(x, x2)`` for index arrays."""
        x = np.atleast_1d(x)
        x2 = np.atleast_1d(x2)
        V = self.cross
        return self.space.block(x, x2) - V[:, x].T @ V[:, x2]

    def distance_block(self, rows, cols=None) -> np.ndarray:
        """Pseudo-distances ``d_n`` between ``rows`` and ``cols`` (all if None).

        Uses the clamped variances; the radicand is clamped at 0 and exact
        self-pairs are set to 0.
        """
        rows = np.atleast_1d(rows)
        V = self.cross
        var = self.variance()
        if cols is None:
            K = self.space.block(rows)
            cross = V[:, rows].T @ V if self.n else 0.0
            var_cols = var
            same = rows[:, None] == np.arange(self.space.size)[None, :]
        else:
            cols = np.atleast_1d(cols)
            K = self.space.block(rows, cols)
            cross = V[:, rows].T @ V[:, cols] if self.n else 0.0
            var_cols = var[cols]
            same = rows[:, None] == cols[None, :]
        sq = K
        sq -= cross
        sq *= -2.0
        sq += var[rows][:, None]
        sq += var_cols[None, :]
        np.maximum(sq, 0.0, out=sq)
        np.sqrt(sq, out=sq)
        sq[same] = 0.0
        return sq

    def pseudo_distance(self, x, x2):
        """``d_n(x, x2) = sqrt(sigma^2(x) - 2 k_n(x, x2) + sigma^2(x2))``."""
        scalar = np.isscalar(x) and np.isscalar(x2)
        x, x2 = np.broadcast_arrays(np.atleast_1d(x), np.atleast_1d(x2))
        V = self.cross
        var = self.variance()
        K = self._prior_pairs(x, x2)
        cov = K - np.einsum("ij,ij->j", V[:, x], V[:, x2]) if self.n else K
        sq = np.maximum(var[x] - 2.0 * cov + var[x2], 0.0)
        d = np.sqrt(sq)
        d[x == x2] = 0.0
        return float(d[0]) if scalar else d

    def _prior_pairs(self, x, x2) -> np.ndarray:
        if self.space.has_dense_kernel:
            return self.space.K[x, x2]
        pts = self.space.points
        sq = np.sum((pts[x] - pts[x2]) ** 2, axis=1)
        return np.exp(-sq / (2.0 * self.space.kernel.bandwidth**2))

    def __repr__(self):
        return f"PosteriorState(n={self.n}, noise_var={self.noise_var}, space={self.space!r})"


def init_posterior(space: SearchSpace, noise_var: float) -> PosteriorState:
    """Centered prior: zero mean, unit variance everywhere."""
    return PosteriorState(space, noise_var)


def extend(state: PosteriorState, x: int, y: float) -> PosteriorState:
    return state.extend(x, y)


def posterior_summary(state: PosteriorState) -> tuple[np.ndarray, np.ndarray]:
    """Per-candidate posterior mean and standard deviation."""
    return state.mean(), state.std()


def pseudo_distance(state: PosteriorState, x, x2):
    return state.pseudo_distance(x, x2)


def sample_prior(space: SearchSpace, rng: np.random.Generator, jitter: float = 1e-10) -> np.ndarray:
    """Draw ``f ~ N(0, K)`` as ``L z`` with ``L = chol(K + jitter I)``.

    This costs ``O(|X|^3)``.
    """
    if not jitter > 0:
        raise ValueError(f"jitter must be positive, got {jitter!r}")
    A = space.K + jitter * np.eye(space.size)
    try:
        L = linalg.cholesky(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"prior kernel matrix is not factorizable with jitter {jitter:g} ({exc}); "
            "try a larger jitter"
        ) from None
    z = rng.standard_normal(space.size)
    return L @ z


def log_marginal_likelihood(space: SearchSpace, queried, observations, noise_var: float) -> float:
    """Gaussian log evidence ``log N(Y | 0, K_n + noise_var I)``."""
    queried = np.asarray(queried, dtype=int)
    y = np.asarray(observations, dtype=float)
    n = len(queried)
    if n < 1 or y.shape != (n,):
        raise ValueError("need at least one observation and matching lengths")
    C = space.block(queried, queried) + noise_var * np.eye(n)
    try:
        L = linalg.cholesky(C, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"C_n is not factorizable: {exc}") from None
    a = linalg.solve_triangular(L, y, lower=True)
    return float(-0.5 * a @ a - np.log(np.diag(L)).sum() - 0.5 * n * math.log(2 * math.pi))


def select_bandwidth(space: SearchSpace, queried, observations, noise_var: float, grid=BANDWIDTH_GRID) -> float:
    """SE bandwidth from ``grid`` maximizing the marginal likelihood (first on ties)."""
    if space.is_graph:
        raise ValueError("bandwidth selection applies to SE vector spaces only")
    queried = np.asarray(queried, dtype=int)
    sub = SearchSpace(space.points[queried], space.kernel)
    local = np.arange(len(queried))
    scores = [
        log_marginal_likelihood(sub.with_kernel(KernelSpec("se", float(b))), local, observations, noise_var)
        for b in grid
    ]
    return float(grid[int(np.argmax(scores))])
