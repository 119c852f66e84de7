"""Kernels on vector points and on directed graphs.

Two kernels are provided: the isotropic squared-exponential kernel for points
in R^D and the shortest-path kernel for small unweighted digraphs. Kernel
matrices produced here always have a unit diagonal and entries in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial.distance import cdist

__all__ = [
    "UNREACHABLE",
    "MAX_NODES",
    "DirectedGraph",
    "KernelSpec",
    "se_kernel",
    "se_kernel_block",
    "floyd_warshall",
    "path_length_histogram",
    "shortest_path_kernel",
    "kernel_matrix",
    "kernel_classes",
    "read_graphs",
    "write_graphs",
    "parse_graphs",
    "format_graphs",
]

#: Marker stored in shortest-path matrices for node pairs with no directed path.
UNREACHABLE = -1

#: Default node-count cap for graph search spaces (graphs with fewer than 20 nodes).
MAX_NODES = 19


@dataclass(frozen=True)
class DirectedGraph:
    """Unweighted directed graph without self-loops.

    Parameters
    ----------
    node_count : int
        Number of nodes, labelled ``0 .. node_count - 1``.
    edges : iterable of (int, int)
        Ordered node pairs ``(u, v)`` meaning an edge ``u -> v``.
    label : str, optional
        Free-form identifier, used by the graph file format.
    """

    node_count: int
    edges: frozenset = field(default_factory=frozenset)
    label: str = ""

    def __post_init__(self):
        if int(self.node_count) != self.node_count or self.node_count < 1:
            raise ValueError(f"node_count must be a positive integer, got {self.node_count!r}")
        edges = frozenset((int(u), int(v)) for u, v in self.edges)
        for u, v in edges:
            if not (0 <= u < self.node_count and 0 <= v < self.node_count):
                raise ValueError(f"edge ({u}, {v}) out of range for {self.node_count} nodes")
            if u == v:
                raise ValueError(f"self-loop on node {u} is not allowed")
        object.__setattr__(self, "node_count", int(self.node_count))
        object.__setattr__(self, "edges", edges)

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.node_count, self.node_count), dtype=bool)
        for u, v in self.edges:
            adj[u, v] = True
        return adj

    @cached_property
    def sp_matrix(self) -> np.ndarray:
        """All-pairs shortest-path lengths, cached on first access."""
        return floyd_warshall(self)

    @cached_property
    def histogram(self) -> np.ndarray:
        return path_length_histogram(self)

    def __hash__(self):
        return hash((self.node_count, self.edges))

    def __eq__(self, other):
        if not isinstance(other, DirectedGraph):
            return NotImplemented
        return self.node_count == other.node_count and self.edges == other.edges


@dataclass(frozen=True)
class KernelSpec:
    """Which kernel to use and its parameter.

    ``kind`` is ``"se"`` (squared exponential, needs ``bandwidth``) or
    ``"shortest-path"``.
    """

    kind: str = "se"
    bandwidth: float = 1.0

    def __post_init__(self):
        if self.kind not in ("se", "shortest-path"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if not (self.bandwidth > 0 and np.isfinite(self.bandwidth)):
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth!r}")


def se_kernel(x, x2, bandwidth: float = 1.0) -> float:
    """Squared-exponential kernel ``exp(-|x - x2|^2 / (2 bandwidth^2))``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x.shape != x2.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x2.shape}")
    if not bandwidth > 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth!r}")
    sq = float(np.sum((x - x2) ** 2))
    return float(np.exp(-sq / (2.0 * bandwidth**2)))


def se_kernel_block(A: np.ndarray, B: np.ndarray, bandwidth: float = 1.0) -> np.ndarray:
    """SE kernel between the rows of ``A`` and the rows of ``B``.

    Squared distances are taken coordinate-wise (no Gram-matrix expansion), so
    ``se_kernel_block(A, B)`` is exactly the transpose of ``se_kernel_block(B, A)``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    out = cdist(A, B, "sqeuclidean")
    out *= -0.5 / bandwidth**2
    np.exp(out, out=out)
    return out


def floyd_warshall(g: DirectedGraph) -> np.ndarray:
    """All-pairs shortest-path lengths on unit edge weights.

    Returns an integer matrix whose ``(u, v)`` entry is the minimum number of
    edges on a directed path ``u -> v``, ``0`` on the diagonal and
    :data:`UNREACHABLE` where no path exists.
    """
    n = g.node_count
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for u, v in g.edges:
        dist[u, v] = 1.0
    for k in range(n):
        np.minimum(dist, dist[:, k, None] + dist[None, k, :], out=dist)
    out = np.full((n, n), UNREACHABLE, dtype=np.int64)
    finite = np.isfinite(dist)
    out[finite] = dist[finite].astype(np.int64)
    return out


def path_length_histogram(g: DirectedGraph, length: int | None = None) -> np.ndarray:
    """Counts of reachable ordered pairs ``u != v`` by shortest-path length.

    Entry ``l`` holds the number of pairs at distance ``l``; entry 0 is always 0.
    """
    sp = g.sp_matrix
    vals = sp[(sp != UNREACHABLE) & ~np.eye(g.node_count, dtype=bool)]
    size = max(g.node_count, 1) if length is None else length
    return np.bincount(vals, minlength=size).astype(np.int64)


def shortest_path_kernel(g: DirectedGraph, g2: DirectedGraph) -> int:
    """Raw shortest-path kernel with a delta base kernel on path lengths.

    Counts the pairs ``((u, v), (u2, v2))`` of reachable node pairs of ``g``
    and ``g2`` whose shortest-path lengths are equal. Written as a histogram
    inner product, which keeps the arithmetic integral.
    """
    h, h2 = g.histogram, g2.histogram
    m = min(len(h), len(h2))
    return int(np.dot(h[:m], h2[:m]))


def _histogram_matrix(graphs: Sequence[DirectedGraph]) -> np.ndarray:
    width = max(g.node_count for g in graphs)
    H = np.zeros((len(graphs), width), dtype=np.int64)
    for i, g in enumerate(graphs):
        h = g.histogram
        H[i, : len(h)] = h
    return H


def kernel_matrix(points, spec: KernelSpec) -> np.ndarray:
    """Prior kernel matrix over a list of candidates.

    Parameters
    ----------
    points : array of shape (N, D) or sequence of DirectedGraph
        The candidates.
    spec : KernelSpec
        ``"se"`` for vector points, ``"shortest-path"`` for graphs. The graph
        kernel is normalized to ``K[i, j] / sqrt(K[i, i] K[j, j])``.

    Returns
    -------
    K : ndarray of shape (N, N)
        Symmetric, unit diagonal, entries in [0, 1].
    """
    if len(points) == 0:
        raise ValueError("empty candidate list")
    if spec.kind == "se":
        X = np.asarray(points, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        K = se_kernel_block(X, X, spec.bandwidth)
        K = np.triu(K) + np.triu(K, 1).T
    else:
        if not all(isinstance(g, DirectedGraph) for g in points):
            raise TypeError("shortest-path kernel needs DirectedGraph candidates")
        H = _histogram_matrix(points)
        raw = H @ H.T
        diag = np.diag(raw).copy()
        bad = np.flatnonzero(diag == 0)
        if bad.size:
            raise ValueError(
                f"graph at index {bad[0]} has no reachable node pair; "
                "its kernel cannot be normalized"
            )
        # the integer product keeps proportional histograms at exactly 1
        K = raw / np.sqrt(np.outer(diag, diag).astype(float))
        np.clip(K, 0.0, 1.0, out=K)
    np.fill_diagonal(K, 1.0)
    return K


def kernel_classes(graphs: Sequence[DirectedGraph]) -> tuple[np.ndarray, np.ndarray]:
    """Group graphs whose normalized shortest-path kernel rows coincide.

    Two graphs have identical rows exactly when their path-length histograms
    are proportional, so each histogram is reduced by the gcd of its entries.

    Returns
    -------
    reps : ndarray of int
        Index of the first graph of each class, increasing.
    labels : ndarray of int
        Class number of every graph, so ``reps[labels[i]]`` represents graph ``i``.
    """
    H = _histogram_matrix(graphs)
    g = np.gcd.reduce(H, axis=1)
    g[g == 0] = 1
    _, first, inverse = np.unique(H // g[:, None], axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    # renumber classes by first appearance
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return first[order], rank[inverse]


# -- graph block file format -------------------------------------------------


def parse_graphs(text: str, max_nodes: int | None = MAX_NODES) -> list[DirectedGraph]:
    """Parse graph blocks: ``graph <id> <node_count>`` followed by ``u v`` edge lines."""
    graphs = []
    label, count, edges = None, 0, []

    def flush():
        if label is not None:
            graphs.append(DirectedGraph(count, frozenset(edges), label=label))

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            if parts[0] == "graph":
                if len(parts) != 3:
                    raise ValueError("expected 'graph <id> <node_count>'")
                flush()
                label, count, edges = parts[1], int(parts[2]), []
                if max_nodes is not None and count > max_nodes:
                    raise ValueError(f"{count} nodes exceeds the cap of {max_nodes}")
            else:
                if label is None:
                    raise ValueError("edge line before any 'graph' header")
                if len(parts) != 2:
                    raise ValueError("expected an edge line 'u v'")
                edges.append((int(parts[0]), int(parts[1])))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    try:
        flush()
    except ValueError as exc:
        raise ValueError(f"graph {label!r}: {exc}") from None
    return graphs


def format_graphs(graphs: Iterable[DirectedGraph]) -> str:
    blocks = []
    for i, g in enumerate(graphs):
        label = g.label or str(i)
        lines = [f"graph {label} {g.node_count}"]
        lines += [f"{u} {v}" for u, v in sorted(g.edges)]
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def read_graphs(path, max_nodes: int | None = MAX_NODES) -> list[DirectedGraph]:
    return parse_graphs(Path(path).read_text(), max_nodes=max_nodes)


def write_graphs(path, graphs: Iterable[DirectedGraph]) -> None:
    Path(path).write_text(format_graphs(graphs))
