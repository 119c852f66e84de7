"""Compiled inner loops for the dyadic distance table."""

from __future__ import annotations

import heapq
import math

import numpy as np
from numba import njit

ZERO_CODE = 255


def _square_thresholds() -> np.ndarray:
    """``T[i]`` = largest double whose rounded square root is ``<= 2^(1 - i)``, for ``1 <= i < 255``."""
    thr = np.zeros(ZERO_CODE + 1)
    for i in range(1, ZERO_CODE):
        r = 2.0 ** (1 - i)
        x = r * r
        while np.sqrt(np.nextafter(x, np.inf)) <= r:
            x = np.nextafter(x, np.inf)
        thr[i] = x
    return thr


SQUARE_THRESHOLDS = _square_thresholds()


@njit(cache=True)
def _codes_from_squares(sq, thr, out):
    """Dyadic codes of ``sqrt(max(sq, 0))`` for one row, by threshold comparison on ``sq``."""
    bits = sq.view(np.int64)
    for b in range(sq.shape[0]):
        s = sq[b]
        if not s > 0.0:
            out[b] = ZERO_CODE
        elif s > thr[1]:
            out[b] = 0
        else:
            # the exponent gives the code up to one step either way
            e = ((bits[b] >> 52) & 0x7FF) - 1023
            g = min(max(1 - e // 2, 1), ZERO_CODE - 1)
            while g < ZERO_CODE - 1 and s <= thr[g + 1]:
                g += 1
            while g > 1 and s > thr[g]:
                g -= 1
            out[b] = g


@njit(cache=True)
def codes_from_kernel(K, cross, var_rows, var_cols, row0, col0, out):
    """Dyadic codes of ``d = sqrt(max(var_r + var_c - 2 (K - cross), 0))``.

    Pairs with equal global index get ``ZERO_CODE``. ``cross`` may have zero
    rows, meaning no observations yet.
    """
    thr = SQUARE_THRESHOLDS
    has_cross = cross.shape[0] > 0
    buf = np.empty(K.shape[1])
    for a in range(K.shape[0]):
        for b in range(K.shape[1]):
            cov = K[a, b] - cross[a, b] if has_cross else K[a, b]
            buf[b] = cov * -2.0 + var_rows[a] + var_cols[b]
        _codes_from_squares(buf, thr, out[a])
        self_col = row0 + a - col0
        if 0 <= self_col < K.shape[1]:
            out[a, self_col] = ZERO_CODE


@njit(cache=True)
def mirror_upper(codes, tile=64):
    """Copy the strict upper triangle onto the lower one, tile by tile."""
    n = codes.shape[0]
    for i0 in range(0, n, tile):
        for j0 in range(0, i0 + 1, tile):
            for i in range(i0, min(i0 + tile, n)):
                for j in range(j0, min(j0 + tile, i)):
                    codes[i, j] = codes[j, i]


@njit(cache=True)
def _greedy_local(G, level):
    m = G.shape[0]
    deg = np.zeros(m, dtype=np.int64)
    for a in range(m):
        row = G[a]
        c = 0
        for b in range(m):
            c += row[b] >= level
        deg[a] = c
    chosen = deg == 1
    uncovered = ~chosen
    heap = [(np.int64(0), np.int64(0)) for _ in range(0)]
    for a in range(m):
        if uncovered[a]:
            heap.append((-deg[a], np.int64(a)))
    heapq.heapify(heap)
    while len(heap) > 0:
        key, i = heapq.heappop(heap)
        if not uncovered[i]:
            continue
        # degrees only shrink, so a stale key is requeued with its current value
        if -key != deg[i]:
            heapq.heappush(heap, (-deg[i], i))
            continue
        if deg[i] <= 1:
            for a in range(m):
                if uncovered[a]:
                    chosen[a] = True
            break
        chosen[i] = True
        row_i = G[i]
        for j in range(m):
            if uncovered[j] and row_i[j] >= level:
                uncovered[j] = False
                row_j = G[j]
                for b in range(m):
                    deg[b] -= row_j[b] >= level
    return chosen


@njit(cache=True)
def greedy_codes(codes, idx, level):
    """Greedy dominating set of ``codes[idx][:, idx] >= level``; returns a mask over ``idx``.

    Matches the numpy greedy exactly: the lowest index wins degree ties,
    isolated points are taken up front and the rest is taken once the best
    degree is one. ``idx`` must be sorted and unique.
    """
    m = idx.shape[0]
    if m == codes.shape[0]:
        return _greedy_local(codes, level)
    G = np.empty((m, m), dtype=np.uint8)
    for a in range(m):
        row = codes[idx[a]]
        for b in range(m):
            G[a, b] = row[idx[b]]
    return _greedy_local(G, level)
