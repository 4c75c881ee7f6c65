"""Multi-index bookkeeping for the hierarchy of auxiliary matrices.

An index is a pair of K-vectors (n, m) of nonnegative integers with
|n| + |m| <= depth.  Index arithmetic (raising/lowering single slots) is
precomputed into flat neighbor tables used by the solvers; a move leaving
the truncated set returns position -1, which solvers read as the zero
matrix (the truncation terminator).
"""

from __future__ import annotations

import math

import numpy as np

MAX_INDEX_COUNT = 2_000_000


def index_count(k, depth):
    """Number of retained indices: C(2K + depth, depth) (stars and bars)."""
    return math.comb(2 * k + depth, depth)


class HierarchyLayout:
    """Bijection between hierarchy multi-indices and flat storage offsets.

    Indices are ordered lexicographically over the concatenated tuple
    (n_1..n_K, m_1..m_K); the physical index (0, 0) is therefore first.
    """

    def __init__(self, k, depth, max_count=MAX_INDEX_COUNT):
        if k < 1:
            raise ValueError("slot count K must be >= 1")
        if depth < 0:
            raise ValueError("depth must be >= 0")
        count = index_count(k, depth)
        if count > max_count:
            raise ValueError(
                f"hierarchy would hold {count} indices, above the cap {max_count}"
            )
        self.k = k
        self.depth = depth
        self.indices = np.array(
            sorted(_tuples_with_sum_at_most(2 * k, depth)), dtype=np.int64
        )
        self.size = len(self.indices)
        assert self.size == count
        self._offset = {tuple(t): i for i, t in enumerate(self.indices)}
        # neighbor tables: [2K, size]; slot j of n is column j, slot j of m
        # is column K + j; -1 marks moves leaving the retained set
        up = np.full((2 * k, self.size), -1, dtype=np.int64)
        down = np.full((2 * k, self.size), -1, dtype=np.int64)
        for i, t in enumerate(self.indices):
            for j in range(2 * k):
                tt = list(t)
                tt[j] += 1
                up[j, i] = self._offset.get(tuple(tt), -1)
                if t[j] > 0:
                    tt[j] -= 2
                    down[j, i] = self._offset[tuple(tt)]
        self.up = up
        self.down = down
        # position of the conjugate partner (n, m) -> (m, n)
        swap = np.empty(self.size, dtype=np.int64)
        for i, t in enumerate(self.indices):
            swap[i] = self._offset[tuple(np.concatenate([t[k:], t[:k]]))]
        self.conj_partner = swap

    def offset(self, n, m):
        key = tuple(int(x) for x in n) + tuple(int(x) for x in m)
        if len(key) != 2 * self.k:
            raise ValueError(f"index vectors must have length K = {self.k}")
        pos = self._offset.get(key)
        if pos is None:
            raise KeyError(f"index {key} outside the depth-{self.depth} cap")
        return pos

    def index(self, pos):
        t = self.indices[pos]
        return t[: self.k].copy(), t[self.k :].copy()

    def neighbor(self, pos, slot, which, direction):
        """Offset of the index shifted by +-1 in slot ``slot`` of n or m.

        Returns None when the move leaves the retained set (out-of-cap
        neighbors are the zero matrix) or would go negative.
        """
        if not 0 <= slot < self.k:
            raise ValueError(f"slot {slot} outside 0..{self.k - 1}")
        if which not in ("n", "m"):
            raise ValueError("which must be 'n' or 'm'")
        col = slot if which == "n" else self.k + slot
        table = self.up if direction == +1 else self.down
        tgt = table[col, pos]
        return None if tgt < 0 else int(tgt)

    @property
    def totals(self):
        return self.indices.sum(axis=1)


def _tuples_with_sum_at_most(length, cap):
    out = []
    cur = [0] * length

    def rec(i, remaining):
        if i == length:
            out.append(tuple(cur))
            return
        for v in range(remaining + 1):
            cur[i] = v
            rec(i + 1, remaining - v)
        cur[i] = 0

    rec(0, cap)
    return out
