import math

import numpy as np
import pytest

from manyheom.hierarchy import HierarchyLayout, index_count


def test_markovian_closure_set():
    lay = HierarchyLayout(1, 1)
    assert lay.size == 3
    tuples = [tuple(t) for t in lay.indices]
    assert tuples[0] == (0, 0)
    assert set(tuples) == {(0, 0), (1, 0), (0, 1)}


def test_counts():
    assert HierarchyLayout(1, 2).size == 6
    assert HierarchyLayout(5, 3).size == math.comb(13, 3) == 286
    for k in range(1, 7):
        for depth in range(0, 7):
            assert index_count(k, depth) == len(
                HierarchyLayout(k, depth).indices
            )


def test_count_guard():
    with pytest.raises(ValueError):
        HierarchyLayout(20, 12)


def test_neighbors_basic():
    lay = HierarchyLayout(1, 2)
    pos00 = lay.offset([0], [0])
    pos10 = lay.offset([1], [0])
    assert lay.neighbor(pos00, 0, "n", +1) == pos10
    # terminator: raising above the cap is absent
    pos20 = lay.offset([2], [0])
    assert lay.neighbor(pos20, 0, "n", +1) is None
    pos11 = lay.offset([1], [1])
    assert lay.neighbor(pos11, 0, "m", -1) == pos10
    assert lay.neighbor(pos00, 0, "m", -1) is None


def test_neighbor_roundtrip():
    lay = HierarchyLayout(3, 4)
    for pos in range(lay.size):
        for slot in range(3):
            for which in ("n", "m"):
                up = lay.neighbor(pos, slot, which, +1)
                if up is not None:
                    assert lay.neighbor(up, slot, which, -1) == pos
                down = lay.neighbor(pos, slot, which, -1)
                if down is not None:
                    assert lay.neighbor(down, slot, which, +1) == pos


def test_conj_partner():
    lay = HierarchyLayout(2, 3)
    for pos in range(lay.size):
        n, m = lay.index(pos)
        pn, pm = lay.index(lay.conj_partner[pos])
        assert np.array_equal(pn, m) and np.array_equal(pm, n)
    assert np.array_equal(lay.conj_partner[lay.conj_partner], np.arange(lay.size))


def test_offset_bijective():
    lay = HierarchyLayout(2, 4)
    seen = set()
    for pos in range(lay.size):
        n, m = lay.index(pos)
        assert lay.offset(n, m) == pos
        seen.add(tuple(n) + tuple(m))
    assert len(seen) == lay.size
