import itertools

import numpy as np
from hypothesis import given, settings, strategies as st

from codedpath.coloring import is_colorable, max_clique, min_colors


def _random_conflict(seed, n, p):
    rng = np.random.default_rng(seed)
    a = np.triu((rng.random((n, n)) < p).astype(np.int8), 1)
    return a + a.T


def _colorable_brute(conflict, k):
    n = conflict.shape[0]
    edges = list(zip(*np.nonzero(np.triu(conflict, 1))))
    return any(all(c[i] != c[j] for i, j in edges) for c in itertools.product(range(k), repeat=n))


def _clique_brute(conflict):
    n = conflict.shape[0]
    for size in range(n, 0, -1):
        for sub in itertools.combinations(range(n), size):
            if all(conflict[i, j] for i, j in itertools.combinations(sub, 2)):
                return size
    return 0


def test_small_cases():
    empty = np.zeros((0, 0), dtype=np.int8)
    assert is_colorable(empty, 0) and min_colors(empty) <= 1
    tri = np.ones((3, 3), dtype=np.int8) - np.eye(3, dtype=np.int8)
    assert not is_colorable(tri, 2) and is_colorable(tri, 3)
    assert min_colors(tri) == 3 and max_clique(tri) == [0, 1, 2]
    assert max_clique(np.zeros((2, 2), dtype=np.int8)) in ([0], [1])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 7), st.floats(0.1, 0.9))
def test_against_brute_force(seed, n, p):
    conflict = _random_conflict(seed, n, p)
    k = min_colors(conflict)
    assert _colorable_brute(conflict, k)
    assert k == 1 or not _colorable_brute(conflict, k - 1)
    for j in range(1, n + 1):
        assert is_colorable(conflict, j) == (j >= k)
    q = max_clique(conflict)
    assert len(q) == _clique_brute(conflict) <= k
    assert all(conflict[i, j] for i, j in itertools.combinations(q, 2))
