"""Exact k-colourability of small conflict graphs.

With protection routes fixed, a wavelength (or coding group) assignment is
feasible exactly when the conflict graph can be coloured with that many
colours, so this gives the smallest feasible T or C without an ILP.
"""
from __future__ import annotations

import networkx as nx
import numpy as np


def is_colorable(conflict: np.ndarray, k: int) -> bool:
    n = conflict.shape[0]
    if n == 0:
        return True
    if k <= 0:
        return False
    adj = [np.flatnonzero(conflict[v]).tolist() for v in range(n)]
    colour = [-1] * n

    def pick():
        # DSatur: most distinct neighbour colours, then highest degree, then lowest index
        best, key = -1, None
        for v in range(n):
            if colour[v] >= 0:
                continue
            sat = len({colour[w] for w in adj[v] if colour[w] >= 0})
            cand = (sat, len(adj[v]), -v)
            if key is None or cand > key:
                best, key = v, cand
        return best

    def place(done: int) -> bool:
        if done == n:
            return True
        v = pick()
        used = {colour[w] for w in adj[v] if colour[w] >= 0}
        top = max(colour) + 1
        # colours above the current maximum are interchangeable; try only one of them
        for c in range(min(k, top + 1)):
            if c in used:
                continue
            colour[v] = c
            if place(done + 1):
                return True
            colour[v] = -1
        return False

    return place(0)


def min_colors(conflict: np.ndarray, upper: int | None = None) -> int:
    """Smallest k for which ``conflict`` is k-colourable, found by bisection."""
    n = conflict.shape[0]
    if n == 0:
        return 1
    lo, hi = 1, upper if upper is not None else n
    if not is_colorable(conflict, hi):
        raise ValueError(f"not colourable with {hi} colours")
    while lo < hi:
        mid = (lo + hi) // 2
        if is_colorable(conflict, mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def max_clique(conflict: np.ndarray) -> list[int]:
    """A maximum clique of the conflict graph, as sorted vertex indices."""
    g = nx.Graph()
    g.add_nodes_from(range(conflict.shape[0]))
    g.add_edges_from((int(i), int(j)) for i, j in zip(*np.nonzero(np.triu(conflict, 1))))
    clique, _ = nx.max_weight_clique(g, weight=None)
    return sorted(clique)
