"""Pure-Python/numpy fallback for the BFS-based graph kernels.

Same contracts as the compiled extension in ``_ckern.pyx``; used when the
extension is unavailable or when CATNET_PURE_PYTHON is set.
"""

from __future__ import annotations

import numpy as np


def closeness_paths(indptr, indices):
    """All-pairs BFS summary.

    Returns (harmonic closeness per node, diameter, average path length
    over ordered reachable pairs, connected flag).  Unreachable pairs
    contribute 0 to the harmonic sum and are excluded from the average.
    """
    n = len(indptr) - 1
    harmonic = np.zeros(n)
    diameter = 0
    total = 0
    pairs = 0
    connected = n > 0
    dist = np.empty(n, dtype=np.int64)
    for s in range(n):
        dist.fill(-1)
        dist[s] = 0
        frontier = [s]
        d = 0
        while frontier:
            d += 1
            nxt = []
            for u in frontier:
                for v in indices[indptr[u] : indptr[u + 1]]:
                    if dist[v] < 0:
                        dist[v] = d
                        nxt.append(int(v))
            frontier = nxt
        reached = dist > 0
        if reached.any():
            ds = dist[reached]
            harmonic[s] = float((1.0 / ds).sum())
            diameter = max(diameter, int(ds.max()))
            total += int(ds.sum())
            pairs += int(reached.sum())
        if int(reached.sum()) != n - 1:
            connected = False
    avg = total / pairs if pairs else 0.0
    return harmonic, diameter, avg, connected


def betweenness(indptr, indices):
    """Brandes betweenness: endpoints excluded, each unordered pair once."""
    n = len(indptr) - 1
    bc = np.zeros(n)
    for s in range(n):
        stack = []
        preds: list[list[int]] = [[] for _ in range(n)]
        sigma = np.zeros(n)
        sigma[s] = 1.0
        dist = np.full(n, -1, dtype=np.int64)
        dist[s] = 0
        queue = [s]
        head = 0
        while head < len(queue):
            u = queue[head]
            head += 1
            stack.append(u)
            for v in indices[indptr[u] : indptr[u + 1]]:
                v = int(v)
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    queue.append(v)
                if dist[v] == dist[u] + 1:
                    sigma[v] += sigma[u]
                    preds[v].append(u)
        delta = np.zeros(n)
        while stack:
            w = stack.pop()
            for u in preds[w]:
                delta[u] += sigma[u] / sigma[w] * (1.0 + delta[w])
            if w != s:
                bc[w] += delta[w]
    return bc / 2.0
