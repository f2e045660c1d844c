"""Degree-degree correlation across edges and the k_nn(k) curve."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..graph import HomoView


@dataclass
class AssortativityResult:
    """Pearson correlation of endpoint degrees over all directed edge
    orientations.  ``pearson_r`` is None (flagged) when either endpoint
    degree sequence has zero variance, e.g. on a regular graph."""

    pearson_r: float | None
    degenerate: bool
    knn_curve: list[tuple[int, float]]  # (degree class k, mean neighbor degree)


def assortativity(view: HomoView) -> AssortativityResult:
    if view.n_edges < 2:
        raise ValueError("assortativity needs at least 2 edges")
    pairs = view.edge_pairs()
    deg = view.degrees.astype(float)
    x = np.concatenate([deg[pairs[:, 0]], deg[pairs[:, 1]]])
    y = np.concatenate([deg[pairs[:, 1]], deg[pairs[:, 0]]])
    if x.std() == 0 or y.std() == 0:
        r = None
        degenerate = True
    else:
        r = float(np.corrcoef(x, y)[0, 1])
        degenerate = False

    # mean neighbor degree per node, then averaged within each degree class
    avg_nbr = np.zeros(view.n_nodes)
    for u, nbrs in enumerate(view.neighbors):
        if len(nbrs):
            avg_nbr[u] = deg[nbrs].mean()
    curve = []
    for k in np.unique(view.degrees):
        if k == 0:
            continue
        members = view.degrees == k
        curve.append((int(k), float(avg_nbr[members].mean())))
    return AssortativityResult(pearson_r=r, degenerate=degenerate, knn_curve=curve)
