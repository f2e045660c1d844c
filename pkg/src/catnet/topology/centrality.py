"""The six node-importance measures used as topological features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..graph import HeteroGraph, HomoView, NodeKind

#: column order of the topological feature block
CENTRALITY_COLUMNS = [
    "degree_centrality",
    "closeness_centrality",
    "betweenness_centrality",
    "eigenvector_centrality",
    "katz_centrality",
    "clustering_coefficient",
]


class ConvergenceError(Exception):
    pass


def degree_centrality(view: HomoView) -> np.ndarray:
    return view.degrees.astype(float)


def closeness_centrality(view: HomoView) -> np.ndarray:
    """Harmonic closeness: sum of 1/dist over reachable nodes."""
    harmonic, _, _, _ = kernels.closeness_paths(view.indptr, view.indices)
    return harmonic


def betweenness_centrality(view: HomoView) -> np.ndarray:
    """Shortest-path pair fractions, endpoints excluded, unnormalized."""
    return kernels.betweenness(view.indptr, view.indices)


def eigenvector_centrality(
    view: HomoView, tol: float = 1e-10, max_iter: int = 100000
) -> np.ndarray:
    """Power iteration to the unit-norm, nonnegative dominant eigenvector."""
    n = view.n_nodes
    if view.n_edges == 0:
        return np.full(n, 1.0 / np.sqrt(n)) if n else np.zeros(0)
    x = np.full(n, 1.0 / np.sqrt(n))
    for _ in range(max_iter):
        # shifted iteration on A + I: same Perron vector, and the shift
        # breaks the +-lambda tie of bipartite graphs
        y = _adj_mult(view, x) + x
        norm = np.linalg.norm(y)
        if norm == 0:
            raise ConvergenceError("power iteration collapsed to zero")
        y /= norm
        if np.abs(y - x).max() <= tol * max(1.0, np.abs(x).max()):
            return y
        x = y
    raise ConvergenceError("eigenvector power iteration did not converge")


def spectral_radius(view: HomoView, tol: float = 1e-12, max_iter: int = 10000) -> float:
    """Largest adjacency eigenvalue via power iteration."""
    n = view.n_nodes
    if n == 0 or view.n_edges == 0:
        return 0.0
    x = np.full(n, 1.0 / np.sqrt(n))
    lam = 0.0
    for _ in range(max_iter):
        ax = _adj_mult(view, x)
        new_lam = float(x @ ax)  # Rayleigh quotient of the unshifted matrix
        y = ax + x  # shifted iteration, robust on bipartite spectra
        norm = np.linalg.norm(y)
        if norm == 0:
            return 0.0
        y /= norm
        if abs(new_lam - lam) <= tol * max(1.0, abs(lam)):
            return new_lam
        lam, x = new_lam, y
    return lam


def _adj_mult(view: HomoView, x: np.ndarray) -> np.ndarray:
    y = np.zeros_like(x)
    for u, nbrs in enumerate(view.neighbors):
        if len(nbrs):
            y[u] = x[nbrs].sum()
    return y


def default_katz_beta(view: HomoView) -> float:
    """0.9 / spectral radius: inside the convergence region by construction."""
    lam = spectral_radius(view)
    return 0.9 / lam if lam > 0 else 0.1


def katz_matrix(view: HomoView, beta: float) -> np.ndarray:
    """Pairwise Katz scores: X solving (I - beta*A) X = beta*A."""
    a = view.adjacency()
    lam = spectral_radius(view)
    if lam > 0 and beta >= 1.0 / lam:
        raise ConvergenceError(
            f"katz series diverges: beta={beta} >= 1/spectral_radius={1.0 / lam}"
        )
    eye = np.eye(view.n_nodes)
    return np.linalg.solve(eye - beta * a, beta * a)


def katz_index(view: HomoView, beta: float | None = None) -> np.ndarray:
    """Node score: row sums of the pairwise Katz matrix, by linear solve."""
    if beta is None:
        beta = default_katz_beta(view)
    a = view.adjacency()
    lam = spectral_radius(view)
    if lam > 0 and beta >= 1.0 / lam:
        raise ConvergenceError(
            f"katz series diverges: beta={beta} >= 1/spectral_radius={1.0 / lam}"
        )
    eye = np.eye(view.n_nodes)
    ones = np.ones(view.n_nodes)
    return np.linalg.solve(eye - beta * a, beta * (a @ ones))


def clustering_local(view: HomoView) -> np.ndarray:
    """C_i = 2*L_i / (k_i * (k_i - 1)); 0 when degree < 2."""
    n = view.n_nodes
    coeff = np.zeros(n)
    nbr_sets = [set(map(int, nbrs)) for nbrs in view.neighbors]
    for u in range(n):
        k = len(nbr_sets[u])
        if k < 2:
            continue
        links = 0
        for v in view.neighbors[u]:
            links += len(nbr_sets[u] & nbr_sets[int(v)])
        coeff[u] = links / (k * (k - 1))  # each link double-counted, pairs k(k-1)/2
    return coeff


def global_clustering(view: HomoView) -> float:
    """C_delta = 3 * #triangles / #connected triples."""
    if view.n_nodes < 3:
        raise ValueError("global clustering needs at least 3 nodes")
    deg = view.degrees
    triples = int((deg * (deg - 1) // 2).sum())
    if triples == 0:
        return 0.0
    nbr_sets = [set(map(int, nbrs)) for nbrs in view.neighbors]
    triangles = 0
    for u in range(view.n_nodes):
        for v in view.neighbors[u]:
            v = int(v)
            if v > u:
                triangles += sum(1 for w in nbr_sets[u] & nbr_sets[v] if w > v)
    return 3.0 * triangles / triples


@dataclass
class CentralityTable:
    node_ids: np.ndarray
    kinds: list[NodeKind]
    labels: list[str]
    values: np.ndarray  # (n_entities, 6), columns per CENTRALITY_COLUMNS

    def row_for(self, node_id: int) -> np.ndarray | None:
        hits = np.nonzero(self.node_ids == node_id)[0]
        return self.values[hits[0]] if len(hits) else None


def centrality_table(
    g: HeteroGraph, katz_beta: float | None = None
) -> CentralityTable:
    """Six centralities for every non-contract node.

    All measures are computed on the homogeneous collapse of the full graph
    (contract nodes participate in paths); only entity rows are reported
    because contract nodes are not actual market entities.
    """
    view = g.homo_view()
    cols = np.column_stack(
        [
            degree_centrality(view),
            closeness_centrality(view),
            betweenness_centrality(view),
            eigenvector_centrality(view),
            katz_index(view, katz_beta),
            clustering_local(view),
        ]
    )
    entity_ids = np.array(
        [u for u in range(g.n_nodes) if g.kind(u) != NodeKind.CONTRACT], dtype=np.int64
    )
    return CentralityTable(
        node_ids=entity_ids,
        kinds=[g.kind(int(u)) for u in entity_ids],
        labels=[g.label(int(u)) for u in entity_ids],
        values=cols[entity_ids] if len(entity_ids) else np.zeros((0, 6)),
    )
