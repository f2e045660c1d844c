"""Heterogeneous multi-relational graph with frozen, shareable adjacency views.

Nodes are typed (contract, cedent, peril, ...) and edges carry a relation
label.  Storage is undirected: every edge is kept as two directed half-edges
in a per-relation neighbor index.  After ``freeze()`` the graph is immutable
and safe for concurrent readers; everything downstream (topology metrics,
the R-GCN, the explainer) takes a frozen graph.
"""

from __future__ import annotations

import json
from enum import Enum

import numpy as np


class NodeKind(str, Enum):
    CONTRACT = "Contract"
    CEDENT = "Cedent"
    UNDERWRITER = "Underwriter"
    COUNTRY = "Country"
    STATE_PROVINCE = "StateProvince"
    PERIL = "Peril"
    RISK_MODELER = "RiskModeler"


#: canonical ordering used e.g. for naming entity-entity relations
KIND_ORDER = {kind: i for i, kind in enumerate(NodeKind)}


class GraphError(Exception):
    """Base class for graph construction / query failures."""


class FrozenGraphError(GraphError):
    """Mutation attempted after freeze()."""


class UnknownIdError(GraphError):
    """Node or relation id outside the registry."""


def _norm_label(label: str) -> str:
    return label.strip().lower()


class HeteroGraph:
    """Mutable while building, immutable after ``freeze()``.

    Node ids are dense integers in [0, N), assigned in insertion order and
    never reused.  ``add_node`` deduplicates on (kind, lowercased label).
    Edges are binary and undirected; self loops and duplicate (u, r, v)
    triples are rejected / ignored.
    """

    def __init__(self):
        self._kinds: list[NodeKind] = []
        self._labels: list[str] = []
        self._key: dict[tuple[NodeKind, str], int] = {}
        self._relations: list[str] = []
        self._rel_index: dict[str, int] = {}
        # per relation: node -> set/sorted tuple of neighbors
        self._adj: list[dict[int, object]] = []
        self._n_edges = 0
        self._frozen = False
        self._homo: HomoView | None = None

    # -- registry ---------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self._kinds)

    @property
    def n_edges(self) -> int:
        """Number of distinct undirected (u, r, v) triples."""
        return self._n_edges

    @property
    def frozen(self) -> bool:
        return self._frozen

    @property
    def relations(self) -> list[str]:
        return list(self._relations)

    def kind(self, u: int) -> NodeKind:
        self._check_node(u)
        return self._kinds[u]

    def label(self, u: int) -> str:
        self._check_node(u)
        return self._labels[u]

    def find_node(self, kind: NodeKind, label: str) -> int | None:
        return self._key.get((kind, _norm_label(label)))

    def relation_id(self, label: str) -> int:
        rid = self._rel_index.get(label)
        if rid is None:
            raise UnknownIdError(f"unknown relation {label!r}")
        return rid

    def nodes_of_kind(self, kind: NodeKind) -> list[int]:
        return [i for i, k in enumerate(self._kinds) if k == kind]

    # -- construction -----------------------------------------------------

    def _check_mutable(self):
        if self._frozen:
            raise FrozenGraphError("graph is frozen; no further mutation allowed")

    def _check_node(self, u: int):
        if not 0 <= u < len(self._kinds):
            raise UnknownIdError(f"unknown node id {u}")

    def add_relation(self, label: str) -> int:
        self._check_mutable()
        rid = self._rel_index.get(label)
        if rid is None:
            rid = len(self._relations)
            self._relations.append(label)
            self._rel_index[label] = rid
            self._adj.append({})
        return rid

    def add_node(self, kind: NodeKind, label: str) -> int:
        """Idempotent: a repeated (kind, label) returns the existing id."""
        self._check_mutable()
        key = (NodeKind(kind), _norm_label(label))
        nid = self._key.get(key)
        if nid is None:
            nid = len(self._kinds)
            self._kinds.append(key[0])
            self._labels.append(label.strip())
            self._key[key] = nid
        return nid

    def add_edge(self, u: int, r: int, v: int) -> None:
        """Insert the undirected typed edge; duplicates are a no-op."""
        self._check_mutable()
        self._check_node(u)
        self._check_node(v)
        if u == v:
            raise GraphError(f"self-loop rejected for node {u}")
        if not 0 <= r < len(self._relations):
            raise UnknownIdError(f"unknown relation id {r}")
        adj = self._adj[r]
        nbrs = adj.setdefault(u, set())
        if v in nbrs:
            return
        nbrs.add(v)
        adj.setdefault(v, set()).add(u)
        self._n_edges += 1

    def freeze(self) -> "HeteroGraph":
        """Seal the graph: adjacency becomes sorted tuples, mutation errors."""
        if not self._frozen:
            for adj in self._adj:
                for u in list(adj):
                    adj[u] = tuple(sorted(adj[u]))
            self._frozen = True
        return self

    # -- queries ----------------------------------------------------------

    def neighbors(self, u: int, r: int) -> list[int]:
        """Sorted, duplicate-free neighbors of u under relation r."""
        self._check_node(u)
        if not 0 <= r < len(self._relations):
            raise UnknownIdError(f"unknown relation id {r}")
        nbrs = self._adj[r].get(u, ())
        return sorted(nbrs) if not self._frozen else list(nbrs)

    def degree(self, u: int) -> int:
        """Simple-graph degree: distinct neighbors across all relations."""
        self._check_node(u)
        seen = set()
        for adj in self._adj:
            seen.update(adj.get(u, ()))
        return len(seen)

    def edges(self):
        """Yield (u, r, v) with u < v, relation-major then lexicographic."""
        for r, adj in enumerate(self._adj):
            for u in sorted(adj):
                for v in adj[u]:
                    if u < v:
                        yield (u, r, v)

    def homo_view(self) -> "HomoView":
        """Collapse relations into a simple graph (cached once frozen)."""
        if self._frozen and self._homo is not None:
            return self._homo
        sets: list[set[int]] = [set() for _ in range(self.n_nodes)]
        for adj in self._adj:
            for u, nbrs in adj.items():
                sets[u].update(nbrs)
        view = HomoView(sets)
        if self._frozen:
            self._homo = view
        return view

    # -- serialization ----------------------------------------------------

    def to_json(self) -> str:
        """Canonical JSON: nodes by id, edges sorted lexicographically."""
        edges = sorted(self.edges())
        doc = {
            "nodes": [
                {"id": i, "kind": self._kinds[i].value, "label": self._labels[i]}
                for i in range(self.n_nodes)
            ],
            "relations": list(self._relations),
            "edges": [[u, r, v] for (u, r, v) in edges],
        }
        return json.dumps(doc, separators=(",", ":"), sort_keys=False)

    @classmethod
    def from_json(cls, text: str) -> "HeteroGraph":
        doc = json.loads(text)
        g = cls()
        for rel in doc["relations"]:
            g.add_relation(rel)
        for node in doc["nodes"]:
            nid = g.add_node(NodeKind(node["kind"]), node["label"])
            if nid != node["id"]:
                raise GraphError(
                    f"non-canonical node ordering in JSON (got id {nid}, want {node['id']})"
                )
        for u, r, v in doc["edges"]:
            g.add_edge(u, r, v)
        return g.freeze()


class HomoView:
    """Read-only simple-graph collapse of a HeteroGraph.

    A pair (u, v) counts once even when connected under several relations.
    Exposes CSR arrays for the compiled BFS kernels.
    """

    def __init__(self, neighbor_sets: list[set[int]]):
        n = len(neighbor_sets)
        self.n_nodes = n
        self.neighbors = [np.array(sorted(s), dtype=np.int32) for s in neighbor_sets]
        self.degrees = np.array([len(s) for s in neighbor_sets], dtype=np.int64)
        self.n_edges = int(self.degrees.sum()) // 2
        self.indptr = np.zeros(n + 1, dtype=np.int32)
        np.cumsum(self.degrees, out=self.indptr[1:])
        self.indices = (
            np.concatenate(self.neighbors)
            if n and self.n_edges
            else np.zeros(0, dtype=np.int32)
        ).astype(np.int32)

    def adjacency(self) -> np.ndarray:
        """Dense symmetric 0/1 adjacency matrix."""
        a = np.zeros((self.n_nodes, self.n_nodes))
        for u, nbrs in enumerate(self.neighbors):
            a[u, nbrs] = 1.0
        return a

    def edge_pairs(self) -> np.ndarray:
        """(L, 2) array of undirected edges with u < v."""
        pairs = [
            (u, v) for u, nbrs in enumerate(self.neighbors) for v in nbrs if u < v
        ]
        return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def subgraph_by_years(
    g: HeteroGraph, year_cutoff: int, issue_years: dict[int, int]
) -> HeteroGraph:
    """Cumulative yearly subgraph.

    Keeps every contract node with issue year <= cutoff, every entity node
    incident to one of them, and the edges induced on that node set.  Node
    ids are re-densified in ascending original-id order.
    """
    if not g.frozen:
        raise GraphError("subgraph_by_years requires a frozen graph")
    keep: set[int] = set()
    for u in range(g.n_nodes):
        if g.kind(u) == NodeKind.CONTRACT:
            if u not in issue_years:
                raise GraphError(f"contract node {u} has no issue year")
            if issue_years[u] <= year_cutoff:
                keep.add(u)
    contracts = list(keep)
    for u in contracts:
        for r in range(len(g.relations)):
            keep.update(g.neighbors(u, r))
    sub = HeteroGraph()
    for rel in g.relations:
        sub.add_relation(rel)
    mapping: dict[int, int] = {}
    for u in sorted(keep):
        mapping[u] = sub.add_node(g.kind(u), g.label(u))
    for u, r, v in g.edges():
        if u in mapping and v in mapping:
            sub.add_edge(mapping[u], r, mapping[v])
    return sub.freeze()
