import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catnet.graph import (
    FrozenGraphError,
    GraphError,
    HeteroGraph,
    NodeKind,
    UnknownIdError,
    subgraph_by_years,
)


def small_graph():
    g = HeteroGraph()
    r0 = g.add_relation("contract-covers-peril")
    r1 = g.add_relation("peril-with-peril")
    c = g.add_node(NodeKind.CONTRACT, "Bond-1")
    p1 = g.add_node(NodeKind.PERIL, "earthquake")
    p2 = g.add_node(NodeKind.PERIL, "hurricane")
    g.add_edge(c, r0, p1)
    g.add_edge(c, r0, p2)
    g.add_edge(p1, r1, p2)
    return g, (c, p1, p2), (r0, r1)


def test_node_dedup_case_insensitive():
    g = HeteroGraph()
    a = g.add_node(NodeKind.PERIL, "Earthquake")
    b = g.add_node(NodeKind.PERIL, "  earthquake ")
    assert a == b
    assert g.n_nodes == 1
    # same label under a different kind is a different node
    c = g.add_node(NodeKind.CEDENT, "Earthquake")
    assert c != a


def test_duplicate_edge_is_noop():
    g, (c, p1, p2), (r0, r1) = small_graph()
    before = g.n_edges
    g.add_edge(p1, r0, c)  # same undirected edge, reversed
    assert g.n_edges == before


def test_self_loop_rejected():
    g, (c, p1, _), (r0, _) = small_graph()
    with pytest.raises(GraphError):
        g.add_edge(p1, r0, p1)


def test_unknown_ids_raise():
    g, _, _ = small_graph()
    with pytest.raises(UnknownIdError):
        g.add_edge(0, 99, 1)
    with pytest.raises(UnknownIdError):
        g.neighbors(99, 0)
    with pytest.raises(UnknownIdError):
        g.relation_id("nope")


def test_freeze_blocks_mutation():
    g, (c, p1, p2), (r0, _) = small_graph()
    g.freeze()
    with pytest.raises(FrozenGraphError):
        g.add_node(NodeKind.PERIL, "flood")
    with pytest.raises(FrozenGraphError):
        g.add_edge(c, r0, p2)
    with pytest.raises(FrozenGraphError):
        g.add_relation("x")


def test_degree_collapses_relations():
    g = HeteroGraph()
    r0 = g.add_relation("a")
    r1 = g.add_relation("b")
    u = g.add_node(NodeKind.PERIL, "p")
    v = g.add_node(NodeKind.COUNTRY, "c")
    g.add_edge(u, r0, v)
    g.add_edge(u, r1, v)
    # two typed edges, one simple-graph neighbor
    assert g.n_edges == 2
    assert g.degree(u) == 1
    assert g.homo_view().n_edges == 1


def test_json_roundtrip():
    g, _, _ = small_graph()
    g.freeze()
    text = g.to_json()
    g2 = HeteroGraph.from_json(text)
    assert g2.to_json() == text
    assert g2.n_nodes == g.n_nodes
    assert g2.n_edges == g.n_edges
    assert sorted(g2.edges()) == sorted(g.edges())


def test_from_json_rejects_noncanonical_ids():
    g, _, _ = small_graph()
    g.freeze()
    doc = json.loads(g.to_json())
    doc["nodes"][0], doc["nodes"][1] = doc["nodes"][1], doc["nodes"][0]
    with pytest.raises(GraphError):
        HeteroGraph.from_json(json.dumps(doc))


def test_homo_view_csr_consistent():
    g, (c, p1, p2), _ = small_graph()
    view = g.freeze().homo_view()
    assert view.n_nodes == 3
    assert view.n_edges == 3
    np.testing.assert_array_equal(view.degrees, [2, 2, 2])
    assert view.indptr[-1] == 2 * view.n_edges
    a = view.adjacency()
    np.testing.assert_array_equal(a, a.T)
    assert a.trace() == 0


def test_subgraph_by_years():
    g = HeteroGraph()
    r = g.add_relation("contract-covers-peril")
    c1 = g.add_node(NodeKind.CONTRACT, "b1")
    c2 = g.add_node(NodeKind.CONTRACT, "b2")
    p_old = g.add_node(NodeKind.PERIL, "flood")
    p_new = g.add_node(NodeKind.PERIL, "quake")
    g.add_edge(c1, r, p_old)
    g.add_edge(c2, r, p_new)
    g.add_edge(c2, r, p_old)
    g.freeze()
    sub = subgraph_by_years(g, 2000, {c1: 2000, c2: 2005})
    assert sub.n_nodes == 2  # c1 and flood only
    assert sub.n_edges == 1
    kinds = {sub.kind(u) for u in range(sub.n_nodes)}
    assert kinds == {NodeKind.CONTRACT, NodeKind.PERIL}
    full = subgraph_by_years(g, 2005, {c1: 2000, c2: 2005})
    assert full.n_nodes == 4
    assert full.n_edges == 3


@settings(max_examples=50, deadline=None)
@given(st.data())
def test_edges_are_symmetric_and_deduped(data):
    n = data.draw(st.integers(min_value=2, max_value=8))
    n_rel = data.draw(st.integers(min_value=1, max_value=3))
    pairs = data.draw(
        st.lists(
            st.tuples(
                st.integers(0, n - 1), st.integers(0, n_rel - 1), st.integers(0, n - 1)
            ),
            max_size=30,
        )
    )
    g = HeteroGraph()
    for r in range(n_rel):
        g.add_relation(f"rel{r}")
    for i in range(n):
        g.add_node(NodeKind.PERIL, f"node{i}")
    inserted = set()
    for u, r, v in pairs:
        if u == v:
            continue
        g.add_edge(u, r, v)
        inserted.add((min(u, v), r, max(u, v)))
    g.freeze()
    listed = set(g.edges())
    assert listed == inserted
    assert g.n_edges == len(inserted)
    for u, r, v in listed:
        assert u in g.neighbors(v, r)
        assert v in g.neighbors(u, r)
