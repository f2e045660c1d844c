import networkx as nx
import numpy as np
import pytest

from catnet.graph import HeteroGraph, HomoView, NodeKind
from catnet.topology import (
    assortativity,
    critical_threshold,
    degree_stats,
    fitness_series,
    molloy_reed_threshold,
    path_stats,
)


def random_view(n, p, seed):
    rng = np.random.default_rng(seed)
    sets = [set() for _ in range(n)]
    for u in range(n - 1):
        sets[u].add(u + 1)
        sets[u + 1].add(u)
    for u in range(n):
        for v in range(u + 2, n):
            if rng.random() < p:
                sets[u].add(v)
                sets[v].add(u)
    return HomoView(sets)


def to_nx(view):
    g = nx.Graph()
    g.add_nodes_from(range(view.n_nodes))
    for u, nbrs in enumerate(view.neighbors):
        for v in nbrs:
            g.add_edge(u, int(v))
    return g


def test_degree_stats_star():
    view = HomoView([set(range(1, 5))] + [{0}] * 4)
    stats = degree_stats(view)
    assert stats.avg_degree == pytest.approx(2 * 4 / 5)
    assert stats.second_moment == pytest.approx((16 + 4) / 5)
    assert stats.histogram == {1: 4, 4: 1}
    assert (stats.k_min, stats.k_max) == (1, 4)
    assert abs(sum(stats.pmf.values()) - 1.0) < 1e-12


def test_molloy_reed_published_moments():
    # <k> = 15.52, <k^2> = 2346.50 must give the published 0.9933
    res = molloy_reed_threshold(15.52, 2346.50)
    assert res.giant_component_regime
    assert res.f_c == pytest.approx(0.9933, abs=1e-4)


def test_molloy_reed_below_transition():
    # a chain has ratio exactly 2 in the infinite limit; use a tiny one
    res = molloy_reed_threshold(1.0, 1.0)
    assert res.f_c is None
    assert not res.giant_component_regime


@pytest.mark.parametrize("seed", range(6))
def test_assortativity_vs_networkx(seed):
    view = random_view(20, 0.15, seed)
    g = to_nx(view)
    ref = nx.degree_assortativity_coefficient(g)
    got = assortativity(view)
    assert not got.degenerate
    assert got.pearson_r == pytest.approx(ref, abs=1e-10)


def test_assortativity_degenerate_regular_graph():
    # a cycle is degree-regular: zero variance at the edge ends
    n = 6
    sets = [{(u - 1) % n, (u + 1) % n} for u in range(n)]
    got = assortativity(HomoView(sets))
    assert got.degenerate
    assert got.pearson_r is None


def test_knn_curve_star():
    view = HomoView([set(range(1, 5))] + [{0}] * 4)
    curve = dict(assortativity(view).knn_curve)
    assert curve[1] == pytest.approx(4.0)
    assert curve[4] == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(6))
def test_paths_vs_networkx(seed):
    view = random_view(18, 0.15, seed)
    g = to_nx(view)
    got = path_stats(view)
    assert got.connected
    assert got.diameter == nx.diameter(g)
    assert got.avg_path == pytest.approx(nx.average_shortest_path_length(g), abs=1e-12)


def test_paths_disconnected():
    got = path_stats(HomoView([{1}, {0}, {3}, {2}]))
    assert not got.connected


def build_yearly_graph():
    g = HeteroGraph()
    r = g.add_relation("contract-covers-peril")
    years = {}
    hub = g.add_node(NodeKind.PERIL, "hub")
    rare = g.add_node(NodeKind.PERIL, "rare")
    for i, year in enumerate([2000, 2001, 2001, 2002, 2002, 2002]):
        c = g.add_node(NodeKind.CONTRACT, f"bond{i}")
        years[c] = year
        g.add_edge(c, r, hub)
    late = g.add_node(NodeKind.CONTRACT, "late")
    years[late] = 2002
    g.add_edge(late, r, rare)
    return g.freeze(), years


def test_fitness_growth_and_min_years():
    g, years = build_yearly_graph()
    fs = fitness_series(g, years)
    hub_key = (NodeKind.PERIL, "hub")
    rare_key = (NodeKind.PERIL, "rare")
    assert fs.fitness[hub_key] is not None
    assert fs.fitness[hub_key] > 0  # degree grows every year
    assert fs.fitness[rare_key] is None  # present a single year
    ranked = fs.ranked(kind=NodeKind.PERIL)
    assert ranked and ranked[0][0] == "hub"
    assert fs.degrees[hub_key] == [1, 3, 6]


def test_fitness_needs_two_years():
    g = HeteroGraph()
    r = g.add_relation("contract-covers-peril")
    c = g.add_node(NodeKind.CONTRACT, "b")
    p = g.add_node(NodeKind.PERIL, "p")
    g.add_edge(c, r, p)
    g.freeze()
    with pytest.raises(ValueError):
        fitness_series(g, {c: 2000})


def test_critical_threshold_from_stats():
    view = random_view(30, 0.2, 1)
    stats = degree_stats(view)
    res = critical_threshold(stats)
    assert res.moment_ratio == pytest.approx(stats.second_moment / stats.avg_degree)
