import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvrpapprox.graphkit import (
    GraphError,
    WeightedGraph,
    christofides,
    cycle_cost,
    double_tree,
    eulerian_shortcut,
    get_tsp,
    held_karp_tsp,
    matching_weight,
    min_weight_perfect_matching,
    mst,
)
from cvrpapprox.oracle import brute_matching_weight, brute_mst_weight, brute_tsp_cost


def random_metric(n, seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 100, size=(n, 2))
    return np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))


def tree_weight(edges, metric):
    return sum(metric[u, v] for u, v in edges)


def test_mst_unit_square(unit_square_metric):
    tree = mst(range(4), unit_square_metric)
    assert len(tree) == 3
    assert tree_weight(tree, unit_square_metric) == pytest.approx(3.0)


def test_mst_single_node_and_empty():
    assert mst([5], np.zeros((6, 6))) == []
    with pytest.raises(GraphError):
        mst([], np.zeros((1, 1)))


@pytest.mark.parametrize("seed", range(15))
def test_mst_matches_pruefer_enumeration(seed):
    n = 2 + seed % 6
    metric = random_metric(n, seed)
    tree = mst(range(n), metric)
    assert tree_weight(tree, metric) == pytest.approx(brute_mst_weight(range(n), metric), rel=1e-12)


def test_loop_matching_prefers_cheap_edge():
    g = WeightedGraph((1, 2), {(1, 2): 3.0}, {1: 2.0, 2: 2.0})
    pairs = min_weight_perfect_matching(g)
    assert pairs == [(1, 2)]
    assert matching_weight(g, pairs) == 3.0


def test_loop_matching_prefers_loops_when_cheaper():
    g = WeightedGraph((1, 2), {(1, 2): 5.0}, {1: 2.0, 2: 2.0})
    assert min_weight_perfect_matching(g) == [(1, 1), (2, 2)]


def test_loop_matching_handles_missing_edges_and_odd_count():
    g = WeightedGraph((1, 2, 3), {}, {1: 1.0, 2: 1.0, 3: 1.0})
    assert min_weight_perfect_matching(g) == [(1, 1), (2, 2), (3, 3)]


def test_k4_without_loops(unit_square_metric):
    m = unit_square_metric
    g = WeightedGraph((0, 1, 2, 3), {(u, v): float(m[u, v]) for u, v in itertools.combinations(range(4), 2)})
    pairs = min_weight_perfect_matching(g)
    assert matching_weight(g, pairs) == pytest.approx(2.0)
    assert matching_weight(g, pairs) == pytest.approx(brute_matching_weight(g))


def test_odd_without_loops_raises():
    g = WeightedGraph((0, 1, 2), {(0, 1): 1.0, (1, 2): 1.0, (0, 2): 1.0})
    with pytest.raises(GraphError):
        min_weight_perfect_matching(g)


def test_empty_matching():
    assert min_weight_perfect_matching(WeightedGraph(())) == []


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(0, 10**6), st.floats(0.2, 1.0))
def test_loop_matching_is_exhaustively_optimal(n, seed, density):
    rng = np.random.default_rng(seed)
    nodes = tuple(range(1, n + 1))
    edges = {
        (u, v): float(rng.integers(1, 50))
        for u, v in itertools.combinations(nodes, 2)
        if rng.random() < density
    }
    loops = {v: float(rng.integers(1, 50)) for v in nodes}
    g = WeightedGraph(nodes, edges, loops)
    pairs = min_weight_perfect_matching(g)
    covered = sorted(x for p in pairs for x in set(p))
    assert covered == list(nodes)
    assert matching_weight(g, pairs) == pytest.approx(brute_matching_weight(g))


def test_eulerian_shortcut_keeps_first_visits():
    order = eulerian_shortcut([(0, 1), (1, 0), (0, 2), (2, 0)], 0)
    assert order[0] == 0 and sorted(order) == [0, 1, 2]
    assert eulerian_shortcut([], 7) == [7]
    with pytest.raises(GraphError, match="odd"):
        eulerian_shortcut([(0, 1)], 0)
    with pytest.raises(GraphError, match="connected"):
        eulerian_shortcut([(0, 1), (1, 0), (2, 3), (3, 2)], 0)


@pytest.mark.parametrize("name", ["christofides", "double-tree", "held-karp"])
def test_small_tours(name, unit_square_metric):
    tsp = get_tsp(name)
    assert tsp([2], unit_square_metric).cost == 0.0
    tri = tsp([0, 1, 2], unit_square_metric)
    assert tri.tour[0] == 0 and tri.cost == pytest.approx(2 + np.sqrt(2))
    sq = tsp([0, 1, 2, 3], unit_square_metric)
    assert sq.tour[0] == 0 and sorted(sq.tour) == [0, 1, 2, 3]
    if name != "double-tree":
        assert sq.cost == pytest.approx(4.0)


def test_unknown_tsp_name():
    with pytest.raises(ValueError):
        get_tsp("nearest")


@pytest.mark.parametrize("seed", range(12))
def test_tsp_heuristics_against_exact(seed):
    n = 4 + seed % 6
    metric = random_metric(n, 100 + seed)
    nodes = list(range(n))
    exact = held_karp_tsp(nodes, metric)
    assert exact.cost == pytest.approx(brute_tsp_cost(nodes, metric), rel=1e-12)
    assert exact.cost == pytest.approx(cycle_cost(exact.tour, metric))
    chris = christofides(nodes, metric)
    assert sorted(chris.tour) == nodes and chris.tour[0] == 0
    assert chris.cost <= 1.5 * exact.cost * (1 + 1e-9)
    dt = double_tree(nodes, metric)
    assert sorted(dt.tour) == nodes
    assert dt.cost <= 2.0 * tree_weight(mst(nodes, metric), metric) * (1 + 1e-9)


def test_tsp_on_node_subset():
    metric = random_metric(9, 3)
    nodes = [0, 8, 2, 5]
    for name in ("christofides", "double-tree", "held-karp"):
        res = get_tsp(name)(nodes, metric)
        assert res.tour[0] == 0 and sorted(res.tour) == sorted(nodes)
