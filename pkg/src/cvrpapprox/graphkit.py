"""Graph subroutines: MST, perfect matching with loops, Euler shortcutting, TSP.

Every function takes a list of node ids plus the full metric matrix and only
looks at the rows/columns of the requested nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import networkx as nx
import numpy as np

from .core import CvrpError

HELD_KARP_LIMIT = 20


class GraphError(CvrpError):
    pass


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected simple graph; ``loops[v]`` lets v be matched to itself."""

    nodes: tuple[int, ...]
    edges: dict[tuple[int, int], float] = field(default_factory=dict)
    loops: dict[int, float] = field(default_factory=dict)

    def weight(self, u: int, v: int) -> float:
        if u == v:
            return self.loops[u]
        return self.edges[(u, v)] if (u, v) in self.edges else self.edges[(v, u)]


@dataclass(frozen=True)
class TspResult:
    """A Hamiltonian cycle; ``tour[0]`` is the first requested node."""

    tour: tuple[int, ...]
    cost: float
    guarantee: float


TspAlgorithm = Callable[[Sequence[int], np.ndarray], TspResult]


def cycle_cost(order: Sequence[int], metric: np.ndarray) -> float:
    if len(order) < 2:
        return 0.0
    return math.fsum(metric[a, b] for a, b in zip(order, [*order[1:], order[0]]))


def mst(nodes: Sequence[int], metric: np.ndarray) -> list[tuple[int, int]]:
    """Kruskal on the complete graph; ties go to the lexicographically smaller edge."""
    nodes = list(nodes)
    if not nodes:
        raise GraphError("mst needs at least one node")
    candidates = sorted(
        (float(metric[u, v]), min(u, v), max(u, v))
        for i, u in enumerate(nodes)
        for v in nodes[i + 1:]
    )
    parent = {v: v for v in nodes}

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    tree = []
    for _, u, v in candidates:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[max(ru, rv)] = min(ru, rv)
            tree.append((u, v))
            if len(tree) == len(nodes) - 1:
                break
    return tree


def min_weight_perfect_matching(g: WeightedGraph) -> list[tuple[int, int]]:
    """Minimum-weight perfect matching; a loop is returned as the pair (v, v).

    Graphs with loops are solved on a doubled copy: v' mirrors v, (u', v')
    mirrors (u, v), and (v, v') carries twice the loop weight, so the optimum
    on the copy is exactly twice the loop-matching optimum. The matching is
    read off the original side.
    """
    if not g.nodes:
        return []
    if g.loops:
        missing = [v for v in g.nodes if v not in g.loops]
        if missing:
            raise GraphError(f"nodes {missing} lack a loop weight")
        mirror = {v: ("mirror", v) for v in g.nodes}
        weighted = [(u, v, w) for (u, v), w in g.edges.items()]
        weighted += [(v, mirror[v], 2.0 * g.loops[v]) for v in g.nodes]
        weighted += [(mirror[u], mirror[v], w) for (u, v), w in g.edges.items()]
    else:
        if len(g.nodes) % 2:
            raise GraphError(f"no perfect matching: {len(g.nodes)} nodes and no loops")
        weighted = [(u, v, w) for (u, v), w in g.edges.items()]

    top = max((w for _, _, w in weighted), default=0.0) + 1.0
    h = nx.Graph()
    h.add_nodes_from(g.nodes)
    if g.loops:
        h.add_nodes_from(mirror[v] for v in g.nodes)
    for u, v, w in weighted:
        h.add_edge(u, v, weight=top - w)
    mate = nx.max_weight_matching(h, maxcardinality=True)
    if 2 * len(mate) != h.number_of_nodes():
        raise GraphError("graph has no perfect matching")

    original = set(g.nodes)
    pairs = []
    for a, b in mate:
        if a in original and b in original:
            pairs.append((min(a, b), max(a, b)))
        elif a in original:
            if b == mirror[a]:
                pairs.append((a, a))
        elif b in original and a == mirror[b]:
            pairs.append((b, b))
    return sorted(pairs)


def matching_weight(g: WeightedGraph, pairs: Sequence[tuple[int, int]]) -> float:
    return math.fsum(g.weight(u, v) for u, v in pairs)


def eulerian_shortcut(edges: Sequence[tuple[int, int]], start: int) -> list[int]:
    """Euler circuit of a multigraph from ``start``, keeping first visits only."""
    multi = nx.MultiGraph()
    multi.add_node(start)
    multi.add_edges_from(edges)
    odd = [v for v, deg in multi.degree() if deg % 2]
    if odd:
        raise GraphError(f"nodes {sorted(odd)} have odd degree")
    if not nx.is_connected(multi):
        raise GraphError("multigraph is not connected")
    if multi.number_of_edges() == 0:
        return [start]
    order, seen = [], set()
    for u, _ in nx.eulerian_circuit(multi, source=start):
        if u not in seen:
            seen.add(u)
            order.append(u)
    return order


def _trivial_tour(nodes: Sequence[int], metric: np.ndarray, guarantee: float) -> TspResult | None:
    if not nodes:
        raise GraphError("TSP needs at least one node")
    if len(nodes) <= 3:
        order = tuple(nodes)
        return TspResult(order, cycle_cost(order, metric), guarantee)
    return None


def christofides(nodes: Sequence[int], metric: np.ndarray) -> TspResult:
    nodes = list(nodes)
    trivial = _trivial_tour(nodes, metric, 1.5)
    if trivial:
        return trivial
    tree = mst(nodes, metric)
    degree = {v: 0 for v in nodes}
    for u, v in tree:
        degree[u] += 1
        degree[v] += 1
    odd = [v for v in nodes if degree[v] % 2]
    g = WeightedGraph(
        tuple(odd),
        {(u, v): float(metric[u, v]) for i, u in enumerate(odd) for v in odd[i + 1:]},
    )
    order = eulerian_shortcut(tree + min_weight_perfect_matching(g), nodes[0])
    return TspResult(tuple(order), cycle_cost(order, metric), 1.5)


def double_tree(nodes: Sequence[int], metric: np.ndarray) -> TspResult:
    nodes = list(nodes)
    trivial = _trivial_tour(nodes, metric, 2.0)
    if trivial:
        return trivial
    tree = mst(nodes, metric)
    order = eulerian_shortcut(tree + tree, nodes[0])
    return TspResult(tuple(order), cycle_cost(order, metric), 2.0)


def held_karp_table(metric: np.ndarray, start: int, others: Sequence[int]):
    """Path DP from ``start``: ``best[mask, j]`` is the cheapest path from start
    through exactly the ``others`` in mask, ending at ``others[j]``.

    Returns (best, parent); parent holds the predecessor position or -1 for start.
    Built layer by layer over subset size, vectorized over all masks of a layer.
    """
    k = len(others)
    idx = np.asarray(others, dtype=int)
    inner = np.asarray(metric, dtype=float)[np.ix_(idx, idx)]
    best = np.full((1 << k, k), np.inf)
    parent = np.full((1 << k, k), -1, dtype=np.int8 if k < 127 else np.int16)
    if k == 0:
        return best, parent
    for j in range(k):
        best[1 << j, j] = metric[start, idx[j]]
    masks = np.arange(1 << k)
    popcount = np.zeros(1 << k, dtype=int)
    for j in range(k):
        popcount += (masks >> j) & 1
    for size in range(2, k + 1):
        layer = masks[popcount == size]
        for j in range(k):
            sel = layer[(layer >> j) & 1 == 1]
            prev = sel ^ (1 << j)
            cand = best[prev] + inner[:, j][None, :]
            arg = np.argmin(cand, axis=1)
            best[sel, j] = cand[np.arange(sel.size), arg]
            parent[sel, j] = arg
    return best, parent


def held_karp_tsp(nodes: Sequence[int], metric: np.ndarray) -> TspResult:
    """Exact TSP by bitmask DP; ties resolve to the lowest position."""
    nodes = list(nodes)
    if len(nodes) > HELD_KARP_LIMIT:
        raise GraphError(f"Held-Karp limited to {HELD_KARP_LIMIT} nodes, got {len(nodes)}")
    trivial = _trivial_tour(nodes, metric, 1.0)
    if trivial:
        return trivial
    start, others = nodes[0], nodes[1:]
    best, parent = held_karp_table(metric, start, others)
    full = (1 << len(others)) - 1
    closing = best[full] + np.asarray(metric, dtype=float)[np.asarray(others), start]
    j = int(np.argmin(closing))
    path, mask = [], full
    while j >= 0:
        path.append(others[j])
        j, mask = int(parent[mask, j]), mask ^ (1 << j)
    order = (start, *reversed(path))
    return TspResult(order, cycle_cost(order, metric), 1.0)


TSP_ALGORITHMS: dict[str, TspAlgorithm] = {
    "christofides": christofides,
    "double-tree": double_tree,
    "held-karp": held_karp_tsp,
}


def get_tsp(name: str | TspAlgorithm) -> TspAlgorithm:
    if callable(name):
        return name
    try:
        return TSP_ALGORITHMS[name]
    except KeyError:
        raise CvrpError(f"unknown TSP algorithm {name!r}; choose from {sorted(TSP_ALGORITHMS)}") from None
