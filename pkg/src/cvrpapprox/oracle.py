"""Exact solvers and exhaustive checkers for desk-scale verification.

None of these share code paths with the approximation algorithms beyond the
instance model, except ``exact_cvrp`` which reuses the Held-Karp table.
``cross_check`` and the ``brute_*`` helpers are pure enumeration.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .core import DEPOT, CvrpError, Instance, Solution
from .graphkit import WeightedGraph, held_karp_table

EXACT_LIMIT = 14
CROSS_CHECK_LIMIT = 9


class OracleMismatch(AssertionError):
    pass


@dataclass(frozen=True)
class OracleResult:
    opt_cost: float
    opt_tours: Solution
    stats: dict = field(default_factory=dict)


def subset_tour_costs(inst: Instance) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Optimal depot tour cost for every client subset (bit j = client j+1).

    Returns (tour_cost, last, best, parent); subsets over capacity get inf.
    """
    n = inst.n
    clients = list(inst.clients)
    best, parent = held_karp_table(inst.cost, DEPOT, clients)
    closing = best + inst.cost[np.asarray(clients), DEPOT][None, :]
    last = np.argmin(closing, axis=1)
    tour_cost = closing[np.arange(1 << n), last]
    tour_cost[0] = 0.0
    masks = np.arange(1 << n)
    load = np.zeros(1 << n, dtype=np.int64)
    for j, v in enumerate(clients):
        load += ((masks >> j) & 1) * inst.demand[v]
    tour_cost[load > inst.capacity] = np.inf
    return tour_cost, last, best, parent


def _unwind(mask: int, j: int, parent: np.ndarray, clients: Sequence[int]) -> list[int]:
    path = []
    while j >= 0:
        path.append(clients[j])
        j, mask = int(parent[mask, j]), mask ^ (1 << j)
    return path[::-1]


def exact_cvrp(inst: Instance) -> OracleResult:
    """Optimal unsplittable CVRP by DP over client subsets.

    f(S) = min over feasible T containing the lowest client of S of
    f(S \\ T) + tsp(T + depot). Ties pick the lexicographically smallest T.
    """
    n = inst.n
    if n > EXACT_LIMIT:
        raise CvrpError(f"exact_cvrp limited to {EXACT_LIMIT} clients, got {n}")
    started = time.perf_counter()
    if n == 0:
        return OracleResult(0.0, Solution(), {"subsets": 0, "seconds": 0.0})
    clients = list(inst.clients)
    tour_cost, last, _, parent = subset_tour_costs(inst)

    feasible = [m for m in range(1, 1 << n) if np.isfinite(tour_cost[m])]
    by_low: dict[int, np.ndarray] = {}
    for low in range(n):
        group = [m for m in feasible if m & -m == 1 << low]
        group.sort(key=lambda m: [j for j in range(n) if m >> j & 1])
        by_low[low] = np.asarray(group, dtype=np.int64)

    f = np.full(1 << n, np.inf)
    f[0] = 0.0
    choice = np.zeros(1 << n, dtype=np.int64)
    evaluated = 0
    for s in range(1, 1 << n):
        low = (s & -s).bit_length() - 1
        cand = by_low[low]
        cand = cand[(cand & s) == cand]
        vals = f[s ^ cand] + tour_cost[cand]
        k = int(np.argmin(vals))
        f[s] = vals[k]
        choice[s] = cand[k]
        evaluated += cand.size

    tours = []
    s = (1 << n) - 1
    while s:
        t = int(choice[s])
        tours.append(_unwind(t, int(last[t]), parent, clients))
        s ^= t
    sol = Solution.of(inst, tours)
    stats = {
        "subsets": len(feasible),
        "splits": evaluated,
        "seconds": time.perf_counter() - started,
    }
    return OracleResult(float(f[-1]), sol, stats)


def brute_tsp_cost(nodes: Sequence[int], metric: np.ndarray) -> float:
    """Cheapest Hamiltonian cycle by trying every permutation after the first node."""
    nodes = list(nodes)
    if len(nodes) < 2:
        return 0.0
    first, rest = nodes[0], nodes[1:]
    best = math.inf
    for perm in itertools.permutations(rest):
        if len(perm) > 1 and perm[0] > perm[-1]:
            continue
        cyc = (first, *perm, first)
        best = min(best, math.fsum(metric[a, b] for a, b in zip(cyc, cyc[1:])))
    return best


def set_partitions(items: Sequence[int]) -> Iterator[list[list[int]]]:
    items = list(items)
    if not items:
        yield []
        return
    head, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [[head], *part]
        for k in range(len(part)):
            yield [*part[:k], [head, *part[k]], *part[k + 1:]]


@dataclass(frozen=True)
class CrossCheckReport:
    exact: float
    enumerated: float
    partitions: int

    @property
    def agree(self) -> bool:
        return math.isclose(self.exact, self.enumerated, rel_tol=1e-9, abs_tol=1e-12)


def cross_check(inst: Instance, exact: OracleResult | None = None) -> CrossCheckReport:
    """Recompute opt over all set partitions with permutation-optimal blocks."""
    if inst.n > CROSS_CHECK_LIMIT:
        raise CvrpError(f"cross_check limited to {CROSS_CHECK_LIMIT} clients, got {inst.n}")
    exact = exact or exact_cvrp(inst)
    block_cost: dict[frozenset, float] = {}
    best = math.inf
    count = 0
    for part in set_partitions(list(inst.clients)):
        count += 1
        if any(inst.load(b) > inst.capacity for b in part):
            continue
        total = 0.0
        for b in part:
            key = frozenset(b)
            if key not in block_cost:
                block_cost[key] = brute_tsp_cost([DEPOT, *sorted(b)], inst.cost)
            total += block_cost[key]
        best = min(best, total)
    if inst.n == 0:
        best = 0.0
    report = CrossCheckReport(exact.opt_cost, best, count)
    if not report.agree:
        raise OracleMismatch(
            f"{inst.name}: exact_cvrp={exact.opt_cost!r} but enumeration={best!r}"
        )
    return report


def brute_matching_weight(g: WeightedGraph) -> float:
    """Minimum perfect (loop-)matching weight by recursive enumeration."""
    nodes = sorted(g.nodes)

    def solve(remaining: tuple[int, ...]) -> float:
        if not remaining:
            return 0.0
        v, rest = remaining[0], remaining[1:]
        best = math.inf
        if v in g.loops:
            best = g.loops[v] + solve(rest)
        for k, u in enumerate(rest):
            if (v, u) in g.edges or (u, v) in g.edges:
                best = min(best, g.weight(v, u) + solve(rest[:k] + rest[k + 1:]))
        return best

    return solve(tuple(nodes))


def brute_consecutive_split(order: Sequence[int], inst: Instance) -> float:
    """Cheapest split of ``order`` over all 2^(n-1) cut patterns."""
    order = list(order)
    n = len(order)
    if n == 0:
        return 0.0
    best = math.inf
    for cuts in itertools.product((False, True), repeat=n - 1):
        segs, cur = [], [order[0]]
        for v, cut in zip(order[1:], cuts):
            if cut:
                segs.append(cur)
                cur = []
            cur.append(v)
        segs.append(cur)
        if all(inst.load(s) <= inst.capacity for s in segs):
            best = min(best, math.fsum(inst.tour_cost(s) for s in segs))
    return best


def brute_mst_weight(nodes: Sequence[int], metric: np.ndarray) -> float:
    """Minimum spanning tree weight over all labelled trees (Pruefer sequences)."""
    nodes = list(nodes)
    k = len(nodes)
    if k < 2:
        return 0.0
    if k == 2:
        return float(metric[nodes[0], nodes[1]])
    best = math.inf
    for seq in itertools.product(range(k), repeat=k - 2):
        degree = [1] * k
        for x in seq:
            degree[x] += 1
        weight = 0.0
        for x in seq:
            leaf = degree.index(1)
            weight += metric[nodes[leaf], nodes[x]]
            degree[leaf] -= 1
            degree[x] -= 1
        u, w = [i for i in range(k) if degree[i] == 1]
        weight += metric[nodes[u], nodes[w]]
        best = min(best, weight)
    return best


def brute_covering_lp(costs: Sequence[float], cover: np.ndarray) -> float:
    """min c.x s.t. cover @ x >= 1, x >= 0 by enumerating basic solutions.

    ``cover`` is (rows x columns) 0/1. Every vertex of the feasible region has
    ``columns`` tight constraints among the rows and the bounds x >= 0.
    """
    cover = np.asarray(cover, dtype=float)
    rows, cols = cover.shape
    if cols == 0:
        return 0.0 if rows == 0 else math.inf
    constraints = np.vstack([cover, np.eye(cols)])
    rhs = np.concatenate([np.ones(rows), np.zeros(cols)])
    c = np.asarray(costs, dtype=float)
    best = math.inf
    for tight in itertools.combinations(range(rows + cols), cols):
        sub = constraints[list(tight)]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        x = np.linalg.solve(sub, rhs[list(tight)])
        if np.all(constraints @ x >= rhs - 1e-9):
            best = min(best, float(c @ x))
    return best
