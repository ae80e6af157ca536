"""Tour partitioning with a reserve tank of size delta.

The randomized procedure tiles the cumulative-demand line with tiles of
length ``1 - delta`` (the first one of random length ``theta``). A client
whose demand interval catches a tile endpoint is *bad* and forces a return
to the depot; a big client caught early enough in its interval gets its own
round trip. ``dp_split`` finds the optimal consecutive partition, which is
never worse than any outcome of the randomized procedure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import DEPOT, CvrpError, Instance, RadialBounds, Solution, Tour, as_delta
from .graphkit import TspResult


@dataclass(frozen=True)
class SplitOutcome:
    theta: float
    bad: frozenset[int]
    four_copy: frozenset[int]
    solution: Solution
    added_cost: float


def client_order(tsp: TspResult | Sequence[int]) -> list[int]:
    """Clients in tour order, starting right after the depot."""
    tour = list(tsp.tour if isinstance(tsp, TspResult) else tsp)
    if not tour:
        return []
    if DEPOT not in tour:
        raise CvrpError("TSP tour must contain the depot")
    k = tour.index(DEPOT)
    return tour[k + 1:] + tour[:k]


def mark_bad(
    demands: Sequence[int], capacity: int, delta, theta: float
) -> tuple[frozenset[int], frozenset[int]]:
    """Positions of bad clients and of those needing two round trips.

    ``demands`` are integral and listed in tour order; normalized demand is
    ``demands[i] / capacity``. Tile endpoints sit at ``theta + l*(1-delta)``.
    Everything is scaled by ``capacity * q`` (delta = p/q) so prefix sums and
    tile lengths are exact integers and only ``theta`` carries rounding.
    """
    frac = as_delta(delta)
    if not 0.0 <= theta <= float(1 - frac) + 1e-15:
        raise CvrpError(f"theta={theta} outside [0, {1 - frac}]")
    p, q = frac.numerator, frac.denominator
    start = theta * capacity * q
    step = capacity * (q - p)
    reserve = capacity * p

    bad, four = set(), set()
    prefix = 0
    for i, d in enumerate(demands):
        lo, prefix = prefix * q, (prefix + d)
        hi = prefix * q
        # smallest tile endpoint strictly right of lo
        if lo < start:
            ell = 0
        else:
            ell = math.floor((lo - start) / step) + 1
            while start + ell * step <= lo:
                ell += 1
            while ell > 0 and start + (ell - 1) * step > lo:
                ell -= 1
        endpoint = start + ell * step
        if endpoint <= hi:
            bad.add(i)
            if endpoint < hi - reserve:
                four.add(i)
    return frozenset(bad), frozenset(four)


def sample_theta(delta, rng: np.random.Generator) -> float:
    return float(rng.random()) * float(1 - as_delta(delta))


def randomized_split(
    tsp: TspResult | Sequence[int],
    inst: Instance,
    delta,
    seed: int | None = None,
    theta: float | None = None,
) -> SplitOutcome:
    """Split a TSP tour at bad clients for one draw of ``theta``.

    A bad client with one round trip closes the current tour after itself; one
    with two round trips closes it before itself and is served alone. Empty
    tours are dropped.
    """
    frac = as_delta(delta)
    if theta is None:
        theta = sample_theta(frac, np.random.default_rng(seed))
    order = client_order(tsp)
    bad, four = mark_bad([inst.demand[v] for v in order], inst.capacity, frac, theta)

    tours: list[list[int]] = []
    current: list[int] = []
    added = []
    for i, v in enumerate(order):
        if i in four:
            tours.append(current)
            tours.append([v])
            current = []
            added.append(4.0 * inst.cost[DEPOT, v])
        elif i in bad:
            current.append(v)
            tours.append(current)
            current = []
            added.append(2.0 * inst.cost[DEPOT, v])
        else:
            current.append(v)
    tours.append(current)
    return SplitOutcome(
        theta=theta,
        bad=frozenset(order[i] for i in bad),
        four_copy=frozenset(order[i] for i in four),
        solution=Solution.of(inst, (t for t in tours if t)),
        added_cost=math.fsum(added),
    )


def split_bound(tsp_cost: float, bounds: RadialBounds) -> float:
    """Expected-cost bound of the randomized split for the given radial terms."""
    delta = float(bounds.delta)
    keep = 1.0 - delta
    return (
        tsp_cost
        + bounds.D_small / keep
        + 2.0 * bounds.D_big / keep
        - delta * bounds.D_prime_big / keep
    )


def dp_split_order(order: Sequence[int], inst: Instance) -> Solution:
    """Cheapest partition of ``order`` into consecutive capacity-feasible tours."""
    order = list(order)
    n = len(order)
    if n == 0:
        return Solution()
    cost = inst.cost
    for v in order:
        if inst.demand[v] > inst.capacity:
            raise CvrpError(f"client {v} alone exceeds the capacity")
    best = [0.0] + [math.inf] * n
    cut = [0] * (n + 1)
    for i in range(n):
        base = best[i]
        load = 0
        path = 0.0
        for j in range(i, n):
            v = order[j]
            load += inst.demand[v]
            if load > inst.capacity:
                break
            if j > i:
                path += cost[order[j - 1], v]
            total = base + cost[DEPOT, order[i]] + path + cost[v, DEPOT]
            if total < best[j + 1]:
                best[j + 1] = total
                cut[j + 1] = i
    segments = []
    j = n
    while j > 0:
        i = cut[j]
        segments.append(order[i:j])
        j = i
    return Solution(tuple(Tour.of(inst, seg) for seg in reversed(segments)))


def dp_split(tsp: TspResult | Sequence[int], inst: Instance) -> Solution:
    return dp_split_order(client_order(tsp), inst)


def empirical_bad_rates(
    demands: Sequence[int], capacity: int, delta, trials: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Fractions of ``trials`` theta draws marking each position bad / two-trip."""
    frac = as_delta(delta)
    rng = np.random.default_rng(seed)
    bad_hits = np.zeros(len(demands))
    four_hits = np.zeros(len(demands))
    for _ in range(trials):
        bad, four = mark_bad(demands, capacity, frac, sample_theta(frac, rng))
        for i in bad:
            bad_hits[i] += 1
        for i in four:
            four_hits[i] += 1
    return bad_hits / trials, four_hits / trials


def bad_probability(demand: int, capacity: int, delta) -> Fraction:
    frac = as_delta(delta)
    return min(Fraction(1), Fraction(demand, capacity) / (1 - frac))


def four_copy_probability(demand: int, capacity: int, delta) -> Fraction:
    frac = as_delta(delta)
    d = Fraction(demand, capacity)
    if d <= frac:
        return Fraction(0)
    return (d - frac) / (1 - frac)
