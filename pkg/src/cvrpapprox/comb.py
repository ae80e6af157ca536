"""Combinatorial solver: matched big-client tours plus split small-client tour,
against a split of one tour over everyone; the cheaper wins.

Big/small uses a fixed threshold of one third of the capacity, so no tour
can hold more than two big clients and a loop-matching on big clients
describes every big-only tour set.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .core import DEPOT, Instance, RadialBounds, Solution, Tour, classify_clients, radial_bounds
from .graphkit import TspAlgorithm, WeightedGraph, get_tsp, matching_weight, min_weight_perfect_matching
from .split import dp_split

COMB_DELTA = Fraction(1, 3)
LEDGER_RTOL = 1e-6


def build_aux_graph(inst: Instance) -> WeightedGraph:
    _, big = classify_clients(inst, COMB_DELTA)
    c = inst.cost
    edges = {}
    for i, u in enumerate(big):
        for v in big[i + 1:]:
            if inst.demand[u] + inst.demand[v] <= inst.capacity:
                edges[(u, v)] = float(c[DEPOT, u] + c[u, v] + c[v, DEPOT])
    loops = {v: 2.0 * float(c[DEPOT, v]) for v in big}
    return WeightedGraph(tuple(big), edges, loops)


def match_big(aux: WeightedGraph, inst: Instance) -> tuple[list[tuple[int, int]], Solution]:
    """Min-cost loop-matching and the tours it encodes (loop -> out-and-back)."""
    pairs = min_weight_perfect_matching(aux)
    tours = [(u,) if u == v else (u, v) for u, v in pairs]
    return pairs, Solution(tuple(Tour.of(inst, t) for t in tours))


@dataclass(frozen=True)
class CombCertificate:
    cost_M: float
    cost_T: float
    cost_F: float
    tsp_small_cost: float
    tsp_full_cost: float
    bounds: RadialBounds
    returned_cost: float
    chose: str

    def ledger(self) -> dict[str, bool]:
        """Per-run inequalities; True means the inequality holds."""
        b = self.bounds

        def le(lhs: float, rhs: float) -> bool:
            return lhs <= rhs + LEDGER_RTOL * max(1.0, abs(rhs))

        sol_one = self.cost_M + self.tsp_small_cost + 1.5 * b.D_small
        sol_two = self.tsp_full_cost + 1.5 * b.D_small + 3.0 * b.D_big - 0.5 * b.D_prime_big
        return {
            "returned_is_min": self.returned_cost == min(self.cost_T, self.cost_F),
            "matching_le_loops": le(self.cost_M, b.D_prime_big),
            "matched_solution_bound": le(self.cost_T, sol_one),
            "full_split_bound": le(self.cost_F, sol_two),
            "averaged_bound": le(self.returned_cost, 0.5 * (sol_one + sol_two)),
        }

    @property
    def ok(self) -> bool:
        return all(self.ledger().values())


def solve_combinatorial(
    inst: Instance, tsp_alg: str | TspAlgorithm = "christofides"
) -> tuple[Solution, CombCertificate]:
    tsp = get_tsp(tsp_alg)
    small, _ = classify_clients(inst, COMB_DELTA)
    bounds = radial_bounds(inst, COMB_DELTA)

    aux = build_aux_graph(inst)
    pairs, matched = match_big(aux, inst)
    cost_m = matching_weight(aux, pairs)
    small_tour = tsp([DEPOT, *small], inst.cost)
    candidate_t = matched + dp_split(small_tour, inst)

    full_tour = tsp([DEPOT, *inst.clients], inst.cost)
    candidate_f = dp_split(full_tour, inst)

    cost_t, cost_f = candidate_t.total_cost, candidate_f.total_cost
    # ties go to the matched solution
    chose, best = ("T", candidate_t) if cost_t <= cost_f else ("F", candidate_f)
    cert = CombCertificate(
        cost_M=cost_m,
        cost_T=cost_t,
        cost_F=cost_f,
        tsp_small_cost=small_tour.cost,
        tsp_full_cost=full_tour.cost,
        bounds=bounds,
        returned_cost=min(cost_t, cost_f),
        chose=chose,
    )
    return best, cert


def solve_classic(
    inst: Instance, tsp_alg: str | TspAlgorithm = "christofides"
) -> tuple[Solution, dict]:
    """Baseline: optimal consecutive split of one TSP tour over all clients."""
    tour = get_tsp(tsp_alg)([DEPOT, *inst.clients], inst.cost)
    sol = dp_split(tour, inst)
    bounds = radial_bounds(inst, 0)
    bound = tour.cost + 2.0 * bounds.D
    return sol, {
        "tsp_cost": tour.cost,
        "bounds": bounds,
        "bound": bound,
        "ok": sol.total_cost <= bound + LEDGER_RTOL * max(1.0, bound),
    }

