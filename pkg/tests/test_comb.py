import numpy as np
import pytest

from cvrpapprox.comb import build_aux_graph, match_big, solve_classic, solve_combinatorial
from cvrpapprox.core import Instance, radial_bounds, validate_solution
from cvrpapprox.oracle import brute_matching_weight, exact_cvrp

from .conftest import line_instance, random_instances


def pair_instance(du=4, dv=4, capacity=10):
    cost = np.array([[0, 5, 5], [5, 0, 1], [5, 1, 0]], dtype=float)
    return Instance(cost, (0, du, dv), capacity, "pair")


def test_aux_graph_shape():
    aux = build_aux_graph(pair_instance())
    assert aux.nodes == (1, 2)
    assert aux.edges == {(1, 2): 11.0}
    assert aux.loops == {1: 10.0, 2: 10.0}


def test_aux_graph_drops_overloaded_pairs():
    aux = build_aux_graph(pair_instance(6, 6))
    assert aux.edges == {}


def test_aux_graph_ignores_small_clients():
    aux = build_aux_graph(pair_instance(3, 4))  # 3/10 <= 1/3
    assert aux.nodes == (2,)


def test_match_big_pairs_close_clients():
    inst = pair_instance()
    pairs, sol = match_big(build_aux_graph(inst), inst)
    assert pairs == [(1, 2)]
    assert sol.total_cost == pytest.approx(11.0)


def test_all_big_incompatible_costs_loops():
    inst = line_instance([1.0, 2.0, 4.0], [7, 7, 7], 10)
    sol, cert = solve_combinatorial(inst)
    b = radial_bounds(inst, "1/3")
    assert cert.cost_M == pytest.approx(b.D_prime_big)
    assert sol.total_cost == pytest.approx(b.D_prime_big)
    assert cert.ok


def test_single_small_client():
    inst = line_instance([3.0], [1], 10)
    sol, cert = solve_combinatorial(inst)
    assert sol.total_cost == pytest.approx(6.0)
    assert cert.cost_M == 0.0 and cert.ok


def test_empty_instance():
    inst = Instance(np.zeros((1, 1)), (0,), 5, "empty")
    sol, cert = solve_combinatorial(inst)
    assert sol.tours == () and cert.returned_cost == 0.0
    classic, info = solve_classic(inst)
    assert classic.tours == () and info["ok"]


def test_tie_prefers_matched_solution():
    inst = line_instance([2.0], [5], 10)
    _, cert = solve_combinatorial(inst)
    assert cert.cost_T == cert.cost_F and cert.chose == "T"


@pytest.mark.parametrize("inst", random_instances(40, 9, seed=21), ids=lambda i: i.name)
@pytest.mark.parametrize("tsp", ["christofides", "held-karp"])
def test_combinatorial_certificate_and_ratio(inst, tsp):
    sol, cert = solve_combinatorial(inst, tsp)
    assert validate_solution(sol, inst) is None
    assert cert.ledger() == {k: True for k in cert.ledger()}
    aux = build_aux_graph(inst)
    assert cert.cost_M == pytest.approx(brute_matching_weight(aux), abs=1e-9)
    opt = exact_cvrp(inst).opt_cost
    assert sol.total_cost <= 2.75 * opt * (1 + 1e-9)


@pytest.mark.parametrize("inst", random_instances(20, 9, seed=22), ids=lambda i: i.name)
def test_classic_tank_bound(inst):
    sol, info = solve_classic(inst)
    assert validate_solution(sol, inst) is None
    assert info["ok"]
