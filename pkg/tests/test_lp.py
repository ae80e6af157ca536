import math
from fractions import Fraction

import numpy as np
import pytest

from cvrpapprox.core import Instance, classify_clients, validate_solution
from cvrpapprox.experiments import uncovered_instance
from cvrpapprox.graphkit import christofides, held_karp_tsp
from cvrpapprox.lp import (
    GAMMA,
    ConfigColumn,
    LpError,
    LpSolution,
    derandomize,
    enumerate_columns,
    inclusion_probabilities,
    randomized_round,
    solve_config_lp,
    solve_lp_based,
)
from cvrpapprox.oracle import brute_covering_lp, exact_cvrp
from cvrpapprox.split import dp_split

from .conftest import line_instance, random_instances

THIRD = Fraction(1, 3)


def lp_for(inst, delta=THIRD):
    _, big = classify_clients(inst, delta)
    return solve_config_lp(enumerate_columns(inst, delta), big)


def cover_matrix(lp):
    rows = [[1.0 if v in col.clients else 0.0 for col in lp.columns] for v in lp.big]
    return np.array(rows).reshape(len(lp.big), len(lp.columns))


def test_column_count_four_clients_at_forty_percent():
    inst = line_instance([1.0, 2.0, 3.0, 4.0], [4, 4, 4, 4], 10)
    cols = enumerate_columns(inst, THIRD)
    assert len(cols) == 4 + 6
    assert [c.clients for c in cols[:4]] == [(1,), (2,), (3,), (4,)]
    by_set = {c.clients: c.cost for c in cols}
    assert by_set[(2,)] == pytest.approx(4.0)
    assert by_set[(1, 4)] == pytest.approx(8.0)
    for c in cols:
        assert sorted(c.tour_order) == list(c.clients)


def test_column_size_capped_by_threshold():
    inst = line_instance([1.0] * 5, [3] * 5, 15)
    # 3/15 = 0.2 is big at 1/6; at most six per set but only five clients
    assert max(len(c.clients) for c in enumerate_columns(inst, Fraction(1, 6))) == 5
    assert enumerate_columns(inst, Fraction(1, 4)) == []


def test_delta_range_enforced():
    inst = line_instance([1.0], [5], 10)
    with pytest.raises(ValueError):
        enumerate_columns(inst, Fraction(1, 8))
    with pytest.raises(ValueError):
        solve_lp_based(inst, Fraction(3, 5))


def test_lp_incompatible_pair_pays_loops():
    inst = line_instance([2.0, 3.0], [6, 6], 10)
    lp = lp_for(inst)
    assert lp.objective == pytest.approx(4.0 + 6.0)
    assert np.allclose(lp.x, [1.0, 1.0])


def test_lp_prefers_cheap_pair():
    cost = np.array([[0, 5, 5], [5, 0, 1], [5, 1, 0]], dtype=float)
    inst = Instance(cost, (0, 4, 4), 10, "pair")
    lp = lp_for(inst)
    assert lp.objective == pytest.approx(11.0)
    assert lp.x[2] == pytest.approx(1.0)
    assert sum(lp.duals.values()) == pytest.approx(11.0)


def test_lp_half_integral_triangle():
    lp = lp_for(uncovered_instance())
    pairs = [j for j, col in enumerate(lp.columns) if len(col.clients) == 2]
    assert np.allclose(lp.x[pairs], 0.5)
    assert lp.objective == pytest.approx(brute_covering_lp([c.cost for c in lp.columns], cover_matrix(lp)))


@pytest.mark.parametrize("inst", random_instances(40, 8, seed=31), ids=lambda i: i.name)
def test_lp_matches_vertex_enumeration(inst):
    lp = lp_for(inst)
    assert lp.gap <= 1e-6
    if len(lp.columns) <= 12:
        brute = brute_covering_lp([c.cost for c in lp.columns], cover_matrix(lp))
        assert lp.objective == pytest.approx(brute, rel=1e-9, abs=1e-9)
    assert lp.objective <= exact_cvrp(inst).opt_cost + 1e-9


def test_lp_rejects_uncoverable_client():
    col = ConfigColumn((1,), (1,), 2.0)
    with pytest.raises(LpError):
        solve_config_lp([col], [1, 2])


def fake_lp(x):
    cols = tuple(ConfigColumn((j + 1,), (j + 1,), 1.0) for j in range(len(x)))
    return LpSolution(cols, tuple(range(1, len(x) + 1)), np.array(x, dtype=float), float(sum(x)), {}, "optimal")


def test_rounding_extremes():
    lp = fake_lp([0.0, 1 / GAMMA, 1.0, 0.5])
    assert np.allclose(inclusion_probabilities(lp), [0.0, 1.0, GAMMA, GAMMA / 2])
    for seed in range(300):
        chosen = set(randomized_round(lp, seed=seed))
        assert 0 not in chosen and 1 in chosen


def test_rounding_frequency():
    lp = fake_lp([0.5])
    trials = 20_000
    hits = sum(bool(randomized_round(lp, seed=s)) for s in range(trials))
    p = GAMMA / 2
    assert abs(hits / trials - p) <= 3 * math.sqrt(p * (1 - p) / trials)
    assert p == pytest.approx(0.3466, abs=1e-4)


def test_derandomize_keeps_integral_solution():
    inst = line_instance([2.0, 3.0], [6, 6], 10)
    lp = lp_for(inst)
    tour = held_karp_tsp([0, 1, 2], inst.cost)
    chosen, trace = derandomize(lp, inst, THIRD, tour.cost)
    assert sorted(chosen) == [0, 1]
    assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))


@pytest.mark.parametrize("inst", random_instances(30, 9, seed=32), ids=lambda i: i.name)
@pytest.mark.parametrize("delta", [Fraction(1, 4), THIRD])
def test_derandomized_certificate(inst, delta):
    sol, cert = solve_lp_based(inst, delta)
    assert validate_solution(sol, inst) is None
    assert all(cert.ledger().values()), cert.ledger()
    assert cert.returned_cost <= cert.phi_initial + 1e-6 * max(1, cert.phi_initial)
    again, _ = solve_lp_based(inst, delta)
    assert again == sol


@pytest.mark.parametrize("inst", random_instances(10, 8, seed=33), ids=lambda i: i.name)
def test_sampled_mode_reproducible(inst):
    a, ca = solve_lp_based(inst, THIRD, mode="sampled", seed=4)
    b, _ = solve_lp_based(inst, THIRD, mode="sampled", seed=4)
    assert a == b and validate_solution(a, inst) is None
    assert ca.phi_initial is None and all(ca.ledger().values())


def test_no_big_clients_reduces_to_split():
    inst = line_instance([1.0, 2.0, 3.0], [1, 2, 1], 10)
    sol, cert = solve_lp_based(inst, THIRD)
    assert cert.lp_objective == 0.0 and cert.chosen == ()
    assert sol == dp_split(christofides([0, 1, 2, 3], inst.cost), inst)


def test_unknown_mode():
    with pytest.raises(ValueError):
        solve_lp_based(line_instance([1.0], [5], 10), mode="greedy")
