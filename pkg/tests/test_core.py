from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvrpapprox.core import (
    CvrpError,
    Instance,
    Solution,
    Tour,
    classify_clients,
    instance_from_points,
    radial_bounds,
    solution_cost,
    validate_instance,
    validate_solution,
)
from cvrpapprox.fileio import GeneratorConfig, generate_instance

from .conftest import line_instance


def test_collinear_points_are_metric():
    inst = instance_from_points([(0, 0), (1, 0), (3, 0)], [0, 1, 1], 2)
    assert validate_instance(inst) is None


def test_triangle_violation_reported_with_middle_node():
    cost = np.array([[0, 10, 1], [10, 0, 1], [1, 1, 0]], dtype=float)
    inst = Instance(cost, (0, 0, 0), 1)
    # depot demand fine, but clients have demand 0 -> demand check comes first
    assert validate_instance(inst).kind == "demand-range"
    inst = Instance(cost, (0, 1, 1), 1)
    v = validate_instance(inst)
    assert v.kind == "triangle"
    assert v.where == (0, 2, 1)


def test_triangle_warn_mode_does_not_fail():
    cost = np.array([[0, 10, 1], [10, 0, 1], [1, 1, 0]], dtype=float)
    inst = Instance(cost, (0, 1, 1), 1)
    with pytest.warns(UserWarning, match="triangle"):
        assert validate_instance(inst, triangle="warn") is None


def test_demand_above_capacity():
    inst = line_instance([1.0], [4], 3)
    assert validate_instance(inst).kind == "demand-range"


def test_asymmetric_cost():
    cost = np.array([[0, 1], [2, 0]], dtype=float)
    assert validate_instance(Instance(cost, (0, 1), 1)).kind == "symmetry"


def test_shape_mismatch_raises():
    with pytest.raises(CvrpError):
        Instance(np.zeros((2, 2)), (0, 1, 1), 1)


@pytest.mark.parametrize(
    "demand, delta, expected",
    [(1, Fraction(1, 3), "small"), (2, Fraction(1, 3), "big"), (1, 0, "big")],
)
def test_classify_boundary(demand, delta, expected):
    inst = line_instance([1.0], [demand], 3)
    small, big = classify_clients(inst, delta)
    assert (small, big) == (((1,), ()) if expected == "small" else ((), (1,)))


def test_classify_rejects_delta_out_of_range():
    inst = line_instance([1.0], [1], 3)
    with pytest.raises(CvrpError):
        classify_clients(inst, Fraction(2, 3))


def test_radial_bounds_single_client():
    inst = line_instance([5.0], [3], 3)
    b = radial_bounds(inst, Fraction(1, 3))
    assert (b.D, b.D_small, b.D_big, b.D_prime_big) == (10.0, 0.0, 10.0, 10.0)


def test_radial_bounds_empty():
    inst = Instance(np.zeros((1, 1)), (0,), 5)
    b = radial_bounds(inst, Fraction(1, 3))
    assert (b.D, b.D_small, b.D_big, b.D_prime_big) == (0.0, 0.0, 0.0, 0.0)


def test_radial_bounds_mixed():
    inst = line_instance([1.0, 2.0], [2, 5], 10)
    b = radial_bounds(inst, Fraction(1, 3))
    assert b.D_small == pytest.approx(0.4)
    assert b.D_big == pytest.approx(2.0)
    assert b.D_prime_big == pytest.approx(4.0)
    assert b.D == pytest.approx(2.4)


@settings(max_examples=50, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    n=st.integers(0, 15),
    p=st.integers(0, 6),
)
def test_radial_bounds_properties(seed, n, p):
    inst = generate_instance(GeneratorConfig(n=n, capacity=24, seed=seed))
    lo = radial_bounds(inst, Fraction(p, 12))
    hi = radial_bounds(inst, Fraction(min(p + 1, 6), 12))
    for b in (lo, hi):
        assert b.D_small + b.D_big == pytest.approx(b.D, rel=1e-12, abs=1e-12)
        assert b.D_big <= b.D_prime_big + 1e-12
        assert min(b.D, b.D_small, b.D_big, b.D_prime_big) >= 0
    assert hi.D_small >= lo.D_small - 1e-12
    assert hi.D_big <= lo.D_big + 1e-12


def test_empty_solution_ok():
    inst = Instance(np.zeros((1, 1)), (0,), 5)
    sol = Solution()
    assert solution_cost(sol, inst) == 0
    assert validate_solution(sol, inst) is None


def test_validate_solution_errors(square):
    over = Solution((Tour((1, 2, 3), 3, square.tour_cost((1, 2, 3))),))
    assert validate_solution(over, square) is None
    small_cap = Instance(square.cost, square.demand, 2)
    assert validate_solution(Solution.of(small_cap, [[1, 2, 3]]), small_cap).kind == "overload"
    dup = Solution.of(square, [[1, 2], [2, 3]])
    assert validate_solution(dup, square).kind == "duplicate"
    missing = Solution.of(square, [[1, 2]])
    assert validate_solution(missing, square).kind == "missing"


def test_tour_cost_recomputed(square):
    t = Tour.of(square, [1, 2, 3])
    assert t.cost == pytest.approx(4.0)
    assert t.load == 3
    forged = Solution((Tour((1, 2, 3), 3, 1.0),))
    assert validate_solution(forged, square).kind == "cost-mismatch"
    assert solution_cost(forged, square) == pytest.approx(4.0)
