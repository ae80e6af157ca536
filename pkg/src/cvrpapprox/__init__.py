"""Approximation algorithms for unsplittable capacitated vehicle routing."""

from .comb import solve_classic, solve_combinatorial
from .core import (
    Instance,
    RadialBounds,
    Solution,
    Tour,
    classify_clients,
    radial_bounds,
    solution_cost,
    validate_instance,
    validate_solution,
)
from .fileio import GeneratorConfig, generate_instance, parse_instance, read_solution, write_solution
from .lp import solve_lp_based
from .oracle import exact_cvrp

__version__ = "0.1.0"
