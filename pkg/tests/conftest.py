from __future__ import annotations

import numpy as np
import pytest

from cvrpapprox.core import Instance, instance_from_points
from cvrpapprox.fileio import GeneratorConfig, generate_instance


def line_instance(radii, demand, capacity, name="line"):
    """Clients on a ray from the depot; cost is |r_u - r_v|."""
    pos = np.array([0.0, *radii])
    cost = np.abs(pos[:, None] - pos[None, :])
    return Instance(cost, (0, *demand), capacity, name)


def random_instances(count, max_n, seed=0, capacities=(10, 30, 100)):
    out = []
    for k in range(count):
        out.append(generate_instance(GeneratorConfig(
            n=1 + k % max_n,
            capacity=capacities[k % len(capacities)],
            demand=("uniform", "small-heavy")[(k // len(capacities)) % 2],
            seed=seed * 10_000 + k,
        )))
    return out


@pytest.fixture
def square():
    """Depot plus three corners of the unit square."""
    return instance_from_points([(0, 0), (1, 0), (1, 1), (0, 1)], [0, 1, 1, 1], 3, name="square")


@pytest.fixture
def unit_square_metric():
    pts = np.array([(0, 0), (1, 0), (1, 1), (0, 1)], dtype=float)
    return np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
