"""Instance and solution model, client classification and radial lower bounds.

Demands and capacity stay integral; a client's normalized demand is
``demand / capacity``. Node 0 is always the depot and clients are 1..n.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

DEPOT = 0
REL_TOL = 1e-9


class CvrpError(ValueError):
    """Base class for invalid inputs anywhere in the package."""


@dataclass(frozen=True)
class Violation:
    """A single failed invariant, with enough detail to locate it."""

    kind: str
    detail: str
    where: tuple = ()

    def __str__(self) -> str:
        return f"{self.kind}: {self.detail}"


@dataclass(frozen=True, eq=False)
class Instance:
    """An unsplittable CVRP instance.

    ``cost`` is an (n+1)x(n+1) symmetric matrix over the depot (row 0) and
    the clients; ``demand[0]`` is the depot's demand and must be 0.
    """

    cost: np.ndarray
    demand: tuple[int, ...]
    capacity: int
    name: str = "instance"
    coords: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        cost = np.asarray(self.cost, dtype=float)
        cost.setflags(write=False)
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "demand", tuple(int(d) for d in self.demand))
        if self.coords is not None:
            coords = np.asarray(self.coords, dtype=float)
            coords.setflags(write=False)
            object.__setattr__(self, "coords", coords)
        if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
            raise CvrpError(f"cost matrix must be square, got shape {cost.shape}")
        if cost.shape[0] != len(self.demand):
            raise CvrpError(
                f"cost matrix has {cost.shape[0]} nodes but {len(self.demand)} demands given"
            )
        if len(self.demand) == 0:
            raise CvrpError("an instance needs at least the depot")

    @property
    def n(self) -> int:
        return len(self.demand) - 1

    @property
    def clients(self) -> range:
        return range(1, self.n + 1)

    def c(self, u: int, v: int) -> float:
        return float(self.cost[u, v])

    def load(self, clients: Iterable[int]) -> int:
        return sum(self.demand[v] for v in clients)

    def path_cost(self, nodes: Sequence[int]) -> float:
        return math.fsum(self.cost[a, b] for a, b in zip(nodes, nodes[1:]))

    def tour_cost(self, clients: Sequence[int]) -> float:
        if not clients:
            return 0.0
        return self.path_cost([DEPOT, *clients, DEPOT])


@dataclass(frozen=True)
class Tour:
    clients: tuple[int, ...]
    load: int
    cost: float

    @classmethod
    def of(cls, inst: Instance, clients: Iterable[int]) -> Tour:
        seq = tuple(int(v) for v in clients)
        return cls(seq, inst.load(seq), inst.tour_cost(seq))

    def __len__(self) -> int:
        return len(self.clients)


@dataclass(frozen=True)
class Solution:
    tours: tuple[Tour, ...] = ()

    @classmethod
    def of(cls, inst: Instance, tours: Iterable[Iterable[int]]) -> Solution:
        built = (Tour.of(inst, t) for t in tours)
        return cls(tuple(t for t in built if t.clients))

    @property
    def total_cost(self) -> float:
        return math.fsum(t.cost for t in self.tours)

    def client_lists(self) -> list[list[int]]:
        return [list(t.clients) for t in self.tours]

    def __add__(self, other: Solution) -> Solution:
        return Solution(self.tours + other.tours)


@dataclass(frozen=True)
class RadialBounds:
    delta: Fraction
    D: float
    D_small: float
    D_big: float
    D_prime_big: float


def as_delta(delta, low: Fraction = Fraction(0), high: Fraction = Fraction(1, 2)) -> Fraction:
    """Coerce ``delta`` (Fraction, int, str like '1/3', or float) and range-check it."""
    if isinstance(delta, float):
        frac = Fraction(delta).limit_denominator(10**6)
    else:
        frac = Fraction(delta)
    if not low <= frac <= high:
        raise CvrpError(f"delta={frac} outside [{low}, {high}]")
    return frac


def is_small(inst: Instance, v: int, delta: Fraction) -> bool:
    # d_v <= delta  <=>  demand*q <= p*Q
    return inst.demand[v] * delta.denominator <= delta.numerator * inst.capacity


def classify_clients(inst: Instance, delta) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Split clients into (small, big); a demand exactly at delta counts as small."""
    frac = as_delta(delta)
    small, big = [], []
    for v in inst.clients:
        (small if is_small(inst, v, frac) else big).append(v)
    return tuple(small), tuple(big)


def radial_bounds(inst: Instance, delta) -> RadialBounds:
    frac = as_delta(delta)
    small_terms, big_terms, big_loops = [], [], []
    for v in inst.clients:
        radial = 2.0 * inst.demand[v] / inst.capacity * inst.cost[DEPOT, v]
        if is_small(inst, v, frac):
            small_terms.append(radial)
        else:
            big_terms.append(radial)
            big_loops.append(2.0 * inst.cost[DEPOT, v])
    d_small = math.fsum(small_terms)
    d_big = math.fsum(big_terms)
    return RadialBounds(
        delta=frac,
        D=math.fsum(small_terms + big_terms),
        D_small=d_small,
        D_big=d_big,
        D_prime_big=math.fsum(big_loops),
    )


def validate_instance(inst: Instance, triangle: str = "hard") -> Violation | None:
    """Return the first violated instance invariant, or None.

    ``triangle`` is "hard" (violation), "warn" (emit a warning and continue)
    or "off". Rounded CVRPLIB matrices routinely break triangles by one unit.
    """
    cost = inst.cost
    if inst.capacity < 1:
        return Violation("capacity", f"capacity must be positive, got {inst.capacity}")
    if not np.all(np.isfinite(cost)):
        u, v = map(int, np.argwhere(~np.isfinite(cost))[0])
        return Violation("finite", f"cost({u},{v}) is not finite", (u, v))
    if np.any(cost < 0):
        u, v = map(int, np.argwhere(cost < 0)[0])
        return Violation("nonnegative", f"cost({u},{v})={cost[u, v]} < 0", (u, v))
    diag = np.nonzero(np.diag(cost))[0]
    if diag.size:
        u = int(diag[0])
        return Violation("diagonal", f"cost({u},{u})={cost[u, u]} != 0", (u, u))
    asym = np.argwhere(cost != cost.T)
    if asym.size:
        u, v = map(int, asym[0])
        return Violation(
            "symmetry", f"cost({u},{v})={cost[u, v]} != cost({v},{u})={cost[v, u]}", (u, v)
        )
    if inst.demand[DEPOT] != 0:
        return Violation("depot-demand", f"depot demand is {inst.demand[DEPOT]}, expected 0", (0,))
    for v in inst.clients:
        if not 0 < inst.demand[v] <= inst.capacity:
            return Violation(
                "demand-range",
                f"client {v} has demand {inst.demand[v]} outside (0, {inst.capacity}]",
                (v,),
            )
    if triangle != "off" and cost.size:
        tol = REL_TOL * float(cost.max(initial=0.0))
        for mid in range(cost.shape[0]):
            via = cost[:, mid][:, None] + cost[mid, :][None, :]
            bad = np.argwhere(cost > via + tol)
            if bad.size:
                u, w = map(int, bad[0])
                msg = (
                    f"cost({u},{w})={cost[u, w]} > cost({u},{mid})+cost({mid},{w})"
                    f"={via[u, w]}"
                )
                if triangle == "hard":
                    return Violation("triangle", msg, (u, mid, w))
                warnings.warn(f"triangle inequality violated: {msg}", stacklevel=2)
                break
    return None


def solution_cost(sol: Solution, inst: Instance) -> float:
    """Total cost recomputed from the instance, ignoring cached tour costs."""
    return math.fsum(inst.tour_cost(t.clients) for t in sol.tours)


def validate_solution(sol: Solution, inst: Instance) -> Violation | None:
    seen: dict[int, int] = {}
    for k, tour in enumerate(sol.tours):
        for v in tour.clients:
            if not 1 <= v <= inst.n:
                return Violation("unknown-client", f"tour {k} visits unknown client {v}", (k, v))
            if v in seen:
                return Violation(
                    "duplicate", f"client {v} appears in tours {seen[v]} and {k}", (v,)
                )
            seen[v] = k
        load = inst.load(tour.clients)
        if load > inst.capacity:
            return Violation(
                "overload", f"tour {k} carries {load} > capacity {inst.capacity}", (k,)
            )
        if load != tour.load:
            return Violation("load-mismatch", f"tour {k} records load {tour.load}, actual {load}", (k,))
        actual = inst.tour_cost(tour.clients)
        if not math.isclose(actual, tour.cost, rel_tol=REL_TOL, abs_tol=1e-12):
            return Violation(
                "cost-mismatch", f"tour {k} records cost {tour.cost}, actual {actual}", (k,)
            )
    missing = [v for v in inst.clients if v not in seen]
    if missing:
        return Violation("missing", f"clients {missing} are not served", tuple(missing))
    return None


def euclidean_matrix(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    diff = pts[:, None, :] - pts[None, :, :]
    return np.sqrt((diff**2).sum(axis=-1))


def instance_from_points(
    points, demand: Sequence[int], capacity: int, name: str = "instance", rounded: bool = False
) -> Instance:
    """Build an instance from 2-D points; ``points[0]`` is the depot."""
    cost = euclidean_matrix(points)
    if rounded:
        cost = np.floor(cost + 0.5)
    return Instance(cost, tuple(demand), capacity, name, coords=np.asarray(points, dtype=float))
