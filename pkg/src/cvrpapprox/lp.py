"""Configuration-LP solver: fractional cover of big clients by feasible
big-only tours, rounded (sampled or derandomized), then a tank-split tour
over whatever is left.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import DEPOT, CvrpError, Instance, RadialBounds, Solution, Tour, classify_clients, radial_bounds
from .graphkit import TspAlgorithm, TspResult, cycle_cost, get_tsp, held_karp_tsp
from .split import client_order, dp_split_order

log = logging.getLogger(__name__)

GAMMA = math.log(2.0)
DEFAULT_DELTA = Fraction(1, 3)
MIN_DELTA = Fraction(1, 6)
COLUMN_BUDGET = 5_000_000
PIVOT_TOL = 1e-9
COVER_TOL = 1e-7
GAP_RTOL = 1e-6


class LpError(CvrpError):
    """Simplex failure or an uncertifiable LP solution."""


class ColumnBudgetExceeded(CvrpError):
    pass


@dataclass(frozen=True)
class ConfigColumn:
    clients: tuple[int, ...]
    tour_order: tuple[int, ...]
    cost: float


@dataclass(frozen=True)
class LpSolution:
    columns: tuple[ConfigColumn, ...]
    big: tuple[int, ...]
    x: np.ndarray
    objective: float
    duals: dict[int, float]
    status: str
    gap: float = 0.0
    iterations: int = 0


def check_lp_delta(delta) -> Fraction:
    frac = Fraction(delta) if not isinstance(delta, float) else Fraction(delta).limit_denominator(10**6)
    if not MIN_DELTA <= frac <= Fraction(1, 2):
        raise CvrpError(f"delta={frac} outside [{MIN_DELTA}, 1/2] for the LP solver")
    return frac


def enumerate_columns(inst: Instance, delta=DEFAULT_DELTA, budget: int = COLUMN_BUDGET) -> list[ConfigColumn]:
    """Every capacity-feasible set of at most floor(1/delta) big clients, costed exactly.

    Ordered by set size, then lexicographically.
    """
    frac = check_lp_delta(delta)
    _, big = classify_clients(inst, frac)
    max_size = math.floor(1 / frac)
    sets: list[tuple[int, ...]] = []
    for size in range(1, max_size + 1):
        found = False
        for combo in itertools.combinations(big, size):
            if inst.load(combo) <= inst.capacity:
                sets.append(combo)
                found = True
                if len(sets) > budget:
                    raise ColumnBudgetExceeded(f"more than {budget} columns")
        if not found:
            break
    columns = []
    for combo in sets:
        tsp = held_karp_tsp([DEPOT, *combo], inst.cost)
        columns.append(ConfigColumn(combo, tuple(client_order(tsp)), tsp.cost))
    return columns


def _pivot(tab: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    factor = tab[:, col].copy()
    factor[row] = 0.0
    tab -= np.outer(factor, tab[row])


def _simplex(tab: np.ndarray, basis: list[int], cost: np.ndarray, allowed: np.ndarray, max_iter: int) -> int:
    """Minimize ``cost`` over the tableau in place with Bland's rule.

    The last column of ``tab`` is the right-hand side. Returns the pivot count.
    """
    rows = tab.shape[0]
    for it in range(max_iter):
        cb = cost[basis]
        reduced = cost - cb @ tab[:, :-1]
        candidates = np.nonzero((reduced < -PIVOT_TOL) & allowed)[0]
        if candidates.size == 0:
            return it
        col = int(candidates[0])
        column = tab[:, col]
        best_row, best_ratio = -1, math.inf
        for i in range(rows):
            if column[i] > PIVOT_TOL:
                ratio = tab[i, -1] / column[i]
                if ratio < best_ratio - 1e-12 or (
                    abs(ratio - best_ratio) <= 1e-12 and basis[i] < basis[best_row]
                ):
                    best_row, best_ratio = i, ratio
        if best_row < 0:
            raise LpError("LP is unbounded")
        _pivot(tab, best_row, col)
        basis[best_row] = col
    raise LpError(f"simplex did not terminate within {max_iter} pivots")


def solve_config_lp(columns: Sequence[ConfigColumn], big: Sequence[int]) -> LpSolution:
    """min sum c_T x_T  s.t. every big client covered at least once, x >= 0.

    Two-phase primal simplex on [A | -I | I] with Bland's rule; the result is
    certified by primal/dual feasibility and a relative duality gap.
    """
    columns = tuple(columns)
    big = tuple(big)
    m, r = len(columns), len(big)
    if r == 0:
        return LpSolution(columns, big, np.zeros(m), 0.0, {}, "optimal")
    row_of = {v: i for i, v in enumerate(big)}
    cover = np.zeros((r, m))
    for j, col in enumerate(columns):
        for v in col.clients:
            if v in row_of:
                cover[row_of[v], j] = 1.0
    uncovered = [big[i] for i in range(r) if not cover[i].any()]
    if uncovered:
        raise LpError(f"big clients {uncovered} are not in any column")
    c = np.array([col.cost for col in columns], dtype=float)

    n_total = m + 2 * r
    tab = np.zeros((r, n_total + 1))
    tab[:, :m] = cover
    tab[:, m:m + r] = -np.eye(r)
    tab[:, m + r:m + 2 * r] = np.eye(r)
    tab[:, -1] = 1.0
    basis = list(range(m + r, m + 2 * r))
    max_iter = 50 * (n_total + r) + 1000

    phase_one = np.zeros(n_total)
    phase_one[m + r:] = 1.0
    everything = np.ones(n_total, dtype=bool)
    iters = _simplex(tab, basis, phase_one, everything, max_iter)
    if tab[:, -1] @ phase_one[basis] > 1e-9:
        raise LpError("covering LP is infeasible")

    real = np.zeros(n_total, dtype=bool)
    real[: m + r] = True
    for i, b in enumerate(basis):
        if b >= m + r:
            nonzero = np.nonzero(np.abs(tab[i, : m + r]) > PIVOT_TOL)[0]
            if nonzero.size == 0:
                raise LpError("redundant cover row; cannot price duals")
            _pivot(tab, i, int(nonzero[0]))
            basis[i] = int(nonzero[0])

    phase_two = np.zeros(n_total)
    phase_two[:m] = c
    iters += _simplex(tab, basis, phase_two, real, max_iter)

    values = np.zeros(n_total)
    values[basis] = tab[:, -1]
    x = np.clip(values[:m], 0.0, None)
    full = np.hstack([cover, -np.eye(r), np.eye(r)])
    y = np.linalg.solve(full[:, basis].T, phase_two[basis])
    objective = float(c @ x)
    gap = _certify(cover, c, x, y, objective)
    return LpSolution(
        columns=columns,
        big=big,
        x=x,
        objective=objective,
        duals={v: float(y[i]) for i, v in enumerate(big)},
        status="optimal",
        gap=gap,
        iterations=iters,
    )


def _certify(cover: np.ndarray, c: np.ndarray, x: np.ndarray, y: np.ndarray, objective: float) -> float:
    scale = max(1.0, abs(objective))
    if np.any(cover @ x < 1.0 - COVER_TOL):
        raise LpError("primal solution violates a cover constraint")
    if np.any(y < -COVER_TOL * scale) or np.any(cover.T @ y > c + COVER_TOL * scale):
        raise LpError("dual solution is infeasible")
    gap = abs(objective - float(y.sum())) / scale
    if gap > GAP_RTOL:
        raise LpError(f"duality gap {gap:.3e} exceeds {GAP_RTOL}")
    return gap


def inclusion_probabilities(lp: LpSolution, gamma: float = GAMMA) -> np.ndarray:
    return np.minimum(1.0, gamma * lp.x)


def randomized_round(lp: LpSolution, gamma: float = GAMMA, seed: int | None = None) -> list[int]:
    """Indices of independently sampled columns, each kept w.p. min(1, gamma*x)."""
    rng = np.random.default_rng(seed)
    draws = rng.random(len(lp.columns))
    return [int(j) for j in np.nonzero(draws < inclusion_probabilities(lp, gamma))[0]]


@dataclass
class RoundingState:
    """Decisions so far and the pessimistic estimator they imply.

    ``penalty[v]`` is the split-cost charge for leaving big client v to the
    residual tour; it is paid with the probability that no kept column
    covers v.
    """

    lp: LpSolution
    prob: np.ndarray
    penalty: dict[int, float]
    constant: float
    decided_in: list[int] = field(default_factory=list)
    decided_out: set[int] = field(default_factory=set)
    covered: set[int] = field(default_factory=set)

    @property
    def undecided(self) -> list[int]:
        done = set(self.decided_in) | self.decided_out
        return [j for j in range(len(self.lp.columns)) if j not in done]

    def survival(self, v: int, skip: int | None = None) -> float:
        if v in self.covered:
            return 0.0
        out = 1.0
        for j in self.undecided:
            if j != skip and v in self.lp.columns[j].clients:
                out *= 1.0 - self.prob[j]
        return out

    def estimate(self) -> float:
        cols = self.lp.columns
        kept = math.fsum(cols[j].cost for j in self.decided_in)
        pending = math.fsum(self.prob[j] * cols[j].cost for j in self.undecided)
        risk = math.fsum(self.survival(v) * self.penalty[v] for v in self.lp.big)
        return kept + pending + self.constant + risk

    def branch_values(self, j: int) -> tuple[float, float]:
        """Estimator after deciding column j in / out, from the current state."""
        col = self.lp.columns[j]
        base = self.estimate() - self.prob[j] * col.cost
        phi_in = base + col.cost
        phi_out = base
        for v in col.clients:
            if v in self.covered:
                continue
            with_j = self.survival(v)
            without_j = self.survival(v, skip=j)
            phi_in -= with_j * self.penalty[v]
            phi_out += (without_j - with_j) * self.penalty[v]
        return phi_in, phi_out


def _penalties(inst: Instance, big: Sequence[int], delta: Fraction) -> dict[int, float]:
    keep = 1.0 - float(delta)
    return {v: 2.0 / keep * 2.0 * inst.demand[v] / inst.capacity * float(inst.cost[DEPOT, v]) for v in big}


def initial_state(lp: LpSolution, inst: Instance, delta, tsp_full_cost: float, gamma: float = GAMMA) -> RoundingState:
    frac = Fraction(delta)
    bounds = radial_bounds(inst, frac)
    constant = tsp_full_cost + bounds.D_small / (1.0 - float(frac))
    return RoundingState(
        lp=lp,
        prob=inclusion_probabilities(lp, gamma),
        penalty=_penalties(inst, lp.big, frac),
        constant=constant,
    )


def derandomize(
    lp: LpSolution, inst: Instance, delta, tsp_full_cost: float, gamma: float = GAMMA
) -> tuple[list[int], list[float]]:
    """Method of conditional expectations over columns, most expensive first.

    Returns the kept column indices (in decision order) and the estimator
    trace, whose first entry is the initial estimate.
    """
    state = initial_state(lp, inst, delta, tsp_full_cost, gamma)
    trace = [state.estimate()]
    order = sorted(range(len(lp.columns)), key=lambda j: (-lp.columns[j].cost, j))
    for j in order:
        phi_in, phi_out = state.branch_values(j)
        take = phi_in < phi_out or (phi_in == phi_out and state.prob[j] >= 0.5)
        if take:
            state.decided_in.append(j)
            state.covered.update(lp.columns[j].clients)
        else:
            state.decided_out.add(j)
        trace.append(state.estimate())
    return state.decided_in, trace


@dataclass(frozen=True)
class LpCertificate:
    delta: Fraction
    gamma: float
    mode: str
    seed: int | None
    lp_objective: float
    lp_gap: float
    n_columns: int
    chosen: tuple[int, ...]
    chosen_cost: float
    tsp_full_cost: float
    residual_tsp_cost: float
    split_cost: float
    bounds: RadialBounds
    phi_initial: float | None
    phi_final: float | None
    returned_cost: float

    def ledger(self) -> dict[str, bool]:
        def le(lhs: float, rhs: float) -> bool:
            return lhs <= rhs + GAP_RTOL * max(1.0, abs(rhs))

        checks = {
            "residual_tour_le_full": le(self.residual_tsp_cost, self.tsp_full_cost),
            "lp_gap": self.lp_gap <= GAP_RTOL,
        }
        if self.phi_initial is not None:
            keep = 1.0 - float(self.delta)
            checks["estimator_start_le_rounding_bound"] = le(
                self.phi_initial,
                self.gamma * self.lp_objective
                + self.tsp_full_cost
                + self.bounds.D_small / keep
                + math.exp(-self.gamma) * 2.0 * self.bounds.D_big / keep,
            )
            checks["estimator_non_increasing"] = le(self.phi_final, self.phi_initial)
            checks["cost_le_estimator"] = le(self.returned_cost, self.phi_initial)
        return checks

    @property
    def ok(self) -> bool:
        return all(self.ledger().values())


def _shortcut_columns(lp: LpSolution, chosen: Sequence[int], inst: Instance) -> Solution:
    seen: set[int] = set()
    tours = []
    for j in chosen:
        kept = [v for v in lp.columns[j].tour_order if v not in seen]
        seen.update(kept)
        if kept:
            tours.append(Tour.of(inst, kept))
    return Solution(tuple(tours))


def residual_tour(
    inst: Instance, remaining: Sequence[int], full_tour: TspResult, tsp: TspAlgorithm
) -> TspResult:
    """TSP tour over depot + remaining: the subroutine's tour or the shortcut
    of the full tour, whichever is cheaper, so it never costs more than the
    full tour."""
    keep = set(remaining)
    direct = tsp([DEPOT, *remaining], inst.cost)
    shortcut = tuple(v for v in full_tour.tour if v == DEPOT or v in keep)
    shortcut_cost = cycle_cost(shortcut, inst.cost)
    if shortcut_cost < direct.cost:
        return TspResult(shortcut, shortcut_cost, direct.guarantee)
    return direct


def solve_lp_based(
    inst: Instance,
    delta=DEFAULT_DELTA,
    tsp_alg: str | TspAlgorithm = "christofides",
    mode: str = "derandomized",
    seed: int | None = None,
    gamma: float = GAMMA,
    lp: LpSolution | None = None,
) -> tuple[Solution, LpCertificate]:
    """Round the configuration LP and split a tour over the uncovered clients.

    ``lp`` may be passed in to reuse one LP solve across many sampled runs.
    """
    frac = check_lp_delta(delta)
    if mode not in ("derandomized", "sampled"):
        raise CvrpError(f"unknown mode {mode!r}")
    tsp = get_tsp(tsp_alg)
    bounds = radial_bounds(inst, frac)
    if lp is None:
        _, big = classify_clients(inst, frac)
        lp = solve_config_lp(enumerate_columns(inst, frac), big)
    full_tour = tsp([DEPOT, *inst.clients], inst.cost)

    phi_initial = phi_final = None
    if mode == "derandomized":
        chosen, trace = derandomize(lp, inst, frac, full_tour.cost, gamma)
        phi_initial, phi_final = trace[0], trace[-1]
    else:
        chosen = randomized_round(lp, gamma, seed)

    kept = _shortcut_columns(lp, chosen, inst)
    covered = {v for t in kept.tours for v in t.clients}
    remaining = [v for v in inst.clients if v not in covered]
    tour = residual_tour(inst, remaining, full_tour, tsp)
    split = dp_split_order(client_order(tour), inst)
    sol = kept + split
    cert = LpCertificate(
        delta=frac,
        gamma=gamma,
        mode=mode,
        seed=seed,
        lp_objective=lp.objective,
        lp_gap=lp.gap,
        n_columns=len(lp.columns),
        chosen=tuple(chosen),
        chosen_cost=math.fsum(lp.columns[j].cost for j in chosen),
        tsp_full_cost=full_tour.cost,
        residual_tsp_cost=tour.cost,
        split_cost=split.total_cost,
        bounds=bounds,
        phi_initial=phi_initial,
        phi_final=phi_final,
        returned_cost=sol.total_cost,
    )
    log.debug("lp-based %s: cost=%.6f lp=%.6f", mode, sol.total_cost, lp.objective)
    return sol, cert


def sampled_bound(lp_objective: float, tsp_cost: float, bounds: RadialBounds, gamma: float = GAMMA) -> float:
    """Expected-cost bound for the sampled mode."""
    return gamma * lp_objective + tsp_cost + bounds.D / (1.0 - float(bounds.delta))

