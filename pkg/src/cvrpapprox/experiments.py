"""Statistical and oracle-backed check suites, shared by the CLI and the tests.

Each check yields a ``Check`` row: what was measured, the bound it must
respect, the tolerance used and whether it passed.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .comb import COMB_DELTA, build_aux_graph, solve_combinatorial
from .core import DEPOT, Instance, classify_clients, instance_from_points, radial_bounds, validate_solution
from .fileio import GeneratorConfig, generate_instance
from .graphkit import christofides, held_karp_tsp, matching_weight, min_weight_perfect_matching
from .lp import GAMMA, enumerate_columns, randomized_round, sampled_bound, solve_config_lp, solve_lp_based
from .oracle import brute_covering_lp, brute_matching_weight, brute_tsp_cost, cross_check, exact_cvrp
from .split import (
    bad_probability,
    client_order,
    dp_split_order,
    four_copy_probability,
    mark_bad,
    randomized_split,
    sample_theta,
    split_bound,
)

REL = 1e-9
COMB_RATIO = 2.75
LP_RATIO_DELTA = Fraction(1, 4)
LP_RATIO = math.log(2.0) + 1.0 + 1.0 / (1.0 - float(LP_RATIO_DELTA))


@dataclass
class Check:
    suite: str
    check: str
    measured: float
    bound: float
    tolerance: float
    passed: bool
    seed: int | None = None
    detail: str = ""

    def __post_init__(self) -> None:
        self.measured = float(self.measured)
        self.bound = float(self.bound)
        self.tolerance = float(self.tolerance)
        self.passed = bool(self.passed)


@dataclass
class RunRow:
    instance: str
    n: int
    n_big: int
    algorithm: str
    delta: str
    seed: int | None
    cost: float
    D: float
    lp_obj: float | None
    opt: float | None
    ratio_vs_D: float | None
    ratio_vs_opt: float | None
    passed: bool


RUN_COLUMNS = [
    "instance", "n", "n_big", "algorithm", "delta", "seed", "cost", "D",
    "lp_obj", "opt", "ratio_vs_D", "ratio_vs_opt", "pass",
]


@dataclass
class SuiteReport:
    checks: list[Check] = field(default_factory=list)
    runs: list[RunRow] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def extend(self, other: SuiteReport) -> None:
        self.checks += other.checks
        self.runs += other.runs

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [asdict(c) for c in self.checks],
            "runs": [asdict(r) for r in self.runs],
        }


def le_rel(lhs: float, rhs: float, rel: float = REL) -> bool:
    return lhs <= rhs + rel * max(1.0, abs(rhs))


# --- instance families -------------------------------------------------------

def fixed_claims_instance() -> Instance:
    """Ten clients on a circle with demands spanning small, big and near-full."""
    capacity = 12
    demand = [0, 1, 2, 3, 4, 5, 6, 7, 8, 10, 12]
    angles = np.linspace(0.0, 2 * np.pi, 10, endpoint=False)
    radius = np.array([10, 25, 15, 30, 20, 12, 28, 18, 22, 16], dtype=float)
    pts = np.vstack([[0.0, 0.0], np.column_stack([radius * np.cos(angles), radius * np.sin(angles)])])
    return instance_from_points(pts, demand, capacity, name="claims-10")


def random_family(count: int = 200, seed: int = 2024, max_n: int = 10, max_big: int = 8) -> list[Instance]:
    """Seeded instances with 1..max_n clients and at most ``max_big`` clients
    above a quarter of the capacity. Capacities and demand shapes rotate."""
    out: list[Instance] = []
    k = 0
    capacities = (10, 30, 100)
    kinds = ("uniform", "small-heavy")
    while len(out) < count:
        cfg = GeneratorConfig(
            n=1 + k % max_n,
            capacity=capacities[(k // max_n) % len(capacities)],
            demand=kinds[(k // (max_n * len(capacities))) % len(kinds)],
            seed=seed * 100_003 + k,
            name=f"fam-{seed}-{k}",
        )
        k += 1
        inst = generate_instance(cfg)
        if len(classify_clients(inst, LP_RATIO_DELTA)[1]) <= max_big:
            out.append(inst)
    return out


# --- claims: bad-client probabilities and uncovered big clients --------------

def claims_suite(trials: int = 100_000, seed: int = 7, deltas: Sequence = (Fraction(1, 4), Fraction(1, 3))) -> SuiteReport:
    inst = fixed_claims_instance()
    order = list(inst.clients)
    demands = [inst.demand[v] for v in order]
    report = SuiteReport()
    for delta in deltas:
        rng = np.random.default_rng(seed)
        bad_hits = np.zeros(len(order))
        four_hits = np.zeros(len(order))
        for _ in range(trials):
            bad, four = mark_bad(demands, inst.capacity, delta, sample_theta(delta, rng))
            for i in bad:
                bad_hits[i] += 1
            for i in four:
                four_hits[i] += 1
        for i, v in enumerate(order):
            for name, hits, exact in (
                ("bad", bad_hits[i], bad_probability(demands[i], inst.capacity, delta)),
                ("two-round-trips", four_hits[i], four_copy_probability(demands[i], inst.capacity, delta)),
            ):
                p = float(exact)
                freq = hits / trials
                tol = 3.0 * math.sqrt(p * (1.0 - p) / trials)
                report.checks.append(Check(
                    "claims", f"P[{name}] client {v} d={demands[i]}/{inst.capacity} delta={delta}",
                    freq, p, tol, abs(freq - p) <= tol, seed,
                ))
    report.extend(uncovered_suite(trials=trials, seed=seed))
    return report


def uncovered_instance() -> Instance:
    """Three mutually pairable big clients in a tight cluster (the LP optimum
    takes each pair at one half) plus one client that only fits alone."""
    pts = [(0, 0), (10, 0), (10, 1), (10.87, 0.5), (0, -10)]
    return instance_from_points(pts, [0, 6, 6, 6, 9], 12, name="uncovered-4")


def uncovered_suite(trials: int = 100_000, seed: int = 11, gamma: float = GAMMA) -> SuiteReport:
    inst = uncovered_instance()
    delta = Fraction(1, 3)
    _, big = classify_clients(inst, delta)
    lp = solve_config_lp(enumerate_columns(inst, delta), big)
    members = [{j for j, col in enumerate(lp.columns) if v in col.clients} for v in big]
    misses = np.zeros(len(big))
    for t in range(trials):
        chosen = set(randomized_round(lp, gamma, seed=seed * trials + t))
        for k, cols in enumerate(members):
            if not cols & chosen:
                misses[k] += 1
    report = SuiteReport()
    bound = math.exp(-gamma)
    for k, v in enumerate(big):
        freq = misses[k] / trials
        tol = 3.0 * math.sqrt(bound * (1 - bound) / trials)
        report.checks.append(Check(
            "claims", f"P[big client {v} uncovered] <= e^-gamma", freq, bound, tol, freq <= bound + tol, seed,
        ))
    return report


# --- split: expected split cost against its closed form ---------------------

def split_bound_suite(trials: int = 100_000, seed: int = 13, deltas: Sequence = (Fraction(1, 4), Fraction(1, 3))) -> SuiteReport:
    inst = fixed_claims_instance()
    tsp = held_karp_tsp([DEPOT, *inst.clients], inst.cost)
    tour = list(tsp.tour)
    report = SuiteReport()
    dp_cost = dp_split_order(client_order(tsp), inst).total_cost
    for delta in deltas:
        bounds = radial_bounds(inst, delta)
        keep = 1.0 - float(delta)
        rng = np.random.default_rng(seed)
        costs = np.empty(trials)
        detours = np.empty(trials)
        feasible = True
        excess = -math.inf
        for t in range(trials):
            outcome = randomized_split(tour, inst, delta, theta=sample_theta(delta, rng))
            costs[t] = outcome.solution.total_cost
            detours[t] = outcome.added_cost
            excess = max(excess, costs[t] - (tsp.cost + outcome.added_cost))
            if any(tr.load > inst.capacity for tr in outcome.solution.tours):
                feasible = False
            elif t < 1000 and validate_solution(outcome.solution, inst) is not None:
                feasible = False

        def stats(values: np.ndarray) -> tuple[float, float]:
            se = float(values.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
            return float(values.mean()), se

        mean, se = stats(costs)
        bound = split_bound(tsp.cost, bounds)
        report.checks.append(Check(
            "split", f"mean randomized split cost <= tank bound, delta={delta}",
            mean, bound, 3 * se, mean <= bound + 3 * se, seed,
        ))
        mean_detour, se_detour = stats(detours)
        detour_bound = bounds.D_small / keep + 2 * bounds.D_big / keep - float(delta) * bounds.D_prime_big / keep
        report.checks.append(Check(
            "split", f"mean detour cost <= detour terms of the tank bound, delta={delta}",
            mean_detour, detour_bound, 3 * se_detour, mean_detour <= detour_bound + 3 * se_detour, seed,
        ))
        expected_detour = expected_detour_cost(inst, delta)
        report.checks.append(Check(
            "split", f"mean detour cost matches its exact expectation, delta={delta}",
            mean_detour, expected_detour, 3 * se_detour,
            abs(mean_detour - expected_detour) <= 3 * se_detour, seed,
        ))
        report.checks.append(Check(
            "split", f"split cost <= tour + detours on every draw, delta={delta}",
            excess, 0.0, 1e-9, excess <= 1e-9 * max(1.0, tsp.cost), seed,
        ))
        best_sampled = float(costs.min())
        report.checks.append(Check(
            "split", f"dp split <= every sampled split, delta={delta}", dp_cost, best_sampled, 1e-9,
            le_rel(dp_cost, best_sampled), seed,
        ))
        report.checks.append(Check(
            "split", f"randomized splits feasible, delta={delta}", float(feasible), 1.0, 0.0, feasible, seed,
        ))
    return report


def expected_detour_cost(inst: Instance, delta) -> float:
    """Exact mean detour: 2c(r,v) per bad client plus 2c(r,v) more per two-trip client."""
    total = []
    for v in inst.clients:
        p_bad = float(bad_probability(inst.demand[v], inst.capacity, delta))
        p_four = float(four_copy_probability(inst.demand[v], inst.capacity, delta))
        total.append((p_bad + p_four) * 2.0 * float(inst.cost[DEPOT, v]))
    return math.fsum(total)


# --- ratios: per-instance oracle comparisons ---------------------------------

def _memo_tsp():
    cache: dict[tuple[int, ...], object] = {}

    def tsp(nodes, metric):
        key = tuple(nodes)
        if key not in cache:
            cache[key] = held_karp_tsp(nodes, metric)
        return cache[key]

    return tsp


def evaluate_instance(inst: Instance, sampled_seeds: int = 0, seed: int = 0) -> SuiteReport:
    """All oracle-backed checks for one instance (criteria on radial bound,
    matching, both solvers and the LP)."""
    report = SuiteReport()
    name = inst.name
    oracle = exact_cvrp(inst)
    opt = oracle.opt_cost

    def add(check: str, measured: float, bound: float, ok: bool, tol: float = REL, detail: str = "") -> None:
        report.checks.append(Check("ratios", f"{name}: {check}", measured, bound, tol, ok, seed, detail))

    b13 = radial_bounds(inst, COMB_DELTA)
    add("radial bound D <= opt", b13.D, opt, le_rel(b13.D, opt))

    aux = build_aux_graph(inst)
    pairs = min_weight_perfect_matching(aux)
    weight = matching_weight(aux, pairs)
    add("matching <= opt", weight, opt, le_rel(weight, opt))
    add("matching <= D'_big", weight, b13.D_prime_big, le_rel(weight, b13.D_prime_big))
    if len(aux.nodes) <= 8:
        brute = brute_matching_weight(aux)
        add("matching equals exhaustive optimum", weight, brute, math.isclose(weight, brute, rel_tol=REL, abs_tol=1e-12))

    comb_sol, cert = solve_combinatorial(inst, held_karp_tsp)
    comb_cost = comb_sol.total_cost
    add("comb solution valid", float(validate_solution(comb_sol, inst) is None), 1.0,
        validate_solution(comb_sol, inst) is None, 0.0)
    add("comb cost <= 2.75 opt", comb_cost, COMB_RATIO * opt, comb_cost <= COMB_RATIO * opt + 1e-9)
    for key, ok in cert.ledger().items():
        add(f"comb ledger {key}", float(ok), 1.0, ok, 1e-6)
    report.runs.append(RunRow(
        name, inst.n, len(aux.nodes), "comb", str(COMB_DELTA), None, comb_cost, b13.D, None, opt,
        comb_cost / b13.D if b13.D else None, comb_cost / opt if opt else None,
        comb_cost <= COMB_RATIO * opt + 1e-9 and cert.ok,
    ))

    for delta in (Fraction(1, 3), LP_RATIO_DELTA):
        _, big = classify_clients(inst, delta)
        columns = enumerate_columns(inst, delta)
        lp = solve_config_lp(columns, big)
        add(f"lp objective <= opt delta={delta}", lp.objective, opt, le_rel(lp.objective, opt))
        add(f"lp certified delta={delta}", lp.gap, 1e-6, lp.gap <= 1e-6, 1e-6)
        if 0 < len(columns) <= 12:
            cover = np.array([[v in col.clients for col in columns] for v in big], dtype=float)
            brute = brute_covering_lp([col.cost for col in columns], cover)
            add(f"lp equals vertex enumeration delta={delta}", lp.objective, brute,
                math.isclose(lp.objective, brute, rel_tol=1e-7, abs_tol=1e-9), 1e-7)

    delta = LP_RATIO_DELTA
    _, big = classify_clients(inst, delta)
    lp = solve_config_lp(enumerate_columns(inst, delta), big)
    tsp = _memo_tsp()
    sol, lcert = solve_lp_based(inst, delta, tsp, "derandomized", lp=lp)
    cost = sol.total_cost
    add("lp-based solution valid", float(validate_solution(sol, inst) is None), 1.0,
        validate_solution(sol, inst) is None, 0.0)
    add("lp-based cost <= (ln2+1+4/3) opt", cost, LP_RATIO * opt, cost <= LP_RATIO * opt + 1e-9)
    add("lp-based cost <= initial estimator", cost, lcert.phi_initial, le_rel(cost, lcert.phi_initial, 1e-6), 1e-6)
    for key, ok in lcert.ledger().items():
        add(f"lp ledger {key}", float(ok), 1.0, ok, 1e-6)
    bD = radial_bounds(inst, delta)
    report.runs.append(RunRow(
        name, inst.n, len(big), "lp-derandomized", str(delta), None, cost, bD.D, lp.objective, opt,
        cost / bD.D if bD.D else None, cost / opt if opt else None,
        cost <= LP_RATIO * opt + 1e-9 and lcert.ok,
    ))

    if sampled_seeds:
        costs = np.empty(sampled_seeds)
        for s in range(sampled_seeds):
            sol_s, cert_s = solve_lp_based(inst, delta, tsp, "sampled", seed=seed + s, lp=lp)
            costs[s] = sol_s.total_cost
        mean = float(costs.mean())
        se = float(costs.std(ddof=1) / math.sqrt(sampled_seeds)) if sampled_seeds > 1 else 0.0
        bound = sampled_bound(lp.objective, lcert.tsp_full_cost, bD)
        add(f"sampled mean over {sampled_seeds} seeds <= ln2 lp + c(A) + D/(1-delta)", mean, bound,
            mean <= bound + 3 * se, 3 * se)
        report.runs.append(RunRow(
            name, inst.n, len(big), "lp-sampled-mean", str(delta), seed, mean, bD.D, lp.objective, opt,
            mean / bD.D if bD.D else None, mean / opt if opt else None, mean <= bound + 3 * se,
        ))
    return report


def _evaluate_job(args) -> SuiteReport:
    inst, sampled, seed = args
    return evaluate_instance(inst, sampled, seed)


def ratios_suite(
    count: int = 200,
    seed: int = 2024,
    sampled_instances: int = 10,
    sampled_seeds: int = 1000,
    jobs: int = 1,
) -> SuiteReport:
    """Oracle comparisons over a seeded family; the first ``sampled_instances``
    instances with big clients also get a sampled-mode mean check."""
    family = random_family(count, seed)
    tasks = []
    picked = 0
    for k, inst in enumerate(family):
        wants = picked < sampled_instances and bool(classify_clients(inst, LP_RATIO_DELTA)[1])
        picked += wants
        tasks.append((inst, sampled_seeds if wants else 0, seed * 1000 + k))
    report = SuiteReport()
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for part in pool.map(_evaluate_job, tasks):
                report.extend(part)
    else:
        for task in tasks:
            report.extend(_evaluate_job(task))
    return report


# --- oracle and subroutine self-consistency ----------------------------------

def oracle_suite(count: int = 100, seed: int = 99, max_n: int = 8) -> SuiteReport:
    report = SuiteReport()
    for k in range(count):
        inst = generate_instance(GeneratorConfig(
            n=1 + k % max_n, capacity=(10, 30, 100)[k % 3],
            demand=("uniform", "small-heavy")[(k // 3) % 2], seed=seed * 1000 + k,
        ))
        result = cross_check(inst)
        report.checks.append(Check(
            "oracle", f"{inst.name}: exact_cvrp equals enumeration", result.exact, result.enumerated,
            REL, result.agree, seed,
        ))
    return report


def subroutine_suite(count: int = 100, seed: int = 5, max_nodes: int = 9) -> SuiteReport:
    report = SuiteReport()
    rng = np.random.default_rng(seed)
    for k in range(count):
        size = 2 + k % (max_nodes - 1)
        pts = rng.uniform(0, 100, size=(size, 2))
        metric = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
        nodes = list(range(size))
        hk = held_karp_tsp(nodes, metric).cost
        perm = brute_tsp_cost(nodes, metric)
        ch = christofides(nodes, metric).cost
        report.checks.append(Check(
            "subroutines", f"case {k} ({size} nodes): Held-Karp equals permutation optimum", hk, perm, REL,
            math.isclose(hk, perm, rel_tol=REL, abs_tol=1e-12), seed,
        ))
        report.checks.append(Check(
            "subroutines", f"case {k} ({size} nodes): Christofides <= 1.5 Held-Karp", ch, 1.5 * hk, 1e-9,
            ch <= 1.5 * hk + 1e-9, seed,
        ))
    return report


SUITES = {
    "claims": claims_suite,
    "lemma3": split_bound_suite,  # CLI name kept for the command-line contract
    "ratios": ratios_suite,
    "oracle": oracle_suite,
    "subroutines": subroutine_suite,
}


def summarize(checks: Iterable[Check]) -> dict[str, int]:
    checks = list(checks)
    return {"checks": len(checks), "failed": sum(not c.passed for c in checks)}
