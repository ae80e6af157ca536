"""Command-line entry point: generate, solve, verify, experiment.

Exit codes: 0 ok, 2 validation failure, 3 certificate failure, 4 I/O error.
"""

from __future__ import annotations

import csv
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import click

from . import experiments
from .comb import solve_classic, solve_combinatorial
from .core import CvrpError, classify_clients, radial_bounds, solution_cost, validate_instance, validate_solution
from .fileio import (
    DEMAND_KINDS,
    GeneratorConfig,
    ParseError,
    fmt_float,
    format_instance,
    generate_instance,
    parse_instance,
    read_solution,
    write_solution,
)
from .graphkit import TSP_ALGORITHMS
from .lp import solve_lp_based
from .oracle import EXACT_LIMIT, exact_cvrp

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_CERTIFICATE = 3
EXIT_IO = 4

log = logging.getLogger("cvrpapprox")


@dataclass
class RunReport:
    instance: str
    algorithm: str
    params: dict
    cost: float
    bounds: dict
    ratios: dict = field(default_factory=dict)
    ledger: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.ledger.values())


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_instance(path: str, rounded: bool):
    try:
        text = Path(path).read_text()
        inst = parse_instance(text, rounded=rounded)
    except (OSError, ParseError) as exc:
        _fail(EXIT_IO, f"cannot read instance {path}: {exc}")
    problem = validate_instance(inst, triangle="warn" if rounded else "hard")
    if problem is not None:
        _fail(EXIT_INVALID, f"invalid instance {path}: {problem}")
    return inst


@click.group()
@click.option("-v", "--verbose", count=True, help="Repeat for more logging.")
def main(verbose: int) -> None:
    """Approximation algorithms for unsplittable capacitated vehicle routing."""
    logging.basicConfig(
        level=logging.WARNING - 10 * min(verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command()
@click.option("--n", "n", type=int, required=True, help="Number of clients.")
@click.option("--capacity", type=int, default=100, show_default=True)
@click.option("--demand", type=click.Choice(DEMAND_KINDS), default="uniform", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--size", type=float, default=100.0, show_default=True, help="Side of the square box.")
@click.option("--name", default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write here instead of stdout.")
def generate(n, capacity, demand, seed, size, name, out):
    """Write a random CVRPLIB instance."""
    try:
        inst = generate_instance(GeneratorConfig(n, capacity, demand, (0.0, 0.0, size, size), seed, name))
    except CvrpError as exc:
        _fail(EXIT_INVALID, str(exc))
    text = format_instance(inst)
    if out:
        try:
            Path(out).write_text(text)
        except OSError as exc:
            _fail(EXIT_IO, str(exc))
    else:
        click.echo(text, nl=False)


@main.command()
@click.argument("instance", type=click.Path(dir_okay=False))
@click.option("--algorithm", type=click.Choice(["classic", "comb", "lp"]), default="comb", show_default=True)
@click.option("--tsp", "tsp_name", type=click.Choice(sorted(TSP_ALGORITHMS)), default="christofides", show_default=True)
@click.option("--delta", default="1/3", show_default=True, help="Big/small threshold for --algorithm lp.")
@click.option("--mode", type=click.Choice(["derandomized", "sampled"]), default="derandomized", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--rounded", is_flag=True, help="Round EUC_2D distances to integers.")
@click.option("--oracle", is_flag=True, help=f"Also compute the exact optimum (n <= {EXACT_LIMIT}).")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Solution JSON path (default stdout).")
@click.option("--report", "report_path", type=click.Path(dir_okay=False), default=None, help="Run report JSON path.")
def solve(instance, algorithm, tsp_name, delta, mode, seed, rounded, oracle, out, report_path):
    """Solve an instance and print or write the solution JSON."""
    inst = _load_instance(instance, rounded)
    params = {"tsp": tsp_name}
    bounds: dict = {}
    ledger: dict = {}
    try:
        if algorithm == "classic":
            sol, cert = solve_classic(inst, tsp_name)
            params["delta"] = "0"
            bounds["D"] = cert["bounds"].D
            ledger["tank_bound"] = cert["ok"]
        elif algorithm == "comb":
            sol, cert = solve_combinatorial(inst, tsp_name)
            params["delta"] = "1/3"
            bounds.update(D=cert.bounds.D, matching=cert.cost_M, D_prime_big=cert.bounds.D_prime_big)
            ledger.update(cert.ledger())
        else:
            sol, cert = solve_lp_based(inst, delta, tsp_name, mode, seed=seed if mode == "sampled" else None)
            params.update(delta=str(cert.delta), gamma=cert.gamma, mode=mode)
            if mode == "sampled":
                params["seed"] = seed
            bounds.update(D=cert.bounds.D, lp_opt=cert.lp_objective)
            if cert.phi_initial is not None:
                bounds["phi_initial"] = cert.phi_initial
            ledger.update(cert.ledger())
    except CvrpError as exc:
        _fail(EXIT_INVALID, str(exc))

    problem = validate_solution(sol, inst)
    if problem is not None:
        _fail(EXIT_CERTIFICATE, f"solver produced an invalid solution: {problem}")
    if oracle:
        try:
            bounds["oracle_opt"] = exact_cvrp(inst).opt_cost
        except CvrpError as exc:
            _fail(EXIT_INVALID, str(exc))

    cost = sol.total_cost
    ratios = {}
    if bounds.get("D"):
        ratios["cost_over_D"] = cost / bounds["D"]
    if bounds.get("oracle_opt"):
        ratios["cost_over_opt"] = cost / bounds["oracle_opt"]
    run = RunReport(inst.name, algorithm, params, cost, bounds, ratios, ledger)

    text = write_solution(
        sol,
        instance=inst.name,
        algorithm=algorithm,
        seed=seed if algorithm == "lp" and mode == "sampled" else None,
        bounds={k: v for k, v in bounds.items() if k in ("D", "lp_opt", "oracle_opt")},
    )
    try:
        if out:
            Path(out).write_text(text + "\n")
        else:
            click.echo(text)
        if report_path:
            Path(report_path).write_text(json.dumps(asdict(run) | {"passed": run.passed}, indent=2) + "\n")
    except OSError as exc:
        _fail(EXIT_IO, str(exc))
    click.echo(f"{inst.name}: {algorithm} cost={cost:.6f} tours={len(sol.tours)}", err=True)
    if not run.passed:
        failed = [k for k, ok in ledger.items() if not ok]
        _fail(EXIT_CERTIFICATE, f"certificate checks failed: {failed}")


@main.command()
@click.argument("instance", type=click.Path(dir_okay=False))
@click.argument("solution", type=click.Path(dir_okay=False))
@click.option("--rounded", is_flag=True)
def verify(instance, solution, rounded):
    """Check a solution file: coverage, capacities and recorded cost."""
    inst = _load_instance(instance, rounded)
    try:
        text = Path(solution).read_text()
    except OSError as exc:
        _fail(EXIT_IO, str(exc))
    try:
        sol = read_solution(text, inst)
    except CvrpError as exc:
        _fail(EXIT_INVALID, str(exc))
    problem = validate_solution(sol, inst)
    if problem is not None:
        _fail(EXIT_INVALID, str(problem))
    recorded = json.loads(text).get("total_cost")
    actual = solution_cost(sol, inst)
    if recorded is not None and abs(recorded - actual) > 1e-9 * max(1.0, abs(actual)):
        _fail(EXIT_INVALID, f"recorded total_cost {recorded} but tours cost {actual}")
    click.echo(f"ok: {len(sol.tours)} tours, cost {actual:.6f}")


def _write_tables(report: experiments.SuiteReport, out_dir: Path, stem: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / f"{stem}_checks.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["suite", "check", "measured", "bound", "tolerance", "seed", "pass"])
        for c in report.checks:
            writer.writerow([c.suite, c.check, fmt_float(c.measured), fmt_float(c.bound),
                             fmt_float(c.tolerance), c.seed, int(c.passed)])
    if report.runs:
        with open(out_dir / f"{stem}_runs.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(experiments.RUN_COLUMNS)
            for r in report.runs:
                writer.writerow([
                    r.instance, r.n, r.n_big, r.algorithm, r.delta, "" if r.seed is None else r.seed,
                    fmt_float(r.cost), fmt_float(r.D), fmt_float(r.lp_obj), fmt_float(r.opt),
                    fmt_float(r.ratio_vs_D), fmt_float(r.ratio_vs_opt), int(r.passed),
                ])
    (out_dir / f"{stem}.json").write_text(json.dumps(report.to_json(), indent=2) + "\n")


@main.command()
@click.option("--suite", type=click.Choice([*experiments.SUITES, "all"]), default="claims", show_default=True)
@click.option("--trials", type=int, default=None, help="Monte-Carlo draws (claims, lemma3).")
@click.option("--count", type=int, default=None, help="Instances (ratios, oracle, subroutines).")
@click.option("--seed", type=int, default=None, help="Base seed; each suite has its own default.")
@click.option("--jobs", type=int, default=1, show_default=True, help="Worker processes for ratios.")
@click.option("--out-dir", type=click.Path(file_okay=False), default="reports", show_default=True)
def experiment(suite, trials, count, seed, jobs, out_dir):
    """Run a verification suite and write CSV + JSON reports."""
    names = list(experiments.SUITES) if suite == "all" else [suite]
    failed = False
    for name in names:
        kwargs = {}
        if seed is not None:
            kwargs["seed"] = seed
        if name in ("claims", "lemma3") and trials is not None:
            kwargs["trials"] = trials
        if name in ("ratios", "oracle", "subroutines") and count is not None:
            kwargs["count"] = count
        if name == "ratios":
            kwargs["jobs"] = jobs
        report = experiments.SUITES[name](**kwargs)
        try:
            _write_tables(report, Path(out_dir), name)
        except OSError as exc:
            _fail(EXIT_IO, str(exc))
        summary = experiments.summarize(report.checks)
        click.echo(f"{name}: {summary['checks']} checks, {summary['failed']} failed")
        for c in report.checks:
            if not c.passed:
                click.echo(f"  FAIL {c.check}: measured {c.measured} vs bound {c.bound} (tol {c.tolerance})")
        failed |= not report.passed
    if failed:
        sys.exit(EXIT_CERTIFICATE)


@main.command()
@click.argument("instance", type=click.Path(dir_okay=False))
@click.option("--delta", default="1/3", show_default=True)
@click.option("--rounded", is_flag=True)
def bounds(instance, delta, rounded):
    """Print radial bounds and the client split for an instance."""
    inst = _load_instance(instance, rounded)
    try:
        b = radial_bounds(inst, delta)
        small, big = classify_clients(inst, delta)
    except CvrpError as exc:
        _fail(EXIT_INVALID, str(exc))
    click.echo(json.dumps({
        "delta": str(b.delta), "D": b.D, "D_small": b.D_small, "D_big": b.D_big,
        "D_prime_big": b.D_prime_big, "n_small": len(small), "n_big": len(big),
    }, indent=2))


if __name__ == "__main__":
    main()
