"""CVRPLIB instance files, JSON solutions, and seeded random instances."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .core import CvrpError, Instance, Solution, Tour, euclidean_matrix, instance_from_points


class ParseError(CvrpError):
    pass


class SolutionFormatError(CvrpError):
    pass


HEADER_KEYS = {
    "NAME",
    "TYPE",
    "COMMENT",
    "DIMENSION",
    "CAPACITY",
    "EDGE_WEIGHT_TYPE",
    "EDGE_WEIGHT_FORMAT",
    "NODE_COORD_TYPE",
    "DISPLAY_DATA_TYPE",
}
SECTIONS = {"NODE_COORD_SECTION", "EDGE_WEIGHT_SECTION", "DEMAND_SECTION", "DEPOT_SECTION"}
EXPLICIT_FORMATS = {"FULL_MATRIX", "LOWER_ROW"}


def _split_header(line: str) -> tuple[str, str] | None:
    if ":" in line:
        key, value = line.split(":", 1)
        return key.strip().upper(), value.strip()
    parts = line.split(None, 1)
    if parts and parts[0].upper() in HEADER_KEYS and len(parts) == 2:
        return parts[0].upper(), parts[1].strip()
    return None


def parse_instance(text: str, rounded: bool = False) -> Instance:
    """Parse a CVRPLIB (TSPLIB-style) CVRP file.

    The depot becomes node 0 and the remaining nodes keep their file order.
    EUC_2D distances are exact unless ``rounded`` asks for nearest integers.
    """
    header: dict[str, str] = {}
    sections: dict[str, list[str]] = {}
    current: str | None = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        upper = line.upper()
        if upper == "EOF":
            break
        if upper in SECTIONS:
            current = upper
            sections[current] = []
            continue
        kv = _split_header(line)
        if kv is not None and current is None:
            key, value = kv
            if key not in HEADER_KEYS:
                raise ParseError(f"unknown keyword {key!r}")
            header[key] = value
            continue
        if current is None:
            raise ParseError(f"unexpected line outside any section: {line!r}")
        if kv is not None and kv[0] in HEADER_KEYS:
            raise ParseError(f"header keyword {kv[0]!r} after data sections")
        sections[current].append(line)

    for key in ("DIMENSION", "CAPACITY", "EDGE_WEIGHT_TYPE"):
        if key not in header:
            raise ParseError(f"missing {key}")
    try:
        dim = int(header["DIMENSION"])
        capacity = int(header["CAPACITY"])
    except ValueError as exc:
        raise ParseError(f"bad integer in header: {exc}") from None
    if dim < 1:
        raise ParseError(f"DIMENSION must be positive, got {dim}")
    name = header.get("NAME", "instance")

    ids, demand_of = _parse_demands(sections.get("DEMAND_SECTION"), dim)
    depot = _parse_depot(sections.get("DEPOT_SECTION"), ids)
    if demand_of[depot] != 0:
        raise ParseError(f"depot {depot} has demand {demand_of[depot]}, expected 0")
    order = [depot] + [i for i in ids if i != depot]
    position = {node: k for k, node in enumerate(ids)}

    ewt = header["EDGE_WEIGHT_TYPE"].upper()
    coords = None
    if ewt == "EUC_2D":
        pts = _parse_coords(sections.get("NODE_COORD_SECTION"), ids)
        coords = np.array([pts[i] for i in order])
        cost = euclidean_matrix(coords)
        if rounded:
            cost = np.floor(cost + 0.5)
    elif ewt == "EXPLICIT":
        fmt = header.get("EDGE_WEIGHT_FORMAT", "").upper()
        full = _parse_explicit(sections.get("EDGE_WEIGHT_SECTION"), dim, fmt)
        perm = [position[i] for i in order]
        cost = full[np.ix_(perm, perm)]
    else:
        raise ParseError(f"unsupported EDGE_WEIGHT_TYPE {ewt!r}")
    demand = tuple(demand_of[i] for i in order)
    return Instance(cost, demand, capacity, name, coords=coords)


def _rows(lines: list[str] | None, what: str) -> list[list[str]]:
    if lines is None:
        raise ParseError(f"missing {what}")
    return [line.split() for line in lines]


def _parse_demands(lines: list[str] | None, dim: int) -> tuple[list[int], dict[int, int]]:
    rows = _rows(lines, "DEMAND_SECTION")
    if len(rows) != dim:
        raise ParseError(f"DIMENSION={dim} but DEMAND_SECTION has {len(rows)} rows")
    ids, demand = [], {}
    for row in rows:
        if len(row) != 2:
            raise ParseError(f"bad demand row {' '.join(row)!r}")
        node, d = int(row[0]), int(row[1])
        if node in demand:
            raise ParseError(f"node {node} listed twice in DEMAND_SECTION")
        ids.append(node)
        demand[node] = d
    return ids, demand


def _parse_depot(lines: list[str] | None, ids: list[int]) -> int:
    if not lines:
        raise ParseError("missing DEPOT_SECTION")
    values = [int(tok) for line in lines for tok in line.split()]
    depots = [v for v in values if v != -1]
    if len(depots) != 1:
        raise ParseError(f"expected exactly one depot, found {depots}")
    if depots[0] not in ids:
        raise ParseError(f"depot {depots[0]} is not a listed node")
    return depots[0]


def _parse_coords(lines: list[str] | None, ids: list[int]) -> dict[int, tuple[float, float]]:
    rows = _rows(lines, "NODE_COORD_SECTION")
    if len(rows) != len(ids):
        raise ParseError(f"DIMENSION={len(ids)} but NODE_COORD_SECTION has {len(rows)} rows")
    pts = {}
    for row in rows:
        if len(row) != 3:
            raise ParseError(f"bad coordinate row {' '.join(row)!r}")
        pts[int(row[0])] = (float(row[1]), float(row[2]))
    if set(pts) != set(ids):
        raise ParseError("NODE_COORD_SECTION and DEMAND_SECTION list different nodes")
    return pts


def _parse_explicit(lines: list[str] | None, dim: int, fmt: str) -> np.ndarray:
    if fmt not in EXPLICIT_FORMATS:
        raise ParseError(f"unsupported EDGE_WEIGHT_FORMAT {fmt!r}")
    values = [float(tok) for row in _rows(lines, "EDGE_WEIGHT_SECTION") for tok in row]
    full = np.zeros((dim, dim))
    if fmt == "FULL_MATRIX":
        if len(values) != dim * dim:
            raise ParseError(f"FULL_MATRIX needs {dim * dim} weights, got {len(values)}")
        full[:] = np.array(values).reshape(dim, dim)
    else:
        expected = dim * (dim - 1) // 2
        if len(values) != expected:
            raise ParseError(f"LOWER_ROW needs {expected} weights, got {len(values)}")
        it = iter(values)
        for i in range(1, dim):
            for j in range(i):
                full[i, j] = full[j, i] = next(it)
    return full


def format_instance(inst: Instance) -> str:
    """CVRPLIB text; EUC_2D when the costs are the exact distances of the
    stored coordinates, otherwise an explicit full matrix. Node 1 is the depot."""
    dim = inst.n + 1
    exact = inst.coords is not None and np.array_equal(inst.cost, euclidean_matrix(inst.coords))
    lines = [
        f"NAME : {inst.name}",
        "TYPE : CVRP",
        f"DIMENSION : {dim}",
        f"EDGE_WEIGHT_TYPE : {'EUC_2D' if exact else 'EXPLICIT'}",
    ]
    if not exact:
        lines.append("EDGE_WEIGHT_FORMAT : FULL_MATRIX")
    lines.append(f"CAPACITY : {inst.capacity}")
    if exact:
        lines.append("NODE_COORD_SECTION")
        lines += [f"{i + 1} {x!r} {y!r}" for i, (x, y) in enumerate(inst.coords.tolist())]
    else:
        lines.append("EDGE_WEIGHT_SECTION")
        lines += [" ".join(repr(float(w)) for w in row) for row in inst.cost]
    lines.append("DEMAND_SECTION")
    lines += [f"{i + 1} {d}" for i, d in enumerate(inst.demand)]
    lines += ["DEPOT_SECTION", "1", "-1", "EOF"]
    return "\n".join(lines) + "\n"


def solution_to_dict(
    sol: Solution,
    instance: str = "",
    algorithm: str = "",
    seed: int | None = None,
    bounds: dict[str, float] | None = None,
) -> dict[str, Any]:
    return {
        "instance": instance,
        "algorithm": algorithm,
        "seed": seed,
        "tours": sol.client_lists(),
        "total_cost": sol.total_cost,
        "bounds": dict(bounds or {}),
    }


def write_solution(sol: Solution, **meta) -> str:
    return json.dumps(solution_to_dict(sol, **meta), indent=2)


def read_solution(text: str, inst: Instance) -> Solution:
    """Load tours from JSON; costs and loads are recomputed from ``inst``.

    Capacity is not checked here; use ``validate_solution`` for that.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SolutionFormatError(f"not valid JSON: {exc}") from None
    if not isinstance(data, dict) or not isinstance(data.get("tours"), list):
        raise SolutionFormatError("solution must be an object with a 'tours' list")
    seen: set[int] = set()
    tours = []
    for k, tour in enumerate(data["tours"]):
        if not isinstance(tour, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in tour):
            raise SolutionFormatError(f"tour {k} must be a list of integer client ids")
        for v in tour:
            if not 1 <= v <= inst.n:
                raise SolutionFormatError(f"tour {k} references unknown client {v}")
            if v in seen:
                raise SolutionFormatError(f"client {v} appears in more than one tour")
            seen.add(v)
        if tour:
            tours.append(Tour.of(inst, tour))
    total = data.get("total_cost")
    if total is not None and not isinstance(total, (int, float)):
        raise SolutionFormatError("total_cost must be a number")
    return Solution(tuple(tours))


@dataclass(frozen=True)
class GeneratorConfig:
    n: int
    capacity: int
    demand: str = "uniform"
    box: tuple[float, float, float, float] = (0.0, 0.0, 100.0, 100.0)
    seed: int = 0
    name: str | None = None


DEMAND_KINDS = ("uniform", "small-heavy")


def generate_instance(cfg: GeneratorConfig) -> Instance:
    """Uniform points in the box (depot included), exact Euclidean costs.

    ``uniform`` draws demands from [1, Q]; ``small-heavy`` from [1, max(1, Q // 3)].
    """
    if cfg.n < 0 or cfg.capacity < 1:
        raise CvrpError(f"need n >= 0 and capacity >= 1, got n={cfg.n}, Q={cfg.capacity}")
    if cfg.demand not in DEMAND_KINDS:
        raise CvrpError(f"unknown demand distribution {cfg.demand!r}")
    rng = np.random.default_rng(cfg.seed)
    x0, y0, x1, y1 = cfg.box
    pts = np.column_stack([rng.uniform(x0, x1, cfg.n + 1), rng.uniform(y0, y1, cfg.n + 1)])
    top = cfg.capacity if cfg.demand == "uniform" else max(1, cfg.capacity // 3)
    demand = [0, *rng.integers(1, top + 1, size=cfg.n).tolist()]
    name = cfg.name or f"gen-n{cfg.n}-q{cfg.capacity}-{cfg.demand}-s{cfg.seed}"
    return instance_from_points(pts, demand, cfg.capacity, name)


def fmt_float(value: float) -> str:
    """Decimal with at least 12 significant digits, for CSV output."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return f"{value:.17g}"
