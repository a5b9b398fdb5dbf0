"""Instance I/O, seeded generators, brute-force oracles, and run reports.

The native text format is:

    pathtsp 1
    n s t
    <n(n-1)/2 upper-triangular costs as rationals, whitespace separated>

A TSPLIB subset is also accepted: TYPE TSP with EDGE_WEIGHT_TYPE EUC_2D
(distances rounded to the nearest integer) or EXPLICIT with FULL_MATRIX
or UPPER_ROW.  Endpoints default to the first and last node unless
overridden.

Reports serialize rationals as "p/q" strings and floats with 17
significant digits, so identical runs produce byte-identical files
(timings aside).
"""

from __future__ import annotations

import json
import math
import random
from fractions import Fraction
from heapq import heappop, heappush
from typing import Iterable, Mapping, Optional

from .errors import InputError, ResourceLimit
from .model import (Cut, Edge, EdgeVector, MetricInstance, all_edges, edge,
                    validate_metric)
from .pathlp import FractionalSolution

SCHEMA_VERSION = 1
TOOL_NAME = "pathtsp"
TOOL_VERSION = "0.1.0"


# -- parsing ---------------------------------------------------------------


def _parse_rational(token: str, where: str) -> Fraction:
    try:
        return Fraction(token)
    except (ValueError, ZeroDivisionError) as exc:
        raise InputError(f"{where}: bad rational {token!r}") from exc


def _nint_sqrt(sq: int) -> int:
    """Nearest integer to sqrt(sq) for a nonnegative integer, exactly."""
    r = math.isqrt(sq)
    return r + 1 if sq - r * r >= r + 1 else r


def _euclidean_cost(ax, ay, bx, by) -> Fraction:
    dx = ax - bx
    dy = ay - by
    if isinstance(dx, int) and isinstance(dy, int):
        return Fraction(_nint_sqrt(dx * dx + dy * dy))
    return Fraction(int(math.sqrt(dx * dx + dy * dy) + 0.5))


def _parse_native(text: str, source: Optional[int], sink: Optional[int]) -> MetricInstance:
    tokens = text.split()
    if len(tokens) < 5 or tokens[0] != "pathtsp":
        raise InputError("line 1: expected header 'pathtsp 1'")
    if tokens[1] != "1":
        raise InputError(f"line 1: unsupported format version {tokens[1]!r}")
    try:
        n, s, t = int(tokens[2]), int(tokens[3]), int(tokens[4])
    except ValueError as exc:
        raise InputError("line 2: expected integers 'n s t'") from exc
    if n < 2:
        raise InputError(f"line 2: need n >= 2, got {n}")
    need = n * (n - 1) // 2
    rest = tokens[5:]
    if len(rest) != need:
        raise InputError(
            f"expected {need} cost entries for n={n}, found {len(rest)}")
    cost = {}
    k = 0
    for u in range(n):
        for v in range(u + 1, n):
            cost[(u, v)] = _parse_rational(rest[k], f"cost entry {k + 1}")
            k += 1
    s = source if source is not None else s
    t = sink if sink is not None else t
    return MetricInstance(n, s, t, cost)


def _parse_tsplib(text: str, source: Optional[int], sink: Optional[int]) -> MetricInstance:
    lines = [ln.strip() for ln in text.splitlines()]
    header: dict[str, str] = {}
    body_start = None
    section = None
    for i, ln in enumerate(lines):
        if not ln or ln == "EOF":
            continue
        key = ln.split(":")[0].strip().upper() if ":" in ln else ln.upper()
        if key in ("NODE_COORD_SECTION", "EDGE_WEIGHT_SECTION"):
            section = key
            body_start = i + 1
            break
        if ":" in ln:
            header[key] = ln.split(":", 1)[1].strip()
        else:
            raise InputError(f"line {i + 1}: unparseable header line {ln!r}")
    if section is None:
        raise InputError("missing NODE_COORD_SECTION or EDGE_WEIGHT_SECTION")
    if header.get("TYPE", "TSP").upper() not in ("TSP",):
        raise InputError(f"unsupported TYPE {header.get('TYPE')!r}")
    try:
        n = int(header["DIMENSION"])
    except (KeyError, ValueError) as exc:
        raise InputError("missing or bad DIMENSION header") from exc
    if n < 2:
        raise InputError(f"DIMENSION must be >= 2, got {n}")
    ewt = header.get("EDGE_WEIGHT_TYPE", "").upper()

    body_tokens: list[str] = []
    for ln in lines[body_start:]:
        if ln == "EOF":
            break
        body_tokens.extend(ln.split())

    cost: dict[Edge, Fraction] = {}
    if ewt == "EUC_2D":
        if section != "NODE_COORD_SECTION":
            raise InputError("EUC_2D requires NODE_COORD_SECTION")
        if len(body_tokens) != 3 * n:
            raise InputError(
                f"expected {3 * n} coordinate tokens, found {len(body_tokens)}")
        pts = []
        for i in range(n):
            xs, ys = body_tokens[3 * i + 1], body_tokens[3 * i + 2]
            def coord(txt):
                f = float(txt)
                return int(f) if f.is_integer() else f
            pts.append((coord(xs), coord(ys)))
        for u in range(n):
            for v in range(u + 1, n):
                cost[(u, v)] = _euclidean_cost(*pts[u], *pts[v])
    elif ewt == "EXPLICIT":
        fmt = header.get("EDGE_WEIGHT_FORMAT", "").upper()
        vals = [_parse_rational(tok, "weight entry") for tok in body_tokens]
        if fmt == "FULL_MATRIX":
            if len(vals) != n * n:
                raise InputError(f"FULL_MATRIX needs {n * n} entries, found {len(vals)}")
            for u in range(n):
                for v in range(u + 1, n):
                    a, b = vals[u * n + v], vals[v * n + u]
                    if a != b:
                        raise InputError(
                            f"asymmetric matrix entries at ({u},{v}): {a} vs {b}")
                    cost[(u, v)] = a
        elif fmt == "UPPER_ROW":
            need = n * (n - 1) // 2
            if len(vals) != need:
                raise InputError(f"UPPER_ROW needs {need} entries, found {len(vals)}")
            k = 0
            for u in range(n):
                for v in range(u + 1, n):
                    cost[(u, v)] = vals[k]
                    k += 1
        else:
            raise InputError(f"unsupported EDGE_WEIGHT_FORMAT {fmt!r}")
    else:
        raise InputError(f"unsupported EDGE_WEIGHT_TYPE {ewt!r}")

    s = source if source is not None else 0
    t = sink if sink is not None else n - 1
    return MetricInstance(n, s, t, cost)


def parse_instance(text: str, fmt: str = "auto", source: Optional[int] = None,
                   sink: Optional[int] = None) -> MetricInstance:
    """Parse an instance and validate metric properties (errors raise)."""
    if fmt == "auto":
        fmt = "native" if text.lstrip().startswith("pathtsp") else "tsplib"
    if fmt == "native":
        inst = _parse_native(text, source, sink)
    elif fmt in ("tsplib", "tsplib-subset"):
        inst = _parse_tsplib(text, source, sink)
    else:
        raise InputError(f"unknown format {fmt!r}")
    problems = validate_metric(inst)
    if problems:
        raise InputError("instance is not a metric: " + "; ".join(problems[:3]))
    return inst


def serialize_instance(inst: MetricInstance) -> str:
    rows = [f"{TOOL_NAME} 1", f"{inst.n} {inst.s} {inst.t}"]
    for u in range(inst.n):
        if u == inst.n - 1:
            break
        rows.append(" ".join(str(inst.cost(u, v)) for v in range(u + 1, inst.n)))
    return "\n".join(rows) + "\n"


# -- generation ---------------------------------------------------------------


def _metric_closure(n: int, cost: dict[Edge, Fraction]) -> dict[Edge, Fraction]:
    d = [[Fraction(0)] * n for _ in range(n)]
    for (u, v), c in cost.items():
        d[u][v] = d[v][u] = c
    for k in range(n):
        for i in range(n):
            dik = d[i][k]
            for j in range(n):
                alt = dik + d[k][j]
                if alt < d[i][j]:
                    d[i][j] = alt
    return {(u, v): d[u][v] for u in range(n) for v in range(u + 1, n)}


def _farthest_pair(n: int, cost: Mapping[Edge, Fraction]) -> tuple[int, int]:
    best = None
    for u in range(n):
        for v in range(u + 1, n):
            c = cost[(u, v)]
            if best is None or c > best[0]:
                best = (c, u, v)
    return best[1], best[2]


def gen_instance(n: int, seed: int, mode: str = "euclidean") -> MetricInstance:
    """Deterministic seeded instance; endpoints are a farthest vertex pair.

    euclidean: distinct integer grid points in [0, 10^6]^2 with rounded
    distances; random-metric: random integer costs.  Both are closed
    under shortest paths afterwards, so the triangle inequality holds by
    construction (rounding alone can break it on near-collinear triples).
    """
    if n < 2:
        raise InputError(f"need n >= 2, got {n}")
    if mode not in ("euclidean", "random-metric"):
        raise InputError(f"unknown generator mode {mode!r}")
    rng = random.Random(f"{TOOL_NAME}:{mode}:{n}:{seed}")
    cost: dict[Edge, Fraction] = {}
    if mode == "euclidean":
        points: list[tuple[int, int]] = []
        taken = set()
        while len(points) < n:
            p = (rng.randrange(0, 10 ** 6 + 1), rng.randrange(0, 10 ** 6 + 1))
            if p not in taken:
                taken.add(p)
                points.append(p)
        for u in range(n):
            for v in range(u + 1, n):
                cost[(u, v)] = _euclidean_cost(*points[u], *points[v])
    else:
        for u in range(n):
            for v in range(u + 1, n):
                cost[(u, v)] = Fraction(rng.randint(1, 10 ** 6))
    cost = _metric_closure(n, cost)
    s, t = _farthest_pair(n, cost)
    return MetricInstance(n, s, t, cost)


# -- oracles -----------------------------------------------------------------


def brute_force_path(inst: MetricInstance) -> Fraction:
    """Exact optimal Hamiltonian s-t path cost by dynamic programming.

    Exponential in n; limited to n <= 11 like plain enumeration of the
    internal vertex orders, which this replaces value-for-value.
    """
    n = inst.n
    if n > 11:
        raise ResourceLimit(f"exact path optimum is limited to n <= 11, got {n}")
    if n == 2:
        return inst.cost(inst.s, inst.t)
    inner = [v for v in inst.vertices() if v not in (inst.s, inst.t)]
    k = len(inner)
    full = (1 << k) - 1
    dp: list[dict[int, Fraction]] = [dict() for _ in range(1 << k)]
    for i, v in enumerate(inner):
        dp[1 << i][i] = inst.cost(inst.s, v)
    for mask in range(1, full + 1):
        row = dp[mask]
        if not row:
            continue
        for i, acc in row.items():
            for j in range(k):
                if mask & (1 << j):
                    continue
                nm = mask | (1 << j)
                cand = acc + inst.cost(inner[i], inner[j])
                cur = dp[nm].get(j)
                if cur is None or cand < cur:
                    dp[nm][j] = cand
    return min(dp[full][i] + inst.cost(inner[i], inst.t) for i in range(k))


def oracle_narrow_cuts(xsol: FractionalSolution) -> list[Cut]:
    """All s-t cuts of value below 2, by exhaustive enumeration (n <= 16)."""
    inst = xsol.instance
    n = inst.n
    if n > 16:
        raise ResourceLimit(f"cut enumeration is limited to n <= 16, got {n}")
    others = [v for v in inst.vertices() if v not in (inst.s, inst.t)]
    out = []
    for mask in range(1 << len(others)):
        side = {inst.s}
        for bit, v in enumerate(others):
            if mask & (1 << bit):
                side.add(v)
        if cut_value_of(xsol.x, side) < 2:
            out.append(Cut(side, n))
    out.sort(key=lambda c: (len(c.s_side), tuple(sorted(c.s_side))))
    return out


def cut_value_of(x: EdgeVector, side: set[int]) -> Fraction:
    return sum(v for (a, b), v in x.items() if (a in side) != (b in side))


def _dijkstra(inst: MetricInstance, costs: Mapping[Edge, Fraction],
              start: int) -> list[Optional[Fraction]]:
    n = inst.n
    dist: list[Optional[Fraction]] = [None] * n
    heap = [(Fraction(0), start)]
    while heap:
        d, v = heappop(heap)
        if dist[v] is not None:
            continue
        dist[v] = d
        for w in range(n):
            if w != v and dist[w] is None:
                c = costs.get(edge(v, w))
                if c is not None:
                    heappush(heap, (d + c, w))
    return dist


def oracle_min_tjoin_cost(inst: MetricInstance, costs: Mapping[Edge, Fraction],
                          T: Iterable[int]) -> Fraction:
    """Minimum join cost by enumerating all perfect matchings of T.

    Independent of the production route: Dijkstra distances and full
    (|T|-1)!! matching enumeration; limited to |T| <= 12.
    """
    terms = sorted(set(T))
    if len(terms) % 2 == 1:
        raise InputError("parity set must have even size")
    if len(terms) > 12:
        raise ResourceLimit("matching enumeration is limited to |T| <= 12")
    if not terms:
        return Fraction(0)
    dist = {v: _dijkstra(inst, costs, v) for v in terms}

    best: list[Optional[Fraction]] = [None]

    def rec(remaining: tuple[int, ...], acc: Fraction) -> None:
        if not remaining:
            if best[0] is None or acc < best[0]:
                best[0] = acc
            return
        a = remaining[0]
        rest = remaining[1:]
        for idx, b in enumerate(rest):
            d = dist[a][b]
            if d is None:
                continue
            rec(rest[:idx] + rest[idx + 1:], acc + d)

    rec(tuple(terms), Fraction(0))
    if best[0] is None:
        raise InputError("parity set cannot be joined")
    return best[0]


# -- report serialization ------------------------------------------------------


def jsonable(value):
    """Recursively convert report values to JSON-stable primitives.

    Fractions become "p/q" strings, floats become 17-significant-digit
    strings, sets become sorted lists.
    """
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        return value
    if isinstance(value, Mapping):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (frozenset, set)):
        return [jsonable(v) for v in sorted(value)]
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if hasattr(value, "to_dict"):
        return jsonable(value.to_dict())
    if hasattr(value, "describe"):
        return jsonable(value.describe())
    raise TypeError(f"cannot serialize {type(value).__name__} into a report")


def write_report(path: str, report: dict) -> None:
    with open(path, "w") as handle:
        json.dump(jsonable(report), handle, indent=2, sort_keys=True)
        handle.write("\n")


def weight_function_to_dict(h, extra: Optional[dict] = None) -> dict:
    out = dict(h.describe())
    if extra:
        out.update(extra)
    return out


def load_weight_function(path: str):
    from .weightfn import WeightFunction
    with open(path) as handle:
        data = json.load(handle)
    kind = data.get("kind")
    if kind == "default":
        return WeightFunction.default()
    if kind == "constant":
        return WeightFunction.constant(Fraction(data["value"]))
    if kind == "piecewise":
        return WeightFunction.piecewise([Fraction(v) for v in data["values"]])
    raise InputError(f"unknown weight function kind {kind!r} in {path}")
