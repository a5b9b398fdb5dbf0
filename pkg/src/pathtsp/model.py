"""Core domain types: metric instances, edge vectors, cuts, multigraphs.

Vertices are dense integer ids 0..n-1 and edges are canonical (min, max)
pairs over the complete graph.  Combinatorial data is exact (Fraction);
certificate-side vectors may carry floats.  All values are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

from collections import Counter
from fractions import Fraction
from typing import Iterable, Iterator, Mapping

from .errors import InputError

Edge = tuple[int, int]


def edge(u: int, v: int) -> Edge:
    """Canonical undirected edge (smaller id first)."""
    if u == v:
        raise InputError(f"loop edge at vertex {u}")
    return (u, v) if u < v else (v, u)


def all_edges(n: int) -> list[Edge]:
    return [(u, v) for u in range(n) for v in range(u + 1, n)]


class MetricInstance:
    """A finite metric on {0..n-1} with designated endpoints s != t.

    The cost map must be total on all unordered vertex pairs; metric
    properties themselves are checked by validate_metric, not here.
    """

    __slots__ = ("n", "s", "t", "_cost")

    def __init__(self, n: int, s: int, t: int, cost: Mapping[Edge, Fraction | int]):
        if n < 2:
            raise InputError(f"need at least two vertices, got n={n}")
        if not (0 <= s < n and 0 <= t < n):
            raise InputError(f"endpoints {s},{t} out of range for n={n}")
        if s == t:
            raise InputError("endpoints s and t must be distinct")
        self.n = n
        self.s = s
        self.t = t
        table = {}
        for e in all_edges(n):
            if e in cost:
                val = cost[e]
            elif (e[1], e[0]) in cost:
                val = cost[(e[1], e[0])]
            else:
                raise InputError(f"cost map is missing edge {e}")
            table[e] = Fraction(val)
        rev_conflicts = [
            e for e in all_edges(n)
            if (e[1], e[0]) in cost and e in cost and Fraction(cost[e]) != Fraction(cost[(e[1], e[0])])
        ]
        if rev_conflicts:
            raise InputError(f"asymmetric cost entries for edges {rev_conflicts[:3]}")
        self._cost = table

    def cost(self, u: int, v: int) -> Fraction:
        return self._cost[edge(u, v)]

    def edge_cost(self, e: Edge) -> Fraction:
        return self._cost[e]

    def edges(self) -> list[Edge]:
        return all_edges(self.n)

    def vertices(self) -> range:
        return range(self.n)

    def path_cost(self, seq: Iterable[int]) -> Fraction:
        seq = list(seq)
        return sum((self.cost(a, b) for a, b in zip(seq, seq[1:])), Fraction(0))

    def cost_items(self) -> Iterator[tuple[Edge, Fraction]]:
        return iter(self._cost.items())

    def __repr__(self) -> str:
        return f"MetricInstance(n={self.n}, s={self.s}, t={self.t})"


def validate_metric(inst: MetricInstance) -> list[str]:
    """Diagnose metric violations; an empty list means the instance is valid.

    Checks nonnegativity, the triangle inequality over all vertex triples,
    and s != t.  Each violation names the offending pair or triple.
    Symmetry holds by representation (costs are stored per unordered pair).
    """
    problems = []
    if inst.s == inst.t:
        problems.append(f"endpoints coincide: s = t = {inst.s}")
    for e, c in inst.cost_items():
        if c < 0:
            problems.append(f"negative cost {c} on edge {e}")
    n = inst.n
    for u in range(n):
        for w in range(u + 1, n):
            cuw = inst.cost(u, w)
            for v in range(n):
                if v == u or v == w:
                    continue
                if cuw > inst.cost(u, v) + inst.cost(v, w):
                    problems.append(
                        f"triangle inequality fails on ({u},{v},{w}): "
                        f"c({u},{w})={cuw} > c({u},{v})+c({v},{w})="
                        f"{inst.cost(u, v) + inst.cost(v, w)}"
                    )
    return problems


class EdgeVector:
    """A sparse vector over edges; role (LP solution, parity vector, ...) is contextual.

    Missing edges read as zero.  Exact zeros are dropped so support() is
    canonical.  Values are Fractions in combinatorial contexts and may be
    floats in certificate contexts.
    """

    __slots__ = ("_vals",)

    def __init__(self, values: Mapping[Edge, Fraction | float] | Iterable[tuple[Edge, Fraction | float]] = ()):
        items = values.items() if isinstance(values, Mapping) else values
        vals = {}
        for e, x in items:
            e = edge(*e)
            if x != 0:
                vals[e] = vals.get(e, 0) + x if e in vals else x
        self._vals = {e: x for e, x in vals.items() if x != 0}

    @staticmethod
    def indicator(edges: Iterable[Edge]) -> "EdgeVector":
        return EdgeVector({edge(*e): Fraction(1) for e in edges})

    def __getitem__(self, e: Edge):
        return self._vals.get(edge(*e), 0)

    def get(self, e: Edge, default=0):
        return self._vals.get(edge(*e), default)

    def support(self) -> set[Edge]:
        return set(self._vals)

    def items(self):
        return self._vals.items()

    def __len__(self) -> int:
        return len(self._vals)

    def __iter__(self):
        return iter(self._vals)

    def __eq__(self, other) -> bool:
        return isinstance(other, EdgeVector) and self._vals == other._vals

    def value_on(self, edges: Iterable[Edge]):
        """x(F) = sum of values over an edge set."""
        return sum(self._vals.get(edge(*e), 0) for e in edges)

    def cost_with(self, inst: MetricInstance):
        """c(x) = sum over the support of cost times value."""
        return sum(inst.edge_cost(e) * x for e, x in self._vals.items())

    def scaled(self, factor) -> "EdgeVector":
        return EdgeVector({e: factor * x for e, x in self._vals.items()})

    @staticmethod
    def combine(terms: Iterable[tuple[Fraction | float, "EdgeVector"]]) -> "EdgeVector":
        acc: dict[Edge, Fraction | float] = {}
        for coef, vec in terms:
            if coef == 0:
                continue
            for e, x in vec.items():
                acc[e] = acc.get(e, 0) + coef * x
        return EdgeVector(acc)

    def __repr__(self) -> str:
        return f"EdgeVector({self._vals!r})"


def cut_value(x: EdgeVector, u_set: Iterable[int], n: int):
    """x(delta(U)) for a vertex subset U with empty != U != V."""
    u = frozenset(u_set)
    if not u or len(u) >= n:
        raise InputError("cut side must be a proper nonempty vertex subset")
    return sum(val for (a, b), val in x.items() if (a in u) != (b in u))


class Cut:
    """An undirected cut delta(U), stored by its defining side U.

    For s-t cuts the convention is s in U and t not in U.
    """

    __slots__ = ("s_side", "n")

    def __init__(self, s_side: Iterable[int], n: int):
        side = frozenset(s_side)
        if not side or len(side) >= n:
            raise InputError("cut side must be a proper nonempty vertex subset")
        self.s_side = side
        self.n = n

    def edges(self) -> list[Edge]:
        inside = sorted(self.s_side)
        outside = [v for v in range(self.n) if v not in self.s_side]
        return [edge(u, v) for u in inside for v in outside]

    def crosses(self, e: Edge) -> bool:
        return (e[0] in self.s_side) != (e[1] in self.s_side)

    def value_under(self, x: EdgeVector):
        return cut_value(x, self.s_side, self.n)

    def __eq__(self, other) -> bool:
        return isinstance(other, Cut) and self.s_side == other.s_side and self.n == other.n

    def __hash__(self) -> int:
        return hash((self.s_side, self.n))

    def __repr__(self) -> str:
        return f"Cut({sorted(self.s_side)}, n={self.n})"


class Multigraph:
    """An undirected multigraph on vertices 0..n-1 (edge multiplicities >= 1)."""

    __slots__ = ("n", "_mult")

    def __init__(self, n: int, edges: Iterable[Edge] | Mapping[Edge, int] = ()):
        self.n = n
        self._mult: Counter = Counter()
        if isinstance(edges, Mapping):
            for e, m in edges.items():
                self.add(e, m)
        else:
            for e in edges:
                self.add(e)

    def add(self, e: Edge, count: int = 1) -> None:
        if count < 1:
            raise InputError(f"edge multiplicity must be >= 1, got {count}")
        e = edge(*e)
        if not (0 <= e[0] < self.n and 0 <= e[1] < self.n):
            raise InputError(f"edge {e} out of range for n={self.n}")
        self._mult[e] += count

    def multiplicity(self, e: Edge) -> int:
        return self._mult.get(edge(*e), 0)

    def edge_multiset(self) -> Counter:
        return Counter(self._mult)

    def iter_edges(self) -> Iterator[Edge]:
        """Edges repeated according to multiplicity, in canonical order."""
        for e in sorted(self._mult):
            for _ in range(self._mult[e]):
                yield e

    def num_edges(self) -> int:
        return sum(self._mult.values())

    def degree(self, v: int) -> int:
        return sum(m for (a, b), m in self._mult.items() if a == v or b == v)

    def odd_vertices(self) -> set[int]:
        deg = [0] * self.n
        for (a, b), m in self._mult.items():
            deg[a] += m
            deg[b] += m
        return {v for v in range(self.n) if deg[v] % 2 == 1}

    def components(self) -> list[list[int]]:
        """Connected components as sorted vertex lists, ordered by smallest member."""
        parent = list(range(self.n))

        def find(a: int) -> int:
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for (a, b) in self._mult:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        groups: dict[int, list[int]] = {}
        for v in range(self.n):
            groups.setdefault(find(v), []).append(v)
        return [sorted(groups[r]) for r in sorted(groups)]

    def total_cost(self, inst: MetricInstance) -> Fraction:
        return sum((inst.edge_cost(e) * m for e, m in self._mult.items()), Fraction(0))

    def __repr__(self) -> str:
        return f"Multigraph(n={self.n}, edges={dict(self._mult)!r})"
