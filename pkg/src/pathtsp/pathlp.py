"""The path relaxation LP and its narrow-cut chain.

The relaxation minimizes c(x) subject to degree equalities (2 inside, 1 at
the endpoints), x(delta(U)) >= 2 for cuts avoiding both endpoints,
x(delta(U)) >= 1 for s-t cuts, and x >= 0.  Cut constraints are separated
lazily by exact max-flow; at most one cut per family is added per round
(the most violated one, smallest defining side on ties).

An s-t cut is "narrow" when its value under the optimum is below 2.  The
defining sides of the narrow cuts are nested, so they form a chain; the
chain is recovered by pairwise forcing flows and block prefixes, and any
non-chain structure is reported as an invariant violation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cmp_to_key
from typing import Optional

from .errors import InputError, InvariantViolation
from .graphs import max_flow_min_cut
from .lp import LPModel, lp_solve
from .model import Cut, EdgeVector, MetricInstance, all_edges, cut_value


@dataclass
class FractionalSolution:
    """An optimum x of the path relaxation together with its value c(x)."""
    instance: MetricInstance
    x: EdgeVector
    value: Fraction
    cut_rounds: int = 0
    lp_pivots: int = 0

    def check_degrees(self) -> bool:
        inst = self.instance
        for v in inst.vertices():
            want = 1 if v in (inst.s, inst.t) else 2
            if cut_value(self.x, {v}, inst.n) != want:
                return False
        return all(val >= 0 for _, val in self.x.items())


@dataclass
class NarrowCut:
    cut: Cut
    value: Fraction  # x(delta(U)) < 2
    z: Fraction      # 2 - value, in (0, 1]


@dataclass
class NarrowCutChain:
    """All narrow cuts, ordered by strictly nested defining sides."""
    cuts: list[NarrowCut] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.cuts)

    def __iter__(self):
        return iter(self.cuts)

    def __getitem__(self, i: int) -> NarrowCut:
        return self.cuts[i]

    def s_sides(self) -> list[frozenset[int]]:
        return [nc.cut.s_side for nc in self.cuts]


def _degree_model(inst: MetricInstance) -> tuple[LPModel, list]:
    edges = all_edges(inst.n)
    model = LPModel("min")
    for e in edges:
        model.add_variable(lo=0, obj=inst.edge_cost(e))
    var_of = {e: i for i, e in enumerate(edges)}
    for v in inst.vertices():
        coeffs = {var_of[e]: Fraction(1) for e in edges if v in e}
        rhs = 1 if v in (inst.s, inst.t) else 2
        model.add_row(coeffs, "==", rhs)
    return model, edges


def _vector_from(primal, edges) -> EdgeVector:
    return EdgeVector({e: x for e, x in zip(edges, primal) if x != 0})


def _violated_st_cut(x: EdgeVector, inst: MetricInstance) -> Optional[tuple[Fraction, Cut]]:
    value, side = max_flow_min_cut(x, inst.n, {inst.s}, {inst.t})
    if value < 1:
        return Fraction(1) - value, Cut(side, inst.n)
    return None

def _violated_inner_cut(x: EdgeVector, inst: MetricInstance) -> Optional[tuple[Fraction, Cut]]:
    best: Optional[tuple[Fraction, tuple, frozenset]] = None
    for v in inst.vertices():
        if v in (inst.s, inst.t):
            continue
        value, side = max_flow_min_cut(x, inst.n, {v}, {inst.s, inst.t})
        key = (value, tuple(sorted(side)))
        if best is None or key < best[:2]:
            best = (value, key[1], side)
    if best is not None and best[0] < 2:
        return Fraction(2) - best[0], Cut(best[2], inst.n)
    return None


def find_violated_cut(x: EdgeVector, inst: MetricInstance) -> Optional[Cut]:
    """A most violated cut constraint under x, or None when all hold.

    Exact separation: one max-flow for the s-t family, merged-terminal
    flows for the family avoiding both endpoints.  Ties between the two
    families go to the s-t family.
    """
    st = _violated_st_cut(x, inst)
    inner = _violated_inner_cut(x, inst)
    candidates = [c for c in (st, inner) if c is not None]
    if not candidates:
        return None
    best = max(candidates, key=lambda item: item[0])
    if st is not None and st[0] == best[0]:
        return st[1]
    return best[1]


def solve_path_lp(inst: MetricInstance) -> FractionalSolution:
    """Optimum of the full exponential relaxation via lazy cut generation."""
    model, edges = _degree_model(inst)
    var_of = {e: i for i, e in enumerate(edges)}
    seen_rows: set[frozenset[int]] = set()
    rounds = 0
    pivots = 0
    while True:
        out = lp_solve(model)
        pivots += out.pivots
        if out.status != "optimal":
            raise InvariantViolation(
                f"path relaxation must be solvable, got {out.status}")
        x = _vector_from(out.primal, edges)
        st = _violated_st_cut(x, inst)
        inner = _violated_inner_cut(x, inst)
        if st is None and inner is None:
            return FractionalSolution(inst, x, out.objective,
                                      cut_rounds=rounds, lp_pivots=pivots)
        rounds += 1
        for viol, need in ((st, 1), (inner, 2)):
            if viol is None:
                continue
            cut = viol[1]
            if cut.s_side in seen_rows:
                raise InvariantViolation(f"separated an already present cut {cut}")
            seen_rows.add(cut.s_side)
            coeffs = {var_of[e]: Fraction(1) for e in cut.edges()}
            model.add_row(coeffs, ">=", need)


def _separated(x: EdgeVector, inst: MetricInstance, u: int, v: int) -> bool:
    """Does some s-t cut of value < 2 have u inside and v outside?"""
    S = {inst.s, u}
    T = {inst.t, v}
    if S & T:
        return False
    value, _ = max_flow_min_cut(x, inst.n, S, T)
    return value < 2


def narrow_cuts(xsol: FractionalSolution) -> NarrowCutChain:
    """Extract the chain of narrow cuts of an optimal solution.

    For each ordered vertex pair, a forcing flow decides whether a narrow
    cut separates the pair.  The never-separated relation yields blocks,
    the separation direction orders them, and block prefixes of value
    below 2 are exactly the narrow cuts.  Completeness and correctness
    rest on the chain property; any inconsistency raises.
    """
    inst = xsol.instance
    n = inst.n
    x = xsol.x
    sep = [[False] * n for _ in range(n)]
    for u in range(n):
        for v in range(n):
            if u != v:
                sep[u][v] = _separated(x, inst, u, v)

    blocks: list[list[int]] = []
    for v in range(n):
        placed = False
        for block in blocks:
            rep = block[0]
            if not sep[rep][v] and not sep[v][rep]:
                block.append(v)
                placed = True
                break
        if not placed:
            blocks.append([v])
    # verify the relation is consistent with the blocks
    for block in blocks:
        for a in block:
            for b in block:
                if a != b and (sep[a][b] or sep[b][a]):
                    raise InvariantViolation(
                        f"narrow-cut separation is not an equivalence: {a},{b}")
    for bi, block_a in enumerate(blocks):
        for bj, block_b in enumerate(blocks):
            if bi >= bj:
                continue
            votes = {(sep[a][b], sep[b][a]) for a in block_a for b in block_b}
            if len(votes) != 1 or votes.pop() not in ((True, False), (False, True)):
                raise InvariantViolation(
                    f"narrow cuts do not induce a total block order "
                    f"(blocks {block_a} vs {block_b})")

    def cmp(block_a, block_b) -> int:
        if block_a is block_b:
            return 0
        return -1 if sep[block_a[0]][block_b[0]] else 1

    blocks.sort(key=cmp_to_key(cmp))
    if inst.s not in blocks[0] or inst.t not in blocks[-1]:
        raise InvariantViolation("endpoint blocks are not extremal in the chain")

    chain = NarrowCutChain()
    prefix: list[int] = []
    for block in blocks[:-1]:
        prefix.extend(block)
        value = cut_value(x, prefix, n)
        if value < 2:
            if value < 1:
                raise InvariantViolation(
                    f"narrow cut with value {value} below 1 contradicts feasibility")
            chain.cuts.append(NarrowCut(Cut(prefix, n), value, Fraction(2) - value))
    return chain
