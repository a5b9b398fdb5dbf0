"""Spanning-tree convex combinations with the nested-cut prefix structure.

The LP optimum (scaled) lies in the spanning tree polytope, so it is a
convex combination of spanning trees.  Beyond a plain combination, the
tours downstream need a *structured* one: for every narrow cut C there is
a prefix of trees, of total weight exactly 2 - x(C), each crossing C
exactly once.  Such a combination always exists for an optimum of the
path relaxation; this module constructs one by greedy prefix peeling with
backtracking and verifies it in exact arithmetic.

Two restricted-master LPs over tree columns do the heavy lifting, both
priced by spanning trees on the dual values of the edge rows:

  * a feasibility master (artificial slacks, pricing by maximum weight)
    that writes a vector as a convex combination of spanning trees, and
  * an extraction master (no artificials, pricing by minimum weight) that
    computes the largest weight of a candidate tree that keeps the
    residual decomposable, returning the residual's decomposition as a
    by-product.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .errors import InvariantViolation, ResourceLimit
from .lp import LPModel, lp_solve
from .model import Edge, EdgeVector
from .pathlp import FractionalSolution, NarrowCutChain

_SEARCH_BUDGET = 20_000  # candidate trees + master solves per instance


@dataclass(frozen=True)
class WeightedTree:
    """A spanning tree with its convex weight and cumulative position interval."""
    edges: frozenset[Edge]
    weight: Fraction
    sigma_interval: tuple[Fraction, Fraction]


@dataclass
class DecompositionStats:
    extraction_steps: int = 0
    backtracks: int = 0
    master_solves: int = 0
    columns_priced: int = 0


@dataclass
class StructuredDecomposition:
    trees: list[WeightedTree]
    solution: FractionalSolution
    chain: NarrowCutChain
    stats: DecompositionStats = field(default_factory=DecompositionStats)

    def __len__(self) -> int:
        return len(self.trees)

    def prefix_weight(self, j: int) -> Fraction:
        """Total weight of trees 0..j inclusive."""
        return self.trees[j].sigma_interval[1]


@dataclass
class VerificationReport:
    passed: bool
    failures: list[str]
    checks: dict[str, bool]


def _spanning_tree_by_weight(n: int, edges: Sequence[Edge],
                             weight: dict[Edge, Fraction],
                             maximize: bool) -> Optional[frozenset[Edge]]:
    """Kruskal extremal spanning tree; None if the edges do not span."""
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    sign = -1 if maximize else 1
    chosen = []
    for e in sorted(edges, key=lambda e: (sign * weight.get(e, Fraction(0)), e)):
        ra, rb = find(e[0]), find(e[1])
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
            chosen.append(e)
            if len(chosen) == n - 1:
                return frozenset(chosen)
    return None


def _initial_tree(x: EdgeVector, n: int) -> frozenset[Edge]:
    supp = sorted(x.support())
    tree = _spanning_tree_by_weight(n, supp, {e: x[e] for e in supp}, maximize=True)
    if tree is None:
        raise InvariantViolation("support of the vector does not span the graph")
    return tree


def tree_convex_combination(x: EdgeVector, mass: Fraction, n: int,
                            seed: Iterable[frozenset[Edge]] = (),
                            stats: Optional[DecompositionStats] = None,
                            ) -> list[tuple[frozenset[Edge], Fraction]]:
    """Write x exactly as sum of nu_T chi(T), sum nu_T = mass, nu >= 0.

    Feasibility master: minimize total artificial slack over the current
    tree columns; price in the maximum-weight spanning tree under the edge
    duals until either the slack reaches zero (done) or no improving
    column exists (the vector is outside the scaled tree polytope, which
    contradicts theory for LP optima and raises).
    """
    if mass == 0:
        if x.support():
            raise InvariantViolation("zero mass but nonzero vector")
        return []
    stats = stats if stats is not None else DecompositionStats()
    supp = sorted(x.support())
    columns: list[frozenset[Edge]] = []
    for tree in list(seed) or [_initial_tree(x, n)]:
        if tree not in columns:
            columns.append(tree)
    guard = 0
    while True:
        guard += 1
        if guard > 4 * len(supp) + 200:
            raise InvariantViolation("tree pricing failed to converge")
        model = LPModel("min")
        col_vars = [model.add_variable(lo=0, obj=0) for _ in columns]
        row_of_edge = {}
        art_vars = []
        for e in supp:
            coeffs = {cv: Fraction(1)
                      for cv, tree in zip(col_vars, columns) if e in tree}
            ap = model.add_variable(lo=0, obj=1)
            am = model.add_variable(lo=0, obj=1)
            art_vars.extend((ap, am))
            coeffs[ap] = Fraction(1)
            coeffs[am] = Fraction(-1)
            row_of_edge[e] = model.add_row(coeffs, "==", x[e])
        coeffs = {cv: Fraction(1) for cv in col_vars}
        ap = model.add_variable(lo=0, obj=1)
        am = model.add_variable(lo=0, obj=1)
        art_vars.extend((ap, am))
        coeffs[ap] = Fraction(1)
        coeffs[am] = Fraction(-1)
        mass_row = model.add_row(coeffs, "==", mass)
        out = lp_solve(model)
        stats.master_solves += 1
        if out.status != "optimal":
            raise InvariantViolation(f"feasibility master came back {out.status}")
        if out.objective == 0:
            return [(tree, out.primal[cv])
                    for tree, cv in zip(columns, col_vars)
                    if out.primal[cv] != 0]
        weight = {e: out.duals[row_of_edge[e]] for e in supp}
        eta = out.duals[mass_row]
        tree = _spanning_tree_by_weight(n, supp, weight, maximize=True)
        if tree is None:
            raise InvariantViolation("support does not span the graph")
        stats.columns_priced += 1
        gain = sum(weight[e] for e in tree) + eta
        if gain > 0 and tree not in columns:
            columns.append(tree)
            continue
        raise InvariantViolation(
            "vector is not decomposable into spanning trees "
            f"(artificial mass {out.objective})")


def _max_extractable(candidate: frozenset[Edge], x: EdgeVector, mass: Fraction,
                     n: int, cap: Fraction, seeds: Sequence[frozenset[Edge]],
                     stats: DecompositionStats,
                     ) -> tuple[Fraction, list[tuple[frozenset[Edge], Fraction]]]:
    """Largest lam <= cap with x - lam*chi(candidate) still tree-decomposable.

    Extraction master:  max lam  s.t.  lam*chi(S) + sum nu_T chi(T) = x,
    lam + sum nu_T = mass, nu >= 0.  The seed columns make lam = 0
    feasible; new columns price in while the minimum-weight spanning tree
    under the edge duals has negative reduced profit.  Returns lam and the
    residual decomposition read off the nu values.
    """
    supp = sorted(x.support())
    columns: list[frozenset[Edge]] = []
    for tree in seeds:
        if tree not in columns:
            columns.append(tree)
    guard = 0
    while True:
        guard += 1
        if guard > 4 * len(supp) + 200:
            raise InvariantViolation("extraction pricing failed to converge")
        model = LPModel("max")
        lam_var = model.add_variable(lo=0, hi=cap, obj=1)
        col_vars = [model.add_variable(lo=0, obj=0) for _ in columns]
        row_of_edge = {}
        for e in supp:
            coeffs = {cv: Fraction(1)
                      for cv, tree in zip(col_vars, columns) if e in tree}
            if e in candidate:
                coeffs[lam_var] = Fraction(1)
            row_of_edge[e] = model.add_row(coeffs, "==", x[e])
        coeffs = {cv: Fraction(1) for cv in col_vars}
        coeffs[lam_var] = Fraction(1)
        mass_row = model.add_row(coeffs, "==", mass)
        out = lp_solve(model)
        stats.master_solves += 1
        if out.status != "optimal":
            raise InvariantViolation(f"extraction master came back {out.status}")
        weight = {e: out.duals[row_of_edge[e]] for e in supp}
        eta = out.duals[mass_row]
        tree = _spanning_tree_by_weight(n, supp, weight, maximize=False)
        if tree is None:
            raise InvariantViolation("support does not span the graph")
        stats.columns_priced += 1
        profit = -(sum(weight[e] for e in tree) + eta)
        if profit > 0 and tree not in columns:
            columns.append(tree)
            continue
        lam = out.primal[lam_var]
        decomp = [(tree_edges, out.primal[cv])
                  for tree_edges, cv in zip(columns, col_vars)
                  if out.primal[cv] != 0]
        return lam, decomp


def base_decomposition(xsol: FractionalSolution) -> list[WeightedTree]:
    """An exact convex combination of spanning trees equal to the LP optimum.

    Restricted-master column generation; the basic optimum keeps at most
    |support| + 1 trees.  No prefix structure is guaranteed here.
    """
    decomp = tree_convex_combination(xsol.x, Fraction(1), xsol.instance.n)
    trees = []
    acc = Fraction(0)
    for edges, w in decomp:
        trees.append(WeightedTree(edges, w, (acc, acc + w)))
        acc += w
    if acc != 1:
        raise InvariantViolation(f"decomposition weights sum to {acc}, not 1")
    return trees


def _crossing_positions(e: Edge, chain: NarrowCutChain) -> frozenset[int]:
    return frozenset(i for i, nc in enumerate(chain) if nc.cut.crosses(e))


def _cover_search(demanded: tuple[int, ...], edges_sorted: list[Edge],
                  crossings: dict[Edge, frozenset[int]]):
    """Depth-first exact covers: edge sets crossing each demanded cut once.

    Chain nesting makes every edge's crossing set an interval of cut
    positions, so this is exact interval cover, yielded in canonical edge
    order.
    """
    demanded_set = frozenset(demanded)

    def rec(uncovered: frozenset[int], chosen: tuple[Edge, ...]):
        if not uncovered:
            yield chosen
            return
        target = min(uncovered)
        for e in edges_sorted:
            hits = crossings[e] & demanded_set
            if target not in hits:
                continue
            if not hits <= uncovered:
                continue
            yield from rec(uncovered - hits, chosen + (e,))

    yield from rec(demanded_set, ())


def _complete_to_tree(n: int, chosen: Iterable[Edge], edges_sorted: list[Edge],
                      crossings: dict[Edge, frozenset[int]],
                      demanded: frozenset[int]) -> Optional[frozenset[Edge]]:
    """Extend the cover to a spanning tree using edges that avoid demanded cuts."""
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    picked = list(chosen)
    count = n
    for e in picked:
        ra, rb = find(e[0]), find(e[1])
        if ra == rb:
            return None
        parent[max(ra, rb)] = min(ra, rb)
        count -= 1
    for e in edges_sorted:
        if crossings[e] & demanded:
            continue
        ra, rb = find(e[0]), find(e[1])
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
            picked.append(e)
            count -= 1
            if count == 1:
                return frozenset(picked)
    return None if count > 1 else frozenset(picked)


def structured_decomposition(base: Sequence[WeightedTree], chain: NarrowCutChain,
                             xsol: FractionalSolution) -> StructuredDecomposition:
    """Reorder mass into a decomposition with the exact prefix property.

    Greedy prefix peeling: while some narrow cut still demands weight,
    pick a spanning tree inside the residual support crossing every
    demanded cut exactly once (depth-first over crossing-edge choices),
    extract the largest weight that keeps the residual decomposable, and
    iterate.  Extraction is capped so cumulative weight lands exactly on
    each demand boundary; backtracking covers candidates whose largest
    extractable weight is zero.  The result is verified before return.
    """
    inst = xsol.instance
    n = inst.n
    stats = DecompositionStats()
    x_rem = xsol.x
    mass = Fraction(1)
    resid: list[tuple[frozenset[Edge], Fraction]] = [
        (t.edges, t.weight) for t in base]
    extracted: list[tuple[frozenset[Edge], Fraction]] = []
    W = Fraction(0)
    budget = _SEARCH_BUDGET

    while True:
        demanded = tuple(i for i, nc in enumerate(chain) if nc.z > W)
        if not demanded:
            break
        stats.extraction_steps += 1
        supp_sorted = sorted(x_rem.support())
        crossings = {e: _crossing_positions(e, chain) for e in supp_sorted}
        for e, cs in crossings.items():
            if cs and max(cs) - min(cs) + 1 != len(cs):
                raise InvariantViolation(
                    f"edge {e} crosses a non-contiguous set of chain cuts")
        cap = min(min(chain[i].z for i in demanded) - W, mass)
        accepted = None
        for chosen in _cover_search(demanded, supp_sorted, crossings):
            budget -= 1
            if budget <= 0:
                raise ResourceLimit(
                    "structured decomposition search budget exhausted "
                    f"(steps={stats.extraction_steps}, backtracks={stats.backtracks})")
            tree = _complete_to_tree(n, chosen, supp_sorted, crossings,
                                     frozenset(demanded))
            if tree is None:
                stats.backtracks += 1
                continue
            lam, new_resid = _max_extractable(
                tree, x_rem, mass, n, cap, [t for t, _ in resid], stats)
            if lam > 0:
                accepted = (tree, lam, new_resid)
                break
            stats.backtracks += 1
        if accepted is None:
            raise ResourceLimit(
                "no extractable structured tree at cumulative weight "
                f"{W} (backtracks={stats.backtracks})")
        tree, lam, resid = accepted
        extracted.append((tree, lam))
        W += lam
        mass -= lam
        x_rem = EdgeVector({e: v - (lam if e in tree else 0)
                            for e, v in x_rem.items()})

    trees = []
    acc = Fraction(0)
    for edges, w in extracted + resid:
        trees.append(WeightedTree(edges, w, (acc, acc + w)))
        acc += w
    if acc != 1:
        raise InvariantViolation(f"structured weights sum to {acc}, not 1")
    dec = StructuredDecomposition(trees, xsol, chain, stats)
    report = verify_structured(dec)
    if not report.passed:
        raise InvariantViolation(
            "structured decomposition failed verification: "
            + "; ".join(report.failures))
    return dec


def _is_spanning_tree(edges: frozenset[Edge], n: int) -> bool:
    if len(edges) != n - 1:
        return False
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for e in edges:
        ra, rb = find(e[0]), find(e[1])
        if ra == rb:
            return False
        parent[max(ra, rb)] = min(ra, rb)
    return True


def verify_structured(dec: StructuredDecomposition) -> VerificationReport:
    """Exact check of every decomposition invariant; failures are collected.

    Convexity, per-edge equality with the LP optimum, spanning-tree-ness,
    interval tiling, the prefix property at every narrow cut, and the
    general lower bound on once-crossing weight (which holds in any valid
    convex combination, structured or not).
    """
    failures = []
    checks = {}
    xsol = dec.solution
    n = xsol.instance.n
    trees = dec.trees

    total = sum((t.weight for t in trees), Fraction(0))
    checks["convex_weights"] = total == 1 and all(t.weight > 0 for t in trees)
    if not checks["convex_weights"]:
        failures.append(f"weights must be positive and sum to 1 (sum={total})")

    recombined = EdgeVector.combine([(t.weight, EdgeVector.indicator(t.edges))
                                     for t in trees])
    checks["per_edge_equality"] = recombined == xsol.x
    if not checks["per_edge_equality"]:
        failures.append("sum of weighted trees differs from the LP optimum")

    supp = xsol.x.support()
    ok_trees = True
    for j, t in enumerate(trees):
        if not _is_spanning_tree(t.edges, n):
            ok_trees = False
            failures.append(f"tree {j} is not a spanning tree")
        if not t.edges <= supp:
            ok_trees = False
            failures.append(f"tree {j} uses edges outside the support")
    checks["spanning_trees"] = ok_trees

    ok_tiling = True
    acc = Fraction(0)
    for j, t in enumerate(trees):
        a, b = t.sigma_interval
        if a != acc or b - a != t.weight:
            ok_tiling = False
            failures.append(f"tree {j} interval {t.sigma_interval} breaks the tiling")
        acc = b
    if trees and acc != 1:
        ok_tiling = False
        failures.append(f"intervals end at {acc}, not 1")
    checks["interval_tiling"] = ok_tiling

    ok_prefix = True
    ok_capacity = True
    for ci, nc in enumerate(dec.chain):
        crossing_counts = [sum(1 for e in t.edges if nc.cut.crosses(e))
                           for t in trees]
        once_weight = sum((t.weight for t, k in zip(trees, crossing_counts)
                           if k == 1), Fraction(0))
        if once_weight < nc.z:
            ok_capacity = False
            failures.append(
                f"cut {ci}: weight crossing once is {once_weight} < {nc.z}")
        acc = Fraction(0)
        boundary = None
        for j, t in enumerate(trees):
            acc += t.weight
            if acc == nc.z:
                boundary = j
                break
            if acc > nc.z:
                break
        if boundary is None:
            ok_prefix = False
            failures.append(f"cut {ci}: no prefix of weight exactly {nc.z}")
        else:
            bad = [j for j in range(boundary + 1) if crossing_counts[j] != 1]
            if bad:
                ok_prefix = False
                failures.append(
                    f"cut {ci}: trees {bad} in the prefix do not cross exactly once")
    checks["prefix_property"] = ok_prefix
    checks["once_crossing_capacity"] = ok_capacity

    passed = all(checks.values())
    return VerificationReport(passed, failures, checks)
