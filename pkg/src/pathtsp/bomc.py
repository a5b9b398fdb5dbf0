"""Per-tree tour construction and best-of-many selection.

For each tree of the structured decomposition: identify its lonely cuts
(cuts it crosses exactly once while the cumulative weight still lies
below 2 - x(C)), delete the lonely edges, correct parity on the resulting
forest with a minimum join under reconnection-aware costs, reconnect with
doubled lonely edges where needed, walk the Eulerian trail and shortcut.
The cheapest of the resulting tours is returned.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional

from .decomposition import StructuredDecomposition
from .errors import CheckFailed, InputError, InvariantViolation
from .graphs import eulerian_st_walk, min_spanning_connector, shortcut
from .model import (Edge, EdgeVector, MetricInstance, Multigraph, all_edges,
                    edge, validate_metric)
from .pathlp import FractionalSolution, NarrowCutChain, narrow_cuts, solve_path_lp
from .weightfn import RHO_STAR


@dataclass
class TreeContext:
    """Everything the parity-correction step needs about one tree."""
    index: int
    tree_edges: frozenset[Edge]
    weight: Fraction
    prefix_weight: Fraction           # cumulative weight through this tree
    lonely: dict[int, Edge]           # chain position -> its lonely edge
    forest: frozenset[Edge]           # tree minus lonely edges
    parity_set: frozenset[int]        # vertices whose forest degree parity is wrong
    modified_cost: dict[Edge, Fraction]
    solution: FractionalSolution
    chain: NarrowCutChain

    def lonely_positions(self) -> list[int]:
        return sorted(self.lonely)


@dataclass
class TreeTourResult:
    index: int
    join: frozenset[Edge]
    reconnect_edges: frozenset[Edge]
    tour: list[int]
    tour_cost: Fraction
    c_tree: Fraction
    c_forest: Fraction
    c_join: Fraction
    cj_join: Fraction          # join priced with the reconnection-aware costs
    c_reconnect: Fraction
    c_multigraph: Fraction


@dataclass
class BomcResult:
    instance: MetricInstance
    solution: FractionalSolution
    chain: NarrowCutChain
    decomposition: StructuredDecomposition
    tree_results: list[TreeTourResult]
    best_index: int
    best_tour: list[int]
    best_cost: Fraction
    ratio: Fraction            # best tour cost / relaxation value

    def ratio_within_proved_bound(self, tol: float = 1e-9) -> bool:
        return float(self.ratio) <= RHO_STAR * (1.0 + tol)


def build_tree_context(dec: StructuredDecomposition, chain: NarrowCutChain,
                       j: int) -> TreeContext:
    """Lonely cuts, forest, parity set, and modified costs for tree j.

    A chain cut is lonely in the tree when the tree crosses it exactly
    once and the cumulative weight through the tree is at most 2 - x(C)
    (exact comparison).  The modified cost of an edge adds twice the cost
    of the lonely edge of every lonely cut containing it, minus the
    largest such term: edges inside at most one lonely cut keep their
    plain cost.
    """
    inst = dec.solution.instance
    tree = dec.trees[j]
    cum = tree.sigma_interval[1]
    lonely: dict[int, Edge] = {}
    for ci, nc in enumerate(chain):
        crossing = [e for e in tree.edges if nc.cut.crosses(e)]
        if len(crossing) == 1 and cum <= nc.z:
            lonely[ci] = crossing[0]
    forest = frozenset(tree.edges - set(lonely.values()))
    deg: dict[int, int] = {}
    for (a, b) in forest:
        deg[a] = deg.get(a, 0) + 1
        deg[b] = deg.get(b, 0) + 1
    wrong = {v for v in inst.vertices() if deg.get(v, 0) % 2 == 1}
    parity_set = frozenset(wrong.symmetric_difference({inst.s, inst.t}))

    lonely_price = {ci: 2 * inst.edge_cost(e) for ci, e in lonely.items()}
    modified: dict[Edge, Fraction] = {}
    for e in all_edges(inst.n):
        extras = [lonely_price[ci] for ci in lonely if chain[ci].cut.crosses(e)]
        c = inst.edge_cost(e)
        modified[e] = c + sum(extras) - max(extras) if extras else c
    return TreeContext(
        index=j, tree_edges=tree.edges, weight=tree.weight, prefix_weight=cum,
        lonely=lonely, forest=forest, parity_set=parity_set,
        modified_cost=modified, solution=dec.solution, chain=chain)


def _shortest_path_closure(inst: MetricInstance, costs: Mapping[Edge, Fraction]):
    """All-pairs shortest path distances and next-hop under arbitrary costs.

    Floyd-Warshall with strict improvement only, so the reconstruction is
    deterministic.
    """
    n = inst.n
    dist: list[list[Optional[Fraction]]] = [[None] * n for _ in range(n)]
    nxt: list[list[Optional[int]]] = [[None] * n for _ in range(n)]
    for v in range(n):
        dist[v][v] = Fraction(0)
    for (a, b), c in costs.items():
        if dist[a][b] is None or c < dist[a][b]:
            dist[a][b] = dist[b][a] = c
            nxt[a][b] = b
            nxt[b][a] = a
    for k in range(n):
        for i in range(n):
            dik = dist[i][k]
            if dik is None:
                continue
            for j in range(n):
                dkj = dist[k][j]
                if dkj is None:
                    continue
                alt = dik + dkj
                if dist[i][j] is None or alt < dist[i][j]:
                    dist[i][j] = alt
                    nxt[i][j] = nxt[i][k]
    return dist, nxt


def _path_edges(u: int, v: int, nxt) -> list[Edge]:
    out = []
    a = u
    guard = 0
    while a != v:
        b = nxt[a][v]
        if b is None:
            raise InvariantViolation(f"no path between {u} and {v}")
        out.append(edge(a, b))
        a = b
        guard += 1
        if guard > len(nxt) + 1:
            raise InvariantViolation("path reconstruction cycled")
    return out


def _min_matching_dp(terms: list[int], dist) -> list[tuple[int, int]]:
    """Minimum-weight perfect matching by dynamic programming over subsets."""
    k = len(terms)
    full = (1 << k) - 1
    best: dict[int, Fraction] = {0: Fraction(0)}
    choice: dict[int, tuple[int, int]] = {}
    for mask in range(full + 1):
        if mask not in best:
            continue
        base = best[mask]
        i = 0
        while mask & (1 << i):
            i += 1
        if i >= k:
            continue
        for j in range(i + 1, k):
            if mask & (1 << j):
                continue
            d = dist[terms[i]][terms[j]]
            if d is None:
                continue
            nm = mask | (1 << i) | (1 << j)
            cand = base + d
            if nm not in best or cand < best[nm]:
                best[nm] = cand
                choice[nm] = (i, j)
    if full not in best:
        raise InvariantViolation("parity set cannot be matched")
    pairs = []
    mask = full
    while mask:
        i, j = choice[mask]
        pairs.append((terms[i], terms[j]))
        mask &= ~((1 << i) | (1 << j))
    pairs.reverse()
    return pairs


def min_tjoin(inst: MetricInstance, costs: Mapping[Edge, Fraction],
              T: frozenset[int] | set[int]) -> tuple[frozenset[Edge], Fraction]:
    """A minimum-cost edge set whose odd-degree vertices are exactly T.

    Shortest paths under the given nonnegative costs, minimum perfect
    matching of T in that metric (exact subset DP), then the symmetric
    difference of the matched paths.  The result's cost equals the
    matching value exactly.
    """
    T = frozenset(T)
    if len(T) % 2 == 1:
        raise InputError(f"parity set must have even size, got {len(T)}")
    for e, c in costs.items():
        if c < 0:
            raise InputError(f"negative cost on edge {e}")
    if not T:
        return frozenset(), Fraction(0)
    dist, nxt = _shortest_path_closure(inst, costs)
    terms = sorted(T)
    pairs = _min_matching_dp(terms, dist)
    join: set[Edge] = set()
    value = Fraction(0)
    for u, v in pairs:
        value += dist[u][v]
        join.symmetric_difference_update(_path_edges(u, v, nxt))
    deg: dict[int, int] = {}
    for (a, b) in join:
        deg[a] = deg.get(a, 0) + 1
        deg[b] = deg.get(b, 0) + 1
    odd = {v for v, d in deg.items() if d % 2 == 1}
    if odd != set(T):
        raise InvariantViolation("join parity does not match the requested set")
    cost = sum((costs[edge(*e)] for e in join), Fraction(0))
    if cost != value:
        raise InvariantViolation(
            f"join cost {cost} differs from the matching value {value}")
    return frozenset(join), cost


def reconnect(forest: frozenset[Edge], join: frozenset[Edge],
              lonely_candidates: list[tuple[Edge, Fraction]], n: int) -> frozenset[Edge]:
    """Cheapest lonely edges whose addition makes forest + join connected."""
    comps = Multigraph(n, set(forest) | set(join)).components()
    return frozenset(min_spanning_connector(comps, lonely_candidates))


def tour_from_tree(ctx: TreeContext, inst: MetricInstance) -> TreeTourResult:
    """Parity-correct, reconnect, walk, and shortcut one tree into a tour.

    The accounting inequality c(J) + 2 c(R) <= modified-cost(J) is
    asserted: reconnection is always paid for by the modified costs.
    """
    join, cj_cost = min_tjoin(inst, ctx.modified_cost, ctx.parity_set)
    lonely_candidates = sorted(
        {(e, inst.edge_cost(e)) for e in ctx.lonely.values()})
    reconnect_edges = reconnect(ctx.forest, join, lonely_candidates, inst.n)
    c_join = sum((inst.edge_cost(e) for e in join), Fraction(0))
    c_reconnect = sum((inst.edge_cost(e) for e in reconnect_edges), Fraction(0))
    if c_join + 2 * c_reconnect > cj_cost:
        raise InvariantViolation(
            "reconnection exceeded the modified-cost budget: "
            f"{c_join} + 2*{c_reconnect} > {cj_cost}")

    multi = Multigraph(inst.n)
    for e in ctx.forest:
        multi.add(e)
    for e in join:
        multi.add(e)
    for e in reconnect_edges:
        multi.add(e, 2)
    walk = eulerian_st_walk(multi, inst.s, inst.t)
    tour, tour_cost = shortcut(walk, inst)
    c_multi = multi.total_cost(inst)
    if tour_cost > c_multi:
        raise InvariantViolation("shortcut tour costs more than the walk")

    c_tree = sum((inst.edge_cost(e) for e in ctx.tree_edges), Fraction(0))
    c_forest = sum((inst.edge_cost(e) for e in ctx.forest), Fraction(0))
    return TreeTourResult(
        index=ctx.index, join=join, reconnect_edges=reconnect_edges,
        tour=tour, tour_cost=tour_cost, c_tree=c_tree, c_forest=c_forest,
        c_join=c_join, cj_join=cj_cost, c_reconnect=c_reconnect,
        c_multigraph=c_multi)


def run_pipeline(inst: MetricInstance) -> BomcResult:
    """Relaxation, chain, structured decomposition, all tours, best pick."""
    problems = validate_metric(inst)
    if problems:
        raise InputError("instance is not a metric: " + "; ".join(problems[:3]))
    from .decomposition import base_decomposition, structured_decomposition
    xsol = solve_path_lp(inst)
    chain = narrow_cuts(xsol)
    base = base_decomposition(xsol)
    dec = structured_decomposition(base, chain, xsol)
    results = []
    for j in range(len(dec.trees)):
        ctx = build_tree_context(dec, chain, j)
        results.append(tour_from_tree(ctx, inst))
    best = min(results, key=lambda r: (r.tour_cost, r.index))
    ratio = best.tour_cost / xsol.value
    return BomcResult(
        instance=inst, solution=xsol, chain=chain, decomposition=dec,
        tree_results=results, best_index=best.index, best_tour=best.tour,
        best_cost=best.tour_cost, ratio=ratio)


def best_of_many(inst: MetricInstance, strict: bool = True) -> BomcResult:
    """The cheapest tour over all trees of a structured decomposition.

    With strict=True the proved ratio bound is asserted on the result and
    a violation raises CheckFailed.
    """
    result = run_pipeline(inst)
    if strict and not result.ratio_within_proved_bound():
        raise CheckFailed(
            f"tour/relaxation ratio {float(result.ratio):.9f} exceeds the "
            f"proved bound {RHO_STAR:.9f}")
    return result
