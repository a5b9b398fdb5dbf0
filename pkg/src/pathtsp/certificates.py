"""Instance-level certification of the averaged tour analysis.

Every analytic step the proved ratio rests on is re-checked numerically on
the instance at hand: cut-repair vectors built from lonely edges, parity
correction vectors and their membership in the join polyhedron, the
per-tree tour bound, the modified-cost inequality, the nonpositivity of
the aggregated lonely-edge balance, and finally the weighted-average tour
bound rho(h) * c(x).

Rational weight functions certify exactly; the closed-form default runs
in double precision against explicit tolerances (1e-9 comparisons, 1e-6
for the aggregate).  Membership is verified at sampled positions within
each tree interval (endpoints and midpoint); the bound itself is computed
by exact or closed-form integration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Union

import numpy as np

from .bomc import BomcResult, TreeContext, TreeTourResult, build_tree_context
from .decomposition import StructuredDecomposition
from .errors import InputError, InvariantViolation, ResourceLimit
from .model import Cut, Edge, EdgeVector, MetricInstance, cut_value, edge
from .pathlp import NarrowCutChain
from .weightfn import Number, WeightFunction, performance_ratio

TOL_COMPARE = 1e-9
TOL_NORMALIZATION = 1e-12
TOL_AGGREGATE = 1e-6
ENUMERATION_LIMIT = 16


@dataclass
class AnalysisParams:
    """Per-tree averaging weights and the ratio they certify."""
    density: Number                  # 1 + integral of h
    rho: Number                      # 1 + 1/density
    mass_factor: Number              # relates averaging weights to tree weights
    tree_weights: list[Number]       # q_j, summing to 1

    @staticmethod
    def from_decomposition(dec: StructuredDecomposition,
                           h: WeightFunction) -> "AnalysisParams":
        density = 1 + h.integral_total
        rho = performance_ratio(h)
        mass_factor = 2 / density
        q = [h.one_plus_integral(t.sigma_interval[0], t.sigma_interval[1]) / density
             for t in dec.trees]
        return AnalysisParams(density, rho, mass_factor, q)


def build_repair_vector(dec: StructuredDecomposition, chain: NarrowCutChain,
                        position: int, h: WeightFunction) -> EdgeVector:
    """The normalized lonely-edge vector repairing one narrow cut.

    Trees up to the cut's prefix boundary each cross the cut in a single
    (lonely) edge; those edges are weighted by the integral of
    (1 - h + z h) over the tree's interval and normalized so the vector
    has value exactly 1 on the cut.
    """
    nc = chain[position]
    z = nc.z
    if z <= 0:
        raise InputError(f"cut at position {position} is not narrow (z={z})")
    weights: dict[Edge, Number] = {}
    total: Number = 0
    for t in dec.trees:
        a, b = t.sigma_interval
        if a >= z:
            break
        if b > z:
            raise InvariantViolation(
                f"tree interval [{a},{b}) straddles the boundary z={z}")
        crossing = [e for e in t.edges if nc.cut.crosses(e)]
        if len(crossing) != 1:
            raise InvariantViolation(
                f"tree at [{a},{b}) crosses the narrow cut {len(crossing)} times")
        w = h.correction_integral(a, b, z)
        e = crossing[0]
        weights[e] = weights.get(e, 0) + w
        total = total + w if total else w
    if not weights:
        raise InvariantViolation("no trees below the prefix boundary")
    vec = EdgeVector({e: w / total for e, w in weights.items()})
    on_cut = vec.value_on(nc.cut.edges())
    if abs(float(on_cut) - 1.0) > TOL_NORMALIZATION:
        raise InvariantViolation(f"repair vector normalizes to {on_cut}, not 1")
    return vec


def build_parity_vector(ctx: TreeContext, beta: Number,
                        repair: Mapping[int, EdgeVector]) -> EdgeVector:
    """The parity correction vector for one tree at a given beta.

    beta * x + (1-2*beta) * tree + lonely-edge boosts on the tree's own
    lonely cuts + repair vectors (scaled by the shortfall) on the other
    narrow cuts.  Nonnegative by construction.
    """
    if not (0 <= beta <= Fraction(1, 2)):
        raise InputError(f"beta {beta} outside [0, 1/2]")
    alpha = 1 - 2 * beta
    terms: list[tuple[Number, EdgeVector]] = [
        (beta, ctx.solution.x),
        (alpha, EdgeVector.indicator(ctx.tree_edges)),
    ]
    for ci, nc in enumerate(ctx.chain):
        if ci in ctx.lonely:
            terms.append((beta * nc.z, EdgeVector.indicator([ctx.lonely[ci]])))
        else:
            shortfall = beta * nc.z - alpha
            if shortfall > 0:
                if ci not in repair:
                    raise InputError(
                        f"repair vector for narrow cut {ci} is required but missing")
                terms.append((shortfall, repair[ci]))
    y = EdgeVector.combine(terms)
    if any(v < 0 for _, v in y.items()):
        raise InvariantViolation("parity correction vector has a negative entry")
    return y


@dataclass
class PolyhedronCheck:
    ok: bool
    min_value: Optional[Number]
    witness: Optional[frozenset[int]]


def check_tjoin_polyhedron(y: EdgeVector, T: frozenset[int] | set[int],
                           inst: MetricInstance,
                           tol: float = TOL_COMPARE) -> PolyhedronCheck:
    """Is y(delta(U)) >= 1 - tol on every cut with |U and T| odd?

    Exhaustive enumeration with s fixed inside U (each cut is counted
    once).  A vectorized float scan locates candidates; every cut near or
    below the threshold is re-evaluated with the original entries before
    the verdict.
    """
    n = inst.n
    if n > ENUMERATION_LIMIT:
        raise ResourceLimit(
            f"cut enumeration is limited to n <= {ENUMERATION_LIMIT}, got {n}")
    T = frozenset(T)
    if len(T) % 2 == 1:
        raise InputError("parity set must have even size")
    if not T:
        return PolyhedronCheck(True, None, None)
    s = inst.s
    others = [v for v in range(n) if v != s]
    count = 1 << len(others)
    idx = np.arange(count, dtype=np.uint32)
    member = {v: ((idx >> bit) & 1).astype(bool) for bit, v in enumerate(others)}
    member[s] = np.ones(count, dtype=bool)
    vals = np.zeros(count, dtype=np.float64)
    for (u, v), w in y.items():
        vals += float(w) * (member[u] ^ member[v])
    parity = np.zeros(count, dtype=bool)
    for tv in T:
        parity ^= member[tv]
    odd_positions = np.nonzero(parity)[0]
    if odd_positions.size == 0:
        raise InvariantViolation("a nonempty even parity set must have odd cuts")

    def side_of(pos: int) -> frozenset[int]:
        side = {s}
        for bit, v in enumerate(others):
            if (pos >> bit) & 1:
                side.add(v)
        return frozenset(side)

    def exact_value(side: frozenset[int]) -> Number:
        return sum(w for (u, v), w in y.items() if (u in side) != (v in side))

    odd_vals = vals[parity]
    argmin_pos = int(odd_positions[int(np.argmin(odd_vals))])
    suspects = [int(p) for p in odd_positions[vals[parity] < (1 - tol) + 1e-7]]
    min_side = side_of(argmin_pos)
    min_val = exact_value(min_side)
    ok = True
    for pos in suspects:
        side = side_of(pos)
        val = exact_value(side)
        if val < min_val:
            min_val, min_side = val, side
        if float(val) < 1 - tol:
            ok = False
    return PolyhedronCheck(ok, min_val, min_side)


@dataclass
class TreeBoundCheck:
    bound: Number
    forest_plus_join: Fraction
    tour_cost: Fraction
    join_ok: bool
    tour_ok: bool


def per_tree_bound(ctx: TreeContext, tour: TreeTourResult, beta: Number,
                   repair: Mapping[int, EdgeVector],
                   tol: float = TOL_COMPARE) -> TreeBoundCheck:
    """The closed-form upper bound on one tree's tour cost, and its checks.

    (1+alpha) c(tree) + beta c(x) - sum over lonely cuts of
    (alpha + beta z) c(lonely edge) + sum over other narrow cuts of
    max(0, beta z - alpha) c(repair vector); both the forest-plus-join
    cost and the final tour cost must stay below it.
    """
    inst = ctx.solution.instance
    alpha = 1 - 2 * beta
    c_tree = sum((inst.edge_cost(e) for e in ctx.tree_edges), Fraction(0))
    bound = (1 + alpha) * c_tree + beta * ctx.solution.value
    for ci, nc in enumerate(ctx.chain):
        if ci in ctx.lonely:
            bound -= (alpha + beta * nc.z) * inst.edge_cost(ctx.lonely[ci])
        else:
            shortfall = beta * nc.z - alpha
            if shortfall > 0:
                bound += shortfall * repair[ci].cost_with(inst)
    lhs = tour.c_forest + tour.cj_join
    join_ok = float(lhs) <= float(bound) + tol
    tour_ok = float(tour.tour_cost) <= float(bound) + tol
    return TreeBoundCheck(bound, lhs, tour.tour_cost, join_ok, tour_ok)


def check_modified_cost_bound(ctx: TreeContext) -> tuple[bool, Fraction, Fraction]:
    """Exact check: modified cost of x is at most c(x) plus the lonely slack.

    The slack term is the sum over lonely cuts of 2 (x(C) - 1) times the
    lonely edge's cost.
    """
    x = ctx.solution.x
    lhs = sum((ctx.modified_cost[e] * v for e, v in x.items()), Fraction(0))
    rhs = ctx.solution.value
    for ci, e in ctx.lonely.items():
        nc = ctx.chain[ci]
        rhs += 2 * (nc.value - 1) * ctx.solution.instance.edge_cost(e)
    return lhs <= rhs, lhs, rhs


def repair_budget_surplus(dec: StructuredDecomposition, chain: NarrowCutChain,
                          h: WeightFunction) -> Number:
    """The aggregated lonely-edge balance; nonpositive for feasible h.

    Per narrow cut: minus the integrated savings from deleted lonely
    edges, plus the repair vector's cost times the integrated repair
    demand.  Requires h to satisfy the feasibility condition at each
    cut's z (checked; violations raise).
    """
    inst = dec.solution.instance
    total: Number = 0
    for ci, nc in enumerate(chain):
        z = nc.z
        residual = h.condition_residual(z)
        if float(residual) > TOL_NORMALIZATION:
            raise InputError(
                f"weight function violates the feasibility condition at z={z}: "
                f"{float(residual):.3e}")
        vec = build_repair_vector(dec, chain, ci, h)
        savings: Number = 0
        for t in dec.trees:
            a, b = t.sigma_interval
            if a >= z:
                break
            crossing = [e for e in t.edges if nc.cut.crosses(e)]
            w = h.correction_integral(a, b, z)
            savings = savings + w * inst.edge_cost(crossing[0])
        total = total - savings + vec.cost_with(inst) * h.surplus_integral(z)
    return total


@dataclass
class CertificateReport:
    """All per-tree and aggregate verdicts for one instance and weight function."""
    h: WeightFunction
    params: AnalysisParams
    rho: Number
    lp_value: Fraction
    best_cost: Fraction
    weighted_tour_cost: Number
    vanish_value: Number
    membership_mode: str = "sampled"
    per_tree: list[dict] = field(default_factory=list)
    constant_shape: Optional[dict] = None
    verdicts: dict = field(default_factory=dict)
    passed: bool = False

    def to_dict(self) -> dict:
        return {
            "h": self.h.describe(),
            "rho": self.rho,
            "density": self.params.density,
            "mass_factor": self.params.mass_factor,
            "tree_weights": list(self.params.tree_weights),
            "lp_value": self.lp_value,
            "best_cost": self.best_cost,
            "weighted_tour_cost": self.weighted_tour_cost,
            "vanish_value": self.vanish_value,
            "membership_mode": self.membership_mode,
            "per_tree": self.per_tree,
            "constant_shape": self.constant_shape,
            "verdicts": dict(self.verdicts),
            "passed": self.passed,
        }


def _sample_positions(interval: tuple[Fraction, Fraction]):
    a, b = interval
    return [(a, "right"), ((a + b) / 2, "right"), (b, "left")]


def aggregate_certificate(bomc: BomcResult, h: WeightFunction,
                          tol: float = TOL_COMPARE,
                          tol_aggregate: float = TOL_AGGREGATE) -> CertificateReport:
    """Run the full per-tree and aggregate certificate battery.

    Membership and the per-tree bound are verified at each tree interval's
    endpoints and midpoint; the weighted-average and best-tour bounds use
    rho(h); the lonely-edge balance must be nonpositive.  All verdicts are
    collected rather than raised.
    """
    dec = bomc.decomposition
    chain = bomc.chain
    inst = bomc.instance
    params = AnalysisParams.from_decomposition(dec, h)
    rho = params.rho
    repair = {ci: build_repair_vector(dec, chain, ci, h)
              for ci in range(len(chain))}

    verdicts = {}
    per_tree = []
    membership_all = True
    bounds_all = True
    nonneg_all = True
    weak_duality_all = True
    cj_all = True
    for j, tree in enumerate(dec.trees):
        ctx = build_tree_context(dec, chain, j)
        tour = bomc.tree_results[j]
        cj_ok, cj_lhs, cj_rhs = check_modified_cost_bound(ctx)
        cj_all &= cj_ok
        row = {"tree": j, "modified_cost_ok": cj_ok, "samples": []}
        for sigma, side in _sample_positions(tree.sigma_interval):
            beta = h.beta(sigma, side)
            y = build_parity_vector(ctx, beta, repair)
            nonneg_all &= all(v >= 0 for _, v in y.items())
            membership = check_tjoin_polyhedron(y, ctx.parity_set, inst, tol)
            membership_all &= membership.ok
            bound = per_tree_bound(ctx, tour, beta, repair, tol)
            bounds_all &= bound.join_ok and bound.tour_ok
            cj_y = sum(ctx.modified_cost[e] * v for e, v in y.items())
            weak = float(tour.cj_join) <= float(cj_y) + tol
            weak_duality_all &= weak
            row["samples"].append({
                "sigma": sigma,
                "beta": beta,
                "membership_ok": membership.ok,
                "membership_min": membership.min_value,
                "bound": bound.bound,
                "forest_plus_join": bound.forest_plus_join,
                "tour_cost": bound.tour_cost,
                "bound_ok": bound.join_ok and bound.tour_ok,
                "weak_duality_ok": weak,
            })
        per_tree.append(row)

    vanish = repair_budget_surplus(dec, chain, h)
    verdicts["vanish_nonpositive"] = float(vanish) <= tol
    verdicts["membership"] = membership_all
    verdicts["per_tree_bounds"] = bounds_all
    verdicts["parity_vectors_nonnegative"] = nonneg_all
    verdicts["join_weak_duality"] = weak_duality_all
    verdicts["modified_cost_bound"] = cj_all

    weighted = sum(q * float(r.tour_cost)
                   for q, r in zip(params.tree_weights, bomc.tree_results)) \
        if not h.is_rational else \
        sum((q * r.tour_cost for q, r in zip(params.tree_weights, bomc.tree_results)),
            Fraction(0))
    rhs = rho * bomc.solution.value if h.is_rational else float(rho) * float(bomc.solution.value)
    verdicts["weighted_average_bound"] = float(weighted) <= float(rhs) + tol_aggregate
    verdicts["best_tour_bound"] = float(bomc.best_cost) <= float(rhs) + tol

    constant_shape = None
    if h.is_constant:
        beta = h.beta(Fraction(0))
        constant_shape = {
            "beta": beta,
            "two_minus_beta": 2 - beta,
            "rho": rho,
            "matches": 2 - beta == rho,
        }
        verdicts["constant_shape"] = constant_shape["matches"]

    report = CertificateReport(
        h=h, params=params, rho=rho, lp_value=bomc.solution.value,
        best_cost=bomc.best_cost, weighted_tour_cost=weighted,
        vanish_value=vanish, per_tree=per_tree,
        constant_shape=constant_shape, verdicts=verdicts)
    report.passed = all(verdicts.values())
    return report
