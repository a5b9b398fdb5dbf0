"""Optimizing the weight function by exact linear programming.

The feasibility condition constrains h through, for every z in [0,1],

    integral_z^1 max(0, (1+z) h - 1) + integral_0^z (h - 1 - z h)  <=  0.

For piecewise-constant h on m uniform buckets and a fixed z this is a
maximum of linear forms in the bucket values, so the condition at a grid
of z values is an LP.  Rather than materializing one auxiliary variable
per (z, bucket) pair, violated linearizations are generated lazily: the
active-set row at the current iterate is exactly the condition residual,
so separation is a plain exact evaluation.  The optimum over the z-grid
is a relaxation of the full condition ("grid-certified"); a post-pass
computes the exact global residual maximum over all z and, if positive,
scales h down minimally so the condition holds everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import InputError, InvariantViolation
from .lp import LPModel, lp_solve
from .weightfn import (Number, WeightFunction, max_condition_residual,
                       performance_ratio)


def condition_residual(h: WeightFunction, z) -> Number:
    """Left side of the feasibility condition at z (nonpositive = feasible)."""
    return h.condition_residual(z)


def check_default_weight_inequalities(grid: int = 10_000,
                                      tol: float = 1e-12) -> dict:
    """Verify the closed-form inequality chain behind the default function.

    On a uniform z-grid: the combined condition expression
    f(z) = (1+z) ln((4z+4)/(z+4)) + (1-z) ln((z+4)/4) - z stays
    nonpositive, its logarithmic derivative stays below the algebraic
    bound -3 z^2 / (z+4)^2 (the ln x <= x - 1 step), and that bound is
    itself nonpositive.
    """
    if grid < 2:
        raise InputError("grid needs at least two points")
    max_f = None
    max_bound = None
    max_gap = None
    for i in range(grid):
        z = i / (grid - 1)
        f = ((1 + z) * math.log((4 * z + 4) / (z + 4))
             + (1 - z) * math.log((z + 4) / 4) - z)
        deriv = math.log(16 * (z + 1) / (z + 4) ** 2) - 2 * z / (z + 4)
        bound = -3 * z * z / (z + 4) ** 2
        gap = deriv - bound
        max_f = f if max_f is None or f > max_f else max_f
        max_bound = bound if max_bound is None or bound > max_bound else max_bound
        max_gap = gap if max_gap is None or gap > max_gap else max_gap
    value_at_0 = 0.0
    value_at_1 = 2 * math.log(8 / 5) - 1
    return {
        "ok": max_f <= tol and max_bound <= tol and max_gap <= tol,
        "max_function": max_f,
        "max_derivative_bound": max_bound,
        "max_ln_step_gap": max_gap,
        "value_at_0": value_at_0,
        "value_at_1": value_at_1,
        "grid": grid,
    }


@dataclass
class OptimizedWeight:
    h: WeightFunction
    rho: Fraction
    grid_rho: Fraction
    scale: Fraction
    max_residual: Fraction
    max_residual_argz: Fraction
    fine_grid_max_residual: Fraction
    meta: dict = field(default_factory=dict)


def _linearization_row(values_len: int, m: int, z: Fraction,
                       active: frozenset[int]):
    """Coefficients and rhs of the condition linearized at an active set."""
    coeffs: dict[int, Fraction] = {}
    rhs = z
    for i in range(values_len):
        lo = Fraction(i, m)
        hi = Fraction(i + 1, m)
        len_first = min(Fraction(1), hi) - max(z, lo)
        if i in active and len_first > 0:
            coeffs[i] = coeffs.get(i, Fraction(0)) + (1 + z) * len_first
            rhs += len_first
        len_second = min(z, hi) - max(Fraction(0), lo)
        if len_second > 0:
            coeffs[i] = coeffs.get(i, Fraction(0)) + (1 - z) * len_second
    return coeffs, rhs


def _active_set(m: int, z: Fraction, values) -> frozenset[int]:
    return frozenset(i for i in range(m)
                     if Fraction(i + 1, m) > z and values[i] * (1 + z) > 1)


def _violations(m: int, grid, values) -> list[tuple[Fraction, Fraction, frozenset[int]]]:
    h = WeightFunction.piecewise(values)
    out = []
    for z in grid:
        if z == 0 or z == 1:
            continue
        r = h.condition_residual(z)
        if r > 0:
            out.append((r, z, _active_set(m, z, values)))
    out.sort(key=lambda item: (-item[0], item[1]))
    return out


def optimize_weight(buckets: int, zgrid: int, add_per_round: int = 40,
                    max_rounds: int = 2000,
                    seed_rows: list[tuple[Fraction, frozenset[int]]] | None = None,
                    ) -> OptimizedWeight:
    """Maximize the mean of h over feasible piecewise-constant functions.

    Grid z values are all multiples of 1/zgrid plus all bucket
    boundaries.  Linearizations are generated lazily with in-out
    stabilization: cuts are separated both at the LP optimum and at a
    point pulled toward a feasible incumbent, which avoids the stalling
    of plain cutting planes on degenerate vertices.  Long-slack rows are
    pruned.  Termination is exact: the final LP optimum satisfies the
    condition at every grid point, so it is the true optimum of the
    grid-relaxed problem.  The returned function is then post-certified
    for all z (exact residual maximization over each quadratic piece) and
    scaled down by the smallest power-of-ten nudge if anything between
    grid points pokes above zero.
    """
    if buckets < 1 or zgrid < 1:
        raise InputError("buckets and zgrid must be positive")
    m = buckets
    grid = sorted({Fraction(j, zgrid) for j in range(zgrid + 1)}
                  | {Fraction(i, m) for i in range(m + 1)})

    # working set of linearization rows, keyed by (z, active set)
    working: dict[tuple[Fraction, frozenset[int]], int] = {}  # -> slack age
    recent: dict[tuple[Fraction, frozenset[int]], int] = {}

    def add_row(key, rnd) -> bool:
        if key in working:
            return False
        working[key] = 0
        recent[key] = rnd
        return True

    # seed: predicted active sets from the closed-form default function,
    # whose optimum the LP optimum resembles (decreasing from 1 toward 3/4)
    if seed_rows is None:
        seed_rows = []
        for z in grid:
            if z == 0 or z == 1:
                continue
            active = frozenset(
                i for i in range(m)
                if Fraction(i + 1, m) > z and Fraction(2 * i + 1, 2 * m) < 4 * z)
            seed_rows.append((z, active))
    for z, active in seed_rows:
        if 0 < z < 1 and z in grid:
            add_row((z, frozenset(active)), 0)

    incumbent = [Fraction(8, 9)] * m  # constant feasible point
    rounds = 0
    pivots = 0
    while True:
        rounds += 1
        if rounds > max_rounds:
            raise InvariantViolation("separation failed to converge")
        keys = sorted(working, key=lambda item: (item[0], sorted(item[1])))
        model = LPModel("max")
        for _ in range(m):
            model.add_variable(lo=0, hi=1, obj=Fraction(1, m))
        for key in keys:
            coeffs, rhs = _linearization_row(m, m, key[0], key[1])
            model.add_row(coeffs, "<=", rhs)
        out = lp_solve(model)
        pivots += out.pivots
        if out.status != "optimal":
            raise InvariantViolation(f"weight LP came back {out.status}")
        optimum = out.primal

        viol_g = _violations(m, grid, optimum)
        if not viol_g:
            break

        # age out rows that have been slack for two consecutive solves
        for key, row_idx in zip(keys, range(len(keys))):
            coeffs, rhs = _linearization_row(m, m, key[0], key[1])
            activity = sum(optimum[j] * a for j, a in coeffs.items())
            working[key] = 0 if activity == rhs else working[key] + 1
        for key in list(working):
            if working[key] >= 2 and rounds - recent.get(key, 0) >= 2:
                del working[key]
                recent.pop(key, None)

        new = 0
        for r, z, active in viol_g[:add_per_round]:
            new += add_row((z, active), rounds)
        # in-out: pull toward the incumbent and cut there too (deeper cuts)
        pulled = [(f + g) / 2 for f, g in zip(incumbent, optimum)]
        viol_p = _violations(m, grid, pulled)
        if viol_p:
            for r, z, active in viol_p[:add_per_round]:
                new += add_row((z, active), rounds)
        else:
            incumbent = pulled
        if new == 0:
            raise InvariantViolation(
                "violated grid points but no new linearization rows")

    h_cur = WeightFunction.piecewise(optimum)
    grid_integral = out.objective
    grid_rho = 1 + Fraction(1) / (1 + grid_integral)

    # certify the condition for every z, not just the grid
    scale = Fraction(1)
    h_final = h_cur
    max_res, argz = max_condition_residual(h_final)
    if max_res > 0:
        for j in range(12, 0, -1):
            gamma = 1 - Fraction(1, 10 ** j)
            candidate = WeightFunction.piecewise([gamma * v for v in optimum])
            res, rz = max_condition_residual(candidate)
            if res <= 0:
                scale = gamma
                h_final = candidate
                max_res, argz = res, rz
                break
        else:
            raise InvariantViolation(
                "could not certify feasibility by scaling "
                f"(residual {float(max_res):.3e})")

    fine = max(h_final.condition_residual(Fraction(j, 10 * zgrid))
               for j in range(10 * zgrid + 1))
    rho = performance_ratio(h_final)
    return OptimizedWeight(
        h=h_final, rho=rho, grid_rho=grid_rho, scale=scale,
        max_residual=max_res, max_residual_argz=argz,
        fine_grid_max_residual=fine,
        meta={
            "buckets": m,
            "zgrid": zgrid,
            "rounds": rounds,
            "rows": len(model.rows),
            "lp_pivots": pivots,
            "grid_certified": True,
            "carry_rows": sorted(working, key=lambda item: (item[0], sorted(item[1]))),
        })
