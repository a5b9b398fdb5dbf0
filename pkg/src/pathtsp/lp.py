"""Exact rational linear programming kernel.

A dense bounded-variable two-phase simplex over exact rationals.  Dantzig
pricing with deterministic tie-breaks runs first; after a fixed pivot
budget the solver falls back to Bland's rule, which guarantees
termination.  Everything is deterministic for a fixed model: variable
order is declaration order, entering ties break on the smallest column,
ratio ties on the smallest row.

Internally gmpy2.mpq is used when available (an order of magnitude faster
than Fraction); the public interface speaks Fraction only, and results are
identical either way.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional

from .errors import InputError, InvariantViolation

try:
    from gmpy2 import mpq as _Q
except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
    _Q = Fraction

_Q0 = _Q(0)
_Q1 = _Q(1)


def _q(x):
    if isinstance(x, int):
        return _Q(x)
    return _Q(x.numerator, x.denominator)


def _frac(x) -> Fraction:
    return Fraction(int(x.numerator), int(x.denominator))


@dataclass
class _Var:
    lo: Optional[Fraction]  # None = -inf
    hi: Optional[Fraction]  # None = +inf
    obj: Fraction


@dataclass
class _Row:
    coeffs: dict[int, Fraction]
    rel: str  # "<=", "==", ">="
    rhs: Fraction


class LPModel:
    """A linear program: bounded variables, linear rows, min or max objective."""

    def __init__(self, direction: str = "min"):
        if direction not in ("min", "max"):
            raise InputError(f"direction must be 'min' or 'max', got {direction!r}")
        self.direction = direction
        self.vars: list[_Var] = []
        self.rows: list[_Row] = []

    def add_variable(self, lo=0, hi=None, obj=0) -> int:
        lo = None if lo is None else Fraction(lo)
        hi = None if hi is None else Fraction(hi)
        if lo is not None and hi is not None and lo > hi:
            raise InputError(f"inconsistent bounds lo={lo} > hi={hi}")
        self.vars.append(_Var(lo, hi, Fraction(obj)))
        return len(self.vars) - 1

    def add_row(self, coeffs: Mapping[int, Fraction] | Iterable[tuple[int, Fraction]],
                rel: str, rhs) -> int:
        if rel not in ("<=", "==", ">="):
            raise InputError(f"unknown relation {rel!r}")
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        cleaned: dict[int, Fraction] = {}
        for j, a in items:
            if not (0 <= j < len(self.vars)):
                raise InputError(f"row references undeclared variable {j}")
            a = Fraction(a)
            if a != 0:
                cleaned[j] = cleaned.get(j, Fraction(0)) + a
        self.rows.append(_Row(cleaned, rel, Fraction(rhs)))
        return len(self.rows) - 1


@dataclass
class LPOutcome:
    """Solve result; at optimality primal and duals satisfy strong duality exactly."""
    status: str  # "optimal" | "infeasible" | "unbounded"
    objective: Optional[Fraction] = None
    primal: Optional[list[Fraction]] = None
    duals: Optional[list[Fraction]] = None
    reduced_costs: Optional[list[Fraction]] = None
    dual_objective: Optional[Fraction] = None
    pivots: int = 0


# Column kinds in the internal tableau.
_STRUCT, _SLACK, _ART = 0, 1, 2
_HARD_PIVOT_CAP = 2_000_000


class _Simplex:
    """Bounded-variable simplex on the transformed model (min form, columns >= 0)."""

    def __init__(self, model: LPModel):
        self.model = model
        self.sense = 1 if model.direction == "min" else -1
        self.pivots = 0
        self._build()

    def _build(self) -> None:
        m = self.model
        # Structural columns: x = shift + sum(sign * u) with u >= 0.  A finite
        # width (hi - lo) becomes a column upper bound; free variables split.
        self.cols: list[tuple[int, int, int]] = []  # (kind, ref, sign)
        self.col_shift: list = []
        self.ub: list = []
        self.var_cols: list[list[int]] = []
        obj: list = []

        def new_col(kind, ref, sign, shift, width, cost):
            self.cols.append((kind, ref, sign))
            self.col_shift.append(shift)
            self.ub.append(width)
            obj.append(cost)
            return len(self.cols) - 1

        for vj, v in enumerate(m.vars):
            c = _q(v.obj) * self.sense
            if v.lo is not None:
                width = None if v.hi is None else _q(v.hi - v.lo)
                cols = [new_col(_STRUCT, vj, 1, _q(v.lo), width, c)]
            elif v.hi is not None:
                cols = [new_col(_STRUCT, vj, -1, _q(v.hi), None, -c)]
            else:
                cols = [new_col(_STRUCT, vj, 1, _Q0, None, c),
                        new_col(_STRUCT, vj, -1, _Q0, None, -c)]
            self.var_cols.append(cols)

        nstruct = len(self.cols)
        nrows = len(m.rows)
        A = [[_Q0] * nstruct for _ in range(nrows)]
        b = [_Q0] * nrows
        self.row_factor = [1] * nrows  # user dual = factor * internal dual (for min)
        rels = []
        for i, row in enumerate(m.rows):
            rhs = _q(row.rhs)
            for vj, a in row.coeffs.items():
                aq = _q(a)
                for cj in self.var_cols[vj]:
                    A[i][cj] += aq * self.cols[cj][2]
                rhs -= aq * self.col_shift[self.var_cols[vj][0]]
            if row.rel == ">=":
                A[i] = [-x for x in A[i]]
                rhs = -rhs
                self.row_factor[i] = -1
                rels.append("<=")
            else:
                rels.append(row.rel)
            b[i] = rhs

        self.slack_col = [-1] * nrows
        self.art_col = [-1] * nrows
        basis = [-1] * nrows
        for i in range(nrows):
            if rels[i] == "<=" and b[i] >= 0:
                j = new_col(_SLACK, i, 1, _Q0, None, _Q0)
                for r in range(nrows):
                    A[r].append(_Q1 if r == i else _Q0)
                self.slack_col[i] = j
                basis[i] = j
            else:
                if rels[i] == "<=":
                    # negative rhs: negate, slack gets coefficient -1
                    A[i] = [-x for x in A[i]]
                    b[i] = -b[i]
                    self.row_factor[i] = -self.row_factor[i]
                    j = new_col(_SLACK, i, -1, _Q0, None, _Q0)
                    for r in range(nrows):
                        A[r].append(-_Q1 if r == i else _Q0)
                    self.slack_col[i] = j
                elif b[i] < 0:
                    A[i] = [-x for x in A[i]]
                    b[i] = -b[i]
                    self.row_factor[i] = -self.row_factor[i]
        for i in range(nrows):
            if basis[i] == -1:
                j = new_col(_ART, i, 1, _Q0, None, _Q0)
                for r in range(nrows):
                    A[r].append(_Q1 if r == i else _Q0)
                self.art_col[i] = j
                basis[i] = j

        self.A = A
        self.b = b
        self.obj = obj
        self.basis = basis
        self.xB = list(b)
        self.state = ["lo"] * len(self.cols)  # "lo" | "hi" | "basic"
        for j in basis:
            self.state[j] = "basic"
        self.nrows = nrows
        self.has_art = any(c >= 0 for c in self.art_col)

    # -- tableau mechanics -----------------------------------------------

    def _reduced_costs(self, cost: list) -> list:
        red = list(cost)
        for i, bj in enumerate(self.basis):
            cb = cost[bj]
            if cb != 0:
                row = self.A[i]
                for j in range(len(red)):
                    if row[j]:
                        red[j] -= cb * row[j]
        return red

    def _objective_value(self, cost: list):
        val = _Q0
        for i, bj in enumerate(self.basis):
            if cost[bj] != 0:
                val += cost[bj] * self.xB[i]
        for j, st in enumerate(self.state):
            if st == "hi" and cost[j] != 0:
                val += cost[j] * self.ub[j]
        return val

    def _optimize(self, cost: list, barred: set[int], dantzig_budget: int) -> str:
        """Minimize cost from the current basis; returns 'optimal' or 'unbounded'."""
        red = self._reduced_costs(cost)
        ncols = len(self.cols)
        local = 0
        bland = False
        while True:
            enter = -1
            best = _Q0
            for j in range(ncols):
                if self.state[j] == "basic" or j in barred:
                    continue
                if self.ub[j] is not None and self.ub[j] == 0:
                    continue  # fixed variable, entering cannot change anything
                r = red[j]
                if self.state[j] == "lo":
                    if r >= 0:
                        continue
                    score = -r
                else:
                    if r <= 0:
                        continue
                    score = r
                if bland:
                    enter = j
                    break
                if enter < 0 or score > best:
                    best = score
                    enter = j
            if enter < 0:
                return "optimal"

            local += 1
            self.pivots += 1
            if local > dantzig_budget:
                bland = True
            if self.pivots > _HARD_PIVOT_CAP:
                raise InvariantViolation("simplex exceeded the hard pivot cap")
            d = 1 if self.state[enter] == "lo" else -1

            # ratio test: how far can the entering column move?
            t_best = None
            leave_row = -1
            leave_to = ""
            for i in range(self.nrows):
                a = self.A[i][enter] * d
                if a > 0:
                    t = self.xB[i] / a
                    to = "lo"
                elif a < 0:
                    ubB = self.ub[self.basis[i]]
                    if ubB is None:
                        continue
                    t = (ubB - self.xB[i]) / (-a)
                    to = "hi"
                else:
                    continue
                take = False
                if t_best is None or t < t_best:
                    take = True
                elif t == t_best:
                    if bland:
                        take = self.basis[i] < self.basis[leave_row]
                    # non-bland ties keep the smallest row index (first seen)
                if take:
                    t_best, leave_row, leave_to = t, i, to
            t_flip = self.ub[enter]
            if t_best is None and t_flip is None:
                return "unbounded"
            if t_flip is not None and (t_best is None or t_flip < t_best):
                for i in range(self.nrows):
                    if self.A[i][enter]:
                        self.xB[i] -= d * t_flip * self.A[i][enter]
                self.state[enter] = "hi" if self.state[enter] == "lo" else "lo"
                continue

            t = t_best
            if t != 0:
                for i in range(self.nrows):
                    if self.A[i][enter]:
                        self.xB[i] -= d * t * self.A[i][enter]
            enter_val = (self.ub[enter] if self.state[enter] == "hi" else _Q0) + d * t

            r_i = leave_row
            piv = self.A[r_i][enter]
            if piv != _Q1:
                inv = _Q1 / piv
                self.A[r_i] = [a * inv for a in self.A[r_i]]
            prow = self.A[r_i]
            for i in range(self.nrows):
                if i == r_i:
                    continue
                f = self.A[i][enter]
                if f:
                    row = self.A[i]
                    self.A[i] = [x - f * y if y else x for x, y in zip(row, prow)]
            f = red[enter]
            if f:
                red = [x - f * y if y else x for x, y in zip(red, prow)]
            leaving = self.basis[r_i]
            self.state[leaving] = leave_to
            self.basis[r_i] = enter
            self.state[enter] = "basic"
            self.xB[r_i] = enter_val

    # -- driver ------------------------------------------------------------

    def solve(self) -> LPOutcome:
        budget = 50 * (self.nrows + len(self.cols)) + 500
        if self.has_art:
            phase1 = [_Q1 if kind == _ART else _Q0 for (kind, _, _) in self.cols]
            status = self._optimize(phase1, barred=set(), dantzig_budget=budget)
            if status != "optimal":
                raise InvariantViolation("phase-1 objective cannot be unbounded")
            if self._objective_value(phase1) > 0:
                return LPOutcome(status="infeasible", pivots=self.pivots)
        barred = {j for j, (kind, _, _) in enumerate(self.cols) if kind == _ART}
        status = self._optimize(self.obj, barred=barred, dantzig_budget=budget)
        if status == "unbounded":
            return LPOutcome(status="unbounded", pivots=self.pivots)
        return self._extract()

    def _extract(self) -> LPOutcome:
        m = self.model
        uvals = [_Q0] * len(self.cols)
        for j, st in enumerate(self.state):
            if st == "hi":
                uvals[j] = self.ub[j]
        for i, bj in enumerate(self.basis):
            uvals[bj] = self.xB[i]
        primal = []
        for cols in self.var_cols:
            x = self.col_shift[cols[0]]
            for cj in cols:
                x += self.cols[cj][2] * uvals[cj]
            primal.append(_frac(x))
        objective = sum((m.vars[j].obj * primal[j] for j in range(len(m.vars))),
                        Fraction(0))

        # Duals read off the reduced costs of each row's identity-origin column.
        red = self._reduced_costs(self.obj)
        duals = []
        for i in range(self.nrows):
            if self.art_col[i] >= 0:
                y = -red[self.art_col[i]]
            else:
                j = self.slack_col[i]
                y = -red[j] * self.cols[j][2]
            duals.append(_frac(y * self.row_factor[i]) * self.sense)

        reduced = []
        for vj in range(len(m.vars)):
            d = m.vars[vj].obj
            for i, row in enumerate(m.rows):
                a = row.coeffs.get(vj)
                if a:
                    d -= duals[i] * a
            reduced.append(d)
        dual_obj = sum((duals[i] * m.rows[i].rhs for i in range(len(m.rows))),
                       Fraction(0))
        dual_obj += sum(reduced[j] * primal[j] for j in range(len(m.vars)))
        if dual_obj != objective:
            raise InvariantViolation(
                f"strong duality violated: primal {objective} vs dual {dual_obj}")
        return LPOutcome(
            status="optimal",
            objective=objective,
            primal=primal,
            duals=duals,
            reduced_costs=reduced,
            dual_objective=dual_obj,
            pivots=self.pivots,
        )


def lp_solve(model: LPModel) -> LPOutcome:
    """Solve the model exactly; deterministic for a fixed input."""
    return _Simplex(model).solve()


def lp_resolve(model: LPModel, new_rows: Iterable[tuple] = ()) -> LPOutcome:
    """Append rows (coeffs, rel, rhs) and re-solve; identical to a cold solve."""
    for coeffs, rel, rhs in new_rows:
        model.add_row(coeffs, rel, rhs)
    return lp_solve(model)
