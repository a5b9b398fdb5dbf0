"""Weight functions on [0,1] driving the averaged tour analysis.

A weight function h maps cumulative tree position sigma in [0,1] to a
value in [0,1].  Three representations are supported: the closed-form
default h(sigma) = 4/(4+sigma), a constant, and piecewise-constant values
on m uniform buckets.  Piecewise (and constant) functions integrate in
exact rational arithmetic; the default uses double-precision logarithms.

The feasibility condition that makes the lonely-edge accounting work is

    integral_z^1 max(0, (1+z) h - 1) + integral_0^z (h - 1 - z h)  <=  0

for all z in [0,1]; condition_residual evaluates its left side.  The
proved performance ratio for a feasible h is 1 + 1/(1 + integral of h).
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Optional, Sequence, Union

from .errors import InputError, InvariantViolation

Number = Union[Fraction, float]

# Performance ratio of the default weight function: 1 + 1/(1 + 4 ln(5/4)).
DEFAULT_WEIGHT_INTEGRAL = 4.0 * math.log(1.25)
RHO_STAR = 1.0 + 1.0 / (1.0 + DEFAULT_WEIGHT_INTEGRAL)


class WeightFunction:
    """A weight function h: [0,1] -> [0,1] with the integrals the analysis needs."""

    def __init__(self, kind: str, values: Optional[Sequence[Fraction]] = None):
        if kind not in ("default", "piecewise"):
            raise InputError(f"unknown weight function kind {kind!r}")
        self.kind = kind
        if kind == "piecewise":
            if not values:
                raise InputError("piecewise weight function needs bucket values")
            vals = [Fraction(v) for v in values]
            for i, v in enumerate(vals):
                if not (0 <= v <= 1):
                    raise InputError(f"bucket {i} value {v} outside [0,1]")
            self.values: tuple[Fraction, ...] = tuple(vals)
            self.m = len(vals)
        else:
            self.values = ()
            self.m = 0

    # -- constructors ------------------------------------------------------

    @classmethod
    def default(cls) -> "WeightFunction":
        return cls("default")

    @classmethod
    def constant(cls, value) -> "WeightFunction":
        return cls("piecewise", [Fraction(value)])

    @classmethod
    def piecewise(cls, values: Sequence[Fraction]) -> "WeightFunction":
        return cls("piecewise", values)

    @property
    def is_rational(self) -> bool:
        return self.kind == "piecewise"

    @property
    def is_constant(self) -> bool:
        return self.kind == "piecewise" and self.m == 1

    def __eq__(self, other) -> bool:
        return (isinstance(other, WeightFunction)
                and self.kind == other.kind and self.values == other.values)

    def describe(self) -> dict:
        if self.kind == "default":
            return {"kind": "default"}
        if self.m == 1:
            return {"kind": "constant", "value": str(self.values[0])}
        return {"kind": "piecewise", "buckets": self.m,
                "values": [str(v) for v in self.values]}

    # -- pointwise values ----------------------------------------------------

    def value(self, sigma, side: str = "right") -> Number:
        """h(sigma); side='left' takes the left limit at bucket boundaries."""
        if sigma < 0 or sigma > 1:
            raise InputError(f"sigma {sigma} outside [0,1]")
        if self.kind == "default":
            return 4.0 / (4.0 + float(sigma))
        sf = Fraction(sigma)
        pos = sf * self.m
        idx = int(pos)
        if side == "left" and pos == idx and idx > 0:
            idx -= 1
        if idx >= self.m:
            idx = self.m - 1
        return self.values[idx]

    def beta(self, sigma, side: str = "right") -> Number:
        h = self.value(sigma, side)
        return h / (1 + h)

    def alpha(self, sigma, side: str = "right") -> Number:
        return 1 - 2 * self.beta(sigma, side)

    # -- integrals -------------------------------------------------------------

    def _bucket_overlaps(self, a: Fraction, b: Fraction):
        """(index, overlap length) for buckets meeting [a, b]."""
        out = []
        for i in range(self.m):
            lo = Fraction(i, self.m)
            hi = Fraction(i + 1, self.m)
            seg = min(b, hi) - max(a, lo)
            if seg > 0:
                out.append((i, seg))
        return out

    def integral(self, a, b) -> Number:
        """Integral of h over [a, b]."""
        if a > b:
            raise InputError(f"empty integration range [{a}, {b}]")
        if self.kind == "default":
            return 4.0 * (math.log(4.0 + float(b)) - math.log(4.0 + float(a)))
        a, b = Fraction(a), Fraction(b)
        return sum((self.values[i] * seg for i, seg in self._bucket_overlaps(a, b)),
                   Fraction(0))

    @property
    def integral_total(self) -> Number:
        if self.kind == "default":
            return DEFAULT_WEIGHT_INTEGRAL
        return self.integral(Fraction(0), Fraction(1))

    def one_plus_integral(self, a, b) -> Number:
        return (b - a) + self.integral(a, b)

    def correction_integral(self, a, b, z) -> Number:
        """Integral of (1 - h + z h) over [a, b]; the cut-repair weight density."""
        return (b - a) + (z - 1) * self.integral(a, b)

    def surplus_integral(self, z) -> Number:
        """Integral over [z, 1] of max(0, (1+z) h - 1); the repair demand."""
        if z < 0 or z > 1:
            raise InputError(f"z {z} outside [0,1]")
        if self.kind == "default":
            zf = float(z)
            upper = min(4.0 * zf, 1.0)  # (1+z) h(sigma) > 1 exactly for sigma < 4z
            if upper <= zf:
                return 0.0
            return (4.0 * (1.0 + zf) * (math.log(4.0 + upper) - math.log(4.0 + zf))
                    - (upper - zf))
        z = Fraction(z)
        total = Fraction(0)
        for i, seg in self._bucket_overlaps(z, Fraction(1)):
            gain = self.values[i] * (1 + z) - 1
            if gain > 0:
                total += gain * seg
        return total

    def condition_residual(self, z) -> Number:
        """Left side of the feasibility condition at z; feasible means <= 0."""
        if z < 0 or z > 1:
            raise InputError(f"z {z} outside [0,1]")
        if self.kind == "default":
            zf = float(z)
            return self.surplus_integral(zf) + (1.0 - zf) * self.integral(0.0, zf) - zf
        z = Fraction(z)
        return self.surplus_integral(z) + (1 - z) * self.integral(Fraction(0), z) - z


def performance_ratio(h: WeightFunction) -> Number:
    """The proved tour-versus-relaxation ratio 1 + 1/(1 + integral of h).

    Exact rational for piecewise functions, double precision for the
    default.
    """
    total = h.integral_total
    if isinstance(total, Fraction):
        return 1 + Fraction(1, 1) / (1 + total)
    return 1.0 + 1.0 / (1.0 + total)


def _quadratic_through(points):
    """Coefficients (c2, c1, c0) of the parabola through three exact points."""
    (x0, y0), (x1, y1), (x2, y2) = points
    d01 = (y1 - y0) / (x1 - x0)
    d12 = (y2 - y1) / (x2 - x1)
    c2 = (d12 - d01) / (x2 - x0)
    c1 = d01 - c2 * (x0 + x1)
    c0 = y0 - x0 * (c1 + c2 * x0)
    return c2, c1, c0


def max_condition_residual(h: WeightFunction) -> tuple[Fraction, Fraction]:
    """Exact global maximum of the condition residual over z in [0,1].

    Only for piecewise functions.  Between breakpoints (bucket boundaries
    and activation thresholds 1/v - 1) the residual is a quadratic in z;
    each piece is fitted through three exact evaluations, validated at two
    more, and maximized at its endpoints or interior vertex.
    """
    if not h.is_rational:
        raise InputError("exact residual maximization needs a piecewise function")
    points = {Fraction(0), Fraction(1)}
    for i in range(h.m + 1):
        points.add(Fraction(i, h.m))
    for v in h.values:
        if v > 0:
            zstar = Fraction(1, 1) / v - 1
            if 0 <= zstar <= 1:
                points.add(zstar)
    breaks = sorted(points)
    best_val = None
    best_z = None

    def consider(z: Fraction):
        nonlocal best_val, best_z
        val = h.condition_residual(z)
        if best_val is None or val > best_val or (val == best_val and z < best_z):
            best_val, best_z = val, z

    for z1, z2 in zip(breaks, breaks[1:]):
        mid = (z1 + z2) / 2
        pts = [(z1, h.condition_residual(z1)),
               (mid, h.condition_residual(mid)),
               (z2, h.condition_residual(z2))]
        c2, c1, c0 = _quadratic_through(pts)
        for frac in (Fraction(1, 4), Fraction(3, 4)):
            zq = z1 + (z2 - z1) * frac
            if c2 * zq * zq + c1 * zq + c0 != h.condition_residual(zq):
                raise InvariantViolation(
                    f"residual is not quadratic on [{z1}, {z2}]")
        consider(z1)
        consider(z2)
        if c2 < 0:
            vertex = -c1 / (2 * c2)
            if z1 < vertex < z2:
                consider(vertex)
        elif c2 > 0:
            pass  # convex piece peaks at its endpoints
    return best_val, best_z
