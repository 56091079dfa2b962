"""Points on the Riemann sphere, Moebius transformations, and degree-2 rational maps.

Everything downstream (basin labeling, curve pullback, ray tracing) reduces to
the closed-form operations here: stable quadratic solving, pole-aware
evaluation, critical points via the Wronskian, and exact local jet data along
cycles.  All values are double precision; points of large modulus are handled
in the 1/z chart rather than with projective coordinates.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

# |z| beyond which operations switch to the 1/z chart.
CHART_LIMIT = 1e6

# Relative threshold below which a coefficient is snapped to exact zero.
COEFF_SNAP = 1e-13


class DegenerateMapError(ValueError):
    """Raised when coefficients do not define a degree-2 rational map."""


@dataclass(frozen=True)
class SpherePoint:
    """A point of the Riemann sphere: a finite complex value or infinity.

    ``z`` is the finite value, or ``None`` for the point at infinity.
    """

    z: complex | None

    @property
    def is_infinity(self) -> bool:
        return self.z is None

    @classmethod
    def of(cls, value) -> "SpherePoint":
        if isinstance(value, SpherePoint):
            return value
        if value is None:
            return INFINITY
        return cls(complex(value))

    def __repr__(self):
        return "SpherePoint(inf)" if self.z is None else f"SpherePoint({self.z!r})"


INFINITY = SpherePoint(None)


def as_point(value) -> SpherePoint:
    """Coerce a complex number, ``None``, or SpherePoint to a SpherePoint."""
    return SpherePoint.of(value)


def chordal_distance(p, q) -> float:
    """Chordal metric on the sphere, 2|p-q| / sqrt((1+|p|^2)(1+|q|^2)).

    Total on all inputs; the value lies in [0, 2] and the distance to
    infinity is the limit 2 / sqrt(1+|p|^2).  Inversion-invariant, so large
    moduli are folded through the 1/z chart to avoid overflow.
    """
    p = as_point(p)
    q = as_point(q)
    pz, qz = p.z, q.z
    # Fold through 1/z when either modulus exceeds 1 (chordal is invariant).
    big_p = pz is None or abs(pz) > 1.0
    big_q = qz is None or abs(qz) > 1.0
    if big_p and big_q:
        pz = 0.0 if pz is None else (1.0 / pz if pz != 0 else None)
        qz = 0.0 if qz is None else (1.0 / qz if qz != 0 else None)
    if pz is None and qz is None:
        return 0.0
    if pz is None:
        return 2.0 / math.sqrt(1.0 + abs(qz) ** 2)
    if qz is None:
        return 2.0 / math.sqrt(1.0 + abs(pz) ** 2)
    num = 2.0 * abs(pz - qz)
    if num == 0.0:
        return 0.0
    den = math.sqrt((1.0 + abs(pz) ** 2) * (1.0 + abs(qz) ** 2))
    return min(2.0, num / den)


def _lex_key(p: SpherePoint):
    # Infinity sorts last; finite points lexicographic by (re, im).
    if p.is_infinity:
        return (1, 0.0, 0.0)
    return (0, p.z.real, p.z.imag)


def solve_quadratic(a, b, c) -> tuple[SpherePoint, SpherePoint]:
    """Roots of a z^2 + b z + c on the sphere, with multiplicity.

    A vanishing leading coefficient places roots at infinity (one for a = 0,
    b != 0; a double root at infinity for a = b = 0, c != 0).  Finite roots
    use the cancellation-free branch: q = -(b + sign-matched sqrt(disc))/2,
    roots q/a and c/q.  Ties in output order are broken lexicographically
    by (re, im), infinity last.
    """
    a, b, c = complex(a), complex(b), complex(c)
    if a == 0 and b == 0 and c == 0:
        raise ValueError("degenerate equation: all coefficients zero")
    if a == 0:
        if b == 0:
            return (INFINITY, INFINITY)
        return _ordered(SpherePoint(-c / b), INFINITY)
    if c == 0:
        return _ordered(SpherePoint(0j), SpherePoint(-b / a))
    disc = b * b - 4 * a * c
    sq = cmath.sqrt(disc)
    if (b.conjugate() * sq).real < 0:
        sq = -sq
    q = -(b + sq) / 2
    return _ordered(SpherePoint(q / a), SpherePoint(c / q))


def _ordered(r1: SpherePoint, r2: SpherePoint):
    if _lex_key(r2) < _lex_key(r1):
        return (r2, r1)
    return (r1, r2)


@dataclass(frozen=True)
class MobiusTransformation:
    """z -> (a z + b) / (c z + d) with ad - bc != 0."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        scale = max(abs(self.a), abs(self.b), abs(self.c), abs(self.d))
        if scale == 0 or abs(self.det) <= 1e-14 * scale * scale:
            raise DegenerateMapError("Moebius transformation has (near-)zero determinant")

    @property
    def det(self) -> complex:
        return self.a * self.d - self.b * self.c

    def normalized(self) -> "MobiusTransformation":
        """Scale coefficients to determinant 1 with a canonical sign."""
        s = cmath.sqrt(self.det)
        coeffs = [self.a / s, self.b / s, self.c / s, self.d / s]
        for w in coeffs:
            if abs(w) > 1e-9:
                if w.real < 0 or (w.real == 0 and w.imag < 0):
                    coeffs = [-u for u in coeffs]
                break
        return MobiusTransformation(*coeffs)

    def apply(self, p) -> SpherePoint:
        p = as_point(p)
        if p.is_infinity:
            if self.c == 0:
                return INFINITY
            return SpherePoint(self.a / self.c)
        z = p.z
        if abs(z) > CHART_LIMIT:
            u = 1.0 / z
            num, den = self.a + self.b * u, self.c + self.d * u
        else:
            num, den = self.a * z + self.b, self.c * z + self.d
        if den == 0:
            return INFINITY
        return SpherePoint(num / den)

    def __call__(self, p) -> SpherePoint:
        return self.apply(p)

    def inverse(self) -> "MobiusTransformation":
        return MobiusTransformation(self.d, -self.b, -self.c, self.a)

    def compose(self, other: "MobiusTransformation") -> "MobiusTransformation":
        """self after other (matrix product)."""
        return MobiusTransformation(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    @classmethod
    def identity(cls) -> "MobiusTransformation":
        return cls(1, 0, 0, 1)

    @classmethod
    def inversion(cls) -> "MobiusTransformation":
        return cls(0, 1, 1, 0)

    @classmethod
    def to_zero(cls, p) -> "MobiusTransformation":
        """Chart taking p to the origin: z - p for finite p, 1/z for infinity."""
        p = as_point(p)
        if p.is_infinity:
            return cls.inversion()
        return cls(1, -p.z, 0, 1)

    def almost_equal(self, other: "MobiusTransformation", tol: float = 1e-12) -> bool:
        """Coefficient comparison after det-1 normalization, up to global sign."""
        m, n = self.normalized(), other.normalized()
        direct = max(abs(m.a - n.a), abs(m.b - n.b), abs(m.c - n.c), abs(m.d - n.d))
        flipped = max(abs(m.a + n.a), abs(m.b + n.b), abs(m.c + n.c), abs(m.d + n.d))
        return min(direct, flipped) < tol


def _snap(coeffs):
    scale = max(abs(w) for w in coeffs)
    if scale == 0:
        return tuple(complex(0) for _ in coeffs)
    return tuple(complex(0) if abs(w) <= COEFF_SNAP * scale else complex(w) for w in coeffs)


def _poly_degree(coeffs) -> int:
    deg = -1
    for k, w in enumerate(coeffs):
        if w != 0:
            deg = k
    return deg


def _resultant2(p, q) -> complex:
    """Homogeneous resultant of two quadratics (ascending coefficients)."""
    a0, a1, a2 = p
    b0, b1, b2 = q
    return (a2 * b0 - a0 * b2) ** 2 - (a2 * b1 - a1 * b2) * (a1 * b0 - a0 * b1)


@dataclass(frozen=True)
class QuadraticRationalMap:
    """A degree-2 rational map with marked critical points.

    ``num`` and ``den`` are ascending coefficient triples (c0, c1, c2) of the
    numerator and denominator.  ``c1`` and ``c2`` are the two critical points,
    with ``c1`` the designated periodic one when the map comes from a family.
    """

    num: tuple[complex, complex, complex]
    den: tuple[complex, complex, complex]
    c1: SpherePoint
    c2: SpherePoint

    def __call__(self, p) -> SpherePoint:
        return evaluate(self, p)


def rational_map(num, den, c1=None, c2=None) -> QuadraticRationalMap:
    """Build a QuadraticRationalMap from coefficient triples, validating degree 2.

    Tiny coefficients (relative 1e-13) are snapped to zero.  The resultant of
    numerator and denominator must be nonzero (lowest terms, topological
    degree exactly 2).  Critical points are computed and ordered (infinity
    first, then lexicographic) unless explicit markings are supplied.
    """
    num = _snap(tuple(complex(w) for w in num))
    den = _snap(tuple(complex(w) for w in den))
    scale = max(max(abs(w) for w in num), max(abs(w) for w in den))
    if scale == 0:
        raise DegenerateMapError("zero map")
    num = tuple(w / scale for w in num)
    den = tuple(w / scale for w in den)
    if max(_poly_degree(num), _poly_degree(den)) != 2:
        raise DegenerateMapError("max degree of numerator/denominator must be 2")
    res = _resultant2(num, den)
    if abs(res) <= 1e-12:
        raise DegenerateMapError("numerator and denominator share a root (degree < 2)")
    if c1 is None or c2 is None:
        probe = QuadraticRationalMap(num, den, INFINITY, INFINITY)
        p1, p2 = critical_points(probe)
        if p1.is_infinity or (not p2.is_infinity and _lex_key(p2) < _lex_key(p1)):
            p1, p2 = sorted((p1, p2), key=_lex_key)
        if p1.is_infinity:
            p1, p2 = p2, p1
        # infinity first when present, else lexicographic
        if p2.is_infinity:
            p1, p2 = p2, p1
        c1, c2 = p1, p2
    return QuadraticRationalMap(num, den, as_point(c1), as_point(c2))


def evaluate(m: QuadraticRationalMap, p) -> SpherePoint:
    """Value of the map at p, with poles sent to infinity.

    At infinity the value is the ratio of the top nonvanishing coefficients;
    finite points of modulus above 1 are evaluated in the 1/z chart so that
    nothing overflows.  An exact 0/0 raises (map not in lowest terms).
    """
    p = as_point(p)
    n0, n1, n2 = m.num
    d0, d1, d2 = m.den
    if p.is_infinity:
        for nk, dk in ((n2, d2), (n1, d1), (n0, d0)):
            if nk != 0 or dk != 0:
                if dk == 0:
                    return INFINITY
                return SpherePoint(nk / dk)
        raise DegenerateMapError("zero map")
    z = p.z
    if abs(z) <= 1.0:
        nv = n0 + z * (n1 + z * n2)
        dv = d0 + z * (d1 + z * d2)
    else:
        u = 1.0 / z
        nv = n2 + u * (n1 + u * n0)
        dv = d2 + u * (d1 + u * d0)
    if dv == 0:
        if nv == 0:
            raise DegenerateMapError("indeterminate: map not in lowest terms")
        return INFINITY
    return SpherePoint(nv / dv)


def wronskian_coeffs(m: QuadraticRationalMap):
    """Ascending coefficients of num' * den - num * den' (degree <= 2)."""
    n0, n1, n2 = m.num
    d0, d1, d2 = m.den
    return _snap((n1 * d0 - n0 * d1, 2 * (n2 * d0 - n0 * d2), n2 * d1 - n1 * d2))


def critical_points(m: QuadraticRationalMap) -> tuple[SpherePoint, SpherePoint]:
    """The two critical points, from the Wronskian zero set.

    The multiplicity of infinity as a critical point is the degree deficiency
    of the Wronskian (which plays the role of conjugating by 1/z): degree 1
    leaves one root at infinity, degree 0 a double root there.
    """
    w0, w1, w2 = wronskian_coeffs(m)
    if w0 == 0 and w1 == 0 and w2 == 0:
        raise DegenerateMapError("degenerate map: Wronskian vanishes identically")
    return solve_quadratic(w2, w1, w0)


def preimages(m: QuadraticRationalMap, w) -> tuple[SpherePoint, SpherePoint]:
    """Both solutions of m(z) = w, with multiplicity (a critical value twice)."""
    w = as_point(w)
    n0, n1, n2 = m.num
    d0, d1, d2 = m.den
    if w.is_infinity:
        return solve_quadratic(d2, d1, d0)
    wz = w.z
    if abs(wz) <= 1.0:
        return solve_quadratic(n2 - wz * d2, n1 - wz * d1, n0 - wz * d0)
    # Solve den - (1/w) num = 0 instead when |w| is large (same roots, stable).
    u = 1.0 / wz
    return solve_quadratic(d2 - u * n2, d1 - u * n1, d0 - u * n0)


def derivative(m: QuadraticRationalMap, z: complex) -> complex:
    """f'(z) at a finite non-pole point, from the Wronskian over den^2."""
    w0, w1, w2 = wronskian_coeffs(m)
    d0, d1, d2 = m.den
    dv = d0 + z * (d1 + z * d2)
    return (w0 + z * (w1 + z * w2)) / (dv * dv)


# ---------------------------------------------------------------------------
# Moebius conjugation and local jets
# ---------------------------------------------------------------------------

def _subst_homogeneous(quad, e, f, g, h):
    # quad = (q0, q1, q2) meaning q2 z^2 + q1 z w + q0 w^2; substitute
    # z -> e z + f w, w -> g z + h w.
    q0, q1, q2 = quad
    r2 = q2 * e * e + q1 * e * g + q0 * g * g
    r1 = 2 * q2 * e * f + q1 * (e * h + f * g) + 2 * q0 * g * h
    r0 = q2 * f * f + q1 * f * h + q0 * h * h
    return (r0, r1, r2)


def transform_map(m: QuadraticRationalMap, pre: MobiusTransformation,
                  post: MobiusTransformation):
    """Coefficient triples of post o m o pre (not validated as degree 2)."""
    e, f, g, h = pre.a, pre.b, pre.c, pre.d
    p = _subst_homogeneous(m.num, e, f, g, h)
    q = _subst_homogeneous(m.den, e, f, g, h)
    num = tuple(post.a * pv + post.b * qv for pv, qv in zip(p, q))
    den = tuple(post.c * pv + post.d * qv for pv, qv in zip(p, q))
    return _snap(num), _snap(den)


def conjugate_map(m: QuadraticRationalMap, M: MobiusTransformation) -> QuadraticRationalMap:
    """The conjugate M o m o M^{-1}, with critical points transported by M."""
    num, den = transform_map(m, M.inverse(), M)
    return rational_map(num, den, c1=M(m.c1), c2=M(m.c2))


def local_jet(m: QuadraticRationalMap, p) -> tuple[complex, complex]:
    """(h'(0), h''(0)/2) of the chart representative of m at p.

    The chart at p (and at its image) sends the point to the origin, so the
    returned pair is the 2-jet of the local map fixing 0.  The first entry is
    the usual spherical derivative factor; it vanishes exactly when p is a
    critical point, in which case the second entry is the quadratic
    coefficient used by the Boettcher normalization.
    """
    p = as_point(p)
    q = evaluate(m, p)
    chart_p = MobiusTransformation.to_zero(p)
    chart_q = MobiusTransformation.to_zero(q)
    num, den = transform_map(m, chart_p.inverse(), chart_q)
    n0, n1, n2 = num
    d0, d1, d2 = den
    scale = max(abs(w) for w in num + den)
    if abs(d0) <= 1e-13 * scale:
        raise DegenerateMapError("local chart denominator vanishes at the base point")
    if abs(n0) > 1e-8 * scale:
        raise DegenerateMapError("point does not map to the expected image in charts")
    return n1 / d0, n2 / d0 - n1 * d1 / (d0 * d0)


def cycle_multiplier(m: QuadraticRationalMap, points) -> complex:
    """Multiplier of a cycle: product of chart derivatives along it.

    Computed in charts placing each cycle point at the origin, so cycles
    through infinity need no special casing; exactly zero when a critical
    point lies on the cycle.
    """
    mult = complex(1)
    for p in points:
        d1, _ = local_jet(m, p)
        mult *= d1
    return mult


# ---------------------------------------------------------------------------
# Normal-form families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FamilyMember:
    """A map in the period-k slice: k, the complex parameter, and the map.

    k = 1 is z^2 + c (critical points infinity, 0); k = 2 is a/(z^2 + 2z)
    with a != 0 (critical points infinity, -1; infinity -> 0 -> infinity is
    the marked super-attracting 2-cycle).
    """

    k: int
    parameter: complex
    map: QuadraticRationalMap

    def marked_cycle(self) -> tuple[SpherePoint, ...]:
        if self.k == 1:
            return (INFINITY,)
        return (INFINITY, SpherePoint(0j))


def family_member(k: int, parameter) -> FamilyMember:
    parameter = complex(parameter)
    if k == 1:
        m = rational_map((parameter, 0, 1), (1, 0, 0),
                         c1=INFINITY, c2=SpherePoint(0j))
        return FamilyMember(1, parameter, m)
    if k == 2:
        if parameter == 0:
            raise ValueError("degenerate parameter: a = 0 is excluded for k = 2")
        m = rational_map((parameter, 0, 0), (0, 2, 1),
                         c1=INFINITY, c2=SpherePoint(complex(-1)))
        return FamilyMember(2, parameter, m)
    raise ValueError(f"period not implemented: k = {k}")
