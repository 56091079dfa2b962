"""Broken-line curves on the sphere and the planar geometry behind them.

A Curve is an ordered polyline of sphere points with endpoint tags and a
chordal refinement bound.  Segments are straight in whichever affine chart
(z or 1/z) keeps both endpoints bounded; all tolerance checks are chordal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .sphere import INFINITY, SpherePoint, as_point, chordal_distance

# A segment is tested in the z chart when both endpoints satisfy this bound.
SEG_CHART_BOUND = 1.8
INTERSECT_EPS = 1e-12


@dataclass(frozen=True)
class Curve:
    """Ordered polyline on the sphere ("broken line").

    ``max_edge`` records the chordal refinement bound the vertex chain
    satisfies.  Endpoint tags carry bookkeeping such as "critical value" or
    "preperiodic center".
    """

    vertices: tuple[SpherePoint, ...]
    start_tag: str = ""
    end_tag: str = ""
    max_edge: float | None = None

    def __post_init__(self):
        if len(self.vertices) < 2:
            raise ValueError("a curve needs at least two vertices")
        for a, b in zip(self.vertices, self.vertices[1:]):
            if chordal_distance(a, b) == 0.0:
                raise ValueError("consecutive curve vertices must be distinct")

    @property
    def start(self) -> SpherePoint:
        return self.vertices[0]

    @property
    def end(self) -> SpherePoint:
        return self.vertices[-1]

    @property
    def is_closed(self) -> bool:
        return chordal_distance(self.start, self.end) < 1e-12

    def reversed(self) -> "Curve":
        return Curve(tuple(reversed(self.vertices)), self.end_tag,
                     self.start_tag, self.max_edge)

    def edge_lengths(self):
        return [chordal_distance(a, b)
                for a, b in zip(self.vertices, self.vertices[1:])]


def curve_from_values(values, start_tag="", end_tag="", max_edge=None) -> Curve:
    """Curve from an iterable of complex values / SpherePoints, dropping repeats."""
    pts = []
    for v in values:
        p = as_point(v)
        if pts and chordal_distance(pts[-1], p) == 0.0:
            continue
        pts.append(p)
    return Curve(tuple(pts), start_tag, end_tag, max_edge)


def segment(a, b, start_tag="", end_tag="") -> Curve:
    return Curve((as_point(a), as_point(b)), start_tag, end_tag)


# ---------------------------------------------------------------------------
# Charts
# ---------------------------------------------------------------------------

def _chart_of_pair(p: SpherePoint, q: SpherePoint) -> str:
    """'z' or 'w' (= 1/z): the chart in which the pair stays bounded."""
    if not p.is_infinity and not q.is_infinity:
        m = max(abs(p.z), abs(q.z))
        if m <= SEG_CHART_BOUND:
            return "z"
        if p.z != 0 and q.z != 0 and max(abs(1 / p.z), abs(1 / q.z)) <= m:
            return "w"
        return "z"
    return "w"


def to_chart(p: SpherePoint, chart: str):
    """Coordinate of p in the chart, or None if not representable."""
    if chart == "z":
        return None if p.is_infinity else p.z
    if p.is_infinity:
        return 0j
    return None if p.z == 0 else 1.0 / p.z


def from_chart(value: complex, chart: str) -> SpherePoint:
    if chart == "z":
        return SpherePoint(complex(value))
    if value == 0:
        return INFINITY
    return SpherePoint(1.0 / complex(value))


def chart_midpoint(p: SpherePoint, q: SpherePoint) -> SpherePoint:
    chart = _chart_of_pair(p, q)
    a, b = to_chart(p, chart), to_chart(q, chart)
    if a is None or b is None:
        chart = "w" if chart == "z" else "z"
        a, b = to_chart(p, chart), to_chart(q, chart)
    return from_chart((a + b) / 2, chart)


def refine_curve(curve: Curve, max_edge: float) -> Curve:
    """Insert chart midpoints until every edge is chordally below max_edge."""
    verts = list(curve.vertices)
    i = 0
    while i < len(verts) - 1:
        if chordal_distance(verts[i], verts[i + 1]) > max_edge:
            verts.insert(i + 1, chart_midpoint(verts[i], verts[i + 1]))
        else:
            i += 1
    return Curve(tuple(verts), curve.start_tag, curve.end_tag, max_edge)


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------

def point_segment_chordal(p: SpherePoint, a: SpherePoint, b: SpherePoint) -> float:
    """Chordal distance from p to the segment [a, b] (straight in its chart)."""
    chart = _chart_of_pair(a, b)
    pa, ca, cb = to_chart(p, chart), to_chart(a, chart), to_chart(b, chart)
    best = min(chordal_distance(p, a), chordal_distance(p, b))
    if pa is None or ca is None or cb is None:
        return best
    d = cb - ca
    dd = (d * d.conjugate()).real
    if dd == 0:
        return best
    t = ((pa - ca) * d.conjugate()).real / dd
    if 0.0 < t < 1.0:
        proj = from_chart(ca + t * d, chart)
        best = min(best, chordal_distance(p, proj))
    return best


def point_polyline_chordal(p, curve: Curve) -> float:
    p = as_point(p)
    return min(point_segment_chordal(p, a, b)
               for a, b in zip(curve.vertices, curve.vertices[1:]))


def _densify(curve: Curve, step: float):
    pts = []
    for a, b in zip(curve.vertices, curve.vertices[1:]):
        n = max(1, int(math.ceil(chordal_distance(a, b) / step)))
        chart = _chart_of_pair(a, b)
        ca, cb = to_chart(a, chart), to_chart(b, chart)
        if ca is None or cb is None:
            pts.append(a)
            continue
        for j in range(n):
            pts.append(from_chart(ca + (cb - ca) * (j / n), chart))
    pts.append(curve.vertices[-1])
    return pts


def hausdorff_distance(c1: Curve, c2: Curve, step: float = 1e-3) -> float:
    """Symmetric polyline-to-polyline Hausdorff distance (chordal)."""
    d1 = max(point_polyline_chordal(p, c2) for p in _densify(c1, step))
    d2 = max(point_polyline_chordal(p, c1) for p in _densify(c2, step))
    return max(d1, d2)


# ---------------------------------------------------------------------------
# Segment intersections
# ---------------------------------------------------------------------------

def _orient(a: complex, b: complex, c: complex) -> float:
    return (b - a).real * (c - a).imag - (b - a).imag * (c - a).real


def _seg_intersection_chart(a, b, c, d, eps):
    """Intersection point of planar segments [a,b], [c,d], or None."""
    scale = max(abs(b - a), abs(d - c), 1e-30)
    o1 = _orient(a, b, c)
    o2 = _orient(a, b, d)
    o3 = _orient(c, d, a)
    o4 = _orient(c, d, b)
    tol = eps * scale * scale
    if ((o1 > tol and o2 < -tol) or (o1 < -tol and o2 > tol)) and \
       ((o3 > tol and o4 < -tol) or (o3 < -tol and o4 > tol)):
        denom = o1 - o2
        t = o1 / denom
        return c + t * (d - c)
    # collinear / endpoint touches
    for p, (u, v) in ((c, (a, b)), (d, (a, b)), (a, (c, d)), (b, (c, d))):
        if abs(_orient(u, v, p)) <= tol:
            dd = ((v - u) * (v - u).conjugate()).real
            if dd == 0:
                continue
            t = ((p - u) * (v - u).conjugate()).real / dd
            if -eps <= t <= 1 + eps:
                return p
    return None


def segment_intersection(a1: SpherePoint, a2: SpherePoint,
                         b1: SpherePoint, b2: SpherePoint,
                         eps: float = INTERSECT_EPS):
    """Sphere-segment intersection, computed in a shared chart.

    Segments produced by the refinement machinery are chordally short, so
    mapping the second segment into the first one's chart keeps straightness
    to within the stated tolerances.
    """
    chart = _chart_of_pair(a1, a2)
    pts = [to_chart(p, chart) for p in (a1, a2, b1, b2)]
    if any(p is None for p in pts):
        chart = "w" if chart == "z" else "z"
        pts = [to_chart(p, chart) for p in (a1, a2, b1, b2)]
        if any(p is None for p in pts):
            return None
    # reject far-apart segments cheaply
    ca, cb = pts[0], pts[1]
    cc, cd = pts[2], pts[3]
    if max(abs(cc), abs(cd)) > 4 * SEG_CHART_BOUND and max(abs(ca), abs(cb)) <= SEG_CHART_BOUND:
        return None
    hit = _seg_intersection_chart(ca, cb, cc, cd, eps)
    return None if hit is None else from_chart(hit, chart)


def curve_intersections(c1: Curve, c2: Curve, eps: float = INTERSECT_EPS):
    """All intersection points between two curves (shared endpoints count)."""
    hits = []
    for i in range(len(c1.vertices) - 1):
        for j in range(len(c2.vertices) - 1):
            p = segment_intersection(c1.vertices[i], c1.vertices[i + 1],
                                     c2.vertices[j], c2.vertices[j + 1], eps)
            if p is not None:
                hits.append(p)
    return hits


def is_simple(curve: Curve, eps: float = INTERSECT_EPS) -> bool:
    """True when non-adjacent segments never meet (closed curves allowed)."""
    n = len(curve.vertices) - 1
    closed = curve.is_closed
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1:
                continue
            if closed and i == 0 and j == n - 1:
                continue
            p = segment_intersection(curve.vertices[i], curve.vertices[i + 1],
                                     curve.vertices[j], curve.vertices[j + 1], eps)
            if p is not None:
                return False
    return True


def cluster_points(points, tol: float):
    """Greedy chordal clustering; returns representative points."""
    reps = []
    for p in points:
        for r in reps:
            if chordal_distance(p, r) <= tol:
                break
        else:
            reps.append(p)
    return reps


def curve_length(curve: Curve) -> float:
    return sum(curve.edge_lengths())


def parameter_along(curve: Curve, p) -> float:
    """Arc-length position (chordal, cumulative) of the nearest polyline point."""
    p = as_point(p)
    best = (math.inf, 0.0)
    acc = 0.0
    for a, b in zip(curve.vertices, curve.vertices[1:]):
        seg_len = chordal_distance(a, b)
        chart = _chart_of_pair(a, b)
        pa, ca, cb = to_chart(p, chart), to_chart(a, chart), to_chart(b, chart)
        if pa is not None and ca is not None and cb is not None:
            d = cb - ca
            dd = (d * d.conjugate()).real
            t = 0.0 if dd == 0 else ((pa - ca) * d.conjugate()).real / dd
            t = min(1.0, max(0.0, t))
            dist = chordal_distance(p, from_chart(ca + t * d, chart))
        else:
            t = 0.0 if chordal_distance(p, a) <= chordal_distance(p, b) else 1.0
            dist = min(chordal_distance(p, a), chordal_distance(p, b))
        if dist < best[0]:
            best = (dist, acc + t * seg_len)
        acc += seg_len
    return best[1]
