"""Curve pullback, the initial cut, iterated cut families, and their
finite-level combinatorics.

The pullback tracks the two preimage branches of a polyline by nearest
continuation, bisecting the sampling adaptively near branch collisions, and
merges branches into a single arc through a critical point when an endpoint
of the input is a critical value.  Cut families stack the iterated preimages
of the initial cut; the cut complex assigns each arc its two prime-end sides
and the side transition to its parent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .curves import (
    Curve,
    chart_midpoint,
    cluster_points,
    curve_from_values,
    curve_intersections,
    hausdorff_distance,
    is_simple,
    parameter_along,
    point_polyline_chordal,
    point_segment_chordal,
    refine_curve,
)
from .sphere import (
    INFINITY,
    QuadraticRationalMap,
    SpherePoint,
    as_point,
    chordal_distance,
    critical_points,
    evaluate,
    preimages,
)
from . import grids

DEFAULT_MAX_EDGE = 0.05
CV_TOL = 1e-9            # identification tolerance for critical values
MIN_PARAM_STEP = 1e-12   # adaptive bisection floor (chordal sample spacing)
REPROJECTION_TOL = 1e-9


class PullbackError(RuntimeError):
    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class InitialCutError(RuntimeError):
    pass


def critical_values(m: QuadraticRationalMap):
    return tuple(evaluate(m, c) for c in (m.c1, m.c2))


def _near_critical_value(m, p, tol=CV_TOL):
    for v in critical_values(m):
        if chordal_distance(p, v) < tol:
            return v
    return None


def _check_interior_clear(m, gamma: Curve):
    """Error out when the open part of gamma meets a critical value."""
    for v in critical_values(m):
        d = point_polyline_chordal(v, gamma)
        if d < CV_TOL:
            if chordal_distance(v, gamma.start) < CV_TOL or \
               chordal_distance(v, gamma.end) < CV_TOL:
                continue
            raise PullbackError("subdivide: interior critical value", location=v)


def pullback_curve(m: QuadraticRationalMap, gamma: Curve,
                   max_edge: float = DEFAULT_MAX_EDGE):
    """Preimage arcs of a simple curve under the map.

    Returns two disjoint arcs when gamma avoids critical values, or one arc
    through a critical point when an endpoint of gamma is a critical value
    (both branches merge there).  Branch continuation bisects the sampling
    whenever the two candidate preimages come closer than twice the step
    displacement; every output vertex reprojects onto gamma within 1e-9.
    """
    if not is_simple(gamma):
        raise PullbackError("pullback input must be a simple curve")
    _check_interior_clear(m, gamma)
    work = refine_curve(gamma, max_edge)
    samples = list(work.vertices)
    start_cv = _near_critical_value(m, samples[0])
    end_cv = _near_critical_value(m, samples[-1])

    def roots_of(w):
        return preimages(m, w)

    r0 = roots_of(samples[0])
    if start_cv is not None:
        # double preimage: both branches start at the critical point
        branch_a = [r0[0]]
        branch_b = [r0[0]]
    else:
        branch_a = [r0[0]]
        branch_b = [r0[1]]
        if chordal_distance(r0[0], r0[1]) < 1e-12:
            raise PullbackError("start point has coincident preimages but is "
                                "not a critical value", location=samples[0])
    j = 0
    guard = 0
    while j < len(samples) - 1:
        guard += 1
        if guard > 200000:
            raise PullbackError("pullback did not terminate", location=samples[j])
        w_next = samples[j + 1]
        r1, r2 = roots_of(w_next)
        sep = chordal_distance(r1, r2)
        step_len = chordal_distance(samples[j], w_next)
        at_merge_end = (j + 1 == len(samples) - 1) and end_cv is not None
        first_from_double = (j == 0) and start_cv is not None

        if sep < 1e-12:
            # merged preimage: legal only at the final (critical value) sample
            if not at_merge_end:
                raise PullbackError("coincident preimages away from an endpoint",
                                    location=w_next)
            branch_a.append(r1)
            branch_b.append(r1)
            j += 1
            continue

        if first_from_double:
            # leaving the critical point: assign the two roots deterministically
            cand_a, cand_b = r1, r2
        else:
            da = sorted((chordal_distance(branch_a[-1], r) for r in (r1, r2)))
            db = sorted((chordal_distance(branch_b[-1], r) for r in (r1, r2)))
            ambiguous = sep < 2 * min(da[0], db[0])
            too_long = max(da[0], db[0]) > max_edge
            if ambiguous or too_long:
                if step_len <= MIN_PARAM_STEP:
                    if ambiguous:
                        raise PullbackError(
                            "continuation ambiguity unresolved at minimum step",
                            location=w_next)
                else:
                    samples.insert(j + 1, chart_midpoint(samples[j], w_next))
                    continue
            cand_a = min((r1, r2), key=lambda r: chordal_distance(branch_a[-1], r))
            cand_b = min((r1, r2), key=lambda r: chordal_distance(branch_b[-1], r))
            if chordal_distance(cand_a, cand_b) < 1e-13:
                if step_len <= MIN_PARAM_STEP:
                    raise PullbackError("branches collapsed onto one preimage",
                                        location=w_next)
                samples.insert(j + 1, chart_midpoint(samples[j], w_next))
                continue
        branch_a.append(cand_a)
        branch_b.append(cand_b)
        j += 1

    refined_gamma = curve_from_values(samples)
    curves = _assemble_branches(branch_a, branch_b, start_cv, end_cv, max_edge)
    for curve in curves:
        for p in curve.vertices:
            d = point_polyline_chordal(evaluate(m, p), refined_gamma)
            if d >= REPROJECTION_TOL:
                raise PullbackError(f"reprojection residual {d:.3e} exceeds "
                                    f"{REPROJECTION_TOL}", location=p)
    return curves


def _assemble_branches(branch_a, branch_b, start_cv, end_cv, max_edge):
    if start_cv is None and end_cv is None:
        return [curve_from_values(branch_a, max_edge=max_edge),
                curve_from_values(branch_b, max_edge=max_edge)]
    if start_cv is not None and end_cv is None:
        verts = list(reversed(branch_a)) + branch_b[1:]
        return [curve_from_values(verts, start_tag="preimage of end",
                                  end_tag="preimage of end", max_edge=max_edge)]
    if start_cv is None and end_cv is not None:
        verts = branch_a + list(reversed(branch_b))[1:]
        return [curve_from_values(verts, max_edge=max_edge)]
    verts = branch_a + list(reversed(branch_b))[1:]
    return [curve_from_values(verts, max_edge=max_edge)]


def initial_cut(m: QuadraticRationalMap, beta: Curve,
                samples: int = 200, max_edge: float = DEFAULT_MAX_EDGE) -> Curve:
    """The initial cut Z = full preimage of beta, through the free critical point.

    beta must start at the free critical value v (the image of c2) and meet
    no other critical value; the result is a single simple arc through c2 on
    which the map is two-to-one onto beta except at c2 itself (checked by
    sampling interior points of beta).
    """
    v = evaluate(m, m.c2)
    if chordal_distance(beta.start, v) > 1e-7:
        raise InitialCutError("beta does not start at the free critical value")
    v_other = evaluate(m, m.c1)
    if chordal_distance(v, v_other) > CV_TOL and \
            point_polyline_chordal(v_other, beta) < CV_TOL:
        raise InitialCutError("beta passes through the other critical value")
    arcs = pullback_curve(m, beta, max_edge=max_edge)
    if len(arcs) != 1:
        raise InitialCutError("pullback of beta is disconnected "
                              "(beta did not start at the critical value)")
    Z = arcs[0]
    if point_polyline_chordal(m.c2, Z) > 1e-7:
        raise InitialCutError("initial cut does not pass through c2")
    if not is_simple(Z):
        raise InitialCutError("initial cut self-intersects")
    # two-to-one sampling check on interior points of beta
    dense = refine_curve(beta, max(1e-4, _curve_span(beta) / samples))
    interior = dense.vertices[1:-1]
    stride = max(1, len(interior) // samples)
    on_tol = 1e-6
    for w in interior[::stride]:
        pre = preimages(m, w)
        if chordal_distance(w, v) < 1e-9:
            continue
        dists = [point_polyline_chordal(p, Z) for p in pre]
        if max(dists) > on_tol:
            raise InitialCutError("a preimage of an interior beta point "
                                  "escaped the cut")
        if chordal_distance(pre[0], pre[1]) < 1e-10:
            raise InitialCutError("interior beta point behaves like a "
                                  "critical value")
    return Curve(Z.vertices, start_tag="preimage of beta end",
                 end_tag="preimage of beta end", max_edge=Z.max_edge)


def _curve_span(curve: Curve) -> float:
    return sum(curve.edge_lengths())


# ---------------------------------------------------------------------------
# Cut families
# ---------------------------------------------------------------------------

@dataclass
class CutFamily:
    """Iterated preimages of the initial cut: levels[n] are the arcs of
    f^{-n}(Z); parents[n][i] is the level-(n-1) arc index an arc came from."""

    map: QuadraticRationalMap
    levels: list
    parents: list
    max_edge: float

    @property
    def depth(self) -> int:
        return len(self.levels) - 1


def split_at_critical_values(m: QuadraticRationalMap, curve: Curve,
                             tol: float = CV_TOL):
    """Split a curve so critical values occur only at piece endpoints."""
    pieces = [curve]
    for v in critical_values(m):
        out = []
        for c in pieces:
            out.extend(_split_one(c, v, tol))
        pieces = out
    return pieces


def _split_one(curve: Curve, v: SpherePoint, tol: float):
    if point_polyline_chordal(v, curve) >= tol:
        return [curve]
    if chordal_distance(v, curve.start) < tol or chordal_distance(v, curve.end) < tol:
        return [curve]
    # locate the nearest vertex; if the hit is inside a segment, insert the value
    best_i, best_d = None, math.inf
    for i, p in enumerate(curve.vertices):
        d = chordal_distance(p, v)
        if d < best_d:
            best_i, best_d = i, d
    verts = list(curve.vertices)
    if best_d >= tol:
        # passes through a segment interior: find it and insert v
        for i in range(len(verts) - 1):
            if point_segment_chordal(v, verts[i], verts[i + 1]) < tol:
                verts.insert(i + 1, v)
                best_i = i + 1
                break
        else:
            return [curve]
    else:
        verts[best_i] = v
    left = verts[:best_i + 1]
    right = verts[best_i:]
    out = []
    if len(left) >= 2:
        out.append(Curve(tuple(left), curve.start_tag, "critical value",
                         curve.max_edge))
    if len(right) >= 2:
        out.append(Curve(tuple(right), "critical value", curve.end_tag,
                         curve.max_edge))
    return out


def build_cut_family(m: QuadraticRationalMap, Z, depth: int,
                     max_edge: float = DEFAULT_MAX_EDGE) -> CutFamily:
    """Iterated pullbacks of the initial cut, with automatic subdivision of
    arcs that meet a critical value in their interior."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    level0 = list(Z) if isinstance(Z, (list, tuple)) else [Z]
    levels = [level0]
    parents = [[-1] * len(level0)]
    for n in range(depth):
        next_level, next_parents = [], []
        for idx, arc in enumerate(levels[n]):
            for piece in split_at_critical_values(m, arc):
                try:
                    children = pullback_curve(m, piece, max_edge=max_edge)
                except PullbackError as exc:
                    raise PullbackError(
                        f"level {n} arc {idx}: {exc}", location=exc.location
                    ) from exc
                for child in children:
                    next_level.append(child)
                    next_parents.append(idx)
        levels.append(next_level)
        parents.append(next_parents)
    return CutFamily(m, levels, parents, max_edge)


# ---------------------------------------------------------------------------
# Cut complex (finite-level combinatorial model)
# ---------------------------------------------------------------------------

@dataclass
class ArcRecord:
    level: int
    index: int
    parent: int
    vertex_count: int
    endpoint_critical_values: int
    side_transition: dict | None   # {"+": side, "-": side} onto the parent


@dataclass
class LevelStats:
    arc_count: int
    intersection_count: int


@dataclass
class CutComplex:
    arcs: list
    level_stats: list
    all_disjoint: bool


def orientation_at(m, arc: Curve, target: Curve, i: int) -> int:
    """+1/-1 when m sends the edge arc[i:i+2] forward/backward along target,
    0 when the projected displacement degenerates (e.g. at a fold point)."""
    qa = evaluate(m, arc.vertices[i])
    qb = evaluate(m, arc.vertices[i + 1])
    sa = parameter_along(target, qa)
    sb = parameter_along(target, qb)
    if abs(sb - sa) <= 1e-12:
        return 0
    return 1 if sb > sa else -1


def _anchor_candidates(n):
    # midpoint first; a folded arc is degenerate exactly there, so walk outward
    mid = n // 2
    order = [mid, mid - 1, mid + 1, n // 3, (2 * n) // 3, 0, n - 2]
    return [i for i in order if 0 <= i < n - 1]


def _orientation_preserved(m, arc: Curve, parent: Curve) -> bool:
    for i in _anchor_candidates(len(arc.vertices)):
        s = orientation_at(m, arc, parent, i)
        if s:
            return s > 0
    raise PullbackError("orientation test degenerate along the arc")


def build_cut_complex(cf: CutFamily) -> CutComplex:
    """Sides, side transitions, and per-level intersection statistics.

    Each arc carries sides '+' (left of traversal) and '-' (right); because
    the map is holomorphic it preserves plane orientation, so the transition
    onto the parent arc is determined by whether the induced traversal of the
    parent runs forward or backward.
    """
    m = cf.map
    arcs = []
    cvs = critical_values(m)
    for level, curves in enumerate(cf.levels):
        for idx, arc in enumerate(curves):
            inc = sum(1 for e in (arc.start, arc.end)
                      for v in cvs if chordal_distance(e, v) < CV_TOL)
            transition = None
            if level > 0:
                parent = cf.levels[level - 1][cf.parents[level][idx]]
                if _orientation_preserved(m, arc, parent):
                    transition = {"+": "+", "-": "-"}
                else:
                    transition = {"+": "-", "-": "+"}
            arcs.append(ArcRecord(level, idx, cf.parents[level][idx],
                                  len(arc.vertices), inc, transition))
    stats = []
    for level, curves in enumerate(cf.levels):
        pts = []
        for i in range(len(curves)):
            for j in range(i + 1, len(curves)):
                pts.extend(curve_intersections(curves[i], curves[j]))
        stats.append(LevelStats(len(curves), len(cluster_points(pts, 1e-6))))
    all_disjoint = all(s.intersection_count == 0 for s in stats)
    if all_disjoint:
        flat = [c for curves in cf.levels for c in curves]
        for i in range(len(flat)):
            if not is_simple(flat[i]):
                all_disjoint = False
                break
        # arcs at different levels must not meet either
        if all_disjoint:
            for i in range(len(flat)):
                for j in range(i + 1, len(flat)):
                    if curve_intersections(flat[i], flat[j]):
                        all_disjoint = False
                        break
                if not all_disjoint:
                    break
    return CutComplex(arcs, stats, all_disjoint)


# ---------------------------------------------------------------------------
# Complement rasters (the finite-level stand-in for U_n)
# ---------------------------------------------------------------------------

@dataclass
class ComplementRaster:
    resolution: int
    component_count: int
    labels: np.ndarray      # shape (2, res, res); -1 = removed / inactive


def _draw_curves(curves, resolution):
    """Boolean per-chart masks of pixels within half a pixel of any curve."""
    res = resolution
    extent = grids.CHART_EXTENT
    px = 2 * extent / res
    marked = np.zeros((2, res, res), dtype=bool)
    centers = grids.chart_axis(res)
    for curve in curves:
        for a, b in zip(curve.vertices, curve.vertices[1:]):
            from .curves import _chart_of_pair, to_chart
            own = _chart_of_pair(a, b)
            ca, cb = to_chart(a, own), to_chart(b, own)
            if ca is None or cb is None:
                continue
            length = abs(cb - ca)
            nsub = max(2, int(math.ceil(length / (px / 8))))
            ts = np.linspace(0.0, 1.0, nsub)
            pts_own = ca + (cb - ca) * ts
            for chart in (0, 1):
                if (chart == 0) == (own == "z"):
                    pts = pts_own
                else:
                    with np.errstate(divide="ignore", invalid="ignore"):
                        pts = np.where(pts_own != 0, 1.0 / pts_own, np.inf)
                sel = np.abs(pts) <= extent + px
                if not sel.any():
                    continue
                xs, ys = pts[sel].real, pts[sel].imag
                cols = np.clip(((xs + extent) / px - 0.5).round().astype(int), 0, res - 1)
                rows = np.clip(((ys + extent) / px - 0.5).round().astype(int), 0, res - 1)
                for dr in (-1, 0, 1):
                    for dc in (-1, 0, 1):
                        rr = np.clip(rows + dr, 0, res - 1)
                        cc = np.clip(cols + dc, 0, res - 1)
                        d = np.hypot(centers[cc] - xs, centers[rr] - ys)
                        hit = d <= 0.55 * px
                        marked[chart, rr[hit], cc[hit]] = True
    return marked


def complement_description(cf: CutFamily, n: int, resolution: int) -> ComplementRaster:
    """Component count of the raster complement of levels 0..n of the family."""
    if resolution < 64:
        raise ValueError("too coarse: resolution must be at least 64")
    if n > cf.depth:
        raise ValueError("level exceeds family depth")
    curves = [c for lvl in cf.levels[:n + 1] for c in lvl]
    marked = _draw_curves(curves, resolution)
    active = grids.active_mask(resolution)
    targets = np.where(active & ~marked[0], 0, -1), \
        np.where(active & ~marked[1], 0, -1)
    lab0, lab1, final = grids.label_components(targets[0], targets[1], resolution)
    return ComplementRaster(resolution, len(final), np.stack([lab0, lab1]))


# ---------------------------------------------------------------------------
# Brute-force oracle used by the verification suite
# ---------------------------------------------------------------------------

def preimage_component_count_bruteforce(m, gamma: Curve, samples: int = 800):
    """Count preimage components by dense sampling and nearest-neighbor linking.

    Independent of the branch-tracked pullback: collect both preimages of
    every sample, link each node to its nearest node at the previous sample,
    and union coincident root pairs.  Dense enough sampling makes
    same-branch spacing smaller than cross-branch separation everywhere.
    """
    dense = refine_curve(gamma, max(_curve_span(gamma) / samples, 1e-6))
    pts = dense.vertices
    roots = [preimages(m, w) for w in pts]
    parent = list(range(2 * len(pts)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    for t in range(len(pts)):
        a, b = roots[t]
        if chordal_distance(a, b) < 1e-9:
            union(2 * t, 2 * t + 1)
        if t == 0:
            continue
        prev = roots[t - 1]
        for i, r in enumerate((a, b)):
            j = min((0, 1), key=lambda jj: chordal_distance(r, prev[jj]))
            union(2 * t + i, 2 * (t - 1) + j)
    return len({find(i) for i in range(2 * len(pts))})
