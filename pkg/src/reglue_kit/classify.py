"""Dynamics classification for the period-k slices.

Super-attracting cycle detection with Newton refinement, raster basin
labeling over two charts, the capture test for the free critical orbit,
Newton solvers for critically finite centers, and super-attracting orbit
signatures (the necessary condition for two maps to share their
super-attracting structure).

Numeric conventions: a free critical orbit "lands" on a cycle when its
*first* visit to the cycle's eps-neighborhood is already within EXACT_TOL.
A gradually converging orbit first enters at distance >> EXACT_TOL, so the
landing test separates critically finite parameters from generic basin
parameters even though every orbit attracted to a super-attracting cycle
eventually collapses onto it in floating point.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import grids
from .sphere import (
    INFINITY,
    DegenerateMapError,
    FamilyMember,
    MobiusTransformation,
    QuadraticRationalMap,
    SpherePoint,
    as_point,
    chordal_distance,
    conjugate_map,
    cycle_multiplier,
    derivative,
    evaluate,
    family_member,
)

PERIOD_BOUND = 64
EPS_ENTER = 1e-3       # chordal radius of "entered the cycle neighborhood"
EPS_STAY = 1e-2        # confirmation band for the two-stage entry test
EXACT_TOL = 1e-12      # landing-on-cycle tolerance
SUPER_TOL = 1e-8       # |multiplier| below this counts as super-attracting

PERIODIC_CRITICAL = "PERIODIC_CRITICAL"
IMMEDIATE = "IMMEDIATE"
CAPTURE = "CAPTURE"
OTHER_ATTRACTOR = "OTHER_ATTRACTOR"
UNRESOLVED = "UNRESOLVED"

TAGS = (PERIODIC_CRITICAL, IMMEDIATE, CAPTURE, OTHER_ATTRACTOR, UNRESOLVED)

BASIN_CAVEAT = ("immediate-basin membership decided by raster flood fill; "
                "component identity is accurate to the pixel size only")


class CycleRefinementError(RuntimeError):
    """Newton refinement failed after a cycle was detected; carries the raw data."""

    def __init__(self, message, candidate_points=None, period=None):
        super().__init__(message)
        self.candidate_points = candidate_points
        self.period = period


@dataclass(frozen=True)
class Cycle:
    """An attracting or detected cycle: ordered points, period, multiplier."""

    points: tuple[SpherePoint, ...]
    period: int
    multiplier: complex

    @property
    def is_superattracting(self) -> bool:
        return abs(self.multiplier) < SUPER_TOL

    def distance_to(self, p) -> float:
        return min(chordal_distance(p, q) for q in self.points)


def marked_cycle(fm: FamilyMember) -> Cycle:
    """The defining super-attracting cycle of a family member (exact)."""
    pts = fm.marked_cycle()
    return Cycle(pts, len(pts), cycle_multiplier(fm.map, pts))


# ---------------------------------------------------------------------------
# Cycle detection and refinement
# ---------------------------------------------------------------------------

_SHIFT_CANDIDATES = (0.31 + 0.17j, -0.83 + 0.55j, 1.21 - 0.94j, 0.05 - 1.37j,
                     -1.61 - 0.23j, 2.07 + 0.81j)


def _snap_cycle(m, pts):
    """Snap refined cycle points to exact distinguished points when that
    reproduces an exactly periodic orbit."""
    specials = [INFINITY, m.c1, m.c2, SpherePoint(0j)]
    snapped = []
    for p in pts:
        best = p
        for s in specials:
            if chordal_distance(p, s) < 1e-7:
                best = s
                break
        snapped.append(best)
    for i, p in enumerate(snapped):
        q = evaluate(m, p)
        if chordal_distance(q, snapped[(i + 1) % len(snapped)]) > 1e-12:
            return list(pts)
    return snapped


def _reduce_period(pts, tol=1e-9):
    p = len(pts)
    for d in range(1, p):
        if p % d:
            continue
        if all(chordal_distance(pts[i], pts[(i + d) % p]) < tol for i in range(p)):
            return pts[:d]
    return pts


def _refine_cycle(m: QuadraticRationalMap, z0: SpherePoint, period: int) -> Cycle:
    orbit = [z0]
    for _ in range(period - 1):
        orbit.append(evaluate(m, orbit[-1]))
    g, M = m, None
    if any(p.is_infinity or abs(p.z) > 10 for p in orbit):
        for s in _SHIFT_CANDIDATES:
            if min(chordal_distance(p, s) for p in orbit) > 0.4:
                M = MobiusTransformation(0, 1, 1, -s)   # z -> 1/(z - s)
                break
        if M is None:
            raise CycleRefinementError("no usable chart shift", orbit, period)
        g = conjugate_map(m, M)
        w = M(z0).z
    else:
        w = z0.z
    for _ in range(60):
        zs = [w]
        dprod = complex(1)
        ok = True
        for _ in range(period):
            dprod *= derivative(g, zs[-1])
            nxt = evaluate(g, SpherePoint(zs[-1]))
            if nxt.is_infinity or abs(nxt.z) > 1e8:
                ok = False
                break
            zs.append(nxt.z)
        if not ok:
            raise CycleRefinementError("orbit left the refinement chart",
                                       orbit, period)
        fz = zs[-1] - w
        denom = dprod - 1
        if abs(denom) < 1e-12:
            raise CycleRefinementError("refinement failed: neutral cycle",
                                       orbit, period)
        step = fz / denom
        w = w - step
        if abs(step) < 1e-13 * (1 + abs(w)):
            break
    else:
        raise CycleRefinementError("refinement failed: Newton did not converge",
                                   orbit, period)
    pts = [SpherePoint(w)]
    for _ in range(period - 1):
        pts.append(evaluate(g, pts[-1]))
    if M is not None:
        inv = M.inverse()
        pts = [inv(p) for p in pts]
    pts = _reduce_period(pts)
    pts = _snap_cycle(m, pts)
    mult = cycle_multiplier(m, pts)
    return Cycle(tuple(pts), len(pts), mult)


def detect_cycle(m: QuadraticRationalMap, seed, max_iter: int = 10000,
                 tol: float = 1e-9):
    """Iterate the seed and return the refined attracting/periodic cycle, if any.

    Near-returns of period <= 64 within ``tol`` trigger Newton refinement on
    the period-th iterate (in a shifted chart when the cycle passes near
    infinity).  Returns None when no near-return shows up in max_iter steps.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    z = as_point(seed)
    history = [z]
    for _ in range(max_iter):
        z = evaluate(m, z)
        n = len(history)
        for p in range(1, min(PERIOD_BOUND, n) + 1):
            if chordal_distance(z, history[n - p]) < tol:
                return _refine_cycle(m, z, p)
        history.append(z)
        if len(history) > PERIOD_BOUND + 1:
            history.pop(0)
    return None


# ---------------------------------------------------------------------------
# Basin rasters
# ---------------------------------------------------------------------------

@dataclass
class BasinRaster:
    """Raster labeling of basins over the two standard charts.

    ``labels`` has shape (2, res, res); -1 marks pixels that never converged.
    ``targets`` stores per-pixel canonical-phase attractor point indices into
    ``attractor_points``.  ``cycle_components`` are the merged component
    labels containing the given cycle's points.
    """

    resolution: int
    labels: np.ndarray
    targets: np.ndarray
    attractor_points: list
    attractor_cycles: list
    cycle_components: frozenset
    component_count: int
    eps: float

    def label_of(self, p) -> int:
        chart, row, col = grids.pixel_of_point(as_point(p), self.resolution)
        return int(self.labels[chart, row, col])


def _registry_for(m, cycle: Cycle, max_iter, eps):
    """Attractor points for the raster: the given cycle plus (at most one)
    other attracting cycle discovered from the critical points."""
    cycles = [cycle]
    for crit in (m.c1, m.c2):
        if any(c.distance_to(crit) < 1e-6 for c in cycles):
            continue
        z = crit
        absorbed = False
        for _ in range(max_iter):
            z = evaluate(m, z)
            if any(c.distance_to(z) < eps for c in cycles):
                absorbed = True
                break
        if absorbed:
            continue
        try:
            found = detect_cycle(m, crit, max_iter=max_iter, tol=1e-9)
        except CycleRefinementError:
            found = None
        if found is not None and abs(found.multiplier) < 1:
            if all(min(chordal_distance(p, q) for q in c.points) > 1e-6
                   for c in cycles for p in found.points):
                cycles.append(found)
    points, owner = [], []
    for ci, c in enumerate(cycles):
        for p in c.points:
            points.append(p)
            owner.append(ci)
    return cycles, points, np.array(owner), np.array([c.period for c in cycles])


def basin_label(m: QuadraticRationalMap, cycle: Cycle, resolution: int,
                max_iter: int = 2000, eps: float = EPS_ENTER) -> BasinRaster:
    """Label basin components of the cycle (and any second attractor) on a raster.

    Every pixel center is iterated until it enters the eps-neighborhood of a
    registered attractor; it is then run to the next multiple of that cycle's
    period so the recorded target (nearest cycle point) is phase-canonical
    and constant on Fatou components.  Components are flood-filled with
    4-adjacency per chart and merged across the chart overlap.
    """
    if abs(cycle.multiplier) >= 1:
        raise ValueError("basin_label requires an attracting cycle")
    cycles, reg_points, owner, periods = _registry_for(m, cycle, max_iter, eps)
    res = resolution
    grid = grids.chart_grid(res)
    active = grids.active_mask(res)
    z_init, pix_chart, pix_flat = [], [], []
    for chart in (0, 1):
        sel = np.flatnonzero(active.ravel())
        z_init.append(grids.sphere_from_chart(grid.ravel()[sel], chart))
        pix_chart.append(np.full(sel.size, chart))
        pix_flat.append(sel)
    za = np.concatenate(z_init)
    chart_a = np.concatenate(pix_chart)
    flat_a = np.concatenate(pix_flat)
    n = za.size
    target = np.full(2 * res * res, -1, dtype=np.int64).reshape(2, res, res)
    countdown = np.full(n, -1, dtype=np.int64)
    cyc_id = np.full(n, -1, dtype=np.int64)
    idx = np.arange(n)

    def _freeze(sel_mask, dists):
        for c in np.unique(cyc_id[sel_mask]):
            pts_idx = np.flatnonzero(owner == c)
            sel = sel_mask & (cyc_id == c)
            sub = dists[pts_idx][:, sel]
            win = pts_idx[np.argmin(sub, axis=0)]
            rows, cols = np.divmod(flat_a[sel], res)
            target[chart_a[sel], rows, cols] = win

    step = 0
    cap = max_iter + int(periods.max()) + 1
    while idx.size and step < cap:
        za = grids.evaluate_array(m, za)
        step += 1
        dists = np.stack([grids.chordal_to_point(za, p) for p in reg_points])
        dmin = dists.min(axis=0)
        amin = dists.argmin(axis=0)
        fresh = (countdown < 0) & (dmin < eps)
        if fresh.any():
            cids = owner[amin[fresh]]
            countdown[fresh] = (-step) % periods[cids]
            cyc_id[fresh] = cids
        freeze = countdown == 0
        if freeze.any():
            _freeze(freeze, dists)
        pos = countdown > 0
        countdown[pos] -= 1
        keep = ~freeze
        if not keep.all():
            za, countdown, cyc_id = za[keep], countdown[keep], cyc_id[keep]
            chart_a, flat_a, idx = chart_a[keep], flat_a[keep], idx[keep]

    lab0, lab1, final = grids.label_components(target[0], target[1], res)
    labels = np.stack([lab0, lab1])
    cyc_comp = set()
    for p in cycle.points:
        chart, row, col = grids.pixel_of_point(p, res)
        l = int(labels[chart, row, col])
        if l >= 0:
            cyc_comp.add(l)
    return BasinRaster(res, labels, target, list(reg_points), cycles,
                       frozenset(cyc_comp), len(final), eps)


# ---------------------------------------------------------------------------
# Free-critical-orbit classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Classification:
    tag: str
    evidence: dict = field(default_factory=dict)


def _point_json(p: SpherePoint):
    return "inf" if p.is_infinity else [p.z.real, p.z.imag]


def _landing_index(orbit, cycle_pts, tol=EXACT_TOL):
    for j, q in enumerate(orbit):
        if min(chordal_distance(q, c) for c in cycle_pts) < tol:
            return j
    return None


def _periodic_tail(orbit, new_point, tol=EXACT_TOL):
    """Index j (within the trailing window) with orbit[j] == new_point."""
    n = len(orbit)
    for p in range(1, min(PERIOD_BOUND, n) + 1):
        if chordal_distance(new_point, orbit[n - p]) < tol:
            return n - p
    return None


def classify_free_critical(fm: FamilyMember, resolution: int = 512,
                           max_iter: int = 10000, *,
                           basin_max_iter: int | None = None,
                           eps: float = EPS_ENTER) -> Classification:
    """Classify the free critical orbit of a family member.

    PERIODIC_CRITICAL: the orbit of c2 lands (within 1e-12 at its first visit)
    on the marked cycle or on a super-attracting cycle of its own.
    IMMEDIATE / CAPTURE: the orbit converges to the marked cycle without
    landing; the raster component of c2 does / does not contain a cycle
    point.  OTHER_ATTRACTOR: another attracting (not super-attracting) cycle
    captures the orbit.  UNRESOLVED otherwise.
    """
    m = fm.map
    mc = marked_cycle(fm)
    k = fm.k
    if basin_max_iter is None:
        basin_max_iter = max_iter
    z = m.c2
    orbit = [z]
    step = 0
    while step < max_iter:
        d_marked = mc.distance_to(z)
        if d_marked < EXACT_TOL:
            j = _landing_index(orbit, mc.points)
            return Classification(PERIODIC_CRITICAL, {
                "target": "marked", "landing_time": j, "period": mc.period,
                "orbit_prefix": [_point_json(p) for p in orbit[:j + 1]],
            })
        if d_marked < eps:
            # two-stage confirmation: stay near the cycle for 2k more steps
            w, ok = z, True
            for _ in range(2 * k):
                w = evaluate(m, w)
                if mc.distance_to(w) > EPS_STAY:
                    ok = False
                    break
            if ok:
                raster = basin_label(m, mc, resolution,
                                     max_iter=basin_max_iter, eps=eps)
                comp = raster.label_of(m.c2)
                ev = {"entry_step": step, "entry_distance": d_marked,
                      "component": comp,
                      "cycle_components": sorted(raster.cycle_components),
                      "basin_resolution": resolution, "note": BASIN_CAVEAT}
                if comp < 0:
                    return Classification(UNRESOLVED,
                                          {"reason": "basin pixel unconverged", **ev})
                if comp in raster.cycle_components:
                    return Classification(IMMEDIATE, ev)
                return Classification(CAPTURE, ev)
        j = _periodic_tail(orbit[:-1], z)
        if j is not None:
            cyc_pts = orbit[j:-1]
            try:
                cyc = _refine_cycle(m, z, len(cyc_pts))
            except CycleRefinementError:
                cyc = Cycle(tuple(cyc_pts), len(cyc_pts),
                            cycle_multiplier(m, cyc_pts))
            land = _landing_index(orbit, cyc.points)
            if cyc.is_superattracting:
                return Classification(PERIODIC_CRITICAL, {
                    "target": "free", "landing_time": land,
                    "period": cyc.period,
                    "cycle": [_point_json(p) for p in cyc.points],
                })
            if abs(cyc.multiplier) < 1:
                return Classification(OTHER_ATTRACTOR, {
                    "period": cyc.period,
                    "multiplier": [cyc.multiplier.real, cyc.multiplier.imag],
                })
            return Classification(UNRESOLVED, {
                "reason": "orbit landed on a non-attracting cycle",
                "period": cyc.period,
                "multiplier": [cyc.multiplier.real, cyc.multiplier.imag],
            })
        z = evaluate(m, z)
        orbit.append(z)
        step += 1
    # No landing and no entry: look for a slowly attracting cycle in the tail.
    try:
        cyc = detect_cycle(m, orbit[-PERIOD_BOUND], max_iter=2 * PERIOD_BOUND,
                           tol=1e-6) if len(orbit) > PERIOD_BOUND else None
    except CycleRefinementError:
        cyc = None
    if cyc is not None and abs(cyc.multiplier) < 1 and not cyc.is_superattracting:
        return Classification(OTHER_ATTRACTOR, {
            "period": cyc.period,
            "multiplier": [cyc.multiplier.real, cyc.multiplier.imag],
        })
    return Classification(UNRESOLVED, {"reason": "orbit did not resolve",
                                       "steps": max_iter})


# ---------------------------------------------------------------------------
# Centers by Newton's method
# ---------------------------------------------------------------------------

class NewtonError(RuntimeError):
    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


def _k1_condition(c, landing_time, period):
    """(G(c), G'(c)) for the center condition of z^2 + c."""
    q, dq = c, 1.0 + 0j
    seq = [(q, dq)]
    total = landing_time + (period or 0)
    for _ in range(total - 1):
        q, dq = q * q + c, 2 * q * dq + 1
        seq.append((q, dq))
    if period is None:
        return seq[landing_time - 1]
    qa, da = seq[landing_time + period - 1]
    qb, db = seq[landing_time - 1]
    return qa - qb, da - db


def _k2_condition(a, landing_time):
    """(G(a), G'(a)) for the orbit of -1 hitting infinity at landing_time."""
    x, dx = complex(-1), 0j
    for _ in range(landing_time - 1):
        den = x * x + 2 * x
        if den == 0:
            return complex(0), complex(1)
        dx = (den - a * (2 * x + 2) * dx) / (den * den)
        x = a / den
    return x * x + 2 * x, (2 * x + 2) * dx


def find_center(k: int, landing_time: int, guess, period: int | None = None):
    """Newton solve for a critically finite center parameter.

    k = 1 solves Q_n(c) = 0 with Q_1 = c, Q_{n+1} = Q_n^2 + c (periodic
    centers), or Q_{n+p} = Q_n when ``period`` is given (preperiodic
    parameters).  k = 2 drives the orbit of -1 into infinity at the given
    time.  Converges to residual < 1e-12 or raises NewtonError; excluded
    degenerate roots (c = 0 for landing_time > 1, a = 0) also raise.
    """
    if k not in (1, 2):
        raise ValueError("period not implemented")
    if landing_time < 1:
        raise ValueError("landing_time must be >= 1")
    x = complex(guess)
    for _ in range(100):
        if k == 1:
            g, dg = _k1_condition(x, landing_time, period)
        else:
            g, dg = _k2_condition(x, landing_time)
        if abs(g) < 1e-13:
            break
        if dg == 0 or not (math.isfinite(g.real) and math.isfinite(g.imag)):
            raise NewtonError("Newton derivative degenerate", last=x)
        x = x - g / dg
    g, _ = (_k1_condition(x, landing_time, period) if k == 1
            else _k2_condition(x, landing_time))
    if abs(g) >= 1e-12:
        raise NewtonError("Newton failed to converge in 100 steps", last=x)
    if k == 2 and abs(x) < 1e-6:
        raise NewtonError("degenerate center: a = 0", last=x)
    if k == 1 and landing_time > 1 and period is None and abs(x) < 1e-6:
        raise NewtonError("degenerate center: c = 0", last=x)
    if k == 1 and period is not None:
        if landing_time > 1:
            prev, _ = _k1_condition(x, landing_time - 1, period)
        else:
            prev, _ = _k1_condition(x, period, None)  # critical point periodic
        if abs(prev) < 1e-8:
            raise NewtonError("degenerate center: lower preperiod", last=x)
    return x


# ---------------------------------------------------------------------------
# Super-attracting signatures
# ---------------------------------------------------------------------------

def _orbit_with_tail(m, start, max_iter):
    """Iterate start; return (orbit, tail_index, cycle_pts) on exact periodicity."""
    orbit = [as_point(start)]
    for _ in range(max_iter):
        z = evaluate(m, orbit[-1])
        j = _periodic_tail(orbit, z)
        if j is not None:
            return orbit, j, orbit[j:]
        orbit.append(z)
    return orbit, None, None


def _first_entry(orbit, cycle_pts, eps=EPS_ENTER):
    for t, q in enumerate(orbit):
        d = min(chordal_distance(q, c) for c in cycle_pts)
        if d < eps:
            return t, d
    return None, None


def superattracting_signature(m: QuadraticRationalMap, max_iter: int = 2000):
    """Multiset of (period, #critical points on cycle, other-orbit landing time).

    Landing uses the first-entry rule: the other critical orbit lands only if
    its first visit inside the cycle's eps-neighborhood is already within the
    exact-landing tolerance.  Two maps can share super-attracting structure
    only if these signatures agree.
    """
    crits = (m.c1, m.c2)
    orbits = []
    cycles = []
    for crit in crits:
        orbit, j, pts = _orbit_with_tail(m, crit, max_iter)
        orbits.append(orbit)
        if pts is None:
            continue
        reduced = _reduce_period(list(pts))
        try:
            cyc = _refine_cycle(m, reduced[0], len(reduced))
        except CycleRefinementError:
            cyc = Cycle(tuple(reduced), len(reduced),
                        cycle_multiplier(m, reduced))
        if not cyc.is_superattracting:
            continue
        if any(all(min(chordal_distance(p, q) for q in c.points) < 1e-8
                   for p in cyc.points) and c.period == cyc.period
               for c in cycles):
            continue
        cycles.append(cyc)
    entries = []
    for cyc in cycles:
        on_cycle = [ci for ci, crit in enumerate(crits)
                    if cyc.distance_to(crit) < 1e-9]
        landing = None
        for ci, crit in enumerate(crits):
            if ci in on_cycle:
                continue
            t, d = _first_entry(orbits[ci], cyc.points)
            if t is not None and d < EXACT_TOL:
                landing = _landing_index(orbits[ci], cyc.points)
        entries.append((cyc.period, len(on_cycle),
                        -1 if landing is None else landing))
    return tuple(sorted(entries))


# ---------------------------------------------------------------------------
# Parameter scans
# ---------------------------------------------------------------------------

SCAN_BASIN_RESOLUTION = 64
SCAN_MAX_ITER = 2000
SCAN_BASIN_MAX_ITER = 4000


def _scan_cell(args):
    k, i, j, re, im, resolution, max_iter, basin_max_iter = args
    try:
        fm = family_member(k, complex(re, im))
        cl = classify_free_critical(fm, resolution=resolution,
                                    max_iter=max_iter,
                                    basin_max_iter=basin_max_iter)
        tag, ev = cl.tag, cl.evidence
    except Exception as exc:  # per-cell failures become UNRESOLVED records
        tag, ev = UNRESOLVED, {"reason": f"error: {exc}"}
    ev = {k2: v for k2, v in ev.items() if k2 != "orbit_prefix"}
    return i, j, re, im, tag, ev


def scan_parameters(window, resolution: int):
    """Row-major pixel-center parameters over the window (re0, re1, im0, im1)."""
    re0, re1, im0, im1 = window
    dre = (re1 - re0) / resolution
    dim = (im1 - im0) / resolution
    cells = []
    for i in range(resolution):
        for j in range(resolution):
            cells.append((i, j, re0 + (j + 0.5) * dre, im0 + (i + 0.5) * dim))
    return cells


def load_scan_records(path):
    records = {}
    if not os.path.exists(path):
        return records
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                records[(rec["i"], rec["j"])] = rec
            except (json.JSONDecodeError, KeyError):
                continue  # tolerate a torn final line from an interrupted run
    return records


def param_scan(k: int, window, resolution: int, out_jsonl=None, *,
               basin_resolution: int = SCAN_BASIN_RESOLUTION,
               max_iter: int = SCAN_MAX_ITER,
               basin_max_iter: int = SCAN_BASIN_MAX_ITER,
               max_workers: int | None = None):
    """Classify every grid parameter; returns (tag grid, records dict).

    Records persist to ``out_jsonl`` (one JSON object per cell, sorted by
    cell index on a fresh run); an existing file is resumed by skipping the
    cells it already contains.  Deterministic for a fixed configuration
    regardless of worker count.
    """
    if k not in (1, 2):
        raise ValueError("period not implemented")
    cells = scan_parameters(window, resolution)
    existing = load_scan_records(out_jsonl) if out_jsonl else {}
    todo = [(k, i, j, re, im, basin_resolution, max_iter, basin_max_iter)
            for (i, j, re, im) in cells if (i, j) not in existing]
    results = []
    if max_workers and max_workers > 1 and len(todo) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(_scan_cell, todo, chunksize=64))
    else:
        results = [_scan_cell(t) for t in todo]
    new_records = {}
    for i, j, re, im, tag, ev in results:
        new_records[(i, j)] = {"i": i, "j": j, "re": re, "im": im,
                               "tag": tag, "evidence": ev}
    if out_jsonl and new_records:
        with open(out_jsonl, "a", encoding="utf-8") as fh:
            for key in sorted(new_records):
                fh.write(json.dumps(new_records[key], sort_keys=True) + "\n")
    merged = dict(existing)
    merged.update({k2: v for k2, v in new_records.items()})
    tags = np.full((resolution, resolution), UNRESOLVED, dtype=object)
    for (i, j), rec in merged.items():
        if 0 <= i < resolution and 0 <= j < resolution:
            tags[i, j] = rec["tag"]
    return tags, merged
