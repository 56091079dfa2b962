import cmath
import math

import numpy as np
import pytest

from reglue_kit.curves import (
    Curve,
    curve_from_values,
    hausdorff_distance,
    is_simple,
    point_polyline_chordal,
    refine_curve,
    segment,
)
from reglue_kit.cuts import (
    CutFamily,
    InitialCutError,
    PullbackError,
    build_cut_complex,
    build_cut_family,
    complement_description,
    initial_cut,
    preimage_component_count_bruteforce,
    pullback_curve,
)
from reglue_kit.sphere import (
    INFINITY,
    SpherePoint,
    chordal_distance,
    evaluate,
    family_member,
    preimages,
)

SQUARING = family_member(1, 0).map


def _real_segment(a, b):
    return segment(complex(a), complex(b))


def _match_arcs(got, analytic, tol):
    """Greedy Hausdorff matching of computed arcs against analytic ones."""
    assert len(got) == len(analytic)
    remaining = list(analytic)
    for arc in got:
        dists = [hausdorff_distance(arc, ref) for ref in remaining]
        k = int(np.argmin(dists))
        assert dists[k] < tol, f"no analytic partner within {tol}: {min(dists)}"
        remaining.pop(k)


class TestPullback:
    def test_generic_real_segment(self):
        arcs = pullback_curve(SQUARING, _real_segment(1, 4))
        assert len(arcs) == 2
        _match_arcs(arcs, [_real_segment(1, 2), _real_segment(-1, -2)], 1e-9)

    def test_critical_value_endpoint_merges(self):
        arcs = pullback_curve(SQUARING, _real_segment(0, 1))
        assert len(arcs) == 1
        _match_arcs(arcs, [refine_curve(_real_segment(-1, 1), 0.05)], 1e-9)
        # passes through the critical point
        assert point_polyline_chordal(0j, arcs[0]) < 1e-12

    def test_per2_tiny_arc_two_branches(self):
        m = family_member(2, 2).map
        w0 = complex(0.7, 0.4)
        arcs = pullback_curve(m, segment(w0, w0 + 0.05))
        assert len(arcs) == 2
        for arc in arcs:
            for p in arc.vertices:
                assert chordal_distance(evaluate(m, p), w0) < 0.2

    def test_interior_critical_value_rejected(self):
        with pytest.raises(PullbackError, match="interior critical value"):
            pullback_curve(SQUARING, _real_segment(-1, 1))

    def test_reprojection_residuals(self):
        m = family_member(2, complex(1.5, 0.7)).map
        gamma = curve_from_values([0.5, 0.5 + 0.2j, 0.7 + 0.3j])
        for arc in pullback_curve(m, gamma):
            for p in arc.vertices:
                assert point_polyline_chordal(
                    evaluate(m, p), refine_curve(gamma, 0.05)) < 1e-9

    def test_pole_values_pass_through_infinity(self):
        # preimages of a segment through w = infinity are handled chordally
        m = family_member(1, 1).map
        big = segment(complex(1e7), complex(4e7))
        arcs = pullback_curve(m, big)
        assert len(arcs) == 2


class TestInitialCut:
    def test_squaring_map(self):
        Z = initial_cut(SQUARING, _real_segment(0, 1))
        assert hausdorff_distance(Z, _real_segment(-1, 1)) < 1e-9
        assert point_polyline_chordal(0j, Z) < 1e-12

    def test_rejects_wrong_start(self):
        with pytest.raises(InitialCutError):
            initial_cut(SQUARING, _real_segment(1, 4))

    def test_per2_off_center(self):
        a = complex(2, 0.1)
        m = family_member(2, a).map
        v = -a  # f(-1) = a/(1-2)
        assert chordal_distance(evaluate(m, -1 + 0j), v) < 1e-14
        beta = segment(v, v - 0.3)
        Z = initial_cut(m, beta)
        assert point_polyline_chordal(-1 + 0j, Z) < 1e-7
        assert is_simple(Z)


class TestCutFamily:
    def test_depth_zero(self):
        Z = _real_segment(-1, 1)
        cf = build_cut_family(SQUARING, Z, 0)
        assert cf.depth == 0 and len(cf.levels[0]) == 1

    def test_depth_one_plus_sign(self):
        Z = _real_segment(-1, 1)
        cf = build_cut_family(SQUARING, Z, 1)
        assert len(cf.levels[1]) == 2
        horizontal = refine_curve(_real_segment(-1, 1), 0.05)
        vertical = refine_curve(segment(-1j, 1j), 0.05)
        _match_arcs(cf.levels[1], [horizontal, vertical], 1e-9)

    def test_depth_two_spokes(self):
        Z = _real_segment(-1, 1)
        cf = build_cut_family(SQUARING, Z, 2)
        assert len(cf.levels[2]) == 4
        diameters = []
        for ang in (0, math.pi / 4, math.pi / 2, 3 * math.pi / 4):
            u = cmath.exp(1j * ang)
            diameters.append(refine_curve(segment(-u, u), 0.05))
        _match_arcs(cf.levels[2], diameters, 1e-8)

    def test_parent_reprojection_invariant(self):
        a = complex(2, 0.1)
        m = family_member(2, a).map
        Z = initial_cut(m, segment(-a, -a - 0.3))
        cf = build_cut_family(m, Z, 2)
        for n in range(1, cf.depth + 1):
            for idx, arc in enumerate(cf.levels[n]):
                parent = cf.levels[n - 1][cf.parents[n][idx]]
                for p in arc.vertices:
                    assert point_polyline_chordal(evaluate(m, p), parent) < 1e-6


class TestCutComplex:
    def test_depth_zero_single_arc(self):
        cf = build_cut_family(SQUARING, _real_segment(-1, 1), 0)
        cx = build_cut_complex(cf)
        assert len(cx.arcs) == 1
        assert cx.arcs[0].side_transition is None
        assert cx.level_stats[0].arc_count == 1

    def test_plus_sign_intersections(self):
        cf = build_cut_family(SQUARING, _real_segment(-1, 1), 1)
        cx = build_cut_complex(cf)
        assert cx.level_stats[1].intersection_count == 1
        assert cx.all_disjoint is False

    def test_disjoint_family_reported(self):
        a = complex(2, 0.1)
        m = family_member(2, a).map
        Z = initial_cut(m, segment(-a, -a - 0.25))
        cf = build_cut_family(m, Z, 2)
        cx = build_cut_complex(cf)
        # arc counts follow the critical-value incidence law level by level
        for n in range(1, cf.depth + 1):
            expected = 0
            for arc in cf.levels[n - 1]:
                from reglue_kit.cuts import split_at_critical_values
                for piece in split_at_critical_values(m, arc):
                    inc = sum(
                        1 for e in (piece.start, piece.end)
                        for v in (evaluate(m, m.c1), evaluate(m, m.c2))
                        if chordal_distance(e, v) < 1e-9)
                    expected += 2 - min(inc, 1) if inc <= 1 else 1
            assert cx.level_stats[n].arc_count == expected

    def test_side_transition_composition(self):
        # Orientation signs are local: for a folded arc the two halves induce
        # opposite traversals of the parent, so anchor every sign at one
        # shared sample point when composing child -> parent -> grandparent.
        from reglue_kit.curves import parameter_along
        from reglue_kit.cuts import orientation_at
        cf = build_cut_family(SQUARING, _real_segment(-1, 1), 2)
        m = SQUARING
        checked = 0
        for idx, arc in enumerate(cf.levels[2]):
            parent = cf.levels[1][cf.parents[2][idx]]
            grand = cf.levels[0][cf.parents[1][cf.parents[2][idx]]]
            for i in range(len(arc.vertices) - 1):
                sign_child = orientation_at(m, arc, parent, i)
                if not sign_child:
                    continue
                y = evaluate(m, arc.vertices[i])
                # the parent's orientation measured near y
                dists = [chordal_distance(y, q) for q in parent.vertices[:-1]]
                j = int(np.argmin(dists))
                # stay away from the parent's own fold (the critical point 0)
                if chordal_distance(parent.vertices[j], 0j) < 0.3:
                    continue
                sign_parent = orientation_at(m, parent, grand, j)
                if not sign_parent:
                    continue
                qa = evaluate(m, evaluate(m, arc.vertices[i]))
                qb = evaluate(m, evaluate(m, arc.vertices[i + 1]))
                sa, sb = parameter_along(grand, qa), parameter_along(grand, qb)
                if abs(sb - sa) <= 1e-12:
                    continue
                direct = 1 if sb > sa else -1
                assert sign_child * sign_parent == direct
                checked += 1
                break
        assert checked >= 3


class TestComplement:
    def test_single_arc_does_not_separate(self):
        cf = build_cut_family(SQUARING, _real_segment(-1, 1), 0)
        out = complement_description(cf, 0, 128)
        assert out.component_count == 1

    def test_plus_sign_tree_does_not_separate(self):
        cf = build_cut_family(SQUARING, _real_segment(-1, 1), 1)
        out = complement_description(cf, 1, 128)
        assert out.component_count == 1

    def test_closed_curve_separates(self):
        circle = curve_from_values(
            [0.8 * cmath.exp(2j * math.pi * t / 64) for t in range(65)])
        cf = CutFamily(SQUARING, [[circle]], [[-1]], 0.05)
        out = complement_description(cf, 0, 128)
        assert out.component_count == 2

    def test_too_coarse_rejected(self):
        cf = build_cut_family(SQUARING, _real_segment(-1, 1), 0)
        with pytest.raises(ValueError, match="too coarse"):
            complement_description(cf, 0, 32)

    def test_disjoint_arcs_single_component(self):
        rng = np.random.default_rng(2)
        arcs = []
        for base in (-0.8 - 0.5j, 0.2 + 0.4j, 0.9 - 0.6j):
            d = cmath.exp(2j * math.pi * rng.random())
            arcs.append(segment(base, base + 0.25 * d))
        cf = CutFamily(SQUARING, [arcs], [[-1] * 3], 0.05)
        out = complement_description(cf, 0, 128)
        assert out.component_count == 1


class TestArcCountLaw:
    def test_against_bruteforce_oracle(self):
        rng = np.random.default_rng(41)
        checked = 0
        while checked < 30:
            k = int(rng.integers(1, 3))
            param = complex(*rng.normal(scale=0.8, size=2))
            if k == 2 and abs(param) < 0.2:
                continue
            m = family_member(k, param).map
            cvs = [evaluate(m, c) for c in (m.c1, m.c2)]
            finite_cvs = [v for v in cvs if not v.is_infinity]
            critical_endpoint = bool(rng.integers(0, 2)) and finite_cvs
            if critical_endpoint:
                v = finite_cvs[int(rng.integers(0, len(finite_cvs)))]
                start = v.z
            else:
                start = complex(*rng.normal(scale=1.0, size=2))
                if min(chordal_distance(start, v) for v in cvs) < 0.25:
                    continue
            direction = cmath.exp(2j * math.pi * rng.random())
            gamma = segment(start, start + 0.12 * direction)
            # interior must stay away from every critical value
            interior_bad = False
            for v in cvs:
                d = point_polyline_chordal(v, gamma)
                if d < 0.05 and chordal_distance(v, gamma.start) > 1e-12:
                    interior_bad = True
            if interior_bad:
                continue
            expected = 1 if critical_endpoint else 2
            got = len(pullback_curve(m, gamma))
            brute = preimage_component_count_bruteforce(m, gamma)
            assert got == expected == brute
            checked += 1
