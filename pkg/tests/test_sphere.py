import cmath
import math

import numpy as np
import pytest

from reglue_kit.sphere import (
    INFINITY,
    DegenerateMapError,
    MobiusTransformation,
    SpherePoint,
    chordal_distance,
    conjugate_map,
    critical_points,
    cycle_multiplier,
    evaluate,
    family_member,
    local_jet,
    preimages,
    rational_map,
    solve_quadratic,
)


def test_chordal_basics():
    assert chordal_distance(0, 0) == 0.0
    assert chordal_distance(0, INFINITY) == pytest.approx(2.0)
    # by hand: 2*2 / sqrt(2*2) = 2
    assert chordal_distance(1, -1) == pytest.approx(2.0)
    assert chordal_distance(INFINITY, INFINITY) == 0.0


def test_chordal_symmetry_triangle_and_range():
    rng = np.random.default_rng(7)
    pts = [SpherePoint(complex(a, b)) for a, b in rng.normal(scale=3, size=(40, 2))]
    pts += [INFINITY, SpherePoint(0j), SpherePoint(complex(1e9))]
    for i, p in enumerate(pts):
        for q in pts[i:]:
            d = chordal_distance(p, q)
            assert 0.0 <= d <= 2.0
            assert d == pytest.approx(chordal_distance(q, p))
    for p in pts[:12]:
        for q in pts[:12]:
            for r in pts[:12]:
                assert chordal_distance(p, r) <= (
                    chordal_distance(p, q) + chordal_distance(q, r) + 1e-12
                )


def test_chordal_large_modulus_no_overflow():
    assert chordal_distance(1e200, INFINITY) == pytest.approx(0.0, abs=1e-100)
    assert chordal_distance(1e8, 1e8) == 0.0


def test_solve_quadratic_examples():
    r = solve_quadratic(1, 0, -4)
    assert {p.z for p in r} == {2, -2}
    r = solve_quadratic(0, 1, -3)
    assert r[0].z == 3 and r[1].is_infinity
    r = solve_quadratic(1, -2, 1)
    assert r[0].z == pytest.approx(1) and r[1].z == pytest.approx(1)


def test_solve_quadratic_degenerate():
    with pytest.raises(ValueError, match="degenerate"):
        solve_quadratic(0, 0, 0)
    # two roots at infinity when only the constant survives
    r = solve_quadratic(0, 0, 5)
    assert r[0].is_infinity and r[1].is_infinity


def test_solve_quadratic_residuals():
    rng = np.random.default_rng(3)
    for _ in range(300):
        a, b, c = (complex(x, y) for x, y in rng.normal(size=(3, 2)))
        for root in solve_quadratic(a, b, c):
            if root.is_infinity:
                continue
            r = root.z
            resid = abs(a * r * r + b * r + c)
            bound = 1e-10 * max(abs(a), abs(b), abs(c)) * (1 + abs(r)) ** 2
            assert resid < bound


def test_evaluate_examples():
    f = family_member(1, 0).map
    assert evaluate(f, 3).z == pytest.approx(9)
    g = family_member(2, 2).map
    assert evaluate(g, INFINITY).z == 0
    assert evaluate(g, 0).is_infinity


def test_evaluate_pole_and_infinity_conventions():
    g = family_member(2, 2).map
    # second pole of 2/(z^2+2z)
    assert evaluate(g, -2).is_infinity
    f = family_member(1, 1j).map
    assert evaluate(f, INFINITY).is_infinity
    assert evaluate(f, 1e9).z == pytest.approx(1e18, rel=1e-9)


def test_critical_points_examples():
    f = family_member(1, 0.5).map
    cp = critical_points(f)
    assert cp[0].z == 0 and cp[1].is_infinity
    g = family_member(2, 2).map
    cp = critical_points(g)
    assert cp[0].z == pytest.approx(-1) and cp[1].is_infinity


def test_critical_points_mobius_equivariance():
    rng = np.random.default_rng(11)
    f = family_member(1, complex(-0.3, 0.4)).map
    count = 0
    while count < 100:
        a, b, c, d = (complex(x, y) for x, y in rng.normal(size=(4, 2)))
        try:
            M = MobiusTransformation(a, b, c, d)
        except DegenerateMapError:
            continue
        count += 1
        g = conjugate_map(f, M)
        got = critical_points(g)
        want = [M(p) for p in critical_points(f)]
        # match as unordered pairs
        d1 = max(chordal_distance(got[0], want[0]), chordal_distance(got[1], want[1]))
        d2 = max(chordal_distance(got[0], want[1]), chordal_distance(got[1], want[0]))
        assert min(d1, d2) < 1e-9


def test_preimages_examples():
    f = family_member(1, 0).map
    r = preimages(f, 4)
    assert {round(p.z.real) for p in r} == {2, -2}
    r = preimages(f, 0)
    assert r[0].z == 0 and r[1].z == 0
    g = family_member(2, 2).map
    r = preimages(g, INFINITY)
    assert sorted(p.z.real for p in r) == [-2, 0]


def test_preimage_residual_property():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        k = int(rng.integers(1, 3))
        param = complex(*rng.normal(scale=1.5, size=2))
        if k == 2 and abs(param) < 1e-3:
            param += 1.0
        m = family_member(k, param).map
        w = SpherePoint(complex(*rng.normal(scale=2.0, size=2)))
        for p in preimages(m, w):
            assert chordal_distance(evaluate(m, p), w) < 1e-10


def test_per2_membership_invariant():
    rng = np.random.default_rng(13)
    for _ in range(100):
        a = complex(*rng.normal(scale=2.0, size=2))
        if a == 0:
            a = 1.0
        fm = family_member(2, a)
        m = fm.map
        assert evaluate(m, INFINITY).z == 0
        assert evaluate(m, 0).is_infinity
        cp = critical_points(m)
        assert cp[1].is_infinity and cp[0].z == pytest.approx(-1, abs=1e-14)
        mult = cycle_multiplier(m, fm.marked_cycle())
        assert abs(mult) <= 1e-12


def test_family_member_examples_and_errors():
    fm = family_member(1, -1)
    assert fm.map.c1.is_infinity and fm.map.c2.z == 0
    assert evaluate(fm.map, INFINITY).is_infinity
    fm2 = family_member(2, 2)
    assert evaluate(fm2.map, INFINITY).z == 0
    assert evaluate(fm2.map, 0).is_infinity
    with pytest.raises(ValueError, match="degenerate parameter"):
        family_member(2, 0)
    with pytest.raises(ValueError, match="period not implemented"):
        family_member(3, 1)


def test_rational_map_rejects_degenerate():
    with pytest.raises(DegenerateMapError):
        rational_map((0, 0, 1), (0, 0, 2))  # z^2 / 2z^2: common roots
    with pytest.raises(DegenerateMapError):
        rational_map((1, 1, 0), (1, 0, 0))  # degree 1
    with pytest.raises(DegenerateMapError):
        rational_map((0, 1, 1), (0, 1, 1))


def test_mobius_group_laws():
    rng = np.random.default_rng(17)
    for _ in range(50):
        a, b, c, d = (complex(x, y) for x, y in rng.normal(size=(4, 2)))
        e, f, g, h = (complex(x, y) for x, y in rng.normal(size=(4, 2)))
        try:
            M = MobiusTransformation(a, b, c, d)
            N = MobiusTransformation(e, f, g, h)
        except DegenerateMapError:
            continue
        assert M.compose(M.inverse()).almost_equal(MobiusTransformation.identity())
        assert M.compose(N).inverse().almost_equal(N.inverse().compose(M.inverse()))
        p = SpherePoint(complex(*rng.normal(size=2)))
        assert chordal_distance(M.compose(N)(p), M(N(p))) < 1e-9


def test_local_jet_matches_finite_differences():
    m = family_member(1, complex(-0.2, 0.3)).map
    z0 = complex(0.4, -0.1)
    d1, d2half = local_jet(m, z0)
    h = 1e-5
    f = lambda z: evaluate(m, z).z
    fd1 = (f(z0 + h) - f(z0 - h)) / (2 * h)
    fd2 = (f(z0 + h) - 2 * f(z0) + f(z0 - h)) / (h * h)
    assert d1 == pytest.approx(fd1, rel=1e-8)
    assert d2half == pytest.approx(fd2 / 2, rel=1e-4)


def test_cycle_multiplier_marked_cycles_exact_zero():
    assert cycle_multiplier(family_member(1, 0.3).map, (INFINITY,)) == 0
    fm = family_member(2, complex(1.7, -0.4))
    assert cycle_multiplier(fm.map, fm.marked_cycle()) == 0


def test_cycle_multiplier_finite_cycle():
    # z^2 - 1: super-attracting 2-cycle {0, -1}; derivative product 2*0 * 2*(-1) = 0
    m = family_member(1, -1).map
    pts = (SpherePoint(0j), SpherePoint(complex(-1)))
    assert abs(cycle_multiplier(m, pts)) == 0
    # z^2 - 0.5 fixed point (1 - sqrt 3)/2 has multiplier 1 - sqrt 3
    m = family_member(1, -0.5).map
    z = (1 - math.sqrt(3)) / 2
    mult = cycle_multiplier(m, (SpherePoint(complex(z)),))
    assert mult == pytest.approx(2 * z, rel=1e-12)
