import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from indiscernible import geometry as geo
from indiscernible import measures as ms
from indiscernible.oracle import body_integral, box_integral, monte_carlo_body_moment

X = ms.PolyDensity.coordinate
ONE = ms.PolyDensity.constant


def oracle_box(f, box):
    return float(box_integral(f, box.lo, box.hi, rtol=1e-14, atol=1e-300)[0])


# Frozen values below were produced by the quadrature oracle first and only
# then compared with the closed forms.


@pytest.mark.parametrize(
    "exps, lo, hi, expected",
    [
        ((0, 0), [0, 0], [1, 1], 1.0),
        ((3, 0), [0, 0], [1, 1], 0.25),
        ((1,), [-1], [1], 0.0),
        ((2, 1), [-1, 0.5], [2, 1.5], 3.0),
        ((8,), [1.0], [1.0 + 2.0**-30], 2.0**-30 * (1 + 4 * 2.0**-30 + 12 * 2.0**-60)),
    ],
)
def test_monomial_box_moment(exps, lo, hi, expected):
    box = geo.Cuboid(lo, hi)
    assert ms.monomial_box_moment(exps, box) == pytest.approx(expected, rel=1e-12, abs=1e-300)
    assert oracle_box(ms.PolyDensity.monomial(exps), box) == pytest.approx(expected, rel=1e-7, abs=1e-15)


def test_example_families():
    one = ONE(1)
    fam1 = ms.MeasureFamily((one - X(1, 0), X(1, 0)), ms.UNIT_CUBE)
    np.testing.assert_allclose(ms.measure_vector(fam1, geo.Cuboid([0], [0.5])), [0.375, 0.125], rtol=1e-15)

    x1, x2, one2 = X(2, 0), X(2, 1), ONE(2)
    fam2 = ms.MeasureFamily((x1 * x2, (one2 - x1) * x2, one2 - x2), ms.UNIT_CUBE)
    np.testing.assert_allclose(
        ms.measure_vector(fam2, geo.Cube([0.25, 0.25], 0.5)), [1 / 16, 1 / 16, 1 / 8], rtol=1e-15
    )
    zero = ms.PolyDensity(2, ())
    assert ms.poly_box_moment(zero, geo.Cuboid([-3, 1], [4, 9])) == 0.0


def test_unit_cube_domain_is_enforced():
    fam = ms.MeasureFamily((ONE(2),), ms.UNIT_CUBE)
    with pytest.raises(ms.DomainError):
        ms.measure_vector(fam, geo.Cuboid([0.5, 0.5], [1.5, 1.0]))
    with pytest.raises(geo.ShapeError):
        ms.measure_vector(fam, geo.Cuboid([0.5], [0.6]))


def test_exponent_cap():
    with pytest.raises(ValueError):
        ms.MonomialTerm(1.0, (9, 0))
    with pytest.raises(ValueError):
        ms.MonomialTerm(1.0, (-1,))


def test_density_arithmetic_and_evaluation():
    x, y = X(2, 0), X(2, 1)
    f = (x + y) * (x - y) * 2.0
    pts = np.array([[1.0, 2.0], [-0.5, 0.25]])
    np.testing.assert_allclose(f(pts), 2 * (pts[:, 0] ** 2 - pts[:, 1] ** 2))
    assert f.degree == 2
    assert len((x - x).terms) == 0


@pytest.mark.parametrize(
    "kind, exps, value",
    [
        ("ball", (0, 0), math.pi),
        ("ball", (2, 0), math.pi / 4),
        ("ball", (2, 2, 0), 4 * math.pi / 105),
        ("cube", (2, 4), 4 / 15),
        ("cross", (0, 0), 2.0),
        ("cross", (2, 0, 0), 2**3 * 2 / math.factorial(5)),
    ],
)
def test_body_moments(kind, exps, value):
    assert ms.body_monomial_moment(kind, exps) == pytest.approx(value, rel=1e-14)


@pytest.mark.parametrize("exps", [(0, 0), (2, 0), (2, 2)])
def test_ball_moments_against_monte_carlo(exps):
    est, se = monte_carlo_body_moment(exps, "ball", n=1_000_000, seed=11)
    assert abs(est - ms.monomial_ball_moment(exps)) < 3 * se + 1e-15


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 8), min_size=1, max_size=4).filter(lambda e: any(k % 2 for k in e)))
def test_odd_ball_moments_vanish(exps):
    for kind in ("ball", "cube", "cross"):
        assert ms.body_monomial_moment(kind, exps) == 0.0


def test_orbit_volume_and_shift_invariance():
    f = ONE(2)
    for shift in ([0, 0], [5, -3], [-100, 0.5]):
        s = geo.OrbitShape(geo.SymmetricBody("ball", 2), geo.AxisTransform([2, 3], shift))
        assert ms.orbit_moment(f, s) == pytest.approx(6 * math.pi, rel=1e-14)


@pytest.mark.parametrize("kind", ["ball", "cross", "cube"])
@pytest.mark.parametrize("d", [2, 3])
def test_orbit_moments_against_quadrature(kind, d):
    rng = np.random.default_rng(d)
    fam = ms.random_family(d, 3, 3, rng)
    scale = np.exp(rng.uniform(-0.5, 0.5, d))
    shift = rng.uniform(-1, 1, d)
    exact = ms.orbit_moments(fam, kind, scale, shift)

    def f(x):
        return np.stack([g(x) for g in fam.densities], axis=-1)

    approx = body_integral(f, kind, scale, shift, rtol=1e-9)
    np.testing.assert_allclose(exact, approx, rtol=1e-9, atol=1e-12 * np.max(np.abs(exact)))


@pytest.mark.parametrize(
    "f, box, expected",
    [
        (ONE(1), geo.Cuboid([-100], [100]), 1.0),
        (X(1, 0), geo.Cuboid([0], [100]), 0.375),
    ],
)
def test_pullback_examples(f, box, expected):
    assert ms.pulledback_box_measure(f, box, 1.0) == pytest.approx(expected, rel=1e-12)


def test_pullback_is_measure_of_image_box():
    f = X(2, 0) * X(2, 1) + ONE(2)
    box = geo.Cuboid([-1.5, -0.3], [1.5, 0.3])
    image = geo.Cuboid(ms.logistic(box.lo, 2.0), ms.logistic(box.hi, 2.0))
    assert ms.pulledback_box_measure(f, box, 2.0) == pytest.approx(ms.poly_box_moment(f, image), rel=1e-15)
    np.testing.assert_allclose(ms.logit(ms.logistic(box.lo, 2.0), 2.0), box.lo, rtol=1e-12)


@pytest.mark.parametrize(
    "f, box, axis, expected",
    [
        (ONE(2), geo.Cuboid([0, 0], [1, 1]), 0, {(0,): 1.0}),
        (X(2, 0) * X(2, 1), geo.Cuboid([0, 0], [1, 1]), 0, {(1,): 0.5}),
        (X(2, 1, 2), geo.Cuboid([0, -1], [2, 1]), 0, {(0,): 2 / 3}),
    ],
)
def test_axis_marginal_examples(f, box, axis, expected):
    g = ms.axis_marginal(f, box, axis)
    got = {t.exponents: t.coeff for t in g.terms}
    assert got.keys() == expected.keys()
    for k, v in expected.items():
        assert got[k] == pytest.approx(v, rel=1e-15)


coords = st.floats(-5, 5, allow_nan=False)
widths = st.floats(1e-2, 5, allow_nan=False)


@st.composite
def density_and_box(draw, max_d=3):
    d = draw(st.integers(1, max_d))
    n = draw(st.integers(1, 4))
    terms = tuple(
        ms.MonomialTerm(draw(st.floats(-3, 3, allow_nan=False)), tuple(draw(st.integers(0, 4)) for _ in range(d)))
        for _ in range(n)
    )
    lo = np.array([draw(coords) for _ in range(d)])
    hi = lo + [draw(widths) for _ in range(d)]
    return ms.PolyDensity(d, terms), geo.Cuboid(lo, hi)


def _term_scale(f, box):
    exps, coeffs = f.arrays
    if not len(coeffs):
        return 0.0
    return float(np.sum(np.abs(coeffs) * np.prod(np.abs(ms.power_diff(box.lo, box.hi, exps)), axis=-1)))


@settings(max_examples=200, deadline=None)
@given(density_and_box(), st.data())
def test_marginal_integrates_to_moment(fb, data):
    f, box = fb
    axis = data.draw(st.integers(0, box.dim - 1))
    g = ms.axis_marginal(f, box, axis)
    one_d = ms.poly_box_moment(g, geo.Cuboid(box.lo[[axis]], box.hi[[axis]]))
    assert abs(one_d - ms.poly_box_moment(f, box)) <= 1e-12 * max(_term_scale(f, box), 1e-300)


def test_additivity_under_splits():
    rng = np.random.default_rng(3)
    fam = ms.random_family(3, 4, 4, rng)
    n = 10_000
    lo = rng.uniform(-5, 5, size=(n, 3))
    hi = lo + rng.uniform(0.01, 5, size=(n, 3))
    axis = rng.integers(0, 3, size=n)
    t = rng.uniform(0, 1, size=n)
    rows = np.arange(n)
    cut = lo[rows, axis] + t * (hi[rows, axis] - lo[rows, axis])
    hi_left, lo_right = hi.copy(), lo.copy()
    hi_left[rows, axis] = cut
    lo_right[rows, axis] = cut
    whole = ms.box_moments(fam, lo, hi)
    parts = ms.box_moments(fam, lo, hi_left) + ms.box_moments(fam, lo_right, hi)
    abs_fam = ms.MeasureFamily(
        tuple(ms.PolyDensity(3, tuple(ms.MonomialTerm(abs(c.coeff), c.exponents) for c in f.terms)) for f in fam.densities)
    )
    # a scale immune to cancellation between signed terms
    scale = np.abs(ms.box_moments(abs_fam, np.zeros_like(lo), np.maximum(np.abs(lo), np.abs(hi))))
    assert np.all(np.abs(whole - parts) <= 1e-12 * np.maximum(np.abs(whole), scale) * 2**3)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(0.1, 10), min_size=1, max_size=3),
    st.lists(st.floats(-10, 10), min_size=3, max_size=3),
    st.lists(st.floats(-5, 5), min_size=3, max_size=3),
)
def test_volume_covariance(scale, shift, lo):
    d = len(scale)
    box = geo.Cuboid(lo[:d], np.array(lo[:d]) + 1.0)
    t = geo.AxisTransform(scale, shift[:d])
    image = geo.Cuboid(t(box.lo), t(box.hi))
    assert ms.poly_box_moment(ONE(d), image) == pytest.approx(np.prod(scale) * box.volume, rel=1e-12)
    moved = geo.Cuboid(box.lo + shift[:d], box.hi + shift[:d])
    assert ms.poly_box_moment(ONE(d), moved) == pytest.approx(box.volume, rel=1e-12)


def test_oracle_equivalence_sample():
    rng = np.random.default_rng(21)
    worst = 0.0
    for _ in range(200):
        d = int(rng.integers(1, 4))
        exps = ms.monomial_exponents(d, 4)
        pick = rng.choice(len(exps), size=3, replace=False)
        f = ms.PolyDensity(d, tuple(ms.MonomialTerm(rng.standard_normal(), exps[i]) for i in pick))
        lo = rng.uniform(-5, 5, d)
        box = geo.Cuboid(lo, lo + rng.uniform(0.01, 5, d))
        exact = ms.poly_box_moment(f, box)
        worst = max(worst, abs(exact - oracle_box(f, box)) / max(abs(exact), 1e-12 * _term_scale(f, box)))
    assert worst < 1e-9


@pytest.mark.parametrize("family, dom", [("cube", ms.FULL), ("cuboid", ms.FULL), ("cuboid", ms.Domain("pulled-back", 1.5))])
def test_moment_map_jacobian_matches_differences(family, dom):
    rng = np.random.default_rng(0)
    fam = ms.random_family(2, 3, 3, rng, domain=dom)
    x = rng.uniform(-0.5, 0.5, geo.param_count(family, 2))
    J = ms.moment_map_jacobian(fam, family, x)
    h = 1e-6
    fd = np.stack(
        [(ms.moment_map(fam, family, x + h * e) - ms.moment_map(fam, family, x - h * e)) / (2 * h) for e in np.eye(x.size)],
        axis=-1,
    )
    np.testing.assert_allclose(J, fd, rtol=1e-6, atol=1e-8)


def test_json_round_trips():
    fam = ms.random_family(2, 3, 2, np.random.default_rng(5), domain=ms.Domain("pulled-back", 0.5))
    back = ms.family_from_json(ms.family_to_json(fam))
    assert back.domain == fam.domain
    box = geo.Cuboid([-0.5, 0.1], [0.2, 0.9])
    np.testing.assert_array_equal(ms.measure_vector(back, box), ms.measure_vector(fam, box))
    with pytest.raises(ValueError):
        ms.density_from_json({"dim": 1})
    with pytest.raises(ValueError):
        ms.domain_from_json("sphere")
