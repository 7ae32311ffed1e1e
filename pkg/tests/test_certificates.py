import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from indiscernible import certificates as cert
from indiscernible import geometry as geo
from indiscernible.measures import FULL, Domain, MonomialTerm, PolyDensity, measure_vector


def moments(kind, shape):
    return measure_vector(cert.family_densities(kind), shape)


@pytest.mark.parametrize(
    "kind, d, size",
    [
        ("interval-pair", 1, 2),
        ("cube-sequential", 1, 2),
        ("cube-sequential", 3, 4),
        ("cuboid-cubic", 2, 4),
        ("cuboid-quadratic", 3, 6),
        ("orbit-quadratic", 2, 4),
    ],
)
def test_family_sizes(kind, d, size):
    k = cert.CertificateKind(kind, d, "ball")
    assert cert.family_densities(k).size == size == k.size


def test_cube_sequential_densities_sum_to_one():
    fam = cert.family_densities(cert.CertificateKind("cube-sequential", 3))
    x = np.random.default_rng(0).uniform(0, 1, size=(50, 3))
    np.testing.assert_allclose(sum(f(x) for f in fam.densities), 1.0, rtol=1e-14)


def test_bad_kind():
    with pytest.raises(ValueError, match="kind"):
        cert.CertificateKind("cuboid-quartic", 2)
    with pytest.raises(ValueError, match="d"):
        cert.CertificateKind("interval-pair", 2)


class TestQuadratic:
    def test_example(self):
        box = geo.Cuboid([0, 0], [1, 2])
        m = moments(cert.CertificateKind("cuboid-quadratic", 2), box)
        r = cert.reconstruct_cuboid_quadratic(m, 2)
        assert r.status == "exact" and r.residual < 1e-14
        np.testing.assert_allclose(r.shape.lo, box.lo, atol=1e-14)
        np.testing.assert_allclose(r.shape.hi, box.hi, atol=1e-14)

    @pytest.mark.parametrize("m, err", [([0.0, 0, 0, 0], cert.InvalidVolume), ([1.0, 0, 0, -1], cert.InfeasibleMoments)])
    def test_errors(self, m, err):
        with pytest.raises(err):
            cert.reconstruct_cuboid_quadratic(m, 2)

    def test_wrong_length(self):
        with pytest.raises(ValueError, match="moments"):
            cert.reconstruct_cuboid_quadratic([1, 2, 3], 2)


class TestCubic:
    def test_example_box(self):
        box = geo.Cuboid([0.2, 0.1], [0.7, 0.9])
        r = cert.reconstruct_cuboid_cubic(moments(cert.CertificateKind("cuboid-cubic", 2), box), 2)
        np.testing.assert_allclose(np.r_[r.shape.lo, r.shape.hi], [0.2, 0.1, 0.7, 0.9], atol=1e-10)

    def test_symmetric_box_is_ambiguous(self):
        kind = cert.CertificateKind("cuboid-cubic", 2, domain=FULL)
        r = cert.reconstruct(kind, moments(kind, geo.Cuboid([-1, 0], [1, 1])))
        assert r.status == "ambiguous" and r.shape is None

    def test_one_dimensional(self):
        r = cert.reconstruct_cuboid_cubic([1.0, 0.5], 1)
        np.testing.assert_allclose([r.shape.lo[0], r.shape.hi[0]], [0, 1], atol=1e-15)

    def test_negative_discriminant(self):
        # s = 1 and q = 0.25 would need (b - a)^2 = 2q - s^2 < 0
        with pytest.raises(cert.InfeasibleMoments):
            cert.reconstruct_cuboid_cubic([1.0, 0.5, 0.5, 0.0625], 2)

    def test_pulled_back_domain(self):
        dom = Domain("pulled-back", 1.0)
        kind = cert.CertificateKind("cuboid-cubic", 2, domain=dom)
        box = geo.Cuboid([-2.0, 0.5], [1.0, 3.0])
        r = cert.reconstruct(kind, moments(kind, box))
        np.testing.assert_allclose(np.r_[r.shape.lo, r.shape.hi], np.r_[box.lo, box.hi], rtol=1e-9)


class TestCubeSequential:
    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_round_trip(self, d):
        rng = np.random.default_rng(d)
        kind = cert.CertificateKind("cube-sequential", d)
        for i in range(25):
            edge = rng.uniform(0.01, 1)
            c = geo.Cube(rng.uniform(0, 1 - edge, d), edge)
            r = cert.reconstruct_cube_numeric(moments(kind, c), d, cert.ReconstructConfig(seed=i))
            assert r.status == "numeric"
            np.testing.assert_allclose(np.r_[r.shape.anchor, r.shape.edge], np.r_[c.anchor, c.edge], atol=1e-8)

    def test_impossible_moments_fail(self):
        with pytest.raises(cert.ReconstructionFailed):
            cert.reconstruct_cube_numeric([1e-3, 5.0, 1e-3], 2, cert.ReconstructConfig(n_starts=4))


@pytest.mark.parametrize("body", ["ball", "cross", "cube"])
@pytest.mark.parametrize("d", [1, 2, 3])
def test_orbit_round_trip(body, d):
    rng = np.random.default_rng(d)
    kind = cert.CertificateKind("orbit-quadratic", d, body)
    for _ in range(50):
        t = geo.AxisTransform(np.exp(rng.uniform(-1, 1, d)), rng.uniform(-2, 2, d))
        m = moments(kind, geo.OrbitShape(geo.SymmetricBody(body, d), t))
        r = cert.reconstruct(kind, m)
        np.testing.assert_allclose(np.r_[r.shape.scale, r.shape.shift], np.r_[t.scale, t.shift], rtol=1e-10, atol=1e-12)


def test_interval_pair():
    r = cert.reconstruct_interval_pair(moments(cert.CertificateKind("interval-pair", 1), geo.Cuboid([0.25], [0.5])))
    np.testing.assert_allclose([r.shape.lo[0], r.shape.hi[0]], [0.25, 0.5], atol=1e-15)


class TestLemma:
    one = PolyDensity.constant(1)

    @pytest.mark.parametrize("m1, m2, ab", [(0, 2 / 3, (1, 0)), (2, 2 + 2 / 3, (1, 1))])
    def test_examples(self, m1, m2, ab):
        np.testing.assert_allclose(cert.solve_lemma_moment(self.one, (-1, 1), m1, m2), ab, atol=1e-15)

    def test_degenerate(self):
        with pytest.raises(cert.NoIncreasingSolution):
            cert.solve_lemma_moment(self.one, (-1, 1), 0, 0)

    @pytest.mark.parametrize(
        "alpha",
        [
            PolyDensity(1, (MonomialTerm(1.0, (1,)), MonomialTerm(2.0, (0,)))),  # odd part
            PolyDensity(1, (MonomialTerm(1.0, (2,)), MonomialTerm(-0.5, (0,)))),  # negative near 0
            PolyDensity(2, (MonomialTerm(1.0, (0, 0)),)),
        ],
    )
    def test_preconditions(self, alpha):
        with pytest.raises(cert.LemmaPreconditionError):
            cert.solve_lemma_moment(alpha, (-1, 1), 0.0, 1.0)

    @settings(max_examples=200, deadline=None)
    @given(
        st.floats(-3, 3),
        st.floats(0.1, 3),
        st.lists(st.floats(0, 2), min_size=1, max_size=3),
        st.floats(0.1, 5),
        st.floats(-5, 5),
    )
    def test_recovers_linear_map(self, r, h, even, a, b):
        # alpha(x) = c0 + c1 (x-r)^2 + c2 (x-r)^4, nonnegative and even about r
        shift = PolyDensity(1, (MonomialTerm(1.0, (1,)), MonomialTerm(-r, (0,))))
        alpha = PolyDensity.constant(1, 0.5)
        y2 = shift * shift
        power = PolyDensity.constant(1)
        for c in even:
            power = power * y2
            alpha = alpha + power * c
        u = PolyDensity(1, (MonomialTerm(a, (1,)), MonomialTerm(b, (0,))))
        box = geo.Cuboid([r - h], [r + h])
        from indiscernible.measures import poly_box_moment

        m1 = poly_box_moment(u * alpha, box)
        m2 = poly_box_moment(u * u * alpha, box)
        got = cert.solve_lemma_moment(alpha, (r - h, r + h), m1, m2)
        np.testing.assert_allclose(got, (a, b), rtol=1e-8, atol=1e-8)


@pytest.mark.parametrize("kind", ["interval-pair", "cuboid-quadratic"])
def test_injectivity_audit(kind):
    d = 1 if kind == "interval-pair" else 2
    rep = cert.verify_injectivity_sampling(cert.CertificateKind(kind, d), 10_000, 7)
    assert rep.pairs_tested == 10_000 and rep.min_gap > 0
    assert np.all(rep.separations >= 1e-3)
    again = cert.verify_injectivity_sampling(cert.CertificateKind(kind, d), 10_000, 7)
    assert cert.report_to_json(again) == cert.report_to_json(rep)


def test_injectivity_audit_rejects_zero_pairs():
    with pytest.raises(ValueError):
        cert.verify_injectivity_sampling(cert.CertificateKind("interval-pair", 1), 0, 0)


class TestRank:
    def test_quadratic_full_rank(self):
        r = cert.jacobian_rank(cert.CertificateKind("cuboid-quadratic", 2), geo.Cuboid([0, 0], [1, 2]))
        assert r.full_rank and r.singular_values.size == 4 and r.analytic_mismatch < 1e-6

    def test_symmetric_cubic_rank_drops(self):
        kind = cert.CertificateKind("cuboid-cubic", 2, domain=FULL)
        assert not cert.jacobian_rank(kind, geo.Cuboid([-1, 0], [1, 1])).full_rank

    def test_too_few_measures(self):
        fam = cert.family_densities(cert.CertificateKind("cuboid-quadratic", 2)).prefix(3)
        r = cert.jacobian_rank(fam, geo.Cuboid([0, 0], [1, 2]), family="cuboid")
        assert not r.full_rank and r.singular_values[-1] == 0.0

    def test_boundary_rejected(self):
        with pytest.raises(ValueError, match="shape"):
            cert.jacobian_rank(cert.CertificateKind("cube-sequential", 2), geo.Cube([0, 0.2], 0.5))


@pytest.mark.parametrize(
    "m, d, anchor, edge",
    [([1 / 16, 1 / 16, 1 / 8], 2, [0.25, 0.25], 0.5), ([0.25, 0.25], 1, [0.25], 0.5)],
)
def test_cube_numeric_examples(m, d, anchor, edge):
    r = cert.reconstruct_cube_numeric(m, d)
    np.testing.assert_allclose(np.r_[r.shape.anchor, r.shape.edge], np.r_[anchor, edge], atol=1e-12)


def test_quadratic_small_examples():
    r = cert.reconstruct_cuboid_quadratic([1.0, 0.0], 1)
    assert (r.shape.lo[0], r.shape.hi[0]) == (-0.5, 0.5)
    np.testing.assert_allclose(cert.reconstruct_cuboid_quadratic([2, 1, 2, 2 / 3], 2).shape.hi, [1, 2])
    with pytest.raises(cert.InfeasibleMoments):
        cert.reconstruct_cuboid_quadratic([1, 0, 0, 0], 2)
