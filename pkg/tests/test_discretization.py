import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.special import jn_zeros

from nehari import discretization as disc
from nehari.discretization import DomainSpec

from .oracles import aubin_talenti, sphere_area


@pytest.fixture(scope="module")
def ball3():
    return disc.build_space(DomainSpec.ball(3), 2000)


class TestDomainSpec:
    def test_rejects_low_dimension(self):
        with pytest.raises(ValueError):
            DomainSpec.ball(2)

    def test_exterior_ordering(self):
        with pytest.raises(ValueError):
            DomainSpec.exterior(3, 2.0, 1.0)

    @pytest.mark.parametrize("m,n", [(1, 3), (3, 1)])
    def test_sphere_factors(self, m, n):
        with pytest.raises(ValueError):
            DomainSpec.sphere(m, n)

    def test_sphere_dimension(self):
        assert DomainSpec.sphere(2, 3).N == 4

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown"):
            DomainSpec("torus", 3)


class TestBuildSpace:
    def test_ball_volume(self, ball3):
        vol = disc.integrate(ball3, np.ones(ball3.quad_weights.size))
        assert_allclose(vol, 4 * np.pi / 3, rtol=1e-6)

    def test_ball_eigenvalue(self, ball3):
        assert_allclose(ball3.lambda1, np.pi**2, rtol=1e-4)

    def test_four_ball_eigenvalue(self):
        # radial Dirichlet eigenvalue on the unit ball of R^4 is j_{1,1}^2
        sp = disc.build_space(DomainSpec.ball(4), 1000)
        assert_allclose(sp.lambda1, jn_zeros(1, 1)[0] ** 2, rtol=1e-4)

    def test_sphere_measure(self):
        sp = disc.build_space(DomainSpec.sphere(2, 2), 400)
        total = disc.integrate(sp, np.ones(sp.quad_weights.size))
        assert_allclose(total, 2 * np.pi**2, rtol=1e-5)
        assert_allclose(total, sphere_area(3), rtol=1e-12)

    def test_sphere_has_no_dirichlet_nodes(self):
        sp = disc.build_space(DomainSpec.sphere(2, 3), 100)
        assert sp.free.all()
        # constants are eigenfunctions of the Laplace-Beltrami operator
        assert abs(sp.lambda1) < 1e-8

    def test_exterior_boundary_masks(self):
        sp = disc.build_space(DomainSpec.exterior(3, 1.0, 5.0, grading=10.0), 200)
        assert not sp.free[0] and not sp.free[-1]
        h = np.diff(sp.nodes)
        assert h[0] < h[-1]
        assert_allclose(h[-1] / h[0], 10.0, rtol=0.05)
        sp0 = disc.build_space(DomainSpec.exterior(3, 0.0, 5.0), 100)
        assert sp0.free[0]

    def test_minimum_nodes(self):
        with pytest.raises(ValueError):
            disc.build_space(DomainSpec.ball(3), 10)

    def test_operators_symmetric_semidefinite(self, rng):
        for dom in (DomainSpec.ball(3), DomainSpec.exterior(4, 1.0, 6.0, grading=5.0),
                    DomainSpec.sphere(3, 2)):
            sp = disc.build_space(dom, 300)
            for op in (sp.stiffness, sp.mass):
                assert abs(op - op.T).max() == 0.0
            for _ in range(20):
                u = rng.normal(size=sp.size)
                assert u @ (sp.stiffness @ u) >= -1e-12 * (u @ u)
                assert u @ (sp.mass @ u) > 0

    def test_quadrature_is_second_order(self):
        def err(n):
            sp = disc.build_space(DomainSpec.ball(3), n)
            u = np.cos(np.pi * sp.nodes / 2)
            # int_B cos^3(pi r/2) dx computed by adaptive quadrature
            from scipy.integrate import quad
            exact = quad(lambda r: 4 * np.pi * r**2 * np.cos(np.pi * r / 2) ** 3, 0, 1)[0]
            return abs(disc.integrate_power(sp, [(u, 3.0)]) - exact)

        errs = [err(n) for n in (51, 101, 201)]
        assert errs[0] / errs[1] >= 3 and errs[1] / errs[2] >= 3


class TestInnerProduct:
    def test_eigenfunction_rayleigh_identity(self, ball3):
        lam, phi = disc.lowest_eigenpair(ball3)
        assert_allclose(disc.inner_product_i(ball3, 0.0, phi, phi), lam, rtol=1e-10)
        assert_allclose(disc.inner_product_i(ball3, 1.0, phi, phi), lam + 1, rtol=1e-10)

    def test_symmetry(self, ball3, rng):
        u, v = rng.normal(size=(2, ball3.size)) * ball3.free
        a = disc.inner_product_i(ball3, 0.7, u, v)
        b = disc.inner_product_i(ball3, 0.7, v, u)
        assert abs(a - b) <= 1e-12 * abs(a)

    def test_matches_assembled_matrices(self, rng):
        sp = disc.build_space(DomainSpec.ball(3), 64)
        u, v = rng.normal(size=(2, sp.size))
        direct = u @ ((sp.stiffness + 0.3 * sp.mass) @ v)
        assert_allclose(disc.inner_product_i(sp, 0.3, u, v), direct, rtol=1e-10)

    def test_coercivity_violation(self, ball3):
        with pytest.raises(disc.CoercivityViolation):
            disc.inner_product_i(ball3, -ball3.lambda1, np.ones(ball3.size), np.ones(ball3.size))
        # just inside the admissible range
        disc.inner_product_i(ball3, -0.99 * ball3.lambda1, np.ones(ball3.size), np.ones(ball3.size))

    def test_riesz_inverts_the_form(self, ball3, rng):
        r = ball3.restrict(lambda t: np.sin(3 * t))
        r[~ball3.free] = 0.0
        g = disc.riesz(ball3, 1.0, r)
        v = rng.normal(size=ball3.size) * ball3.free
        assert_allclose(disc.inner_product_i(ball3, 1.0, g, v), r @ v, rtol=1e-8)


class TestIntegratePower:
    def test_constant(self, ball3):
        one = np.ones(ball3.size)
        assert_allclose(disc.integrate_power(ball3, [(one, 2.0)]), 4 * np.pi / 3, rtol=1e-6)

    def test_disjoint_supports_give_zero(self, ball3):
        u = np.where(ball3.nodes < 0.3, 1.0, 0.0)
        v = np.where(ball3.nodes > 0.5, 1.0, 0.0)
        assert disc.integrate_power(ball3, [(u, 1.5), (v, 2.5)]) == 0.0

    def test_hat_against_refined_grid(self):
        # kinks on nodes of both grids, so both interpolants are the hat itself
        def hat(sp):
            return np.maximum(0.0, 1 - np.abs(sp.nodes - 0.5) / 0.25)

        coarse = disc.build_space(DomainSpec.ball(3), 401)
        fine = disc.build_space(DomainSpec.ball(3), 4001)
        a = disc.integrate_power(coarse, [(hat(coarse), 3.0)])
        b = disc.integrate_power(fine, [(hat(fine), 3.0)])
        assert_allclose(a, b, rtol=1e-4)

    def test_rejects_bad_exponent(self, ball3):
        with pytest.raises(ValueError):
            disc.integrate_power(ball3, [(np.ones(ball3.size), 0.0)])

    def test_rejects_foreign_vector(self, ball3):
        with pytest.raises(ValueError):
            disc.integrate_power(ball3, [(np.ones(5), 2.0)])


class TestBubble:
    def test_centre_value(self):
        sp = disc.build_space(DomainSpec.ball(4), 200)
        w = disc.bubble(sp, 0.1)
        assert_allclose(w[0], np.sqrt(8.0) * 10.0, rtol=1e-14)

    def test_mu_scaling(self):
        sp = disc.build_space(DomainSpec.ball(5), 200)
        assert_allclose(disc.bubble(sp, 0.1, mu=4.0), 4.0 ** (-0.75) * disc.bubble(sp, 0.1))

    def test_support(self):
        sp = disc.build_space(DomainSpec.ball(4, 2.0), 400)
        w = disc.bubble(sp, 0.05, cutoff_radius=1.0)
        assert np.all(w[sp.nodes >= 1.0] == 0.0)
        inner = sp.nodes <= 0.5
        a4 = np.sqrt(8.0)
        exact = a4 * (0.05 / (0.05**2 + sp.nodes[inner] ** 2))
        assert_allclose(w[inner], exact, rtol=1e-14)

    def test_quotient_approaches_sobolev_constant(self):
        sp = disc.build_space(DomainSpec.ball(4, grading=300.0), 2001)
        w = disc.bubble(sp, 0.01)
        q = disc.norm_i(sp, 0.0, w) ** 2 / disc.integrate_power(sp, [(w, 4.0)]) ** 0.5
        assert_allclose(q, aubin_talenti(4), rtol=2e-3)

    @pytest.mark.parametrize("kw", [{"eps": 0.0}, {"eps": 2.0}, {"eps": 0.1, "mu": -1.0}])
    def test_parameter_errors(self, kw):
        sp = disc.build_space(DomainSpec.ball(4), 100)
        with pytest.raises(ValueError):
            disc.bubble(sp, **kw)

    def test_needs_ball_and_dimension(self):
        with pytest.raises(ValueError):
            disc.bubble(disc.build_space(DomainSpec.ball(3), 100), 0.1)
        with pytest.raises(ValueError):
            disc.bubble(disc.build_space(DomainSpec.sphere(2, 3), 100), 0.1)


def test_sobolev_constant_closed_form():
    assert_allclose(disc.aubin_talenti_constant(3), 3 * (np.pi / 2) ** (4 / 3), rtol=1e-14)
    assert_allclose(disc.sphere_area(2), 4 * np.pi, rtol=1e-15)
