import numpy as np
import pytest
from numpy.testing import assert_allclose

from nehari import discretization as disc
from nehari import presets as ps
from nehari.descent import ResolutionTooCoarse
from nehari.discretization import DomainSpec
from nehari.energy import SpecError

from .oracles import shooting_ground_state


class TestPresetExterior:
    def test_valid(self):
        spec, sp = ps.preset_exterior(3, 1.0, 8.0, 201, p=3.0, kappa=[1, 1], mu=[1, 1],
                                      lam=-1.0, alpha=1.5, beta=1.5)
        assert spec.M == 2 and sp.domain.kind == "exterior_radial"

    def test_critical_rejected(self):
        with pytest.raises(SpecError):
            ps.preset_exterior(3, 1.0, 8.0, 201, p=6.0, kappa=[1], mu=[1], lam=0.0)

    def test_truncation_stability(self):
        # doubling L at fixed spacing barely moves the ground energy
        energies = []
        for L, n in ((8.0, 281), (16.0, 601)):
            _, sp = ps.preset_exterior(3, 1.0, L, n, p=4.0, kappa=[1.0], mu=[1.0], lam=0.0)
            energies.append(ps.single_equation_ground_state(sp, 1.0, 1.0, 4.0)[1])
        assert abs(energies[1] / energies[0] - 1) <= 1e-3


class TestPresetYamabe:
    @pytest.mark.parametrize("m,n_dim,kappa,p", [(2, 2, 0.75, 6.0), (2, 3, 2.0, 4.0)])
    def test_parameters(self, m, n_dim, kappa, p):
        spec, _ = ps.preset_yamabe(m, n_dim, 101, mu=[1, 1], lam=-1.0)
        assert_allclose(spec.kappa, kappa)
        assert_allclose(spec.p, p)

    def test_factor_dimension(self):
        with pytest.raises(SpecError):
            ps.preset_yamabe(1, 3, 101, mu=[1], lam=0.0)


class TestPresetBrezisNirenberg:
    def test_valid(self):
        spec, sp = ps.preset_brezis_nirenberg(4, 1.0, 201, kappa=[-1, -1], mu=[1, 1], lam=-0.5,
                                              alpha=2.0, beta=2.0)
        assert sp.lambda1 > 1.0 and spec.p == 4.0

    def test_dimension_five_exponents(self):
        beta = np.array([[0.0, 1.2], [2.1333333333333333, 0.0]])
        with pytest.raises(ps.DimensionRule):
            ps.preset_brezis_nirenberg(5, 1.0, 201, kappa=[-1, -1], mu=[1, 1], lam=-0.5,
                                       alpha=beta.T, beta=beta)

    def test_dimension_four_exponents(self):
        with pytest.raises(ps.DimensionRule):
            ps.preset_brezis_nirenberg(4, 1.0, 201, kappa=[-1, -1], mu=[1, 1], lam=-0.5,
                                       alpha=1.5, beta=2.5)

    def test_dimension_three(self):
        with pytest.raises(ps.DimensionRule):
            ps.preset_brezis_nirenberg(3, 1.0, 201, kappa=[-1], mu=[1], lam=0.0)

    def test_nonnegative_kappa(self):
        with pytest.raises(SpecError):
            ps.preset_brezis_nirenberg(4, 1.0, 201, kappa=[0.0, -1.0], mu=[1, 1], lam=-0.5)


@pytest.fixture(scope="module")
def ball():
    return disc.build_space(DomainSpec.ball(3), 1001)


class TestGroundState:
    def test_matches_shooting(self, ball):
        _, e = ps.single_equation_ground_state(ball, 1.0, 1.0, 3.0)
        _, e_ref = shooting_ground_state(3, 3.0, 1.0, 1.0)
        assert_allclose(e, e_ref, rtol=1e-3)

    def test_scaling_in_mu(self, ball):
        _, e1 = ps.single_equation_ground_state(ball, 1.0, 1.0, 3.0)
        _, e3 = ps.single_equation_ground_state(ball, 1.0, 3.0, 3.0)
        assert_allclose(e3, 3.0 ** (-2.0) * e1, rtol=1e-6)

    def test_energy_norm_identity(self, ball):
        u, e = ps.single_equation_ground_state(ball, 1.0, 1.0, 3.0)
        assert np.all(u >= 0)
        assert_allclose(e, disc.norm_i(ball, 1.0, u) ** 2 / 6.0, rtol=1e-8)


class TestSobolevConstant:
    def test_scale_invariance(self):
        sp = disc.build_space(DomainSpec.ball(3), 201)
        w = np.sin(np.pi * sp.nodes) * sp.free
        q = ps.rayleigh_quotient(sp, w, 4.0, 1.0)
        assert abs(ps.rayleigh_quotient(sp, 2 * w, 4.0, 1.0) - q) <= 1e-12 * q

    def test_against_bubble_quotient(self):
        sp = disc.build_space(DomainSpec.ball(4), 501)
        s = ps.sobolev_constant(sp, 4.0)
        q = ps.rayleigh_quotient(sp, disc.bubble(sp, 1 / 20), 4.0)
        assert s <= q and abs(s / q - 1) <= 0.02

    def test_domain_monotonicity(self):
        vals = [ps.sobolev_constant(disc.build_space(DomainSpec.ball(3, R), int(200 * R) + 1), 4.0, 1.0)
                for R in (1.0, 2.0, 4.0)]
        assert vals[0] > vals[1] > vals[2]

    def test_lower_bound_positive(self, pair_system):
        d0 = ps.nehari_lower_bound(pair_system)
        assert d0 > 0


@pytest.fixture(scope="module")
def spec():
    spec, _ = ps.preset_exterior(3, 1.0, 8.0, 101, p=4.0, kappa=[0.05, 0.08], mu=[1, 1], lam=-1.0)
    return spec


class TestSeparatedBumps:
    def test_monotone_approach(self, spec):
        e4, e8 = (ps.separated_bump_energy(spec, R) for R in (4.0, 8.0))
        assert e4 > e8 > ps.separated_bump_limit(spec, R_ref=16.0)

    def test_too_coarse(self, spec):
        with pytest.raises(ResolutionTooCoarse):
            ps.separated_bump_energy(spec, 0.5)


@pytest.fixture(scope="module")
def scans():
    out = {}
    for N in (5, 6):
        sp = disc.build_space(DomainSpec.ball(N, grading=1000.0), 4001)
        out[N] = (ps.bubble_scan(sp, [0.04, 0.02, 0.01, 0.005]),
                  ps.bubble_scan(sp, [1e-3, 5e-4, 2.5e-4, 1.25e-4], betas=[ps.pc_half(N)]))
    return out


class TestBubbleScan:
    def test_l2_slope_n5(self, scans):
        assert abs(scans[5][1].fitted_slopes["l2"] - 2.0) <= 0.1

    def test_log_corrected_slope_n6(self, scans):
        assert abs(scans[6][1].fitted_slopes["beta_1.5"] - 3.0) <= 0.1

    @pytest.mark.parametrize("N", [5, 6])
    def test_limit(self, scans, N):
        scan = scans[N][0]
        assert abs(scan.extrapolated_limit / scan.limit - 1) <= 0.02

    def test_argument_checks(self):
        sp = disc.build_space(DomainSpec.ball(4, grading=1000.0), 401)
        with pytest.raises(ValueError):
            ps.bubble_scan(sp, [0.01, 0.02])
        with pytest.raises(ValueError):
            ps.bubble_scan(disc.build_space(DomainSpec.ball(3), 101), [0.02, 0.01])
        with pytest.raises(ResolutionTooCoarse):
            ps.bubble_scan(disc.build_space(DomainSpec.ball(4), 101), [0.02, 0.01])


class TestThreshold:
    def test_scalar_reduces_to_single_comparison(self):
        spec, sp = ps.preset_brezis_nirenberg(4, 1.0, 301, kappa=[-5.0], mu=[1.0], lam=0.0)
        rep = ps.bn_threshold_check(spec, sp)
        assert set(rep.cI) == {(0,)} and rep.cI[(0,)] == 0.0
        assert_allclose(rep.rhs, rep.S**2 / 4, rtol=1e-14)
        assert rep.satisfied == (rep.c0 < rep.rhs - rep.margin)

    def test_requires_critical_ball(self, pair_system):
        with pytest.raises(SpecError):
            ps.bn_threshold_check(pair_system.spec, pair_system.space)
