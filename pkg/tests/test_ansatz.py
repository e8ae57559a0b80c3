import numpy as np
import pytest

from lame_edge.ansatz import (
    AnsatzSolution,
    BumpCutoff,
    GaussianCutoff,
    ProbeSpec,
    boundary_datum,
    build_correctors,
    cascade_r1,
    cascade_r2,
    evaluate_ansatz,
    leading_profile,
    residual_decay,
    sigma_expand,
    smallness_ok,
)
from lame_edge.elastic import LameProfile
from lame_edge.stroh import sigma_basis

E1 = (1.0, 0.0, 0.0)
A_E3 = np.array([0.0, 0.0, 1.0], dtype=complex)


@pytest.fixture(scope="module")
def bump():
    return BumpCutoff()


@pytest.fixture(scope="module")
def gauss():
    return GaussianCutoff()


GRID = [(0.1, 0.2, 0.4), (0.35, -0.15, 1.3), (0.0, 0.0, 2.6), (0.5, 0.24, 0.8)]


class TestCutoffs:
    def test_unit_l2_mass(self, bump, gauss):
        assert abs(bump.l2_mass() - 1.0) < 1e-8
        assert abs(gauss.l2_mass() - 1.0) < 1e-8

    def test_bump_range_and_support(self, bump):
        pts = np.array([[0.0, 0.0], [0.5, 0.3], [0.999, 0.0], [1.0, 0.0], [1.4, 0.2]])
        v = bump.value(pts)
        assert np.all(v >= 0.0) and np.all(v <= 1.0)
        assert v[3] == 0.0 and v[4] == 0.0

    @pytest.mark.parametrize("beta", [(1, 0), (0, 1), (2, 0), (1, 1), (0, 3)])
    def test_derivatives_match_finite_differences(self, bump, gauss, beta):
        rng = np.random.default_rng(1)
        pts = rng.uniform(-0.55, 0.55, (6, 2))
        h = 1e-5
        for cut in (bump, gauss):
            lower = (beta[0] - 1, beta[1]) if beta[0] else (beta[0], beta[1] - 1)
            axis = np.array([h, 0.0]) if beta[0] else np.array([0.0, h])
            fd = (cut.derivative(lower)(pts + axis) - cut.derivative(lower)(pts - axis)) / (2 * h)
            an = cut.derivative(beta)(pts)
            assert np.abs(fd - an).max() < 1e-6 * max(1.0, np.abs(an).max())

    def test_gaussian_fourier_mass_and_tail(self, gauss):
        W = gauss.spectral_halfwidth(1e-8)
        k = np.linspace(0.0, 2 * W, 4001)
        dens = np.abs(gauss.fourier_radial(k)) ** 2 * k / (4 * np.pi**2) * 2 * np.pi
        total = np.trapezoid(dens, k)
        assert abs(total - 1.0) < 1e-6
        tail = np.trapezoid(np.where(k >= W, dens, 0.0), k)
        assert tail <= 2e-8

    def test_bump_fourier_tail_scan(self, bump):
        W = bump.spectral_halfwidth(1e-6)
        assert 10.0 < W < 200.0


class TestProbeSpec:
    def test_smallness_condition_enforced(self, gauss):
        # (1 - 1/2)(1 + 0.9) = 0.95 < 1.5: rejected
        with pytest.raises(ValueError, match="smallness"):
            ProbeSpec(A_E3, E1, 8, 2, 1, gauss)
        ProbeSpec(A_E3, E1, 8, 4, 1, gauss)  # (0.75)(1.9) = 1.425 >= 1.25

    def test_auto_rho_tilde(self):
        assert ProbeSpec.auto_rho_tilde(0) == 4
        assert ProbeSpec.auto_rho_tilde(1) == 4
        assert ProbeSpec.auto_rho_tilde(2) == 5
        assert smallness_ok(2, 5, 0.9) and not smallness_ok(2, 4, 0.9)

    def test_boundary_datum_mass(self, gauss):
        a = np.array([0.4, -0.2 + 0.3j, 1.0])
        probe = ProbeSpec(a, E1, 16, 4, 0, gauss)
        phi = boundary_datum(probe)
        L = 1.5 * probe.support_radius * gauss.support_radius
        n = 400
        x = np.linspace(-L, L, n)
        X, Y = np.meshgrid(x, x)
        vals = phi(np.stack([X, Y], axis=-1))
        mass = np.sum(np.abs(vals) ** 2) * (x[1] - x[0]) ** 2
        assert mass == pytest.approx(np.linalg.norm(a) ** 2 / probe.N, rel=1e-6)

    def test_boundary_datum_zero_amplitude(self, gauss):
        probe = ProbeSpec(np.zeros(3), E1, 16, 4, 0, gauss)
        vals = boundary_datum(probe)(np.array([[0.0, 0.0], [0.01, 0.0]]))
        assert np.all(vals == 0.0)

    def test_boundary_datum_support(self, bump):
        probe = ProbeSpec(A_E3, E1, 16, 4, 0, bump)
        r = probe.support_radius
        pts = np.array([[r, 0.0], [0.0, 1.5 * r], [2.0 * r, 0.1 * r]])
        assert np.all(boundary_datum(probe)(pts) == 0.0)


class TestSigmaExpand:
    def test_basis_vector(self):
        S = sigma_basis(1.0, 1.0, E1)
        c = sigma_expand(S[:, 0], 1.0, 1.0, E1)
        assert np.allclose(c, (1.0, 0.0, 0.0), atol=1e-14)

    def test_e3_coefficients(self):
        c = sigma_expand((0.0, 0.0, 1.0), 1.0, 1.0, E1)
        assert np.allclose(c, (0.0, 0.0, -0.5), atol=1e-14)

    def test_random_residual(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            mu = rng.uniform(0.2, 3.0)
            lam = rng.uniform(-2 * mu / 3 + 0.05, 3.0)
            th = rng.uniform(0, 2 * np.pi)
            om = (np.cos(th), np.sin(th), 0.0)
            a = rng.standard_normal(3) + 1j * rng.standard_normal(3)
            c = sigma_expand(a, lam, mu, om)
            S = sigma_basis(lam, mu, om)
            assert np.linalg.norm(S @ np.array(c) - a) <= 1e-12 * np.linalg.norm(a)


class TestLeadingProfile:
    def test_pure_shear_amplitude_has_no_corrector(self, gauss):
        S = sigma_basis(1.0, 1.0, E1)
        probe = ProbeSpec(S[:, 0], E1, 16, 4, 0, gauss)
        sol = leading_profile(probe, 1.0, 1.0)
        assert sorted(sol.stack[0].keys()) == [0]

    def test_e3_corrector_coefficient(self, gauss):
        # c3 = -1/2 so the depth-linear term is +i c3 z3 sigma2 = -(i/2) z3 sigma2
        probe = ProbeSpec(A_E3, E1, 16, 4, 0, gauss)
        sol = leading_profile(probe, 1.0, 1.0)
        S = sigma_basis(1.0, 1.0, E1)
        assert np.allclose(sol.stack[0][1][(0, 0)], -0.5j * S[:, 1], atol=1e-14)

    def test_annihilated_by_frozen_operator(self, gauss):
        rng = np.random.default_rng(3)
        for _ in range(5):
            mu = rng.uniform(0.3, 2.0)
            lam = rng.uniform(-2 * mu / 3 + 0.05, 2.0)
            a = rng.standard_normal(3) + 1j * rng.standard_normal(3)
            probe = ProbeSpec(a, E1, 16, 4, 0, gauss)
            sol = leading_profile(probe, lam, mu)
            assert sol.cascade_residual(0, GRID) <= 1e-10


class TestCascade:
    def test_r_matrices(self):
        R1 = cascade_r1(1.0, 1.0, E1, 1)
        assert R1[0, 2] == pytest.approx(-2.0j)
        assert np.allclose(R1.real[np.ix_([0, 1, 2], [0, 1, 2])].diagonal(), [2.0, 2.0, 6.0])
        assert abs(np.linalg.det(R1)) > 1e-8
        R2 = cascade_r2(1.0, 1.0, E1, 3)
        assert np.allclose(R2, -6.0 * np.diag([1.0, 1.0, 3.0]))

    def test_degree_bound_and_zero_trace(self, gauss):
        prof = LameProfile.from_polynomial([1.0, 0.3], [1.0, 0.2])
        probe = ProbeSpec(A_E3, E1, 16, 4, 1, gauss)
        sol = build_correctors(probe, prof)
        assert len(sol.stack) == probe.n_correctors + 1
        for n, poly in enumerate(sol.stack):
            assert max(poly.keys()) <= n + 1
            if n >= 1:
                assert 0 not in poly  # V^n(z', 0) = 0

    def test_cascade_residuals_pointwise(self, gauss):
        prof = LameProfile.from_polynomial([1.0, 0.3], [1.0, 0.2])
        probe = ProbeSpec(A_E3, E1, 16, 4, 1, gauss)
        sol = build_correctors(probe, prof)
        for n in range(len(sol.stack)):
            assert sol.cascade_residual(n, GRID) <= 1e-10

    def test_first_corrector_needs_cutoff_gradients(self, gauss):
        # V^1 coefficients all involve eta derivatives, so V^1 vanishes
        # wherever the cutoff is locally constant
        prof = LameProfile.constant(1.0, 1.0)
        S = sigma_basis(1.0, 1.0, E1)
        probe = ProbeSpec(S[:, 0], E1, 16, 4, 1, gauss)
        sol = build_correctors(probe, prof)
        for combo in sol.stack[1].values():
            for beta in combo:
                assert beta[0] + beta[1] >= 1

    def test_bump_cascade(self, bump):
        prof = LameProfile.constant(1.0, 1.0)
        probe = ProbeSpec(A_E3, E1, 16, 4, 1, bump)
        sol = build_correctors(probe, prof)
        assert sol.cascade_residual(4, GRID) <= 1e-10


class TestEvaluation:
    def test_trace_equals_boundary_datum(self, gauss):
        # identical by construction; tolerance covers multiplication-order ulps
        prof = LameProfile.from_polynomial([1.0, 0.3], [1.0, 0.2])
        probe = ProbeSpec(np.array([0.3, -0.1j, 1.0]), E1, 32, 4, 1, gauss)
        sol = build_correctors(probe, prof)
        yp = np.array([[0.0, 0.0], [0.003, -0.001], [0.01, 0.02]])
        y = np.column_stack([yp, np.zeros(3)])
        tr = sol.evaluate(y)
        bd = boundary_datum(probe)(yp)
        assert np.abs(tr - bd).max() <= 1e-15 * np.abs(bd).max()

    def test_zero_outside_support(self, bump):
        probe = ProbeSpec(A_E3, E1, 32, 4, 0, bump)
        sol = leading_profile(probe, 1.0, 1.0)
        r = probe.support_radius
        y = np.array([[2.0 * r, 0.0, 0.01], [0.0, 1.2 * r, 0.3]])
        assert np.all(sol.evaluate(y) == 0.0)

    def test_envelope_bound(self, gauss):
        probe = ProbeSpec(A_E3, E1, 64, 4, 1, gauss)
        prof = LameProfile.from_polynomial([1.0, 0.3], [1.0, 0.2])
        sol = build_correctors(probe, prof)
        rng = np.random.default_rng(4)
        N, rho = probe.N, probe.rho
        deg = max(max(p.keys()) for p in sol.stack)
        for _ in range(100):
            yp = rng.uniform(-0.5, 0.5, 2) * N ** (rho - 1.0)
            y3 = rng.uniform(0.0, 4.0) / N
            val = np.linalg.norm(sol.evaluate(np.array([*yp, y3])))
            z3 = N * y3
            bound = 20.0 * N ** (0.5 - rho) * (1.0 + z3**deg) * np.exp(-z3)
            assert val <= bound

    def test_decay_in_depth(self, gauss):
        probe = ProbeSpec(A_E3, E1, 16, 4, 0, gauss)
        sol = leading_profile(probe, 1.0, 1.0)
        vals = [np.linalg.norm(sol.evaluate(np.array([0.0, 0.0, z / 16]))) for z in (2.0, 6.0, 12.0)]
        assert vals[0] > vals[1] > vals[2]
        assert vals[2] < 1e-3 * vals[0]

    def test_rebind_guard(self, gauss):
        probe = ProbeSpec(A_E3, E1, 16, 4, 0, gauss)
        sol = leading_profile(probe, 1.0, 1.0)
        other = ProbeSpec(np.array([1.0, 0, 0]), E1, 16, 4, 0, gauss)
        with pytest.raises(ValueError, match="different probe"):
            evaluate_ansatz(sol, other, np.zeros(3))
        rebound = evaluate_ansatz(sol, probe.with_N(32), np.array([0.0, 0.0, 0.0]))
        assert rebound.shape == (3,)


class TestResidualDecay:
    def test_homogeneous_order0_slope(self, gauss):
        prof = LameProfile.constant(1.0, 1.0)
        probes = [ProbeSpec(A_E3, E1, n, 4, 0, gauss) for n in (16, 32, 64, 128)]
        fit = residual_decay(probes, prof)
        assert fit.fd_disagreement < 0.05
        assert abs(fit.slope - 1.75) <= 0.2

    def test_l2_gradient_scaling(self, gauss):
        # || y3^b grad Phi^N ||_{L2(Omega_N)} ~ N^{-b} under unit-mass probes
        prof = LameProfile.constant(1.0, 1.0)
        probe0 = ProbeSpec(A_E3, E1, 16, 4, 0, gauss)
        sol = leading_profile(probe0, 1.0, 1.0)

        def l2_norm(N, b):
            probe = probe0.with_N(N)
            s = AnsatzSolution(probe, 1.0, 1.0, sol.c_sigma, sol.stack, sol.operators)
            rho = probe.rho
            L = probe.support_radius * gauss.support_radius
            xs = np.linspace(-L, L, 48)
            z3 = np.linspace(1e-4, 1.0 / np.sqrt(N), 120)
            X, Y, D = np.meshgrid(xs, xs, z3, indexing="ij")
            pts = np.stack([X, Y, D], axis=-1)
            h = 1e-6 / N
            dphi = (s.evaluate(pts + [0, 0, h]) - s.evaluate(pts - [0, 0, h])) / (2 * h)
            w = (xs[1] - xs[0]) ** 2 * (z3[1] - z3[0])
            integrand = (D**b * np.linalg.norm(dphi, axis=-1)) ** 2
            return np.sqrt(np.sum(integrand) * w)

        for b in (0, 1):
            norms = [l2_norm(N, b) for N in (16, 32, 64, 128)]
            slope = np.polyfit(np.log([16, 32, 64, 128]), np.log(norms), 1)[0]
            assert abs(slope - (-b)) < 0.1
