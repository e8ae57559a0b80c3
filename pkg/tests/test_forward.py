import numpy as np
import pytest

from lame_edge.ansatz import BumpCutoff, GaussianCutoff, ProbeSpec
from lame_edge.elastic import LameProfile
from lame_edge.forward import (
    DEFAULT_FRAME,
    ForwardError,
    QuadratureSettings,
    RadialDtnTable,
    depth_stroh,
    difference_pairing,
    dtn_symbol,
    dtn_symbol_march,
    half_space_impedance,
    limit_quadrature,
    pairing,
)
from lame_edge.stroh import impedance, stroh_matrix

E1 = (1.0, 0.0, 0.0)


def random_admissible(rng):
    mu = rng.uniform(0.3, 2.5)
    lam = rng.uniform(-2.0 * mu / 3.0 + 0.1, 2.5)
    return lam, mu


def random_profile(rng, name="rand"):
    # gentle slopes keep admissibility on [0, H_max]
    lam0, mu0 = random_admissible(rng)
    lam0 = abs(lam0) + 0.2
    s1 = rng.uniform(-0.1, 0.3)
    s2 = rng.uniform(-0.05, 0.3)
    return LameProfile.from_polynomial([lam0, s1], [mu0, s2], name=name)


class TestDepthStroh:
    def test_constant_profile_unit_k_matches_pointwise_matrix(self):
        prof = LameProfile.constant(1.3, 0.8)
        th = 0.7
        k = (np.cos(th), np.sin(th))
        K1 = depth_stroh(prof, 0.4, k)
        K2 = stroh_matrix(1.3, 0.8, (k[0], k[1], 0.0)).matrix
        assert np.allclose(K1, K2, atol=1e-14)

    def test_block_homogeneity_in_k(self):
        prof = LameProfile.from_polynomial([1.0, 0.3], [1.0, 0.2])
        k = np.array([3.0, -1.0])
        c = 2.5
        K = depth_stroh(prof, 0.2, k)
        Kc = depth_stroh(prof, 0.2, c * k)
        assert np.allclose(Kc[:3, :3], c * K[:3, :3], atol=1e-13)
        assert np.allclose(Kc[:3, 3:], K[:3, 3:], atol=1e-13)
        assert np.allclose(Kc[3:, :3], c**2 * K[3:, :3], atol=1e-12)
        assert np.allclose(Kc[3:, 3:], c * K[3:, 3:], atol=1e-13)

    def test_coefficients_evaluated_at_depth(self):
        prof = LameProfile.from_polynomial([1.0, 0.3], [1.0, 0.0])
        K = depth_stroh(prof, 1.0, (1.0, 0.0))
        K_ref = stroh_matrix(1.3, 1.0, E1).matrix
        assert np.allclose(K, K_ref, atol=1e-14)


class TestHalfSpaceImpedance:
    def test_matches_impedance_formula(self):
        M = half_space_impedance(1.0, 1.0, (1.0, 0.0))
        assert M[0, 0] == pytest.approx(1.5)
        rng = np.random.default_rng(1)
        for _ in range(20):
            lam, mu = random_admissible(rng)
            th = rng.uniform(0, 2 * np.pi)
            k = 3.7 * np.array([np.cos(th), np.sin(th)])
            Z = impedance(lam, mu, (np.cos(th), np.sin(th), 0.0)).matrix
            assert np.allclose(half_space_impedance(lam, mu, k), 3.7 * Z, atol=1e-12)

    def test_homogeneous_degree_one(self):
        M1 = half_space_impedance(2.0, 1.0, (1.0, 2.0))
        M2 = half_space_impedance(2.0, 1.0, (3.0, 6.0))
        assert np.allclose(M2, 3.0 * M1, atol=1e-12)

    def test_hermitian_positive_definite(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            lam, mu = random_admissible(rng)
            M = half_space_impedance(lam, mu, (1.0, -0.4))
            assert np.allclose(M, M.conj().T, atol=1e-12)
            assert np.linalg.eigvalsh(0.5 * (M + M.conj().T)).min() > 0.0


class TestDtnSymbol:
    def test_fixed_point_on_constant_profile(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            lam, mu = random_admissible(rng)
            k = rng.uniform(-6, 6, 2)
            if np.hypot(*k) < 0.3:
                k = np.array([1.0, 0.5])
            prof = LameProfile.constant(lam, mu)
            M = dtn_symbol(prof, k).matrix
            M_inf = half_space_impedance(lam, mu, k)
            assert np.abs(M - M_inf).max() <= 1e-8 * np.abs(M_inf).max()

    def test_hermitian_positive_variable_profile(self):
        prof = LameProfile.from_polynomial([1.0, 0.3], [1.0, 0.2])
        sym = dtn_symbol(prof, (8.0, 0.0))
        assert sym.hermiticity_defect <= 1e-8
        assert np.linalg.eigvalsh(0.5 * (sym.matrix + sym.matrix.conj().T)).min() > 0.0

    def test_riccati_vs_subspace_march(self):
        rng = np.random.default_rng(4)
        for trial in range(20):
            prof = random_profile(rng, f"rand{trial}")
            kn = rng.uniform(0.5, 40.0)
            th = rng.uniform(0, 2 * np.pi)
            k = kn * np.array([np.cos(th), np.sin(th)])
            M1 = dtn_symbol(prof, k).matrix
            M2 = dtn_symbol_march(prof, k, n_steps=900)
            assert np.abs(M1 - M2).max() <= 1e-6 * np.abs(M1).max()

    def test_zero_frequency(self):
        prof = LameProfile.constant(1.0, 1.0)
        assert np.all(dtn_symbol(prof, (0.0, 0.0)).matrix == 0.0)

    def test_inadmissible_profile_rejected(self):
        prof = LameProfile.from_polynomial([1.0], [1.0, -1.0])
        with pytest.raises(ForwardError, match="inadmissible"):
            dtn_symbol(prof, (3.0, 0.0))

    def test_truncation_depth_policy(self):
        assert DEFAULT_FRAME.depth((100.0, 0.0)) == pytest.approx(0.14)
        assert DEFAULT_FRAME.depth((1.0, 0.0)) == pytest.approx(2.0)
        assert np.dot(DEFAULT_FRAME.outward_normal, [0, 0, 1]) == -1.0


class TestRadialTable:
    def test_table_matches_direct_solves(self):
        prof = LameProfile.from_polynomial([1.0, 0.3], [1.0, 0.2], name="grad")
        tab = RadialDtnTable(prof, 120.0)
        for r in (0.04, 0.7, 5.3, 17.9, 49.7, 101.3):
            Md = dtn_symbol(prof, (r, 0.0)).matrix
            Mt = tab.symbol_radial(np.array([r]))[0]
            assert np.abs(Md - Mt).max() <= 1e-6 * max(np.abs(Md).max(), 1e-3)

    def test_rotation_equivariance(self):
        prof = LameProfile.from_polynomial([1.0, 0.3], [1.0, 0.2], name="grad")
        tab = RadialDtnTable(prof, 120.0)
        rng = np.random.default_rng(5)
        a = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        for k in ((30.0, 40.0), (-5.0, 2.0), (60.0, -80.0)):
            direct = dtn_symbol(prof, k).matrix
            fd = complex(np.einsum("ij,i,j->", direct, a.conj(), a))
            ft = tab.forms(np.array([k[0]]), np.array([k[1]]), a)[0]
            assert abs(fd - ft) <= 1e-8 * abs(fd)

    def test_out_of_range_rejected(self):
        prof = LameProfile.constant(1.0, 1.0)
        tab = RadialDtnTable(prof, 10.0)
        with pytest.raises(ForwardError, match="radial table"):
            tab.symbol_radial(np.array([50.0]))


@pytest.fixture(scope="module")
def gauss():
    return GaussianCutoff()


class TestPairing:
    def test_zero_amplitude(self, gauss):
        prof = LameProfile.constant(1.0, 1.0)
        probe = ProbeSpec(np.zeros(3), E1, 32, 4, 0, gauss)
        assert pairing(prof, probe).value == 0.0

    def test_homogeneous_limit_direction(self, gauss):
        # raw value at N = 256 approaches the impedance form from above
        prof = LameProfile.constant(1.0, 1.0)
        probe = ProbeSpec(np.array([0, 0, 1.0]), E1, 256, 4, 0, gauss)
        val = pairing(prof, probe).value
        assert val.real > 1.5
        assert val.real < 1.5 * 1.25
        assert abs(val.imag) <= 1e-10 * val.real

    def test_equal_slot_real_positive(self, gauss):
        rng = np.random.default_rng(6)
        for trial in range(8):
            prof = random_profile(rng, f"pp{trial}")
            a = rng.standard_normal(3) + 1j * rng.standard_normal(3)
            th = rng.uniform(0, 2 * np.pi)
            probe = ProbeSpec(a, (np.cos(th), np.sin(th), 0.0), 32, 4, 0, gauss)
            res = pairing(prof, probe)
            assert res.value.real > 0.0
            assert abs(res.value.imag) <= 1e-8 * res.value.real

    def test_grid_refinement_stability(self, gauss):
        prof = LameProfile.from_polynomial([1.0, 0.3], [1.0, 0.2], name="gridref")
        probe = ProbeSpec(np.array([0, 0, 1.0]), E1, 64, 4, 0, gauss)
        v1 = pairing(prof, probe, QuadratureSettings(nodes=96)).value
        v2 = pairing(prof, probe, QuadratureSettings(nodes=192)).value
        assert abs(v1 - v2) <= 1e-6 * abs(v1)

    def test_table_refinement_stability(self, gauss):
        prof = LameProfile.from_polynomial([1.0, 0.3], [1.0, 0.2], name="tabref")
        probe = ProbeSpec(np.array([0, 0, 1.0]), E1, 64, 4, 0, gauss)
        v1 = pairing(prof, probe, QuadratureSettings()).value
        v2 = pairing(
            prof, probe, QuadratureSettings(table_low_step=0.0625, table_high_points=769)
        ).value
        assert abs(v1 - v2) <= 1e-6 * abs(v1)

    def test_bump_cutoff_pairing(self):
        prof = LameProfile.constant(1.0, 1.0)
        probe = ProbeSpec(np.array([0, 0, 1.0]), E1, 32, 4, 0, BumpCutoff())
        res = pairing(prof, probe, QuadratureSettings(nodes=128, tail_tol=1e-6))
        assert res.value.real > 0.0
        assert abs(res.value.imag) <= 1e-8 * res.value.real


class TestDifferencePairing:
    def test_polynomial_below_order_gives_zero(self, gauss):
        prof = LameProfile.constant(1.3, 0.9)
        probe = ProbeSpec(np.array([0, 0, 1.0]), E1, 64, 4, 1, gauss)
        val = difference_pairing(prof, 1, probe).value
        assert abs(val) <= 1e-8

    def test_linear_profile_order2_gives_zero(self, gauss):
        prof = LameProfile.from_polynomial([1.0, 0.3], [1.0, 0.2])
        probe = ProbeSpec(np.array([0, 0, 1.0]), E1, 64, 5, 2, gauss)
        val = difference_pairing(prof, 2, probe).value
        assert abs(val) <= 1e-8

    def test_requires_positive_order(self, gauss):
        prof = LameProfile.constant(1.0, 1.0)
        probe = ProbeSpec(np.array([0, 0, 1.0]), E1, 16, 4, 0, gauss)
        with pytest.raises(ValueError, match="m >= 1"):
            difference_pairing(prof, 0, probe)

    def test_gradient_limit_matches_family_energy(self, gauss):
        from lame_edge.reconstruct import leading_order_response

        prof = LameProfile.from_polynomial([1.0, 0.3], [1.0, 0.2], name="grad-lim")
        probe = ProbeSpec(np.array([0, 0, 1.0]), E1, 128, 4, 1, gauss)
        val = 128 * difference_pairing(prof, 1, probe).value.real
        predicted = leading_order_response((0, 0, 1.0), E1, 1, 0.3, 0.2, 1.0, 1.0)
        assert predicted == pytest.approx(0.30625)
        assert abs(val - predicted) <= 0.01 * predicted


class TestLimitQuadrature:
    @pytest.mark.parametrize("k_order,target", [(1, 0.25), (2, 0.25)])
    def test_monomials(self, k_order, target):
        val = limit_quadrature(lambda y: y**k_order, [0.0] * k_order, k_order, 256)
        assert val == pytest.approx(target, rel=0.02)

    def test_convergence_in_N(self):
        vals = [
            limit_quadrature(lambda y: np.sin(y), [0.0], 1, N) for N in (64, 256, 1024)
        ]
        errs = [abs(v - 0.25) for v in vals]
        assert errs[2] < errs[1] < errs[0]

    def test_cutoff_mass_factor(self):
        g = GaussianCutoff()
        v1 = limit_quadrature(lambda y: y, [0.0], 1, 256)
        v2 = limit_quadrature(lambda y: y, [0.0], 1, 256, cutoff=g)
        assert v2 == pytest.approx(v1, rel=1e-6)
