import numpy as np
import pytest

from randblock.errors import ConfigError
from randblock.furstenberg import (
    _P_SPLIT,
    UU,
    Sp2Element,
    build_A0,
    build_M,
    canceled_generator,
    energy_sweep_rank,
    lie_closure_dimension,
    site_transfer,
    zero_energy_reducibility_certificate,
    zero_energy_split_blocks,
)
from randblock.model import SIGMA_Z, anisotropy_block
from randblock.transfer import transfer_matrix

GRID = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0]


class TestGenerators:
    def test_site_transfer_cross_checks_transfer_module(self):
        A = site_transfer(1.0, 1.0, 0.5)
        B = transfer_matrix(SIGMA_Z * 1.0, anisotropy_block(0.5), 1.0)
        assert np.abs(A.matrix - B.matrix).max() <= 1e-14

    def test_zero_field_zero_energy_site_is_A0(self):
        A = site_transfer(0.0, 0.0, 0.5)
        A0 = build_A0(0.0, 0.5)
        assert np.array_equal(A.matrix, A0.matrix)
        assert A.symplectic_defect() <= 1e-12

    def test_build_M_shape(self):
        M = build_M(0.7 * SIGMA_Z)
        # unipotent lower-triangular with Q in the bottom-left corner
        assert np.array_equal(M.matrix[:2, :2], np.eye(2))
        assert np.array_equal(M.matrix[2:, 2:], np.eye(2))
        assert np.array_equal(M.matrix[2:, :2], 0.7 * SIGMA_Z)
        assert np.array_equal(M.matrix[:2, 2:], np.zeros((2, 2)))

    def test_cancellation_with_equal_fields_is_identity(self):
        G = canceled_generator(0.8, 0.8, 1.3, 0.5)
        assert np.abs(G.matrix - np.eye(4)).max() <= 1e-12

    def test_cancellation_leaves_field_difference(self, rng):
        for _ in range(10):
            a, b = rng.normal(size=2)
            E = rng.uniform(-2, 2)
            gamma = rng.uniform(0.1, 0.9)
            G = canceled_generator(a, b, E, gamma)
            lhs = site_transfer(a, E, gamma).matrix @ np.linalg.inv(
                site_transfer(b, E, gamma).matrix
            )
            assert np.abs(G.matrix - lhs).max() <= 1e-10
            expected = build_M((a - b) * SIGMA_Z).matrix
            assert np.abs(G.matrix - expected).max() <= 1e-10

    def test_sp2_membership_guard(self):
        with pytest.raises(ConfigError):
            Sp2Element(matrix=np.diag([1.0, 2.0, 3.0, 4.0]))


class TestClosureRank:
    def test_full_rank_at_reference_point(self):
        res = lie_closure_dimension(1.0, 0.5, depth=2)
        assert res.dimension == 10
        assert not res.deficient
        assert not res.marginal

    @pytest.mark.parametrize("gamma", [0.3, 0.5, 2.0])
    def test_full_rank_on_grid(self, gamma):
        for res in energy_sweep_rank(gamma, GRID, depth=3):
            assert res.dimension == 10, f"E={res.E}"
            assert not res.marginal

    def test_zero_energy_is_deficient(self):
        # the measured closure dimension at E=0 is pinned as a regression
        # value; the structural claim is only that it falls below 10
        for gamma in (0.3, 0.5, 2.0):
            res = lie_closure_dimension(0.0, gamma, depth=3)
            assert res.deficient
            assert res.dimension == 3

    def test_sweep_flags_exactly_zero(self):
        results = energy_sweep_rank(0.5, [-1.0, 0.0, 1.0], depth=3)
        flags = [r.deficient for r in results]
        assert flags == [False, True, False]


class TestZeroEnergyReduction:
    def test_split_blocks_formulas(self):
        nu, gamma = 0.7, 0.5
        D, F = zero_energy_split_blocks(nu, gamma)
        assert np.allclose(D, [[0.0, 1.0 / 1.5], [-0.5, nu / 1.5]], atol=1e-14)
        assert np.allclose(F, [[0.0, 1.0 / 0.5], [-1.5, nu / 0.5]], atol=1e-14)
        assert np.linalg.det(D) * np.linalg.det(F) == pytest.approx(1.0, abs=1e-12)

    def test_conjugation_block_diagonalizes(self, rng):
        for gamma in (0.5, 2.0):
            for nu in rng.normal(size=5):
                A = site_transfer(nu, 0.0, gamma).matrix
                B = UU @ A @ UU
                C = np.linalg.inv(_P_SPLIT) @ B @ _P_SPLIT
                D, F = zero_energy_split_blocks(nu, gamma)
                assert np.abs(C[:2, 2:]).max() <= 1e-12
                assert np.abs(C[2:, :2]).max() <= 1e-12
                assert np.abs(C[:2, :2] - D).max() <= 1e-12
                assert np.abs(C[2:, 2:] - F).max() <= 1e-12

    def test_certificate_inner_branch(self):
        rng = np.random.default_rng(5)
        rep = zero_energy_reducibility_certificate(0.5, rng.uniform(-2, 2, 100))
        assert rep.passed and rep.branch == "unit_determinant"
        assert rep.num_samples == 100
        # det D = (1-gamma)/(1+gamma) = 1/3 > 0 on this branch
        D, _ = zero_energy_split_blocks(0.3, 0.5)
        assert np.linalg.det(D) == pytest.approx(1.0 / 3.0, abs=1e-14)

    def test_certificate_two_step_branch(self):
        rng = np.random.default_rng(6)
        rep = zero_energy_reducibility_certificate(2.0, rng.uniform(-2, 2, 100))
        assert rep.passed and rep.branch == "negative_determinant_two_step"
        # negative determinant forces the doubled step
        D, F = zero_energy_split_blocks(0.3, 2.0)
        assert np.linalg.det(D) == pytest.approx(-1.0 / 3.0, abs=1e-14)
        assert np.linalg.det(F) == pytest.approx(-3.0, abs=1e-13)

    def test_certificate_gamma_domain(self):
        with pytest.raises(ConfigError):
            zero_energy_reducibility_certificate(1.0, [0.1])
        with pytest.raises(ConfigError):
            zero_energy_reducibility_certificate(-0.5, [0.1])
