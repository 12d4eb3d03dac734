import numpy as np
import pytest
from scipy.special import eval_chebyu

from randblock.errors import NumericalFailure
from randblock.model import (
    ModelParams,
    assemble_block_jacobi,
    assemble_general,
    random_instance,
    realization_rng,
    sample_disorder,
)
from randblock.spectral import eigensolve
from randblock.transfer import (
    GreenEvaluator,
    charpoly_identity_check,
    compound_matrix,
    fundamental_solutions,
    green_block,
    propagate,
    symplectic_form,
    transfer_matrix,
    wronskian,
)


def scalar_instance(nu, hop=None):
    """ell=1 chain as a block matrix; hop defaults to all ones."""
    n = len(nu)
    hop = np.ones(n - 1) if hop is None else np.asarray(hop)
    return assemble_general(
        1, [np.array([[v]]) for v in nu], [np.array([[h]]) for h in hop]
    )


class TestTransferMatrix:
    def test_symplectic_invariant(self, rng):
        for ell in (1, 2, 3):
            V = rng.normal(size=(ell, ell))
            V = V + V.T
            S = rng.normal(size=(ell, ell)) + 2 * np.eye(ell)
            for E in (0.3, 1.0 + 0.5j):
                A = transfer_matrix(V, S, E)
                assert A.symplectic_defect() <= 1e-12 * max(1.0, np.abs(A.matrix).max() ** 2)

    def test_real_energy_stays_real(self):
        A = transfer_matrix(np.zeros((1, 1)), np.eye(1), complex(0.37, 0.0))
        assert A.matrix.dtype == np.float64

    def test_free_scalar_at_zero_energy_has_period_four(self):
        # A = [[0,1],[-1,0]] is a quarter rotation
        A = transfer_matrix(np.zeros((1, 1)), np.eye(1), 0.0)
        states = propagate(np.array([1.0, 0.0]), [A] * 8)
        assert np.array_equal(states[4], states[0])
        assert np.array_equal(states[8], states[4])
        assert not np.array_equal(states[2], states[0])

    def test_zero_initial_data_stays_zero(self):
        A = transfer_matrix(np.array([[0.7]]), np.eye(1), 0.2)
        states = propagate(np.zeros(2), [A] * 10)
        assert np.all(states == 0.0)

    def test_propagate_overflow_raises(self):
        A = transfer_matrix(np.zeros((1, 1)), np.eye(1), -3.0)
        with pytest.raises(NumericalFailure):
            propagate(np.eye(2), [A] * 700)


class TestFundamentalSolutions:
    def test_single_site_boundary_normalization(self):
        M = assemble_general(2, [np.diag([0.4, -0.4])], [])
        U, V = fundamental_solutions(M, 0.1)
        assert np.array_equal(U[0], np.zeros((2, 2)))
        assert np.array_equal(U[1], np.eye(2))
        assert np.array_equal(V[1], np.eye(2))
        assert np.array_equal(V[2], np.zeros((2, 2)))

    def test_constant_scalar_chain_is_chebyshev(self):
        # u(k+1) = (v-E) u(k) - u(k-1), u(0)=0, u(1)=1 => u(k) = U_{k-1}((v-E)/2)
        v, E, n = 0.7, 0.2, 12
        M = scalar_instance([v] * n)
        U, _ = fundamental_solutions(M, E)
        for k in range(n + 2):
            assert U[k][0, 0] == pytest.approx(eval_chebyu(k - 1, (v - E) / 2.0), abs=1e-10)

    def test_eigenvector_data_solves_recursion(self, xy_params):
        p = xy_params(n=8)
        M = assemble_block_jacobi(p, sample_disorder(p, 2))
        spec = eigensolve(M)
        lam = spec.eigenvalues[5]
        psi = spec.eigenvectors[:, 5].reshape(8, 2)
        pad = np.vstack([np.zeros(2), psi, np.zeros(2)])  # u(0) = u(n+1) = 0
        S = [np.eye(2), *M.S, np.eye(2)]
        worst = 0.0
        for k in range(1, 9):
            r = M.V[k - 1] @ pad[k] - S[k] @ pad[k + 1] - S[k - 1].T @ pad[k - 1] - lam * pad[k]
            worst = max(worst, np.abs(r).max())
        assert worst <= 1e-10

    def test_forward_solution_recursion_residual(self, rng):
        M = random_instance(rng, 2, 10)
        U, V = fundamental_solutions(M, 0.3)
        assert U.recursion_residual(M) <= 1e-10
        assert V.recursion_residual(M) <= 1e-10


class TestWronskian:
    def test_self_wronskian_is_skew(self, rng):
        for ell in (1, 2, 3):
            M = random_instance(rng, ell, 7)
            U, _ = fundamental_solutions(M, 0.45)
            W = wronskian(U, U)
            assert np.abs(W + W.T).max() <= 1e-12 * max(1.0, np.abs(W).max())

    def test_constancy_across_sites(self, rng):
        M = random_instance(rng, 2, 15)
        U, V = fundamental_solutions(M, 0.7 + 0.3j)
        W0 = wronskian(U, V, 0)
        for k in range(1, 15):
            assert np.abs(wronskian(U, V, k) - W0).max() <= 1e-10 * max(1.0, np.abs(W0).max())

    def test_scalar_chain_reduces_to_classical_wronskian(self):
        # ell=1, S=1: W = v(k) u(k+1) - v(k+1) u(k)
        M = scalar_instance([0.3, -0.2, 0.8, 0.1, 0.0])
        z = 0.15
        U, V = fundamental_solutions(M, z)
        for k in range(3):
            classical = V[k][0, 0] * U[k + 1][0, 0] - V[k + 1][0, 0] * U[k][0, 0]
            assert wronskian(U, V, k)[0, 0] == pytest.approx(classical, abs=1e-12)


class TestGreen:
    def test_single_site_inverse(self):
        V1 = np.diag([0.4, -0.4])
        M = assemble_general(2, [V1], [])
        z = 0.1 + 0.2j
        G = green_block(M, z, 1, 1)
        assert np.allclose(G, np.linalg.inv(V1 - z * np.eye(2)), atol=1e-13)

    def test_matches_dense_inverse(self, rng):
        M = random_instance(rng, 2, 20)
        z = 0.7 + 0.3j
        dense = M.dense().astype(complex)
        R = np.linalg.inv(dense - z * np.eye(dense.shape[0]))
        scale = np.linalg.norm(R, 2)
        ev = GreenEvaluator(M, z)
        worst = 0.0
        for j in range(1, 21):
            for k in range(1, 21):
                blk = R[2 * (j - 1) : 2 * j, 2 * (k - 1) : 2 * k]
                worst = max(worst, np.abs(ev.block(j, k) - blk).max())
        assert worst <= 1e-8 * scale

    def test_real_energy_in_spectrum_rejected(self, xy_params):
        p = xy_params(n=12)
        M = assemble_block_jacobi(p, sample_disorder(p, 1))
        lam = eigensolve(M, want_vectors=False).eigenvalues[3]
        with pytest.raises(NumericalFailure):
            GreenEvaluator(M, lam)


class TestCharpoly:
    def test_single_site_identity(self, rng):
        for ell in (1, 2, 3):
            V1 = rng.normal(size=(ell, ell))
            V1 = V1 + V1.T
            M = assemble_general(ell, [V1], [])
            rep = charpoly_identity_check(M, 0.37)
            assert rep.residual <= 1e-12

    def test_random_instance_both_routes(self, rng):
        M = random_instance(rng, 2, 8)
        rep = charpoly_identity_check(M, 0.3)
        assert rep.identity_residual <= 1e-8
        assert rep.exterior_residual <= 1e-8

    def test_long_chain_stays_in_log_domain(self):
        # growth ~ e^{0.96 k} would overflow naive determinants by k ~ 700
        M = scalar_instance([0.0] * 2000)
        rep = charpoly_identity_check(M, 3.0)
        assert np.isfinite(rep.log_direct) and np.isfinite(rep.log_transfer)
        assert rep.log_direct > 600.0
        assert rep.residual <= 1e-8


class TestCompound:
    def test_first_compound_is_identity_map(self, rng):
        T = rng.normal(size=(4, 4))
        assert np.allclose(compound_matrix(T, 1), T, atol=1e-15)

    def test_top_compound_is_determinant(self, rng):
        T = rng.normal(size=(4, 4))
        c = compound_matrix(T, 4)
        assert c.shape == (1, 1)
        assert c[0, 0] == pytest.approx(np.linalg.det(T), rel=1e-10)

    def test_multiplicativity(self, rng):
        A = rng.normal(size=(4, 4))
        B = rng.normal(size=(4, 4))
        lhs = compound_matrix(A @ B, 2)
        rhs = compound_matrix(A, 2) @ compound_matrix(B, 2)
        assert np.allclose(lhs, rhs, atol=1e-10 * np.abs(rhs).max())


def test_symplectic_form_square():
    J = symplectic_form(2)
    assert np.array_equal(J @ J, -np.eye(4))
    assert np.array_equal(J.T, -J)
