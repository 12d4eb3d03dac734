"""Transfer matrices, fundamental solutions, Green blocks, and the
characteristic polynomial identity.

State convention: the transfer step at site k acts on x_{k-1} = (u(k-1),
S_{k-1} u(k)) and produces x_k = (u(k), S_k u(k+1)), so

    A_k = [[0, S_{k-1}^{-1}], [-S_{k-1}^t, (V_k - E) S_{k-1}^{-1}]].

A_k satisfies A_k^t J A_k = J exactly (transpose, not adjoint), also for
complex E.  Boundary hoppings are padded with identities, S_0 = S_L = I,
so that fundamental solutions on a chain of L sites are indexed k = 0..L+1.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import NumericalFailure
from .model import BlockJacobiMatrix

OVERFLOW_LIMIT = 1e250
PRODUCT_RESCALE_THRESHOLD = 1e100
WRONSKIAN_COND_LIMIT = 1e12


def symplectic_form(ell: int) -> np.ndarray:
    J = np.zeros((2 * ell, 2 * ell))
    J[:ell, ell:] = np.eye(ell)
    J[ell:, :ell] = -np.eye(ell)
    return J


@dataclass
class TransferMatrix:
    """One 2ell x 2ell transfer step at a fixed (possibly complex) energy."""

    matrix: np.ndarray
    energy: complex

    @property
    def ell(self) -> int:
        return self.matrix.shape[0] // 2

    def symplectic_defect(self) -> float:
        """max |A^t J A - J|; zero in exact arithmetic for symmetric V."""
        J = symplectic_form(self.ell)
        return float(np.max(np.abs(self.matrix.T @ J @ self.matrix - J)))


def transfer_matrix(V_k: np.ndarray, S_prev: np.ndarray, E: complex) -> TransferMatrix:
    """Build A_k from the diagonal block V_k and the incoming hopping S_{k-1}."""
    V_k = np.asarray(V_k)
    S_prev = np.asarray(S_prev)
    ell = V_k.shape[0]
    if np.imag(E) == 0.0:
        E = float(np.real(E))  # keep real arithmetic for real energies
    dtype = complex if (np.iscomplexobj(V_k) or np.imag(E) != 0.0) else float
    W = np.linalg.inv(S_prev)
    A = np.zeros((2 * ell, 2 * ell), dtype=dtype)
    A[:ell, ell:] = W
    A[ell:, :ell] = -S_prev.T
    A[ell:, ell:] = (V_k - E * np.eye(ell)) @ W
    return TransferMatrix(matrix=A, energy=E)


def propagate(x0: np.ndarray, transfers: Sequence[TransferMatrix]) -> np.ndarray:
    """Apply the transfer steps in order; returns states[k] = A_k ... A_1 x0.

    x0 may be a vector or a matrix of column states; states[0] is x0 and
    states[k][:ell] is u(k), states[k][ell:] is S_k u(k+1).
    """
    x0 = np.asarray(x0)
    out = np.empty((len(transfers) + 1,) + x0.shape, dtype=complex if any(
        np.iscomplexobj(t.matrix) for t in transfers) or np.iscomplexobj(x0) else float)
    out[0] = x0
    for k, t in enumerate(transfers, start=1):
        out[k] = t.matrix @ out[k - 1]
        if np.max(np.abs(out[k])) > OVERFLOW_LIMIT:
            raise NumericalFailure(
                f"transfer propagation overflowed after {k} steps; "
                "use the rescaled product routines for long chains"
            )
    return out


def _padded_hopping(M: BlockJacobiMatrix) -> np.ndarray:
    """S_0..S_L with identity padding at both ends, shape (L+1, ell, ell)."""
    eye = np.eye(M.ell)
    return np.concatenate([eye[None], M.S, eye[None]]) if M.n > 1 else np.stack([eye, eye])


@dataclass
class MatrixSolution:
    """ell x ell matrix solution X(k), k = 0..L+1, of the eigenvalue recursion

        S_k X(k+1) + S_{k-1}^t X(k-1) = (V_k - z) X(k),   k = 1..L,

    together with the padded hopping sequence it was built against.
    """

    values: np.ndarray
    hopping: np.ndarray
    z: complex
    kind: str

    def __getitem__(self, k: int) -> np.ndarray:
        return self.values[k]

    @property
    def L(self) -> int:
        return self.values.shape[0] - 2

    def recursion_residual(self, M: BlockJacobiMatrix, z: complex | None = None) -> float:
        z = self.z if z is None else z
        worst = 0.0
        for k in range(1, self.L + 1):
            lhs = self.hopping[k] @ self.values[k + 1] + self.hopping[k - 1].T @ self.values[k - 1]
            rhs = (M.V[k - 1] - z * np.eye(M.ell)) @ self.values[k]
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        return worst


def fundamental_solutions(M: BlockJacobiMatrix, z: complex) -> tuple[MatrixSolution, MatrixSolution]:
    """Forward and backward fundamental solutions at spectral parameter z.

    The forward solution U has U(0) = 0, U(1) = I; the backward solution V
    has V(L) = I, V(L+1) = 0.  Overflow raises NumericalFailure: these
    unscaled solutions are meant for moderate chain lengths.
    """
    ell, L = M.ell, M.n
    S = _padded_hopping(M)
    eye = np.eye(ell)
    dtype = complex if np.imag(z) != 0.0 else float

    U = np.zeros((L + 2, ell, ell), dtype=dtype)
    U[1] = eye
    for k in range(1, L + 1):
        rhs = (M.V[k - 1] - z * eye) @ U[k] - S[k - 1].T @ U[k - 1]
        U[k + 1] = np.linalg.solve(S[k], rhs)
        if np.max(np.abs(U[k + 1])) > OVERFLOW_LIMIT:
            raise NumericalFailure(f"forward solution overflowed at site {k + 1}")

    Vs = np.zeros((L + 2, ell, ell), dtype=dtype)
    Vs[L] = eye
    for k in range(L, 0, -1):
        rhs = (M.V[k - 1] - z * eye) @ Vs[k] - S[k] @ Vs[k + 1]
        Vs[k - 1] = np.linalg.solve(S[k - 1].T, rhs)
        if np.max(np.abs(Vs[k - 1])) > OVERFLOW_LIMIT:
            raise NumericalFailure(f"backward solution overflowed at site {k - 1}")

    return (
        MatrixSolution(values=U, hopping=S, z=z, kind="forward"),
        MatrixSolution(values=Vs, hopping=S, z=z, kind="backward"),
    )


def wronskian(U: MatrixSolution, V: MatrixSolution, k: int = 0) -> np.ndarray:
    """Constant Wronskian W(k) = V(k)^t S_k U(k+1) - (S_k V(k+1))^t U(k).

    Built with transposes throughout, so constancy in k holds for complex z
    as well.  For the fundamental pair, W(0) = V(0)^t.
    """
    S_k = U.hopping[k]
    return V[k].T @ S_k @ U[k + 1] - (S_k @ V[k + 1]).T @ U[k]


class GreenEvaluator:
    """Green blocks of (M - z)^{-1} from one fundamental-solution pass."""

    def __init__(self, M: BlockJacobiMatrix, z: complex):
        self.M = M
        self.z = z
        self.U, self.V = fundamental_solutions(M, z)
        self.W = wronskian(self.U, self.V, 0)
        cond = np.linalg.cond(self.W)
        if not np.isfinite(cond) or cond > WRONSKIAN_COND_LIMIT:
            raise NumericalFailure(
                f"Wronskian condition number {cond:.3e}: z is on or too close to the spectrum"
            )

    def block(self, j: int, k: int) -> np.ndarray:
        """Block G(j, k), sites labeled 1..L."""
        L = self.M.n
        if not (1 <= j <= L and 1 <= k <= L):
            raise ValueError(f"sites must lie in 1..{L}, got ({j}, {k})")
        if j <= k:
            return self.U[j] @ np.linalg.solve(self.W, self.V[k].T)
        return self.V[j] @ np.linalg.solve(self.W.T, self.U[k].T)


def green_block(M: BlockJacobiMatrix, z: complex, j: int, k: int) -> np.ndarray:
    """Single Green block; build a GreenEvaluator to query many blocks."""
    return GreenEvaluator(M, z).block(j, k)


# ---------------------------------------------------------------------------
# characteristic polynomial identity


def compound_matrix(T: np.ndarray, p: int) -> np.ndarray:
    """p-th multiplicative compound: minors det T[rows, cols] over p-subsets.

    Row/column subsets are enumerated in lexicographic order.  Intended for
    small matrices; the charpoly check only needs the single bottom-right
    element, which it computes directly.
    """
    idx = list(combinations(range(T.shape[0]), p))
    C = np.empty((len(idx), len(idx)), dtype=T.dtype)
    for a, rows in enumerate(idx):
        for b, cols in enumerate(idx):
            C[a, b] = np.linalg.det(T[np.ix_(rows, cols)])
    return C


def _scaled_forward_determinant(M: BlockJacobiMatrix, E: complex) -> tuple[complex, float]:
    """(sign, log|det|) of P(L+1) for the forward solution, with rescaling."""
    ell, L = M.ell, M.n
    S = _padded_hopping(M)
    eye = np.eye(ell)
    dtype = complex if np.imag(E) != 0.0 else float
    prev = np.zeros((ell, ell), dtype=dtype)
    cur = eye.astype(dtype)
    log_scale = 0.0
    for k in range(1, L + 1):
        nxt = np.linalg.solve(S[k], (M.V[k - 1] - E * eye) @ cur - S[k - 1].T @ prev)
        prev, cur = cur, nxt
        peak = np.max(np.abs(cur))
        if peak > PRODUCT_RESCALE_THRESHOLD:
            prev = prev / peak
            cur = cur / peak
            log_scale += np.log(peak)
    sign, logdet = np.linalg.slogdet(cur)
    if sign == 0:
        raise NumericalFailure("fundamental solution determinant vanished")
    return sign, logdet + ell * log_scale


def _scaled_transfer_minor(M: BlockJacobiMatrix, E: complex) -> tuple[complex, float]:
    """(sign, log|det|) of the bottom-right ell-minor of A_L ... A_1.

    This is the top exterior power matrix element of the full transfer
    product, accumulated independently of the solution recursion.
    """
    ell, L = M.ell, M.n
    S = _padded_hopping(M)
    T = np.eye(2 * ell, dtype=complex if np.imag(E) != 0.0 else float)
    log_scale = 0.0
    for k in range(1, L + 1):
        T = transfer_matrix(M.V[k - 1], S[k - 1], E).matrix @ T
        peak = np.max(np.abs(T))
        if peak > PRODUCT_RESCALE_THRESHOLD:
            T = T / peak
            log_scale += np.log(peak)
    sign, logdet = np.linalg.slogdet(T[ell:, ell:])
    if sign == 0:
        raise NumericalFailure("transfer product minor vanished")
    return sign, logdet + ell * log_scale


@dataclass
class CharpolyReport:
    """Log-domain comparison of det(M - E) against the transfer side."""

    log_direct: float
    sign_direct: complex
    log_transfer: float
    sign_transfer: complex
    identity_residual: float
    exterior_residual: float

    @property
    def residual(self) -> float:
        return max(self.identity_residual, self.exterior_residual)


def _ratio_residual(sign_a: complex, log_a: float, sign_b: complex, log_b: float) -> float:
    return float(abs(1.0 - (sign_b / sign_a) * np.exp(log_b - log_a)))


def charpoly_identity_check(M: BlockJacobiMatrix, E: complex) -> CharpolyReport:
    """Verify det(M - E) = (prod_k det S_k) * det P(L+1) in the log domain.

    Two independent right-hand sides are formed: the solution recursion for
    P, and the bottom-right compound element of the explicit transfer
    product.  Both are compared multiplicatively so the check stays sharp
    at chain lengths where the determinant itself over/underflows.
    """
    dense = M.dense() - E * np.eye(M.n * M.ell)
    sign_direct, log_direct = np.linalg.slogdet(dense)
    if sign_direct == 0:
        raise NumericalFailure("E is an eigenvalue of M; identity check undefined")

    s_signs, s_logs = np.linalg.slogdet(M.S)
    sign_p, log_p = _scaled_forward_determinant(M, E)
    sign_rec = np.prod(s_signs) * sign_p
    log_rec = float(np.sum(s_logs)) + log_p

    sign_m, log_m = _scaled_transfer_minor(M, E)
    return CharpolyReport(
        log_direct=float(log_direct),
        sign_direct=sign_direct,
        log_transfer=log_rec,
        sign_transfer=sign_rec,
        identity_residual=_ratio_residual(sign_direct, float(log_direct), sign_rec, log_rec),
        exterior_residual=_ratio_residual(sign_p, log_p, sign_m, log_m),
    )
