"""Random block Jacobi matrices with 2x2 anisotropic hopping.

The operator acts on vectors u = (u(1), ..., u(n)) with u(k) in C^ell as

    (M u)(k) = V_k u(k) - S_k u(k+1) - S_{k-1}^t u(k-1),

i.e. the dense matrix carries V_k on the diagonal and -S_k / -S_k^t on the
off-diagonals.  The anisotropic single-band chain is the special case
ell = 2, V_k = nu_k sigma_z, S_k = mu_k S(gamma_k) with

    S(gamma) = [[1, gamma], [-gamma, -1]],   det S(gamma) = gamma^2 - 1.

An equivalent "hat" layout groups the two internal components into two
scalar chains coupled by an antisymmetric band; `assemble_hat_form` builds
it and `interleave_permutation` maps it back onto the block layout.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError

SIGMA_Z = np.diag([1.0, -1.0])


class TrivialDisorderWarning(UserWarning):
    """Raised when a disorder distribution is almost surely constant."""


def anisotropy_block(gamma: float) -> np.ndarray:
    """Hopping block S(gamma) = [[1, gamma], [-gamma, -1]]."""
    return np.array([[1.0, gamma], [-gamma, -1.0]])


# ---------------------------------------------------------------------------
# single-site disorder distributions


@dataclass
class SingleSiteDistribution:
    """Distribution of one potential entry nu_k.

    Supported kinds:
      two_point  P(nu = a) = p, P(nu = b) = 1 - p
      uniform    Lebesgue on [a, b]
      discrete   finitely many atoms with explicit weights
    """

    kind: str
    a: float = 0.0
    b: float = 0.0
    p: float = 0.5
    points: tuple[float, ...] = ()
    weights: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("two_point", "uniform", "discrete"):
            raise ConfigError(f"unknown distribution kind {self.kind!r}")
        if self.kind == "two_point" and not 0.0 <= self.p <= 1.0:
            raise ConfigError(f"two_point weight p={self.p} outside [0, 1]")
        if self.kind == "uniform" and self.b < self.a:
            raise ConfigError(f"uniform endpoints out of order: [{self.a}, {self.b}]")
        if self.kind == "discrete":
            if len(self.points) == 0 or len(self.points) != len(self.weights):
                raise ConfigError("discrete distribution needs matching points/weights")
            if any(w < 0 for w in self.weights):
                raise ConfigError("discrete weights must be nonnegative")
            total = float(sum(self.weights))
            if abs(total - 1.0) > 1e-12:
                raise ConfigError(f"discrete weights sum to {total}, expected 1")
        if self.is_trivial:
            warnings.warn(
                "disorder distribution is almost surely constant",
                TrivialDisorderWarning,
                stacklevel=2,
            )

    @classmethod
    def two_point(cls, a: float, b: float, p: float = 0.5) -> "SingleSiteDistribution":
        return cls(kind="two_point", a=float(a), b=float(b), p=float(p))

    @classmethod
    def uniform(cls, a: float, b: float) -> "SingleSiteDistribution":
        return cls(kind="uniform", a=float(a), b=float(b))

    @classmethod
    def discrete(cls, points: Sequence[float], weights: Sequence[float]) -> "SingleSiteDistribution":
        return cls(
            kind="discrete",
            points=tuple(float(x) for x in points),
            weights=tuple(float(w) for w in weights),
        )

    @property
    def is_trivial(self) -> bool:
        if self.kind == "two_point":
            return self.a == self.b or self.p in (0.0, 1.0)
        if self.kind == "uniform":
            return self.a == self.b
        live = {x for x, w in zip(self.points, self.weights) if w > 0.0}
        return len(live) <= 1

    def support(self) -> tuple[float, float]:
        """Closed hull [min, max] of the support."""
        if self.kind == "discrete":
            live = [x for x, w in zip(self.points, self.weights) if w > 0.0]
            return min(live), max(live)
        if self.kind == "two_point":
            live = [x for x, w in ((self.a, self.p), (self.b, 1.0 - self.p)) if w > 0.0]
            return min(live), max(live)
        return self.a, self.b

    def support_lattice(self, samples: int) -> np.ndarray:
        """Deterministic grid of support points used for periodic approximants.

        Atomic distributions return their atoms exactly; the uniform kind
        returns an evenly spaced grid including both endpoints.
        """
        if self.kind == "two_point":
            return np.unique([x for x, w in ((self.a, self.p), (self.b, 1.0 - self.p)) if w > 0.0])
        if self.kind == "discrete":
            return np.unique([x for x, w in zip(self.points, self.weights) if w > 0.0])
        if samples < 2 or self.a == self.b:
            return np.array([0.5 * (self.a + self.b)])
        return np.linspace(self.a, self.b, samples)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "two_point":
            return np.where(rng.random(size) < self.p, self.a, self.b)
        if self.kind == "uniform":
            return rng.uniform(self.a, self.b, size)
        return rng.choice(np.asarray(self.points), size=size, p=np.asarray(self.weights))

    def to_config(self) -> dict:
        if self.kind == "two_point":
            return {"kind": "two_point", "a": self.a, "b": self.b, "p": self.p}
        if self.kind == "uniform":
            return {"kind": "uniform", "a": self.a, "b": self.b}
        return {"kind": "discrete", "points": list(self.points), "weights": list(self.weights)}


# ---------------------------------------------------------------------------
# model parameters and disorder realizations


@dataclass
class ModelParams:
    """Parameters of the ell = 2 anisotropic chain on n sites.

    `mu` and `gamma` are per-bond sequences of length n - 1; `rho` is the
    common law of the i.i.d. diagonal potential entries nu_1, ..., nu_n.
    """

    n: int
    mu: np.ndarray
    gamma: np.ndarray
    rho: SingleSiteDistribution
    ell: int = field(default=2, init=False)

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ConfigError(f"need at least 2 sites, got n={self.n}")
        self.mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        self.gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        if self.mu.size == 1:
            self.mu = np.full(self.n - 1, self.mu[0])
        if self.gamma.size == 1:
            self.gamma = np.full(self.n - 1, self.gamma[0])
        if self.mu.shape != (self.n - 1,) or self.gamma.shape != (self.n - 1,):
            raise ConfigError(
                f"mu/gamma must have length n-1={self.n - 1}, "
                f"got {self.mu.shape} and {self.gamma.shape}"
            )
        if np.any(self.mu == 0.0):
            raise ConfigError("hopping strengths mu must be nonzero")
        # |gamma| = 1 makes every hopping block singular and the transfer
        # matrix formalism meaningless, so it is rejected outright.
        if np.any(np.abs(self.gamma) == 1.0):
            raise ConfigError("anisotropy gamma = +-1 gives singular hopping blocks")

    @classmethod
    def xy(
        cls,
        n: int,
        gamma: float,
        rho: SingleSiteDistribution,
        mu: float = 1.0,
    ) -> "ModelParams":
        """Homogeneous couplings: mu_k = mu and gamma_k = gamma on every bond."""
        return cls(n=n, mu=np.array([mu]), gamma=np.array([gamma]), rho=rho)

    def to_config(self) -> dict:
        mu = self.mu
        gamma = self.gamma
        mu_cfg = f"const:{mu[0]}" if np.all(mu == mu[0]) else list(map(float, mu))
        gamma_cfg = float(gamma[0]) if np.all(gamma == gamma[0]) else list(map(float, gamma))
        return {
            "ell": self.ell,
            "n": self.n,
            "gamma": gamma_cfg,
            "mu": mu_cfg,
            "rho": self.rho.to_config(),
        }


@dataclass
class DisorderRealization:
    """One sampled potential sequence, tagged by its counter-mode RNG key."""

    seed: int
    index: int
    nu: np.ndarray


_U64 = (1 << 64) - 1


def realization_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator for realization `index` of stream `seed`.

    Philox keyed on (seed, index) makes every realization independently
    addressable: ensembles can be evaluated in any order or in parallel
    without changing a single sample.
    """
    return np.random.Generator(np.random.Philox(key=[int(seed) & _U64, int(index) & _U64]))


def sample_disorder(params: ModelParams, seed: int, index: int = 0) -> DisorderRealization:
    """Draw the n diagonal entries nu_k ~ rho, i.i.d., for one realization."""
    rng = realization_rng(seed, index)
    nu = params.rho.sample(rng, params.n)
    return DisorderRealization(seed=int(seed), index=int(index), nu=np.asarray(nu, dtype=float))


# ---------------------------------------------------------------------------
# assembled matrices


@dataclass
class BlockJacobiMatrix:
    """Block tridiagonal matrix given by diagonal blocks V and hoppings S.

    V has shape (n, ell, ell) with V_k symmetric, S has shape (n-1, ell, ell)
    with every det S_k nonzero.  `dense()` realizes the n*ell square matrix
    with the sign convention stated in the module docstring.
    """

    ell: int
    n: int
    V: np.ndarray
    S: np.ndarray

    def __post_init__(self) -> None:
        self.V = np.asarray(self.V, dtype=float)
        self.S = np.asarray(self.S, dtype=float)
        if self.V.shape != (self.n, self.ell, self.ell):
            raise ConfigError(f"V has shape {self.V.shape}, expected {(self.n, self.ell, self.ell)}")
        if self.S.shape != (self.n - 1, self.ell, self.ell):
            raise ConfigError(f"S has shape {self.S.shape}, expected {(self.n - 1, self.ell, self.ell)}")
        asym = np.max(np.abs(self.V - np.transpose(self.V, (0, 2, 1)))) if self.n else 0.0
        if asym != 0.0:
            raise ConfigError(f"diagonal blocks must be exactly symmetric, max asymmetry {asym}")
        dets = np.linalg.det(self.S)
        if np.any(dets == 0.0) or np.any(np.abs(dets) < 1e-300):
            raise ConfigError("hopping blocks must be invertible")

    def dense(self) -> np.ndarray:
        ell, n = self.ell, self.n
        M = np.zeros((n * ell, n * ell))
        for k in range(n):
            M[k * ell:(k + 1) * ell, k * ell:(k + 1) * ell] = self.V[k]
        for k in range(n - 1):
            M[k * ell:(k + 1) * ell, (k + 1) * ell:(k + 2) * ell] = -self.S[k]
            M[(k + 1) * ell:(k + 2) * ell, k * ell:(k + 1) * ell] = -self.S[k].T
        return M

    def fingerprint(self) -> str:
        """Short content hash, stable across runs, for provenance lines."""
        h = hashlib.sha1()
        h.update(np.int64([self.ell, self.n]).tobytes())
        h.update(np.ascontiguousarray(self.V).tobytes())
        h.update(np.ascontiguousarray(self.S).tobytes())
        return h.hexdigest()[:12]


@dataclass
class HatBlockMatrix:
    """Same operator in the two-chain layout [[A, B], [-B, -A]].

    A is the symmetric tridiagonal single-band part (diagonal nu, off
    diagonal -mu) and B the antisymmetric anisotropy band with
    B[j, j+1] = -mu_j gamma_j.  Conjugating `dense()` by the interleaving
    permutation recovers the block Jacobi dense matrix exactly.
    """

    n: int
    A: np.ndarray
    B: np.ndarray

    def dense(self) -> np.ndarray:
        return np.block([[self.A, self.B], [-self.B, -self.A]])


def interleave_permutation(n: int) -> np.ndarray:
    """Permutation p with p[2k] = k, p[2k+1] = n + k (hat -> block order)."""
    perm = np.empty(2 * n, dtype=int)
    perm[0::2] = np.arange(n)
    perm[1::2] = n + np.arange(n)
    return perm


def assemble_block_jacobi(params: ModelParams, real: DisorderRealization) -> BlockJacobiMatrix:
    """Build the ell = 2 chain matrix for one disorder realization."""
    if real.nu.shape != (params.n,):
        raise ConfigError(f"realization has {real.nu.shape[0]} potential entries, expected {params.n}")
    V = real.nu[:, None, None] * SIGMA_Z[None, :, :]
    S = params.mu[:, None, None] * np.array([anisotropy_block(g) for g in params.gamma])
    return BlockJacobiMatrix(ell=2, n=params.n, V=V, S=S)


def assemble_hat_form(params: ModelParams, real: DisorderRealization) -> HatBlockMatrix:
    """Build the interleaved two-chain layout of the same realization."""
    if real.nu.shape != (params.n,):
        raise ConfigError(f"realization has {real.nu.shape[0]} potential entries, expected {params.n}")
    n = params.n
    A = np.diag(real.nu) + np.diag(-params.mu, 1) + np.diag(-params.mu, -1)
    band = params.mu * params.gamma
    B = np.diag(-band, 1) + np.diag(band, -1)
    return HatBlockMatrix(n=n, A=A, B=B)


def assemble_general(
    ell: int,
    V_list: Sequence[np.ndarray],
    S_list: Sequence[np.ndarray],
) -> BlockJacobiMatrix:
    """Assemble from explicit block sequences (len(S_list) = len(V_list) - 1)."""
    n = len(V_list)
    if len(S_list) != n - 1:
        raise ConfigError(f"expected {n - 1} hopping blocks, got {len(S_list)}")
    V = np.stack([np.asarray(v, dtype=float) for v in V_list])
    S = np.stack([np.asarray(s, dtype=float) for s in S_list]) if n > 1 else np.zeros((0, ell, ell))
    return BlockJacobiMatrix(ell=ell, n=n, V=V, S=S)


def random_instance(
    rng: np.random.Generator,
    ell: int,
    n: int,
    potential_scale: float = 1.5,
    hopping_scale: float = 1.2,
    min_hopping_det: float = 0.3,
) -> BlockJacobiMatrix:
    """Generic random instance: symmetric V blocks, invertible dense S blocks.

    Hopping blocks are redrawn until their determinant clears
    min_hopping_det, which keeps transfer matrices well conditioned.
    """
    V_list = []
    for _ in range(n):
        raw = rng.uniform(-potential_scale, potential_scale, (ell, ell))
        V_list.append(0.5 * (raw + raw.T))
    S_list = []
    while len(S_list) < n - 1:
        raw = rng.uniform(-hopping_scale, hopping_scale, (ell, ell))
        if abs(np.linalg.det(raw)) >= min_hopping_det:
            S_list.append(raw)
    return assemble_general(ell, V_list, S_list)


def write_dense_csv(matrix: BlockJacobiMatrix, path) -> None:
    """Dump the dense matrix as CSV with a dimension header line."""
    dense = matrix.dense()
    with open(path, "w") as fh:
        fh.write(f"# randblock matrix n={matrix.n} ell={matrix.ell}\n")
        for row in dense:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


# ---------------------------------------------------------------------------
# JSON config parsing (shared by the CLI)


def rho_from_config(cfg: dict) -> SingleSiteDistribution:
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError("rho must be an object with a 'kind' field")
    kind = cfg["kind"]
    try:
        if kind == "two_point":
            return SingleSiteDistribution.two_point(cfg["a"], cfg["b"], cfg.get("p", 0.5))
        if kind == "uniform":
            return SingleSiteDistribution.uniform(cfg["a"], cfg["b"])
        if kind == "discrete":
            return SingleSiteDistribution.discrete(cfg["points"], cfg["weights"])
    except KeyError as exc:
        raise ConfigError(f"rho config missing field {exc}") from exc
    raise ConfigError(f"unknown rho kind {kind!r}")


def _coupling_from_config(value, n: int, name: str) -> np.ndarray:
    """Parse 'const:X', a scalar, or an explicit per-bond list."""
    if isinstance(value, str):
        if not value.startswith("const:"):
            raise ConfigError(f"{name} string form must be 'const:<value>', got {value!r}")
        try:
            return np.array([float(value.split(":", 1)[1])])
        except ValueError as exc:
            raise ConfigError(f"bad {name} constant in {value!r}") from exc
    if isinstance(value, (int, float)):
        return np.array([float(value)])
    if isinstance(value, (list, tuple)):
        arr = np.asarray(value, dtype=float)
        if arr.shape != (n - 1,):
            raise ConfigError(f"{name} list must have length n-1={n - 1}, got {len(arr)}")
        return arr
    raise ConfigError(f"cannot parse {name} entry of type {type(value).__name__}")


def params_from_config(cfg: dict) -> ModelParams:
    """Parse the model section of a run config into ModelParams."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    for key in ("n", "gamma", "rho"):
        if key not in cfg:
            raise ConfigError(f"config missing required field {key!r}")
    ell = cfg.get("ell", 2)
    if ell != 2:
        raise ConfigError("scalar-anisotropy configs describe ell=2 chains; use assemble_general otherwise")
    n = cfg["n"]
    if not isinstance(n, int) or n < 2:
        raise ConfigError(f"n must be an integer >= 2, got {n!r}")
    mu = _coupling_from_config(cfg.get("mu", 1.0), n, "mu")
    gamma = _coupling_from_config(cfg["gamma"], n, "gamma")
    rho = rho_from_config(cfg["rho"])
    return ModelParams(n=n, mu=mu, gamma=gamma, rho=rho)
