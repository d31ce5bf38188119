"""Lattice model: R-matrix, twists, monodromy and the fundamental transfer matrix.

Operators on the quantum space are plain ``numpy`` arrays of shape
``(n**N, n**N)`` in the lexicographic basis with site 1 slowest, which is
exactly the ``np.kron`` ordering.

Fractional powers of the spectral parameter are carried explicitly through a
``log_lam`` argument. The local root used at site ``a`` is
``exp((log_lam - log xi_a) / n)``, so every site sees the same branch of
``lam**(1/n)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import factorial
from typing import Sequence

import numpy as np

from .errors import ConsistencyError, DomainError, ParameterError

DenseOperator = np.ndarray

_VARIANTS = ("diagonal", "gl3_cyclic2", "gl3_cyclic3")
# fixed probe used by twist_matrix when no deformation is supplied
_PROBE_ETA = 0.37 + 0.21j


@dataclass(frozen=True)
class TwistSpec:
    """Twist (quasi-periodic boundary) matrix specification.

    ``values`` holds ``k_1..k_n`` for the diagonal variant and
    ``(alpha, beta, gamma)`` for the two cyclic gl3 variants.
    """

    variant: str
    values: tuple

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ParameterError(f"unknown twist variant {self.variant!r}")
        object.__setattr__(self, "values", tuple(complex(v) for v in self.values))
        if self.variant != "diagonal" and len(self.values) != 3:
            raise ParameterError("cyclic twists take exactly (alpha, beta, gamma)")

    @classmethod
    def diagonal(cls, *k):
        return cls("diagonal", tuple(k))

    @classmethod
    def cyclic2(cls, alpha, beta, gamma):
        return cls("gl3_cyclic2", (alpha, beta, gamma))

    @classmethod
    def cyclic3(cls, alpha, beta, gamma):
        return cls("gl3_cyclic3", (alpha, beta, gamma))

    @property
    def rank(self) -> int:
        return len(self.values)

    @property
    def is_diagonal(self) -> bool:
        return self.variant == "diagonal"

    def matrix(self) -> np.ndarray:
        if self.is_diagonal:
            return np.diag(np.array(self.values))
        a, b, c = self.values
        k = np.zeros((3, 3), dtype=complex)
        if self.variant == "gl3_cyclic2":
            k[0, 2], k[1, 0], k[2, 1] = a, b, c
        else:
            k[0, 1], k[1, 2], k[2, 0] = b, c, a
        return k

    def eigenvalues(self) -> np.ndarray:
        if self.is_diagonal:
            return np.array(self.values)
        a, b, c = self.values
        k0 = complex(a * b * c) ** (1 / 3)
        return k0 * np.exp(2j * np.pi * np.array([0, -1, 1]) / 3)

    def diagonalizer(self) -> np.ndarray:
        """``W`` with ``K = W diag(eigenvalues) W^{-1}``."""
        if self.is_diagonal:
            return np.eye(self.rank, dtype=complex)
        a, b, c = self.values
        cols = []
        for k in self.eigenvalues():
            if self.variant == "gl3_cyclic2":
                cols.append([1, b / k, b * c / k**2])
            else:
                cols.append([1, a * c / k**2, a / k])
        return np.array(cols, dtype=complex).T

    def validate(self, tol: float = 1e-9):
        if self.is_diagonal:
            if any(v == 0 for v in self.values):
                raise ParameterError("degenerate twist: zero eigenvalue")
        elif np.prod(self.values) == 0:
            raise ParameterError("degenerate twist: alpha*beta*gamma = 0")
        ev = self.eigenvalues()
        scale = max(abs(ev))
        for i, j in itertools.combinations(range(len(ev)), 2):
            if abs(ev[i] - ev[j]) <= tol * scale:
                raise ParameterError(
                    f"twist is not simple spectrum: eigenvalues {i + 1} and {j + 1} coincide"
                )


@dataclass(frozen=True)
class ModelParams:
    """Chain definition; validated on construction.

    Raises:
        ParameterError: if q is too close to a low-order root of unity, the
            inhomogeneities violate the shift-separation condition or the
            twist is degenerate.
    """

    n: int
    N: int
    eta: complex
    xi: tuple
    twist: TwistSpec
    tolerance: float = 1e-9
    seed: int = 0
    _validated: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "eta", complex(self.eta))
        object.__setattr__(self, "xi", tuple(complex(x) for x in self.xi))
        if self._validated:
            self.validate()

    def validate(self):
        n, N = self.n, self.N
        if n < 2 or N < 1:
            raise ParameterError("need rank n >= 2 and N >= 1 sites")
        if len(self.xi) != N:
            raise ParameterError(f"expected {N} inhomogeneities, got {len(self.xi)}")
        if any(x == 0 for x in self.xi):
            raise ParameterError("inhomogeneities must be nonzero")
        if self.twist.rank != n:
            raise ParameterError(f"twist has rank {self.twist.rank}, model rank is {n}")
        if not self.twist.is_diagonal and n != 3:
            raise ParameterError("cyclic twists exist only for n = 3")
        for k in range(1, 2 * n + 1):
            if abs(self.q**k - 1) <= self.tolerance:
                raise ParameterError(f"q is too close to a root of unity of order {k}")
        for a, b in itertools.permutations(range(N), 2):
            ratio = self.xi[a] / self.xi[b]
            for h in range(-n, n + 1):
                for sign in (1, -1):
                    if abs(ratio - sign * self.q**h) <= self.tolerance * abs(ratio):
                        raise ParameterError(
                            f"inhomogeneity condition violated: xi_{a + 1} = "
                            f"{'' if sign > 0 else '-'}q^{h} xi_{b + 1}"
                        )
        self.twist.validate(self.tolerance)

    @property
    def q(self) -> complex:
        return complex(np.exp(self.eta))

    @property
    def dim(self) -> int:
        return self.n**self.N

    @property
    def log_xi(self) -> np.ndarray:
        return np.log(np.array(self.xi))

    def with_xi(self, xi) -> ModelParams:
        return ModelParams(self.n, self.N, self.eta, tuple(xi), self.twist, self.tolerance, self.seed)


def _check_lam(lam):
    if lam == 0:
        raise DomainError("spectral parameter must be nonzero")


def r_matrix(n: int, lam, q, root=None, dtype=complex) -> np.ndarray:
    """Principal-gradation R-matrix on ``V (x) V`` in ``np.kron`` ordering.

    Args:
        n: rank.
        lam: spectral parameter.
        q: deformation.
        root: the branch of ``lam**(1/n)``; principal if omitted.
        dtype: complex dtype of the result (``np.clongdouble`` for extended precision).
    """
    lam = np.asarray(lam, dtype=dtype)
    _check_lam(lam)
    q = np.asarray(q, dtype=dtype)
    if root is None:
        root = np.exp(np.log(lam) / n)
    root = np.asarray(root, dtype=dtype)
    w = q - 1 / q
    r = np.zeros((n * n, n * n), dtype=dtype)
    for k in range(n):
        for p in range(n):
            r[k * n + p, k * n + p] = lam * q - 1 / (lam * q) if k == p else lam - 1 / lam
    for k in range(n):
        for p in range(k + 1, n):
            e = n - 2 * (p - k)
            r[k * n + p, p * n + k] = w * root ** (-e)
            r[p * n + k, k * n + p] = w * root**e
    return r


def r_matrix_homogeneous(n: int, lam, q) -> np.ndarray:
    """Homogeneous-gradation R-matrix (integer powers only)."""
    lam = complex(lam)
    _check_lam(lam)
    w = q - 1 / q
    r = np.zeros((n * n, n * n), dtype=complex)
    for k in range(n):
        for p in range(n):
            r[k * n + p, k * n + p] = lam * q - 1 / (lam * q) if k == p else lam - 1 / lam
            if k < p:
                r[k * n + p, p * n + k] = w / lam
            elif k > p:
                r[k * n + p, p * n + k] = w * lam
    return r


def gradation_matrix(n: int, lam, log_lam=None) -> np.ndarray:
    """``S(lam) = diag(lam**(2k/n))``, ``k = 0..n-1``."""
    if log_lam is None:
        log_lam = np.log(complex(lam))
    return np.diag(np.exp(2 * np.arange(n) * log_lam / n))


def check_gradation_similarity(lam, q, n: int = 3) -> float:
    """Relative residual of ``R_P(lam) = S_a^{-1} R_H(lam) S_a``."""
    s = np.kron(gradation_matrix(n, lam), np.eye(n))
    rp = r_matrix(n, lam, q)
    rh = r_matrix_homogeneous(n, lam, q)
    diff = rp - np.linalg.solve(s, rh @ s)
    return float(np.abs(diff).max() / np.abs(rp).max())


def permutation_operator(n: int) -> np.ndarray:
    p = np.zeros((n * n, n * n))
    for a in range(n):
        for b in range(n):
            p[b * n + a, a * n + b] = 1
    return p


def twist_matrix(spec: TwistSpec, q=None, rng=None):
    """Return ``(K, K_J, W_K)`` after checking the scalar Yang-Baxter relation.

    The relation ``R12(lam) K1 K2 = K2 K1 R12(lam)`` is probed at three
    random points.
    """
    spec.validate()
    k = spec.matrix()
    kj = np.diag(spec.eigenvalues())
    w = spec.diagonalizer()
    if np.abs(w @ kj - k @ w).max() > 1e-10 * np.abs(k).max():
        raise ConsistencyError("twist diagonalizer is inconsistent")
    q = np.exp(_PROBE_ETA) if q is None else q
    rng = np.random.default_rng(0) if rng is None else rng
    kk = np.kron(k, k)
    for _ in range(3):
        lam = np.exp(rng.uniform(-1, 1) + 1j * rng.uniform(-2.5, 2.5))
        r = r_matrix(spec.rank, lam, q)
        res = np.abs(r @ kk - kk @ r).max() / (np.abs(r).max() * np.abs(kk).max())
        if res > 1e-12:
            raise ConsistencyError(f"twist does not commute with the R-matrix (residual {res:.2e})")
    return k, kj, w


def monodromy_blocks(params: ModelParams, lam, log_lam=None, r_builder=None, dtype=complex) -> np.ndarray:
    """Untwisted monodromy ``R_{aN}(lam/xi_N)...R_{a1}(lam/xi_1)`` as auxiliary blocks.

    Returns an array ``C`` of shape ``(n, n, D, D)`` where ``C[a, b]`` is the
    quantum-space operator in auxiliary row ``a``, column ``b``. Sites are
    contracted one at a time on a tensor carrying the auxiliary index
    explicitly. ``dtype`` selects the working precision; every derived
    scalar (``q``, ``lam/xi_j`` and the branch roots) is formed in it.
    """
    lam = np.asarray(lam, dtype=dtype)
    _check_lam(lam)
    if log_lam is None:
        log_lam = np.log(lam)
    log_lam = np.asarray(log_lam, dtype=dtype)
    n, N = params.n, params.N
    q = np.exp(np.asarray(params.eta, dtype=dtype))
    xi = np.asarray(params.xi, dtype=dtype)
    roots = np.exp((log_lam - np.log(xi)) / n)
    d = params.dim
    # x[a_out, s_1..s_N, b, col]
    x = np.zeros((n,) + (n,) * N + (n, d), dtype=dtype)
    eye = np.eye(d, dtype=dtype).reshape((n,) * N + (d,))
    for b in range(n):
        x[b, ..., b, :] = eye
    for j in range(N):
        mu = lam / xi[j]
        if r_builder is None:
            r = r_matrix(n, mu, q, roots[j], dtype=dtype)
        else:
            r = r_builder(n, complex(mu), complex(q))
        r4 = r.reshape(n, n, n, n)
        x = np.tensordot(r4, x, axes=([2, 3], [0, j + 1]))
        # tensordot puts (a_out, s_j) first; move s_j back into place
        x = np.moveaxis(x, 1, j + 1)
    # x[a, s..., b, col] -> C[a, b, row, col]
    x = x.reshape(n, d, n, d)
    return np.ascontiguousarray(x.transpose(0, 2, 1, 3))


def monodromy(params: ModelParams, lam, log_lam=None, r_builder=None, twist=None) -> np.ndarray:
    """Twisted monodromy ``K_a R_{aN}...R_{a1}`` as blocks ``(n, n, D, D)``."""
    k = params.twist.matrix() if twist is None else twist
    c = monodromy_blocks(params, lam, log_lam, r_builder)
    return np.einsum("ac,cbij->abij", k, c)


def transfer1(params: ModelParams, lam, log_lam=None, r_builder=None, twist=None, dtype=complex) -> DenseOperator:
    """Fundamental transfer matrix ``T1(lam) = tr_a M_a(lam)``."""
    k = params.twist.matrix() if twist is None else twist
    c = monodromy_blocks(params, lam, log_lam, r_builder, dtype=dtype)
    return np.einsum("ba,abij->ij", np.asarray(k, dtype=dtype), c)


def local_states(params: ModelParams) -> np.ndarray:
    """Basis states as rows of site-local indices (0-based), site 1 slowest."""
    return np.array(list(itertools.product(range(params.n), repeat=params.N)), dtype=int).reshape(
        params.dim, params.N
    )


def occupation_numbers(params: ModelParams) -> np.ndarray:
    """``occ[s, i]`` = number of sites in local state ``i`` for basis state ``s``."""
    states = local_states(params)
    return np.stack([(states == i).sum(axis=1) for i in range(params.n)], axis=1)


def number_operators(params: ModelParams) -> list:
    """Diagonal operators ``N_1..N_n`` counting sites in each local state."""
    occ = occupation_numbers(params)
    return [np.diag(occ[:, i].astype(complex)) for i in range(params.n)]


def sector_dimension(nu: Sequence[int]) -> int:
    out = factorial(sum(nu))
    for v in nu:
        out //= factorial(v)
    return out


def qdet_scalar(params: ModelParams, lam) -> complex:
    """Quantum determinant of the twisted monodromy."""
    lam = complex(lam)
    _check_lam(lam)
    q = params.q
    value = complex(np.linalg.det(params.twist.matrix()))
    for x in params.xi:
        value *= lam * q / x - x / (q * lam)
        for k in range(1, params.n):
            value *= lam / (q**k * x) - q**k * x / lam
    return value


def random_spectral_point(rng, margin: float = 0.2, radius=(-0.7, 0.7)) -> complex:
    """Random nonzero point with argument away from the negative real axis."""
    return complex(np.exp(rng.uniform(*radius) + 1j * rng.uniform(-np.pi + margin, np.pi - margin)))


def random_params(
    n: int,
    N: int,
    seed: int = 0,
    variant: str = "diagonal",
    tolerance: float = 1e-9,
) -> ModelParams:
    """Draw generic parameters; re-draws until validation passes."""
    rng = np.random.default_rng(seed)
    for _ in range(1000):
        re = rng.uniform(0.2, 1.0) * rng.choice([-1, 1])
        eta = complex(re, rng.uniform(-1, 1))
        xi = tuple(
            complex(rng.uniform(0.5, 2) * np.exp(1j * rng.uniform(-np.pi + 0.2, np.pi - 0.2)))
            for _ in range(N)
        )
        if variant == "diagonal":
            vals = tuple(
                complex(rng.uniform(0.5, 2) * np.exp(1j * rng.uniform(-np.pi, np.pi))) for _ in range(n)
            )
        else:
            vals = tuple(
                complex(rng.uniform(0.5, 2) * np.exp(1j * rng.uniform(-np.pi, np.pi))) for _ in range(3)
            )
        try:
            return ModelParams(n, N, eta, xi, TwistSpec(variant, vals), tolerance, seed)
        except ParameterError:
            continue
    raise ParameterError("could not draw valid parameters")


def _embed13(n: int, r: np.ndarray) -> np.ndarray:
    """``R_13`` on three copies from a two-copy operator."""
    p23 = np.kron(np.eye(n), permutation_operator(n))
    return p23 @ np.kron(r, np.eye(n)) @ p23


def yang_baxter_residual(n: int, lam, mu, q) -> float:
    """Relative residual of ``R12(lam/mu) R13(lam) R23(mu) = R23(mu) R13(lam) R12(lam/mu)``."""
    ll, lm = np.log(complex(lam)), np.log(complex(mu))
    root_l, root_m = np.exp(ll / n), np.exp(lm / n)
    eye = np.eye(n)
    r12 = np.kron(r_matrix(n, lam / mu, q, root_l / root_m), eye)
    r13 = _embed13(n, r_matrix(n, lam, q, root_l))
    r23 = np.kron(eye, r_matrix(n, mu, q, root_m))
    lhs = r12 @ r13 @ r23
    rhs = r23 @ r13 @ r12
    return float(np.abs(lhs - rhs).max() / np.abs(lhs).max())


def regularity_residual(n: int, q) -> float:
    """``max |R(1) - (q - 1/q) P|``."""
    return float(np.abs(r_matrix(n, 1.0, q) - (q - 1 / q) * permutation_operator(n)).max())


def verify_model_suite(params: ModelParams, seed=None, samples: int = 3) -> dict:
    """Named residuals for the R-matrix, twist and occupation-number identities."""
    rng = np.random.default_rng(params.seed if seed is None else seed)
    n, q = params.n, params.q
    res = {
        "yang_baxter": max(
            yang_baxter_residual(n, random_spectral_point(rng), random_spectral_point(rng), q)
            for _ in range(samples)
        ),
        "regularity": regularity_residual(n, q),
    }
    k = params.twist.matrix()
    kk = np.kron(k, k)
    worst = 0.0
    for _ in range(samples):
        r = r_matrix(n, random_spectral_point(rng), q)
        worst = max(worst, float(np.abs(r @ kk - kk @ r).max() / (np.abs(r).max() * np.abs(kk).max())))
    res["twist_symmetry"] = worst
    if n == 3:
        res["gradation_similarity"] = check_gradation_similarity(random_spectral_point(rng), q)
    if params.twist.is_diagonal:
        nops = number_operators(params)
        t1 = transfer1(params, random_spectral_point(rng))
        res["number_operator_commutator"] = max(
            float(np.abs(m @ t1 - t1 @ m).max() / np.abs(t1).max()) for m in nops
        )
        res["number_operator_sum"] = float(np.abs(sum(nops) - params.N * np.eye(params.dim)).max())
    return res
