"""SoV covector basis, wave functions and the diagonal B-operator family."""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BasisError, DomainError
from .model import ModelParams, transfer1
from .numerics import trig

# transforms with a larger (row-equilibrated) condition number count as singular
MAX_BASIS_CONDITION = 1e12


@dataclass(frozen=True)
class SovBasis:
    """Covectors ``<h| = <S| prod_k T1(xi_k)**h_k`` stacked as rows.

    Attributes:
        covector: the reference covector ``<S|``.
        transform: rows ordered as ``h_tuples``.
        h_tuples: lexicographic enumeration of ``{0..n-1}**N``.
        condition_estimate: condition number after row equilibration.
        components: local components used for ``<S|``.
        redraws: how many random redraws were needed.
    """

    params: ModelParams
    covector: np.ndarray
    transform: np.ndarray
    h_tuples: tuple
    condition_estimate: float
    components: tuple
    redraws: int = 0

    def row_index(self, h) -> int:
        idx = 0
        for v in h:
            idx = idx * self.params.n + int(v)
        return idx

    def solve(self, rhs):
        """Solve ``transform @ x = rhs`` with row equilibration."""
        scale = np.abs(self.transform).max(axis=1)
        return np.linalg.solve(self.transform / scale[:, None], np.asarray(rhs) / scale.reshape(-1, *([1] * (np.ndim(rhs) - 1))))


def h_tuples(n: int, N: int) -> tuple:
    return tuple(itertools.product(range(n), repeat=N))


def reference_covector(params: ModelParams, components) -> np.ndarray:
    """``<S| = (x_1..x_n)^{(x)N} Gamma_W^{-1}`` with ``Gamma_W = W^{(x)N}``."""
    w = params.twist.diagonalizer()
    local = np.asarray(components, dtype=complex) @ np.linalg.inv(w)
    out = np.ones(1, dtype=complex)
    for _ in range(params.N):
        out = np.kron(out, local)
    return out


def _draw_components(rng, n):
    return tuple(complex(np.exp(1j * rng.uniform(-np.pi, np.pi))) for _ in range(n))


def _assemble(params: ModelParams, covector, t_nodes):
    hs = h_tuples(params.n, params.N)
    rows = {}
    for h in hs:
        if not any(h):
            rows[h] = covector
            continue
        j = max(i for i, v in enumerate(h) if v)
        prev = h[:j] + (h[j] - 1,) + h[j + 1 :]
        rows[h] = rows[prev] @ t_nodes[j]
    transform = np.array([rows[h] for h in hs]).astype(complex)
    scale = np.abs(transform).max(axis=1)
    if np.any(scale == 0):
        return transform, hs, float("inf")
    cond = float(np.linalg.cond(transform / scale[:, None]))
    return transform, hs, cond


def build_sov_basis(params: ModelParams, components=None, max_redraws: int = 3, seed=None) -> SovBasis:
    """Build and validate the SoV covector basis.

    Args:
        params: model.
        components: ``n`` nonzero local components of ``<S|``; drawn as
            seeded unit-modulus numbers when omitted.
        max_redraws: redraws of random components before giving up.

    Raises:
        BasisError: when the transform is singular (always for explicit
            components, after ``max_redraws`` redraws otherwise).
    """
    # rows are long products of T1(xi_k); extended precision keeps the
    # recursion consistent when the factors commute only to round-off
    t_nodes = [transfer1(params, x, dtype=np.clongdouble) for x in params.xi]
    rng = np.random.default_rng(params.seed if seed is None else seed)
    explicit = components is not None
    attempts = 1 if explicit else max_redraws + 1
    cond = float("inf")
    for attempt in range(attempts):
        comps = tuple(complex(c) for c in components) if explicit else _draw_components(rng, params.n)
        if len(comps) != params.n:
            raise ValueError(f"need {params.n} covector components")
        covector = reference_covector(params, comps)
        transform, hs, cond = _assemble(params, covector, t_nodes)
        if np.isfinite(cond) and cond < MAX_BASIS_CONDITION:
            return SovBasis(params, covector, transform, hs, cond, comps, attempt)
    raise BasisError(f"SoV transform is singular (condition {cond:.3e})")


def wave_function(params: ModelParams, samples, hs=None) -> np.ndarray:
    """``w_h = prod_k x_k**h_k`` in the basis enumeration order."""
    hs = h_tuples(params.n, params.N) if hs is None else hs
    x = np.asarray(samples, dtype=complex)
    powers = np.array(hs)
    return np.prod(x[None, :] ** powers, axis=1)


def decompose(basis: SovBasis, state) -> np.ndarray:
    """SoV wave function ``<h|state>`` of an arbitrary state."""
    return basis.transform @ np.asarray(state)


def reconstruct_eigenvector(basis: SovBasis, t1_samples) -> np.ndarray:
    """State with SoV wave function ``prod_k t1(xi_k)**h_k`` (so ``<S|t> = 1``)."""
    if basis.condition_estimate > 1e10:
        warnings.warn(f"SoV transform poorly conditioned ({basis.condition_estimate:.2e})", RuntimeWarning)
    return basis.solve(wave_function(basis.params, t1_samples, basis.h_tuples))


def b_eigenvalues(params: ModelParams, lam, hs=None) -> np.ndarray:
    """``b_h(lam) = prod_a (lam/xi_a - xi_a/lam)**(n-1-h_a) (lam q/xi_a - xi_a/(q lam))**h_a``."""
    hs = np.array(h_tuples(params.n, params.N) if hs is None else hs)
    xi = np.array(params.xi)
    q = params.q
    lo = trig(lam, xi)
    hi = trig(lam * q, xi)
    return np.prod(lo[None, :] ** (params.n - 1 - hs) * hi[None, :] ** hs, axis=1)


def b_operator(basis: SovBasis, lam) -> np.ndarray:
    """``B(lam)`` diagonal on the SoV covectors: ``<h|B(lam) = b_h(lam)<h|``."""
    b = b_eigenvalues(basis.params, lam, basis.h_tuples)
    return basis.solve(b[:, None] * basis.transform)


def reference_state(params: ModelParams) -> np.ndarray:
    """``|t0> = e_1^{(x)N}``."""
    state = np.zeros(params.dim, dtype=complex)
    state[0] = 1
    return state


def reference_eigenvalue(params: ModelParams, m: int, lam) -> complex:
    """Eigenvalue of ``T_m`` on ``|t0>`` (diagonal twist).

    Sum over ``m``-subsets ``I`` of ``prod k_i`` times ordered products of
    ``a_i(lam/q**r)``, with ``a_1`` the matched factor and ``a_{i>1}`` the
    unmatched one.
    """
    if m == 0:
        return 1.0 + 0j
    k = params.twist.values
    xi = np.array(params.xi)
    q = params.q
    total = 0j
    for subset in itertools.combinations(range(params.n), m):
        term = complex(np.prod([k[i] for i in subset]))
        for r, i in enumerate(subset):
            mu = lam / q**r
            term *= np.prod(trig(mu * q, xi)) if i == 0 else np.prod(trig(mu, xi))
        total += term
    return total


def check_reference_state(params: ModelParams, points, hierarchy=None) -> float:
    """Max relative eigen-residual of ``|t0>`` for ``T_1`` and ``T_2`` over ``points``."""
    from .fusion import transfer2_direct

    if not params.twist.is_diagonal:
        raise DomainError("reference state needs a diagonal twist")
    t0 = reference_state(params)
    worst = 0.0
    for z in points:
        for m, op in ((1, transfer1(params, z)), (2, transfer2_direct(params, z))):
            ev = reference_eigenvalue(params, m, z)
            resid = np.linalg.norm(op @ t0 - ev * t0) / max(np.abs(op).max(), 1e-300)
            worst = max(worst, float(resid))
    return worst


def aba_eigenvector(basis: SovBasis, roots, tol: float = 1e-10) -> np.ndarray:
    """``prod_a B(lam_a) |t0>``; roots must avoid every ``+-xi_m``."""
    params = basis.params
    t0 = reference_state(params)
    roots = list(roots)
    for r in roots:
        for x in params.xi:
            if min(abs(r - x), abs(r + x)) <= tol * abs(x):
                raise DomainError(f"Bethe root {r} collides with inhomogeneity {x}")
    if not roots:
        return t0
    w = basis.transform @ t0
    for r in roots:
        w = w * b_eigenvalues(params, r, basis.h_tuples)
    return basis.solve(w)
