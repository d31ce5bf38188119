"""Quantum spectral curve: delta functions, Q-functions and the Q-operator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, IllConditionedError, QFunctionError
from .model import ModelParams, random_spectral_point
from .numerics import LaurentPoly, nullspace_direction, trig

GAP_THRESHOLD = 1e-6
ROOT_MARGIN = 1e-6


def _require_diagonal(params: ModelParams):
    if not params.twist.is_diagonal:
        raise DomainError("the spectral curve is implemented for diagonal twists only")


def delta_constant(params: ModelParams, i: int) -> complex:
    """``delta_0 = k_i`` (``i`` is 1-based)."""
    _require_diagonal(params)
    if not 1 <= i <= params.n:
        raise ValueError(f"delta choice must lie in 1..{params.n}")
    return complex(params.twist.values[i - 1])


def delta1(params: ModelParams, i: int, lam) -> complex:
    xi = np.array(params.xi)
    return delta_constant(params, i) * complex(np.prod(trig(lam * params.q, xi)))


def delta_m(params: ModelParams, i: int, m: int, lam) -> complex:
    """``delta_m(lam) = prod_{r<m} delta_1(lam/q**r)``; ``delta_0 = 1`` (empty product)."""
    if not 0 <= m <= params.n:
        raise ValueError(f"m must lie in 0..{params.n}")
    value = 1.0 + 0j
    for r in range(m):
        value *= delta1(params, i, lam / params.q**r)
    return value


@dataclass
class QCurveData:
    """Q-function of one eigenvalue for one choice of ``delta_0``."""

    delta_choice: int
    M: int
    phi: LaurentPoly
    roots: np.ndarray
    kernel_gap: tuple
    root_margin: float
    curve_residual: float = float("nan")

    @property
    def gap_ratio(self) -> float:
        smin, second = self.kernel_gap
        return smin / second if second > 0 else float("inf")


def _phi_matrix(params, x, i, M, rho2, eps=0):
    """Rows ``q**eps delta1(xi_a) phi(xi_a/q) - x_a phi(xi_a)`` in a whitened coefficient basis.

    Each row is divided by the size of its two terms (not by the row itself,
    which vanishes on a true eigenvalue). Columns are then whitened against
    the stacked term basis, so singular values do not depend on how ``phi``
    is parametrized. Returns ``(matrix, R)`` with coefficients ``R^{-1} v``.
    """
    q = params.q
    xi = np.array(params.xi)
    j = np.arange(M + 1)
    shifted, plain = [], []
    for a, z in enumerate(xi):
        zs = z / q
        shifted.append(q**eps * delta1(params, i, z) * zs ** (-M) * (zs * zs / rho2) ** j)
        plain.append(x[a] * z ** (-M) * (z * z / rho2) ** j)
    shifted, plain = np.array(shifted), np.array(plain)
    scale = np.maximum(np.linalg.norm(shifted, axis=1), np.linalg.norm(plain, axis=1))
    scale = np.maximum(scale, 1e-300)[:, None]
    _, r = np.linalg.qr(np.vstack([shifted / scale, plain / scale]))
    return np.linalg.solve(r.T, ((shifted - plain) / scale).T).T, r


def solve_phi(
    params: ModelParams, record, i: int, gap_threshold: float = GAP_THRESHOLD, strict: bool = True
) -> QCurveData:
    """Solve the discrete Q-equation for ``record`` with ``delta_0 = k_i``.

    ``phi(lam) = lam**-M sum_j c_j lam**2j`` with ``M = N - nu_i``. The kernel
    gap ratio ``sigma_min / sigma_2`` certifies a one-dimensional kernel.
    With ``strict=False`` the best least-squares direction is returned even
    when the checks fail, which is what negative controls need.

    Raises:
        QFunctionError: if the kernel is not one dimensional or a root of
            ``phi`` collides with an inhomogeneity.
    """
    _require_diagonal(params)
    if record.sector is None:
        raise DomainError("record carries no sector label")
    nu_i = record.sector[i - 1]
    M = params.N - nu_i
    x = np.asarray(record.samples, dtype=complex)
    xi = np.array(params.xi)
    rho2 = float(np.exp(np.mean(np.log(np.abs(xi) ** 2))))
    a, r = _phi_matrix(params, x, i, M, rho2)
    vec, smin, second = nullspace_direction(a)
    if M == 0:
        # one whitened column has unit reference scale
        second = 1.0
    if strict and smin > gap_threshold * second:
        raise QFunctionError(f"no unique Q-function (sigma_min {smin:.2e}, sigma_2 {second:.2e})")
    coeffs = np.linalg.solve(r, vec) / rho2 ** np.arange(M + 1)
    lead = coeffs[-1]
    coeffs = coeffs * (abs(lead) / lead) / np.linalg.norm(coeffs)
    phi = LaurentPoly(-M, coeffs)
    roots = np.sqrt(np.roots(coeffs[::-1]).astype(complex)) if M > 0 else np.zeros(0, dtype=complex)
    margin = float("inf")
    for root in roots:
        if root == 0:
            margin = 0.0
        for z in xi:
            margin = min(margin, min(abs(root - z), abs(root + z)) / abs(z))
    if strict and margin <= ROOT_MARGIN:
        raise QFunctionError(f"phi root collides with an inhomogeneity (margin {margin:.2e})")
    return QCurveData(i, M, phi, roots, (smin, second), margin)


def phi_from_roots(roots, lam) -> complex:
    """``prod_a (lam/lam_a - lam_a/lam)``."""
    return complex(np.prod([trig(lam, r) for r in roots]))


def curve_terms(params: ModelParams, tower, phi, i: int, lam) -> np.ndarray:
    """Summands ``(-1)**l delta_l(lam) phi(lam/q**l) t_{n-l}(lam/q**l)``, ``l = 0..n``."""
    q = params.q
    out = []
    for l in range(params.n + 1):
        z = lam / q**l
        out.append((-1) ** l * delta_m(params, i, l, lam) * phi(z) * tower.t(params.n - l, z))
    return np.array(out)


def check_spectral_curve(params: ModelParams, record, qdata: QCurveData, sample_count: int = 25, seed=None):
    """Max relative residual of the quantum spectral curve.

    Random points are normalized by their own largest summand; the
    structural points ``xi_a q**s`` (``s = -1..n-1``) by the median term
    scale of the random points, because every summand vanishes at
    ``xi_a/q``.
    """
    rng = np.random.default_rng(params.seed + 3 if seed is None else seed)
    tower = record.tower(params)
    worst, scales = 0.0, []
    for _ in range(sample_count):
        lam = random_spectral_point(rng)
        terms = curve_terms(params, tower, qdata.phi, qdata.delta_choice, lam)
        scale = np.abs(terms).max()
        scales.append(scale)
        worst = max(worst, abs(terms.sum()) / scale)
    ref = float(np.median(scales)) if scales else 1.0
    for z in params.xi:
        for s in range(-1, params.n):
            terms = curve_terms(params, tower, qdata.phi, qdata.delta_choice, z * params.q**s)
            worst = max(worst, abs(terms.sum()) / max(np.abs(terms).max(), ref))
    qdata.curve_residual = float(worst)
    return float(worst)


def structural_zero_terms(params: ModelParams, record, qdata: QCurveData) -> float:
    """Largest summand at the points ``xi_a/q`` relative to the summand scale at ``xi_a``."""
    tower = record.tower(params)
    worst = 0.0
    for z in params.xi:
        ref = np.abs(curve_terms(params, tower, qdata.phi, qdata.delta_choice, z)).max()
        terms = curve_terms(params, tower, qdata.phi, qdata.delta_choice, z / params.q)
        worst = max(worst, float(np.abs(terms).max() / ref))
    return worst


def _lagrange(nodes, b, lam):
    out = 1.0 + 0j
    for c, z in enumerate(nodes):
        if c != b:
            out *= trig(lam, z) / trig(nodes[b], z)
    return out


def determinant_matrices(params: ModelParams, samples, i: int, lam, aux_point, eps: int = 0):
    """``(C, Delta(lam))`` of the determinant representation.

    ``eps = 1`` replaces ``delta_1`` by ``q delta_1`` (odd ``nu_i``).
    """
    q = params.q
    xi = np.array(params.xi)
    nodes = np.append(xi, aux_point)
    N = params.N
    c = np.zeros((N, N), dtype=complex)
    delta = np.zeros((N, N), dtype=complex)
    for a in range(N):
        d1 = q**eps * delta1(params, i, xi[a])
        num = np.prod(trig(xi[a] / q, xi))
        for b in range(N):
            c[a, b] = _lagrange(nodes, b, xi[a] / q)
            den = np.prod([trig(xi[b], z) for k, z in enumerate(nodes) if k != b])
            delta[a, b] = -trig(lam, aux_point) / trig(lam, xi[b]) * num / den
        c[a, a] -= samples[a] / d1
    return c, delta


def phi_determinant_rep(params: ModelParams, record, i: int, lam, aux_point=None, retries: int = 3) -> complex:
    """Q-function from the determinant formula, up to a constant.

    For odd ``nu_i`` the formula represents ``lam * phi``, so the result is
    divided by ``lam``.
    """
    _require_diagonal(params)
    eps = record.sector[i - 1] % 2
    xi = np.array(params.xi)
    candidates = [aux_point] if aux_point is not None else []
    candidates += [xi[k % params.N] / params.q ** (2 + k // params.N) for k in range(retries + 1)]
    last = float("nan")
    for z in candidates[: retries + 1]:
        c, delta = determinant_matrices(params, record.samples, i, lam, z, eps)
        cond = float(np.linalg.cond(c))
        last = cond
        if not np.isfinite(cond) or cond > 1e12:
            continue
        ratio = np.linalg.det(c + delta) / np.linalg.det(c)
        pref = np.prod([trig(lam, x) / trig(z, x) for x in xi])
        return complex(ratio * pref / lam**eps)
    raise IllConditionedError("det C vanishes for every auxiliary point tried", last)


def build_q_operator(params: ModelParams, i: int, lam, spectrum) -> np.ndarray:
    """``Q_i(lam) = V diag(phi_t(lam)) V^{-1}`` over a complete spectrum."""
    _require_diagonal(params)
    records = list(spectrum)
    if len(records) != params.dim or getattr(spectrum, "complete", True) is False:
        raise DomainError("Q-operator needs a complete validated spectrum")
    vecs = np.array([r.eigenvector for r in records]).T
    vals = np.array([_phi_of(params, r, i).phi(lam) for r in records])
    return vecs @ np.diag(vals) @ np.linalg.inv(vecs)


def _phi_of(params, record, i):
    if i not in record.phi:
        record.phi[i] = solve_phi(params, record, i)
    return record.phi[i]


def q_operator_determinants(params: ModelParams, i: int, spectrum) -> float:
    """Smallest normalized ``|det Q_i(xi_a)|`` over ``a``.

    Each eigenvalue is scaled by the geometric mean of ``|phi_t(xi_b)|`` over
    ``b``, which removes the arbitrary normalization of every ``phi_t``.
    """
    vals = np.array([[_phi_of(params, r, i).phi(x) for x in params.xi] for r in spectrum])
    scale = np.exp(np.mean(np.log(np.abs(vals)), axis=1))
    normalized = vals / scale[:, None]
    return float(np.abs(np.prod(normalized, axis=0)).min())
