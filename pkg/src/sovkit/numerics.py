"""Scalar and polynomial substrate.

Laurent polynomials with a parity structure, interpolation with asymptotic
constraints, finite-difference Newton refinement and kernel extraction.
Everything here is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import ConvergenceError, IllConditionedError, InterpolationError

# rank-deficiency threshold for the small dense systems used here
_MAX_CONDITION = 1e13


def fractional_power(lam, s, log_lam=None):
    """``lam**s`` for rational ``s``, with an explicit branch for non-integers.

    Integer exponents never need a branch. Otherwise ``log_lam`` fixes the
    branch; it defaults to the principal logarithm.
    """
    s = Fraction(s)
    if s.denominator == 1:
        return np.asarray(lam, dtype=complex) ** int(s)
    if log_lam is None:
        log_lam = np.log(np.asarray(lam, dtype=complex))
    return np.exp(float(s) * log_lam)


@dataclass(frozen=True)
class LaurentPoly:
    """``value(lam) = lam**shift * sum_k coefficients[k] * lam**(2k)``.

    ``coefficients`` has shape ``(degree + 1, *rest)`` so operator-valued
    polynomials share the same machinery as scalar ones.
    """

    shift: Fraction
    coefficients: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        coeffs = np.array(self.coefficients, dtype=complex)
        if coeffs.ndim == 0 or coeffs.shape[0] == 0:
            raise ValueError("LaurentPoly needs at least one coefficient")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "shift", Fraction(self.shift))
        if not self.degenerate and not np.any(coeffs[-1]):
            if np.any(coeffs):
                raise ValueError("leading coefficient vanishes; flag the polynomial as degenerate")
            object.__setattr__(self, "degenerate", True)

    @property
    def degree(self) -> int:
        return self.coefficients.shape[0] - 1

    def __call__(self, lam, log_lam=None):
        return self.value(lam, log_lam)

    def value(self, lam, log_lam=None):
        lam = complex(lam)
        x = lam * lam
        acc = np.zeros_like(self.coefficients[0])
        for c in self.coefficients[::-1]:
            acc = acc * x + c
        return fractional_power(lam, self.shift, log_lam) * acc

    def scaled(self, factor) -> LaurentPoly:
        return LaurentPoly(self.shift, self.coefficients * factor, self.degenerate)


@dataclass(frozen=True)
class ReconstructionReport:
    poly: LaurentPoly
    consistency_residual: float
    condition_estimate: float
    tolerance: float = 1e-9

    @property
    def valid(self) -> bool:
        return self.consistency_residual < self.tolerance


def _max_abs(*arrays) -> float:
    return max(float(np.max(np.abs(a))) if np.size(a) else 0.0 for a in arrays)


def reconstruct_laurent(
    nodes: Sequence[complex],
    values,
    leading_pos=None,
    leading_neg=None,
    shift=0,
    degree: int | None = None,
    log_nodes: Sequence[complex] | None = None,
    tolerance: float = 1e-9,
) -> ReconstructionReport:
    """Rebuild a :class:`LaurentPoly` from node samples and asymptotics.

    ``leading_pos`` is the top coefficient ``c_d`` (behaviour as
    ``lam -> infinity``), ``leading_neg`` the bottom one ``c_0``. With ``d``
    nodes and both asymptotics the data overdetermine the polynomial by
    one: the symmetric combination of the two asymptotics is imposed and
    the antisymmetric one is returned as ``consistency_residual`` (the
    sum rule). Any other overdetermined layout falls back to least squares
    with the relative residual reported.

    Values may carry trailing dimensions (operator-valued reconstruction).
    """
    nodes = np.asarray(nodes, dtype=complex)
    values = np.asarray(values, dtype=complex)
    if values.shape[0] != nodes.shape[0]:
        raise ValueError("one value per node is required")
    if degree is None:
        degree = len(nodes) - 1 + (leading_pos is not None) + (leading_neg is not None)
    d = int(degree)
    shift = Fraction(shift)
    n_asym = (leading_pos is not None) + (leading_neg is not None)
    if len(nodes) + n_asym < d + 1:
        raise ValueError("not enough data for the requested degree")

    sq = nodes * nodes
    for i in range(len(sq)):
        for j in range(i):
            if abs(sq[i] - sq[j]) <= 1e-13 * max(abs(sq[i]), abs(sq[j])):
                raise InterpolationError(f"nodes {i} and {j} collide in lam**2")

    # scaled unknowns u_k = c_k * rho**(2k) keep the Vandermonde block balanced
    rho2 = float(np.exp(np.mean(np.log(np.abs(sq))))) if len(sq) else 1.0
    scale = rho2 ** np.arange(d + 1)
    rest = values.shape[1:]
    if log_nodes is None:
        log_nodes = np.log(nodes)
    pref = np.array([fractional_power(z, shift, lz) for z, lz in zip(nodes, log_nodes)])
    rows = [(sq[j] / rho2) ** np.arange(d + 1) for j in range(len(nodes))]
    rhs = [values[j] / pref[j] for j in range(len(nodes))]

    sum_rule = n_asym == 2 and len(nodes) == d
    lp = None if leading_pos is None else np.asarray(leading_pos, dtype=complex)
    ln = None if leading_neg is None else np.asarray(leading_neg, dtype=complex)
    if sum_rule:
        g = complex(np.prod(nodes))
        sgn = (-1) ** d
        row = np.zeros(d + 1, dtype=complex)
        row[d] = g / scale[d] / 2
        row[0] += sgn / g / 2
        rows.append(row)
        rhs.append((g * lp + sgn * ln / g) / 2)
    else:
        if lp is not None:
            row = np.zeros(d + 1, dtype=complex)
            row[d] = 1 / scale[d]
            rows.append(row)
            rhs.append(lp)
        if ln is not None:
            row = np.zeros(d + 1, dtype=complex)
            row[0] = 1.0
            rows.append(row)
            rhs.append(ln)

    a = np.array(rows)
    b = np.array(rhs).reshape(len(rows), -1)
    cond = float(np.linalg.cond(a))
    if not np.isfinite(cond) or cond > _MAX_CONDITION:
        raise IllConditionedError("rank-deficient node system", cond)
    if a.shape[0] == d + 1:
        u = np.linalg.solve(a, b)
        residual = 0.0
    else:
        u = np.linalg.lstsq(a, b, rcond=None)[0]
        residual = float(np.linalg.norm(a @ u - b) / max(np.linalg.norm(b), 1e-300))
    coeffs = (u / scale[:, None]).reshape((d + 1,) + rest)

    if sum_rule:
        g = complex(np.prod(nodes))
        sgn = (-1) ** d
        fit = (g * coeffs[d] - sgn * coeffs[0] / g) / 2
        expected = (g * lp - sgn * ln / g) / 2
        # size of the polynomial itself at |lam| = rho, so vanishing asymptotics stay well scaled
        natural = _max_abs(u) / np.sqrt(rho2) ** d
        norm = max(_max_abs(g * lp, ln / g, g * coeffs[d], coeffs[0] / g), natural)
        residual = _max_abs(fit - expected) / max(norm, 1e-300)

    degenerate = not np.any(np.abs(coeffs[-1]) > 1e-14 * max(_max_abs(coeffs), 1e-300))
    poly = LaurentPoly(shift, coeffs, degenerate=degenerate)
    return ReconstructionReport(poly, residual, cond, tolerance)


def shifted_nodes(params, h) -> np.ndarray:
    """Nodes ``xi_b / q**h_b``."""
    return np.asarray(params.xi, dtype=complex) / params.q ** np.asarray(h)


def trig(lam, a):
    """The ubiquitous ``lam/a - a/lam``."""
    return lam / a - a / lam


def interpolation_weight(params, m: int, l: int, h: Sequence[int], lam) -> complex:
    """Interpolation function for the rank-``m`` transfer matrix.

    Equals one at ``xi_l / q**h_l`` and zero at the other shifted nodes; it
    also vanishes at the central zeros ``xi_b q**r`` (``r = 1..m-1``) and
    carries the balance factor that splits the two asymptotic conditions
    symmetrically. ``l`` is zero-based.
    """
    h = tuple(int(x) for x in h)
    if len(h) != params.N or any(not 0 <= x < params.n for x in h):
        raise ValueError("h must hold N entries in 0..n-1")
    q = params.q
    nodes = shifted_nodes(params, h)
    xi = np.asarray(params.xi, dtype=complex)
    t = q ** (-sum(h))
    nu = nodes[l]

    value = (t * lam / nu + nu / (t * lam)) / (t + 1 / t)
    for b in range(params.N):
        for r in range(1, m):
            zero = xi[b] * q**r
            den = trig(nu, zero)
            if abs(den) < 1e-13:
                raise InterpolationError(f"node {l} hits the central zero of site {b}")
            value *= trig(lam, zero) / den
    for b in range(params.N):
        if b == l:
            continue
        den = trig(nu, nodes[b])
        if abs(den) < 1e-13:
            raise InterpolationError(f"nodes {l} and {b} collide")
        value *= trig(lam, nodes[b]) / den
    return complex(value)


@dataclass
class NewtonResult:
    x: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    condition: float = float("nan")
    history: list = field(default_factory=list)


def fd_jacobian(fn, x, f0=None, rel_step=1e-7):
    """Central-difference Jacobian of a holomorphic map ``C^N -> C^N``."""
    x = np.asarray(x, dtype=complex)
    cols = []
    for j in range(x.size):
        step = rel_step * (1 + abs(x[j]))
        e = np.zeros_like(x)
        e[j] = step
        cols.append((np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2 * step))
    return np.array(cols).T


def newton_refine(
    residual_fn: Callable[[np.ndarray], np.ndarray],
    seed,
    max_iter: int = 20,
    tol: float = 1e-11,
    rel_step: float = 1e-7,
) -> NewtonResult:
    """Newton iteration with a finite-difference Jacobian.

    Returns a converged :class:`NewtonResult` or raises
    :class:`ConvergenceError` carrying the last iterate.
    """
    x = np.array(seed, dtype=complex)
    f = np.asarray(residual_fn(x), dtype=complex)
    norm = float(np.linalg.norm(f))
    history = [norm]
    cond = float("nan")
    for it in range(max_iter + 1):
        if norm <= tol:
            return NewtonResult(x, norm, it, True, cond, history)
        if it == max_iter:
            break
        jac = fd_jacobian(residual_fn, x, f, rel_step)
        cond = float(np.linalg.cond(jac))
        if not np.isfinite(cond) or cond > 1e15:
            result = NewtonResult(x, norm, it, False, cond, history)
            raise ConvergenceError(f"singular Jacobian (condition {cond:.3e})", result)
        x = x - np.linalg.solve(jac, f)
        f = np.asarray(residual_fn(x), dtype=complex)
        norm = float(np.linalg.norm(f))
        history.append(norm)
        if not np.isfinite(norm):
            break
    result = NewtonResult(x, norm, len(history) - 1, False, cond, history)
    raise ConvergenceError(f"Newton did not converge (residual {norm:.3e})", result)


def nullspace_direction(matrix):
    """Right-singular direction of the smallest singular value.

    Returns ``(vector, sigma_min, sigma_second)``. Missing singular values of
    a wide matrix count as zeros, so a wide matrix always has
    ``sigma_min == 0``.
    """
    a = np.asarray(matrix, dtype=complex)
    rows, cols = a.shape
    if rows < cols - 1:
        raise ValueError("need at least cols - 1 rows")
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    s = np.concatenate([s, np.zeros(max(0, cols - len(s)))])[:cols]
    vec = vh[-1].conj()
    second = float(s[-2]) if cols >= 2 else float("inf")
    return vec, float(s[-1]), second
