"""Spectrum by exact diagonalization and by the SoV polynomial system."""

from __future__ import annotations

import itertools
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import CompletenessError, ConvergenceError, DomainError
from .fusion import cosh_asymptotic_constant, central_zero_factor, laurent_shape
from .model import (
    ModelParams,
    number_operators,
    qdet_scalar,
    random_spectral_point,
    sector_dimension,
    transfer1,
)
from .numerics import LaurentPoly, interpolation_weight, newton_refine, reconstruct_laurent, trig
from .sov import SovBasis, build_sov_basis, reconstruct_eigenvector

SectorLabel = tuple


def all_sectors(n: int, N: int) -> list:
    return [nu for nu in itertools.product(range(N + 1), repeat=n) if sum(nu) == N]


@dataclass
class OracleResult:
    """Dense eigendecomposition of ``T1(lam0)``."""

    params: ModelParams
    lam0: complex
    eigenvalues: np.ndarray
    vectors: np.ndarray
    sectors: list | None
    min_gap: float
    simple: bool
    _samples: np.ndarray | None = field(default=None, repr=False)

    def t1_values(self, lam, log_lam=None) -> np.ndarray:
        """Eigenvalues ``t1(lam)`` of every eigenvector (in oracle order)."""
        op = transfer1(self.params, lam, log_lam)
        return np.diag(np.linalg.solve(self.vectors, op @ self.vectors))

    def samples(self) -> np.ndarray:
        """``samples[j, a] = t1_j(xi_a)``."""
        if self._samples is None:
            self._samples = np.array([self.t1_values(x) for x in self.params.xi]).T
        return self._samples


def diagonalize_oracle(params: ModelParams, lam0=None, redraws: int = 5, seed=None) -> OracleResult:
    """Dense diagonalization of ``T1(lam0)`` with sector assignment.

    ``lam0`` is redrawn when two eigenvalues come closer than ``1e-8``
    relative; the last attempt is returned with ``simple=False`` if
    collisions persist.
    """
    rng = np.random.default_rng(params.seed + 1 if seed is None else seed)
    lam = random_spectral_point(rng) if lam0 is None else complex(lam0)
    for attempt in range(redraws + 1):
        op = transfer1(params, lam)
        w, v = np.linalg.eig(op)
        v = v / np.linalg.norm(v, axis=0)
        scale = np.abs(w).max()
        gaps = np.abs(w[:, None] - w[None, :])
        np.fill_diagonal(gaps, np.inf)
        min_gap = float(gaps.min() / scale) if len(w) > 1 else float("inf")
        if min_gap > 1e-8 or attempt == redraws:
            break
        lam = random_spectral_point(rng)
    sectors = None
    if params.twist.is_diagonal:
        sectors = []
        nops = [np.diag(m).real for m in number_operators(params)]
        for j in range(v.shape[1]):
            prob = np.abs(v[:, j]) ** 2
            expect = [float(nd @ prob / prob.sum()) for nd in nops]
            nu = tuple(int(round(e)) for e in expect)
            if max(abs(e - r) for e, r in zip(expect, nu)) > 1e-8:
                raise DomainError(f"eigenvector {j} is not in a definite sector")
            sectors.append(nu)
        order = sorted(range(len(w)), key=lambda j: (tuple(-s for s in sectors[j]), w[j].real, w[j].imag))
    else:
        order = sorted(range(len(w)), key=lambda j: (w[j].real, w[j].imag))
    w, v = w[order], v[:, order]
    if sectors is not None:
        sectors = [sectors[j] for j in order]
    return OracleResult(params, lam, w, v, sectors, min_gap, min_gap > 1e-8)


class EigenvalueTower:
    """Scalar transfer-matrix eigenvalue functions built from SoV data.

    ``t_m`` for ``m = 1..n-1`` is assembled from the node samples
    ``x_a = t1(xi_a)``, the fusion values ``t_{m-1}(xi_l/q) x_l`` and, for
    diagonal twists, the sector's asymptotic term. ``t_0 = 1`` and ``t_n``
    is the quantum determinant.
    """

    def __init__(self, params: ModelParams, x, sector=None):
        self.params = params
        self.x = np.asarray(x, dtype=complex)
        self.sector = None if sector is None else tuple(sector)
        if params.twist.is_diagonal and self.sector is None:
            raise ValueError("diagonal twists need a sector label")
        n, N, q = params.n, params.N, params.q
        xi = np.array(params.xi)
        self._shifted = xi / q
        self._log_shifted = np.log(xi) - params.eta
        # node values y[m][l] = t_m(xi_l / q), with t_0 = 1
        self.y = {0: np.ones(N, dtype=complex)}
        for m in range(1, n):
            vals = np.array(
                [self._value(m, z, lz) for z, lz in zip(self._shifted, self._log_shifted)]
            )
            self.y[m] = vals

    def _node_weights(self, m, lam, log_lam):
        p = self.params
        if p.twist.is_diagonal:
            h = (0,) * p.N
            return np.array([interpolation_weight(p, m, l, h, lam) for l in range(p.N)])
        shift, _ = laurent_shape(p, m)
        e = shift + m * p.N - 1
        xi = np.array(p.xi)
        log_xi = np.log(xi)
        z_lam = central_zero_factor(p, m, lam)
        out = []
        for l in range(p.N):
            w = np.exp(float(e) * (log_lam - log_xi[l])) * z_lam / central_zero_factor(p, m, xi[l])
            for b in range(p.N):
                if b != l:
                    w *= trig(lam, xi[b]) / trig(xi[l], xi[b])
            out.append(w)
        return np.array(out)

    def _value(self, m, lam, log_lam):
        p = self.params
        weights = self._node_weights(m, lam, log_lam)
        value = weights @ (self.y[m - 1] * self.x)
        if p.twist.is_diagonal:
            c = cosh_asymptotic_constant(p, m, (0,) * p.N, nu=self.sector)
            value += c * np.prod(trig(lam, np.array(p.xi))) * central_zero_factor(p, m, lam)
        return complex(value)

    def t(self, m: int, lam, log_lam=None) -> complex:
        lam = complex(lam)
        if m == 0:
            return 1.0 + 0j
        if m == self.params.n:
            return qdet_scalar(self.params, lam)
        if log_lam is None:
            log_lam = np.log(lam)
        return self._value(m, lam, log_lam)

    def system_residual(self) -> np.ndarray:
        """``x_a t_{n-1}(xi_a/q) / qdet(xi_a) - 1``."""
        p = self.params
        qd = np.array([qdet_scalar(p, x) for x in p.xi])
        return self.x * self.y[p.n - 1] / qd - 1


def sov_system_residual(params: ModelParams, sector, x) -> np.ndarray:
    """Residual of the SoV polynomial system at the point ``x``."""
    return EigenvalueTower(params, x, sector).system_residual()


def t1_polynomial(params: ModelParams, x, sector=None):
    """``t1`` as a :class:`LaurentPoly` from its node samples; returns ``(poly, sum_rule)``."""
    shift, degree = laurent_shape(params, 1)
    if params.twist.is_diagonal:
        from .fusion import asymptotic_coefficients

        top, bottom = asymptotic_coefficients(params, 1, nu=sector)
        rep = reconstruct_laurent(params.xi, x, top, bottom, shift=shift, degree=degree)
    else:
        rep = reconstruct_laurent(params.xi, x, shift=shift, degree=degree, log_nodes=np.log(params.xi))
    return rep.poly, rep.consistency_residual


@dataclass
class SpectrumRecord:
    """One eigenvalue of the transfer matrix with all cross-checks."""

    index: int
    sector: SectorLabel | None
    samples: np.ndarray
    t1_poly: LaurentPoly
    eigenvector: np.ndarray
    residuals: dict
    iterations: int = 0
    phi: dict = field(default_factory=dict)

    def max_residual(self) -> float:
        return max(self.residuals.values())

    def tower(self, params: ModelParams) -> EigenvalueTower:
        return EigenvalueTower(params, self.samples, self.sector)


@dataclass
class Spectrum:
    """Ordered records plus completeness diagnostics."""

    params: ModelParams
    records: list
    oracle: OracleResult
    basis: SovBasis
    min_separation: float
    complete: bool
    failures: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]


def _refine_record(params, basis, oracle, j, check_points, newton_tol, max_iter):
    sector = None if oracle.sectors is None else oracle.sectors[j]
    seed = oracle.samples()[j]
    fn = lambda x: sov_system_residual(params, sector, x)
    try:
        result = newton_refine(fn, seed, max_iter=max_iter, tol=newton_tol)
        x, iters, converged = result.x, result.iterations, True
    except ConvergenceError as err:
        x, iters, converged = err.result.x, err.result.iterations, False
    system = float(np.linalg.norm(fn(x)))
    poly, sum_rule = t1_polynomial(params, x, sector)
    vec = reconstruct_eigenvector(basis, x)

    ops, oracle_t1, eigen = check_points
    diffs, scale = [], 0.0
    for (z, lz), t_or in zip(oracle_t1[0], oracle_t1[1][:, j]):
        diffs.append(abs(poly.value(z, lz) - t_or))
        scale = max(scale, abs(t_or))
    oracle_dev = max(diffs) / max(scale, 1e-300)
    norm = np.linalg.norm(vec)
    eig_res = 0.0
    for (z, lz), op in zip(eigen, ops):
        tz = poly.value(z, lz)
        eig_res = max(eig_res, float(np.linalg.norm(op @ vec - tz * vec) / (max(abs(tz), 1e-300) * norm)))
    ref = oracle.vectors[:, j]
    cos = abs(np.vdot(ref, vec)) / (np.linalg.norm(ref) * norm)
    residuals = {
        "system": system,
        "eigen": eig_res,
        "oracle_t1": float(oracle_dev),
        "collinearity": float(max(0.0, 1 - cos)),
        "sum_rule": float(sum_rule),
    }
    if not converged:
        residuals["newton"] = float("inf")
    return SpectrumRecord(j, sector, x, poly, vec, residuals, iters)


def enumerate_spectrum(
    params: ModelParams,
    basis: SovBasis | None = None,
    samples: int = 10,
    workers: int = 1,
    tolerance: float = 1e-8,
    newton_tol: float = 1e-12,
    max_iter: int = 20,
) -> Spectrum:
    """Full SoV pipeline seeded by the oracle.

    Every oracle eigenvalue seeds Newton on the SoV system; the refined
    point is checked against the oracle ``t1`` at ``samples`` fresh points,
    its reconstructed eigenvector against ``T1`` and against the oracle
    eigenvector.
    """
    oracle = diagonalize_oracle(params)
    basis = build_sov_basis(params) if basis is None else basis
    rng = np.random.default_rng(params.seed + 2)
    pts = [random_spectral_point(rng) for _ in range(samples)]
    pts = [(z, np.log(z)) for z in pts]
    oracle_vals = np.array([oracle.t1_values(z, lz) for z, lz in pts])
    eigen_pts = pts[:3]
    ops = [transfer1(params, z, lz) for z, lz in eigen_pts]
    check = (ops, (pts, oracle_vals), eigen_pts)

    jobs = range(params.dim)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(
                pool.map(lambda j: _refine_record(params, basis, oracle, j, check, newton_tol, max_iter), jobs)
            )
    else:
        records = [_refine_record(params, basis, oracle, j, check, newton_tol, max_iter) for j in jobs]

    xs = np.array([r.samples for r in records])
    sep = float("inf")
    for a, b in itertools.combinations(range(len(xs)), 2):
        d = np.linalg.norm(xs[a] - xs[b]) / max(np.linalg.norm(xs[a]), np.linalg.norm(xs[b]), 1e-300)
        sep = min(sep, float(d))
    failures = [r.index for r in records if r.max_residual() > tolerance]
    complete = len(records) == params.n**params.N and sep > 1e-6
    if params.twist.is_diagonal:
        complete = complete and sector_count_mismatch(params, sector_counts(records)) == {}
    return Spectrum(params, records, oracle, basis, sep, complete, failures)


def sector_counts(records) -> dict:
    """Number of records per sector label, in sorted label order."""
    counts = Counter(r.sector for r in records)
    return {k: counts[k] for k in sorted(counts, reverse=True)}


def sector_count_mismatch(params: ModelParams, counts: dict) -> dict:
    """Sectors whose count differs from the multinomial dimension."""
    bad = {}
    for nu in all_sectors(params.n, params.N):
        want = sector_dimension(nu)
        if counts.get(nu, 0) != want:
            bad[nu] = (counts.get(nu, 0), want)
    for nu in counts:
        if nu not in bad and sum(nu) != params.N:
            bad[nu] = (counts[nu], 0)
    return bad


def verify_sector_counts(params: ModelParams, records) -> dict:
    """Counts per sector; raises :class:`CompletenessError` on a mismatch."""
    counts = sector_counts(records)
    bad = sector_count_mismatch(params, counts)
    if bad or sum(counts.values()) != params.n**params.N:
        raise CompletenessError(f"sector counts disagree with multinomials: {bad}")
    return counts
