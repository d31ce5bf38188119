"""Acceptance checks, one PASS/FAIL line per criterion.

Run under pytest (lines appear in the terminal summary) or directly with
``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import json
import time
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

from sovkit.cli import main as cli_main
from sovkit.config import load_config
from sovkit.fusion import TransferHierarchy, antisym_projector2, verify_fusion_suite
from sovkit.model import (
    random_params,
    random_spectral_point,
    regularity_residual,
    transfer1,
    yang_baxter_residual,
)
from sovkit.qcurve import (
    build_q_operator,
    check_spectral_curve,
    delta_m,
    phi_determinant_rep,
    q_operator_determinants,
    solve_phi,
)
from sovkit.sov import aba_eigenvector, build_sov_basis, reference_state
from sovkit.spectrum import SpectrumRecord, enumerate_spectrum, sector_counts, sov_system_residual

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
RESULTS: dict = {}


def _record(num, ok, detail):
    line = f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[num] = line
    print(line)
    return ok


@lru_cache(maxsize=None)
def _gl3():
    params, cov = load_config(CONFIGS / "gl3_N3_diag.json")
    t0 = time.perf_counter()
    spec = enumerate_spectrum(params, basis=build_sov_basis(params, components=cov))
    return params, spec, time.perf_counter() - t0


def _norm_comm(a, b):
    return np.abs(a @ b - b @ a).max() / (np.abs(a).max() * np.abs(b).max())


def criterion_1():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    q = np.exp(0.43 - 0.27j)
    ybe = max(
        yang_baxter_residual(n, random_spectral_point(rng), random_spectral_point(rng), q)
        for n in (2, 3, 4, 5)
        for _ in range(20)
    )
    reg = max(regularity_residual(n, q) for n in (2, 3, 4, 5))
    dt = time.perf_counter() - t0
    return _record(1, ybe < 1e-12 and reg < 1e-13 and dt < 5, f"YBE {ybe:.1e}, R(1) {reg:.1e}, {dt:.2f}s")


def criterion_2():
    q = np.exp(0.43 - 0.27j)
    c = q ** (1 / 3)
    want = np.zeros((9, 9), dtype=complex)
    for i in (1, 2, 3, 5, 6, 7):
        want[i, i] = 0.5
    want[1, 3], want[3, 1], want[2, 6], want[6, 2] = -c / 2, -1 / (2 * c), -1 / (2 * c), -c / 2
    want[5, 7], want[7, 5] = -c / 2, -1 / (2 * c)
    p = antisym_projector2(3, q)
    dev = np.abs(p - want).max()
    idem = np.abs(p @ p - p).max()
    tr = abs(np.trace(p) - 3)
    return _record(2, dev < 1e-12 and idem < 1e-12 and tr < 1e-12, f"entries {dev:.1e}, P^2-P {idem:.1e}, trace-3 {tr:.1e}")


def criterion_3():
    limits = {
        "commutator": 1e-11,
        "fusion": 1e-9,
        "central_zeros_T2": 1e-10,
        "T3_vs_qdet": 1e-9,
        "sum_rule": 1e-9,
        "interpolated_vs_direct_T2": 1e-9,
    }
    worst = {k: 0.0 for k in limits}
    t0 = time.perf_counter()
    for seed in range(5):
        res, _ = verify_fusion_suite(random_params(3, 3, seed=100 + seed), samples=10)
        for key, val in res.items():
            for group in limits:
                if key.startswith(group):
                    worst[group] = max(worst[group], val)
    dt = time.perf_counter() - t0
    ok = all(worst[k] < limits[k] for k in limits) and dt < 30
    return _record(3, ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f", {dt:.2f}s")


def criterion_4():
    rng = np.random.default_rng(404)
    variants = ("diagonal", "gl3_cyclic2", "gl3_cyclic3")
    redraws, worst, cond = 0, 0.0, 0.0
    for j in range(20):
        params = random_params(3, int(rng.integers(1, 5)), seed=400 + j, variant=variants[j % 3])
        basis = build_sov_basis(params)
        redraws += basis.redraws
        cond = max(cond, basis.condition_estimate)
        nodes = [transfer1(params, x) for x in params.xi]
        for h in basis.h_tuples:
            for a in range(params.N):
                if h[a] < 2:
                    nxt = h[:a] + (h[a] + 1,) + h[a + 1 :]
                    row = basis.transform[basis.row_index(h)] @ nodes[a]
                    ref = basis.transform[basis.row_index(nxt)]
                    worst = max(worst, np.abs(row - ref).max() / np.abs(ref).max())
    ok = redraws <= 3 and worst < 1e-12
    return _record(4, ok, f"redraws {redraws}, recursion {worst:.1e}, max cond {cond:.1e}")


def criterion_5():
    params, spec, dt3 = _gl3()
    worst = max(r.max_residual() for r in spec)
    counts = sorted(sector_counts(spec.records).values())
    t0 = time.perf_counter()
    spec2 = enumerate_spectrum(random_params(2, 6, seed=4))
    dt2 = time.perf_counter() - t0
    ok = (
        len(spec) == 27
        and spec.complete
        and spec.min_separation > 1e-6
        and worst < 1e-8
        and counts == [1, 1, 1, 3, 3, 3, 3, 3, 3, 6]
        and len(spec2) == 64
        and spec2.complete
        and max(r.max_residual() for r in spec2) < 1e-8
        and dt3 + dt2 < 120
    )
    return _record(5, ok, f"27 records max residual {worst:.1e}, n=2 N=6 -> {len(spec2)}, {dt3 + dt2:.2f}s")


def criterion_6():
    spec = enumerate_spectrum(random_params(3, 2, seed=606, variant="gl3_cyclic3"))
    worst = max(r.residuals["eigen"] for r in spec)
    ok = len(spec) == 9 and spec.complete and worst < 1e-8 and all(r.sector is None for r in spec)
    return _record(6, ok, f"{len(spec)} records, eigen-residual {worst:.1e}")


def criterion_7():
    params, spec, _ = _gl3()
    gap = curve = 0.0
    margin = np.inf
    degree_ok = True
    for rec in spec:
        for i in (1, 2, 3):
            qd = solve_phi(params, rec, i)
            rec.phi[i] = qd
            degree_ok &= qd.M == params.N - rec.sector[i - 1]
            gap = max(gap, qd.gap_ratio)
            curve = max(curve, check_spectral_curve(params, rec, qd, sample_count=25))
            margin = min(margin, qd.root_margin)
    ok = degree_ok and gap < 1e-8 and curve < 1e-8 and margin > 1e-6
    return _record(7, ok, f"gap {gap:.1e}, curve {curve:.1e}, root margin {margin:.1e}")


def criterion_8():
    params, spec, _ = _gl3()
    rng = np.random.default_rng(808)
    pts = [random_spectral_point(rng) for _ in range(10)]
    worst = 0.0
    for rec in spec:
        for i in (1, 2, 3):
            qd = solve_phi(params, rec, i)
            ratios = np.array([phi_determinant_rep(params, rec, i, z) / qd.phi(z) for z in pts])
            worst = max(worst, np.abs(ratios / ratios[0] - 1).max())
    return _record(8, worst < 1e-8, f"max deviation {worst:.1e}")


def criterion_9():
    params, spec, _ = _gl3()
    rng = np.random.default_rng(909)
    hier = TransferHierarchy.build(params)
    ident = np.eye(params.dim)
    q = params.q
    comm = curve = 0.0
    det = np.inf
    for i in (1, 2, 3):
        ql = build_q_operator(params, i, random_spectral_point(rng), spec)
        comm = max(comm, _norm_comm(ql, transfer1(params, random_spectral_point(rng))))
        for _ in range(10):
            z = random_spectral_point(rng)
            terms = []
            for k in range(params.n + 1):
                zk = z / q**k
                t = hier.evaluate(params.n - k, zk) if k < params.n else ident
                terms.append((-1) ** k * delta_m(params, i, k, z) * build_q_operator(params, i, zk, spec) @ t)
            curve = max(curve, np.abs(sum(terms)).max() / max(np.abs(t).max() for t in terms))
        det = min(det, q_operator_determinants(params, i, spec))
    ok = comm < 1e-9 and curve < 1e-8 and det > 1e-12
    return _record(9, ok, f"commutator {comm:.1e}, operator curve {curve:.1e}, min |det| {det:.1e}")


def criterion_10():
    params, spec, _ = _gl3()
    worst = 0.0
    exact = True
    for rec in spec:
        qd = solve_phi(params, rec, 1)
        vec = aba_eigenvector(spec.basis, qd.roots)
        if qd.M == 0:
            exact &= bool(np.array_equal(vec, reference_state(params)))
        cos = abs(np.vdot(vec, rec.eigenvector)) / (np.linalg.norm(vec) * np.linalg.norm(rec.eigenvector))
        worst = max(worst, 1 - cos)
    return _record(10, worst < 1e-8 and exact, f"1-|cos| {worst:.1e}, M=0 exact {exact}")


def criterion_11():
    params, spec, _ = _gl3()
    low_sys = low_gap = low_curve = np.inf
    for rec in spec:
        for a in range(params.N):
            x = rec.samples.copy()
            x[a] *= 1 + 1e-3
            bad = SpectrumRecord(rec.index, rec.sector, x, rec.t1_poly, rec.eigenvector, {})
            low_sys = min(low_sys, np.linalg.norm(sov_system_residual(params, rec.sector, x)))
            gaps, curves = [], []
            # nu_i = 0 gives M = N, where the kernel is never constrained
            for i in (1, 2, 3):
                if rec.sector[i - 1] >= 1:
                    qd = solve_phi(params, bad, i, strict=False)
                    gaps.append(qd.gap_ratio)
                    curves.append(check_spectral_curve(params, bad, qd))
            low_gap = min(low_gap, max(gaps))
            low_curve = min(low_curve, max(curves))
    ok = low_sys > 1e-4 and low_gap > 1e-4 and low_curve > 1e-4
    return _record(11, ok, f"min system {low_sys:.1e}, min gap {low_gap:.1e}, min curve {low_curve:.1e}")


def criterion_12(tmp_dir: Path):
    outs = [tmp_dir / f"run{k}.json" for k in range(2)]
    codes = [cli_main(["spectrum", "--config", str(CONFIGS / "gl3_N3_diag.json"), "--out", str(o)]) for o in outs]
    same = outs[0].read_bytes() == outs[1].read_bytes()
    ok = codes == [0, 0] and same and json.loads(outs[0].read_text())["count"] == 27
    return _record(12, ok, f"exit codes {codes}, byte-identical {same}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11]


@pytest.mark.parametrize("check", CRITERIA, ids=[f"criterion_{k + 1}" for k in range(len(CRITERIA))])
def test_criterion(check):
    assert check()


def test_criterion_12(tmp_path):
    assert criterion_12(tmp_path)


if __name__ == "__main__":
    import tempfile

    for check in CRITERIA:
        check()
    with tempfile.TemporaryDirectory() as d:
        criterion_12(Path(d))
