"""Command line front end: ``validate``, ``spectrum``, ``qcurve`` and ``report``.

Exit codes: 0 when every check passes, 1 on a numerical failure, 2 on a
configuration or schema error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import config as cfgio
from .errors import SovkitError
from .fusion import TransferHierarchy, verify_fusion_suite
from .model import ModelParams, random_spectral_point, sector_dimension, transfer1, verify_model_suite
from .qcurve import (
    build_q_operator,
    check_spectral_curve,
    delta_m,
    phi_determinant_rep,
    q_operator_determinants,
    solve_phi,
)
from .sov import b_operator, build_sov_basis, check_reference_state
from .spectrum import enumerate_spectrum, sector_counts

EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2


def worker_count() -> int:
    raw = os.environ.get("SOVKIT_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map(fn, items, workers):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _emit(obj, out):
    if out:
        cfgio.write_json(obj, out)
    else:
        sys.stdout.write(cfgio.dumps(obj))


def _basis(params: ModelParams, covector):
    return build_sov_basis(params, components=covector)


def _sov_suite(params: ModelParams, covector, samples: int) -> dict:
    rng = np.random.default_rng(params.seed + 5)
    basis = _basis(params, covector)
    nodes = [transfer1(params, x) for x in params.xi]
    worst = 0.0
    for h in basis.h_tuples:
        for a in range(params.N):
            if h[a] < params.n - 1:
                nxt = h[:a] + (h[a] + 1,) + h[a + 1 :]
                row = basis.transform[basis.row_index(h)] @ nodes[a]
                ref = basis.transform[basis.row_index(nxt)]
                worst = max(worst, float(np.abs(row - ref).max() / np.abs(ref).max()))
    res = {"sov_recursion": worst}
    l, m = random_spectral_point(rng), random_spectral_point(rng)
    bl, bm = b_operator(basis, l), b_operator(basis, m)
    res["b_operator_commutator"] = float(np.abs(bl @ bm - bm @ bl).max() / (np.abs(bl).max() * np.abs(bm).max()))
    if params.twist.is_diagonal:
        res["reference_state"] = check_reference_state(params, [random_spectral_point(rng) for _ in range(samples)])
    return res, basis.condition_estimate


def run_validate(args, params, covector) -> int:
    tol = args.tolerance if args.tolerance is not None else params.tolerance
    residuals = dict(verify_model_suite(params))
    fusion, notes = verify_fusion_suite(params, samples=min(args.samples, 8))
    residuals.update(fusion)
    sov, cond = _sov_suite(params, covector, min(args.samples, 5))
    residuals.update(sov)
    failed = sorted(k for k, v in residuals.items() if not v < tol)
    report = {
        "command": "validate",
        "config": cfgio.params_to_dict(params, covector),
        "tolerance": tol,
        "residuals": {k: cfgio.encode_float(v) for k, v in residuals.items()},
        "informational": {k: cfgio.encode_float(v) for k, v in notes.items()},
        "sov_condition": cfgio.encode_float(cond),
        "failed": failed,
        "passed": not failed,
    }
    _emit(report, args.out)
    return EXIT_OK if not failed else EXIT_NUMERIC


def _record_json(params, rec, emit_vectors):
    out = {
        "index": rec.index,
        "sector": None if rec.sector is None else list(rec.sector),
        "samples": cfgio.encode_array(rec.samples),
        "t1": {
            "shift": cfgio.encode_fraction(rec.t1_poly.shift),
            "coefficients": cfgio.encode_array(rec.t1_poly.coefficients),
        },
        "residuals": {k: cfgio.encode_float(v) for k, v in rec.residuals.items()},
        "max_residual": cfgio.encode_float(rec.max_residual()),
        "iterations": rec.iterations,
    }
    if emit_vectors:
        out["eigenvector"] = cfgio.encode_array(rec.eigenvector)
    return out


def _spectrum(params, covector, args):
    tol = args.tolerance if args.tolerance is not None else params.tolerance
    basis = _basis(params, covector)
    return enumerate_spectrum(params, basis=basis, samples=min(args.samples, 10), workers=worker_count(), tolerance=tol), tol


def _spectrum_json(params, covector, spec, tol, emit_vectors):
    table = []
    if params.twist.is_diagonal:
        counts = sector_counts(spec.records)
        for nu, c in counts.items():
            table.append({"sector": list(nu), "count": c, "expected": sector_dimension(nu)})
    return {
        "command": "spectrum",
        "config": cfgio.params_to_dict(params, covector),
        "tolerance": tol,
        "count": len(spec),
        "expected_count": params.n**params.N,
        "complete": spec.complete,
        "min_separation": cfgio.encode_float(spec.min_separation),
        "sov_condition": cfgio.encode_float(spec.basis.condition_estimate),
        "sector_counts": table,
        "flagged": spec.failures,
        "records": [_record_json(params, r, emit_vectors) for r in spec.records],
        "passed": bool(spec.complete and not spec.failures),
    }


def run_spectrum(args, params, covector) -> int:
    spec, tol = _spectrum(params, covector, args)
    report = _spectrum_json(params, covector, spec, tol, args.emit_eigenvectors)
    _emit(report, args.out)
    return EXIT_OK if report["passed"] else EXIT_NUMERIC


def _parse_choices(raw, n):
    if raw in (None, ""):
        return [1]
    if raw == "all":
        return list(range(1, n + 1))
    try:
        choices = [int(v) for v in str(raw).split(",")]
    except ValueError as err:
        raise cfgio.ConfigError(f"bad --delta-choice {raw!r}") from err
    if any(not 1 <= i <= n for i in choices):
        raise cfgio.ConfigError(f"--delta-choice must lie in 1..{n}")
    return choices


def _qcurve_record(params, rec, i, samples, tol):
    rng = np.random.default_rng(params.seed + 7 + rec.index)
    try:
        qd = solve_phi(params, rec, i)
    except SovkitError as err:
        return {"index": rec.index, "delta_choice": i, "error": str(err), "passed": False}
    rec.phi[i] = qd
    curve = check_spectral_curve(params, rec, qd, sample_count=samples)
    pts = [random_spectral_point(rng) for _ in range(10)]
    try:
        ratios = np.array([phi_determinant_rep(params, rec, i, z) / qd.phi(z) for z in pts])
        det_dev = float(np.abs(ratios / ratios[0] - 1).max())
    except SovkitError:
        det_dev = float("inf")
    passed = qd.gap_ratio < tol and curve < tol and det_dev < tol and qd.root_margin > 1e-6
    return {
        "index": rec.index,
        "delta_choice": i,
        "sector": list(rec.sector),
        "M": qd.M,
        "phi": {"shift": cfgio.encode_fraction(qd.phi.shift), "coefficients": cfgio.encode_array(qd.phi.coefficients)},
        "roots": cfgio.encode_array(qd.roots),
        "kernel_gap": [cfgio.encode_float(v) for v in qd.kernel_gap],
        "gap_ratio": cfgio.encode_float(qd.gap_ratio),
        "root_margin": cfgio.encode_float(qd.root_margin),
        "curve_residual": cfgio.encode_float(curve),
        "determinant_deviation": cfgio.encode_float(det_dev),
        "passed": bool(passed),
    }


def _q_operator_summary(params, spec, i, samples):
    rng = np.random.default_rng(params.seed + 11)
    hier = TransferHierarchy.build(params)
    ident = np.eye(params.dim)
    l, m = random_spectral_point(rng), random_spectral_point(rng)
    q_l, t_m = build_q_operator(params, i, l, spec), transfer1(params, m)
    comm = float(np.abs(q_l @ t_m - t_m @ q_l).max() / (np.abs(q_l).max() * np.abs(t_m).max()))
    worst = 0.0
    for _ in range(samples):
        z = random_spectral_point(rng)
        terms = []
        for k in range(params.n + 1):
            zk = z / params.q**k
            t = hier.evaluate(params.n - k, zk) if k < params.n else ident
            terms.append((-1) ** k * delta_m(params, i, k, z) * build_q_operator(params, i, zk, spec) @ t)
        worst = max(worst, float(np.abs(sum(terms)).max() / max(np.abs(t).max() for t in terms)))
    det_min = q_operator_determinants(params, i, spec)
    return {"commutator": comm, "operator_curve": worst, "min_normalized_det": det_min}


def run_qcurve(args, params, covector) -> int:
    if not params.twist.is_diagonal:
        raise cfgio.ConfigError("qcurve needs a diagonal twist")
    choices = _parse_choices(args.delta_choice, params.n)
    spec, tol = _spectrum(params, covector, args)
    qtol = max(tol, 1e-8)
    rows = []
    for i in choices:
        rows.extend(_map(lambda r: _qcurve_record(params, r, i, args.samples, qtol), spec.records, worker_count()))
    q_summary = {}
    q_ok = True
    if spec.complete and all(r["passed"] for r in rows):
        for i in choices:
            s = _q_operator_summary(params, spec, i, min(args.samples, 10))
            q_ok = q_ok and s["commutator"] < 1e-9 and s["operator_curve"] < qtol and s["min_normalized_det"] > 1e-12
            q_summary[str(i)] = {k: cfgio.encode_float(v) for k, v in s.items()}
    else:
        q_ok = False
    histogram = {}
    for r in rows:
        if "M" in r:
            key = f"{r['delta_choice']}:{r['M']}"
            histogram[key] = histogram.get(key, 0) + 1
    passed = bool(spec.complete and all(r["passed"] for r in rows) and q_ok)
    report = {
        "command": "qcurve",
        "config": cfgio.params_to_dict(params, covector),
        "tolerance": qtol,
        "delta_choices": choices,
        "records": rows,
        "degree_histogram": histogram,
        "q_operator": q_summary,
        "passed": passed,
    }
    _emit(report, args.out)
    return EXIT_OK if passed else EXIT_NUMERIC


def _report_rows(doc):
    if not isinstance(doc, dict) or doc.get("command") != "spectrum" or not isinstance(doc.get("records"), list):
        raise cfgio.ConfigError("not a spectrum file")
    cfg = doc.get("config")
    if not isinstance(cfg, dict) or not isinstance(cfg.get("n"), int) or not isinstance(cfg.get("N"), int):
        raise cfgio.ConfigError("spectrum file lacks a config block")
    n, N = cfg["n"], cfg["N"]
    header = ["index", "sector"]
    header += [f"x{a + 1}_{part}" for a in range(N) for part in ("re", "im")]
    header += ["max_residual"] + [f"M_{i + 1}" for i in range(n)]
    rows = []
    for rec in doc["records"]:
        try:
            samples = [cfgio.decode_complex(s) for s in rec["samples"]]
            sector = rec["sector"]
            row = [rec["index"], "" if sector is None else "-".join(str(v) for v in sector)]
            for z in samples:
                row += [repr(z.real), repr(z.imag)]
            row.append(rec["max_residual"])
            row += [N - v for v in sector] if sector is not None else [""] * n
        except (KeyError, TypeError) as err:
            raise cfgio.ConfigError(f"malformed record: {err}") from err
        if len(samples) != N:
            raise cfgio.ConfigError("record has the wrong number of samples")
        rows.append(row)
    return header, rows


def run_report(args) -> int:
    try:
        with open(args.spectrum, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise cfgio.ConfigError(f"cannot read spectrum file: {err}") from err
    header, rows = _report_rows(doc)
    if args.format == "json":
        text = cfgio.dumps([dict(zip(header, r)) for r in rows])
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(header)
        writer.writerows(rows)
        text = buf.getvalue()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sovkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="model configuration (JSON)")
        p.add_argument("--out", help="output file (stdout if omitted)")
        p.add_argument("--samples", type=int, default=25, help="random spectral points per check")
        p.add_argument("--tolerance", type=float, help="pass/fail threshold (config value by default)")

    common(sub.add_parser("validate", help="structural identity suite"))
    sp = sub.add_parser("spectrum", help="full spectrum via the SoV system")
    common(sp)
    sp.add_argument("--emit-eigenvectors", action="store_true")
    qc = sub.add_parser("qcurve", help="Q-functions and the quantum spectral curve")
    common(qc)
    qc.add_argument("--delta-choice", default="1", help="i, a comma list, or 'all'")
    qc.set_defaults(emit_eigenvectors=False)
    rp = sub.add_parser("report", help="flatten a spectrum file")
    rp.add_argument("spectrum")
    rp.add_argument("--format", choices=("csv", "json"), default="csv")
    rp.add_argument("--out")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.command == "report":
            return run_report(args)
        params, covector = cfgio.load_config(args.config)
        runner = {"validate": run_validate, "spectrum": run_spectrum, "qcurve": run_qcurve}[args.command]
        return runner(args, params, covector)
    except cfgio.ConfigError as err:
        print(f"sovkit: configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except SovkitError as err:
        print(f"sovkit: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
