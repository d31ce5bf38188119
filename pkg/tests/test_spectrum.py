import numpy as np
import pytest

from sovkit.errors import CompletenessError
from sovkit.model import ModelParams, TwistSpec, qdet_scalar, random_params, random_spectral_point
from sovkit.numerics import newton_refine, reconstruct_laurent
from sovkit.spectrum import (
    EigenvalueTower,
    all_sectors,
    diagonalize_oracle,
    enumerate_spectrum,
    sector_counts,
    sov_system_residual,
    verify_sector_counts,
)


class TestOracle:
    def test_count_and_multinomials(self, gl3_n3):
        oracle = diagonalize_oracle(gl3_n3)
        assert oracle.simple and len(oracle.eigenvalues) == 27
        counts = {}
        for nu in oracle.sectors:
            counts[nu] = counts.get(nu, 0) + 1
        assert counts[(3, 0, 0)] == 1 and counts[(2, 1, 0)] == 3 and counts[(1, 1, 1)] == 6

    def test_t1_functions_are_polynomials(self, gl3_n2, rng):
        oracle = diagonalize_oracle(gl3_n2)
        nodes = [random_spectral_point(rng) * (1 + 0.05 * k) for k in range(gl3_n2.N + 1)]
        vals = np.array([oracle.t1_values(z) for z in nodes])
        rep = reconstruct_laurent(nodes, vals, shift=-gl3_n2.N, degree=gl3_n2.N)
        for _ in range(5):
            z = random_spectral_point(rng)
            got = np.array([rep.poly(z)]).ravel()
            want = oracle.t1_values(z)
            assert np.abs(got - want).max() / np.abs(want).max() < 1e-9


class TestSystem:
    def test_oracle_samples_solve(self, gl3_n2):
        oracle = diagonalize_oracle(gl3_n2)
        for nu, x in zip(oracle.sectors, oracle.samples()):
            assert np.linalg.norm(sov_system_residual(gl3_n2, nu, x)) < 1e-9

    def test_random_point_is_not_a_solution(self, gl3_n2, rng):
        x = rng.normal(size=2) + 1j * rng.normal(size=2)
        assert np.linalg.norm(sov_system_residual(gl3_n2, (1, 1, 0), x)) > 1e-2

    def test_single_site_gl2(self):
        k = (1.3 + 0.2j, -0.7 + 0.4j)
        params = ModelParams(2, 1, 0.45 + 0.3j, (0.8 + 0.5j,), TwistSpec.diagonal(*k))
        q, xi = params.q, params.xi[0]
        for j, nu in ((0, (1, 0)), (1, (0, 1))):
            x1 = sum(k[i] * (q ** (i == j) - q ** -(i == j)) for i in range(2))
            tower = EigenvalueTower(params, [x1], nu)
            assert abs(x1 * tower.t(1, xi / q) - qdet_scalar(params, xi)) < 1e-12 * abs(qdet_scalar(params, xi))

    def test_newton_from_oracle_seed(self, gl3_n2):
        oracle = diagonalize_oracle(gl3_n2)
        nu, x = oracle.sectors[3], oracle.samples()[3]
        res = newton_refine(lambda y: sov_system_residual(gl3_n2, nu, y), x, max_iter=5)
        assert res.converged and res.residual_norm < 1e-10

    def test_newton_basin(self, gl3_n2, rng):
        oracle = diagonalize_oracle(gl3_n2)
        for j in range(9):
            nu, x = oracle.sectors[j], oracle.samples()[j]
            seed = x + 1e-2 * np.abs(x) * (rng.normal(size=2) + 1j * rng.normal(size=2)) / np.sqrt(2)
            res = newton_refine(lambda y: sov_system_residual(gl3_n2, nu, y), seed)
            assert np.linalg.norm(res.x - x) / np.linalg.norm(x) < 1e-8


class TestEnumerate:
    def test_gl3_n3(self, spectrum_gl3_n3):
        spec = spectrum_gl3_n3
        assert len(spec) == 27 and spec.complete and not spec.failures
        assert spec.min_separation > 1e-6
        for rec in spec:
            assert rec.max_residual() < 1e-8
            for a, x in enumerate(spec.params.xi):
                assert abs(rec.t1_poly(x) - rec.samples[a]) < 1e-10 * abs(rec.samples[a])

    def test_sector_counts(self, spectrum_gl3_n3):
        counts = verify_sector_counts(spectrum_gl3_n3.params, spectrum_gl3_n3.records)
        assert sorted(counts.values()) == sorted([1, 1, 1, 3, 3, 3, 3, 3, 3, 6])
        assert sum(counts.values()) == 27

    def test_sector_closure(self, spectrum_gl3_n3):
        params = spectrum_gl3_n3.params
        k, q = np.array(params.twist.values), params.q
        for rec in spectrum_gl3_n3:
            top = np.sum(k * q ** np.array(rec.sector)) / np.prod(params.xi)
            assert rec.t1_poly.coefficients[-1] == pytest.approx(top, rel=1e-9)

    def test_gl2_n2_counts(self):
        spec = enumerate_spectrum(random_params(2, 2, seed=3))
        assert sector_counts(spec.records) == {(2, 0): 1, (1, 1): 2, (0, 2): 1}

    def test_gl2_n6(self):
        spec = enumerate_spectrum(random_params(2, 6, seed=4))
        assert len(spec) == 64 and spec.complete and not spec.failures

    def test_cyclic(self):
        spec = enumerate_spectrum(random_params(3, 2, seed=5, variant="gl3_cyclic3"))
        assert len(spec) == 9 and spec.complete and not spec.failures
        assert all(r.sector is None for r in spec)
        assert all(r.residuals["eigen"] < 1e-8 for r in spec)

    def test_threads_match_serial(self, gl3_n2, spectrum_gl3_n2):
        par = enumerate_spectrum(gl3_n2, workers=3)
        for a, b in zip(par, spectrum_gl3_n2):
            assert np.array_equal(a.samples, b.samples)

    def test_missing_sector_detected(self, spectrum_gl3_n3):
        with pytest.raises(CompletenessError):
            verify_sector_counts(spectrum_gl3_n3.params, spectrum_gl3_n3.records[1:])


def test_all_sectors():
    assert len(all_sectors(3, 3)) == 10
    assert all(sum(nu) == 3 for nu in all_sectors(3, 3))
