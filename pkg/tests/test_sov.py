import numpy as np
import pytest

from sovkit.errors import BasisError, DomainError
from sovkit.model import random_params, random_spectral_point, transfer1
from sovkit.qcurve import delta1, solve_phi
from sovkit.sov import (
    aba_eigenvector,
    b_eigenvalues,
    b_operator,
    build_sov_basis,
    check_reference_state,
    decompose,
    reconstruct_eigenvector,
    reference_eigenvalue,
    reference_state,
    wave_function,
)
from sovkit.spectrum import diagonalize_oracle


def _eigen_residual(params, vec, rng):
    lam = random_spectral_point(rng)
    t = transfer1(params, lam)
    tv = t @ vec
    ev = np.vdot(vec, tv) / np.vdot(vec, vec)
    return np.linalg.norm(tv - ev * vec) / (abs(ev) * np.linalg.norm(vec))


class TestBasis:
    @pytest.mark.parametrize("variant", ["diagonal", "gl3_cyclic2", "gl3_cyclic3"])
    def test_recursion_and_size(self, variant):
        params = random_params(3, 2, seed=21, variant=variant)
        basis = build_sov_basis(params)
        assert basis.transform.shape == (9, 9)
        assert np.isfinite(basis.condition_estimate)
        assert np.array_equal(basis.transform[0], basis.covector)
        nodes = [transfer1(params, x) for x in params.xi]
        for h in basis.h_tuples:
            for a in range(params.N):
                if h[a] < 2:
                    nxt = h[:a] + (h[a] + 1,) + h[a + 1 :]
                    row = basis.transform[basis.row_index(h)] @ nodes[a]
                    ref = basis.transform[basis.row_index(nxt)]
                    assert np.abs(row - ref).max() / np.abs(ref).max() < 1e-12

    def test_zero_component_fails(self):
        params = random_params(3, 2, seed=21)
        with pytest.raises(BasisError):
            build_sov_basis(params, components=(0.0, 1.0, 1j))

    def test_seeded_components_are_unit_modulus(self):
        basis = build_sov_basis(random_params(3, 2, seed=21))
        assert np.allclose(np.abs(basis.components), 1)

    def test_deterministic(self):
        params = random_params(3, 2, seed=21)
        assert np.array_equal(build_sov_basis(params).transform, build_sov_basis(params).transform)


class TestEigenvectors:
    def test_oracle_samples(self, gl3_n2, rng):
        basis = build_sov_basis(gl3_n2)
        oracle = diagonalize_oracle(gl3_n2)
        for x in oracle.samples():
            vec = reconstruct_eigenvector(basis, x)
            assert _eigen_residual(gl3_n2, vec, rng) < 1e-8
            assert basis.covector @ vec == pytest.approx(1, abs=1e-10)

    def test_perturbed_samples(self, gl3_n2, rng):
        basis = build_sov_basis(gl3_n2)
        x = diagonalize_oracle(gl3_n2).samples()[4].copy()
        x[0] *= 1.01
        assert _eigen_residual(gl3_n2, reconstruct_eigenvector(basis, x), rng) > 1e-3

    def test_wave_function_factorizes(self, gl3_n2):
        basis = build_sov_basis(gl3_n2)
        oracle = diagonalize_oracle(gl3_n2)
        for j, x in enumerate(oracle.samples()):
            psi = decompose(basis, oracle.vectors[:, j])
            w = wave_function(gl3_n2, x)
            ratio = psi / w
            assert np.abs(ratio / ratio[0] - 1).max() < 1e-8


class TestBOperator:
    def test_commuting_and_spectrum(self, gl3_n2, rng):
        basis = build_sov_basis(gl3_n2)
        l, m = random_spectral_point(rng), random_spectral_point(rng)
        bl, bm = b_operator(basis, l), b_operator(basis, m)
        assert np.abs(bl @ bm - bm @ bl).max() / (np.abs(bl).max() * np.abs(bm).max()) < 1e-10
        got = np.sort_complex(np.linalg.eigvals(bl))
        want = np.sort_complex(b_eigenvalues(gl3_n2, l))
        assert np.abs(got - want).max() / np.abs(want).max() < 1e-8

    def test_rank_at_node(self):
        params = random_params(3, 3, seed=22)
        basis = build_sov_basis(params)
        b = b_eigenvalues(params, params.xi[0])
        assert np.sum(np.abs(b) > 1e-12 * np.abs(b).max()) == 3 ** (params.N - 1)
        assert np.linalg.matrix_rank(b_operator(basis, params.xi[0]), tol=1e-9 * np.abs(b).max()) == 9

    def test_reference_row(self, gl3_n2, rng):
        basis = build_sov_basis(gl3_n2)
        lam = random_spectral_point(rng)
        row = basis.covector @ b_operator(basis, lam)
        want = np.prod((lam / np.array(gl3_n2.xi) - np.array(gl3_n2.xi) / lam) ** 2)
        assert np.abs(row - want * basis.covector).max() / np.abs(row).max() < 1e-10


class TestReferenceState:
    def test_eigenvector_of_t1_t2(self, gl3_n2, rng):
        assert check_reference_state(gl3_n2, [random_spectral_point(rng) for _ in range(5)]) < 1e-12

    def test_nodes_equal_delta1(self, gl3_n2):
        for x in gl3_n2.xi:
            assert reference_eigenvalue(gl3_n2, 1, x) == pytest.approx(delta1(gl3_n2, 1, x), rel=1e-12)

    def test_sector(self, gl3_n2):
        from sovkit.model import occupation_numbers

        assert tuple(occupation_numbers(gl3_n2)[np.argmax(np.abs(reference_state(gl3_n2)))]) == (2, 0, 0)

    def test_cyclic_rejected(self):
        with pytest.raises(DomainError):
            check_reference_state(random_params(3, 2, seed=1, variant="gl3_cyclic3"), [1.0])


class TestABA:
    def test_no_roots(self, gl3_n2):
        basis = build_sov_basis(gl3_n2)
        assert np.array_equal(aba_eigenvector(basis, []), reference_state(gl3_n2))

    def test_collision(self, gl3_n2):
        basis = build_sov_basis(gl3_n2)
        with pytest.raises(DomainError):
            aba_eigenvector(basis, [gl3_n2.xi[1]])

    def test_collinear_with_sov(self, gl3_n2, spectrum_gl3_n2):
        basis = spectrum_gl3_n2.basis
        for rec in spectrum_gl3_n2:
            qd = solve_phi(gl3_n2, rec, 1)
            vec = aba_eigenvector(basis, qd.roots)
            cos = abs(np.vdot(vec, rec.eigenvector)) / (np.linalg.norm(vec) * np.linalg.norm(rec.eigenvector))
            assert cos > 1 - 1e-8

    def test_amplitudes(self, gl3_n2, spectrum_gl3_n2):
        basis = spectrum_gl3_n2.basis
        xi = np.array(gl3_n2.xi)
        for rec in spectrum_gl3_n2:
            qd = solve_phi(gl3_n2, rec, 1)
            psi = basis.transform @ aba_eigenvector(basis, qd.roots)
            d1 = np.array([delta1(gl3_n2, 1, x) for x in xi])
            ph = np.array([qd.phi(x) for x in xi])
            phq = np.array([qd.phi(x / gl3_n2.q) for x in xi])
            h = np.array(basis.h_tuples)
            want = np.prod(d1**h * ph ** (2 - h) * phq**h, axis=1)
            ratio = psi / want
            assert np.abs(ratio / ratio[0] - 1).max() < 1e-8
