"""Iterative eigensolvers against dense decompositions and constructed spectra."""

import numpy as np
import pytest

from klexpand.eigen import (
    EigenResult,
    OperatorContractError,
    PartialConvergenceError,
    solve_nonsymmetric,
    solve_symmetric,
)


def matvec_of(mat):
    return lambda v: mat @ v


class TestSolveSymmetric:
    def test_diagonal(self):
        mat = np.diag([3.0, 2.0, 1.0])
        res = solve_symmetric(matvec_of(mat), 3, 2, tol=1e-12)
        np.testing.assert_allclose(res.eigenvalues, [3.0, 2.0], atol=1e-12)

    def test_random_symmetric_against_dense(self):
        rng = np.random.default_rng(12)
        a = rng.standard_normal((20, 20))
        mat = 0.5 * (a + a.T)
        res = solve_symmetric(matvec_of(mat), 20, 5, tol=1e-11, seed=3)
        dense_vals = np.sort(np.linalg.eigvalsh(mat))[::-1][:5]
        np.testing.assert_allclose(res.eigenvalues, dense_vals, atol=1e-9)

    def test_rank_one_operator(self):
        rng = np.random.default_rng(5)
        u = rng.standard_normal(30)
        u /= np.linalg.norm(u)
        mat = np.outer(u, u)  # single eigenvalue 1
        res = solve_symmetric(matvec_of(mat), 30, 3, tol=1e-10, seed=1)
        assert abs(res.eigenvalues[0] - 1.0) < 1e-9
        assert np.abs(res.eigenvalues[1:]).max() < 1e-9

    def test_eigenvector_orthonormality(self):
        rng = np.random.default_rng(7)
        a = rng.standard_normal((40, 40))
        mat = a @ a.T
        res = solve_symmetric(matvec_of(mat), 40, 6, tol=1e-10)
        gram = res.vectors.T @ res.vectors
        assert np.abs(gram - np.eye(6)).max() < 1e-10

    def test_residuals_recomputed_below_tol(self):
        rng = np.random.default_rng(8)
        a = rng.standard_normal((30, 30))
        mat = a @ a.T
        tol = 1e-9
        res = solve_symmetric(matvec_of(mat), 30, 4, tol=tol)
        scale = np.abs(res.eigenvalues).max()
        for lam, vec in zip(res.eigenvalues, res.vectors.T):
            assert np.linalg.norm(mat @ vec - lam * vec) <= tol * scale * 1.01

    def test_determinism(self):
        rng = np.random.default_rng(9)
        a = rng.standard_normal((25, 25))
        mat = 0.5 * (a + a.T)
        r1 = solve_symmetric(matvec_of(mat), 25, 4, seed=42)
        r2 = solve_symmetric(matvec_of(mat), 25, 4, seed=42)
        np.testing.assert_allclose(r1.eigenvalues, r2.eigenvalues, atol=1e-14, rtol=0)

    def test_thick_restart_with_small_subspace(self):
        rng = np.random.default_rng(10)
        a = rng.standard_normal((120, 120))
        mat = a @ a.T
        res = solve_symmetric(matvec_of(mat), 120, 6, tol=1e-9, ncv=15)
        dense_vals = np.sort(np.linalg.eigvalsh(mat))[::-1][:6]
        np.testing.assert_allclose(res.eigenvalues, dense_vals, rtol=1e-8)
        assert res.n_iter > 15  # restarts happened

    def test_detects_nonsymmetric_operator(self):
        rng = np.random.default_rng(11)
        mat = rng.standard_normal((15, 15)) + 10 * np.eye(15)
        with pytest.raises(OperatorContractError):
            solve_symmetric(matvec_of(mat), 15, 2)

    def test_partial_convergence_carries_result(self):
        rng = np.random.default_rng(13)
        a = rng.standard_normal((60, 60))
        mat = a @ a.T
        with pytest.raises(PartialConvergenceError) as err:
            solve_symmetric(matvec_of(mat), 60, 8, tol=1e-13, max_iter=9, ncv=9)
        result = err.value.result
        assert isinstance(result, EigenResult)
        assert result.n_iter <= 9
        assert not result.converged.all()

    def test_full_space_request(self):
        rng = np.random.default_rng(14)
        a = rng.standard_normal((9, 9))
        mat = 0.5 * (a + a.T)
        res = solve_symmetric(matvec_of(mat), 9, 9, tol=1e-10)
        np.testing.assert_allclose(
            res.eigenvalues, np.sort(np.linalg.eigvalsh(mat))[::-1], atol=1e-9
        )

    def test_validates_arguments(self):
        with pytest.raises(ValueError):
            solve_symmetric(matvec_of(np.eye(3)), 3, 4)
        with pytest.raises(ValueError):
            solve_symmetric(matvec_of(np.eye(3)), 3, 1, tol=-1.0)


class TestSolveNonsymmetric:
    def test_diagonal(self):
        mat = np.diag([3.0, 2.0, 1.0])
        res = solve_nonsymmetric(matvec_of(mat), 3, 2, tol=1e-12)
        np.testing.assert_allclose(res.eigenvalues.real, [3.0, 2.0], atol=1e-11)
        assert not res.complex_flagged.any()

    def test_constructed_real_spectrum(self):
        rng = np.random.default_rng(20)
        target = np.linspace(5.0, 1.0, 20)
        basis = rng.standard_normal((20, 20)) + 5 * np.eye(20)
        mat = basis @ np.diag(target) @ np.linalg.inv(basis)
        res = solve_nonsymmetric(matvec_of(mat), 20, 5, tol=1e-12, seed=2)
        np.testing.assert_allclose(res.eigenvalues.real, target[:5], atol=1e-8)

    def test_agrees_with_symmetric_solver(self):
        rng = np.random.default_rng(21)
        a = rng.standard_normal((30, 30))
        mat = a @ a.T
        sym = solve_symmetric(matvec_of(mat), 30, 4, tol=1e-11)
        non = solve_nonsymmetric(matvec_of(mat), 30, 4, tol=1e-11)
        np.testing.assert_allclose(
            non.eigenvalues.real, sym.eigenvalues, atol=1e-9
        )

    def test_complex_pair_flagged(self):
        # rotation block has eigenvalues 1 +- 2i; dominant real eigenvalue 3
        mat = np.zeros((5, 5))
        mat[0, 0] = 3.0
        mat[1:3, 1:3] = [[1.0, 2.0], [-2.0, 1.0]]
        mat[3, 3] = 0.5
        mat[4, 4] = 0.1
        res = solve_nonsymmetric(matvec_of(mat), 5, 3, tol=1e-10)
        assert abs(res.eigenvalues[0] - 3.0) < 1e-9
        assert res.complex_flagged[1] and res.complex_flagged[2]
        np.testing.assert_allclose(
            np.sort(res.eigenvalues[1:].imag), [-2.0, 2.0], atol=1e-9
        )

    def test_restart_with_locking(self):
        rng = np.random.default_rng(22)
        a = rng.standard_normal((150, 150))
        mat = a @ a.T  # symmetric instance, solved via Arnoldi with tiny ncv
        res = solve_nonsymmetric(matvec_of(mat), 150, 6, tol=1e-9, ncv=18)
        dense_vals = np.sort(np.linalg.eigvalsh(mat))[::-1][:6]
        np.testing.assert_allclose(res.eigenvalues.real, dense_vals, rtol=1e-7)

    def test_partial_convergence(self):
        rng = np.random.default_rng(23)
        mat = rng.standard_normal((40, 40))
        with pytest.raises(PartialConvergenceError) as err:
            solve_nonsymmetric(matvec_of(mat), 40, 5, tol=1e-14, max_iter=6, ncv=6)
        assert err.value.result.n_iter <= 6

    def test_determinism(self):
        rng = np.random.default_rng(24)
        mat = rng.standard_normal((25, 25)) + 6 * np.eye(25)
        r1 = solve_nonsymmetric(matvec_of(mat), 25, 3, seed=5)
        r2 = solve_nonsymmetric(matvec_of(mat), 25, 3, seed=5)
        np.testing.assert_allclose(
            r1.eigenvalues, r2.eigenvalues, atol=1e-14, rtol=0
        )
