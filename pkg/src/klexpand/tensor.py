"""Kronecker-product linear algebra on univariate factor matrices.

Sum-factorized matvec, factor-wise Cholesky and LU with triangular solves,
and diagonal scaling. No dense Kronecker matrix is ever assembled here; the
dense assembly exists only inside the test oracles.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bspline import DENSE_FACTOR_LIMIT


class FactorizationError(RuntimeError):
    """A univariate factor could not be factorized (direction is named)."""


def _normalize_factor(mat):
    if sp.issparse(mat):
        mat = sp.csr_array(mat)
        if max(mat.shape) <= DENSE_FACTOR_LIMIT:
            return mat.toarray()
        return mat
    return np.asarray(mat, dtype=float)


class KroneckerOperator:
    """Operator F_d x ... x F_2 x F_1 stored as its univariate factors.

    Factors are listed slowest direction first; the last listed factor acts
    on the fastest-varying index of a flattened vector.
    """

    def __init__(self, factors):
        self.factors = tuple(_normalize_factor(f) for f in factors)
        if not self.factors:
            raise ValueError("need at least one factor")
        self.rows_shape = tuple(f.shape[0] for f in self.factors)
        self.cols_shape = tuple(f.shape[1] for f in self.factors)
        self.shape = (
            int(np.prod(self.rows_shape)),
            int(np.prod(self.cols_shape)),
        )

    @property
    def nfactors(self) -> int:
        return len(self.factors)

    def direction(self, index: int) -> int:
        """1-based spatial direction of the factor at a list index."""
        return self.nfactors - index


def _mode_matmul(factor, x, axis, transpose=False):
    """Contract a factor with one axis of a tensor, keeping the axis order."""
    n_in = x.shape[axis]
    mat = np.moveaxis(x, axis, 0).reshape(n_in, -1)
    out = factor.T @ mat if transpose else factor @ mat
    shape = list(x.shape)
    shape[axis] = out.shape[0]
    moved = [shape[axis]] + [s for i, s in enumerate(shape) if i != axis]
    return np.moveaxis(out.reshape(moved), 0, axis)


def kron_matvec(op: KroneckerOperator, v, transpose=False) -> np.ndarray:
    """Matrix-vector product via successive mode contractions.

    The contraction order is fixed (direction 1 first) so repeated runs are
    bitwise reproducible.
    """
    v = np.asarray(v, dtype=float)
    in_shape = op.rows_shape if transpose else op.cols_shape
    if v.shape != (int(np.prod(in_shape)),):
        raise ValueError(
            f"operand has length {v.size}, operator expects {int(np.prod(in_shape))}"
        )
    x = v.reshape(in_shape)
    for axis in range(op.nfactors - 1, -1, -1):
        x = _mode_matmul(op.factors[axis], x, axis, transpose=transpose)
    return x.ravel()


def _banded_lower_from_sparse(mat):
    """Lower banded storage ab[k, j] = mat[j + k, j] of a symmetric sparse matrix."""
    n = mat.shape[0]
    coo = sp.coo_array(mat)
    bw = int(np.max(np.abs(coo.row - coo.col))) if coo.nnz else 0
    ab = np.zeros((bw + 1, n))
    csr = sp.csr_array(mat)
    for k in range(bw + 1):
        ab[k, : n - k] = csr.diagonal(-k)
    return ab, bw


def _upper_from_lower_banded(cb, bw):
    """Banded storage of L^T given the lower banded storage of L."""
    n = cb.shape[1]
    ub = np.zeros((bw + 1, n))
    for m in range(bw + 1):
        ub[bw - m, m:] = cb[m, : n - m]
    return ub


class _CholFactor:
    """Cholesky factor of one univariate SPD matrix (dense or banded)."""

    def __init__(self, mat, direction):
        if sp.issparse(mat):
            ab, bw = _banded_lower_from_sparse(mat)
            try:
                cb = la.cholesky_banded(ab, lower=True)
            except la.LinAlgError as exc:
                raise FactorizationError(
                    f"factor for direction {direction} is not SPD"
                ) from exc
            self.kind = "banded"
            self.cb = cb
            self.ub = _upper_from_lower_banded(cb, bw)
            self.bw = bw
            self.n = mat.shape[0]
        else:
            mat = np.asarray(mat, dtype=float)
            if not np.allclose(mat, mat.T, rtol=1e-10, atol=1e-12):
                raise FactorizationError(
                    f"factor for direction {direction} is not symmetric"
                )
            try:
                self.lower_dense = np.linalg.cholesky(mat)
            except np.linalg.LinAlgError as exc:
                raise FactorizationError(
                    f"factor for direction {direction} is not SPD"
                ) from exc
            self.kind = "dense"
            self.n = mat.shape[0]

    def lower(self) -> np.ndarray:
        if self.kind == "dense":
            return self.lower_dense
        out = np.zeros((self.n, self.n))
        for k in range(self.bw + 1):
            out[np.arange(k, self.n), np.arange(self.n - k)] = self.cb[k, : self.n - k]
        return out

    def solve(self, b, transpose=False):
        """Solve L x = b (or L^T x = b) for vector or matrix right-hand sides."""
        if self.kind == "dense":
            return la.solve_triangular(
                self.lower_dense, b, lower=True, trans="T" if transpose else "N"
            )
        if transpose:
            return la.solve_banded((0, self.bw), self.ub, b)
        return la.solve_banded((self.bw, 0), self.cb, b)


class KroneckerCholesky:
    """Per-factor lower Cholesky factors L_d x ... x L_1 of a Kronecker SPD matrix."""

    def __init__(self, factors):
        self.factors = tuple(factors)
        self.shape_per_factor = tuple(f.n for f in self.factors)

    @property
    def nfactors(self):
        return len(self.factors)

    def lower(self, index: int) -> np.ndarray:
        """Dense lower factor at a list index (small sizes; used by checks)."""
        return self.factors[index].lower()


def kron_cholesky(op: KroneckerOperator) -> KroneckerCholesky:
    """Factor-wise Cholesky of an SPD Kronecker operator."""
    facs = []
    for i, f in enumerate(op.factors):
        if f.shape[0] != f.shape[1]:
            raise ValueError("Cholesky requires square factors")
        facs.append(_CholFactor(f, op.direction(i)))
    return KroneckerCholesky(facs)


def _mode_solve(solver, x, axis, transpose):
    n_in = x.shape[axis]
    mat = np.moveaxis(x, axis, 0).reshape(n_in, -1)
    out = solver.solve(mat, transpose=transpose)
    shape = list(x.shape)
    moved = [out.shape[0]] + [s for i, s in enumerate(shape) if i != axis]
    return np.moveaxis(out.reshape(moved), 0, axis)


def kron_tri_solve(ch: KroneckerCholesky, v, transpose=False) -> np.ndarray:
    """Apply L^{-1} (or L^{-T}) by factor-wise triangular solves."""
    v = np.asarray(v, dtype=float)
    n = int(np.prod(ch.shape_per_factor))
    if v.shape != (n,):
        raise ValueError(f"operand has length {v.size}, expected {n}")
    x = v.reshape(ch.shape_per_factor)
    for axis in range(ch.nfactors - 1, -1, -1):
        x = _mode_solve(ch.factors[axis], x, axis, transpose)
    return x.ravel()


class _LUFactor:
    """LU factorization of one univariate factor (dense or sparse banded)."""

    def __init__(self, mat, direction):
        self.n = mat.shape[0]
        if sp.issparse(mat):
            try:
                self.splu = spla.splu(sp.csc_matrix(mat), permc_spec="NATURAL")
            except RuntimeError as exc:
                raise FactorizationError(
                    f"factor for direction {direction} is singular"
                ) from exc
            self.kind = "sparse"
        else:
            try:
                self.lu, self.piv = la.lu_factor(np.asarray(mat, dtype=float))
            except (la.LinAlgError, ValueError) as exc:
                raise FactorizationError(
                    f"factor for direction {direction} is singular"
                ) from exc
            if np.any(np.abs(np.diag(self.lu)) < 1e-300):
                raise FactorizationError(
                    f"factor for direction {direction} is singular"
                )
            self.kind = "dense"

    def solve(self, b, transpose=False):
        if self.kind == "dense":
            return la.lu_solve((self.lu, self.piv), b, trans=1 if transpose else 0)
        return self.splu.solve(np.ascontiguousarray(b), trans="T" if transpose else "N")


class KroneckerLU:
    """Per-factor LU solves for a Kronecker operator with square factors."""

    def __init__(self, factors):
        self.factors = tuple(factors)
        self.shape_per_factor = tuple(f.n for f in self.factors)

    @property
    def nfactors(self):
        return len(self.factors)


def kron_lu(op: KroneckerOperator) -> KroneckerLU:
    facs = []
    for i, f in enumerate(op.factors):
        if f.shape[0] != f.shape[1]:
            raise ValueError("LU requires square factors")
        facs.append(_LUFactor(f, op.direction(i)))
    return KroneckerLU(facs)


def kron_lu_solve(lu: KroneckerLU, v, transpose=False) -> np.ndarray:
    """Apply the inverse (or inverse transpose) by factor-wise LU solves."""
    v = np.asarray(v, dtype=float)
    n = int(np.prod(lu.shape_per_factor))
    if v.shape != (n,):
        raise ValueError(f"operand has length {v.size}, expected {n}")
    x = v.reshape(lu.shape_per_factor)
    for axis in range(lu.nfactors - 1, -1, -1):
        x = _mode_solve(lu.factors[axis], x, axis, transpose)
    return x.ravel()


def diag_scale(d, v) -> np.ndarray:
    """Elementwise product; the diagonal-scaling step of the matvec pipelines."""
    d = np.asarray(d, dtype=float)
    v = np.asarray(v, dtype=float)
    if d.shape != v.shape:
        raise ValueError(f"diagonal length {d.size} does not match vector {v.size}")
    if not np.all(np.isfinite(d)):
        raise ValueError("diagonal entries must be finite")
    return d * v
