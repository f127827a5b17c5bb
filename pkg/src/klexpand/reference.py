"""Dense assembled systems: the small-scale ground truth for both methods.

Assembles the Gauss-quadrature Galerkin matrices, the dense collocation
matrices, and the dense composition of the factorized Galerkin operator, then
solves the generalized problem directly. Deliberately capped in size; the
matrix-free paths are the production surface.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy.spatial.distance import cdist

from .bspline import (
    BasisSpace,
    element_quadrature,
    gauss_legendre,
    space_value_matrix,
    tensor_weights,
)
from .eigen import COMPLEX_FLAG_RATIO, EigenResult
from .galerkin import GalerkinSetup
from .geometry import GeometryMap
from .kernel import CovarianceKernel

QUAD_POINT_CAP = 20000
DENSE_N_CAP = 2000


class SizeCapError(ValueError):
    """The requested dense assembly exceeds the deliberate small-scale caps."""


@dataclass(eq=False)
class DenseSystem:
    """Dense (A, Z) pencil with a tag recording how it was assembled."""

    a: np.ndarray
    z: np.ndarray
    method: str


def _kernel_matrix(kernel: CovarianceKernel, x, y) -> np.ndarray:
    """Dense kernel block; independent of the streaming apply_gamma route."""
    x = np.atleast_2d(x)
    y = np.atleast_2d(y)
    if kernel.kind == "constant":
        return np.full((x.shape[0], y.shape[0]), kernel.variance)
    dist = cdist(x, y)
    if kernel.kind == "exponential":
        return kernel.variance * np.exp(-dist / kernel.correlation_length)
    return kernel.variance * np.exp(-((dist / kernel.correlation_length) ** 2))


def _quadrature_tables(trial: BasisSpace, geometry: GeometryMap, nq_per_dir: int):
    rule = gauss_legendre(nq_per_dir)
    pts, wts = [], []
    for kv in trial.knotvectors:
        p, w = element_quadrature(kv.breakpoints, rule)
        pts.append(p)
        wts.append(w)
    total = int(np.prod([p.size for p in pts]))
    if total > QUAD_POINT_CAP:
        raise SizeCapError(
            f"{total} quadrature points exceed the dense-oracle cap "
            f"({QUAD_POINT_CAP}); use the matrix-free paths"
        )
    weights = tensor_weights(wts)
    det = geometry.jacobian_grid(pts)
    physical = geometry.map_grid(pts)
    values = space_value_matrix(trial, pts)
    return values, weights, det, physical


def assemble_galerkin_dense(
    trial: BasisSpace,
    geometry: GeometryMap,
    kernel: CovarianceKernel,
    nq_per_dir: int | None = None,
) -> DenseSystem:
    """Double-integral Galerkin matrices by tensor Gauss quadrature.

    The trial functions are the weighted B-splines b_i / sqrt(det DF), so the
    mass matrix reduces to the parametric B-spline mass.
    """
    if trial.weights is not None:
        raise ValueError("the weighted trial space uses plain B-splines")
    if nq_per_dir is None:
        nq_per_dir = max(trial.degrees) + 1
    values, weights, det, physical = _quadrature_tables(trial, geometry, nq_per_dir)
    nq = weights.size
    scaled = values.multiply((weights * np.sqrt(det))[:, None]).tocsr()
    ge = np.empty((nq, trial.dim))
    block = max(1, QUAD_POINT_CAP // 40)
    for lo in range(0, nq, block):
        hi = min(lo + block, nq)
        gam = _kernel_matrix(kernel, physical[lo:hi], physical)
        ge[lo:hi] = (scaled.T @ gam.T).T
    a = scaled.T @ ge
    a = 0.5 * (a + a.T)
    z = (values.multiply(weights[:, None]).tocsr().T @ values).toarray()
    z = 0.5 * (z + z.T)
    return DenseSystem(np.asarray(a), z, "galerkin-gauss")


def assemble_collocation_dense(
    trial: BasisSpace,
    geometry: GeometryMap,
    kernel: CovarianceKernel,
    nq_per_dir: int | None = None,
) -> DenseSystem:
    """Collocation matrices: quadrature rows for A, point evaluation for Z."""
    if nq_per_dir is None:
        nq_per_dir = max(trial.degrees) + 1
    values, weights, det, physical = _quadrature_tables(trial, geometry, nq_per_dir)
    colloc_physical = geometry.map_grid(trial.greville())
    scaled = values.multiply((weights * det)[:, None]).tocsr()
    gam = _kernel_matrix(kernel, colloc_physical, physical)
    a = (scaled.T @ gam.T).T
    z = space_value_matrix(trial, trial.greville()).toarray()
    return DenseSystem(np.asarray(a), z, "collocation")


def _dense_factor(mat) -> np.ndarray:
    return mat.toarray() if hasattr(mat, "toarray") else np.asarray(mat)


def _dense_kron(factors) -> np.ndarray:
    out = _dense_factor(factors[0])
    for f in factors[1:]:
        out = np.kron(out, _dense_factor(f))
    return out


def assemble_ibq_dense(setup: GalerkinSetup) -> DenseSystem:
    """Dense composition of the factorized Galerkin operator.

    Reuses the setup's own factor matrices and point data, so agreement with
    the matrix-free apply isolates the solve/contraction routes.
    """
    if setup.n_interp > DENSE_N_CAP:
        raise SizeCapError(
            f"interpolation dimension {setup.n_interp} exceeds the dense cap "
            f"({DENSE_N_CAP}); use the matrix-free paths"
        )
    mixed = _dense_kron(setup.mixed_mass.factors)
    colloc = _dense_kron(setup.interp_colloc.factors)
    gam = _kernel_matrix(setup.kernel, setup.greville_physical, setup.greville_physical)
    core = setup.jac_scale[:, None] * gam * setup.jac_scale[None, :]
    half = la.solve(colloc, core)
    core = la.solve(colloc, half.T).T
    a = mixed.T @ core @ mixed
    a = 0.5 * (a + a.T)
    z = _dense_kron(setup.mass.factors)
    return DenseSystem(a, z, "galerkin-ibq-dense")


def standard_form_dense(system: DenseSystem) -> np.ndarray:
    """Dense standard-form operator A' of the pencil (A, Z)."""
    if system.method == "collocation":
        return la.lu_solve(la.lu_factor(system.z), system.a)
    lower = np.linalg.cholesky(system.z)
    half = la.solve_triangular(lower, system.a, lower=True)
    return la.solve_triangular(lower, half.T, lower=True).T


def solve_dense_generalized(system: DenseSystem, m: int) -> EigenResult:
    """Top-m pairs of the dense pencil via the standard-form reduction."""
    n = system.a.shape[0]
    if n > DENSE_N_CAP:
        raise SizeCapError(f"dense solve capped at N <= {DENSE_N_CAP}, got {n}")
    if not 1 <= m <= n:
        raise ValueError(f"requested {m} pairs from a system of size {n}")
    t0 = time.perf_counter()
    aprime = standard_form_dense(system)
    if system.method == "collocation":
        vals, vecs = np.linalg.eig(aprime)
        order = np.argsort(-vals.real)[:m]
        vals = vals[order]
        vecs = vecs[:, order]
        flags = np.abs(vals.imag) > COMPLEX_FLAG_RATIO * np.maximum(
            np.abs(vals.real), 1e-300
        )
        if not flags.any():
            vals = vals.real
            vecs = vecs.real
        residuals = np.linalg.norm(aprime @ vecs - vecs * vals[None, :], axis=0)
        coeffs = vecs
    else:
        vals_all, vecs_all = np.linalg.eigh(aprime)
        order = np.argsort(vals_all)[::-1][:m]
        vals = vals_all[order]
        vecs = vecs_all[:, order]
        flags = np.zeros(m, dtype=bool)
        residuals = np.linalg.norm(aprime @ vecs - vecs * vals[None, :], axis=0)
        lower = np.linalg.cholesky(system.z)
        coeffs = la.solve_triangular(lower, vecs, lower=True, trans="T")
    return EigenResult(
        eigenvalues=vals,
        vectors=vecs,
        residual_norms=residuals,
        n_iter=0,
        solve_seconds=time.perf_counter() - t0,
        complex_flagged=flags,
        coefficients=coeffs,
    )
