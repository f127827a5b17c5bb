"""Matrix-free isogeometric collocation of the covariance integral equation.

The residual is collocated at the Greville images; the integral is evaluated
by a tensor Gauss rule tabulated once at setup. A matvec runs in four steps:
interpolation at quadrature points, scaling, one-row-at-a-time kernel
contraction, and a backsolve with the pivoted LU of the collocation matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bspline import (
    BasisSpace,
    element_quadrature,
    eval_space,
    gauss_legendre,
    greville_abscissae,
    space_value_matrix,
    tensor_weights,
    univariate_collocation,
)
from .geometry import GeometryMap
from .kernel import CovarianceKernel, apply_gamma
from .tensor import FactorizationError, KroneckerOperator, kron_lu, kron_lu_solve


@dataclass(eq=False)
class CollocationSetup:
    """Quadrature tables, point sets, and the factorized collocation matrix."""

    trial_space: BasisSpace
    geometry: GeometryMap
    kernel: CovarianceKernel
    basis_at_quad: sp.csr_array
    quad_weights: np.ndarray
    jac_at_quad: np.ndarray
    quad_physical: np.ndarray
    colloc_physical: np.ndarray
    z_matrix: object
    nq_per_dir: int
    bspline_z: bool
    threads: int = 1
    _z_solver: object = None

    @property
    def n(self) -> int:
        return self.trial_space.dim

    @property
    def n_quad(self) -> int:
        return self.quad_weights.size

    def solve_z(self, rhs: np.ndarray) -> np.ndarray:
        if self.bspline_z:
            return kron_lu_solve(self._z_solver, rhs)
        return self._z_solver.solve(np.ascontiguousarray(rhs))


def build_collocation(
    trial: BasisSpace,
    geometry: GeometryMap,
    kernel: CovarianceKernel,
    nq_per_dir: int | None = None,
    bspline_z: bool = False,
    threads: int = 1,
) -> CollocationSetup:
    """Tabulate basis values, weights and Jacobians; factorize Z with pivoting.

    ``nq_per_dir`` defaults to p+1 Gauss points per element and direction.
    With ``bspline_z`` the trial space must be plain B-splines; Z then has
    Kronecker structure and is solved factor-wise.
    """
    if trial.ndim != geometry.ndim:
        raise ValueError("trial space and geometry dimensions differ")
    if nq_per_dir is None:
        nq_per_dir = max(trial.degrees) + 1
    if nq_per_dir < 1:
        raise ValueError("need at least one quadrature point per direction")
    if bspline_z and trial.weights is not None:
        raise ValueError("the Kronecker fast path needs a plain B-spline trial space")
    rule = gauss_legendre(nq_per_dir)
    qpts, qwts = [], []
    for kv in trial.knotvectors:
        p, w = element_quadrature(kv.breakpoints, rule)
        qpts.append(p)
        qwts.append(w)
    basis_at_quad = space_value_matrix(trial, qpts)
    weights = tensor_weights(qwts)
    jac = geometry.jacobian_grid(qpts)
    quad_physical = geometry.map_grid(qpts)
    grev = trial.greville()
    colloc_physical = geometry.map_grid(grev)
    if bspline_z:
        factors = [
            univariate_collocation(kv, g)
            for kv, g in zip(trial.knotvectors, grev)
        ]
        z_matrix = KroneckerOperator(factors[::-1])
        z_solver = kron_lu(z_matrix)
    else:
        z_matrix = space_value_matrix(trial, grev)
        try:
            z_solver = spla.splu(sp.csc_matrix(z_matrix))
        except RuntimeError as exc:
            raise FactorizationError(
                "collocation matrix is singular on this mesh"
            ) from exc
    return CollocationSetup(
        trial_space=trial,
        geometry=geometry,
        kernel=kernel,
        basis_at_quad=basis_at_quad,
        quad_weights=weights,
        jac_at_quad=jac,
        quad_physical=quad_physical,
        colloc_physical=colloc_physical,
        z_matrix=z_matrix,
        nq_per_dir=nq_per_dir,
        bspline_z=bspline_z,
        threads=threads,
        _z_solver=z_solver,
    )


def kernel_stage(setup: CollocationSetup, v) -> np.ndarray:
    """Steps 1-3 of the matvec: interpolate, scale, contract with the kernel.

    Exposed separately because these steps carry the O(N * Ne * Nq) cost that
    the complexity checks measure.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (setup.n,):
        raise ValueError(f"vector has length {v.size}, expected {setup.n}")
    y = setup.basis_at_quad @ v
    y *= setup.jac_at_quad
    y *= setup.quad_weights
    return apply_gamma(
        setup.kernel,
        setup.quad_physical,
        setup.colloc_physical,
        y,
        threads=setup.threads,
    )


def apply_collocation(setup: CollocationSetup, v) -> np.ndarray:
    """Standard-form matvec: kernel stage followed by the LU backsolve."""
    return setup.solve_z(kernel_stage(setup, v))


def eval_eigenfunction(setup: CollocationSetup, coeffs, xhat) -> float:
    """Pointwise eigenfunction value of the (NURBS) trial expansion."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (setup.n,):
        raise ValueError(f"coefficients have length {coeffs.size}, expected {setup.n}")
    idx, vals = eval_space(setup.trial_space, xhat)
    return float((coeffs[idx] * vals).sum())


def l2_normalize(setup: CollocationSetup, coeffs) -> np.ndarray:
    """Scale coefficients so the eigenfunction has unit L2 norm over D."""
    coeffs = np.asarray(coeffs, dtype=float)
    at_quad = setup.basis_at_quad @ coeffs
    norm2 = float((setup.quad_weights * setup.jac_at_quad) @ (at_quad * at_quad))
    if norm2 <= 0:
        raise ValueError("cannot normalize a zero eigenfunction")
    return coeffs / np.sqrt(norm2)
