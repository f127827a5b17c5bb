"""Matrix-free Galerkin operator built on interpolation based quadrature.

The trial space is spanned by B-splines weighted by 1/sqrt(det DF), which
makes the mass matrix a Kronecker product of univariate masses. The system
matrix factors into Kronecker mixed-mass and collocation pieces around a
kernel Gram block that is evaluated on the fly, so a full matvec runs in
O(Ntilde^2) and O(Ntilde) memory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bspline import (
    BasisSpace,
    eval_space,
    greville_abscissae,
    open_knot_vector,
    univariate_collocation,
    univariate_mass,
)
from .geometry import GeometryMap
from .kernel import CovarianceKernel, apply_gamma
from .tensor import (
    KroneckerCholesky,
    KroneckerLU,
    KroneckerOperator,
    diag_scale,
    kron_cholesky,
    kron_lu,
    kron_lu_solve,
    kron_matvec,
    kron_tri_solve,
)

CONTINUITY_CHOICES = ("auto", "c0", "cpm1")


def interpolation_space(
    trial: BasisSpace, continuity: str = "c0", cminus1_lines=()
) -> BasisSpace:
    """Interpolation space on the trial mesh with reduced continuity.

    ``continuity`` is 'c0' (interior multiplicity p, for rough kernels) or
    'cpm1' (multiplicity 1, for smooth kernels). ``cminus1_lines`` lists
    (direction, breakpoint) pairs made fully discontinuous, which is required
    where the geometry is only C^0.
    """
    if continuity not in ("c0", "cpm1"):
        raise ValueError("continuity must be 'c0' or 'cpm1'")
    kvs = []
    for k, kv in enumerate(trial.knotvectors):
        p = kv.degree
        base = p if continuity == "c0" else 1
        overrides = {
            bp: p + 1 for (direction, bp) in cminus1_lines if direction == k + 1
        }
        kvs.append(open_knot_vector(p, kv.breakpoints, base, overrides))
    return BasisSpace(tuple(kvs), role="interpolation")


@dataclass(eq=False)
class GalerkinSetup:
    """Assembled Kronecker factors and cached point data for the matvec."""

    trial_space: BasisSpace
    interp_space: BasisSpace
    geometry: GeometryMap
    kernel: CovarianceKernel
    mixed_mass: KroneckerOperator
    interp_colloc: KroneckerOperator
    interp_colloc_lu: KroneckerLU
    mass: KroneckerOperator
    mass_cholesky: KroneckerCholesky
    jac_scale: np.ndarray
    greville_physical: np.ndarray
    threads: int = 1

    @property
    def n_trial(self) -> int:
        return self.trial_space.dim

    @property
    def n_interp(self) -> int:
        return self.interp_space.dim


def build_galerkin(
    trial: BasisSpace,
    interp: BasisSpace,
    geometry: GeometryMap,
    kernel: CovarianceKernel,
    threads: int = 1,
) -> GalerkinSetup:
    """Assemble the per-direction factor matrices and cache point data.

    The 1/sqrt(det DF) trial weight cancels the pullback determinant, so the
    mass matrix is the parametric B-spline mass and stays Kronecker.
    """
    if trial.weights is not None:
        raise ValueError("the weighted trial space uses plain B-splines")
    if trial.ndim != interp.ndim or trial.ndim != geometry.ndim:
        raise ValueError("trial, interpolation space and geometry dimensions differ")
    for k, (tkv, ikv) in enumerate(zip(trial.knotvectors, interp.knotvectors)):
        if tkv.degree != ikv.degree:
            raise ValueError(
                f"direction {k + 1}: interpolation degree must equal trial degree"
            )
        if not np.array_equal(tkv.breakpoints, ikv.breakpoints):
            raise ValueError(
                f"direction {k + 1}: spaces must share the same mesh"
            )
    if interp.dim < trial.dim:
        raise ValueError(
            f"interpolation space ({interp.dim}) smaller than trial space ({trial.dim})"
        )
    mass_factors, mixed_factors, colloc_factors = [], [], []
    for tkv, ikv in zip(trial.knotvectors, interp.knotvectors):
        mass_factors.append(univariate_mass(tkv, tkv))
        mixed_factors.append(univariate_mass(ikv, tkv))
        colloc_factors.append(univariate_collocation(ikv, greville_abscissae(ikv)))
    mass = KroneckerOperator(mass_factors[::-1])
    mixed = KroneckerOperator(mixed_factors[::-1])
    colloc = KroneckerOperator(colloc_factors[::-1])
    chol = kron_cholesky(mass)
    colloc_lu = kron_lu(colloc)
    grev = interp.greville()
    physical = geometry.map_grid(grev)
    det = geometry.jacobian_grid(grev)
    return GalerkinSetup(
        trial_space=trial,
        interp_space=interp,
        geometry=geometry,
        kernel=kernel,
        mixed_mass=mixed,
        interp_colloc=colloc,
        interp_colloc_lu=colloc_lu,
        mass=mass,
        mass_cholesky=chol,
        jac_scale=np.sqrt(det),
        greville_physical=physical,
        threads=threads,
    )


def apply_galerkin(setup: GalerkinSetup, v) -> np.ndarray:
    """Standard-form matvec; nine factor applications, nothing dense formed."""
    v = np.asarray(v, dtype=float)
    if v.shape != (setup.n_trial,):
        raise ValueError(f"vector has length {v.size}, expected {setup.n_trial}")
    w = kron_tri_solve(setup.mass_cholesky, v, transpose=True)
    w = kron_matvec(setup.mixed_mass, w)
    w = kron_lu_solve(setup.interp_colloc_lu, w, transpose=True)
    w = diag_scale(setup.jac_scale, w)
    w = apply_gamma(
        setup.kernel,
        setup.greville_physical,
        setup.greville_physical,
        w,
        threads=setup.threads,
    )
    w = diag_scale(setup.jac_scale, w)
    w = kron_lu_solve(setup.interp_colloc_lu, w, transpose=False)
    w = kron_matvec(setup.mixed_mass, w, transpose=True)
    return kron_tri_solve(setup.mass_cholesky, w, transpose=False)


def back_transform(setup: GalerkinSetup, vprime) -> np.ndarray:
    """Map standard-form eigenvector coordinates to basis coefficients."""
    vprime = np.asarray(vprime, dtype=float)
    if vprime.shape != (setup.n_trial,):
        raise ValueError(f"vector has length {vprime.size}, expected {setup.n_trial}")
    return kron_tri_solve(setup.mass_cholesky, vprime, transpose=True)


def eval_eigenfunction(setup: GalerkinSetup, coeffs, xhat) -> float:
    """Pointwise eigenfunction value: weighted B-spline expansion at xhat."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (setup.n_trial,):
        raise ValueError(f"coefficients have length {coeffs.size}, expected {setup.n_trial}")
    idx, vals = eval_space(setup.trial_space, xhat)
    det = setup.geometry.jacobian_det(xhat)
    return float((coeffs[idx] * vals).sum() / np.sqrt(det))
