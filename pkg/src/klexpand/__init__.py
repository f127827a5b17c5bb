"""Matrix-free truncated Karhunen-Loeve expansion on spline geometries.

Two matrix-free discretizations of the covariance integral eigenproblem:
a Galerkin method built on interpolation based quadrature with Kronecker
sum factorization, and Greville-point collocation with a pivoted LU
standard-form reduction. A dense reference module provides small-scale
ground truth, and a CLI reproduces the accuracy-versus-cost benchmark
protocol at desk scale.
"""

from .bspline import (
    BasisSpace,
    KnotVector,
    QuadratureRule,
    eval_basis,
    gauss_legendre,
    greville_abscissae,
    open_knot_vector,
    uniform_knot_vector,
    univariate_collocation,
    univariate_mass,
)
from .collocation import CollocationSetup, apply_collocation, build_collocation
from .config import BenchmarkConfig, ConfigError, parse_config_file, parse_config_text
from .eigen import (
    EigenResult,
    OperatorContractError,
    PartialConvergenceError,
    solve_nonsymmetric,
    solve_symmetric,
)
from .galerkin import (
    GalerkinSetup,
    apply_galerkin,
    back_transform,
    build_galerkin,
    interpolation_space,
)
from .geometry import (
    DegenerateGeometryError,
    GeometryMap,
    half_cylinder,
    unit_box,
    unit_cube,
    unit_interval,
    unit_square,
)
from .kernel import CovarianceKernel, apply_gamma
from .kl import KLExpansion, mean_relative_error, relative_error, sample_field
from .reference import (
    DenseSystem,
    SizeCapError,
    assemble_collocation_dense,
    assemble_galerkin_dense,
    assemble_ibq_dense,
    solve_dense_generalized,
)
from .tensor import (
    FactorizationError,
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

__version__ = "0.1.0"
