"""Truncated Karhunen-Loeve post-processing: sampling and error metrics.

Realizations are mean plus sum of sqrt(lambda_i) * phi_i * xi_i with i.i.d.
standard normal xi (the Gaussian-field convention); per-draw RNG streams are
spawned deterministically from one master seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import collocation as colloc_mod
from . import galerkin as gal_mod


@dataclass(eq=False)
class KLExpansion:
    """Truncated expansion: eigenvalues, eigenfunction evaluators, mean.

    ``seed`` is the default stream for xi draws when sample_field is not
    given one explicitly.
    """

    eigenvalues: np.ndarray
    eigenfunctions: list
    mean: object = 0.0
    seed: int = 0

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        if np.any(lam < -1e-10 * max(lam.max(initial=0.0), 1.0)):
            raise ValueError("eigenvalues must be non-negative")
        lam = np.clip(lam, 0.0, None)
        if np.any(np.diff(lam) > 1e-12 * max(lam.max(initial=0.0), 1.0)):
            raise ValueError("eigenvalues must be non-increasing")
        self.eigenvalues = lam
        if len(self.eigenfunctions) != lam.size:
            raise ValueError("need one evaluator per eigenvalue")

    @property
    def m(self) -> int:
        return self.eigenvalues.size


def fix_sign(coeffs: np.ndarray) -> np.ndarray:
    """Flip the coefficient vector so its first significant entry is positive."""
    coeffs = np.asarray(coeffs, dtype=float)
    cutoff = 1e-12 * np.abs(coeffs).max(initial=0.0)
    for c in coeffs:
        if abs(c) > cutoff:
            return coeffs if c > 0 else -coeffs
    return coeffs


def _mean_values(mean, points) -> np.ndarray:
    points = np.atleast_2d(points)
    if callable(mean):
        return np.asarray(mean(points), dtype=float)
    return np.full(points.shape[0], float(mean))


def sample_field(
    kle: KLExpansion, points, draws: int, seed: int | None = None, xi=None
) -> np.ndarray:
    """Independent realizations of the truncated field at the given points.

    Returns a (draws, npoints) matrix. ``xi`` may inject explicit standard
    normal draws (shape (draws, m)) for deterministic tests; otherwise one
    i.i.d. standard-normal stream per draw is spawned from the seed.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    mu = _mean_values(kle.mean, points)
    if kle.m == 0:
        return np.tile(mu, (draws, 1))
    phi = np.array([f(points) for f in kle.eigenfunctions])
    amp = np.sqrt(kle.eigenvalues)
    if xi is not None:
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (draws, kle.m):
            raise ValueError(f"xi must have shape ({draws}, {kle.m})")
    else:
        seed = kle.seed if seed is None else seed
        streams = np.random.SeedSequence(seed).spawn(draws)
        xi = np.array(
            [np.random.default_rng(s).standard_normal(kle.m) for s in streams]
        )
    return mu[None, :] + (xi * amp[None, :]) @ phi


def orthonormality_defect(kle: KLExpansion, points, weights) -> float:
    """Max deviation of the eigenfunction Gram matrix from identity.

    ``points``/``weights`` describe a quadrature rule on the physical domain;
    used as an on-demand consistency check of a computed expansion.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    weights = np.asarray(weights, dtype=float)
    phi = np.array([f(points) for f in kle.eigenfunctions])
    gram = (phi * weights[None, :]) @ phi.T
    return float(np.abs(gram - np.eye(kle.m)).max())


def relative_error(lambda_ref: float, lambda_h: float) -> float:
    """|ref - h| / ref for a positive reference eigenvalue."""
    if lambda_ref <= 0:
        raise ValueError("reference eigenvalue must be positive")
    return abs(lambda_ref - lambda_h) / lambda_ref


def mean_relative_error(ref, h, m: int) -> float:
    """Average of the first m relative eigenvalue errors."""
    ref = np.asarray(ref, dtype=float)
    h = np.asarray(h, dtype=float)
    if m < 1 or ref.size < m or h.size < m:
        raise ValueError(f"need at least {m} eigenvalues in both sequences")
    if np.any(ref[:m] <= 0):
        raise ValueError("reference eigenvalues must be positive")
    return float(np.mean(np.abs(ref[:m] - h[:m]) / ref[:m]))


def _truncate(result, m: int):
    if m > result.m:
        raise ValueError(
            f"truncation order {m} exceeds the {result.m} available pairs"
        )
    lam = result.eigenvalues[:m]
    if np.iscomplexobj(lam):
        lam = lam.real
    return np.clip(lam, 0.0, None)


def from_galerkin(setup, result, m: int, mean=0.0) -> KLExpansion:
    """Expansion with sign-fixed, L2-orthonormal Galerkin eigenfunctions.

    Evaluators take parametric points (npts, d).
    """
    lam = _truncate(result, m)
    funcs = []
    for k in range(m):
        coeffs = fix_sign(gal_mod.back_transform(setup, result.vectors[:, k].real))

        def evaluator(points, c=coeffs):
            points = np.atleast_2d(points)
            return np.array(
                [gal_mod.eval_eigenfunction(setup, c, x) for x in points]
            )

        funcs.append(evaluator)
    return KLExpansion(lam, funcs, mean)


def from_collocation(setup, result, m: int, mean=0.0) -> KLExpansion:
    """Expansion from collocation output; coefficients are L2-normalized."""
    lam = _truncate(result, m)
    funcs = []
    for k in range(m):
        coeffs = result.vectors[:, k]
        if np.iscomplexobj(coeffs):
            coeffs = coeffs.real
        coeffs = fix_sign(colloc_mod.l2_normalize(setup, coeffs))

        def evaluator(points, c=coeffs):
            points = np.atleast_2d(points)
            return np.array(
                [colloc_mod.eval_eigenfunction(setup, c, x) for x in points]
            )

        funcs.append(evaluator)
    return KLExpansion(lam, funcs, mean)


def parametric_line(direction: int, ndim: int, npoints: int = 201, fixed: float = 0.5):
    """Parametric sample line: varies one direction, holds the others at mid."""
    coords = np.linspace(0.0, 1.0, npoints)
    pts = np.full((npoints, ndim), fixed)
    pts[:, direction - 1] = coords
    return coords, pts


def write_line_samples(path, coords, modes: np.ndarray):
    """CSV with columns param_coord, mode_1, ..., mode_k."""
    modes = np.atleast_2d(modes)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["param_coord"] + [f"mode_{k + 1}" for k in range(modes.shape[1])]
        )
        for c, row in zip(coords, modes):
            writer.writerow([f"{c:.17g}"] + [f"{v:.17g}" for v in row])
