"""Univariate and tensor-product B-spline/NURBS machinery.

Knot vectors, Cox-de Boor evaluation, Greville abscissae, Gauss-Legendre
quadrature and the univariate mass/collocation matrices that feed the
Kronecker algebra elsewhere. The parametric domain is always [0, 1]^d;
all physical scaling is handled by the geometry map.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.sparse as sp

#: univariate factor matrices at or below this size are kept dense,
#: sparse (banded) storage beyond
DENSE_FACTOR_LIMIT = 64


@dataclass(frozen=True)
class KnotVector:
    """Open (clamped) knot vector on [0, 1] together with a polynomial degree.

    The first and last knot repeat exactly ``degree + 1`` times; interior
    multiplicities may go up to ``degree + 1`` (a discontinuous space).
    """

    knots: np.ndarray
    degree: int

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", knots)
        p = int(self.degree)
        object.__setattr__(self, "degree", p)
        if p < 0:
            raise ValueError("degree must be non-negative")
        if knots.ndim != 1 or knots.size < 2 * (p + 1):
            raise ValueError("need at least 2(degree+1) knots")
        if np.any(np.diff(knots) < 0):
            raise ValueError("knots must be non-decreasing")
        if knots[0] != 0.0 or knots[-1] != 1.0:
            raise ValueError("knot vector must span [0, 1]")
        if np.any(knots[: p + 1] != 0.0) or knots[p + 1] == 0.0:
            raise ValueError("first knot must repeat exactly degree+1 times")
        if np.any(knots[-(p + 1) :] != 1.0) or knots[-(p + 2)] == 1.0:
            raise ValueError("last knot must repeat exactly degree+1 times")
        if self.n < p + 1:
            raise ValueError("too few basis functions for this degree")
        interior = knots[p + 1 : -(p + 1)]
        if interior.size:
            _, counts = np.unique(interior, return_counts=True)
            if counts.max() > p + 1:
                raise ValueError("interior knot multiplicity exceeds degree+1")

    @property
    def n(self) -> int:
        """Number of basis functions."""
        return self.knots.size - self.degree - 1

    @property
    def breakpoints(self) -> np.ndarray:
        """Unique knots (element boundaries)."""
        return np.unique(self.knots)

    @property
    def num_elements(self) -> int:
        return self.breakpoints.size - 1


def uniform_breakpoints(elements: int) -> np.ndarray:
    if elements < 1:
        raise ValueError("need at least one element")
    return np.linspace(0.0, 1.0, elements + 1)


def open_knot_vector(degree, breakpoints, interior_multiplicity=1, overrides=None):
    """Build an open knot vector from breakpoints and interior multiplicities.

    ``overrides`` maps a breakpoint value to a multiplicity that replaces the
    default at that location (matched with a small tolerance).
    """
    bp = np.asarray(breakpoints, dtype=float)
    if bp[0] != 0.0 or bp[-1] != 1.0 or np.any(np.diff(bp) <= 0):
        raise ValueError("breakpoints must increase strictly from 0 to 1")
    overrides = overrides or {}
    knots = [0.0] * (degree + 1)
    for x in bp[1:-1]:
        mult = interior_multiplicity
        for key, val in overrides.items():
            if abs(x - key) <= 1e-12:
                mult = val
        knots.extend([x] * int(mult))
    knots.extend([1.0] * (degree + 1))
    return KnotVector(np.asarray(knots), degree)


def uniform_knot_vector(degree, elements, interior_multiplicity=1, overrides=None):
    return open_knot_vector(
        degree, uniform_breakpoints(elements), interior_multiplicity, overrides
    )


def find_span(kv: KnotVector, x: float) -> int:
    """Index of the knot span containing x (right-continuous convention)."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"parametric coordinate {x} outside [0, 1]")
    span = int(np.searchsorted(kv.knots, x, side="right")) - 1
    return min(max(span, kv.degree), kv.n - 1)


def eval_basis(kv: KnotVector, x: float, span: int | None = None):
    """Evaluate the degree+1 possibly-nonzero basis functions at x.

    Returns ``(first_index, values)``; values are non-negative and sum to one.
    """
    if span is None:
        span = find_span(kv, x)
    p, t = kv.degree, kv.knots
    values = np.zeros(p + 1)
    values[0] = 1.0
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    for j in range(1, p + 1):
        left[j] = x - t[span + 1 - j]
        right[j] = t[span + j] - x
        saved = 0.0
        for r in range(j):
            temp = values[r] / (right[r + 1] + left[j - r])
            values[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        values[j] = saved
    return span - p, values


def eval_basis_deriv(kv: KnotVector, x: float, span: int | None = None):
    """Values and first derivatives of the nonzero basis functions at x.

    Returns ``(first_index, values, derivatives)``.
    """
    if span is None:
        span = find_span(kv, x)
    p, t = kv.degree, kv.knots
    first = span - p
    _, vals = eval_basis(kv, x, span)
    ders = np.zeros(p + 1)
    if p == 0:
        return first, vals, ders
    # degree p-1 values at the same span; nonzero functions span-p+1 .. span
    low = np.zeros(p)
    low[0] = 1.0
    left = np.zeros(p)
    right = np.zeros(p)
    for j in range(1, p):
        left[j] = x - t[span + 1 - j]
        right[j] = t[span + j] - x
        saved = 0.0
        for r in range(j):
            temp = low[r] / (right[r + 1] + left[j - r])
            low[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        low[j] = saved
    for k in range(p + 1):
        i = first + k
        a = low[k - 1] / (t[i + p] - t[i]) if k >= 1 and t[i + p] > t[i] else 0.0
        b = (
            low[k] / (t[i + p + 1] - t[i + 1])
            if k <= p - 1 and t[i + p + 1] > t[i + 1]
            else 0.0
        )
        ders[k] = p * (a - b)
    return first, vals, ders


def greville_abscissae(kv: KnotVector) -> np.ndarray:
    """Knot averages, one per basis function (element midpoints for p = 0)."""
    p, t, n = kv.degree, kv.knots, kv.n
    if p == 0:
        xi = 0.5 * (t[:-1] + t[1:])
    else:
        xi = np.array([t[i + 1 : i + p + 1].mean() for i in range(n)])
    return np.clip(xi, 0.0, 1.0)


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss points and weights on the reference interval [-1, 1]."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def npoints(self) -> int:
        return self.nodes.size


def gauss_legendre(n: int) -> QuadratureRule:
    """n-point Gauss-Legendre rule; exact for polynomials up to degree 2n-1."""
    if n < 1:
        raise ValueError("need at least one quadrature point")
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return QuadratureRule(nodes, weights)


def element_quadrature(breakpoints, rule: QuadratureRule):
    """Map a reference rule to every element; returns flat (points, weights)."""
    bp = np.asarray(breakpoints, dtype=float)
    widths = np.diff(bp)
    pts = (0.5 * (rule.nodes[None, :] + 1.0) * widths[:, None] + bp[:-1, None]).ravel()
    wts = (0.5 * rule.weights[None, :] * widths[:, None]).ravel()
    return pts, wts


def _pack_factor(mat: sp.csr_array):
    if max(mat.shape) <= DENSE_FACTOR_LIMIT:
        return mat.toarray()
    return mat


def univariate_mass(rows: KnotVector, cols: KnotVector):
    """Mass matrix entry (i, j) = integral of rowBasis_i * colBasis_j on [0, 1].

    Uses an exact-degree Gauss rule per element of the merged mesh. Returns a
    dense array for small sizes, a sparse (banded) matrix beyond
    ``DENSE_FACTOR_LIMIT``.
    """
    breaks = np.unique(np.concatenate([rows.breakpoints, cols.breakpoints]))
    rule = gauss_legendre((rows.degree + cols.degree) // 2 + 1)
    data, ii, jj = [], [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        mid = 0.5 * (a + b)
        span_r = find_span(rows, mid)
        span_c = find_span(cols, mid)
        pts = 0.5 * (rule.nodes + 1.0) * (b - a) + a
        wts = 0.5 * rule.weights * (b - a)
        vr = np.array([eval_basis(rows, x, span_r)[1] for x in pts])
        vc = np.array([eval_basis(cols, x, span_c)[1] for x in pts])
        block = np.einsum("k,ki,kj->ij", wts, vr, vc)
        fr, fc = span_r - rows.degree, span_c - cols.degree
        r_idx = np.arange(fr, fr + rows.degree + 1)
        c_idx = np.arange(fc, fc + cols.degree + 1)
        rr, cc = np.meshgrid(r_idx, c_idx, indexing="ij")
        data.append(block.ravel())
        ii.append(rr.ravel())
        jj.append(cc.ravel())
    mat = sp.coo_array(
        (np.concatenate(data), (np.concatenate(ii), np.concatenate(jj))),
        shape=(rows.n, cols.n),
    ).tocsr()
    return _pack_factor(mat)


def _row_span(kv: KnotVector, i: int, x: float) -> int:
    """Knot span for evaluating basis function i at x within its own support.

    Falls back to a left-sided span when x sits on a discontinuity at the right
    end of the support (duplicate Greville points of C^{-1} spaces).
    """
    t = kv.knots
    span = min(find_span(kv, x), i + kv.degree)
    while t[span + 1] <= t[span]:
        span -= 1
    return span


def univariate_collocation(kv: KnotVector, points):
    """Square collocation matrix: entry (i, j) = basis_j(point_i).

    Point i is evaluated inside the support of function i so that
    discontinuous (C^{-1}) spaces with duplicate Greville abscissae still
    produce an invertible matrix. Rows sum to one.
    """
    points = np.asarray(points, dtype=float)
    if points.size != kv.n:
        raise ValueError(
            f"expected {kv.n} collocation points, got {points.size}"
        )
    data, ii, jj = [], [], []
    for i, x in enumerate(points):
        span = _row_span(kv, i, x)
        first, vals = eval_basis(kv, x, span)
        data.append(vals)
        ii.append(np.full(vals.size, i))
        jj.append(np.arange(first, first + vals.size))
    mat = sp.coo_array(
        (np.concatenate(data), (np.concatenate(ii), np.concatenate(jj))),
        shape=(kv.n, kv.n),
    ).tocsr()
    return _pack_factor(mat)


def basis_value_matrix(kv: KnotVector, points, deriv: bool = False) -> sp.csr_array:
    """Sparse (len(points) x n) matrix of basis values (or first derivatives)."""
    points = np.asarray(points, dtype=float)
    data, ii, jj = [], [], []
    for i, x in enumerate(points):
        if deriv:
            first, _, vals = eval_basis_deriv(kv, x)
        else:
            first, vals = eval_basis(kv, x)
        data.append(vals)
        ii.append(np.full(vals.size, i))
        jj.append(np.arange(first, first + vals.size))
    return sp.coo_array(
        (np.concatenate(data), (np.concatenate(ii), np.concatenate(jj))),
        shape=(points.size, kv.n),
    ).tocsr()


@dataclass(frozen=True)
class BasisSpace:
    """Tensor-product B-spline (or NURBS, when weights are given) space.

    ``knotvectors`` lists directions 1..d; the flattened function index runs
    fastest over direction 1. ``weights`` is one positive weight per
    tensor-product function (flat, same ordering) or None for plain B-splines.
    """

    knotvectors: tuple[KnotVector, ...]
    weights: np.ndarray | None = None
    role: str = "trial"

    def __post_init__(self):
        object.__setattr__(self, "knotvectors", tuple(self.knotvectors))
        if not self.knotvectors:
            raise ValueError("need at least one knot vector")
        if self.role not in ("trial", "interpolation"):
            raise ValueError(f"unknown role {self.role!r}")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            object.__setattr__(self, "weights", w)
            if w.shape != (self.dim,):
                raise ValueError("need one weight per tensor-product function")
            if np.any(w <= 0):
                raise ValueError("rational weights must be strictly positive")

    @property
    def ndim(self) -> int:
        return len(self.knotvectors)

    @property
    def dims(self) -> tuple[int, ...]:
        """Per-direction dimensions, direction 1 first."""
        return tuple(kv.n for kv in self.knotvectors)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(kv.degree for kv in self.knotvectors)

    def greville(self) -> list[np.ndarray]:
        return [greville_abscissae(kv) for kv in self.knotvectors]


def tensor_grid(per_dir_points) -> np.ndarray:
    """Flatten a tensor grid of points to (npoints, d); direction 1 fastest."""
    arrays = [np.asarray(p, dtype=float) for p in per_dir_points]
    grids = np.meshgrid(*arrays[::-1], indexing="ij")
    return np.stack([g.ravel() for g in grids[::-1]], axis=-1)


def tensor_weights(per_dir_weights) -> np.ndarray:
    """Product weights on a tensor grid, flattened direction-1-fastest."""
    arrays = [np.asarray(w, dtype=float) for w in per_dir_weights]
    return reduce(np.kron, arrays[::-1])


def space_value_matrix(space: BasisSpace, per_dir_points) -> sp.csr_array:
    """Sparse (npoints x dim) matrix of tensor-product basis values on a grid.

    Applies the rational (NURBS) normalization when the space carries weights.
    """
    if len(per_dir_points) != space.ndim:
        raise ValueError("need one point set per direction")
    mats = [
        basis_value_matrix(kv, pts)
        for kv, pts in zip(space.knotvectors, per_dir_points)
    ]
    full = reduce(lambda a, b: sp.kron(a, b, format="csr"), mats[::-1])
    full = sp.csr_array(full)
    if space.weights is not None:
        wsum = full @ space.weights
        full = full.multiply(space.weights[None, :]).multiply(
            1.0 / wsum[:, None]
        )
        full = sp.csr_array(full)
    return full


def eval_space(space: BasisSpace, xhat):
    """Nonzero (NURBS) basis values at a single parametric point.

    Returns ``(flat_indices, values)`` with the direction-1-fastest indexing.
    """
    xhat = np.atleast_1d(np.asarray(xhat, dtype=float))
    if xhat.size != space.ndim:
        raise ValueError("point dimension does not match the space")
    locals_ = []
    for kv, x in zip(space.knotvectors, xhat):
        first, vals = eval_basis(kv, x)
        locals_.append((np.arange(first, first + vals.size), vals))
    idx, vals = locals_[-1]
    for k in range(space.ndim - 2, -1, -1):
        li, lv = locals_[k]
        idx = (idx[:, None] * space.dims[k] + li[None, :]).ravel()
        vals = (vals[:, None] * lv[None, :]).ravel()
    if space.weights is not None:
        w = space.weights[idx]
        vals = w * vals
        vals = vals / vals.sum()
    return idx, vals
