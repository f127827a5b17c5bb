"""Covariance kernels with pointwise, row-wise, and streamed matvec evaluation.

The kernel Gram matrix is the only quadratically-sized object in either
matrix-free method; :func:`apply_gamma` therefore evaluates it one block of
rows at a time and never materializes the full matrix. Distances are always
measured in physical coordinates.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

KERNEL_KINDS = ("exponential", "gaussian", "constant")

#: row-block buffer cap for apply_gamma; keeps the working set at O(sources)
_BLOCK_BYTES = 1 << 18


@dataclass(frozen=True)
class CovarianceKernel:
    """Isotropic covariance kernel.

    exponential: variance * exp(-|x - y| / correlation_length)
    gaussian:    variance * exp(-|x - y|^2 / correlation_length^2)
    constant:    variance everywhere (rank-one integral operator; used by
                 the sanity checks)
    """

    kind: str
    variance: float = 1.0
    correlation_length: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"kernel kind must be one of {KERNEL_KINDS}")
        if self.variance <= 0:
            raise ValueError("variance must be positive")
        if self.correlation_length <= 0:
            raise ValueError("correlation length must be positive")

    def eval(self, x, y) -> float:
        """Kernel value for a single pair of points."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if x.shape != y.shape:
            raise ValueError("points must have the same dimension")
        if self.kind == "constant":
            return self.variance
        d = x - y
        dist2 = (d * d).sum()
        if self.kind == "exponential":
            return float(
                self.variance * np.exp(-np.sqrt(dist2) / self.correlation_length)
            )
        return float(self.variance * np.exp(-dist2 / self.correlation_length**2))

    def row(self, x, targets) -> np.ndarray:
        """One kernel row: values against every target point."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        targets = np.atleast_2d(np.asarray(targets, dtype=float))
        if targets.shape[0] == 0:
            raise ValueError("need at least one target point")
        if targets.shape[1] != x.size:
            raise ValueError("targets and point must have the same dimension")
        if self.kind == "constant":
            return np.full(targets.shape[0], self.variance)
        d = targets - x[None, :]
        dist2 = (d * d).sum(axis=1)
        if self.kind == "exponential":
            return self.variance * np.exp(-np.sqrt(dist2) / self.correlation_length)
        return self.variance * np.exp(-dist2 / self.correlation_length**2)


def _kernelize_blocks(kernel, tgt, t_sq, src, s_sq, v, out, block_rows, block_ids):
    b = kernel.correlation_length
    nt = tgt.shape[0]
    if kernel.kind == "constant":
        total = kernel.variance * v.sum()
        for bi in block_ids:
            lo = bi * block_rows
            out[lo : min(lo + block_rows, nt)] = total
        return
    for bi in block_ids:
        lo = bi * block_rows
        hi = min(lo + block_rows, nt)
        g = tgt[lo:hi] @ src.T
        g *= -2.0
        g += s_sq[None, :]
        g += t_sq[lo:hi, None]
        np.maximum(g, 0.0, out=g)
        if kernel.kind == "exponential":
            # the norm expansion cancels catastrophically near coincident
            # points and the sqrt amplifies it; recompute those entries
            rows, cols = np.nonzero(
                g <= 1e-10 * (t_sq[lo:hi, None] + s_sq[None, :] + 1.0)
            )
            for r, c in zip(rows, cols):
                d = tgt[lo + r] - src[c]
                g[r, c] = (d * d).sum()
            np.sqrt(g, out=g)
            g *= -1.0 / b
        else:
            g *= -1.0 / (b * b)
        np.exp(g, out=g)
        g *= kernel.variance
        out[lo:hi] = g @ v


def apply_gamma(kernel: CovarianceKernel, sources, targets, v, threads=1) -> np.ndarray:
    """out[l] = sum_k kernel(targets[l], sources[k]) * v[k], row blocks on the fly.

    The block partition is a function of the problem size only, so the result
    is bitwise identical for any worker count. Working memory is one row
    block plus the cached point norms, O(len(sources) + len(targets)).
    """
    src = np.atleast_2d(np.ascontiguousarray(sources, dtype=float))
    tgt = np.atleast_2d(np.ascontiguousarray(targets, dtype=float))
    v = np.asarray(v, dtype=float)
    if src.shape[1] != tgt.shape[1]:
        raise ValueError("sources and targets must have the same dimension")
    if v.shape != (src.shape[0],):
        raise ValueError(
            f"coefficient vector has length {v.size}, expected {src.shape[0]}"
        )
    ns, nt = src.shape[0], tgt.shape[0]
    s_sq = np.einsum("ij,ij->i", src, src)
    t_sq = s_sq if tgt is src else np.einsum("ij,ij->i", tgt, tgt)
    out = np.empty(nt)
    block_rows = max(1, _BLOCK_BYTES // (8 * ns))
    nblocks = -(-nt // block_rows)
    if threads <= 1 or nblocks == 1:
        _kernelize_blocks(kernel, tgt, t_sq, src, s_sq, v, out, block_rows, range(nblocks))
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(
                pool.map(
                    lambda ids: _kernelize_blocks(
                        kernel, tgt, t_sq, src, s_sq, v, out, block_rows, ids
                    ),
                    [range(i, nblocks, threads) for i in range(threads)],
                )
            )
    return out
