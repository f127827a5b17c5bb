"""Iterative extraction of dominant eigenpairs from a matvec-only operator.

Symmetric path: Lanczos with full reorthogonalization and thick restart.
Non-symmetric path: explicitly restarted Arnoldi with orthogonal deflation of
converged vectors. Both count operator applications (the dominant cost) and
record true residual norms computed from stored operator images.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

#: Ritz values whose imaginary part exceeds this fraction of the real part
#: are reported as complex and flagged
COMPLEX_FLAG_RATIO = 1e-8

_BREAKDOWN = 1e-12


class OperatorContractError(RuntimeError):
    """The supplied matvec violates its contract (e.g. is not symmetric)."""


class PartialConvergenceError(RuntimeError):
    """Raised when max_iter runs out; carries the partial result."""

    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


@dataclass
class EigenResult:
    """Ordered eigenvalues, standard-form eigenvectors, and solve statistics."""

    eigenvalues: np.ndarray
    vectors: np.ndarray
    residual_norms: np.ndarray
    n_iter: int
    solve_seconds: float
    complex_flagged: np.ndarray = field(default=None)
    converged: np.ndarray = field(default=None)
    coefficients: np.ndarray = field(default=None)

    def __post_init__(self):
        m = len(self.eigenvalues)
        if self.complex_flagged is None:
            self.complex_flagged = np.zeros(m, dtype=bool)
        if self.converged is None:
            self.converged = np.ones(m, dtype=bool)

    @property
    def m(self) -> int:
        return len(self.eigenvalues)


def _default_ncv(n: int, m: int) -> int:
    return min(n, max(2 * m + 10, 40))


def _start_vector(rng, n):
    q = rng.random(n)
    return q / np.linalg.norm(q)


def _orthogonalize(w, basis_list):
    """Two-pass classical Gram-Schmidt against the column blocks in basis_list."""
    for _ in range(2):
        for block in basis_list:
            if block.shape[1]:
                w = w - block @ (block.T @ w)
    return w


def _check_symmetry(apply, n, rng):
    for _ in range(2):
        u = rng.standard_normal(n)
        w = rng.standard_normal(n)
        au = np.asarray(apply(u))
        aw = np.asarray(apply(w))
        left = float(au @ w)
        right = float(u @ aw)
        scale = max(abs(left), abs(right), np.linalg.norm(au) * np.linalg.norm(w), 1e-300)
        if abs(left - right) > 1e-8 * scale:
            raise OperatorContractError(
                f"operator is not symmetric: <Au,v>={left:.6e} vs <u,Av>={right:.6e}"
            )


def solve_symmetric(
    apply,
    n: int,
    m: int,
    tol: float = 1e-8,
    max_iter: int = 10000,
    seed: int = 1234,
    ncv: int | None = None,
    check_symmetry: bool = True,
) -> EigenResult:
    """Largest-m eigenpairs of a symmetric operator given only its matvec.

    Thick-restart Lanczos with full (two-pass) reorthogonalization. Residuals
    are true norms ||A v - theta v|| computed from stored operator images;
    convergence is relative to the current largest Ritz value. Raises
    :class:`PartialConvergenceError` carrying the best available pairs if
    ``max_iter`` matvecs are exhausted.
    """
    if not 1 <= m <= n:
        raise ValueError(f"requested {m} pairs from an operator of size {n}")
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    if check_symmetry and n > 1:
        _check_symmetry(apply, n, rng)
    ncv = _default_ncv(n, m) if ncv is None else min(n, max(ncv, m + 1))
    q_basis = np.zeros((n, ncv + 1))
    images = np.zeros((n, ncv))
    proj = np.zeros((ncv + 1, ncv + 1))
    q_basis[:, 0] = _start_vector(rng, n)
    j = 0
    niter = 0
    while True:
        while j < ncv and niter < max_iter:
            w = np.asarray(apply(q_basis[:, j]), dtype=float)
            niter += 1
            images[:, j] = w
            h = q_basis[:, : j + 1].T @ w
            w = w - q_basis[:, : j + 1] @ h
            h2 = q_basis[:, : j + 1].T @ w
            w = w - q_basis[:, : j + 1] @ h2
            h += h2
            proj[: j + 1, j] = h
            proj[j, : j + 1] = h
            beta = np.linalg.norm(w)
            scale = max(np.abs(np.diag(proj[: j + 1, : j + 1])).max(), 1.0)
            if beta > _BREAKDOWN * scale:
                q_basis[:, j + 1] = w / beta
                proj[j + 1, j] = proj[j, j + 1] = beta
            else:
                # invariant subspace: continue in a random orthogonal direction
                fresh = rng.standard_normal(n)
                fresh = _orthogonalize(fresh, [q_basis[:, : j + 1]])
                nb = np.linalg.norm(fresh)
                if nb < 1e-10:
                    j += 1
                    break
                q_basis[:, j + 1] = fresh / nb
                proj[j + 1, j] = proj[j, j + 1] = 0.0
            j += 1
        jb = j
        theta, s_mat = np.linalg.eigh(proj[:jb, :jb])
        order = np.argsort(theta)[::-1]
        mm = min(m, jb)
        sel = order[:mm]
        ritz = q_basis[:, :jb] @ s_mat[:, sel]
        ritz_images = images[:, :jb] @ s_mat[:, sel]
        residuals = np.linalg.norm(ritz_images - ritz * theta[sel][None, :], axis=0)
        scale = max(np.abs(theta).max(), 1e-300)
        conv = residuals <= tol * scale
        done = bool(conv.all()) and mm == m
        if done or niter >= max_iter:
            result = EigenResult(
                eigenvalues=theta[sel].copy(),
                vectors=ritz,
                residual_norms=residuals,
                n_iter=niter,
                solve_seconds=time.perf_counter() - t0,
                converged=conv,
            )
            if not done:
                raise PartialConvergenceError(
                    f"{int(conv.sum())}/{m} pairs converged in {niter} matvecs",
                    result,
                )
            return result
        # thick restart: keep the leading Ritz vectors plus the next Lanczos vector
        keep = min(jb - 1, m + 10)
        ksel = order[:keep]
        kept = q_basis[:, :jb] @ s_mat[:, ksel]
        kept_images = images[:, :jb] @ s_mat[:, ksel]
        nextq = q_basis[:, jb].copy()
        q_basis[:, :keep] = kept
        images[:, :keep] = kept_images
        q_basis[:, keep] = nextq
        proj[:] = 0.0
        proj[:keep, :keep] = np.diag(theta[ksel])
        j = keep


def _phase_fix(vec: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(vec)))
    pivot = vec[k]
    if pivot == 0:
        return vec
    return vec * (np.conj(pivot) / abs(pivot))


def solve_nonsymmetric(
    apply,
    n: int,
    m: int,
    tol: float = 1e-8,
    max_iter: int = 10000,
    seed: int = 1234,
    ncv: int | None = None,
) -> EigenResult:
    """Ritz pairs with largest real part from a general real operator.

    Explicitly restarted Arnoldi: converged Ritz vectors are locked into an
    orthogonal deflation basis and each restart targets the first unconverged
    pair. Complex-pair Ritz values are kept as conjugate pairs and flagged
    when their imaginary part is significant.
    """
    if not 1 <= m <= n:
        raise ValueError(f"requested {m} pairs from an operator of size {n}")
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    ncv = _default_ncv(n, m) if ncv is None else min(n, max(ncv, m + 1))
    locked_vals: list[complex] = []
    locked_vecs: list[np.ndarray] = []
    locked_res: list[float] = []
    deflate = np.zeros((n, 0))
    niter = 0
    start = _start_vector(rng, n)
    best_pending = None
    while len(locked_vals) < m and niter < max_iter:
        k_active = min(ncv, n - deflate.shape[1])
        if k_active < 1:
            break
        q_basis = np.zeros((n, k_active + 1))
        images = np.zeros((n, k_active))
        hess = np.zeros((k_active + 1, k_active))
        q = _orthogonalize(start, [deflate])
        nq = np.linalg.norm(q)
        if nq < 1e-10:
            q = _orthogonalize(rng.standard_normal(n), [deflate])
            nq = np.linalg.norm(q)
        q_basis[:, 0] = q / nq
        jb = 0
        for j in range(k_active):
            w = np.asarray(apply(q_basis[:, j]), dtype=float)
            niter += 1
            images[:, j] = w
            if deflate.shape[1]:
                w = w - deflate @ (deflate.T @ w)
            h = q_basis[:, : j + 1].T @ w
            w = w - q_basis[:, : j + 1] @ h
            if deflate.shape[1]:
                w = w - deflate @ (deflate.T @ w)
            h2 = q_basis[:, : j + 1].T @ w
            w = w - q_basis[:, : j + 1] @ h2
            h += h2
            hess[: j + 1, j] = h
            beta = np.linalg.norm(w)
            jb = j + 1
            scale = max(np.abs(hess[: j + 1, : j + 1]).max(), 1.0)
            if beta > _BREAKDOWN * scale:
                hess[j + 1, j] = beta
                q_basis[:, j + 1] = w / beta
            else:
                fresh = _orthogonalize(rng.standard_normal(n), [deflate, q_basis[:, : j + 1]])
                nb = np.linalg.norm(fresh)
                if nb < 1e-10:
                    break
                q_basis[:, j + 1] = fresh / nb
                hess[j + 1, j] = 0.0
            if niter >= max_iter:
                break
        theta, s_mat = np.linalg.eig(hess[:jb, :jb])
        order = np.argsort(-theta.real)
        ritz = q_basis[:, :jb] @ s_mat
        ritz_images = images[:, :jb] @ s_mat
        res_all = np.linalg.norm(ritz_images - ritz * theta[None, :], axis=0)
        norms = np.linalg.norm(ritz, axis=0)
        norms[norms == 0] = 1.0
        res_all = res_all / norms
        locked_scale = max([abs(v) for v in locked_vals], default=0.0)
        scale = max(np.abs(theta).max(initial=0.0), locked_scale, 1e-300)
        restart_vec = None
        best_pending = []
        seen_conjugates = set()
        for idx in order:
            if len(locked_vals) >= m:
                break
            lam = theta[idx]
            if idx in seen_conjugates:
                continue
            vec = _phase_fix(ritz[:, idx] / norms[idx])
            converged = res_all[idx] <= tol * scale
            is_complex = abs(lam.imag) > COMPLEX_FLAG_RATIO * max(abs(lam.real), 1e-300)
            if converged:
                if is_complex:
                    # conjugate pair: lock the 2D real invariant subspace
                    mate = int(np.argmin(np.abs(theta - np.conj(lam))))
                    seen_conjugates.add(mate)
                    locked_vals.extend([lam, np.conj(lam)])
                    locked_vecs.extend([vec, np.conj(vec)])
                    locked_res.extend([res_all[idx], res_all[idx]])
                    for part in (vec.real, vec.imag):
                        u = _orthogonalize(part.copy(), [deflate])
                        nu = np.linalg.norm(u)
                        if nu > 1e-10:
                            deflate = np.column_stack([deflate, u / nu])
                else:
                    locked_vals.append(lam)
                    locked_vecs.append(vec)
                    locked_res.append(res_all[idx])
                    u = _orthogonalize(vec.real.copy(), [deflate])
                    nu = np.linalg.norm(u)
                    if nu > 1e-10:
                        deflate = np.column_stack([deflate, u / nu])
            else:
                if restart_vec is None:
                    restart_vec = vec.real.copy()
                    if np.linalg.norm(restart_vec) < 1e-10:
                        restart_vec = vec.imag.copy()
                best_pending.append((lam, vec, res_all[idx]))
        if restart_vec is None:
            restart_vec = rng.standard_normal(n)
        start = restart_vec
    solve_seconds = time.perf_counter() - t0
    pairs = [(v, x, r, True) for v, x, r in zip(locked_vals, locked_vecs, locked_res)]
    if len(pairs) < m and best_pending:
        for lam, vec, res in best_pending:
            if len(pairs) >= m:
                break
            pairs.append((lam, vec, res, False))
    pairs.sort(key=lambda t: -t[0].real)
    pairs = pairs[:m]
    vals = np.array([p[0] for p in pairs], dtype=complex)
    vecs = (
        np.column_stack([p[1] for p in pairs])
        if pairs
        else np.zeros((n, 0), dtype=complex)
    )
    residuals = np.array([p[2] for p in pairs], dtype=float)
    conv = np.array([p[3] for p in pairs], dtype=bool)
    flags = np.abs(vals.imag) > COMPLEX_FLAG_RATIO * np.maximum(np.abs(vals.real), 1e-300)
    if not flags.any():
        vals = vals.real
        vecs = vecs.real
    result = EigenResult(
        eigenvalues=vals,
        vectors=vecs,
        residual_norms=residuals,
        n_iter=niter,
        solve_seconds=solve_seconds,
        complex_flagged=flags,
        converged=conv,
    )
    if not (conv.all() and len(pairs) == m):
        raise PartialConvergenceError(
            f"{int(conv.sum())}/{m} pairs converged in {niter} matvecs", result
        )
    return result
