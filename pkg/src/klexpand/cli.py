"""Config-driven benchmark runner: setup, eigensolve, CSV reports.

``klexpand run <config>`` executes one case; ``klexpand sweep <dir>`` runs
every ``*.cfg`` in a directory sequentially and writes a summary table.
Exit codes: 0 ok, 2 config error, 3 partial eigensolver convergence.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import collocation as colloc_mod
from . import galerkin as gal_mod
from . import geometry as geo_mod
from . import kl, reference
from .bspline import BasisSpace, open_knot_vector, univariate_collocation
from .config import BenchmarkConfig, ConfigError, parse_config_file
from .eigen import PartialConvergenceError, solve_nonsymmetric, solve_symmetric
from .kernel import CovarianceKernel

MATVEC_WARMUPS = 3
MATVEC_TIMED = 20


@dataclass
class RunReport:
    """Resolved sizes, timings, spectrum and (optional) errors of one run."""

    case: str
    method: str
    n: int
    ntilde: int | None
    degree: int
    h: float
    setup_seconds: float
    matvec_mean_seconds: float | None
    eigensolve_seconds: float
    n_iter: int
    eigenvalues: np.ndarray
    residuals: np.ndarray
    complex_flagged: np.ndarray
    converged: np.ndarray
    eps: np.ndarray | None = None
    mean_rel_error: float | None = None
    partial: bool = False


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def build_geometry(cfg: BenchmarkConfig) -> geo_mod.GeometryMap:
    g = cfg.geometry
    if g.kind == "unit-interval":
        return geo_mod.unit_interval()
    if g.kind == "unit-square":
        return geo_mod.unit_square()
    if g.kind == "unit-cube":
        return geo_mod.unit_cube()
    if g.kind == "box":
        return geo_mod.unit_box(g.extents)
    return geo_mod.half_cylinder(g.inner_r, g.outer_r, g.length)


def _trial_knots(cfg: BenchmarkConfig, geometry: geo_mod.GeometryMap):
    """Trial knot vectors: uniform mesh, C^{p-1} except C^0 on geometry kinks."""
    kvs = []
    for k, elems in enumerate(cfg.elements):
        overrides = {
            bp: cfg.degree
            for (direction, bp) in geometry.c0_lines
            if direction == k + 1
        }
        breaks = np.linspace(0.0, 1.0, elems + 1)
        kvs.append(open_knot_vector(cfg.degree, breaks, 1, overrides))
    return tuple(kvs)


def _geometry_weights_for(space_kvs, geometry: geo_mod.GeometryMap):
    """Per-direction NURBS weights of the trial space reproducing the geometry
    weight function (Greville interpolation; exact when representable)."""
    if geometry.per_dir_weights is None:
        return None
    from .bspline import basis_value_matrix, greville_abscissae

    per_dir = []
    nontrivial = False
    for kv, geo_kv, geo_w in zip(
        space_kvs, geometry.space.knotvectors, geometry.per_dir_weights
    ):
        if np.allclose(geo_w, geo_w[0]):
            per_dir.append(np.full(kv.n, geo_w[0]))
            continue
        nontrivial = True
        grev = greville_abscissae(kv)
        target = basis_value_matrix(geo_kv, grev) @ geo_w
        coll = univariate_collocation(kv, grev)
        if hasattr(coll, "toarray"):
            coll = coll.toarray()
        per_dir.append(np.linalg.solve(coll, target))
    if not nontrivial:
        return None
    from .bspline import tensor_weights

    return tensor_weights(per_dir)


def build_trial_space(cfg: BenchmarkConfig, geometry, rational: bool) -> BasisSpace:
    kvs = _trial_knots(cfg, geometry)
    weights = _geometry_weights_for(kvs, geometry) if rational else None
    return BasisSpace(kvs, weights=weights)


def build_interpolation_space(cfg: BenchmarkConfig, trial, geometry) -> BasisSpace:
    continuity = cfg.interp_continuity
    if continuity == "auto":
        continuity = "c0" if cfg.kernel.kind == "exponential" else "cpm1"
    return gal_mod.interpolation_space(trial, continuity, geometry.c0_lines)


def mesh_size(geometry, trial) -> float:
    """Max physical element diameter, measured over mapped element corners."""
    breaks = [kv.breakpoints for kv in trial.knotvectors]
    corners = geometry.map_grid(breaks)
    shape = tuple(len(b) for b in breaks[::-1])
    grid = corners.reshape(shape + (geometry.phys_dim,))
    h = 0.0
    d = len(breaks)
    counts = [len(b) - 1 for b in breaks]
    for idx in np.ndindex(*counts[::-1]):
        pts = []
        for offset in np.ndindex(*([2] * d)):
            pos = tuple(i + o for i, o in zip(idx, offset))
            pts.append(grid[pos])
        pts = np.array(pts)
        diff = pts[:, None, :] - pts[None, :, :]
        h = max(h, float(np.sqrt((diff * diff).sum(-1)).max()))
    return h


def _load_reference(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "eigenvalue" not in rows[0]:
        raise ConfigError(f"reference_eigenvalues: no eigenvalue column in {path}")
    return np.array([float(r["eigenvalue"]) for r in rows])


def run(cfg: BenchmarkConfig, out_dir=None) -> RunReport:
    """Execute one benchmark case and write its CSV reports."""
    threads = cfg.resolved_threads()
    geometry = build_geometry(cfg)
    kernel = CovarianceKernel(
        cfg.kernel.kind, cfg.kernel.variance, cfg.kernel.correlation_length
    )
    out_dir = cfg.output_dir if out_dir is None else out_dir
    os.makedirs(out_dir, exist_ok=True)

    setup = None
    matvec_mean = None
    ntilde = None
    eval_fn = None
    partial = False

    t0 = time.perf_counter()
    if cfg.method == "galerkin-ibq":
        trial = build_trial_space(cfg, geometry, rational=False)
        interp = build_interpolation_space(cfg, trial, geometry)
        setup = gal_mod.build_galerkin(trial, interp, geometry, kernel, threads=threads)
        apply = lambda v: gal_mod.apply_galerkin(setup, v)
        n = setup.n_trial
        ntilde = setup.n_interp
        setup_seconds = time.perf_counter() - t0
        matvec_mean = _time_matvec(apply, n)
        solver = lambda: solve_symmetric(
            apply,
            n,
            cfg.eigen.num_pairs,
            tol=cfg.eigen.tol,
            max_iter=cfg.eigen.max_iter,
            seed=cfg.eigen.seed,
        )
    elif cfg.method == "collocation":
        trial = build_trial_space(cfg, geometry, rational=not cfg.bspline_z)
        setup = colloc_mod.build_collocation(
            trial,
            geometry,
            kernel,
            nq_per_dir=cfg.nq_per_dir,
            bspline_z=cfg.bspline_z,
            threads=threads,
        )
        apply = lambda v: colloc_mod.apply_collocation(setup, v)
        n = setup.n
        setup_seconds = time.perf_counter() - t0
        matvec_mean = _time_matvec(apply, n)
        solver = lambda: solve_nonsymmetric(
            apply,
            n,
            cfg.eigen.num_pairs,
            tol=cfg.eigen.tol,
            max_iter=cfg.eigen.max_iter,
            seed=cfg.eigen.seed,
        )
    else:
        trial = build_trial_space(
            cfg, geometry, rational=cfg.method == "reference-collocation"
        )
        if cfg.method == "reference-galerkin":
            system = reference.assemble_galerkin_dense(
                trial, geometry, kernel, cfg.nq_per_dir
            )
        else:
            system = reference.assemble_collocation_dense(
                trial, geometry, kernel, cfg.nq_per_dir
            )
        n = trial.dim
        setup_seconds = time.perf_counter() - t0
        solver = lambda: reference.solve_dense_generalized(
            system, min(cfg.eigen.num_pairs, n)
        )

    try:
        result = solver()
    except PartialConvergenceError as exc:
        result = exc.result
        partial = True

    if cfg.method == "galerkin-ibq":
        coeff_of = lambda k: gal_mod.back_transform(setup, result.vectors[:, k].real)
        eval_fn = lambda c, x: gal_mod.eval_eigenfunction(setup, c, x)
    elif cfg.method == "collocation":
        coeff_of = lambda k: colloc_mod.l2_normalize(setup, result.vectors[:, k].real)
        eval_fn = lambda c, x: colloc_mod.eval_eigenfunction(setup, c, x)

    lam_real = result.eigenvalues.real.astype(float)
    eps = None
    mean_err = None
    if cfg.reference_eigenvalues:
        ref = _load_reference(cfg.reference_eigenvalues)
        mlim = min(ref.size, lam_real.size)
        eps = np.array(
            [kl.relative_error(ref[i], lam_real[i]) for i in range(mlim)]
        )
        mean_err = kl.mean_relative_error(ref, lam_real, mlim)

    report = RunReport(
        case=cfg.case,
        method=cfg.method,
        n=n,
        ntilde=ntilde,
        degree=cfg.degree,
        h=mesh_size(geometry, trial),
        setup_seconds=setup_seconds,
        matvec_mean_seconds=matvec_mean,
        eigensolve_seconds=result.solve_seconds,
        n_iter=result.n_iter,
        eigenvalues=lam_real,
        residuals=result.residual_norms,
        complex_flagged=result.complex_flagged,
        converged=result.converged,
        eps=eps,
        mean_rel_error=mean_err,
        partial=partial,
    )
    _write_eigenvalues(os.path.join(out_dir, "eigenvalues.csv"), report)
    _write_timings(os.path.join(out_dir, "timings.csv"), report)
    if eps is not None:
        _write_errors(os.path.join(out_dir, "errors.csv"), report)
    if cfg.line_modes > 0 and eval_fn is not None:
        direction = cfg.line_direction
        if direction is None:
            direction = 2 if cfg.geometry.kind == "half-cylinder" else 1
        coords, pts = kl.parametric_line(
            direction, geometry.ndim, cfg.line_points
        )
        modes = np.zeros((cfg.line_points, min(cfg.line_modes, result.m)))
        for k in range(modes.shape[1]):
            coeffs = kl.fix_sign(coeff_of(k))
            modes[:, k] = [eval_fn(coeffs, x) for x in pts]
        kl.write_line_samples(os.path.join(out_dir, "modes_line.csv"), coords, modes)
    return report


def _time_matvec(apply, n) -> float:
    rng = np.random.default_rng(0)
    v = rng.standard_normal(n)
    for _ in range(MATVEC_WARMUPS):
        apply(v)
    t0 = time.perf_counter()
    for _ in range(MATVEC_TIMED):
        apply(v)
    return (time.perf_counter() - t0) / MATVEC_TIMED


def _write_eigenvalues(path, report: RunReport):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "eigenvalue", "residual_norm", "complex_flagged"])
        for i, (lam, res, flag) in enumerate(
            zip(report.eigenvalues, report.residuals, report.complex_flagged), start=1
        ):
            writer.writerow([i, _fmt(lam), _fmt(res), _fmt(bool(flag))])


def _write_timings(path, report: RunReport):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            [
                "n",
                "ntilde",
                "setup_seconds",
                "matvec_mean_seconds",
                "eigensolve_seconds",
                "n_iter",
            ]
        )
        writer.writerow(
            [
                report.n,
                _fmt(report.ntilde),
                _fmt(report.setup_seconds),
                _fmt(report.matvec_mean_seconds),
                _fmt(report.eigensolve_seconds),
                report.n_iter,
            ]
        )


def _write_errors(path, report: RunReport):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "relative_error"])
        for i, e in enumerate(report.eps, start=1):
            writer.writerow([i, _fmt(e)])


SUMMARY_COLUMNS = [
    "case",
    "method",
    "N",
    "Ntilde",
    "p",
    "h",
    "eigensolve_seconds",
    "matvec_mean_seconds",
    "mean_rel_error",
]


def sweep(configs, out_dir="sweep-out"):
    """Run a list of configs sequentially; write one summary row per case."""
    os.makedirs(out_dir, exist_ok=True)
    reports = []
    failures = 0
    partials = 0
    rows = []
    for cfg in configs:
        case_dir = os.path.join(out_dir, cfg.case)
        try:
            report = run(cfg, out_dir=case_dir)
            reports.append(report)
            if report.partial:
                partials += 1
            rows.append(
                [
                    report.case,
                    report.method,
                    report.n,
                    _fmt(report.ntilde),
                    report.degree,
                    _fmt(report.h),
                    _fmt(report.eigensolve_seconds),
                    _fmt(report.matvec_mean_seconds),
                    _fmt(report.mean_rel_error),
                ]
            )
        except Exception as exc:  # record the failure, keep sweeping
            failures += 1
            reports.append(None)
            rows.append([cfg.case, cfg.method, "", "", cfg.degree, "", "", "", ""])
            print(f"[klexpand] case {cfg.case} failed: {exc}", file=sys.stderr)
    with open(os.path.join(out_dir, "summary.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        writer.writerows(rows)
    return reports, failures, partials


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="klexpand",
        description="Benchmark truncated Karhunen-Loeve eigensolvers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a single configuration file")
    p_run.add_argument("config", help="path to a key=value configuration file")
    p_sweep = sub.add_parser("sweep", help="run every *.cfg in a directory")
    p_sweep.add_argument("directory", help="directory containing *.cfg files")
    p_sweep.add_argument("--output", default=None, help="summary output directory")
    args = parser.parse_args(argv)

    if args.command == "run":
        try:
            cfg = parse_config_file(args.config)
        except (ConfigError, OSError) as exc:
            print(f"[klexpand] config error: {exc}", file=sys.stderr)
            return 2
        try:
            report = run(cfg)
        except ConfigError as exc:
            print(f"[klexpand] config error: {exc}", file=sys.stderr)
            return 2
        print(
            f"[klexpand] {report.case}: N={report.n} "
            f"eigensolve={report.eigensolve_seconds:.3g}s n_iter={report.n_iter}"
        )
        return 3 if report.partial else 0

    cfg_paths = sorted(
        os.path.join(args.directory, f)
        for f in os.listdir(args.directory)
        if f.endswith(".cfg")
    )
    if not cfg_paths:
        print(f"[klexpand] no *.cfg files in {args.directory}", file=sys.stderr)
        return 2
    configs = []
    for path in cfg_paths:
        try:
            configs.append(parse_config_file(path))
        except ConfigError as exc:
            print(f"[klexpand] config error in {path}: {exc}", file=sys.stderr)
            return 2
    out_dir = args.output or os.path.join(args.directory, "sweep-out")
    _, failures, partials = sweep(configs, out_dir)
    if failures:
        return 2
    if partials:
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
