"""Benchmark configuration: a flat key-value text format with dotted keys.

Grammar: one ``key = value`` pair per line, ``#`` starts a comment, blank
lines and ordering are free. Unknown keys are rejected with field-level
messages so typos fail fast.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

METHODS = (
    "galerkin-ibq",
    "collocation",
    "reference-galerkin",
    "reference-collocation",
)
GEOMETRIES = ("unit-interval", "unit-square", "unit-cube", "box", "half-cylinder")


class ConfigError(ValueError):
    """A configuration file failed validation; message names the field."""


@dataclass
class KernelConfig:
    kind: str = "exponential"
    variance: float = 1.0
    correlation_length: float = 1.0


@dataclass
class GeometryConfig:
    kind: str = "unit-interval"
    extents: tuple = ()
    inner_r: float = 1.0
    outer_r: float = 2.0
    length: float = 10.0

    @property
    def ndim(self) -> int:
        if self.kind == "unit-interval":
            return 1
        if self.kind == "unit-square":
            return 2
        if self.kind in ("unit-cube", "half-cylinder"):
            return 3
        return len(self.extents)


@dataclass
class EigenConfig:
    num_pairs: int = 20
    tol: float = 1e-8
    max_iter: int = 10000
    seed: int = 1234


@dataclass
class BenchmarkConfig:
    method: str = "galerkin-ibq"
    kernel: KernelConfig = field(default_factory=KernelConfig)
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    degree: int = 2
    elements: tuple = (8,)
    eigen: EigenConfig = field(default_factory=EigenConfig)
    interp_continuity: str = "auto"
    nq_per_dir: int | None = None
    bspline_z: bool = False
    threads: int | None = None
    output_dir: str = "out"
    reference_eigenvalues: str | None = None
    line_modes: int = 0
    line_direction: int | None = None
    line_points: int = 201
    case: str = "run"

    def resolved_threads(self) -> int:
        env = os.environ.get("KLEXPAND_THREADS")
        if env is not None:
            try:
                return max(1, int(env))
            except ValueError as exc:
                raise ConfigError(f"KLEXPAND_THREADS: not an integer: {env!r}") from exc
        if self.threads is not None:
            return self.threads
        return os.cpu_count() or 1


def _parse_scalar(key, raw, kind):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is bool:
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind.__name__}") from exc


def _parse_tuple(key, raw, kind):
    try:
        return tuple(kind(part.strip()) for part in raw.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind.__name__} list") from exc


def parse_config_text(text: str, case: str = "run") -> BenchmarkConfig:
    """Parse and validate one configuration."""
    cfg = BenchmarkConfig(case=case)
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key in seen:
            raise ConfigError(f"{key}: duplicate key")
        seen.add(key)
        if key == "method":
            cfg.method = raw
        elif key == "case":
            cfg.case = raw
        elif key == "kernel.kind":
            cfg.kernel.kind = raw
        elif key == "kernel.variance":
            cfg.kernel.variance = _parse_scalar(key, raw, float)
        elif key == "kernel.correlation_length":
            cfg.kernel.correlation_length = _parse_scalar(key, raw, float)
        elif key == "geometry":
            cfg.geometry.kind = raw
        elif key == "geometry.extents":
            cfg.geometry.extents = _parse_tuple(key, raw, float)
        elif key == "geometry.inner_r":
            cfg.geometry.inner_r = _parse_scalar(key, raw, float)
        elif key == "geometry.outer_r":
            cfg.geometry.outer_r = _parse_scalar(key, raw, float)
        elif key == "geometry.length":
            cfg.geometry.length = _parse_scalar(key, raw, float)
        elif key == "degree":
            cfg.degree = _parse_scalar(key, raw, int)
        elif key == "elements":
            cfg.elements = _parse_tuple(key, raw, int)
        elif key == "eigen.num_pairs":
            cfg.eigen.num_pairs = _parse_scalar(key, raw, int)
        elif key == "eigen.tol":
            cfg.eigen.tol = _parse_scalar(key, raw, float)
        elif key == "eigen.max_iter":
            cfg.eigen.max_iter = _parse_scalar(key, raw, int)
        elif key == "eigen.seed":
            cfg.eigen.seed = _parse_scalar(key, raw, int)
        elif key == "galerkin.interp_continuity":
            cfg.interp_continuity = raw
        elif key == "collocation.nq_per_dir":
            cfg.nq_per_dir = _parse_scalar(key, raw, int)
        elif key == "collocation.bspline_z":
            cfg.bspline_z = _parse_scalar(key, raw, bool)
        elif key == "threads":
            cfg.threads = _parse_scalar(key, raw, int)
        elif key == "output_dir":
            cfg.output_dir = raw
        elif key == "reference_eigenvalues":
            cfg.reference_eigenvalues = raw
        elif key == "line_modes":
            cfg.line_modes = _parse_scalar(key, raw, int)
        elif key == "line_direction":
            cfg.line_direction = _parse_scalar(key, raw, int)
        elif key == "line_points":
            cfg.line_points = _parse_scalar(key, raw, int)
        else:
            raise ConfigError(f"{key}: unknown configuration key")
    _validate(cfg)
    return cfg


def parse_config_file(path) -> BenchmarkConfig:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    stem = os.path.splitext(os.path.basename(str(path)))[0]
    return parse_config_text(text, case=stem)


def _validate(cfg: BenchmarkConfig):
    if cfg.method not in METHODS:
        raise ConfigError(f"method: must be one of {METHODS}, got {cfg.method!r}")
    if cfg.kernel.kind not in ("exponential", "gaussian"):
        raise ConfigError(f"kernel.kind: must be exponential or gaussian, got {cfg.kernel.kind!r}")
    if cfg.kernel.variance <= 0:
        raise ConfigError("kernel.variance: must be positive")
    if cfg.kernel.correlation_length <= 0:
        raise ConfigError("kernel.correlation_length: must be positive")
    if cfg.geometry.kind not in GEOMETRIES:
        raise ConfigError(f"geometry: must be one of {GEOMETRIES}, got {cfg.geometry.kind!r}")
    if cfg.geometry.kind == "box" and not cfg.geometry.extents:
        raise ConfigError("geometry.extents: required for box geometries")
    if cfg.geometry.kind == "box" and any(e <= 0 for e in cfg.geometry.extents):
        raise ConfigError("geometry.extents: must be positive")
    if cfg.geometry.kind == "half-cylinder":
        if not 0 < cfg.geometry.inner_r < cfg.geometry.outer_r:
            raise ConfigError("geometry.inner_r/outer_r: need 0 < inner_r < outer_r")
        if cfg.geometry.length <= 0:
            raise ConfigError("geometry.length: must be positive")
        if cfg.degree < 2:
            raise ConfigError("degree: half-cylinder runs need degree >= 2")
    if cfg.degree < 1:
        raise ConfigError("degree: must be at least 1")
    ndim = cfg.geometry.ndim
    if len(cfg.elements) != ndim:
        raise ConfigError(
            f"elements: need {ndim} per-direction counts for {cfg.geometry.kind}, "
            f"got {len(cfg.elements)}"
        )
    if any(e < 1 for e in cfg.elements):
        raise ConfigError("elements: counts must be positive")
    if cfg.geometry.kind == "half-cylinder" and cfg.elements[1] % 2 != 0:
        raise ConfigError(
            "elements: the circumferential count (direction 2) must be even so "
            "the crown breakpoint 0.5 lies on the mesh"
        )
    if cfg.eigen.num_pairs < 1:
        raise ConfigError("eigen.num_pairs: must be at least 1")
    if cfg.eigen.tol <= 0:
        raise ConfigError("eigen.tol: must be positive")
    if cfg.eigen.max_iter < 1:
        raise ConfigError("eigen.max_iter: must be at least 1")
    if cfg.interp_continuity not in ("auto", "c0", "cpm1"):
        raise ConfigError(
            f"galerkin.interp_continuity: must be auto, c0 or cpm1, got {cfg.interp_continuity!r}"
        )
    if cfg.nq_per_dir is not None and cfg.nq_per_dir < 1:
        raise ConfigError("collocation.nq_per_dir: must be at least 1")
    if cfg.threads is not None and cfg.threads < 1:
        raise ConfigError("threads: must be at least 1")
    if cfg.line_modes < 0:
        raise ConfigError("line_modes: must be non-negative")
    if cfg.line_modes > cfg.eigen.num_pairs:
        raise ConfigError("line_modes: cannot exceed eigen.num_pairs")
    if cfg.line_direction is not None and not 1 <= cfg.line_direction <= ndim:
        raise ConfigError(f"line_direction: must be between 1 and {ndim}")
    if cfg.line_points < 2:
        raise ConfigError("line_points: need at least two sample points")
