"""Flat key=value experiment configuration.

One `key = value` pair per line, `#` starts a comment, unknown keys are
rejected.  The required `experiment` key (sweep | eigvec | mnist) selects
the schema; every other key has a documented default.  Errors name the
offending line and key.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from convkernel.kernels import Architecture, ConvGeometry, GeometryKind, Padding

THETA_FAMILY_CONV = "conv"
THETA_FAMILY_ALIGNED_SPIKE = "aligned_spike"


class ConfigError(ValueError):
    """Raised for malformed or invalid configuration files."""


@dataclass(frozen=True)
class SweepConfig:
    """Depth sweep of bias/variance/risk/misalignment over one problem."""

    experiment: str
    geometry: ConvGeometry
    padding: Padding
    architecture: Architecture
    theta_family: str
    family_center: int
    depths: tuple[int, ...]
    sigma_source: str
    sigma_depth: int
    sigma_file: Path | None
    beta_source: str
    beta_file: Path | None
    noise_var: float
    n_train: int
    trials_bias: int
    trials_var: int
    trials_risk: int
    risk_test_points: int
    seed: int
    outdir: Path


@dataclass(frozen=True)
class EigvecConfig:
    """Leading-eigenvector image gallery across depths (2-D only)."""

    experiment: str
    geometry: ConvGeometry
    padding: Padding
    architecture: Architecture
    depths: tuple[int, ...]
    outdir: Path


@dataclass(frozen=True)
class MnistConfig:
    """Two-digit regression depth sweep on IDX image files."""

    experiment: str
    images: Path
    labels: Path
    digit_pos: int
    digit_neg: int
    count_per_class: int
    n_train: int
    trials: int
    depths: tuple[int, ...]
    padding: Padding
    architecture: Architecture
    shuffle: bool
    seed: int
    outdir: Path


def log_spaced_depths(low: int, high: int, count: int) -> tuple[int, ...]:
    """Unique integer depths spread geometrically between low and high."""
    if low < 1:
        raise ValueError(f"log-spaced depths need depth_min >= 1, got {low}")
    if high < low:
        raise ValueError(f"need depth_max >= depth_min, got {low}..{high}")
    if count < 1:
        raise ValueError(f"need depth_count >= 1, got {count}")
    grid = np.rint(np.geomspace(low, high, count)).astype(int)
    return tuple(sorted(set(int(d) for d in grid)))


_SWEEP_DEFAULT_DEPTHS = log_spaced_depths(1, 100, 10)
_EIGVEC_DEFAULT_DEPTHS = (0, 1, 4, 16, 64, 256, 1024)
_MNIST_DEFAULT_DEPTHS = (0, 1, 2, 4, 8, 16, 32, 64, 128, 256, 512)


class _Pairs:
    """Parsed key/value pairs with line numbers, consumed one key at a time."""

    def __init__(self, path: str | Path):
        self.path = str(path)
        self.entries: dict[str, tuple[str, int]] = {}
        self.lines: dict[str, int] = {}
        try:
            lines = Path(path).read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        for line_no, raw in enumerate(lines, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(
                    f"{self.path}:{line_no}: expected 'key = value', got {raw.strip()!r}"
                )
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise ConfigError(f"{self.path}:{line_no}: missing key before '='")
            if key in self.entries:
                raise ConfigError(
                    f"{self.path}:{line_no}: duplicate key '{key}' "
                    f"(first set on line {self.entries[key][1]})"
                )
            self.entries[key] = (value, line_no)
            self.lines[key] = line_no

    def error(self, key: str, message: str) -> ConfigError:
        line = self.lines.get(key, 0)
        return ConfigError(f"{self.path}:{line}: {message}")

    def take(self, key: str) -> tuple[str, int] | None:
        return self.entries.pop(key, None)

    def reject_unknown(self, experiment: str) -> None:
        if self.entries:
            key = min(self.entries, key=lambda k: self.entries[k][1])
            line = self.entries[key][1]
            raise ConfigError(
                f"{self.path}:{line}: unknown key '{key}' for {experiment} experiment"
            )


def _take_str(pairs: _Pairs, key: str, default: str) -> str:
    entry = pairs.take(key)
    return default if entry is None else entry[0]


def _take_parsed(pairs: _Pairs, key: str, default, parse: Callable[[str], object], what: str):
    entry = pairs.take(key)
    if entry is None:
        return default
    value, _ = entry
    try:
        return parse(value)
    except (ValueError, TypeError):
        raise pairs.error(key, f"{key} must be {what}, got {value!r}") from None


def _take_int(pairs: _Pairs, key: str, default: int | None, minimum: int | None = None) -> int | None:
    out = _take_parsed(pairs, key, default, int, "an integer")
    if out is not None and minimum is not None and out < minimum:
        raise pairs.error(key, f"{key} must be >= {minimum}, got {out}")
    return out


def _take_float(pairs: _Pairs, key: str, default: float, minimum: float | None = None) -> float:
    out = _take_parsed(pairs, key, default, float, "a number")
    if minimum is not None and out < minimum:
        raise pairs.error(key, f"{key} must be >= {minimum}, got {out}")
    return out


def _take_bool(pairs: _Pairs, key: str, default: bool) -> bool:
    entry = pairs.take(key)
    if entry is None:
        return default
    value = entry[0].lower()
    if value not in ("true", "false"):
        raise pairs.error(key, f"{key} must be true or false, got {entry[0]!r}")
    return value == "true"


def _take_choice(pairs: _Pairs, key: str, default: str, choices: tuple[str, ...]) -> str:
    entry = pairs.take(key)
    if entry is None:
        return default
    value = entry[0].lower()
    if value not in choices:
        raise pairs.error(
            key, f"unknown {key} {entry[0]!r}; choose from {', '.join(choices)}"
        )
    return value


def _take_existing_file(pairs: _Pairs, key: str) -> Path | None:
    entry = pairs.take(key)
    if entry is None:
        return None
    path = Path(entry[0])
    if not path.is_file():
        raise pairs.error(key, f"{key} references a missing file: {path}")
    return path


def _take_depths(pairs: _Pairs, default: tuple[int, ...]) -> tuple[int, ...]:
    explicit = pairs.take("depths")
    low = _take_int(pairs, "depth_min", None)
    high = _take_int(pairs, "depth_max", None)
    count = _take_int(pairs, "depth_count", None)
    range_given = any(v is not None for v in (low, high, count))
    if explicit is not None and range_given:
        raise pairs.error(
            "depths", "give either depths or depth_min/depth_max/depth_count, not both"
        )
    if explicit is not None:
        value, _ = explicit
        try:
            depths = tuple(int(part.strip()) for part in value.split(",") if part.strip())
        except ValueError:
            raise pairs.error("depths", f"depths must be integers, got {value!r}") from None
        if not depths:
            raise pairs.error("depths", "depths must be a nonempty list")
        if any(d < 0 for d in depths):
            raise pairs.error("depths", f"depths must be non-negative, got {list(depths)}")
        if any(b <= a for a, b in zip(depths, depths[1:])):
            raise pairs.error(
                "depths", f"depths must be strictly increasing, got {list(depths)}"
            )
        return depths
    if range_given:
        if low is None or high is None or count is None:
            raise ConfigError(
                f"{pairs.path}:0: depth_min, depth_max and depth_count must be given together"
            )
        try:
            return log_spaced_depths(low, high, count)
        except ValueError as exc:
            raise ConfigError(f"{pairs.path}:0: {exc}") from None
    return default


def _take_geometry(pairs: _Pairs, default_kind: str, default_p: int) -> ConvGeometry:
    kind = _take_choice(pairs, "geometry", default_kind, ("1d", "2d"))
    p = _take_int(pairs, "p", default_p, minimum=1)
    try:
        return ConvGeometry(GeometryKind(kind), p)
    except ValueError as exc:
        raise pairs.error("p", str(exc)) from None


def _take_padding(pairs: _Pairs) -> Padding:
    return Padding(_take_choice(pairs, "padding", "zero", ("zero", "circular")))


def _take_architecture(pairs: _Pairs, default: str = "pooling") -> Architecture:
    return Architecture(
        _take_choice(pairs, "architecture", default, ("flattening", "pooling"))
    )


def _build_sweep(pairs: _Pairs) -> SweepConfig:
    geometry = _take_geometry(pairs, "1d", 20)
    padding = _take_padding(pairs)
    architecture = _take_architecture(pairs)
    theta_family = _take_choice(
        pairs, "theta_family", THETA_FAMILY_CONV,
        (THETA_FAMILY_CONV, THETA_FAMILY_ALIGNED_SPIKE),
    )
    family_center = _take_int(pairs, "family_center", 10, minimum=0)
    depths = _take_depths(pairs, _SWEEP_DEFAULT_DEPTHS)
    sigma_source = _take_choice(
        pairs, "sigma_source", "identity", ("identity", "inverse_theta", "file")
    )
    sigma_depth = _take_int(pairs, "sigma_depth", 50, minimum=0)
    sigma_file = _take_existing_file(pairs, "sigma_file")
    beta_source = _take_choice(pairs, "beta_source", "synthetic", ("synthetic", "file"))
    beta_file = _take_existing_file(pairs, "beta_file")
    noise_var = _take_float(pairs, "noise_var", 0.01, minimum=0.0)
    n_train = _take_int(pairs, "n", 10, minimum=1)
    trials_bias = _take_int(pairs, "trials_bias", 500, minimum=1)
    trials_var = _take_int(pairs, "trials_var", 2000, minimum=1)
    trials_risk = _take_int(pairs, "trials_risk", 500, minimum=1)
    risk_test_points = _take_int(pairs, "risk_test_points", 256, minimum=1)
    seed = _take_int(pairs, "seed", 0)
    outdir = Path(_take_str(pairs, "outdir", "out"))
    pairs.reject_unknown("sweep")
    if sigma_source == "file" and sigma_file is None:
        raise ConfigError(f"{pairs.path}:0: sigma_source = file requires sigma_file")
    if beta_source == "file" and beta_file is None:
        raise ConfigError(f"{pairs.path}:0: beta_source = file requires beta_file")
    if n_train >= geometry.p:
        raise ConfigError(
            f"{pairs.path}:0: need n < p for the over-parameterized regime, "
            f"got n={n_train}, p={geometry.p}"
        )
    return SweepConfig(
        "sweep", geometry, padding, architecture, theta_family, family_center,
        depths, sigma_source, sigma_depth, sigma_file, beta_source, beta_file,
        noise_var, n_train, trials_bias, trials_var, trials_risk,
        risk_test_points, seed, outdir,
    )


def _build_eigvec(pairs: _Pairs) -> EigvecConfig:
    p = _take_int(pairs, "p", 784, minimum=1)
    try:
        geometry = ConvGeometry(GeometryKind.TWO_D, p)
    except ValueError as exc:
        raise pairs.error("p", str(exc)) from None
    padding = _take_padding(pairs)
    architecture = _take_architecture(pairs)
    depths = _take_depths(pairs, _EIGVEC_DEFAULT_DEPTHS)
    outdir = Path(_take_str(pairs, "outdir", "out"))
    pairs.reject_unknown("eigvec")
    return EigvecConfig("eigvec", geometry, padding, architecture, depths, outdir)


def _build_mnist(pairs: _Pairs) -> MnistConfig:
    images = _take_existing_file(pairs, "images")
    labels = _take_existing_file(pairs, "labels")
    if images is None:
        raise ConfigError(f"{pairs.path}:0: missing required key 'images'")
    if labels is None:
        raise ConfigError(f"{pairs.path}:0: missing required key 'labels'")
    digit_pos = _take_int(pairs, "digit_pos", 0, minimum=0)
    digit_neg = _take_int(pairs, "digit_neg", 1, minimum=0)
    count_per_class = _take_int(pairs, "count_per_class", 50, minimum=1)
    n_train = _take_int(pairs, "n", 10, minimum=1)
    trials = _take_int(pairs, "trials", 20, minimum=1)
    depths = _take_depths(pairs, _MNIST_DEFAULT_DEPTHS)
    padding = _take_padding(pairs)
    architecture = _take_architecture(pairs)
    shuffle = _take_bool(pairs, "shuffle", False)
    seed = _take_int(pairs, "seed", 0)
    outdir = Path(_take_str(pairs, "outdir", "out"))
    pairs.reject_unknown("mnist")
    if digit_pos == digit_neg:
        raise ConfigError(
            f"{pairs.path}:0: digit_pos and digit_neg must differ, both are {digit_pos}"
        )
    if n_train > 2 * count_per_class:
        raise ConfigError(
            f"{pairs.path}:0: n={n_train} exceeds the {2 * count_per_class} ground-truth points"
        )
    return MnistConfig(
        "mnist", images, labels, digit_pos, digit_neg, count_per_class,
        n_train, trials, depths, padding, architecture, shuffle, seed, outdir,
    )


_BUILDERS = {"sweep": _build_sweep, "eigvec": _build_eigvec, "mnist": _build_mnist}


def parse_config(path: str | Path) -> SweepConfig | EigvecConfig | MnistConfig:
    """Parse and validate a config file; raises ConfigError on any problem."""
    pairs = _Pairs(path)
    entry = pairs.take("experiment")
    if entry is None:
        raise ConfigError(f"{pairs.path}:0: missing required key 'experiment'")
    experiment, line_no = entry[0].lower(), entry[1]
    builder = _BUILDERS.get(experiment)
    if builder is None:
        raise ConfigError(
            f"{pairs.path}:{line_no}: unknown experiment {entry[0]!r}; "
            f"choose from {', '.join(sorted(_BUILDERS))}"
        )
    return builder(pairs)
