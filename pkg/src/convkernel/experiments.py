"""Experiment runners behind the CLI: depth sweeps, eigenvector gallery,
two-digit image regression.

Every runner computes all records first and only then writes its outputs
atomically, so a failed run leaves no partial files.  Output is fully
determined by the config (including its seed): reruns are byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from convkernel.config import (
    EigvecConfig,
    MnistConfig,
    SweepConfig,
    THETA_FAMILY_ALIGNED_SPIKE,
)
from convkernel.data import binary_digit_subset, load_idx_images, min_norm_solve
from convkernel.fileio import (
    format_float,
    grayscale,
    load_matrix_csv,
    load_vector_csv,
    write_pgm,
    write_text_atomic,
)
from convkernel.kernels import (
    ConvGeometry,
    GeometryKind,
    feature_transforms,
    symmetric_spectrum,
)
from convkernel.regression import (
    RegressionProblem,
    bias_mc,
    excess_risk_mc,
    fit_ridgeless,
    misalignment,
    variance_mc,
)
from convkernel.rng import derive_seed, trial_rng

RIDGE_EPSILON_RTOL = 1e-10


@dataclass(frozen=True)
class DepthSweepRecord:
    depth: int
    bias_mean: float
    bias_se: float
    var_mean: float
    var_se: float
    risk_mean: float
    risk_se: float
    misalignment: float


@dataclass(frozen=True)
class GalleryRecord:
    depth: int
    participation_ratio: float
    image_file: str


@dataclass(frozen=True)
class MnistDepthRecord:
    depth: int
    loss_mean: float
    loss_se: float
    misalignment: float


def _write_csv(path: Path, header: list[str], rows: list[list[float]]) -> None:
    lines = [",".join(header)]
    for row in rows:
        cells = [str(v) if isinstance(v, (int, np.integer)) else format_float(v) for v in row]
        lines.append(",".join(cells))
    write_text_atomic(path, "\n".join(lines) + "\n")


def _write_meta(path: Path, payload: dict) -> None:
    write_text_atomic(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _synthetic_coef(p: int, seed: int) -> np.ndarray:
    coef = trial_rng(derive_seed(seed, "coef"), 0).standard_normal(p)
    return coef / np.linalg.norm(coef)


def _resolve_coef(cfg: SweepConfig) -> np.ndarray:
    p = cfg.geometry.p
    if cfg.beta_source == "file":
        coef = load_vector_csv(cfg.beta_file)
        if coef.shape[0] != p:
            raise ValueError(
                f"coefficient file {cfg.beta_file} has length {coef.shape[0]}, expected {p}"
            )
        if not np.any(coef):
            raise ValueError(f"coefficient file {cfg.beta_file} is all zeros")
        return coef
    return _synthetic_coef(p, cfg.seed)


def _transform_matrices(cfg: SweepConfig, coef: np.ndarray, depths: tuple[int, ...]
                        ) -> dict[int, np.ndarray]:
    if cfg.theta_family == THETA_FAMILY_ALIGNED_SPIKE:
        spike = np.outer(coef, coef)
        eye = np.eye(cfg.geometry.p)
        return {d: spike + abs(d - cfg.family_center) * eye for d in depths}
    transforms = feature_transforms(
        sorted(depths), cfg.geometry, cfg.padding, cfg.architecture
    )
    return {ft.depth: np.asarray(ft.matrix) for ft in transforms}


def _ridged_inverse(matrix: np.ndarray) -> tuple[np.ndarray, float]:
    """Inverse after adding a tiny ridge so near-singular transforms invert."""
    eigenvalues, eigenvectors = np.linalg.eigh(matrix)
    epsilon = RIDGE_EPSILON_RTOL * float(eigenvalues[-1])
    inverse = (eigenvectors / (eigenvalues + epsilon)) @ eigenvectors.T
    return (inverse + inverse.T) / 2.0, epsilon


def _resolve_covariance(
    cfg: SweepConfig, matrices: dict[int, np.ndarray]
) -> tuple[np.ndarray, float | None]:
    p = cfg.geometry.p
    if cfg.sigma_source == "identity":
        return np.eye(p), None
    if cfg.sigma_source == "file":
        covariance = load_matrix_csv(cfg.sigma_file)
        if covariance.shape != (p, p):
            raise ValueError(
                f"covariance file {cfg.sigma_file} has shape {covariance.shape}, "
                f"expected ({p}, {p})"
            )
        return covariance, None
    return _ridged_inverse(matrices[cfg.sigma_depth])


def run_depth_sweep(cfg: SweepConfig) -> list[DepthSweepRecord]:
    """Bias, variance, risk and misalignment per depth; writes sweep.csv.

    The three estimator seeds are derived once from the master seed and
    shared across depths, so per-depth estimates ride on common random
    numbers and depth comparisons are free of independent-sampling noise.
    """
    coef = _resolve_coef(cfg)
    wanted = set(cfg.depths)
    if cfg.sigma_source == "inverse_theta":
        wanted.add(cfg.sigma_depth)
    matrices = _transform_matrices(cfg, coef, tuple(sorted(wanted)))
    covariance, ridge_epsilon = _resolve_covariance(cfg, matrices)
    problem = RegressionProblem(covariance, coef, cfg.noise_var, cfg.n_train)
    seeds = {name: derive_seed(cfg.seed, name) for name in ("bias", "variance", "risk")}

    records = []
    for depth in cfg.depths:
        transform = matrices[depth]
        bias = bias_mc(transform, problem, trials=cfg.trials_bias, seed=seeds["bias"])
        variance = variance_mc(transform, problem, trials=cfg.trials_var,
                               seed=seeds["variance"])
        risk = excess_risk_mc(transform, problem, trials=cfg.trials_risk,
                              seed=seeds["risk"], test_points=cfg.risk_test_points)
        records.append(
            DepthSweepRecord(
                depth,
                bias.mean, bias.std_error,
                variance.mean, variance.std_error,
                risk.mean, risk.std_error,
                misalignment(transform, coef),
            )
        )

    cfg.outdir.mkdir(parents=True, exist_ok=True)
    _write_csv(
        cfg.outdir / "sweep.csv",
        ["depth", "bias_mean", "bias_se", "var_mean", "var_se",
         "risk_mean", "risk_se", "misalignment"],
        [[r.depth, r.bias_mean, r.bias_se, r.var_mean, r.var_se,
          r.risk_mean, r.risk_se, r.misalignment] for r in records],
    )
    meta = {
        "experiment": cfg.experiment,
        "geometry": cfg.geometry.kind.value,
        "p": cfg.geometry.p,
        "padding": cfg.padding.value,
        "architecture": cfg.architecture.value,
        "theta_family": cfg.theta_family,
        "family_center": cfg.family_center,
        "depths": list(cfg.depths),
        "sigma_source": cfg.sigma_source,
        "sigma_depth": cfg.sigma_depth,
        "beta_source": cfg.beta_source,
        "noise_var": cfg.noise_var,
        "n": cfg.n_train,
        "trials": {"bias": cfg.trials_bias, "variance": cfg.trials_var,
                   "risk": cfg.trials_risk},
        "risk_test_points": cfg.risk_test_points,
        "seed": cfg.seed,
        "derived_seeds": seeds,
        "ridge_epsilon": ridge_epsilon,
    }
    _write_meta(cfg.outdir / "sweep_meta.json", meta)
    return records


def participation_ratio(vector: np.ndarray) -> float:
    """(sum v^2)^2 / sum v^4: effective number of pixels carrying the vector."""
    squared = np.asarray(vector, dtype=float) ** 2
    total = float(squared.sum())
    if total == 0.0:
        raise ValueError("zero vector has no participation ratio")
    return total**2 / float(np.sum(squared**2))


def run_eigvec_gallery(cfg: EigvecConfig) -> list[GalleryRecord]:
    """Leading-eigenvector images across depths as PGM files plus gallery.csv."""
    if cfg.geometry.kind is not GeometryKind.TWO_D:
        raise ValueError("the eigenvector gallery requires 2-D geometry")
    side = cfg.geometry.side
    transforms = feature_transforms(cfg.depths, cfg.geometry, cfg.padding,
                                    cfg.architecture)
    cfg.outdir.mkdir(parents=True, exist_ok=True)
    records = []
    images: list[tuple[Path, np.ndarray]] = []
    for ft in transforms:
        leading = symmetric_spectrum(ft.matrix).leading_eigenvector
        name = f"eigvec_D{ft.depth}.pgm"
        images.append((cfg.outdir / name, grayscale(leading.reshape(side, side))))
        records.append(GalleryRecord(ft.depth, participation_ratio(leading), name))
    for path, image in images:
        write_pgm(path, image)
    _write_csv(
        cfg.outdir / "gallery.csv",
        ["depth", "participation_ratio"],
        [[r.depth, r.participation_ratio] for r in records],
    )
    return records


def run_mnist_experiment(cfg: MnistConfig) -> list[MnistDepthRecord]:
    """Two-digit ridgeless regression across depths; writes mnist.csv.

    Builds the ground-truth set (count_per_class of each digit, labels
    +1/-1), solves the minimum-norm interpolant as the true coefficient
    vector, then per depth averages the squared loss on all ground-truth
    points over independent n-point training subsamples.  The same
    subsample streams are reused at every depth and for the identity-
    transform baseline recorded in mnist_meta.json.
    """
    dataset = load_idx_images(cfg.images, cfg.labels)
    subset = binary_digit_subset(
        dataset, cfg.digit_pos, cfg.digit_neg, cfg.count_per_class,
        seed=derive_seed(cfg.seed, "subset"), shuffle=cfg.shuffle,
    )
    total = len(subset)
    p = subset.x.shape[1]
    coef = min_norm_solve(subset.x, subset.y)

    geometry = ConvGeometry(GeometryKind.TWO_D, p)
    side = geometry.side
    transforms = feature_transforms(cfg.depths, geometry, cfg.padding, cfg.architecture)
    subsample_seed = derive_seed(cfg.seed, "subsample")

    def subsample_indices(trial: int) -> np.ndarray:
        return trial_rng(subsample_seed, trial).choice(total, size=cfg.n_train,
                                                       replace=False)

    def mean_losses(transform: np.ndarray) -> np.ndarray:
        losses = np.empty(cfg.trials)
        for trial in range(cfg.trials):
            rows = subsample_indices(trial)
            fit = fit_ridgeless(transform, subset.x[rows], subset.y[rows])
            errors = fit.predict(subset.x) - subset.y
            losses[trial] = float(np.mean(errors**2))
        return losses

    records = []
    for ft in transforms:
        losses = mean_losses(np.asarray(ft.matrix))
        se = float(np.std(losses, ddof=1) / np.sqrt(cfg.trials)) if cfg.trials > 1 else 0.0
        records.append(
            MnistDepthRecord(ft.depth, float(losses.mean()), se,
                             misalignment(ft.matrix, coef))
        )

    baseline_losses = mean_losses(np.eye(p))
    baseline_se = (
        float(np.std(baseline_losses, ddof=1) / np.sqrt(cfg.trials))
        if cfg.trials > 1 else 0.0
    )

    cfg.outdir.mkdir(parents=True, exist_ok=True)
    _write_csv(
        cfg.outdir / "mnist.csv",
        ["depth", "loss_mean", "loss_se", "misalignment"],
        [[r.depth, r.loss_mean, r.loss_se, r.misalignment] for r in records],
    )
    meta = {
        "experiment": cfg.experiment,
        "images": str(cfg.images),
        "labels": str(cfg.labels),
        "digit_pos": cfg.digit_pos,
        "digit_neg": cfg.digit_neg,
        "count_per_class": cfg.count_per_class,
        "side": side,
        "n": cfg.n_train,
        "trials": cfg.trials,
        "depths": list(cfg.depths),
        "padding": cfg.padding.value,
        "architecture": cfg.architecture.value,
        "shuffle": cfg.shuffle,
        "seed": cfg.seed,
        "baseline_identity_loss_mean": float(baseline_losses.mean()),
        "baseline_identity_loss_se": baseline_se,
    }
    _write_meta(cfg.outdir / "mnist_meta.json", meta)
    return records
