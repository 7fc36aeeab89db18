"""Ridgeless regression under a feature transform, with risk estimators.

The predictor is x^T T X^T (X T X^T)^+ y for a PSD transform T.  Monte
Carlo estimators quantify its bias (error of the mean predictor over
training-set draws), variance (label-noise contribution), and total
excess risk; the three are related by risk = bias + variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from convkernel.kernels import _check_symmetric_psd
from convkernel.rng import trial_rng

PINV_RTOL = 1e-12
DEFAULT_BIAS_TRIALS = 500
DEFAULT_VARIANCE_TRIALS = 2000
DEFAULT_RISK_TRIALS = 500
DEFAULT_RISK_TEST_POINTS = 256


@dataclass(frozen=True)
class RegressionProblem:
    """Population model: rows x ~ N(0, covariance), y = x.coef + noise."""

    covariance: np.ndarray
    coef: np.ndarray
    noise_var: float
    n_train: int

    def __post_init__(self) -> None:
        covariance = np.asarray(self.covariance, dtype=float)
        coef = np.asarray(self.coef, dtype=float)
        p = coef.shape[0] if coef.ndim == 1 else -1
        if coef.ndim != 1:
            raise ValueError(f"coef must be a vector, got shape {coef.shape}")
        if covariance.shape != (p, p):
            raise ValueError(
                f"covariance shape {covariance.shape} does not match coef length {p}"
            )
        _check_symmetric_psd(covariance, "covariance")
        if self.noise_var < 0:
            raise ValueError(f"noise_var must be >= 0, got {self.noise_var}")
        if not 1 <= self.n_train < p:
            raise ValueError(
                f"need 1 <= n_train < p for the over-parameterized regime, "
                f"got n_train={self.n_train}, p={p}"
            )
        covariance.setflags(write=False)
        coef.setflags(write=False)
        object.__setattr__(self, "covariance", covariance)
        object.__setattr__(self, "coef", coef)

    @property
    def p(self) -> int:
        return self.coef.shape[0]


@dataclass(frozen=True)
class RiskEstimate:
    """Monte Carlo mean with its standard error; deterministic per (seed, trials)."""

    mean: float
    std_error: float
    trials: int
    seed: int


@dataclass(frozen=True)
class PredictorFit:
    """Fitted ridgeless predictor: predict(x) = x @ transform @ x_train.T @ dual_weights."""

    transform: np.ndarray
    x_train: np.ndarray
    y_train: np.ndarray
    dual_weights: np.ndarray
    effective_rank: int

    def predict(self, x: np.ndarray) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        out = x @ (self.transform @ (self.x_train.T @ self.dual_weights))
        return float(out) if x.ndim == 1 else out


def _pinv_cutoff(eigenvalues: np.ndarray, dim: int) -> float:
    return dim * float(np.max(eigenvalues, initial=0.0)) * PINV_RTOL


def _apply_pinv(kernel: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, int]:
    """Pseudo-inverse solve of a symmetric PSD kernel; returns (solution, rank kept)."""
    kernel = (kernel + kernel.T) / 2.0
    eigenvalues, eigenvectors = np.linalg.eigh(kernel)
    cutoff = _pinv_cutoff(eigenvalues, kernel.shape[0])
    keep = eigenvalues > max(cutoff, 0.0)
    if not np.any(keep):
        return np.zeros_like(rhs, dtype=float), 0
    basis = eigenvectors[:, keep]
    solution = basis @ ((basis.T @ rhs) / eigenvalues[keep])
    return solution, int(np.count_nonzero(keep))


def psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root; tiny negative eigenvalues are clamped to zero."""
    matrix = np.asarray(matrix, dtype=float)
    _check_symmetric_psd(matrix, "matrix")
    eigenvalues, eigenvectors = np.linalg.eigh(matrix)
    root = (eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))) @ eigenvectors.T
    return (root + root.T) / 2.0


def fit_ridgeless(
    transform: np.ndarray, x_train: np.ndarray, y_train: np.ndarray
) -> PredictorFit:
    """Minimum-complexity interpolant under the given PSD feature transform."""
    transform = np.asarray(transform, dtype=float)
    x_train = np.asarray(x_train, dtype=float)
    y_train = np.asarray(y_train, dtype=float)
    if x_train.ndim != 2:
        raise ValueError(f"x_train must be 2-D, got shape {x_train.shape}")
    n, p = x_train.shape
    if transform.shape != (p, p):
        raise ValueError(
            f"transform shape {transform.shape} does not match feature count {p}"
        )
    if y_train.shape != (n,):
        raise ValueError(
            f"y_train shape {y_train.shape} does not match row count {n}"
        )
    _check_symmetric_psd(transform, "transform")
    kernel = x_train @ transform @ x_train.T
    dual_weights, effective_rank = _apply_pinv(kernel, y_train)
    return PredictorFit(transform, x_train, y_train, dual_weights, effective_rank)


def bias_conditional(
    transform: np.ndarray,
    coef: np.ndarray,
    covariance: np.ndarray,
    x_train: np.ndarray,
) -> float:
    """Squared covariance-norm of the part of coef the mean predictor misses.

    Computes r = (I - T X^T (X T X^T)^+ X) coef and returns r^T covariance r.
    """
    transform = np.asarray(transform, dtype=float)
    coef = np.asarray(coef, dtype=float)
    covariance = np.asarray(covariance, dtype=float)
    x_train = np.asarray(x_train, dtype=float)
    p = coef.shape[0]
    if transform.shape != (p, p) or covariance.shape != (p, p) or x_train.shape[1] != p:
        raise ValueError(
            f"inconsistent shapes: transform {transform.shape}, covariance "
            f"{covariance.shape}, x_train {x_train.shape}, coef {coef.shape}"
        )
    kernel = x_train @ transform @ x_train.T
    dual, _ = _apply_pinv(kernel, x_train @ coef)
    residual = coef - transform @ (x_train.T @ dual)
    return max(float(residual @ covariance @ residual), 0.0)


def _estimate(values: np.ndarray, trials: int, seed: int) -> RiskEstimate:
    mean = float(np.mean(values))
    std_error = float(np.std(values, ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    return RiskEstimate(mean, std_error, trials, seed)


def bias_mc(
    transform: np.ndarray,
    problem: RegressionProblem,
    trials: int = DEFAULT_BIAS_TRIALS,
    seed: int = 0,
) -> RiskEstimate:
    """Mean conditional bias over training designs drawn from the problem."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    transform = np.asarray(transform, dtype=float)
    _check_symmetric_psd(transform, "transform")
    sqrt_cov = psd_sqrt(problem.covariance)
    values = np.empty(trials)
    for trial in range(trials):
        rng = trial_rng(seed, trial)
        x_train = rng.standard_normal((problem.n_train, problem.p)) @ sqrt_cov
        values[trial] = bias_conditional(transform, problem.coef, problem.covariance, x_train)
    return _estimate(values, trials, seed)


def variance_mc(
    transform: np.ndarray,
    problem: RegressionProblem,
    trials: int = DEFAULT_VARIANCE_TRIALS,
    seed: int = 0,
) -> RiskEstimate:
    """Label-noise contribution to the excess risk, averaged over designs.

    Per trial draws a standard normal design Z and evaluates
    noise_var * trace((Z S Z^T)^+^2  Z S^2 Z^T) with S the covariance-
    conjugated transform sqrt(cov) T sqrt(cov).
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if problem.noise_var < 0:
        raise ValueError(f"noise_var must be >= 0, got {problem.noise_var}")
    transform = np.asarray(transform, dtype=float)
    _check_symmetric_psd(transform, "transform")
    sqrt_cov = psd_sqrt(problem.covariance)
    conjugated = sqrt_cov @ transform @ sqrt_cov
    conjugated = (conjugated + conjugated.T) / 2.0
    conjugated_sq = conjugated @ conjugated
    values = np.empty(trials)
    for trial in range(trials):
        rng = trial_rng(seed, trial)
        z = rng.standard_normal((problem.n_train, problem.p))
        gram = z @ conjugated @ z.T
        gram = (gram + gram.T) / 2.0
        eigenvalues, eigenvectors = np.linalg.eigh(gram)
        cutoff = _pinv_cutoff(eigenvalues, problem.n_train)
        keep = eigenvalues > max(cutoff, 0.0)
        if not np.any(keep):
            values[trial] = 0.0
            continue
        basis = eigenvectors[:, keep]
        rotated = basis.T @ (z @ conjugated_sq @ z.T) @ basis
        values[trial] = problem.noise_var * float(
            np.sum(np.diagonal(rotated) / eigenvalues[keep] ** 2)
        )
    return _estimate(values, trials, seed)


def excess_risk_mc(
    transform: np.ndarray,
    problem: RegressionProblem,
    trials: int = DEFAULT_RISK_TRIALS,
    seed: int = 0,
    test_points: int = DEFAULT_RISK_TEST_POINTS,
) -> RiskEstimate:
    """Direct Monte Carlo of squared prediction error on fresh test draws.

    Per trial: draw a training set with noisy labels, fit, then average
    (x.coef - prediction)^2 over test_points fresh covariate draws.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if test_points < 1:
        raise ValueError(f"test_points must be >= 1, got {test_points}")
    transform = np.asarray(transform, dtype=float)
    sqrt_cov = psd_sqrt(problem.covariance)
    noise_scale = np.sqrt(problem.noise_var)
    values = np.empty(trials)
    for trial in range(trials):
        rng = trial_rng(seed, trial)
        x_train = rng.standard_normal((problem.n_train, problem.p)) @ sqrt_cov
        y_train = x_train @ problem.coef + noise_scale * rng.standard_normal(problem.n_train)
        fit = fit_ridgeless(transform, x_train, y_train)
        x_test = rng.standard_normal((test_points, problem.p)) @ sqrt_cov
        errors = x_test @ problem.coef - fit.predict(x_test)
        values[trial] = float(np.mean(errors**2))
    return _estimate(values, trials, seed)


def variance_lower_bound(noise_var: float, n: int, p: int) -> float:
    """Floor noise_var * n / (p - n - 1) on the variance, attained at the
    inverse-covariance transform."""
    if noise_var < 0:
        raise ValueError(f"noise_var must be >= 0, got {noise_var}")
    if p <= n + 1:
        raise ValueError(f"bound diverges unless p > n + 1, got n={n}, p={p}")
    return noise_var * n / (p - n - 1)


def misalignment(transform: np.ndarray, coef: np.ndarray) -> float:
    """Fraction of the transform's spectrum not aligned with coef, in [0, 1].

    Zero when the transform is a multiple of the coef outer product, one
    when coef lies in its null space; invariant to scaling the transform.
    """
    transform = np.asarray(transform, dtype=float)
    coef = np.asarray(coef, dtype=float)
    coef_norm = float(np.linalg.norm(coef))
    fro = float(np.linalg.norm(transform))
    if coef_norm == 0.0:
        raise ValueError("coef must be nonzero")
    if fro == 0.0:
        raise ValueError("transform must be nonzero")
    unit = coef / coef_norm
    aligned = float(unit @ transform @ unit)
    return float(np.clip(1.0 - (aligned / fro) ** 2, 0.0, 1.0))
