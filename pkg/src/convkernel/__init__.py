"""Convolutional kernel depth transforms and ridgeless-regression risk analysis."""

from convkernel.kernels import (
    Architecture,
    ConvGeometry,
    FeatureTransform,
    GeometryKind,
    Padding,
    SpectralSummary,
    apply_conv_operator,
    basis_matrices,
    feature_transform,
    feature_transforms,
    initial_transform,
    iterate_to_convergence,
    limiting_transform,
    sine_profile,
    spectral_summary,
    symmetric_spectrum,
    toeplitz_spectrum,
    tridiagonal_ones,
)
from convkernel.data import (
    Dataset,
    IdxFormatError,
    IdxHeader,
    binary_digit_subset,
    gaussian_problem,
    load_dataset_csv,
    load_idx_images,
    min_norm_solve,
    save_dataset_csv,
)
from convkernel.regression import (
    PredictorFit,
    RegressionProblem,
    RiskEstimate,
    bias_conditional,
    bias_mc,
    excess_risk_mc,
    fit_ridgeless,
    misalignment,
    psd_sqrt,
    variance_lower_bound,
    variance_mc,
)
from convkernel.rng import derive_seed, trial_rng
from convkernel.config import (
    ConfigError,
    EigvecConfig,
    MnistConfig,
    SweepConfig,
    log_spaced_depths,
    parse_config,
)
from convkernel.experiments import (
    DepthSweepRecord,
    GalleryRecord,
    MnistDepthRecord,
    participation_ratio,
    run_depth_sweep,
    run_eigvec_gallery,
    run_mnist_experiment,
)

__all__ = [
    "ConfigError",
    "DepthSweepRecord",
    "EigvecConfig",
    "GalleryRecord",
    "MnistConfig",
    "MnistDepthRecord",
    "SweepConfig",
    "log_spaced_depths",
    "parse_config",
    "participation_ratio",
    "run_depth_sweep",
    "run_eigvec_gallery",
    "run_mnist_experiment",
    "Dataset",
    "IdxFormatError",
    "IdxHeader",
    "PredictorFit",
    "RegressionProblem",
    "RiskEstimate",
    "bias_conditional",
    "bias_mc",
    "binary_digit_subset",
    "excess_risk_mc",
    "fit_ridgeless",
    "gaussian_problem",
    "load_dataset_csv",
    "load_idx_images",
    "min_norm_solve",
    "misalignment",
    "psd_sqrt",
    "save_dataset_csv",
    "variance_lower_bound",
    "variance_mc",
    "Architecture",
    "ConvGeometry",
    "FeatureTransform",
    "GeometryKind",
    "Padding",
    "SpectralSummary",
    "apply_conv_operator",
    "basis_matrices",
    "derive_seed",
    "feature_transform",
    "feature_transforms",
    "initial_transform",
    "iterate_to_convergence",
    "limiting_transform",
    "sine_profile",
    "spectral_summary",
    "symmetric_spectrum",
    "toeplitz_spectrum",
    "tridiagonal_ones",
    "trial_rng",
]
