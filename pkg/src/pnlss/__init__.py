"""Polynomial nonlinear state-space identification from periodic data.

Pipeline: design a random-phase multisine, measure several periods and
realizations, average the frequency response with noise and distortion
covariances, fit a linear state-space model by frequency-domain subspace
identification, then extend it with polynomial state and output terms
optimized in the time domain with Levenberg-Marquardt.
"""

__version__ = "0.1.0"

from .basis import (
    MonomialBasis,
    basis_state_jacobian_many,
    build_basis,
    evaluate_basis,
    evaluate_basis_many,
    select_active,
)
from .dataset import (
    ConcatenatedRecord,
    DataRecord,
    RelativeError,
    average_periods,
    concatenate,
    relative_rms_error,
)
from .duffing import (
    DuffingParams,
    default_train_config,
    make_benchmark,
    simulate_duffing,
)
from .estimators import PnlssEstimator, SubspaceLinearEstimator
from .exceptions import (
    ConfigurationError,
    DataFormatError,
    DivergenceError,
    NumericalError,
    PnlssError,
)
from .frf import (
    DistortionSpectrum,
    FrfEstimate,
    LineClass,
    classify_distortions,
    estimate_bla,
    output_noise_covariance,
)
from .linear import LinearStateSpace, frf_of_model, simulate_linear
from .model import (
    DIVERGENCE_LIMIT,
    PnlssModel,
    SimulationResult,
    init_from_linear,
    jacobian,
    simulate,
)
from .multisine import (
    ExcitationSignal,
    MultisineConfig,
    excited_line_set,
    generate_multisine,
)
from .optimize import (
    FrequencyWeighting,
    LmConfig,
    OptimizationTrace,
    lambda_update,
    optimize,
    select_best,
    weighted_cost,
)
from .subspace import (
    OrderFit,
    SubspaceConfig,
    frf_cost,
    lm_refine_linear,
    loop_orders,
    subspace_estimate,
)
from .fileio import (
    canonical_json,
    config_hash,
    load_frf,
    load_linear_models,
    load_manifest,
    load_model,
    load_record,
    load_weighting,
    save_frf,
    save_linear_models,
    save_manifest,
    save_model,
    save_record,
    save_weighting,
)
from .cli import run_case_study

__all__ = [
    "MonomialBasis", "build_basis", "select_active", "evaluate_basis",
    "evaluate_basis_many", "basis_state_jacobian_many",
    "DataRecord", "ConcatenatedRecord", "RelativeError",
    "average_periods", "concatenate", "relative_rms_error",
    "MultisineConfig", "ExcitationSignal", "excited_line_set", "generate_multisine",
    "FrfEstimate", "DistortionSpectrum", "LineClass",
    "estimate_bla", "output_noise_covariance", "classify_distortions",
    "LinearStateSpace", "frf_of_model", "simulate_linear",
    "SubspaceConfig", "OrderFit", "subspace_estimate", "lm_refine_linear",
    "loop_orders", "frf_cost",
    "PnlssModel", "SimulationResult", "init_from_linear", "simulate",
    "jacobian", "DIVERGENCE_LIMIT",
    "LmConfig", "OptimizationTrace", "FrequencyWeighting",
    "lambda_update", "weighted_cost", "optimize", "select_best",
    "DuffingParams", "default_train_config", "simulate_duffing", "make_benchmark",
    "PnlssEstimator", "SubspaceLinearEstimator",
    "run_case_study",
    "canonical_json", "config_hash",
    "save_record", "load_record", "save_frf", "load_frf",
    "save_linear_models", "load_linear_models", "save_model", "load_model",
    "save_weighting", "load_weighting", "save_manifest", "load_manifest",
    "PnlssError", "ConfigurationError", "NumericalError", "DivergenceError",
    "DataFormatError",
    "__version__",
]
