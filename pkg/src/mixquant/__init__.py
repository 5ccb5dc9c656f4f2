"""mixquant: conditional distributions from spline-weighted quantile mixtures."""

from .bases import (
    BasisFunction,
    FactorSplineSpec,
    KnotVector,
    equidistant_knots,
    eval_bspline_basis,
    eval_cvar_basis,
    eval_quantile_basis,
    ispline_basis,
    quantile_knots,
)
from .calibrate import (
    CalibrationConfig,
    DesignCache,
    FitResult,
    PenaltySpec,
    SolveReport,
    assemble_design,
    calibrate,
    calibrate_cvar,
    separate_qr,
    solve_constrained_system,
)
from .data import Dataset, Standardizer, destandardize_predictions, load_csv, standardize
from .exceptions import (
    ConfigurationError,
    DataError,
    DomainError,
    FetchError,
    MixquantError,
    SolverError,
    ValidationError,
)
from .lowrank import ALSConfig, ALSTrace, als_calibrate, rank_sweep
from .model import (
    LowRankParams,
    ModelConfig,
    ModelSpec,
    conditional_quantile_fn,
    eval_lowrank,
    eval_model,
    materialize_tensor,
    predict_levels,
    sample_response,
    surface_grid,
)
from .quadrangle import ErrorKind, discrete_superquantile, error_value, pinball, statistic
from .scoring import (
    CRPSConfig,
    CVResult,
    FoldPlan,
    coverage,
    crps,
    kfold,
    mean_crps,
    run_cv,
)
from .serialize import ModelBundle, load_model, save_model

__version__ = "0.1.0"
