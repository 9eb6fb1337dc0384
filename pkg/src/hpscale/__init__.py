"""hpscale: scaling-law toolkit for LLM pre-training hyperparameters.

Predicts optimal learning rate and batch size from model/dataset scale,
fits such power laws from grid-search optima with bootstrap confidence
bands, and analyzes loss surfaces for convexity, plateaus, and relative
error.
"""

from .errors import (
    ArgumentError,
    BootstrapFailureError,
    DegenerateDesignError,
    DomainError,
    GridShapeError,
    HpscaleError,
    OutOfHullError,
    ParseError,
    SingularityError,
)
from .fitting import (
    BsLawFit,
    FitResult,
    LrLawFit,
    OlsSolution,
    OptimumObservation,
    bootstrap_fit,
    fit_bs_law,
    fit_lr_law,
    load_observations,
    load_observations_file,
    observations_to_csv,
    ols,
)
from .laws import (
    AuxInputs,
    ComputeBudget,
    GridSpec,
    LawLibrary,
    ModelScale,
    Prediction,
    ScheduleSpec,
    baseline_predict,
    compute_budget,
    law_overrides_from_dict,
    load_law_overrides,
    schedule_value,
    snap_to_grid,
    step_law,
)
from .stats import (
    FormulationComparison,
    NestedTest,
    PredictorStats,
    RegressionReport,
    compare_formulations,
    f_sf,
    nested_f_test,
    regress,
    regularized_incomplete_beta,
    student_t_cdf,
    student_t_critical,
    student_t_two_sided_p,
)
from .surface import (
    ConsistencyReport,
    ConvexityReport,
    ConvexityViolation,
    LossSurface,
    OptimumReport,
    PlateauRegion,
    SweepPoint,
    argmin_consistency,
    convexity_report,
    find_optimum,
    interpolate_loss,
    load_surface,
    load_surface_file,
    plateau,
    relative_error,
    surface_to_csv,
)
from .synth import (
    ObservationSpec,
    SurfaceSpec,
    generate_observations,
    generate_surface,
    load_spec_file,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
