"""Scaling-law analysis toolkit: fit, decompose, cross-check, and
extrapolate power-law-plus-constant loss trends from training-run logs."""

__version__ = "0.1.0"

from .lawcore import (  # noqa: F401
    LossUnit,
    PurePowerLaw,
    RunRecord,
    ScalingLaw,
    SeriesPoint,
    Split,
    Variable,
    compute_pf_days,
    eval_law,
    reducible_at,
    rescale_loss,
)
from .powerfit import (  # noqa: F401
    FitOptions,
    FitReport,
    bootstrap_ci,
    fit_below_frontier,
    fit_power_plus_const,
    fit_pure_power,
)
from .frontier import (  # noqa: F401
    Frontier,
    FrontierPoint,
    build_pareto,
    data_scaling_exponent,
    fit_nopt,
    hull_points,
    tokens_compute_law,
)
