"""Nonlinear fitting for power-law-plus-constant and pure power laws.

The objective is always in log-loss space: reducible losses span many
decades, so relative error is the only sensible metric.  The plus-constant
objective is multimodal in (irreducible, exponent), so fits run from a
bounded multistart grid with a Levenberg-Marquardt-style inner loop
(scipy.optimize.least_squares); ties between starts break deterministically
by lowest residual, then smallest exponent, then smallest start index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import least_squares

from .errors import DegenerateDataError, DomainError, InsufficientDataError
from .lawcore import LossUnit, PurePowerLaw, ScalingLaw, Variable

#: Multistart grid for the exponent.
ALPHA_STARTS = (0.03, 0.05, 0.1, 0.15, 0.2, 0.3, 0.5, 0.7, 1.0)

ALPHA_LOWER = 1e-4
ALPHA_UPPER = 10.0


@dataclass(frozen=True)
class FitOptions:
    max_iterations: int = 200
    tolerance: float = 1e-12
    linf_grid_size: int = 9
    alpha_starts: Sequence[float] = ALPHA_STARTS
    bootstrap_replicates: int = 200
    ci_percentiles: tuple[float, float] = (5.0, 95.0)
    seed: int = 0
    asymmetry: float = 10.0

    def __post_init__(self):
        if self.max_iterations < 1 or self.linf_grid_size < 1 or self.bootstrap_replicates < 1:
            raise DomainError("all counts must be >= 1")
        if not self.tolerance > 0:
            raise DomainError("tolerance must be > 0")


@dataclass(frozen=True)
class FitReport:
    law: Union[ScalingLaw, PurePowerLaw]
    residual_rms: float
    n_points: int
    converged: bool
    multistart_best_index: int = 0
    ci: Optional[dict[str, tuple[float, float]]] = None
    notes: tuple[str, ...] = ()


def _as_arrays(points) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DomainError("points must be a sequence of (x, y) pairs")
    x, y = arr[:, 0], arr[:, 1]
    if not (np.all(np.isfinite(arr)) and np.all(x > 0) and np.all(y > 0)):
        raise DomainError("all coordinates must be finite and positive")
    return x, y


def _plus_const_residuals(params, ln_x, ln_loss, weight_fn=None):
    linf, ln_x0, alpha = params
    pred = linf + np.exp(alpha * (ln_x0 - ln_x))
    res = np.log(pred) - ln_loss
    if weight_fn is not None:
        res = res * np.sqrt(weight_fn(res))
    return res


def _plus_const_jacobian(params, ln_x, ln_loss, weight_fn=None):
    linf, ln_x0, alpha = params
    red = np.exp(alpha * (ln_x0 - ln_x))
    pred = linf + red
    jac = np.empty((len(ln_x), 3))
    jac[:, 0] = 1.0 / pred
    jac[:, 1] = alpha * red / pred
    jac[:, 2] = (ln_x0 - ln_x) * red / pred
    if weight_fn is not None:
        # The asymmetry weight is piecewise constant in the residual sign.
        res = np.log(pred) - ln_loss
        jac *= np.sqrt(weight_fn(res))[:, None]
    return jac


def fit_power_plus_const(
    points,
    opts: FitOptions = FitOptions(),
    variable: Variable = Variable.COMPUTE,
    loss_unit: LossUnit = LossUnit.NATS_PER_TOKEN,
    _weight_fn=None,
) -> FitReport:
    """Fit loss = L_inf + (x0/x)**alpha by log-space least squares.

    L_inf is constrained to [0, min loss) through bounds; the gap below the
    minimum observed loss is 1e-3 of the loss range, which also regularizes
    the degenerate alpha -> 0 direction.
    """
    x, loss = _as_arrays(points)
    if len(x) < 4:
        raise InsufficientDataError(f"need >= 4 points, got {len(x)}")
    if len(np.unique(x)) < 3:
        raise InsufficientDataError("need >= 3 distinct x values")
    loss_range = loss.max() - loss.min()
    if loss_range == 0.0:
        raise DegenerateDataError("all losses equal: exponent is unidentifiable")

    ln_x = np.log(x)
    ln_loss = np.log(loss)
    # Keep L_inf strictly below the minimum observed loss.  The gap is 1e-3
    # of the loss range, but when losses span decades the tail can pin the
    # constant far tighter than that, so cap it at a relative epsilon of the
    # minimum rather than excluding the true value.
    gap = min(1e-3 * loss_range, 1e-12 * loss.min())
    linf_upper = loss.min() - gap
    linf_starts = np.linspace(0.0, 0.999 * loss.min(), opts.linf_grid_size)
    linf_starts = np.minimum(linf_starts, linf_upper)

    best = None  # (cost, alpha, start_index, result)
    start_index = -1
    for linf0 in linf_starts:
        red = np.clip(loss - linf0, 1e-300, None)
        ln_red = np.log(red)
        for alpha0 in opts.alpha_starts:
            start_index += 1
            # Given (linf0, alpha0), the log-reducible is alpha*(ln_x0 - ln_x),
            # so a closed-form ln_x0 start drops out of the mean.
            ln_x0_0 = float(np.mean(ln_x + ln_red / alpha0))
            p0 = np.array([linf0, ln_x0_0, max(min(alpha0, ALPHA_UPPER), ALPHA_LOWER)])
            try:
                result = least_squares(
                    _plus_const_residuals,
                    p0,
                    jac=_plus_const_jacobian,
                    args=(ln_x, ln_loss, _weight_fn),
                    bounds=([0.0, -745.0, ALPHA_LOWER], [linf_upper, 745.0, ALPHA_UPPER]),
                    method="trf",
                    max_nfev=opts.max_iterations * 10,
                    xtol=opts.tolerance,
                    ftol=opts.tolerance,
                    gtol=opts.tolerance,
                )
            except Exception:
                continue
            if not np.all(np.isfinite(result.x)) or not math.isfinite(result.cost):
                continue
            key = (result.cost, result.x[2], start_index)
            if best is None or key < best[0]:
                best = (key, result)

    if best is None:
        law = ScalingLaw(0.0, 1.0, 1.0, variable, loss_unit)
        return FitReport(law, math.inf, len(x), converged=False)

    (_, _, best_index), result = best
    linf, ln_x0, alpha = result.x
    law = ScalingLaw(float(linf), float(np.exp(ln_x0)), float(alpha), variable, loss_unit)
    res = _plus_const_residuals(result.x, ln_x, ln_loss)
    rms = float(np.sqrt(np.mean(res ** 2)))
    return FitReport(law, rms, len(x), converged=bool(result.success), multistart_best_index=best_index)


def fit_pure_power(points) -> FitReport:
    """Ordinary least squares of ln y on ln x; returns y = k * x**m."""
    x, y = _as_arrays(points)
    if len(x) < 2 or len(np.unique(x)) < 2:
        raise InsufficientDataError("need >= 2 points with >= 2 distinct x values")
    ln_x, ln_y = np.log(x), np.log(y)
    m, ln_k = np.polyfit(ln_x, ln_y, 1)
    law = PurePowerLaw(float(np.exp(ln_k)), float(m))
    res = ln_k + m * ln_x - ln_y
    rms = float(np.sqrt(np.mean(res ** 2)))
    return FitReport(law, rms, len(x), converged=True)


#: Tolerance (nats) by which a converged below-frontier fit may exceed a hull point.
FRONTIER_SLACK_NATS = 1e-3


def fit_below_frontier(hull_points, opts: FitOptions = FitOptions()) -> FitReport:
    """Power-plus-constant fit with over-predictions penalized by opts.asymmetry.

    Residuals where the fitted curve lies above an observed hull point are
    weighted opts.asymmetry times as heavily as under-predictions, pushing
    the curve below the frontier.  After fitting, any prediction exceeding
    an observation by more than FRONTIER_SLACK_NATS marks the report
    non-converged.
    """
    w = opts.asymmetry
    if not (w > 0 and math.isfinite(w)):
        raise DomainError("asymmetry weight must be positive and finite")
    weight_fn = None if w == 1.0 else (lambda res: np.where(res > 0, w, 1.0))
    report = fit_power_plus_const(points=hull_points, opts=opts, _weight_fn=weight_fn)
    if not report.converged:
        return report
    x, loss = _as_arrays(hull_points)
    from .lawcore import eval_law

    pred = np.array([eval_law(report.law, xi) for xi in x])
    if np.any(pred > loss + FRONTIER_SLACK_NATS):
        return FitReport(
            report.law, report.residual_rms, report.n_points, converged=False,
            multistart_best_index=report.multistart_best_index,
            notes=("prediction exceeds frontier",),
        )
    return report


_FIT_KINDS = {
    "power_plus_const": lambda pts, opts: fit_power_plus_const(pts, opts),
    "pure_power": lambda pts, opts: fit_pure_power(pts),
    "below_frontier": fit_below_frontier,
}

_PLUS_CONST_PARAMS = ("irreducible", "scale", "exponent")
_PURE_PARAMS = ("coefficient", "exponent")


def _law_params(law) -> dict[str, float]:
    if isinstance(law, ScalingLaw):
        return {"irreducible": law.irreducible, "scale": law.scale, "exponent": law.exponent}
    return {"coefficient": law.coefficient, "exponent": law.exponent}


def bootstrap_ci(points, fit_kind: str, opts: FitOptions = FitOptions()) -> FitReport:
    """Resample points with replacement, refit, and report percentile CIs.

    Deterministic given opts.seed.  Replicates whose refit raises are
    dropped and counted; more than 20% failures is an error.
    """
    if fit_kind not in _FIT_KINDS:
        raise DomainError(f"unknown fit kind {fit_kind!r}")
    if opts.bootstrap_replicates < 50:
        raise DomainError("bootstrap needs >= 50 replicates")
    fitter = _FIT_KINDS[fit_kind]
    base = fitter(points, opts)

    pts = np.asarray(points, dtype=float)
    n = len(pts)
    rng = np.random.default_rng(opts.seed)
    # Draw every replicate's index set up front, in fixed order, so results
    # are independent of any execution interleaving.
    index_sets = rng.integers(0, n, size=(opts.bootstrap_replicates, n))
    samples: list[dict[str, float]] = []
    failures = 0
    for idx in index_sets:
        try:
            rep = fitter(pts[idx], opts)
        except Exception:
            failures += 1
            continue
        if not rep.converged:
            failures += 1
            continue
        samples.append(_law_params(rep.law))
    if failures > 0.2 * opts.bootstrap_replicates:
        raise DegenerateDataError(
            f"{failures}/{opts.bootstrap_replicates} bootstrap replicates failed"
        )

    lo_p, hi_p = opts.ci_percentiles
    point = _law_params(base.law)
    ci: dict[str, tuple[float, float]] = {}
    for name in point:
        vals = np.array([s[name] for s in samples])
        lo, hi = np.percentile(vals, [lo_p, hi_p])
        # CIs must bracket the point estimate.
        ci[name] = (min(float(lo), point[name]), max(float(hi), point[name]))
    return FitReport(
        base.law, base.residual_rms, base.n_points, base.converged,
        multistart_best_index=base.multistart_best_index, ci=ci,
        notes=base.notes + ((f"{failures} bootstrap replicates dropped",) if failures else ()),
    )
