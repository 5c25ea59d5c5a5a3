"""Forecasting, entropy/KL decomposition, the data-vs-compute consistency
intersection with sensitivity bands, percentile trends, and scan optima.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, NotDecomposableError
from .frontier import tokens_compute_law
from .lawcore import PurePowerLaw, ScalingLaw, Variable, reducible_at
from .powerfit import FitOptions, FitReport, fit_power_plus_const

#: Loss percentiles tracked by default in per-example trend analysis.
DEFAULT_PERCENTILES = (1, 5, 20, 50, 80, 95, 99)

#: Default bisection bracket (PF-days) and tolerance (in ln C) for the
#: reducible-curve intersection; every report records the values in effect.
DEFAULT_BRACKET = (1e-12, 1e12)
DEFAULT_LN_TOL = 1e-9

#: Interpreting a model-size law's constant as an entropy assumes all models
#: reached convergence, which the largest rarely do.
MODEL_SIZE_CAVEAT = "model-size trend: entropy estimate assumes training to convergence"


def forecast_x_for_reducible(law: ScalingLaw, target: float) -> float:
    """Abscissa at which the law's reducible loss equals ``target`` nats.

    Inverse of reducible_at: returns scale * target**(-1/exponent).
    """
    if not (target > 0 and math.isfinite(target)):
        raise DomainError(f"target must be positive and finite, got {target}")
    return law.scale * target ** (-1.0 / law.exponent)


@dataclass(frozen=True)
class Decomposition:
    """Entropy / KL split of a fitted power-plus-constant law."""

    entropy_estimate: float
    kl_law: ScalingLaw
    caveats: tuple[str, ...] = ()


def decompose(fit: FitReport) -> Decomposition:
    """Split a converged fit into its entropy estimate and reducible KL law."""
    if not isinstance(fit.law, ScalingLaw):
        raise NotDecomposableError("pure power law has no constant term to decompose")
    if not fit.converged:
        raise DomainError("cannot decompose a non-converged fit")
    law = fit.law
    kl_law = ScalingLaw(
        0.0, law.scale, law.exponent, law.variable, law.loss_unit, law.tokens_per_example
    )
    caveats = (MODEL_SIZE_CAVEAT,) if law.variable is Variable.MODEL_SIZE else ()
    return Decomposition(entropy_estimate=law.irreducible, kl_law=kl_law, caveats=caveats)


@dataclass(frozen=True)
class ConsistencyReport:
    intersection_compute: Optional[float]   # PF-days; None when no sign change
    intersection_tokens: Optional[float]
    band: tuple[Optional[float], Optional[float]]
    residual: float
    no_intersection: bool
    band_brackets_point: bool
    bracket: tuple[float, float] = DEFAULT_BRACKET
    ln_tolerance: float = DEFAULT_LN_TOL


def _reducible_gap_fn(law_data: ScalingLaw, law_compute: ScalingLaw, compute_for_data: PurePowerLaw):
    """ln reducible L(C) minus ln reducible L(D(C)), as a function of ln C."""
    ln_a = math.log(compute_for_data.coefficient)
    gamma = compute_for_data.exponent

    def gap(ln_c: float) -> float:
        c = math.exp(ln_c)
        d = math.exp((ln_c - ln_a) / gamma)
        return math.log(reducible_at(law_compute, c)) - math.log(reducible_at(law_data, d))

    return gap


def _find_intersection(gap, bracket, ln_tol):
    """Bisect for a sign change of ``gap`` over a log grid spanning ``bracket``."""
    ln_lo, ln_hi = math.log(bracket[0]), math.log(bracket[1])
    grid = np.linspace(ln_lo, ln_hi, 256)
    vals = np.array([gap(g) for g in grid])
    # Curves identical up to rounding: the intersection is undefined, and
    # float flicker in the sign must not manufacture one.
    if np.max(np.abs(vals)) <= 1e-12:
        return None, math.nan
    sign = np.sign(vals)
    idx = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    exact = np.nonzero(vals == 0.0)[0]
    if len(exact):
        return float(grid[exact[0]]), 0.0
    if len(idx) == 0:
        return None, math.nan
    lo, hi = grid[idx[0]], grid[idx[0] + 1]
    while hi - lo > ln_tol:
        mid = 0.5 * (lo + hi)
        if gap(lo) * gap(mid) <= 0:
            hi = mid
        else:
            lo = mid
    mid = 0.5 * (lo + hi)
    return float(mid), abs(gap(mid))


def consistency_check(
    law_data: ScalingLaw,
    nopt: PurePowerLaw,
    law_compute: ScalingLaw,
    perturb: float = 0.05,
    bracket: tuple[float, float] = DEFAULT_BRACKET,
    ln_tol: float = DEFAULT_LN_TOL,
) -> ConsistencyReport:
    """Locate where the extrapolated L(C) trend crosses the data-limited trend.

    The dataset-size law is mapped into compute space through the
    single-epoch C(D) relation implied by ``nopt``, and the intersection is
    solved on the reducible components only: the two fits' irreducible
    constants differ numerically, and intersecting full losses silently
    gives a different answer.  The band repeats the solve with the
    optimal-model-size exponent perturbed by +-perturb (coefficient fixed).
    """
    if not (0 < nopt.exponent < 1):
        raise DomainError("nopt exponent must lie in (0, 1)")
    if perturb < 0:
        raise DomainError("perturb must be >= 0")

    def solve(beta):
        c_of_d = tokens_compute_law(PurePowerLaw(nopt.coefficient, beta))
        gap = _reducible_gap_fn(law_data, law_compute, c_of_d)
        ln_c, resid = _find_intersection(gap, bracket, ln_tol)
        if ln_c is None:
            return None, None, resid
        c = math.exp(ln_c)
        d = (c / c_of_d.coefficient) ** (1.0 / c_of_d.exponent)
        return c, d, resid

    c_star, d_star, residual = solve(nopt.exponent)
    band_vals = []
    for beta in (nopt.exponent * (1 - perturb), nopt.exponent * (1 + perturb)):
        c_b, _, _ = solve(beta)
        band_vals.append(c_b)
    band = tuple(band_vals)
    brackets = (
        c_star is not None
        and band[0] is not None
        and band[1] is not None
        and min(band) <= c_star <= max(band)
    )
    return ConsistencyReport(
        intersection_compute=c_star,
        intersection_tokens=d_star,
        band=band,
        residual=residual if c_star is not None else math.nan,
        no_intersection=c_star is None,
        band_brackets_point=bool(brackets),
        bracket=bracket,
        ln_tolerance=ln_tol,
    )


def nearest_rank_percentile(sorted_values: np.ndarray, p: float) -> float:
    """Nearest-rank percentile: the ceil(p/100 * n)-th smallest value."""
    n = len(sorted_values)
    rank = max(1, math.ceil(p / 100.0 * n))
    return float(sorted_values[min(rank, n) - 1])


def percentile_trends(
    model_sizes: Sequence[float],
    loss_matrix,
    percentiles: Sequence[float] = DEFAULT_PERCENTILES,
    opts: FitOptions = FitOptions(),
) -> list[FitReport]:
    """Fit a power-plus-constant model-size trend per loss percentile.

    ``loss_matrix`` is indexed (model size, example); percentiles use the
    deterministic nearest-rank definition, no interpolation.
    """
    try:
        matrix = np.asarray(loss_matrix, dtype=float)
    except ValueError as exc:
        raise DomainError(f"loss matrix must be rectangular: {exc}") from None
    if matrix.ndim != 2:
        raise DomainError("loss matrix must be rectangular (model size x example)")
    sizes = np.asarray(model_sizes, dtype=float)
    if matrix.shape[0] != len(sizes):
        raise DomainError("loss matrix row count must match model_sizes")
    if len(sizes) < 4:
        raise DomainError("need >= 4 model sizes")
    if matrix.shape[1] < 100:
        raise DomainError("need >= 100 examples")
    for p in percentiles:
        if not (0 < p < 100):
            raise DomainError(f"percentiles must lie in (0, 100), got {p}")

    sorted_rows = np.sort(matrix, axis=1)
    reports = []
    for p in percentiles:
        ys = [nearest_rank_percentile(row, p) for row in sorted_rows]
        reports.append(
            fit_power_plus_const(list(zip(sizes, ys)), opts, variable=Variable.MODEL_SIZE)
        )
    return reports


@dataclass(frozen=True)
class ScanOptimum:
    ratio: float
    loss: float
    curvature: float
    at_boundary: bool


def scan_optimum(points) -> ScanOptimum:
    """Locate the minimum of a hyperparameter scan by a local log-quadratic.

    Fits an exact quadratic in ln(ratio) through the scan minimum and its two
    neighbors; the minimizer is clamped to the scanned range.  A boundary
    minimum or negative curvature yields an at_boundary report instead.
    """
    pts = sorted((float(r), float(l)) for r, l in points)
    if len(pts) < 3 or len({r for r, _ in pts}) < 3:
        raise DomainError("need >= 3 points with distinct ratios")
    ratios = np.array([r for r, _ in pts])
    losses = np.array([l for _, l in pts])
    if np.any(ratios <= 0):
        raise DomainError("ratios must be positive")
    i_min = int(np.argmin(losses))
    if i_min == 0 or i_min == len(pts) - 1:
        return ScanOptimum(ratios[i_min], losses[i_min], math.nan, at_boundary=True)
    sel = slice(i_min - 1, i_min + 2)
    u = np.log(ratios[sel])
    a, b, c = np.polyfit(u, losses[sel], 2)
    if a <= 0:
        return ScanOptimum(ratios[i_min], losses[i_min], float(2 * a), at_boundary=True)
    u_star = -b / (2 * a)
    u_star = min(max(u_star, math.log(ratios[0])), math.log(ratios[-1]))
    loss_star = a * u_star ** 2 + b * u_star + c
    return ScanOptimum(float(math.exp(u_star)), float(loss_star), float(2 * a), at_boundary=False)


@dataclass(frozen=True)
class TransferGap:
    """Asymptotic KL estimate between a transfer and a training distribution.

    The transfer law's constant is the sum of the transfer distribution's
    entropy and the asymptotic KL; without an entropy estimate only the
    symbolic decomposition can be reported.
    """

    transfer_irreducible: float
    entropy: Optional[float]
    kl_estimate: Optional[float]
    entropy_unknown: bool
    negative_kl_warning: bool = False


def transfer_gap(fit_transfer: FitReport, entropy: Optional[float] = None) -> TransferGap:
    if not isinstance(fit_transfer.law, ScalingLaw):
        raise NotDecomposableError("transfer law must be power-plus-constant")
    if not fit_transfer.converged:
        raise DomainError("transfer fit did not converge")
    linf = fit_transfer.law.irreducible
    if entropy is None:
        return TransferGap(linf, None, None, entropy_unknown=True)
    kl = linf - entropy
    return TransferGap(linf, entropy, kl, entropy_unknown=False, negative_kl_warning=kl < 0)
