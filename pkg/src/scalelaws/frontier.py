"""Compute-efficient frontiers: Pareto extraction, log-log convex hulls,
optimal-model-size fits, and the token/data scaling consequences.

No critical-batch-size compute adjustment is applied; RunRecord keeps
batch_tokens so the adjustment can be added later.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, InsufficientDataError, NoSolutionError
from .lawcore import PF_DAY_FLOPS, PurePowerLaw, RunRecord, Split, compute_pf_days
from .powerfit import FitReport, fit_pure_power


@dataclass(frozen=True)
class FrontierPoint:
    compute: float   # PF-days
    loss: float      # nats
    run_id: str
    n_params: int


@dataclass(frozen=True)
class Frontier:
    """Pareto points over (compute, loss), with the lower log-log convex hull."""

    pareto: tuple[FrontierPoint, ...]
    hull: tuple[FrontierPoint, ...] = ()


def _median_smooth(losses: np.ndarray, window: int) -> np.ndarray:
    if window <= 1:
        return losses
    half = window // 2
    out = np.empty_like(losses)
    for i in range(len(losses)):
        lo, hi = max(0, i - half), min(len(losses), i + half + 1)
        out[i] = np.median(losses[lo:hi])
    return out


def build_pareto(runs: list[RunRecord], split: Split = Split.TEST, smooth_window: int = 0) -> Frontier:
    """Merge all runs' (compute, loss) points and keep the running loss minimum.

    Ties in compute keep the lower loss, then the smaller model (cheaper
    model preferred).  An optional median-of-k smoothing window can be
    applied per run before merging (default off: raw logged points).
    """
    if not runs:
        raise DomainError("need at least one run")
    candidates: list[FrontierPoint] = []
    for run in runs:
        pts = [p for p in run.series if p.split is split]
        if not pts:
            continue
        losses = _median_smooth(np.array([p.loss for p in pts]), smooth_window)
        for p, loss in zip(pts, losses):
            candidates.append(
                FrontierPoint(compute_pf_days(run.n_params, p.tokens), float(loss), run.run_id, run.n_params)
            )
    if not candidates:
        raise DomainError(f"no series points for split {split.value}")
    candidates.sort(key=lambda fp: (fp.compute, fp.loss, fp.n_params))
    pareto: list[FrontierPoint] = []
    best = math.inf
    for fp in candidates:
        if pareto and fp.compute == pareto[-1].compute:
            continue  # same compute: the sort already put the better point first
        if fp.loss < best:
            pareto.append(fp)
            best = fp.loss
    return Frontier(pareto=tuple(pareto))


def hull_points(frontier: Frontier) -> Frontier:
    """Lower convex hull of the Pareto set in (ln C, ln loss) by monotone chain."""
    if not frontier.pareto:
        raise DomainError("pareto set is empty")
    pts = frontier.pareto
    if len(pts) <= 2:
        return replace(frontier, hull=tuple(pts))
    xs = np.log([p.compute for p in pts])
    ys = np.log([p.loss for p in pts])
    # Collinear points (exact power laws are log-log lines) stay on the hull,
    # so only pop when the middle point is above the chord beyond tolerance.
    tol = 1e-9
    hull_idx: list[int] = []
    for i in range(len(pts)):
        while len(hull_idx) >= 2:
            i0, i1 = hull_idx[-2], hull_idx[-1]
            cross = (xs[i1] - xs[i0]) * (ys[i] - ys[i0]) - (ys[i1] - ys[i0]) * (xs[i] - xs[i0])
            if cross < -tol:  # i1 lies above the segment i0 -> i: drop it
                hull_idx.pop()
            else:
                break
        hull_idx.append(i)
    return replace(frontier, hull=tuple(pts[i] for i in hull_idx))


def fit_nopt(frontier: Frontier) -> FitReport:
    """Fit N_opt(C) as a pure power law over the hull's (compute, n_params) pairs."""
    hull = frontier.hull
    distinct_n = {p.n_params for p in hull}
    if len(hull) < 3 or len(distinct_n) < 3:
        raise InsufficientDataError("need >= 3 hull points with >= 3 distinct model sizes")
    return fit_pure_power([(p.compute, p.n_params) for p in hull])


def data_scaling_exponent(beta: float) -> float:
    """Exponent of N in the compute-optimal dataset-size relation D ~ N**((1-beta)/beta)."""
    if not (0.0 < beta < 1.0):
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    return (1.0 - beta) / beta


def tokens_compute_law(nopt: PurePowerLaw, flops_per_pf_day: float = PF_DAY_FLOPS) -> PurePowerLaw:
    """Invert N_opt(C) = k*C**beta into the single-epoch compute-for-data law C(D).

    Solves C * flops_per_pf_day = 6 * D * k * C**beta for C, giving
    C(D) = (6k/flops_per_pf_day)**(1/(1-beta)) * D**(1/(1-beta)) in PF-days.
    """
    beta = nopt.exponent
    if not (0.0 < beta < 1.0):
        raise NoSolutionError(f"no solution for beta outside (0, 1), got {beta}")
    gamma = 1.0 / (1.0 - beta)
    coeff = (6.0 * nopt.coefficient / flops_per_pf_day) ** gamma
    return PurePowerLaw(coeff, gamma, input_units="tokens", output_units="PF-days")
