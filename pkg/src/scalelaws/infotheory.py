"""Mutual information and infogain from paired losses, logarithmic
model-size scaling fits, and the closed-form context-position model.

All quantities are in nats (natural log throughout).  Negative MI and
over-unity infogain are diagnostic signals of measurement noise or
non-translation-invariant evaluation; they are flagged, never clamped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError
from .lawcore import Variable
from .powerfit import FitOptions, fit_power_plus_const


@dataclass(frozen=True)
class MIEstimate:
    mi: float
    infogain: Optional[float] = None
    over_unity: bool = False
    noise_flag: bool = False
    source: str = "paired-loss"


def mutual_info(loss_unconditioned: float, loss_conditioned: float) -> MIEstimate:
    """Empirical MI as the loss drop from conditioning on the other modality.

    A negative value signals measurement noise and is flagged, not clamped.
    """
    for v in (loss_unconditioned, loss_conditioned):
        if not (math.isfinite(v) and v >= 0):
            raise DomainError(f"losses must be finite and >= 0, got {v}")
    mi = loss_unconditioned - loss_conditioned
    return MIEstimate(mi=mi, noise_flag=mi < 0)


def infogain(mi: float, loss_text: float) -> MIEstimate:
    """Ratio of mutual information to the lower-entropy modality's loss.

    Exact information theory bounds this by 1; apparent violations are
    possible for non-translation-invariant evaluations, so values above 1
    are flagged rather than rejected.
    """
    if not (loss_text > 0 and math.isfinite(loss_text)):
        raise DomainError(f"text loss must be positive and finite, got {loss_text}")
    ratio = mi / loss_text
    return MIEstimate(mi=mi, infogain=ratio, over_unity=ratio > 1, noise_flag=mi < 0)


def words_equivalent(mi: float, nats_per_word: float) -> float:
    """How many words of text carry the same information as ``mi`` nats."""
    if not (nats_per_word > 0 and math.isfinite(nats_per_word)):
        raise DomainError(f"nats_per_word must be positive and finite, got {nats_per_word}")
    return mi / nats_per_word


@dataclass(frozen=True)
class LogMIFit:
    """value(N) = lam * ln(N / n_c)."""

    lam: float
    n_c: float
    residual_rms: float
    increasing: bool = True

    def eval(self, n: float) -> float:
        if not (n > 0 and math.isfinite(n)):
            raise DomainError(f"N must be positive and finite, got {n}")
        return self.lam * math.log(n / self.n_c)


def fit_log_mi(points) -> LogMIFit:
    """Least squares of value on ln N; a non-increasing trend is flagged, not raised."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DomainError("points must be a sequence of (N, value) pairs")
    n, v = arr[:, 0], arr[:, 1]
    if not (np.all(np.isfinite(arr)) and np.all(n > 0)):
        raise DomainError("model sizes must be positive and values finite")
    if len(np.unique(n)) < 2:
        raise DomainError("need >= 2 distinct model sizes")
    ln_n = np.log(n)
    lam, intercept = np.polyfit(ln_n, v, 1)
    if lam != 0:
        n_c = float(np.exp(-intercept / lam))
    else:
        n_c = math.nan
    res = lam * ln_n + intercept - v
    rms = float(np.sqrt(np.mean(res ** 2)))
    return LogMIFit(lam=float(lam), n_c=n_c, residual_rms=rms, increasing=bool(lam > 0))


def invert_log_mi(fit: LogMIFit, target: float) -> float:
    """Model size at which the fitted trend reaches ``target``: n_c * exp(target/lam)."""
    if not fit.lam > 0:
        raise DomainError("inversion requires an increasing trend (lam > 0)")
    return fit.n_c * math.exp(target / fit.lam)


def gen_harmonic(t: int, p: float) -> float:
    """Generalized harmonic number: sum of k**(-p) for k = 1..t.

    Summed in ascending order with compensated summation so closed-form
    identities hold to 1e-12 relative even at large t.
    """
    if not (isinstance(t, (int, np.integer)) and t >= 1):
        raise DomainError(f"t must be an integer >= 1, got {t!r}")
    if not (p >= 0 and math.isfinite(p)):
        raise DomainError(f"p must be finite and >= 0, got {p}")
    return math.fsum(k ** -p for k in range(1, t + 1))


@dataclass(frozen=True)
class ContextModel:
    """Per-position loss profile loss(t) = l_model + (l_unigram - l_model)/t**p."""

    l_model: float
    l_unigram: float
    p: float
    horizon: int

    def __post_init__(self):
        if not (0 < self.l_model < self.l_unigram):
            raise DomainError("need 0 < l_model < l_unigram")
        if not (0 < self.p <= 1):
            raise DomainError("context decay exponent must lie in (0, 1]")
        if self.horizon < 1:
            raise DomainError("horizon must be >= 1")


def context_loss(t: float, model: ContextModel) -> float:
    """Loss at context position t: unigram entropy at t=1, l_model asymptotically."""
    if not (t >= 1 and math.isfinite(t)):
        raise DomainError(f"position must be >= 1, got {t}")
    return model.l_model + (model.l_unigram - model.l_model) / t ** model.p


def context_mi(model: ContextModel) -> float:
    """Closed-form MI between the first and second halves of a 2T-token window.

    Equals (2*H_T - H_2T) * (l_unigram - l_model) with H the generalized
    harmonic number at power p; identical to the term-by-term sum
    sum_t [t**-p - (t+T)**-p] * (l_unigram - l_model).
    """
    t, p = model.horizon, model.p
    h_t = gen_harmonic(t, p)
    h_2t = gen_harmonic(2 * t, p)
    return (2 * h_t - h_2t) * (model.l_unigram - model.l_model)


def context_infogain(model: ContextModel) -> float:
    """MI between window halves divided by the loss on the second half."""
    t, p = model.horizon, model.p
    h_t = gen_harmonic(t, p)
    h_2t = gen_harmonic(2 * t, p)
    span = model.l_unigram - model.l_model
    denom = t * model.l_model + (h_2t - h_t) * span
    assert denom > 0, "denominator cannot vanish under model invariants"
    return (2 * h_t - h_2t) * span / denom


def fit_context_profile(losses, opts: FitOptions = FitOptions()) -> ContextModel:
    """Recover (l_model, l_unigram, p) from a per-position loss profile.

    Fits the profile as power-plus-constant in position; the unigram entropy
    is the fitted value at t=1.
    """
    arr = np.asarray(losses, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DomainError("losses must be a sequence of (position, loss) pairs")
    if np.any(arr[:, 0] < 1):
        raise DomainError("positions must be >= 1")
    report = fit_power_plus_const(losses, opts, variable=Variable.CONTEXT_POSITION)
    law = report.law
    l_model = law.irreducible
    l_unigram = l_model + law.scale ** law.exponent  # reducible loss at t = 1
    horizon = int(arr[:, 0].max())
    return ContextModel(l_model=l_model, l_unigram=l_unigram, p=law.exponent, horizon=horizon)
