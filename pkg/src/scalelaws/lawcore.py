"""Core scaling-law data model: laws, run records, and compute accounting.

Everything in this module is an immutable value type or a pure function,
safe for unrestricted concurrent use.  Losses are always stored in
nats-per-token; per-example views are derived via :func:`rescale_loss`
and never stored twice.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Optional

from .errors import DomainError

#: FLOPs in one petaflop/s-day (1e15 FLOP/s x 86 400 s).
PF_DAY_FLOPS = 8.64e19

#: Multiplier in the total-training-FLOPs approximation C = 6*N*E
#: (2 for add-multiply, 3 for forward plus backward).
FLOPS_PER_PARAM_TOKEN = 6.0


class Variable(enum.Enum):
    """The abscissa a scaling law is expressed in."""

    MODEL_SIZE = "model-size"        # non-embedding parameters N
    COMPUTE = "compute"              # training compute C in PF-days
    DATASET_SIZE = "data"            # dataset size D in tokens
    CONTEXT_POSITION = "position"    # token position t, dimensionless


class LossUnit(enum.Enum):
    NATS_PER_TOKEN = "nats-per-token"
    NATS_PER_EXAMPLE = "nats-per-example"


@dataclass(frozen=True)
class ScalingLaw:
    """Power-law-plus-constant loss trend  L(x) = irreducible + (scale/x)**exponent."""

    irreducible: float
    scale: float
    exponent: float
    variable: Variable = Variable.COMPUTE
    loss_unit: LossUnit = LossUnit.NATS_PER_TOKEN
    tokens_per_example: Optional[float] = None

    def __post_init__(self):
        if not (self.irreducible >= 0.0 and math.isfinite(self.irreducible)):
            raise DomainError(f"irreducible loss must be finite and >= 0, got {self.irreducible}")
        if not (self.scale > 0.0 and math.isfinite(self.scale)):
            raise DomainError(f"scale must be finite and > 0, got {self.scale}")
        if not (self.exponent > 0.0 and math.isfinite(self.exponent)):
            raise DomainError(f"exponent must be finite and > 0, got {self.exponent}")
        if self.loss_unit is LossUnit.NATS_PER_EXAMPLE and self.tokens_per_example is None:
            raise DomainError("per-example laws must record tokens_per_example")


@dataclass(frozen=True)
class PurePowerLaw:
    """y = coefficient * x**exponent; log-log linear."""

    coefficient: float
    exponent: float
    input_units: str = ""
    output_units: str = ""

    def __post_init__(self):
        if not (self.coefficient > 0.0 and math.isfinite(self.coefficient)):
            raise DomainError(f"coefficient must be finite and > 0, got {self.coefficient}")
        if not math.isfinite(self.exponent):
            raise DomainError(f"exponent must be finite, got {self.exponent}")

    def eval(self, x: float) -> float:
        _check_positive_finite(x)
        return self.coefficient * x ** self.exponent


class Split(enum.Enum):
    TRAIN = "train"
    TEST = "test"


@dataclass(frozen=True)
class SeriesPoint:
    step: int
    tokens: float
    loss: float
    split: Split = Split.TEST


@dataclass(frozen=True)
class RunRecord:
    """One training run: model size plus an ordered (step, tokens, loss) series."""

    run_id: str
    n_params: int
    series: tuple[SeriesPoint, ...]
    batch_tokens: Optional[int] = None

    def __post_init__(self):
        if self.n_params <= 0:
            raise DomainError(f"run {self.run_id}: n_params must be > 0")
        if self.batch_tokens is not None and self.batch_tokens <= 0:
            raise DomainError(f"run {self.run_id}: batch_tokens must be > 0")
        object.__setattr__(self, "series", tuple(self.series))
        by_split: dict[Split, SeriesPoint] = {}
        for pt in self.series:
            prev = by_split.get(pt.split)
            if prev is not None:
                if pt.step <= prev.step:
                    raise DomainError(f"run {self.run_id}: steps must be strictly increasing")
                if pt.tokens <= prev.tokens:
                    raise DomainError(f"run {self.run_id}: tokens must be strictly increasing")
            if not (pt.loss > 0.0 and math.isfinite(pt.loss)):
                raise DomainError(f"run {self.run_id}: losses must be finite and > 0")
            if self.batch_tokens is not None and pt.tokens != pt.step * self.batch_tokens:
                raise DomainError(
                    f"run {self.run_id}: tokens must equal step * batch_tokens at step {pt.step}"
                )
            by_split[pt.split] = pt


def _check_positive_finite(x: float) -> None:
    if not (isinstance(x, (int, float)) and math.isfinite(x) and x > 0):
        raise DomainError(f"argument must be positive and finite, got {x!r}")


def eval_law(law: ScalingLaw, x: float) -> float:
    """Loss in nats at abscissa ``x``: irreducible + (scale/x)**exponent."""
    _check_positive_finite(x)
    return law.irreducible + (law.scale / x) ** law.exponent


def reducible_at(law: ScalingLaw, x: float) -> float:
    """The power-law term (scale/x)**exponent, read as a KL-divergence estimate."""
    _check_positive_finite(x)
    return (law.scale / x) ** law.exponent


def rescale_loss(law: ScalingLaw, k: float) -> ScalingLaw:
    """Convert a nats-per-token law to nats-per-example with ``k`` tokens per example.

    Satisfies eval(law', x) == k * eval(law, x) for every x: the irreducible
    loss picks up a factor k and the scale a factor k**(1/exponent).
    """
    _check_positive_finite(k)
    if law.loss_unit is not LossUnit.NATS_PER_TOKEN:
        raise DomainError("rescale_loss expects a nats-per-token law")
    return replace(
        law,
        irreducible=k * law.irreducible,
        scale=law.scale * k ** (1.0 / law.exponent),
        loss_unit=LossUnit.NATS_PER_EXAMPLE,
        tokens_per_example=float(k),
    )


def compute_pf_days(n_params: float, tokens: float) -> float:
    """Total training compute 6*N*E converted to PF-days."""
    _check_positive_finite(n_params)
    _check_positive_finite(tokens)
    return FLOPS_PER_PARAM_TOKEN * n_params * tokens / PF_DAY_FLOPS


@dataclass(frozen=True)
class RescaleComparison:
    """Per-example law derived by rescaling, checked against reference values."""

    derived: ScalingLaw
    reference_irreducible: float
    reference_scale: float
    irreducible_rel_diff: float
    scale_rel_diff: float
    irreducible_discrepant: bool
    scale_discrepant: bool


def compare_rescaled(
    law: ScalingLaw,
    k: float,
    reference_irreducible: float,
    reference_scale: float,
    irreducible_rtol: float = 0.005,
    scale_rtol: float = 0.05,
) -> RescaleComparison:
    """Rescale ``law`` to per-example units and compare against reference values.

    The discrepancy flags fire when the derived constants disagree with the
    references beyond the given relative tolerances; the derived values are
    always reported so a suspect reference can be audited rather than guessed.
    """
    derived = rescale_loss(law, k)
    irr_diff = abs(derived.irreducible - reference_irreducible) / abs(reference_irreducible)
    scale_diff = abs(derived.scale - reference_scale) / abs(reference_scale)
    return RescaleComparison(
        derived=derived,
        reference_irreducible=reference_irreducible,
        reference_scale=reference_scale,
        irreducible_rel_diff=irr_diff,
        scale_rel_diff=scale_diff,
        irreducible_discrepant=irr_diff > irreducible_rtol,
        scale_discrepant=scale_diff > scale_rtol,
    )
