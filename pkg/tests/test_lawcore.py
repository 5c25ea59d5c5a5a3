"""Law evaluation, rescaling, and compute accounting."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scalelaws.errors import DomainError
from scalelaws.lawcore import (
    FLOPS_PER_PARAM_TOKEN,
    PF_DAY_FLOPS,
    LossUnit,
    PurePowerLaw,
    RunRecord,
    ScalingLaw,
    SeriesPoint,
    Split,
    Variable,
    compare_rescaled,
    compute_pf_days,
    eval_law,
    reducible_at,
    rescale_loss,
)


class TestEvalLaw:
    def test_reducible_term_is_one_at_scale(self):
        law = ScalingLaw(3.13, 1.8e-8, 0.19)
        assert eval_law(law, 1.8e-8) == pytest.approx(4.13, rel=1e-12)

    def test_irreducible_asymptote(self):
        law = ScalingLaw(2.0, 5.0, 0.5)
        assert eval_law(law, 1e30) == pytest.approx(2.0, rel=1e-9)

    def test_hand_value(self):
        law = ScalingLaw(0.0, 4.0, 0.5)
        assert eval_law(law, 16.0) == pytest.approx(0.5, rel=1e-12)

    @pytest.mark.parametrize("x", [0.0, -1.0, math.inf, math.nan])
    def test_invalid_abscissa(self, x):
        law = ScalingLaw(1.0, 1.0, 0.5)
        with pytest.raises(DomainError):
            eval_law(law, x)

    @given(
        linf=st.floats(0.0, 10.0),
        scale=st.floats(1e-10, 1e10),
        alpha=st.floats(0.01, 2.0),
        x1=st.floats(1e-6, 1e12),
        factor=st.floats(1.0 + 1e-6, 1e6),
    )
    @settings(max_examples=200, deadline=None)
    def test_monotone_decreasing(self, linf, scale, alpha, x1, factor):
        law = ScalingLaw(linf, scale, alpha)
        y1, y2 = eval_law(law, x1), eval_law(law, x1 * factor)
        assert y1 >= y2
        # strict unless the decrement is lost to float rounding against y1
        drop = reducible_at(law, x1) * (1.0 - factor ** -alpha)
        if drop > 1e-12 * y1:
            assert y1 > y2


class TestReducible:
    def test_at_scale(self):
        assert reducible_at(ScalingLaw(3.13, 1.8e-8, 0.19), 1.8e-8) == pytest.approx(1.0)

    def test_per_image_one_nat_at_denominator(self):
        law = ScalingLaw(602.0, 1.9e3, 0.19)
        assert reducible_at(law, 1.9e3) == pytest.approx(1.0)

    @given(
        linf=st.floats(0.0, 10.0),
        scale=st.floats(1e-8, 1e8),
        alpha=st.floats(0.05, 1.5),
        x=st.floats(1e-6, 1e10),
    )
    @settings(max_examples=100, deadline=None)
    def test_decomposition_identity(self, linf, scale, alpha, x):
        law = ScalingLaw(linf, scale, alpha)
        total = eval_law(law, x)
        # cancellation tolerance scales with the total, not with linf
        assert total - reducible_at(law, x) == pytest.approx(linf, abs=1e-9 * total)


class TestRescale:
    def test_vq32_per_image(self):
        law = ScalingLaw(3.17, 2.6e-6, 0.12)
        out = rescale_loss(law, 1024)
        assert out.irreducible == pytest.approx(3.17 * 1024, rel=1e-12)
        assert out.scale == pytest.approx(2.6e-6 * 1024 ** (1 / 0.12), rel=1e-12)
        assert out.exponent == 0.12
        assert out.loss_unit is LossUnit.NATS_PER_EXAMPLE
        assert out.tokens_per_example == 1024.0

    def test_16x16_per_image(self):
        out = rescale_loss(ScalingLaw(2.64, 1.6e-8, 0.16), 768)
        # published per-image constants: 2026 and 1.7e10
        assert out.irreducible == pytest.approx(2026, rel=0.001)
        assert out.scale == pytest.approx(1.7e10, rel=0.02)

    def test_identity_at_k_one(self):
        law = ScalingLaw(2.0, 3.0, 0.4)
        out = rescale_loss(law, 1)
        assert (out.irreducible, out.scale, out.exponent) == (2.0, 3.0, 0.4)

    def test_rejects_per_example_input(self):
        law = ScalingLaw(2.0, 3.0, 0.4, loss_unit=LossUnit.NATS_PER_EXAMPLE,
                         tokens_per_example=16.0)
        with pytest.raises(DomainError):
            rescale_loss(law, 2)

    @pytest.mark.parametrize("k", [1, 2, 192, 768, 1024, 3072])
    def test_rescale_identity_over_grid(self, k):
        law = ScalingLaw(2.64, 1.6e-8, 0.16)
        out = rescale_loss(law, k)
        for x in np.logspace(-10, 9, 20):
            assert eval_law(out, x) == pytest.approx(k * eval_law(law, x), rel=1e-12)


class TestComputePfDays:
    def test_arithmetic(self):
        assert compute_pf_days(1e9, 1e12) == pytest.approx(6e21 / 8.64e19, rel=1e-12)
        assert compute_pf_days(1e9, 1e12) == pytest.approx(69.444, rel=1e-4)

    def test_unit_case(self):
        assert compute_pf_days(1, 1) == pytest.approx(6.0 / 8.64e19, rel=1e-12)

    def test_constants(self):
        assert PF_DAY_FLOPS == 8.64e19
        assert FLOPS_PER_PARAM_TOKEN == 6.0

    def test_rejects_nonpositive(self):
        with pytest.raises(DomainError):
            compute_pf_days(0, 1e9)
        with pytest.raises(DomainError):
            compute_pf_days(1e9, -1)


class TestLawInvariants:
    def test_negative_irreducible_rejected(self):
        with pytest.raises(DomainError):
            ScalingLaw(-0.1, 1.0, 0.5)

    def test_nonpositive_scale_rejected(self):
        with pytest.raises(DomainError):
            ScalingLaw(1.0, 0.0, 0.5)

    def test_nonpositive_exponent_rejected(self):
        with pytest.raises(DomainError):
            ScalingLaw(1.0, 1.0, -0.2)

    def test_per_example_requires_tokens(self):
        with pytest.raises(DomainError):
            ScalingLaw(1.0, 1.0, 0.5, loss_unit=LossUnit.NATS_PER_EXAMPLE)

    def test_pure_power_eval(self):
        law = PurePowerLaw(2.8e8, 0.74)
        assert law.eval(10.0) == pytest.approx(2.8e8 * 10 ** 0.74, rel=1e-12)

    def test_pure_power_rejects_nonpositive_coefficient(self):
        with pytest.raises(DomainError):
            PurePowerLaw(0.0, 0.5)


def _series(points, split=Split.TEST):
    return tuple(SeriesPoint(s, t, l, split) for s, t, l in points)


class TestRunRecord:
    def test_valid_record(self):
        run = RunRecord("r1", 1000, _series([(1, 100.0, 3.0), (2, 200.0, 2.5)]))
        assert len(run.series) == 2

    def test_steps_must_increase(self):
        with pytest.raises(DomainError):
            RunRecord("r1", 1000, _series([(2, 100.0, 3.0), (1, 200.0, 2.5)]))

    def test_tokens_must_increase(self):
        with pytest.raises(DomainError):
            RunRecord("r1", 1000, _series([(1, 200.0, 3.0), (2, 100.0, 2.5)]))

    def test_tokens_equal_step_times_batch(self):
        RunRecord("r1", 1000, _series([(1, 64.0, 3.0), (2, 128.0, 2.5)]), batch_tokens=64)
        with pytest.raises(DomainError):
            RunRecord("r1", 1000, _series([(1, 64.0, 3.0), (2, 100.0, 2.5)]), batch_tokens=64)

    def test_losses_positive_finite(self):
        with pytest.raises(DomainError):
            RunRecord("r1", 1000, _series([(1, 100.0, -3.0)]))

    def test_splits_independent(self):
        # interleaved train/test at the same steps is legal
        pts = _series([(1, 100.0, 3.0), (2, 200.0, 2.5)]) + _series(
            [(1, 100.0, 3.1), (2, 200.0, 2.6)], Split.TRAIN
        )
        run = RunRecord("r1", 1000, pts)
        assert sum(p.split is Split.TRAIN for p in run.series) == 2

    def test_nonpositive_n_params_rejected(self):
        with pytest.raises(DomainError):
            RunRecord("r1", 0, _series([(1, 100.0, 3.0)]))


class TestCompareRescaled:
    def test_consistent_reference_passes(self):
        law = ScalingLaw(2.64, 1.6e-8, 0.16)
        derived = rescale_loss(law, 768)
        cmp = compare_rescaled(law, 768, derived.irreducible, derived.scale)
        assert not cmp.irreducible_discrepant
        assert not cmp.scale_discrepant

    def test_discrepant_scale_flagged(self):
        # reference scale off by 10x trips the flag, irreducible stays clean
        law = ScalingLaw(3.13, 1.8e-8, 0.19)
        derived = rescale_loss(law, 192)
        cmp = compare_rescaled(law, 192, derived.irreducible, derived.scale / 10.0)
        assert cmp.scale_discrepant
        assert not cmp.irreducible_discrepant
        assert cmp.derived.scale == pytest.approx(derived.scale, rel=1e-12)
