"""Power-law fitting: recovery, equivariance, frontier constraint, bootstrap."""

import numpy as np
import pytest

from scalelaws.errors import DegenerateDataError, DomainError, InsufficientDataError
from scalelaws.lawcore import ScalingLaw, eval_law
from scalelaws.powerfit import (
    FRONTIER_SLACK_NATS,
    FitOptions,
    bootstrap_ci,
    fit_below_frontier,
    fit_power_plus_const,
    fit_pure_power,
)

# Trimmed multistart keeps the exhaustive grids fast; recovery quality is
# unchanged on noiseless data.
FAST_OPTS = FitOptions(linf_grid_size=5, alpha_starts=(0.05, 0.1, 0.2, 0.35, 0.7))


def curve_points(law, x_lo, x_hi, n=50):
    xs = np.logspace(np.log10(x_lo), np.log10(x_hi), n)
    return np.column_stack([xs, [eval_law(law, x) for x in xs]])


def assert_law_close(got, want, rtol):
    assert got.irreducible == pytest.approx(want.irreducible, rel=rtol, abs=rtol)
    assert got.scale == pytest.approx(want.scale, rel=rtol)
    assert got.exponent == pytest.approx(want.exponent, rel=rtol)


class TestFitPowerPlusConst:
    def test_noiseless_recovery(self):
        true = ScalingLaw(2.0, 1e3, 0.2)
        rep = fit_power_plus_const(curve_points(true, 1e2, 1e8))
        assert rep.converged
        assert_law_close(rep.law, true, 1e-3)
        assert rep.residual_rms < 1e-6

    def test_model_size_law_round_trip(self):
        # image-model parameter-count law: round trip through its own curve
        true = ScalingLaw(3.12, 8.0e1, 0.24)
        rep = fit_power_plus_const(curve_points(true, 1e3, 1e9))
        assert_law_close(rep.law, true, 1e-3)

    def test_identical_losses_degenerate(self):
        pts = [(x, 2.5) for x in np.logspace(1, 5, 10)]
        with pytest.raises(DegenerateDataError):
            fit_power_plus_const(pts)

    def test_too_few_points(self):
        with pytest.raises(InsufficientDataError):
            fit_power_plus_const([(1.0, 3.0), (2.0, 2.0), (3.0, 1.5)])

    def test_single_distinct_x(self):
        pts = [(10.0, 3.0), (10.0, 2.9), (10.0, 2.8), (10.0, 2.7)]
        with pytest.raises(InsufficientDataError):
            fit_power_plus_const(pts)

    def test_nonpositive_rejected(self):
        with pytest.raises(DomainError):
            fit_power_plus_const([(1.0, 3.0), (2.0, 2.0), (-3.0, 1.5), (4.0, 1.2)])

    @pytest.mark.parametrize("linf", [0.0, 1.0, 3.13])
    @pytest.mark.parametrize("x0", [1e-8, 1.0, 1e10])
    @pytest.mark.parametrize("alpha", [0.05, 0.2, 0.7])
    def test_noiseless_grid_recovery(self, linf, x0, alpha):
        true = ScalingLaw(linf, x0, alpha)
        rep = fit_power_plus_const(curve_points(true, x0 * 1e-3, x0 * 1e3), FAST_OPTS)
        assert_law_close(rep.law, true, 1e-3)

    def test_scale_equivariance(self):
        true = ScalingLaw(1.5, 50.0, 0.3)
        pts = curve_points(true, 1.0, 1e6)
        base = fit_power_plus_const(pts, FAST_OPTS).law
        shifted = fit_power_plus_const(pts * [1e4, 1.0], FAST_OPTS).law
        assert shifted.irreducible == pytest.approx(base.irreducible, rel=1e-6, abs=1e-9)
        assert shifted.scale == pytest.approx(base.scale * 1e4, rel=1e-6)
        assert shifted.exponent == pytest.approx(base.exponent, rel=1e-6)

    def test_loss_scale_equivariance(self):
        true = ScalingLaw(1.5, 50.0, 0.3)
        pts = curve_points(true, 1.0, 1e6)
        k = 768.0
        base = fit_power_plus_const(pts, FAST_OPTS).law
        scaled = fit_power_plus_const(pts * [1.0, k], FAST_OPTS).law
        assert scaled.irreducible == pytest.approx(k * base.irreducible, rel=1e-6)
        assert scaled.scale == pytest.approx(base.scale * k ** (1 / base.exponent), rel=1e-6)
        assert scaled.exponent == pytest.approx(base.exponent, rel=1e-6)


class TestFitPurePower:
    def test_exact_power_law(self):
        xs = np.logspace(-3, 3, 30)
        ys = (xs / 9.4e-13) ** 0.7
        rep = fit_pure_power(np.column_stack([xs, ys]))
        assert rep.law.exponent == pytest.approx(0.70, abs=1e-6)
        assert rep.law.coefficient == pytest.approx((1 / 9.4e-13) ** 0.7, rel=1e-6)

    def test_single_distinct_x(self):
        with pytest.raises(InsufficientDataError):
            fit_pure_power([(5.0, 1.0), (5.0, 2.0)])

    def test_negative_exponent_allowed(self):
        xs = np.logspace(0, 4, 10)
        rep = fit_pure_power(np.column_stack([xs, 3.0 * xs ** -0.5]))
        assert rep.law.exponent == pytest.approx(-0.5, abs=1e-9)


class TestFitBelowFrontier:
    def test_exact_curve_matches_unconstrained(self):
        true = ScalingLaw(2.0, 1e3, 0.2)
        pts = curve_points(true, 1e2, 1e8)
        free = fit_power_plus_const(pts, FAST_OPTS).law
        cons = fit_below_frontier(pts, FAST_OPTS).law
        assert_law_close(cons, free, 1e-6)

    def test_outlier_does_not_drag_curve_above_frontier(self):
        # one mid-compute point 5% above the trend: the constrained fit stays
        # below every hull point, while the symmetric fit passes above some
        true = ScalingLaw(2.0, 1e3, 0.2)
        pts = curve_points(true, 1e2, 1e8, n=20)
        pts[10, 1] *= 1.05
        opts = FitOptions(linf_grid_size=5, alpha_starts=FAST_OPTS.alpha_starts,
                          asymmetry=100.0)
        rep = fit_below_frontier(pts, opts)
        assert rep.converged
        preds = np.array([eval_law(rep.law, x) for x in pts[:, 0]])
        assert np.all(preds <= pts[:, 1] + FRONTIER_SLACK_NATS)
        assert preds[10] < pts[10, 1]
        free = fit_power_plus_const(pts, opts).law
        free_preds = np.array([eval_law(free, x) for x in pts[:, 0]])
        assert np.any(free_preds > pts[:, 1] + FRONTIER_SLACK_NATS)

    def test_asymmetry_one_is_unconstrained(self):
        true = ScalingLaw(2.0, 1e3, 0.2)
        pts = curve_points(true, 1e2, 1e8)
        pts[25, 1] *= 1.10
        opts = FitOptions(linf_grid_size=5, alpha_starts=FAST_OPTS.alpha_starts, asymmetry=1.0)
        free = fit_power_plus_const(pts, opts).law
        sym = fit_below_frontier(pts, opts)
        assert_law_close(sym.law, free, 1e-9)

    def test_bad_asymmetry_rejected(self):
        with pytest.raises(DomainError):
            fit_below_frontier([(1, 2), (2, 1.5), (3, 1.2), (4, 1.0)],
                               FitOptions(asymmetry=0.0))


class TestBootstrap:
    def test_noiseless_ci_collapses(self):
        true = ScalingLaw(2.0, 1e3, 0.2)
        pts = curve_points(true, 1e2, 1e8)
        opts = FitOptions(linf_grid_size=3, alpha_starts=(0.1, 0.2, 0.4),
                          bootstrap_replicates=50)
        rep = bootstrap_ci(pts, "power_plus_const", opts)
        for lo, hi in rep.ci.values():
            assert hi - lo < 1e-6 * max(1.0, abs(hi))

    def test_same_seed_identical(self):
        rng = np.random.default_rng(7)
        xs = np.logspace(2, 6, 40)
        ys = (xs / 10.0) ** -0.3 * np.exp(0.05 * rng.standard_normal(40))
        pts = np.column_stack([xs, ys])
        opts = FitOptions(bootstrap_replicates=60, seed=11)
        a = bootstrap_ci(pts, "pure_power", opts)
        b = bootstrap_ci(pts, "pure_power", opts)
        assert a.ci == b.ci
        assert a.law == b.law

    def test_unknown_kind(self):
        with pytest.raises(DomainError):
            bootstrap_ci([(1, 1), (2, 2)], "nope")

    def test_ci_brackets_point_estimate(self):
        rng = np.random.default_rng(3)
        xs = np.logspace(2, 6, 40)
        ys = (xs / 10.0) ** -0.3 * np.exp(0.05 * rng.standard_normal(40))
        rep = bootstrap_ci(np.column_stack([xs, ys]), "pure_power",
                           FitOptions(bootstrap_replicates=60))
        assert rep.ci["exponent"][0] <= rep.law.exponent <= rep.ci["exponent"][1]
        assert rep.ci["coefficient"][0] <= rep.law.coefficient <= rep.ci["coefficient"][1]

    def test_coverage_two_sided_90(self):
        # 100 synthetic pure-power datasets with 2% multiplicative noise;
        # the 5th..95th percentile interval must cover the true coefficient
        # and exponent jointly in at least 90 of them.
        hits = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            xs = 10 ** rng.uniform(5.0, 6.0, 50)
            ys = xs ** 0.7 * np.exp(0.02 * rng.standard_normal(50))
            rep = bootstrap_ci(np.column_stack([xs, ys]), "pure_power",
                               FitOptions(bootstrap_replicates=200, seed=seed))
            c_lo, c_hi = rep.ci["coefficient"]
            m_lo, m_hi = rep.ci["exponent"]
            if c_lo <= 1.0 <= c_hi and m_lo <= 0.7 <= m_hi:
                hits += 1
        assert hits >= 90
