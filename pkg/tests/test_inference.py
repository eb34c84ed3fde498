import math

import numpy as np
import pytest

from exceptions import DegenerateComponentError, DegenerateDesignError, DomainError
from inference import (
    BiasSource,
    Block,
    C1Source,
    bootstrap_bias,
    c1_analytic,
    c1_empirical,
    estimate,
    gradient_stability,
    lse,
    max_gradient_component,
    me_correction,
    modified_estimate_univariate,
    modified_estimate_vector,
    residuals,
)
from lan import central_seq, central_seq_ar1
from models import Family, ModelSpec, PerturbationSpec, SeriesSample, simulate, simulate_batch


class TestLeastSquares:
    def test_hand_case(self):
        assert lse(SeriesSample(values=np.array([1.0, 2.0, 4.0]))) == pytest.approx(2.0)

    def test_constant_series(self):
        assert lse(SeriesSample(values=np.full(12, 3.7))) == 1.0

    def test_all_zero_series_is_degenerate(self):
        with pytest.raises(DegenerateDesignError):
            lse(SeriesSample(values=np.zeros(12)))

    def test_consistency(self, ar1_spec):
        sample = simulate(ar1_spec.with_n(100_000), 31)
        assert abs(lse(sample) - 0.1) <= 4.0 * math.sqrt((1.0 - 0.01) / sample.n)

    def test_residuals(self, two_point_sample):
        np.testing.assert_allclose(residuals(two_point_sample, 0.5), [1.5])

    def test_residuals_orthogonal_to_lags(self, ar1_sample):
        eps = residuals(ar1_sample, lse(ar1_sample))
        assert abs(np.sum(eps * ar1_sample.lagged)) <= 1e-9 * ar1_sample.n


class TestBootstrapBias:
    def test_needs_enough_replicates(self, ar1_sample):
        with pytest.raises(DomainError):
            bootstrap_bias(ar1_sample, B=99)

    def test_deterministic_in_seed(self, ar1_sample):
        assert bootstrap_bias(ar1_sample, B=200, seed=4) == bootstrap_bias(ar1_sample, B=200, seed=4)

    def test_near_white_noise_bias_is_small(self):
        spec = ModelSpec(Family.AR1, 0.0, PerturbationSpec(1.0, 5.0), n=400)
        assert abs(bootstrap_bias(simulate(spec, 6), B=500, seed=1)) < 0.02

    def test_detects_downward_bias_of_least_squares(self):
        spec = ModelSpec(Family.AR1, 0.5, PerturbationSpec(1.0, 5.0), n=50)
        assert bootstrap_bias(simulate(spec, 8), B=1000, seed=2) < 0.0


class TestC1:
    def test_two_point_hand_case(self, two_point_sample, unit_g):
        assert c1_empirical(two_point_sample, unit_g) == pytest.approx(-1.0)

    def test_equals_scaled_slope(self, ar1_sample, ar1_spec):
        for rho in (-0.5, 0.1, 0.8):
            slope = central_seq_ar1(ar1_sample, rho, ar1_spec.g).d1_scaled
            assert c1_empirical(ar1_sample, ar1_spec.g) == pytest.approx(slope, rel=1e-12, abs=1e-15)

    def test_symmetric_direction_averages_to_zero(self, ar1_spec):
        sample = simulate(ar1_spec.with_n(100_000), 12)
        products = sample.lagged * ar1_spec.g(sample.lagged)
        stderr = 1.2 * products.std(ddof=1) / math.sqrt(sample.n)
        assert abs(c1_empirical(sample, ar1_spec.g)) <= 4.0 * stderr

    def test_analytic_limit_is_zero(self, ar1_spec):
        assert abs(c1_analytic(ar1_spec)) < 1e-8


class TestModifiedEstimate:
    def test_correction_hand_case(self):
        d_n, rho_bar, degenerate = me_correction(0.3, 0.05, -1.0, -10.0, 100)
        assert float(d_n) == pytest.approx(0.5)
        assert float(rho_bar) == pytest.approx(0.25)
        assert not degenerate

    def test_flat_slope_keeps_rho_hat(self, ar1_spec):
        flat = SeriesSample(values=np.zeros(30))
        report = modified_estimate_univariate(flat, ar1_spec, 0.2, 0.05, -0.3)
        assert report.degenerate
        assert report.rho_bar == 0.2

    def test_zero_bias_leaves_estimate_unchanged(self, ar1_sample, ar1_spec):
        report = modified_estimate_univariate(ar1_sample, ar1_spec, 0.13, 0.0, -0.4)
        assert report.rho_bar == 0.13

    def test_oracle_bias_with_empirical_c1_recovers_true_rho(self, ar1_sample, ar1_spec):
        report = estimate(ar1_sample, ar1_spec, b_mode=BiasSource.ORACLE, c1_mode=C1Source.EMPIRICAL)
        assert report.rho_bar == pytest.approx(0.1, abs=1e-12)
        assert report.b_source is BiasSource.ORACLE

    def test_analytic_c1_keeps_least_squares(self, ar1_sample, ar1_spec):
        report = estimate(ar1_sample, ar1_spec, c1_mode=C1Source.ANALYTIC)
        assert report.rho_bar == pytest.approx(report.rho_hat, abs=1e-7)

    def test_bootstrap_mode(self, ar1_sample, ar1_spec):
        report = estimate(ar1_sample, ar1_spec, b_mode="bootstrap", B=200, seed=3)
        assert report.b_source is BiasSource.BOOTSTRAP
        assert math.isfinite(report.rho_bar)

    def test_absorption_is_exact_for_ar1(self):
        rng = np.random.default_rng(2024)
        g = PerturbationSpec(1.0, 5.0)
        spec = ModelSpec(Family.AR1, 0.1, g, n=100)
        checked = 0
        for _ in range(10_000):
            n = int(rng.integers(10, 200))
            sample = SeriesSample(values=rng.standard_normal(n + 1))
            rho_hat = float(rng.uniform(-0.9, 0.9))
            report = modified_estimate_univariate(
                sample, spec, rho_hat, float(rng.uniform(-0.02, 0.02)), float(rng.uniform(-0.1, 0.1)), tolerance=1e-3
            )
            if report.degenerate:
                continue
            at_bar = central_seq(sample, report.rho_bar, spec).value
            at_hat = central_seq(sample, rho_hat, spec).value
            assert abs((at_bar - at_hat) - report.d_n) <= 1e-12
            checked += 1
        assert checked > 9_000

    def test_gradient_stability_is_zero_for_ar1(self, ar1_sample, ar1_spec):
        assert gradient_stability(ar1_sample, ar1_spec, 0.4) == pytest.approx(0.0, abs=1e-15)

    def test_gradient_stability_moves_for_arch(self, arch_sample, arch_spec):
        assert gradient_stability(arch_sample, arch_spec, 0.4) > 0.0


class TestVectorModifiedEstimate:
    def test_hand_case(self):
        result = modified_estimate_vector([0.3, 0.2, -0.1], [2.0, -4.0, 1.0], 1.0, (2, 1), 2)
        np.testing.assert_allclose(result.phi_bar, [0.3, -0.05, -0.1])
        assert result.block is Block.FIRST
        assert np.dot(result.gradient, result.phi_bar - result.phi_hat) == pytest.approx(1.0, abs=1e-12)

    def test_second_block_component(self):
        result = modified_estimate_vector([0.0, 0.0, 0.0], [2.0, -4.0, 0.5], 1.0, (2, 1), 3, block="second")
        assert result.block is Block.SECOND
        assert result.phi_bar[2] == 2.0

    def test_zero_gradient_component_is_reported(self):
        with pytest.raises(DegenerateComponentError) as info:
            modified_estimate_vector([0.3, 0.2, -0.1], [2.0, 0.0, 1.0], 1.0, (2, 1), 2)
        assert info.value.index == 2

    def test_block_mismatch_rejected(self):
        with pytest.raises(DomainError):
            modified_estimate_vector([0.3, 0.2, -0.1], [2.0, -4.0, 1.0], 1.0, (2, 1), 3, block=Block.FIRST)

    def test_length_mismatch_rejected(self):
        with pytest.raises(DomainError):
            modified_estimate_vector([0.3, 0.2], [2.0, -4.0, 1.0], 1.0, (2, 1), 1)

    def test_zero_offset_is_identity(self):
        result = modified_estimate_vector([0.3, 0.2, -0.1], [2.0, -4.0, 1.0], 0.0, (2, 1), 1)
        np.testing.assert_array_equal(result.phi_bar, result.phi_hat)

    def test_offset_is_linear_in_d_n(self):
        one = modified_estimate_vector([0.0, 0.0], [3.0, 1.0], 0.7, (1, 1), 1)
        two = modified_estimate_vector([0.0, 0.0], [3.0, 1.0], 2.0 * 0.7, (1, 1), 1)
        assert two.phi_bar[0] == 2.0 * one.phi_bar[0]

    def test_max_gradient_component(self):
        assert max_gradient_component([2.0, -4.0, 1.0], (2, 1)) == 2
        assert max_gradient_component([2.0, -4.0, 1.0], (2, 1), Block.SECOND) == 3
        with pytest.raises(DomainError):
            max_gradient_component([2.0, -4.0], (2, 0), Block.SECOND)


@pytest.mark.slow
class TestAsymptoticBehaviour:
    m = 1000

    def test_root_n_consistency_of_modified_estimate(self, ar1_spec):
        spreads = []
        for n in (100, 400, 1600):
            spec = ar1_spec.with_n(n)
            errors = []
            values = simulate_batch(spec, [np.random.SeedSequence(55, spawn_key=(n, r)) for r in range(self.m)])
            for r, row in enumerate(values):
                sample = SeriesSample(values=row)
                report = estimate(sample, spec, b_mode=BiasSource.BOOTSTRAP, B=100, seed=np.random.SeedSequence(56, spawn_key=(n, r)))
                errors.append(math.sqrt(n) * (report.rho_bar - 0.1))
            spreads.append(np.std(errors, ddof=1))
        assert max(spreads) / min(spreads) < 1.5

    def test_arch_absorption_error_shrinks(self, arch_spec):
        medians = []
        for n in (100, 400):
            spec = arch_spec.with_n(n)
            gaps = []
            for row in simulate_batch(spec, [np.random.SeedSequence(77, spawn_key=(n, r)) for r in range(500)]):
                sample = SeriesSample(values=row)
                report = estimate(sample, spec)
                gaps.append(abs(central_seq(sample, report.rho_bar, spec).value - central_seq(sample, 0.1, spec).value))
            medians.append(np.median(gaps))
        assert medians[1] < medians[0]
