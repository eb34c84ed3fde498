import math

import numpy as np
import pytest

from exceptions import DomainError, SimulationError
from models import (
    Family,
    Functional,
    Hypothesis,
    ModelSpec,
    PerturbationSpec,
    arch_scale,
    arch_scale_approx,
    draw_innovations,
    expected_functional,
    simulate,
    simulate_batch,
    stationary_variance,
)


def _ar1(rho0=0.1, a=1.0, coef=5.0, n=400, hypothesis=Hypothesis.NULL):
    return ModelSpec(family=Family.AR1, rho0=rho0, g=PerturbationSpec(a, coef), n=n, hypothesis=hypothesis)


class TestPerturbationSpec:
    def test_reciprocal_quadratic_values(self):
        g = PerturbationSpec(amplitude_a=2.0, coefficient=5.0)
        np.testing.assert_allclose(g(np.array([0.0, 1.0, 3.0])), [10.0, 5.0, 1.0])

    def test_bounded_by_coefficient_times_amplitude(self):
        g = PerturbationSpec(amplitude_a=-1.5, coefficient=3.5)
        grid = np.linspace(-50.0, 50.0, 2001)
        assert np.max(np.abs(g(grid))) <= g.bound
        assert g.bound == pytest.approx(5.25)

    def test_zero_amplitude(self):
        assert PerturbationSpec(0.0, 5.0).is_zero

    def test_non_finite_rejected(self):
        with pytest.raises(DomainError):
            PerturbationSpec(float("inf"), 5.0)


class TestModelSpec:
    def test_non_stationary_rho_rejected(self):
        with pytest.raises(DomainError, match=r"\|rho0\| < 1"):
            _ar1(rho0=1.5)

    def test_arch_requires_variance_perturbation(self):
        with pytest.raises(DomainError):
            ModelSpec(family=Family.ARCH, rho0=0.1, g=PerturbationSpec(1.0, 3.5), n=30)

    def test_ar1_refuses_variance_perturbation(self):
        g = PerturbationSpec(1.0, 5.0)
        with pytest.raises(DomainError):
            ModelSpec(family=Family.AR1, rho0=0.1, g=g, b=g, n=30)

    def test_contiguity_scale(self):
        assert _ar1(n=400).contiguity_scale == 0.0
        assert _ar1(n=400, hypothesis=Hypothesis.LOCAL_ALTERNATIVE).contiguity_scale == pytest.approx(0.05)

    def test_stationary_variance(self):
        assert stationary_variance(_ar1(rho0=0.5)) == pytest.approx(1.0 / 0.75)
        with pytest.raises(DomainError):
            stationary_variance(_ar1(hypothesis=Hypothesis.LOCAL_ALTERNATIVE))


class TestSimulate:
    def test_same_seed_same_series(self):
        spec = _ar1()
        assert np.array_equal(simulate(spec, 11).values, simulate(spec, 11).values)
        assert not np.array_equal(simulate(spec, 11).values, simulate(spec, 12).values)

    def test_length_and_finiteness(self):
        sample = simulate(_ar1(n=57), 3)
        assert sample.values.shape == (58,)
        assert sample.n == 57
        assert np.all(np.isfinite(sample.values))

    def test_zero_burn_in_starts_at_zero(self):
        assert simulate(_ar1(n=10), 3, burn_in=0).values[0] == 0.0

    def test_white_noise_variance(self):
        values = simulate(_ar1(rho0=0.0, n=100_000), 42).values
        assert abs(values.var() - 1.0) <= 4.0 * math.sqrt(2.0 / values.size)

    def test_lag_one_autocorrelation(self):
        values = simulate(_ar1(rho0=0.1, n=100_000), 43).values
        rho_emp = np.corrcoef(values[:-1], values[1:])[0, 1]
        assert abs(rho_emp - 0.1) <= 4.0 * math.sqrt((1.0 - 0.01) / values.size)

    def test_ergodic_second_moment(self):
        n = 100_000
        values = simulate(_ar1(rho0=0.1, n=n), 44).values
        target = 1.0 / 0.99
        stderr = target * math.sqrt(2.0 * (1.0 + 0.01) / (1.0 - 0.01) / n)
        assert abs(np.mean(values[:-1] ** 2) - target) <= 4.0 * stderr

    def test_alternative_follows_the_recursion(self):
        spec = _ar1(rho0=0.1, a=1.0, coef=5.0, n=400, hypothesis=Hypothesis.LOCAL_ALTERNATIVE)
        burn_in = 50
        sample = simulate(spec, 9, burn_in=burn_in)
        y = 0.0
        expected = []
        for step, eps in enumerate(draw_innovations(9, burn_in + spec.n)):
            y = 0.1 * y + (1.0 / math.sqrt(400)) * (5.0 * (1.0 / (1.0 + y * y))) + eps
            if step + 1 >= burn_in:
                expected.append(y)
        np.testing.assert_allclose(sample.values, expected, rtol=1e-12, atol=1e-12)

    def test_alternative_offsets_the_null_path(self):
        null = simulate(_ar1(n=200), 5).values
        alt = simulate(_ar1(n=200, hypothesis=Hypothesis.LOCAL_ALTERNATIVE), 5).values
        shift = alt - null
        assert np.all(shift > 0.0)
        assert np.max(shift) <= 5.0 / math.sqrt(200) / (1.0 - 0.1) + 1e-12

    def test_drift_shrinks_like_root_n(self):
        def max_shift(n):
            null = simulate(_ar1(n=n), 21).values
            alt = simulate(_ar1(n=n, hypothesis=Hypothesis.LOCAL_ALTERNATIVE), 21).values
            return np.max(np.abs(alt - null))

        assert max_shift(1600) <= 0.6 * max_shift(400)

    def test_batch_rows_match_single_runs(self):
        spec = _ar1(n=120, hypothesis=Hypothesis.LOCAL_ALTERNATIVE)
        seeds = [np.random.SeedSequence(1, spawn_key=(0, 0, r)) for r in range(4)]
        batch = simulate_batch(spec, seeds, burn_in=30)
        for row, seed in zip(batch, seeds):
            assert np.array_equal(row, simulate(spec, seed, burn_in=30).values)


class TestArch:
    def test_scale_is_exact_square_root(self):
        b = np.array([0.0, 1.0, 3.5])
        np.testing.assert_allclose(arch_scale(b, 0.01), np.sqrt(1.0 + 0.01 * b))

    def test_approximation_error_is_second_order(self):
        b = np.linspace(0.0, 3.5, 50)
        beta = 1.0 / math.sqrt(10_000)
        x = beta * b
        gap = np.abs(arch_scale(b, beta) - arch_scale_approx(b, beta))
        assert np.all(gap <= x * x / 8.0 + 1e-15)

    def test_alternative_uses_the_exact_scale(self):
        g = PerturbationSpec(1.0, 3.5)
        spec = ModelSpec(Family.ARCH, 0.1, g, 100, Hypothesis.LOCAL_ALTERNATIVE, b=g)
        burn_in = 20
        sample = simulate(spec, 31, burn_in=burn_in)
        beta = 1.0 / math.sqrt(100)
        y = 0.0
        expected = []
        for step, eps in enumerate(draw_innovations(31, burn_in + spec.n)):
            drift = beta * float(g(np.array([y]))[0])
            scale = float(arch_scale(g(np.array([y])), beta)[0])
            y = 0.1 * y + drift + scale * eps
            if step + 1 >= burn_in:
                expected.append(y)
        np.testing.assert_allclose(sample.values, expected, rtol=1e-12, atol=1e-12)

    def test_documented_scale_arch_run_is_finite(self):
        g = PerturbationSpec(1.0, 3.5)
        spec = ModelSpec(Family.ARCH, 0.1, g, 30, Hypothesis.LOCAL_ALTERNATIVE, b=g)
        assert spec.variance_margin > 0.0
        assert np.all(np.isfinite(simulate(spec, 17).values))

    def test_negative_conditional_variance_is_reported(self):
        g = PerturbationSpec(-1.0, 3.5)
        spec = ModelSpec(Family.ARCH, 0.1, g, 1, Hypothesis.LOCAL_ALTERNATIVE, b=g)
        with pytest.raises(SimulationError) as info:
            simulate(spec, 0, burn_in=0)
        assert info.value.step == 0


class TestExpectedFunctional:
    def test_yg_vanishes_by_symmetry(self):
        assert abs(expected_functional(_ar1(), Functional.YG)) < 1e-8

    def test_g2_matches_monte_carlo(self):
        spec = _ar1(rho0=0.1)
        rng = np.random.default_rng(99)
        y = rng.standard_normal(4_000_000) / math.sqrt(1.0 - 0.01)
        draws = spec.g(y) ** 2
        stderr = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(expected_functional(spec, Functional.G2) - draws.mean()) <= 4.0 * stderr

    def test_quadratic_in_amplitude(self):
        assert expected_functional(_ar1(a=2.0), Functional.G2) == 4.0 * expected_functional(_ar1(a=1.0), Functional.G2)

    def test_zero_amplitude_is_zero(self):
        assert expected_functional(_ar1(a=0.0), Functional.G2) == 0.0

    def test_variance_functionals_need_b(self):
        with pytest.raises(DomainError):
            expected_functional(_ar1(), Functional.B2)
