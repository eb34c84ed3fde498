"""Neyman-Pearson tests and the Monte Carlo size/power harness.

The statistic is V_n(rho_used) / tau, built from a fixed test direction G (the model's
perturbation at ``test_amplitude``); V_n / tau does not depend on the size of a
positive amplitude, so the same test serves every point of the amplitude grid,
including a = 0 where it measures size.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from dist import normal_cdf, normal_quantile
from exceptions import DegenerateTestError, DomainError, LanPowerError, ReplicateFailureError
from inference import (
    BiasSource,
    C1Source,
    bootstrap_bias,
    c1_analytic,
    c1_empirical_values,
    gradient_stability,
    lse_values,
    me_correction,
)
from lan import (
    Tau2,
    central_seq,
    central_terms,
    d2_bound_values,
    lan_remainder_values,
    plugin_tau2_values,
    tau2_analytic,
)
from models import Family, Hypothesis, ModelSpec, PerturbationSpec, SeriesSample, simulate, simulate_batch
from schemas import DiagnosticRow, ExperimentConfig, PowerRow, Variant
from settings import get_settings

logger = logging.getLogger(__name__)

VARIANT_ORDER = [Variant.TRUE_PARAM, Variant.LSE, Variant.ME]

# (variant, bias source); the source is None for variants that take no bias estimate
Arm = tuple[Variant, Optional[BiasSource]]


@dataclass(frozen=True)
class TestOutcome:
    __test__ = False

    statistic: float
    threshold: float
    reject: bool
    variant: Variant
    tau2_used: Tau2


@dataclass
class PowerCurve:
    amplitude_grid: list[float]
    rows: list[PowerRow]
    m: int
    seed: int
    failures: int = 0

    def row(self, n: int, a: float, variant: Union[Variant, str], b_source: Optional[BiasSource] = None) -> PowerRow:
        """First matching row; without ``b_source`` that is the configured bias source."""
        variant = Variant(variant)
        for row in self.rows:
            if row.n == n and row.a == a and row.variant is variant:
                if b_source is None or row.b_source is BiasSource(b_source):
                    return row
        raise KeyError((n, a, variant.value, b_source))

    def rates(self, n: int, variant: Union[Variant, str], b_source: Optional[BiasSource] = None) -> np.ndarray:
        return np.array([self.row(n, a, variant, b_source).rejection_rate for a in self.amplitude_grid])


def np_test(
    sample: SeriesSample,
    spec: ModelSpec,
    rho_used: float,
    alpha: float,
    tau2: Tau2,
    variant: Union[Variant, str],
) -> TestOutcome:
    """T_n = I{ V_n(rho_used) / tau >= Z(alpha) }."""
    if not tau2.value > 0.0:
        raise DegenerateTestError(f"the test needs tau^2 > 0, got {tau2.value}")
    threshold = normal_quantile(alpha)
    statistic = central_seq(sample, rho_used, spec).value / tau2.tau
    return TestOutcome(
        statistic=statistic,
        threshold=threshold,
        reject=bool(statistic >= threshold),
        variant=Variant(variant),
        tau2_used=tau2,
    )


def _tau2_value(tau2: Union[Tau2, float]) -> float:
    value = tau2.value if isinstance(tau2, Tau2) else float(tau2)
    if not value >= 0.0:
        raise DomainError(f"tau^2 must be non-negative, got {value}")
    return value


def asymptotic_power(alpha: float, tau2: Union[Tau2, float]) -> float:
    """1 - Phi(Z(alpha) - tau^2), the documented asymptotic power of the optimal test."""
    return 1.0 - normal_cdf(normal_quantile(alpha) - _tau2_value(tau2))


def limiting_power(alpha: float, tau2: Union[Tau2, float]) -> float:
    """1 - Phi(Z(alpha) - tau): the limit of P(V_n / tau >= Z(alpha)) when V_n ~ N(tau^2, tau^2)."""
    return 1.0 - normal_cdf(normal_quantile(alpha) - math.sqrt(_tau2_value(tau2)))


def base_spec(config: ExperimentConfig, n: int) -> ModelSpec:
    """The test-direction model: perturbations at ``test_amplitude``, null hypothesis."""
    g = PerturbationSpec(amplitude_a=config.test_amplitude, coefficient=config.coefficient)
    b = None
    if config.family is Family.ARCH:
        b = PerturbationSpec(amplitude_a=config.test_amplitude, coefficient=config.b_coefficient)
    return ModelSpec(family=config.family, rho0=config.rho0, g=g, b=b, n=n)


def replicate_seed(master_seed: int, n_index: int, a_index: int, replicate: int, stream: int = 0) -> np.random.SeedSequence:
    """Data streams use stream 0 and bootstrap streams stream 1; all variants share the data."""
    key = (n_index, a_index, replicate) if stream == 0 else (n_index, a_index, replicate, stream)
    return np.random.SeedSequence(master_seed, spawn_key=key)


def _simulate_cell(spec: ModelSpec, seeds: list, burn_in: Optional[int]) -> tuple[np.ndarray, np.ndarray]:
    """Simulate all replicates; rows that fail are masked out instead of aborting the cell."""
    try:
        return simulate_batch(spec, seeds, burn_in), np.ones(len(seeds), dtype=bool)
    except LanPowerError as exc:
        logger.warning(f"batch simulation failed ({exc}); retrying replicates one by one")
    values = np.zeros((len(seeds), spec.n + 1))
    ok = np.ones(len(seeds), dtype=bool)
    for index, seed in enumerate(seeds):
        try:
            values[index] = simulate(spec, seed, burn_in).values
        except LanPowerError:
            ok[index] = False
    return values, ok


def study_arms(config: ExperimentConfig) -> list[Arm]:
    """Rows per cell in output order; with an oracle bias the bootstrap M.E. is reported alongside."""
    arms = []
    for variant in VARIANT_ORDER:
        if variant not in config.variants:
            continue
        if variant is not Variant.ME:
            arms.append((variant, None))
            continue
        arms.append((variant, config.b_mode))
        if config.bootstrap_alongside and config.b_mode is BiasSource.ORACLE:
            arms.append((variant, BiasSource.BOOTSTRAP))
    return arms


@dataclass
class _CellResult:
    rejections: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)


def _bias_values(values, rho_hat, config, b_mode, n_index, a_index, ok) -> np.ndarray:
    if b_mode is BiasSource.ORACLE:
        return rho_hat - config.rho0
    b_hat = np.zeros_like(rho_hat)
    for r in np.flatnonzero(ok):
        sample = SeriesSample(values=values[r])
        b_hat[r] = bootstrap_bias(sample, config.B, replicate_seed(config.master_seed, n_index, a_index, r, 1))
    return b_hat


def _rho_bar(values, rho_hat, b_hat, test_spec, config, ok) -> np.ndarray:
    n = values.shape[-1] - 1
    if config.c1_mode is C1Source.EMPIRICAL:
        c1 = c1_empirical_values(values, test_spec.g)
    else:
        c1 = np.full_like(rho_hat, c1_analytic(test_spec))
    _, d1 = central_terms(values, rho_hat, test_spec.g, test_spec.b)
    _, rho_bar, degenerate = me_correction(rho_hat, b_hat, c1, d1, n)
    if np.any(degenerate & ok):
        logger.warning(f"{int(np.sum(degenerate & ok))} degenerate modified estimates at n={n}")
    return rho_bar


def _run_cell(config: ExperimentConfig, n_index: int, n: int, a_index: int, a: float, threshold: float, tau2_true: Tau2) -> _CellResult:
    test_spec = base_spec(config, n)
    data_spec = test_spec.with_amplitude(a).with_hypothesis(Hypothesis.LOCAL_ALTERNATIVE)
    seeds = [replicate_seed(config.master_seed, n_index, a_index, r) for r in range(config.m)]
    values, ok = _simulate_cell(data_spec, seeds, config.burn_in)

    result = _CellResult()
    safe = np.where(ok[:, None], values, 1.0)
    rho_hat = lse_values(safe)
    for arm in study_arms(config):
        variant, b_mode = arm
        if variant is Variant.TRUE_PARAM:
            rho_used = np.full(config.m, config.rho0)
        elif variant is Variant.LSE:
            rho_used = rho_hat
        else:
            b_hat = _bias_values(safe, rho_hat, config, b_mode, n_index, a_index, ok)
            rho_used = _rho_bar(safe, rho_hat, b_hat, test_spec, config, ok)
        value, _ = central_terms(safe, rho_used, test_spec.g, test_spec.b)
        if variant is Variant.TRUE_PARAM:
            tau2 = np.full(config.m, tau2_true.value)
        else:
            tau2 = plugin_tau2_values(safe, rho_used, test_spec)
        valid = ok & np.isfinite(tau2) & (tau2 > 0.0)
        statistic = np.where(valid, value / np.sqrt(np.where(valid, tau2, 1.0)), 0.0)
        result.rejections[arm] = int(np.sum((statistic >= threshold) & valid))
        result.counts[arm] = int(np.sum(valid))
        result.failures[arm] = int(config.m - np.sum(valid))
    return result


def power_study(config: ExperimentConfig) -> PowerCurve:
    """Rejection frequencies over the (n, a, variant) grid, deterministic in master_seed."""
    settings = get_settings()
    threshold = normal_quantile(config.alpha)
    arms = study_arms(config)
    jobs = {}
    tau2_by_n = {}
    with ThreadPoolExecutor(max_workers=settings.threads) as pool:
        for n_index, n in enumerate(config.n_list):
            tau2_by_n[n] = tau2_analytic(base_spec(config, n))
            if tau2_by_n[n].value <= 0.0:
                raise DegenerateTestError("the test direction has tau^2 = 0; use a non-zero coefficient")
            for a_index, a in enumerate(config.amplitude_grid):
                jobs[(n_index, a_index)] = pool.submit(_run_cell, config, n_index, n, a_index, a, threshold, tau2_by_n[n])

        rows = []
        total_failures = 0
        total = 0
        for (n_index, a_index), job in sorted(jobs.items()):
            n, a = config.n_list[n_index], config.amplitude_grid[a_index]
            cell = job.result()
            data_spec = base_spec(config, n).with_amplitude(a)
            tau2_alt = tau2_analytic(data_spec)
            for arm in arms:
                variant, b_source = arm
                count = cell.counts[arm]
                rate = cell.rejections[arm] / count if count else 0.0
                total_failures += cell.failures[arm]
                total += config.m
                rows.append(
                    PowerRow(
                        family=config.family,
                        n=n,
                        a=a,
                        variant=variant,
                        m=count,
                        rejection_rate=rate,
                        mc_stderr=math.sqrt(rate * (1.0 - rate) / count) if count else 0.0,
                        asymptotic_power=asymptotic_power(config.alpha, tau2_alt),
                        seed=config.master_seed,
                        limiting_power=limiting_power(config.alpha, tau2_alt),
                        failures=cell.failures[arm],
                        b_source=b_source,
                    )
                )
            logger.info(f"finished cell n={n} a={a:g}")

    curve = PowerCurve(
        amplitude_grid=list(config.amplitude_grid), rows=rows, m=config.m, seed=config.master_seed, failures=total_failures
    )
    if total and total_failures > settings.failure_fraction * total:
        logger.error(f"{total_failures} of {total} replicate tests failed; aborting")
        raise ReplicateFailureError(total_failures, total, partial=curve)
    if total_failures:
        logger.warning(f"{total_failures} of {total} replicate tests failed and were excluded")
    return curve


def _mean_stderr(values: np.ndarray) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return float(values.mean()), 0.0
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def diagnose(config: ExperimentConfig) -> list[DiagnosticRow]:
    """Per-n checks of the c1 limit, the second-derivative bound and error absorption under the null."""
    rows = []
    for n_index, n in enumerate(config.n_list):
        spec = base_spec(config, n)
        seeds = [replicate_seed(config.master_seed, n_index, 0, r) for r in range(config.m)]
        values = simulate_batch(spec, seeds, config.burn_in)
        rho_hat = lse_values(values)
        c1 = c1_empirical_values(values, spec.g)
        c1_mean, c1_stderr = _mean_stderr(c1)

        bounds = d2_bound_values(values, spec.b)

        _, d1 = central_terms(values, rho_hat, spec.g, spec.b)
        c1_for_me = c1 if config.c1_mode is C1Source.EMPIRICAL else np.full(config.m, c1_analytic(spec))
        _, rho_bar, degenerate = me_correction(rho_hat, rho_hat - config.rho0, c1_for_me, d1, n)
        at_bar, _ = central_terms(values, rho_bar, spec.g, spec.b)
        at_true, _ = central_terms(values, config.rho0, spec.g, spec.b)

        shifts = [gradient_stability(SeriesSample(values=values[r]), spec, float(rho_hat[r])) for r in range(config.m)]

        lan_mean = lan_stderr = None
        if spec.family is Family.AR1:
            lan_mean, lan_stderr = _mean_stderr(lan_remainder_values(values, spec))

        rows.append(
            DiagnosticRow(
                family=config.family,
                n=n,
                m=config.m,
                c1_mean=c1_mean,
                c1_stderr=c1_stderr,
                c1_analytic=c1_analytic(spec),
                d2_bound_mean=float(np.mean(bounds)),
                d2_bound_rate=float(np.mean(bounds)) / math.sqrt(n),
                degenerate_rate=float(np.mean(degenerate)),
                gradient_shift_mean=float(np.mean(shifts)),
                lan_remainder_mean=lan_mean,
                lan_remainder_stderr=lan_stderr,
                absorption_median=float(np.median(np.abs(at_bar - at_true))),
            )
        )
        logger.info(f"diagnostics done for n={n}")
    return rows
