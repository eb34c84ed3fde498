"""Central sequences, tau^2 and the log-likelihood ratio for the contiguous AR(1)/ARCH tests.

All kernels operate on the last axis so a (replicates, n + 1) matrix of trajectories is
evaluated in one pass; ``rho`` may be a scalar or one value per replicate.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

from dist import NoiseMoments, empirical_moment_averages, gaussian_noise_moments, normal_logpdf, score_mf
from exceptions import DegenerateTestError, DomainError, InsufficientDataError, NumericError
from models import Family, Functional, ModelSpec, PerturbationSpec, SeriesSample, expected_functional

RhoLike = Union[float, np.ndarray]

# sup |2 * dM_f/dx| for the Gaussian score
GAUSSIAN_SCORE_SLOPE_BOUND = 2.0
MIN_PLUGIN_SAMPLE = 10


@dataclass(frozen=True)
class CentralSeqEval:
    value: float
    d1: float
    d1_scaled: float
    d2_scaled_bound: float


class Tau2Source(str, Enum):
    ANALYTIC = "analytic"
    PLUGIN = "plugin"


@dataclass(frozen=True)
class Tau2:
    value: float
    source: Tau2Source

    def __post_init__(self):
        if not (math.isfinite(self.value) and self.value >= 0.0):
            raise DegenerateTestError(f"tau^2 must be finite and non-negative, got {self.value}")
        object.__setattr__(self, "source", Tau2Source(self.source))

    @property
    def tau(self) -> float:
        return math.sqrt(self.value)


def _split(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    values = np.asarray(values, dtype=float)
    if values.shape[-1] < 2:
        raise DomainError("a central sequence needs at least two observations")
    return values[..., :-1], values[..., 1:]


def _residuals(lag: np.ndarray, cur: np.ndarray, rho: RhoLike) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    if not np.all(np.isfinite(rho)):
        raise NumericError("rho must be finite")
    if rho.ndim:
        rho = rho[..., np.newaxis]
    return cur - rho * lag


def central_terms(
    values: np.ndarray, rho: RhoLike, g: PerturbationSpec, b: Optional[PerturbationSpec] = None
) -> tuple[np.ndarray, np.ndarray]:
    """Return (V_n(rho), dV_n/drho) along the last axis.

    With the Gaussian score M_f(e) = -e the ARCH term 1 + e M_f(e) is 1 - e^2, so the
    derivative in rho is the polynomial -(1/sqrt n) sum Y_{i-1} (G + 2 e B).
    """
    lag, cur = _split(values)
    root_n = math.sqrt(cur.shape[-1])
    eps = _residuals(lag, cur, rho)
    if not np.all(np.isfinite(eps)):
        raise NumericError("central sequence residuals are not finite")
    g_lag = g(lag)
    value_terms = score_mf(eps) * g_lag
    d1_terms = lag * g_lag
    if b is not None:
        b_lag = b(lag)
        value_terms = value_terms + (1.0 + eps * score_mf(eps)) * b_lag
        d1_terms = d1_terms + 2.0 * eps * lag * b_lag
    value = -np.sum(value_terms, axis=-1) / root_n
    d1 = -np.sum(d1_terms, axis=-1) / root_n
    if not (np.all(np.isfinite(value)) and np.all(np.isfinite(d1))):
        raise NumericError("central sequence evaluation produced non-finite values")
    return value, d1


def d2_bound_values(values: np.ndarray, b: Optional[PerturbationSpec]) -> np.ndarray:
    """(2 w sup|B| / n) sum Y_{i-1}^2, bounding |second derivative of V_n| / sqrt(n); zero without B."""
    lag, _ = _split(values)
    if b is None:
        return np.zeros(lag.shape[:-1])
    return 2.0 * GAUSSIAN_SCORE_SLOPE_BOUND * b.bound * np.mean(lag * lag, axis=-1)


def _evaluate(sample: SeriesSample, rho: float, g: PerturbationSpec, b: Optional[PerturbationSpec]) -> CentralSeqEval:
    value, d1 = central_terms(sample.values, rho, g, b)
    root_n = math.sqrt(sample.n)
    bound = float(d2_bound_values(sample.values, b))
    return CentralSeqEval(value=float(value), d1=float(d1), d1_scaled=float(d1) / root_n, d2_scaled_bound=bound)


def central_seq_ar1(sample: SeriesSample, rho: float, g: PerturbationSpec) -> CentralSeqEval:
    return _evaluate(sample, rho, g, None)


def central_seq_arch(sample: SeriesSample, rho: float, g: PerturbationSpec, b: PerturbationSpec) -> CentralSeqEval:
    return _evaluate(sample, rho, g, b)


def central_seq(sample: SeriesSample, rho: float, spec: ModelSpec) -> CentralSeqEval:
    if spec.family is Family.AR1:
        return central_seq_ar1(sample, rho, spec.g)
    return central_seq_arch(sample, rho, spec.g, spec.b)


def finite_difference_d1(sample: SeriesSample, rho: float, spec: ModelSpec, h: float = 1e-5) -> float:
    """Central-difference estimate of dV_n/drho, used to check the analytic derivative."""
    upper = central_seq(sample, rho + h, spec).value
    lower = central_seq(sample, rho - h, spec).value
    return (upper - lower) / (2.0 * h)


def tau2_analytic(spec: ModelSpec, moments: Optional[NoiseMoments] = None) -> Tau2:
    moments = moments or gaussian_noise_moments()
    value = moments.i0 * expected_functional(spec, Functional.G2)
    if spec.family is Family.ARCH:
        value += 0.25 * (moments.i2 - 1.0) * expected_functional(spec, Functional.B2)
        value += moments.i1 * expected_functional(spec, Functional.GB)
    return Tau2(value=value, source=Tau2Source.ANALYTIC)


def plugin_tau2_values(values: np.ndarray, rho: RhoLike, spec: ModelSpec) -> np.ndarray:
    """Plug-in tau^2 along the last axis: residual I_j averages times lagged G/B averages."""
    lag, cur = _split(values)
    if cur.shape[-1] < MIN_PLUGIN_SAMPLE:
        raise InsufficientDataError(
            f"plug-in tau^2 needs at least {MIN_PLUGIN_SAMPLE} observations, got {cur.shape[-1]}"
        )
    if spec.g.is_zero and (spec.b is None or spec.b.is_zero):
        return np.zeros(lag.shape[:-1])
    i0, i1, i2 = empirical_moment_averages(_residuals(lag, cur, rho))
    g_lag = spec.g(lag)
    value = i0 * np.mean(g_lag * g_lag, axis=-1)
    if spec.family is Family.ARCH:
        b_lag = spec.b(lag)
        value = value + 0.25 * (i2 - 1.0) * np.mean(b_lag * b_lag, axis=-1)
        value = value + i1 * np.mean(g_lag * b_lag, axis=-1)
    return np.asarray(value, dtype=float)


def tau2_plugin(sample: SeriesSample, rho: float, spec: ModelSpec) -> Tau2:
    value = float(plugin_tau2_values(sample.values, rho, spec))
    if value < 0.0:
        raise NumericError(f"plug-in tau^2 is negative ({value:.4g})")
    return Tau2(value=value, source=Tau2Source.PLUGIN)


def log_likelihood_ratio_values(values: np.ndarray, spec: ModelSpec) -> np.ndarray:
    if spec.family is not Family.AR1:
        raise DomainError("the closed-form log-likelihood ratio is implemented for ar1 only")
    lag, cur = _split(values)
    eps = _residuals(lag, cur, spec.rho0)
    shift = spec.g(lag) / math.sqrt(spec.n)
    return np.sum(normal_logpdf(eps - shift) - normal_logpdf(eps), axis=-1)


def log_likelihood_ratio(sample: SeriesSample, spec: ModelSpec) -> float:
    """Lambda_n = log of the local-alternative over the null likelihood, given Y_0."""
    return float(log_likelihood_ratio_values(sample.values, spec))


def lan_remainder_values(values: np.ndarray, spec: ModelSpec, tau2: Optional[Tau2] = None) -> np.ndarray:
    tau2 = tau2 or tau2_analytic(spec)
    value, _ = central_terms(values, spec.rho0, spec.g, spec.b)
    return log_likelihood_ratio_values(values, spec) - value + 0.5 * tau2.value


def lan_remainder(sample: SeriesSample, spec: ModelSpec, tau2: Optional[Tau2] = None) -> float:
    """Lambda_n - V_n(rho0) + tau^2 / 2, which vanishes in probability under the null."""
    return float(lan_remainder_values(sample.values, spec, tau2))
