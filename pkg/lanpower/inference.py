"""Least squares, residual bootstrap and the modified estimator (M.E.).

The modified estimate moves one component of a root-n consistent estimate along the
tangent space of the central sequence so that

    gradient . (phi_bar - phi_hat) = D_n,

which absorbs the plug-in error V_n(phi_hat) - V_n(phi_0) = -D_n.  For the AR(1)
family V_n is affine in rho, so the absorption is exact.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np
from scipy.signal import lfilter

from exceptions import DegenerateComponentError, DegenerateDesignError, DomainError
from lan import central_seq
from models import Functional, ModelSpec, PerturbationSpec, SeedLike, SeriesSample, expected_functional
from settings import get_settings

logger = logging.getLogger(__name__)

MIN_BOOTSTRAP_REPLICATES = 100


class C1Source(str, Enum):
    ANALYTIC = "analytic"
    EMPIRICAL = "empirical"


class BiasSource(str, Enum):
    ORACLE = "oracle_true_rho"
    BOOTSTRAP = "bootstrap"


class Block(str, Enum):
    FIRST = "first"
    SECOND = "second"


@dataclass(frozen=True)
class EstimateReport:
    rho_hat: float
    c1: float
    c1_source: C1Source
    b_hat: float
    b_source: BiasSource
    d_n: float
    rho_bar: float
    modified_component: int = 1
    degenerate: bool = False


@dataclass(frozen=True)
class VectorModifiedEstimate:
    phi_hat: np.ndarray
    phi_bar: np.ndarray
    block: Block
    component: int
    gradient: np.ndarray
    d_n: float


def lse_values(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    lag, cur = values[..., :-1], values[..., 1:]
    denom = np.sum(lag * lag, axis=-1)
    if np.any(denom <= 0.0):
        raise DegenerateDesignError("least squares needs at least one non-zero lagged value")
    return np.sum(cur * lag, axis=-1) / denom


def lse(sample: SeriesSample) -> float:
    """rho_hat = sum Y_i Y_{i-1} / sum Y_{i-1}^2."""
    return float(lse_values(sample.values))


def residuals(sample: SeriesSample, rho: float) -> np.ndarray:
    if sample.n < 1:
        raise DomainError("residuals need at least two observations")
    return sample.current - rho * sample.lagged


def bootstrap_bias(sample: SeriesSample, B: Optional[int] = None, seed: SeedLike = 0) -> float:
    """Efron residual bootstrap of b_n = rho_hat - rho0.

    Centered LSE residuals are resampled with replacement and B series are regenerated
    from the observed Y_0 with rho_hat; the bias estimate is mean(rho*_b) - rho_hat.
    """
    B = get_settings().bootstrap_replicates if B is None else B
    if B < MIN_BOOTSTRAP_REPLICATES:
        raise DomainError(f"bootstrap needs at least {MIN_BOOTSTRAP_REPLICATES} replicates, got {B}")
    rho_hat = lse(sample)
    eps = residuals(sample, rho_hat)
    eps = eps - eps.mean()
    rng = np.random.default_rng(seed)
    draws = rng.choice(eps, size=(B, sample.n), replace=True)
    start = np.full((B, 1), rho_hat * sample.values[0])
    paths = lfilter([1.0], [1.0, -rho_hat], draws, axis=-1, zi=start)[0]
    series = np.concatenate([np.full((B, 1), sample.values[0]), paths], axis=-1)
    rho_star = lse_values(series)
    return float(np.mean(rho_star - rho_hat))


def oracle_bias(rho_hat: float, rho0: float) -> float:
    return rho_hat - rho0


def c1_empirical_values(values: np.ndarray, g: PerturbationSpec) -> np.ndarray:
    lag = np.asarray(values, dtype=float)[..., :-1]
    return -np.mean(lag * g(lag), axis=-1)


def c1_empirical(sample: SeriesSample, g: PerturbationSpec) -> float:
    """Ergodic average -(1/n) sum Y_{i-1} G(Y_{i-1}); equals d1_scaled at any rho."""
    return float(c1_empirical_values(sample.values, g))


def c1_analytic(spec: ModelSpec) -> float:
    return -expected_functional(spec, Functional.YG)


def me_correction(
    rho_hat, b_hat, c1, d1, n: int, tolerance: Optional[float] = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (D_n, rho_bar, degenerate) elementwise.

    D_n = -c1 sqrt(n) b_hat and rho_bar = D_n / d1 + rho_hat, falling back to rho_hat
    where |d1 / sqrt(n)| is below the tolerance.
    """
    tolerance = get_settings().degeneracy_tol if tolerance is None else tolerance
    root_n = math.sqrt(n)
    rho_hat = np.asarray(rho_hat, dtype=float)
    d1 = np.asarray(d1, dtype=float)
    d_n = -np.asarray(c1, dtype=float) * root_n * np.asarray(b_hat, dtype=float)
    degenerate = np.abs(d1 / root_n) < tolerance
    safe_d1 = np.where(degenerate, 1.0, d1)
    rho_bar = np.where(degenerate, rho_hat, d_n / safe_d1 + rho_hat)
    return d_n, rho_bar, degenerate


def modified_estimate_univariate(
    sample: SeriesSample,
    spec: ModelSpec,
    rho_hat: float,
    b_hat: float,
    c1: float,
    c1_source: Union[C1Source, str] = C1Source.EMPIRICAL,
    b_source: Union[BiasSource, str] = BiasSource.ORACLE,
    tolerance: Optional[float] = None,
) -> EstimateReport:
    if not (math.isfinite(rho_hat) and math.isfinite(c1) and math.isfinite(b_hat)):
        raise DomainError("rho_hat, b_hat and c1 must be finite")
    d1 = central_seq(sample, rho_hat, spec).d1
    d_n, rho_bar, degenerate = me_correction(rho_hat, b_hat, c1, d1, sample.n, tolerance)
    if degenerate:
        logger.warning(f"central-sequence slope {d1 / math.sqrt(sample.n):.3g} is degenerate; keeping rho_hat")
    return EstimateReport(
        rho_hat=rho_hat,
        c1=c1,
        c1_source=C1Source(c1_source),
        b_hat=b_hat,
        b_source=BiasSource(b_source),
        d_n=float(d_n),
        rho_bar=float(rho_bar),
        modified_component=1,
        degenerate=bool(degenerate),
    )


def estimate(
    sample: SeriesSample,
    spec: ModelSpec,
    b_mode: Union[BiasSource, str] = BiasSource.ORACLE,
    c1_mode: Union[C1Source, str] = C1Source.EMPIRICAL,
    B: Optional[int] = None,
    seed: SeedLike = 0,
) -> EstimateReport:
    """LSE, bias, c1 and the modified estimate for one sample."""
    b_mode, c1_mode = BiasSource(b_mode), C1Source(c1_mode)
    rho_hat = lse(sample)
    if b_mode is BiasSource.ORACLE:
        b_hat = oracle_bias(rho_hat, spec.rho0)
    else:
        b_hat = bootstrap_bias(sample, B, seed)
    c1 = c1_empirical(sample, spec.g) if c1_mode is C1Source.EMPIRICAL else c1_analytic(spec)
    return modified_estimate_univariate(sample, spec, rho_hat, b_hat, c1, c1_mode, b_mode)


def _block_of(component: int, block_sizes: tuple[int, int]) -> Block:
    first, second = block_sizes
    if 1 <= component <= first:
        return Block.FIRST
    if first < component <= first + second:
        return Block.SECOND
    raise DomainError(f"component {component} is outside 1..{first + second}")


def modified_estimate_vector(
    phi_hat: Sequence[float],
    gradient: Sequence[float],
    d_n: float,
    block_sizes: tuple[int, int],
    component: int,
    block: Optional[Union[Block, str]] = None,
    tolerance: Optional[float] = None,
) -> VectorModifiedEstimate:
    """Modify the (1-based) ``component`` of phi_hat so that gradient . (phi_bar - phi_hat) = d_n."""
    tolerance = get_settings().degeneracy_tol if tolerance is None else tolerance
    phi_hat = np.asarray(phi_hat, dtype=float)
    gradient = np.asarray(gradient, dtype=float)
    ell, p = block_sizes
    if ell < 0 or p < 0 or phi_hat.shape != (ell + p,) or gradient.shape != phi_hat.shape:
        raise DomainError(f"phi_hat and gradient must both have length {ell + p}")
    found = _block_of(component, block_sizes)
    if block is not None and Block(block) is not found:
        raise DomainError(f"component {component} is not in the {Block(block).value} block")
    slope = gradient[component - 1]
    if abs(slope) < tolerance:
        raise DegenerateComponentError(component, float(slope), tolerance)
    phi_bar = phi_hat.copy()
    phi_bar[component - 1] = d_n / slope + phi_hat[component - 1]
    return VectorModifiedEstimate(
        phi_hat=phi_hat, phi_bar=phi_bar, block=found, component=component, gradient=gradient, d_n=d_n
    )


def max_gradient_component(
    gradient: Sequence[float], block_sizes: tuple[int, int], block: Union[Block, str] = Block.FIRST
) -> int:
    """1-based index of the largest |gradient| entry inside the requested block."""
    gradient = np.abs(np.asarray(gradient, dtype=float))
    ell, p = block_sizes
    if Block(block) is Block.FIRST:
        offset, width = 0, ell
    else:
        offset, width = ell, p
    if width == 0:
        raise DomainError(f"the {Block(block).value} block is empty")
    return offset + int(np.argmax(gradient[offset : offset + width])) + 1


def gradient_stability(sample: SeriesSample, spec: ModelSpec, rho_hat: float) -> float:
    """|V'_n(rho_hat) - V'_n(rho0)| / sqrt(n); small values support the c1 limit at rho_hat."""
    at_hat = central_seq(sample, rho_hat, spec).d1_scaled
    at_true = central_seq(sample, spec.rho0, spec).d1_scaled
    return abs(at_hat - at_true)
