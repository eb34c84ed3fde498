"""Standard-normal machinery: density, score, CDF, quantile and the I_j moments."""

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfc

from exceptions import DomainError

ArrayLike = Union[float, np.ndarray]

_SQRT2 = math.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_QUANTILE_BRACKET = 38.0
_QUANTILE_XTOL = 1e-12


@dataclass(frozen=True)
class NoiseMoments:
    """I_j = E(eps^j * M_f(eps)^2) for j = 0, 1, 2."""

    i0: float
    i1: float
    i2: float

    def __post_init__(self):
        if not self.i0 > 0:
            raise DomainError(f"I0 must be positive, got {self.i0}")


def _check_finite(x: ArrayLike, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def _unwrap(arr: np.ndarray) -> ArrayLike:
    return float(arr) if arr.ndim == 0 else arr


def normal_pdf(x: ArrayLike) -> ArrayLike:
    arr = _check_finite(x)
    return _unwrap(np.exp(-0.5 * arr * arr - _LOG_SQRT_2PI))


def normal_logpdf(x: ArrayLike) -> ArrayLike:
    arr = _check_finite(x)
    return _unwrap(-0.5 * arr * arr - _LOG_SQRT_2PI)


def score_mf(x: ArrayLike) -> ArrayLike:
    """f'(x)/f(x) for the standard normal density, which is -x."""
    arr = _check_finite(x)
    return _unwrap(np.negative(arr))


def normal_cdf(x: ArrayLike) -> ArrayLike:
    # erfc keeps full relative accuracy in the lower tail
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)):
        raise DomainError("x must not be NaN")
    return _unwrap(0.5 * erfc(-arr / _SQRT2))


def normal_sf(x: ArrayLike) -> ArrayLike:
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)):
        raise DomainError("x must not be NaN")
    return _unwrap(0.5 * erfc(arr / _SQRT2))


def normal_quantile(alpha: float) -> float:
    """Z(alpha), the (1 - alpha)-quantile, found by bracketed root-finding on the upper tail."""
    if not (isinstance(alpha, (int, float, np.floating)) and 0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if alpha == 0.5:
        return 0.0
    return brentq(
        lambda z: normal_sf(z) - alpha,
        -_QUANTILE_BRACKET,
        _QUANTILE_BRACKET,
        xtol=_QUANTILE_XTOL,
        maxiter=500,
    )


def gaussian_noise_moments() -> NoiseMoments:
    # M_f(eps)^2 = eps^2, so I_j = E(eps^(j+2)): 1, 0, 3
    return NoiseMoments(i0=1.0, i1=0.0, i2=3.0)


def empirical_moment_averages(residuals: np.ndarray) -> tuple[ArrayLike, ArrayLike, ArrayLike]:
    """Sample averages of eps^j * M_f(eps)^2 for j = 0, 1, 2 along the last axis of the residuals.

    Unlike NoiseMoments these may have a zero first entry (all residuals zero).
    """
    eps = _check_finite(residuals, "residuals")
    weight = score_mf(eps) ** 2
    return (
        _unwrap(np.mean(weight, axis=-1)),
        _unwrap(np.mean(eps * weight, axis=-1)),
        _unwrap(np.mean(eps * eps * weight, axis=-1)),
    )
