"""AR(1)- and ARCH-contiguous models: specifications, simulation and stationary-law functionals.

Under the null both families reduce to the Gaussian AR(1) Y_i = rho0 * Y_{i-1} + eps_i.
Under the local alternative the recursion gains a drift n^{-1/2} G(Y_{i-1}) and, for
ARCH, the innovation scale becomes sqrt(1 + n^{-1/2} B(Y_{i-1})).  The large-n form
1 + n^{-1/2} B / 2 of that scale is available as ``arch_scale_approx`` but is never
used for simulation.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import integrate

from dist import normal_pdf
from exceptions import DomainError, NumericError, SimulationError
from settings import get_settings

SeedLike = Union[int, np.random.SeedSequence]

QUAD_TOL = 1e-10


class Family(str, Enum):
    AR1 = "ar1"
    ARCH = "arch"


class Hypothesis(str, Enum):
    NULL = "null"
    LOCAL_ALTERNATIVE = "local_alternative"


class PerturbationKind(str, Enum):
    RECIPROCAL_QUADRATIC = "reciprocal-quadratic"


class Functional(str, Enum):
    G2 = "G2"
    B2 = "B2"
    GB = "GB"
    YG = "YG"


_SHAPES: dict[PerturbationKind, Callable[[np.ndarray], np.ndarray]] = {
    PerturbationKind.RECIPROCAL_QUADRATIC: lambda y: 1.0 / (1.0 + y * y),
}

# sup |shape(y)| per kind
_SHAPE_BOUNDS: dict[PerturbationKind, float] = {
    PerturbationKind.RECIPROCAL_QUADRATIC: 1.0,
}


@dataclass(frozen=True)
class PerturbationSpec:
    """G(y) = coefficient * a * shape(y) with shape depending on the first lag only."""

    amplitude_a: float
    coefficient: float
    kind: PerturbationKind = PerturbationKind.RECIPROCAL_QUADRATIC

    def __post_init__(self):
        if not (math.isfinite(self.amplitude_a) and math.isfinite(self.coefficient)):
            raise DomainError("perturbation amplitude and coefficient must be finite")
        object.__setattr__(self, "kind", PerturbationKind(self.kind))

    @property
    def scale(self) -> float:
        return self.coefficient * self.amplitude_a

    @property
    def bound(self) -> float:
        return abs(self.scale) * _SHAPE_BOUNDS[self.kind]

    @property
    def is_zero(self) -> bool:
        return self.scale == 0.0

    def shape(self, y: np.ndarray) -> np.ndarray:
        return _SHAPES[self.kind](np.asarray(y, dtype=float))

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return self.scale * self.shape(y)

    def with_amplitude(self, amplitude_a: float) -> "PerturbationSpec":
        return replace(self, amplitude_a=amplitude_a)


@dataclass(frozen=True)
class ModelSpec:
    family: Family
    rho0: float
    g: PerturbationSpec
    n: int
    hypothesis: Hypothesis = Hypothesis.NULL
    b: Optional[PerturbationSpec] = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "hypothesis", Hypothesis(self.hypothesis))
        if not (math.isfinite(self.rho0) and abs(self.rho0) < 1.0):
            raise DomainError(f"stationarity requires |rho0| < 1, got rho0={self.rho0}")
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise DomainError(f"n must be a positive integer, got {self.n}")
        if self.family is Family.ARCH and self.b is None:
            raise DomainError("arch models need a variance perturbation B")
        if self.family is Family.AR1 and self.b is not None:
            raise DomainError("ar1 models take no variance perturbation B")

    @property
    def contiguity_scale(self) -> float:
        """alpha = beta = n^{-1/2} under the local alternative, 0 under the null."""
        if self.hypothesis is Hypothesis.NULL:
            return 0.0
        return 1.0 / math.sqrt(self.n)

    @property
    def variance_margin(self) -> float:
        """Worst-case 1 - n^{-1/2} sup|B|; positivity is guaranteed when this is > 0."""
        if self.family is not Family.ARCH:
            return 1.0
        return 1.0 - self.contiguity_scale * self.b.bound

    def with_amplitude(self, amplitude_a: float) -> "ModelSpec":
        b = self.b.with_amplitude(amplitude_a) if self.b is not None else None
        return replace(self, g=self.g.with_amplitude(amplitude_a), b=b)

    def with_hypothesis(self, hypothesis: Hypothesis) -> "ModelSpec":
        return replace(self, hypothesis=Hypothesis(hypothesis))

    def with_n(self, n: int) -> "ModelSpec":
        return replace(self, n=n)


@dataclass
class SeriesSample:
    values: np.ndarray
    burn_in: int = 0
    seed: Optional[SeedLike] = field(default=None, compare=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 1:
            raise DomainError("a series needs at least one value")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("series values must be finite")

    @property
    def n(self) -> int:
        return self.values.size - 1

    @property
    def lagged(self) -> np.ndarray:
        return self.values[:-1]

    @property
    def current(self) -> np.ndarray:
        return self.values[1:]


def arch_scale(b_values: np.ndarray, beta: float) -> np.ndarray:
    return np.sqrt(1.0 + beta * b_values)


def arch_scale_approx(b_values: np.ndarray, beta: float) -> np.ndarray:
    return 1.0 + 0.5 * beta * b_values


def draw_innovations(seed: SeedLike, count: int) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal(count)


def _run_recursion(spec: ModelSpec, innovations: np.ndarray, burn_in: int) -> np.ndarray:
    """Run the model recursion row-wise from Y = 0 and keep the last n + 1 states."""
    paths, steps = innovations.shape
    scale = spec.contiguity_scale
    out = np.empty((paths, spec.n + 1))
    y = np.zeros(paths)
    if burn_in == 0:
        out[:, 0] = y
    for step in range(steps):
        mean = spec.rho0 * y
        if scale:
            mean = mean + scale * spec.g(y)
        eps = innovations[:, step]
        if spec.family is Family.ARCH and scale:
            b_values = spec.b(y)
            if np.any(1.0 + scale * b_values <= 0.0):
                raise SimulationError("conditional variance is not positive", step=step)
            y = mean + arch_scale(b_values, scale) * eps
        else:
            y = mean + eps
        if not np.all(np.isfinite(y)):
            raise SimulationError("trajectory diverged", step=step)
        index = step + 1 - burn_in
        if index >= 0:
            out[:, index] = y
    return out


def simulate(spec: ModelSpec, seed: SeedLike, burn_in: Optional[int] = None) -> SeriesSample:
    burn_in = get_settings().burn_in if burn_in is None else burn_in
    innovations = draw_innovations(seed, burn_in + spec.n)[np.newaxis, :]
    values = _run_recursion(spec, innovations, burn_in)[0]
    return SeriesSample(values=values, burn_in=burn_in, seed=seed)


def simulate_batch(
    spec: ModelSpec, seeds: Sequence[SeedLike], burn_in: Optional[int] = None
) -> np.ndarray:
    """Row r equals ``simulate(spec, seeds[r]).values`` exactly."""
    burn_in = get_settings().burn_in if burn_in is None else burn_in
    innovations = np.stack([draw_innovations(s, burn_in + spec.n) for s in seeds])
    return _run_recursion(spec, innovations, burn_in)


def stationary_variance(spec: ModelSpec) -> float:
    if spec.family is not Family.AR1 or spec.hypothesis is not Hypothesis.NULL:
        raise DomainError("the closed-form stationary variance needs an ar1 spec under the null")
    return _null_variance(spec.rho0)


def _null_variance(rho0: float) -> float:
    return 1.0 / (1.0 - rho0 * rho0)


def _gaussian_expectation(integrand: Callable[[float], float], variance: float) -> float:
    sd = math.sqrt(variance)
    value, abserr, info = integrate.quad(
        lambda y: integrand(y) * normal_pdf(y / sd) / sd,
        -np.inf,
        np.inf,
        epsabs=QUAD_TOL,
        epsrel=QUAD_TOL,
        limit=200,
        full_output=1,
    )[:3]
    if abserr > 1e-8 or not math.isfinite(value):
        raise NumericError(f"quadrature did not converge (abserr={abserr:.2e}, evals={info['neval']})")
    return value


def expected_functional(spec: ModelSpec, functional: Union[Functional, str]) -> float:
    """E[functional(Y)] under the null stationary law Y ~ N(0, 1/(1 - rho0^2)).

    An ARCH process under the null is the same Gaussian AR(1), so both families share
    this law; amplitudes are factored out of the integral so the result is exactly
    quadratic in a.
    """
    functional = Functional(functional)
    variance = _null_variance(spec.rho0)
    g = spec.g
    if functional in (Functional.B2, Functional.GB) and spec.b is None:
        raise DomainError(f"functional {functional.value} needs a variance perturbation B")
    if functional is Functional.G2:
        scale = g.scale * g.scale
        integrand = lambda y: g.shape(y) ** 2
    elif functional is Functional.B2:
        scale = spec.b.scale * spec.b.scale
        integrand = lambda y: spec.b.shape(y) ** 2
    elif functional is Functional.GB:
        scale = g.scale * spec.b.scale
        integrand = lambda y: g.shape(y) * spec.b.shape(y)
    else:
        scale = g.scale
        integrand = lambda y: y * g.shape(y)
    if scale == 0.0:
        return 0.0
    return scale * _gaussian_expectation(integrand, variance)
