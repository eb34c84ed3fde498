from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from inference import BiasSource, C1Source
from lan import MIN_PLUGIN_SAMPLE
from models import Family


class Variant(str, Enum):
    TRUE_PARAM = "true_param"
    LSE = "lse"
    ME = "me"


def default_amplitude_grid() -> List[float]:
    return [round(float(a), 10) for a in np.linspace(0.0, 2.0, 21)]


FIGURE_PRESETS = {
    "ar1": {
        "family": "ar1",
        "rho0": 0.1,
        "alpha": 0.05,
        "n_list": [30, 40, 80, 400],
        "m": 1000,
        "coefficient": 5.0,
    },
    "arch": {
        "family": "arch",
        "rho0": 0.1,
        "alpha": 0.05,
        "n_list": [30, 40, 80, 200],
        "m": 1000,
        "coefficient": 3.5,
        "b_coefficient": 3.5,
    },
}


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    family: Family = Family.AR1
    rho0: float = 0.1
    coefficient: float = 5.0
    b_coefficient: Optional[float] = None
    test_amplitude: float = 1.0
    amplitude_grid: List[float] = Field(default_factory=default_amplitude_grid, min_length=1)
    n_list: List[int] = Field(default_factory=lambda: [30, 40, 80, 400], min_length=1)
    m: int = Field(default=1000, ge=1)
    alpha: float = Field(default=0.05, gt=0.0, lt=1.0)
    variants: List[Variant] = Field(default_factory=lambda: list(Variant), min_length=1)
    b_mode: BiasSource = BiasSource.ORACLE
    c1_mode: C1Source = C1Source.EMPIRICAL
    B: int = Field(default=500, ge=100)
    bootstrap_alongside: bool = True
    master_seed: int = Field(default=20240101, ge=0)
    burn_in: Optional[int] = Field(default=None, ge=0)
    output_dir: str = "results"
    plot: bool = True

    @field_validator("rho0")
    @classmethod
    def _stationary(cls, value: float) -> float:
        if not abs(value) < 1.0:
            raise ValueError(f"stationarity requires |rho0| < 1, got {value}")
        return value

    @field_validator("test_amplitude")
    @classmethod
    def _nonzero_direction(cls, value: float) -> float:
        if value <= 0.0:
            raise ValueError("test_amplitude must be positive")
        return value

    @field_validator("n_list")
    @classmethod
    def _positive_sizes(cls, value: List[int]) -> List[int]:
        if any(n < 2 for n in value):
            raise ValueError("every sample size must be at least 2")
        return value

    @model_validator(mode="after")
    def _arch_needs_b(self) -> "ExperimentConfig":
        if self.family is Family.ARCH and self.b_coefficient is None:
            self.b_coefficient = self.coefficient
        if self.family is Family.AR1:
            self.b_coefficient = None
        return self

    @model_validator(mode="after")
    def _plugin_needs_data(self) -> "ExperimentConfig":
        if {Variant.LSE, Variant.ME} & set(self.variants) and min(self.n_list) < MIN_PLUGIN_SAMPLE:
            raise ValueError(f"the lse and me variants use plug-in tau^2, which needs n >= {MIN_PLUGIN_SAMPLE}")
        return self


class PowerRow(BaseModel):
    family: Family
    n: int
    a: float
    variant: Variant
    m: int
    rejection_rate: float = Field(ge=0.0, le=1.0)
    mc_stderr: float = Field(ge=0.0)
    asymptotic_power: float
    seed: int
    limiting_power: float
    failures: int = 0
    b_source: Optional[BiasSource] = None


class DiagnosticRow(BaseModel):
    family: Family
    n: int
    m: int
    c1_mean: float
    c1_stderr: float
    c1_analytic: float
    d2_bound_mean: float
    d2_bound_rate: float
    degenerate_rate: float
    gradient_shift_mean: float
    lan_remainder_mean: Optional[float] = None
    lan_remainder_stderr: Optional[float] = None
    absorption_median: float


class SeriesSummary(BaseModel):
    n: int
    mean: float
    variance: float
    lag1_autocorrelation: float
