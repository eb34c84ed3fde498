from typing import Optional


class LanPowerError(Exception):
    exit_code = 1


class DomainError(LanPowerError, ValueError):
    pass


class NumericError(LanPowerError, ArithmeticError):
    pass


class SimulationError(LanPowerError):
    def __init__(self, message: str, step: Optional[int] = None):
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
        self.step = step


class DegenerateDesignError(LanPowerError):
    pass


class InsufficientDataError(LanPowerError):
    pass


class DegenerateComponentError(LanPowerError):
    def __init__(self, index: int, value: float, tolerance: float):
        super().__init__(
            f"gradient component {index} = {value:.3g} is below tolerance {tolerance:.3g}"
        )
        self.index = index
        self.value = value


class DegenerateTestError(LanPowerError):
    pass


class ConfigError(LanPowerError):
    exit_code = 2


class ReplicateFailureError(LanPowerError):
    def __init__(self, failed: int, total: int, partial=None):
        super().__init__(f"{failed} of {total} replicates failed")
        self.failed = failed
        self.total = total
        self.partial = partial
