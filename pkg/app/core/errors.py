# app/core/errors.py

from typing import List, Optional


class HazardError(Exception):
    """Base class for every failure raised by the estimation stack."""


class DataValidationError(HazardError):
    """Input rows failed validation. Carries every violation found."""

    def __init__(self, violations: List[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations) if self.violations else "invalid data")


class ConfigError(HazardError):
    def __init__(self, violations: List[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class SimulationError(HazardError):
    pass


class KernelError(HazardError):
    pass


class EmptyWindowError(HazardError):
    def __init__(self, detail: Optional[str] = None):
        super().__init__("empty window" + (f": {detail}" if detail else ""))


class InsufficientWindowError(HazardError):
    def __init__(self, detail: Optional[str] = None):
        super().__init__("insufficient window" + (f": {detail}" if detail else ""))


class NoEventsError(HazardError):
    def __init__(self, detail: Optional[str] = None):
        super().__init__("no events" + (f": {detail}" if detail else ""))


class SingularMatrixError(HazardError):
    def __init__(self, condition_number: float):
        self.condition_number = condition_number
        super().__init__(f"singular information matrix (condition number {condition_number:.3e})")


class UnboundedBandwidthError(HazardError):
    def __init__(self):
        super().__init__("unbounded optimal bandwidth")


class PilotError(HazardError):
    pass
