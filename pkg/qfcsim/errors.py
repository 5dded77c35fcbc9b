from __future__ import annotations

from typing import Optional


class QfcError(Exception):
    """Base class for every error raised by qfcsim."""


class InvalidParameterError(QfcError, ValueError):
    pass


class InvalidInputError(QfcError, ValueError):
    pass


class InvalidStateError(QfcError, ValueError):
    pass


class ThermalStabilityError(QfcError, ValueError):
    pass


class FitError(QfcError, RuntimeError):
    pass


class ReconstructionError(QfcError, RuntimeError):
    pass


class UndefinedRatioError(QfcError, ZeroDivisionError):
    def __init__(self, message: str, lower_bound: Optional[float] = None):
        super().__init__(message)
        # Ratio obtained by treating the empty denominator as a single count.
        self.lower_bound = lower_bound


class ScenarioError(QfcError):
    def __init__(self, message: str, stage: Optional[str] = None):
        super().__init__(message)
        self.stage = stage


class LossBudgetWarning(UserWarning):
    pass
