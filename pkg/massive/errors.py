"""
Exception hierarchy for the MASSIVE toolkit.

Every input error is also a ValueError so callers can catch either.
"""
from typing import List, Tuple


class MassiveError(Exception):
    """Root of all toolkit errors."""


class InvalidInputError(MassiveError, ValueError):
    """Non-physical or malformed input."""


class UnitMismatchError(InvalidInputError):
    """Arithmetic or parsing across incompatible units."""


class OutOfModelError(InvalidInputError):
    """A model was evaluated outside its validity window."""


class ConvergenceError(MassiveError):
    """A root finder or fitter did not converge."""

    def __init__(self, message: str, best_residual: float):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual


class MissingEvidenceError(InvalidInputError):
    """Protocol evidence lacks a field the current step needs."""

    def __init__(self, step: str, field: str):
        super().__init__(f"step {step} requires evidence field '{field}'")
        self.step = step
        self.field = field


class CoverageError(InvalidInputError):
    """A microwave pulse falls outside the antenna coverage."""

    def __init__(self, message: str, pulse_index: int):
        super().__init__(message)
        self.pulse_index = pulse_index


class ScenarioParseError(InvalidInputError):
    """Scenario text could not be parsed; carries every offending line."""

    def __init__(self, errors: List[Tuple[int, str]]):
        self.errors = list(errors)
        lines = "\n".join(f"  line {line}: {msg}" for line, msg in self.errors)
        super().__init__(f"{len(self.errors)} scenario error(s):\n{lines}")


class ProtocolStepError(MassiveError):
    """An error raised while executing a protocol step."""

    def __init__(self, step: str, cause: Exception):
        super().__init__(f"[{step}] {cause}")
        self.step = step
        self.cause = cause

    @property
    def is_input_error(self) -> bool:
        return isinstance(self.cause, InvalidInputError)

