"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An argument breaks a documented precondition (dimension mismatch,
    non-finite input, out-of-range time, empty input, ...)."""


class UnsupportedOracle(ValueError):
    """A closed-form endpoint was requested for a field kind that has none."""


class NumericalBlowup(ArithmeticError):
    """A solver produced a non-finite state."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class StiffnessError(ArithmeticError):
    """Adaptive step control underflowed the minimum step size."""


class TrainingDiverged(RuntimeError):
    """The training loss became non-finite."""

    def __init__(self, step: int):
        super().__init__(f"training loss became non-finite at step {step}")
        self.step = step


class WeightFormatError(ValueError):
    """A weight document is malformed or truncated.

    ``offset`` is the byte position at which parsing failed.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class WeightSchemaError(ValueError):
    """A weight document parses but declares inconsistent dimensions."""


class ConfigError(ValueError):
    """An experiment configuration document is invalid."""
