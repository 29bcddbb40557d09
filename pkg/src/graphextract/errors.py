"""Exception types shared across the package."""


class GraphExtractError(Exception):
    """Base class for all errors raised by this package."""


class StructuralError(GraphExtractError):
    """Malformed graph structure or mismatched array dimensions."""


class ConfigError(GraphExtractError):
    """Invalid configuration value; message names the offending field."""


class UsageError(GraphExtractError):
    """Operation called with arguments that violate its preconditions."""


class NumericalError(GraphExtractError):
    """Iterative routine failed to converge within its limits."""


class TrainingDivergedError(GraphExtractError):
    """Loss became non-finite during training."""

    def __init__(self, epoch: int, loss: float):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"non-finite loss {loss!r} at epoch {epoch}")


class BudgetExceededError(GraphExtractError):
    """A label query would exceed the total query budget."""


class DatasetFormatError(GraphExtractError):
    """Unreadable or inconsistent dataset file."""

    def __init__(self, filename: str, line: int | None, message: str):
        self.filename = filename
        self.line = line
        where = f"{filename}:{line}" if line is not None else filename
        super().__init__(f"{where}: {message}")
