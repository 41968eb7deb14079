"""Exception hierarchy shared by all turnmix modules."""


class TurnmixError(Exception):
    """Base class for every error raised by turnmix."""


class InvalidArgumentError(TurnmixError, ValueError):
    pass


class DegenerateStepError(TurnmixError, ValueError):
    """Raised when two consecutive positions coincide (no defined bearing)."""


class InsufficientPathError(TurnmixError, ValueError):
    pass


class SchemaError(TurnmixError):
    """A required column is missing from an input table."""

    def __init__(self, column, source=""):
        self.column = column
        self.source = source
        where = f" in {source}" if source else ""
        super().__init__(f"missing required column {column!r}{where}")


class MissingDefenderError(TurnmixError, ValueError):
    pass


class AlignmentError(TurnmixError, ValueError):
    """Fewer than 21 other players are available at a carrier frame."""


class DimensionError(TurnmixError, ValueError):
    pass


class InitializationError(TurnmixError, RuntimeError):
    pass


class ConfigError(TurnmixError, ValueError):
    pass
