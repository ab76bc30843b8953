"""Exception hierarchy shared by all modules."""


class LabError(Exception):
    """Base class for every error raised by enprolab."""


class DimensionError(LabError, ValueError):
    pass


class DomainError(LabError, ValueError):
    pass


class ParameterError(LabError, ValueError):
    pass


class InsufficientDataError(LabError, ValueError):
    pass


class DegenerateSplitError(LabError, ValueError):
    pass


class DegenerateLabelsError(LabError, ValueError):
    pass


class NumericalError(LabError, ArithmeticError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class EvaluationError(LabError, ValueError):
    pass


class ConfigError(LabError, ValueError):
    pass


class LeakageError(LabError):
    """A training step touched a test-set row while leakage was not allowed."""
