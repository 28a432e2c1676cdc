"""Exception types raised across fraudbench."""


class FraudBenchError(Exception):
    """Base class for every error raised by this package."""


class SchemaError(FraudBenchError, ValueError):
    """CSV header is missing a required column or carries an unknown one."""

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class ParseError(FraudBenchError, ValueError):
    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class EmptyDatasetError(FraudBenchError, ValueError):
    pass


class ParameterError(FraudBenchError, ValueError):
    pass


class InputError(FraudBenchError, ValueError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DegenerateError(FraudBenchError):
    """A random draw produced a set without one of the two classes.

    Callers (the Monte Carlo harness in particular) catch this family and retry
    with a fresh seed.
    """


class DegeneratePartitionError(DegenerateError):
    pass


class SplitError(DegenerateError):
    pass


class InsufficientMinorityError(DegenerateError, ValueError):
    """Too few fraud records in a pool to build the requested neighborhood."""


class InfeasibleRatioError(FraudBenchError, ValueError):
    pass


class TrainingError(FraudBenchError, ValueError):
    pass


class InfeasibleCeilingError(FraudBenchError, ValueError):
    pass


class ConvergenceWarning(UserWarning):
    pass
