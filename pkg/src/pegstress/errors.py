"""Exception hierarchy shared by every module.

Input problems (bad files, bad config) and computation problems are kept
apart so the CLI can map them onto distinct exit codes.
"""


class PegStressError(Exception):
    """Base class for all package errors."""


class InputError(PegStressError):
    """Malformed or missing input data / configuration."""


class SchemaError(InputError):
    def __init__(self, column, path=None):
        self.column = column
        self.path = path
        where = f" in {path}" if path else ""
        super().__init__(f"missing required column '{column}'{where}")


class RowError(InputError):
    def __init__(self, line, message, path=None):
        self.line = line
        where = f"{path}:" if path else "line "
        super().__init__(f"{where}{line}: {message}")


class ValidationError(InputError):
    pass


class DomainError(PegStressError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class SingularMatrixError(PegStressError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__("design matrix is rank deficient; collinear columns: " + ", ".join(self.columns))


class SimulationError(PegStressError):
    def __init__(self, message, trial=None, day=None):
        self.trial = trial
        self.day = day
        ctx = []
        if trial is not None:
            ctx.append(f"trial={trial}")
        if day is not None:
            ctx.append(f"day={day}")
        suffix = f" ({', '.join(ctx)})" if ctx else ""
        super().__init__(message + suffix)
