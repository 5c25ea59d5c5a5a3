"""Exception hierarchy shared by all scalelaws modules."""


class ScaleLawsError(Exception):
    """Base class for all scalelaws errors."""


class DomainError(ScaleLawsError, ValueError):
    """An input is outside the mathematical domain of an operation."""


class InsufficientDataError(ScaleLawsError, ValueError):
    """Too few points (or too few distinct abscissae) to identify a fit."""


class DegenerateDataError(ScaleLawsError, ValueError):
    """Data carries no identifiable trend (e.g. all losses equal)."""


class NotDecomposableError(ScaleLawsError, ValueError):
    """A pure power law has no constant term to decompose."""


class NoSolutionError(ScaleLawsError, ValueError):
    """The requested algebraic inversion has no solution."""


class IngestError(ScaleLawsError, ValueError):
    """A run-log file failed to parse or violated a record invariant."""

    def __init__(self, message, line=None, run_id=None):
        super().__init__(message)
        self.line = line
        self.run_id = run_id
