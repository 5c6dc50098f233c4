"""Exception hierarchy.

``DataError`` subclasses describe problems with user input (exit status 2
in the CLI); ``InvariantViolation`` means the library produced something
it should never produce (exit status 3).
"""


class ErrconsError(Exception):
    """Base class for every error raised by this package."""


class DataError(ErrconsError):
    pass


class DomainError(DataError, ValueError):
    """A numeric argument lies outside its admissible range."""


class UndefinedKappaError(DomainError):
    """Kappa (or its bounds) is undefined because chance agreement is 1."""


class EmptyInputError(DataError, ValueError):
    pass


class AlignmentError(DataError):
    """Outcome vectors or trial sets do not line up."""


class IncompleteTrialsError(AlignmentError):
    def __init__(self, observer, trial, message=None):
        self.observer = observer
        self.trial = trial
        super().__init__(message or f"observer {observer!r} has no response for trial {trial!r}")


class UnknownObserverError(DataError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown observer"


class ParseError(DataError):
    """Malformed input file. ``problems`` holds ``(source, line, message)`` triples."""

    def __init__(self, problems):
        self.problems = list(problems)
        lines = [f"{src}:{line}: {msg}" if line else f"{src}: {msg}" for src, line, msg in self.problems]
        super().__init__("\n".join(lines))


class DuplicateRecordError(ParseError):
    pass


class InsufficientDataError(DataError, ValueError):
    pass


class TableMismatchError(DataError):
    """A percentile table was simulated for a different trial count."""


class SpecError(ErrconsError, ValueError):
    """Invalid simulation configuration."""


class InvariantViolation(ErrconsError):
    """An internal consistency check failed; indicates a bug."""
