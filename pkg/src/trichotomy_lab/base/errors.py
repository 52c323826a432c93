"""Exception hierarchy for trichotomy-lab."""

from __future__ import annotations


class TrichotomyLabError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(TrichotomyLabError, ValueError):
    """A setting or environment variable could not be parsed."""


class DimensionMismatchError(TrichotomyLabError, ValueError):
    """An operator or vector does not have the expected shape."""


class NonFiniteEntryError(TrichotomyLabError, ValueError):
    """An operator contains NaN or Inf."""


class WindowError(TrichotomyLabError, IndexError):
    """A step pair lies outside the admissible window."""


class RateError(TrichotomyLabError, ValueError):
    """A rate sequence is malformed or undefined on the requested steps."""


class FamilyError(TrichotomyLabError, ValueError):
    """A projection family is malformed or fails a required validation."""


class EnvelopeError(TrichotomyLabError, ValueError):
    """An inequality envelope is nonpositive or not finite."""


class GeneratorError(TrichotomyLabError, ValueError):
    """A generator spec or corruption request cannot be honoured."""


class PreconditionError(TrichotomyLabError, ValueError):
    """An operation was called on inputs that fail its precondition."""


class IncompatibleSplittingError(PreconditionError):
    """Two dichotomy splittings do not satisfy the S/T identities."""


class CouplingInconsistencyError(PreconditionError):
    """Two rescaled systems do not derive from the same base system."""


class TheoremViolationError(TrichotomyLabError):
    """A theorem's conclusion failed on inputs satisfying its hypotheses."""

    def __init__(self, stage: str, message: str) -> None:
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class DocumentError(TrichotomyLabError, ValueError):
    """A JSON document is malformed; `location` points at the offending field."""

    def __init__(self, message: str, location: str = "") -> None:
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location
