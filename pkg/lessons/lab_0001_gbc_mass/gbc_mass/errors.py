"""
Exception hierarchy for the GBC mass lab.

Every error raised on purpose by the package derives from ``GBCMassError``
so callers (and the CLI) can map failures to exit codes in one place.
"""


class GBCMassError(Exception):
    """Base class for all package errors."""

    exit_code: int = 3


class ContractViolation(GBCMassError, AssertionError):
    """An argument broke an operation contract (arity, shape, type)."""


class DomainError(GBCMassError):
    """A point, radius, order or step lies outside the admissible domain."""


class ModelError(GBCMassError):
    """A model produced an invalid metric (not positive definite)."""


class ImmersionError(GBCMassError):
    """An immersion differential is rank deficient at a point."""


class IntegrabilityError(GBCMassError):
    """A bulk integrand decays too slowly to be integrable."""


class SpecError(GBCMassError):
    """A model spec names an unknown model or invalid parameters."""

    exit_code = 2


class ConfigError(GBCMassError):
    """
    A run configuration could not be read or validated.

    Args:
        message: Human readable description
        field: Dotted path of the offending field, if known
        line: 1-based line number for syntax errors, if known
        column: 1-based column number for syntax errors, if known
    """

    exit_code = 2

    def __init__(
        self,
        message: str,
        field: str | None = None,
        line: int | None = None,
        column: int | None = None,
    ):
        self.field = field
        self.line = line
        self.column = column
        location = ""
        if field is not None:
            location = f" [{field}]"
        if line is not None:
            location += f" (line {line}, column {column})"
        super().__init__(f"{message}{location}")
