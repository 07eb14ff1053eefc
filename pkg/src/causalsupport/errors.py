"""Exception and warning types shared across the package.

Every error raised by library code derives from :class:`CausalSupportError`
so callers (notably the command line driver) can catch one base class and
report a structured failure.  Each subclass carries enough context to name
the offending column, row, or group without re-parsing the message string.
"""

from __future__ import annotations


class CausalSupportError(Exception):
    """Base class for all errors raised by this package."""

    def details(self) -> dict:
        """Structured payload for machine-readable error reports."""
        return {}


class ConfigError(CausalSupportError):
    """A configuration value is outside its documented domain."""


class MissingColumnError(CausalSupportError):
    def __init__(self, column: str):
        super().__init__(f"required column {column!r} not found in header")
        self.column = column

    def details(self) -> dict:
        return {"column": self.column}


class MissingValueError(CausalSupportError):
    """A cell is empty or cannot be read as a finite number.

    ``row`` is the 1-based data row (header excluded), ``column`` the header
    name of the offending field.
    """

    def __init__(self, row: int, column: str, value: str = ""):
        super().__init__(
            f"missing or unreadable value at row {row}, column {column!r}: {value!r}"
        )
        self.row = row
        self.column = column
        self.value = value

    def details(self) -> dict:
        return {"row": self.row, "column": self.column, "value": self.value}


class NonBinaryTreatmentError(CausalSupportError):
    def __init__(self, row: int, value: str):
        super().__init__(f"treatment value at row {row} is not 0/1: {value!r}")
        self.row = row
        self.value = value

    def details(self) -> dict:
        return {"row": self.row, "value": self.value}


class EmptyGroupError(CausalSupportError):
    """One treatment arm has no observations."""

    def __init__(self, group: int, where: str = ""):
        msg = f"treatment group z={group} is empty"
        if where:
            msg += f" ({where})"
        super().__init__(msg)
        self.group = group

    def details(self) -> dict:
        return {"group": self.group}


class DegenerateOutcomeError(CausalSupportError):
    """The outcome is constant, so it cannot be rescaled to a unit range."""


class DegenerateSampleError(CausalSupportError):
    """A generated sample violates a basic shape requirement."""


class TooFewDrawsError(CausalSupportError):
    """Fewer than two posterior draws; spreads are undefined."""


class TooFewRowsError(CausalSupportError):
    """Not enough rows to honour the minimum leaf size."""


class EmptyFocalGroupError(CausalSupportError):
    """No units in the focal treatment group."""


class EmptyComparisonGroupError(CausalSupportError):
    """No units available in the comparison group."""


class AllFocalDiscardedError(CausalSupportError):
    """Every focal unit was discarded; no estimand remains."""


class SeparationError(CausalSupportError):
    """Perfect separation detected while fitting the treatment model."""


class SingularError(CausalSupportError):
    """A design matrix is rank deficient where full rank is required."""


class ExtremeWeightError(CausalSupportError):
    """A weight exceeded the documented stability bound."""

    def __init__(self, max_weight: float, bound: float):
        super().__init__(
            f"weight {max_weight:.6g} exceeds stability bound {bound:.6g}"
        )
        self.max_weight = max_weight
        self.bound = bound

    def details(self) -> dict:
        return {"max_weight": self.max_weight, "bound": self.bound}


class NoBracketError(CausalSupportError):
    """Root bracketing failed during offset calibration."""


class ZeroObservedSdWarning(UserWarning):
    """A focal unit has zero observed-arm posterior spread."""


class NotConvergedWarning(UserWarning):
    """An iterative fit stopped at its iteration cap before converging."""
