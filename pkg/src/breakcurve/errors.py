# errors.py
"""Exception hierarchy shared across the package.

The CLI maps these onto stable exit codes:
parse errors -> 2, undefined objective -> 3, model/resin mismatch -> 4,
degenerate regression design -> 5, correlation extrapolation -> 6.
"""


class BreakcurveError(Exception):
    """Base class for all package-specific errors."""


class ParseError(BreakcurveError):
    """Input file (curve CSV or conditions JSON) failed to parse or validate."""


class ObjectiveUndefinedError(BreakcurveError):
    """All points were excluded from the objective; nothing left to fit."""


class ModelMismatchError(BreakcurveError):
    """An operation received a fit or resin it cannot work with."""


class DegenerateDesignError(BreakcurveError):
    """Regression design collapsed (an input dimension was never varied)."""


class ExtrapolationError(BreakcurveError):
    """Correlation model evaluated past its range of validity."""
