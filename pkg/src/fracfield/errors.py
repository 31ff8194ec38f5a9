"""Shared exception types."""


class NumericalError(RuntimeError):
    """A linear-algebra or iterative-solver step failed beyond recovery.

    Raised with enough context (parameter point, residual, probe index)
    for the caller to report what was being attempted.
    """
