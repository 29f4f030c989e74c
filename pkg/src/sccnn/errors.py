"""Exception types shared across the package.

The CLI maps ValidationError to exit code 1 and NumericalError to exit
code 2; everything else is a bug.
"""

__all__ = ["ValidationError", "NumericalError"]


class ValidationError(ValueError):
    """Invalid user input: malformed complex, config, spec, or dataset."""


class NumericalError(RuntimeError):
    """Numerical failure: divergent loss, eigensolver breakdown, singular weights."""
