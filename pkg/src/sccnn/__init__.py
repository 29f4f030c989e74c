"""Convolutional learning and spectral signal processing on simplicial complexes."""

from .errors import NumericalError, ValidationError

__version__ = "0.1.0"

__all__ = ["NumericalError", "ValidationError", "__version__"]
