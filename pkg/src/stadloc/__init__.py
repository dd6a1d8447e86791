"""Quantum localization of chaotic eigenstates in the stadium billiard."""

__version__ = "0.1.0"

from .errors import ConfigError, InputError, NumericalError, StadlocError  # noqa: E402
from .geometry import StadiumShape  # noqa: E402

__all__ = ["ConfigError", "InputError", "NumericalError", "StadiumShape", "StadlocError", "__version__"]
