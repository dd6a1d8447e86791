"""Exception hierarchy shared by all stadloc modules."""


class StadlocError(Exception):
    """Base class for every error raised by this package."""


class NumericalError(StadlocError, ArithmeticError):
    """A numerical procedure failed (maps to CLI exit code 3)."""


class InputError(StadlocError, ValueError):
    """Invalid input for an operation."""


# geometry
class Grazing(InputError):
    pass


class NoConvergence(NumericalError):
    pass


# transport
class DegenerateShape(InputError):
    pass


class NotSaturated(NumericalError):
    pass


class FitDiverged(NumericalError):
    pass


# eigensolver
class IllConditioned(NumericalError):
    pass


class WindowTooWide(InputError):
    pass


class PointOnBoundary(InputError):
    pass


# husimi / localization
class EmptyBoundaryFunction(InputError):
    pass


class NotNormalized(InputError):
    pass


class WindowTooLarge(InputError):
    pass


class SampleExceedsA0(InputError):
    def __init__(self, message, k_values=()):
        super().__init__(message)
        self.k_values = tuple(k_values)


# spectral / fitting
class TooFewLevels(InputError):
    pass


class NonConvergence(NumericalError):
    pass


class OutOfSupport(InputError):
    pass


class SampleAtBoundary(InputError):
    pass


class DegenerateSpan(InputError):
    pass


class ConfigError(StadlocError, ValueError):
    """Invalid run configuration (maps to CLI exit code 2)."""
