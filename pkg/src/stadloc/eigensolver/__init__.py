"""Odd-odd quantum levels and boundary functions of the stadium."""

from .bim import BIMOptions, BoundaryIntegral, bim_levels
from .scaling import ScalingOptions, boundary_function_at, polish, solve_range, solve_window
from .types import BoundaryFunction, SpectrumWindow, mean_spacing, weyl_count, weyl_density
from .wavefunction import circle_levels, circle_state, wavefunction

__all__ = [
    "BIMOptions",
    "BoundaryFunction",
    "BoundaryIntegral",
    "ScalingOptions",
    "SpectrumWindow",
    "bim_levels",
    "boundary_function_at",
    "circle_levels",
    "circle_state",
    "mean_spacing",
    "polish",
    "solve_range",
    "solve_window",
    "wavefunction",
    "weyl_count",
    "weyl_density",
]
