from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError
from ..geometry import StadiumShape

METHODS = ("scaling", "bim", "circle_oracle")

# corner + curvature constant of the quarter domain: three right-angle corners
# (pi^2 - theta^2)/(24 pi theta) each, plus (1/12pi) * integral of curvature over the arc
WEYL_CONSTANT = 3.0 / 16.0 + 1.0 / 24.0


def weyl_count(shape: StadiumShape, k):
    """Smooth odd-odd level counting function ``N(k)`` of the quarter stadium."""
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise InputError("k must be non-negative")
    area = shape.quarter_area()
    perim = shape.quarter_perimeter()
    out = area * k * k / (4 * math.pi) - perim * k / (4 * math.pi) + WEYL_CONSTANT
    return float(out) if out.ndim == 0 else out


def weyl_density(shape: StadiumShape, k):
    """Derivative of :func:`weyl_count` (mean level density in k)."""
    k = np.asarray(k, dtype=float)
    out = shape.quarter_area() * k / (2 * math.pi) - shape.quarter_perimeter() / (4 * math.pi)
    return float(out) if out.ndim == 0 else out


def mean_spacing(shape: StadiumShape, k: float) -> float:
    """Mean level spacing in k near ``k``; floored for tiny k where the density degenerates."""
    dens = weyl_density(shape, k)
    return 1.0 / max(dens, shape.quarter_area() * max(k, 1.0) / (4 * math.pi))


@dataclass
class SpectrumWindow:
    epsilon: float
    k_lo: float
    k_hi: float
    levels: np.ndarray
    method: str
    window_ids: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise InputError(f"unknown method {self.method!r}")
        self.levels = np.asarray(self.levels, dtype=float)
        if self.levels.size and np.any(np.diff(self.levels) <= 0):
            raise InputError("levels must be strictly increasing")
        if self.levels.size and (self.levels[0] < self.k_lo or self.levels[-1] > self.k_hi):
            raise InputError("levels must lie inside [k_lo, k_hi]")
        if self.window_ids is None:
            self.window_ids = np.zeros(self.levels.size, dtype=int)

    def __len__(self):
        return self.levels.size

    def weyl_deviation(self) -> float:
        """Computed count minus the smooth Weyl estimate over ``[k_lo, k_hi]``."""
        shape = StadiumShape(self.epsilon)
        return len(self) - (weyl_count(shape, self.k_hi) - weyl_count(shape, self.k_lo))


@dataclass
class BoundaryFunction:
    """Normal derivative ``u(s)`` of an odd-odd eigenfunction on the quarter boundary.

    ``u`` is normalized so the eigenfunction has unit norm on the quarter
    domain, i.e. ``int (r.n) u^2 ds = 2 k^2`` over the physical boundary.
    """

    k: float
    s: np.ndarray
    u: np.ndarray
    epsilon: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        if self.s.shape != self.u.shape or self.s.ndim != 1:
            raise InputError("s and u must be 1-D arrays of equal length")

    @property
    def shape(self) -> StadiumShape:
        return StadiumShape(self.epsilon)

    def sign_changes(self) -> int:
        nz = self.u[np.abs(self.u) > 1e-12 * np.abs(self.u).max()]
        return int(np.count_nonzero(np.diff(np.sign(nz)) != 0))

    def samples_per_wavelength(self) -> float:
        if self.s.size < 2:
            return 0.0
        return (2 * math.pi / self.k) / float(np.median(np.diff(self.s)))
