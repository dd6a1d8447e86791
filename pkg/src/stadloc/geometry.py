"""Stadium billiard geometry and the classical bounce map.

The stadium consists of two unit semicircles centred at ``(+eps/2, 0)`` and
``(-eps/2, 0)`` joined by two horizontal segments of length ``eps``.

Arclength convention: ``s = 0`` is the point ``(1 + eps/2, 0)`` where the right
semicircle crosses the positive x-axis, and ``s`` increases counterclockwise.
The boundary is traversed as

====================================  ===========================
``0 <= s < pi/2``                     right arc, upper quarter
``pi/2 <= s < pi/2 + eps``            top segment (right to left)
``pi/2 + eps <= s < 3pi/2 + eps``     left arc
``3pi/2 + eps <= s < 3pi/2 + 2eps``   bottom segment
``3pi/2 + 2eps <= s < L``             right arc, lower quarter
====================================  ===========================

so the desymmetrized (first quadrant) boundary is ``0 <= s <= L/4``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import Grazing, InputError, NoConvergence

GRAZING_TOL = 1e-12
_T_MIN = 1e-12
_ON_PIECE_TOL = 1e-12


@dataclass(frozen=True)
class StadiumShape:
    """Bunimovich stadium with unit radius and straight segments of length ``epsilon``."""

    epsilon: float

    def __post_init__(self):
        eps = float(self.epsilon)
        if not math.isfinite(eps) or eps < 0:
            raise InputError(f"epsilon must be finite and >= 0, got {self.epsilon!r}")
        object.__setattr__(self, "epsilon", eps)

    @property
    def half_length(self) -> float:
        return 0.5 * self.epsilon

    def perimeter(self) -> float:
        return 2.0 * math.pi + 2.0 * self.epsilon

    def area(self) -> float:
        return math.pi + 2.0 * self.epsilon

    # desymmetrized (quarter) domain
    def quarter_length(self) -> float:
        """Length of the physical boundary in the first quadrant (``L/4``)."""
        return 0.5 * math.pi + 0.5 * self.epsilon

    def quarter_area(self) -> float:
        return 0.25 * self.area()

    def quarter_perimeter(self) -> float:
        """Full boundary length of the quarter domain, symmetry axes included."""
        return self.quarter_length() + (1.0 + self.half_length) + 1.0

    def junctions(self) -> np.ndarray:
        """Arclengths where an arc meets a straight segment."""
        e = self.epsilon
        return np.array([0.5 * math.pi, 0.5 * math.pi + e, 1.5 * math.pi + e, 1.5 * math.pi + 2 * e])

    def contains(self, x, y, tol: float = 0.0):
        """Vectorized strict interior test (``tol`` shrinks the domain)."""
        x = np.abs(np.asarray(x, dtype=float))
        y = np.asarray(y, dtype=float)
        a = self.half_length
        dx = np.maximum(x - a, 0.0)
        return dx * dx + y * y < (1.0 - tol) ** 2


@dataclass(frozen=True)
class PhasePoint:
    """Poincare-Birkhoff coordinates: arclength ``s`` and tangential momentum ``p``."""

    s: float
    p: float

    def __post_init__(self):
        if not (math.isfinite(self.s) and math.isfinite(self.p)):
            raise InputError("phase point coordinates must be finite")
        if abs(self.p) > 1.0:
            raise InputError(f"|p| must be <= 1, got {self.p}")

    def time_reversed(self) -> "PhasePoint":
        return PhasePoint(self.s, -self.p)


@dataclass(frozen=True)
class BoundaryPoint:
    s: float
    position: tuple
    normal: tuple
    curvature: float


def boundary_arrays(shape: StadiumShape, s):
    """Vectorized boundary parametrization.

    Returns ``(x, y, nx, ny, curvature)`` for arclengths ``s`` (wrapped modulo
    the perimeter). The normal is the unit outward normal.
    """
    s = np.mod(np.asarray(s, dtype=float), shape.perimeter())
    e = shape.epsilon
    a = 0.5 * e
    hp = 0.5 * math.pi
    x = np.empty_like(s)
    y = np.empty_like(s)
    nx = np.empty_like(s)
    ny = np.empty_like(s)
    kappa = np.zeros_like(s)

    right_up = s < hp
    top = (s >= hp) & (s < hp + e)
    left = (s >= hp + e) & (s < 3 * hp + e)
    bottom = (s >= 3 * hp + e) & (s < 3 * hp + 2 * e)
    right_lo = s >= 3 * hp + 2 * e

    right = right_up | right_lo
    if np.any(right):
        phr = np.where(right_up, s, s - 2 * e)[right]
        nx[right] = np.cos(phr)
        ny[right] = np.sin(phr)
        x[right] = a + nx[right]
        y[right] = ny[right]
        kappa[right] = 1.0
    if np.any(left):
        phl = s[left] - e
        nx[left] = np.cos(phl)
        ny[left] = np.sin(phl)
        x[left] = -a + nx[left]
        y[left] = ny[left]
        kappa[left] = 1.0
    if np.any(top):
        x[top] = a - (s[top] - hp)
        y[top] = 1.0
        nx[top] = 0.0
        ny[top] = 1.0
    if np.any(bottom):
        x[bottom] = -a + (s[bottom] - 3 * hp - e)
        y[bottom] = -1.0
        nx[bottom] = 0.0
        ny[bottom] = -1.0
    return x, y, nx, ny, kappa


def boundary_point(shape: StadiumShape, s: float) -> BoundaryPoint:
    if not math.isfinite(s):
        raise InputError("arclength must be finite")
    x, y, nx, ny, kappa = boundary_arrays(shape, np.array([s]))
    s_wrapped = float(np.mod(s, shape.perimeter()))
    return BoundaryPoint(s_wrapped, (float(x[0]), float(y[0])), (float(nx[0]), float(ny[0])), float(kappa[0]))


def arclength_of(shape: StadiumShape, x, y, piece):
    """Arclength of boundary points given the piece index.

    Pieces: 0 right arc, 1 top segment, 2 left arc, 3 bottom segment.
    """
    e = shape.epsilon
    a = 0.5 * e
    hp = 0.5 * math.pi
    L = shape.perimeter()
    s = np.empty_like(x)
    m = piece == 0
    phi = np.arctan2(y[m], x[m] - a)
    s[m] = np.where(phi < 0, phi + L, phi)
    m = piece == 1
    s[m] = hp + (a - x[m])
    m = piece == 2
    phi = np.mod(np.arctan2(y[m], x[m] + a), 2 * math.pi)
    s[m] = phi + e
    m = piece == 3
    s[m] = 3 * hp + e + (x[m] + a)
    return np.mod(s, L)


def _piece_of(shape, s):
    e = shape.epsilon
    hp = 0.5 * math.pi
    s = np.mod(s, shape.perimeter())
    piece = np.zeros(s.shape, dtype=np.int8)
    piece[(s >= hp) & (s < hp + e)] = 1
    piece[(s >= hp + e) & (s < 3 * hp + e)] = 2
    piece[(s >= 3 * hp + e) & (s < 3 * hp + 2 * e)] = 3
    return piece


def bounce(shape: StadiumShape, s, p, check: bool = True):
    """Vectorized bounce map ``(s, p) -> (s', p')``.

    ``p`` is the tangential (counterclockwise) component of the unit velocity
    leaving the boundary; it is conserved by the specular reflection at the
    next hit, so ``p'`` is the tangential component of the incoming velocity.
    """
    s = np.asarray(s, dtype=float)
    p = np.asarray(p, dtype=float)
    if check and np.any(np.abs(p) >= 1.0 - GRAZING_TOL):
        raise Grazing("grazing collision (|p| >= 1 - tol) is not mapped")
    x, y, nx, ny, _ = boundary_arrays(shape, s)
    start = _piece_of(shape, s)
    cosang = np.sqrt(np.maximum(1.0 - p * p, 0.0))
    # tangent (ccw) is (-ny, nx); velocity points inward
    vx = -p * ny - cosang * nx
    vy = p * nx - cosang * ny
    a = shape.half_length

    t_best = np.full(s.shape, np.inf)
    hit = np.full(s.shape, -1, dtype=np.int8)

    def consider(t, valid, piece_id):
        ok = valid & (t > _T_MIN) & (t < t_best)
        t_best[ok] = t[ok]
        hit[ok] = piece_id

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        # straight segments (never hit the segment you start from)
        t = (1.0 - y) / vy
        consider(t, (vy > 0) & (start != 1) & (np.abs(x + t * vx) <= a + _ON_PIECE_TOL), 1)
        t = (-1.0 - y) / vy
        consider(t, (vy < 0) & (start != 3) & (np.abs(x + t * vx) <= a + _ON_PIECE_TOL), 3)
        # arcs: exit point of the full circle through the ray
        for cx, piece_id, side in ((a, 0, 1.0), (-a, 2, -1.0)):
            dx = x - cx
            b = dx * vx + y * vy
            c = dx * dx + y * y - 1.0
            if piece_id == 0:
                c = np.where((start == 0), 0.0, c)
            else:
                c = np.where((start == 2), 0.0, c)
            disc = b * b - c
            t = -b + np.sqrt(np.maximum(disc, 0.0))
            xh = x + t * vx
            consider(t, (disc >= 0) & (side * (xh - cx) >= -_ON_PIECE_TOL), piece_id)

    if np.any(hit < 0):
        raise NoConvergence("no boundary intersection found for some rays")
    xh = x + t_best * vx
    yh = y + t_best * vy
    s_new = arclength_of(shape, xh, yh, hit)
    # normal from the hit point itself, not from s_new (keeps |p| exact on a circle)
    cxh = np.where(hit == 0, a, -a)
    nx2 = np.where((hit == 0) | (hit == 2), xh - cxh, 0.0)
    ny2 = np.where(hit == 1, 1.0, np.where(hit == 3, -1.0, yh))
    norm = np.hypot(nx2, ny2)
    nx2 /= norm
    ny2 /= norm
    p_new = -vx * ny2 + vy * nx2
    return s_new, np.clip(p_new, -1.0, 1.0)


def bounce_map(shape: StadiumShape, x: PhasePoint) -> PhasePoint:
    if abs(x.p) >= 1.0 - GRAZING_TOL:
        raise Grazing(f"grazing collision at s={x.s}, p={x.p}")
    s, p = bounce(shape, np.array([x.s]), np.array([x.p]))
    return PhasePoint(float(s[0]), float(p[0]))


def orbit(shape: StadiumShape, start: PhasePoint, n: int) -> np.ndarray:
    """Iterate the bounce map ``n`` times; returns an ``(n + 1, 2)`` array of (s, p)."""
    out = np.empty((n + 1, 2))
    s = np.array([start.s])
    p = np.array([start.p])
    out[0] = s[0], p[0]
    for i in range(1, n + 1):
        s, p = bounce(shape, s, p)
        out[i] = s[0], p[0]
    return out
