"""Interior eigenfunction from its boundary function, and the circle-limit oracle."""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import jv, y0

from ..errors import InputError, PointOnBoundary
from ..geometry import boundary_arrays
from .types import BoundaryFunction, SpectrumWindow


def _weights(bf: BoundaryFunction) -> np.ndarray:
    w = bf.meta.get("weights") if bf.meta else None
    if w is not None:
        return np.asarray(w, dtype=float)
    # uniform midpoint samples: the trapezoid rule on the periodic full boundary
    return np.full(bf.s.size, bf.shape.quarter_length() / bf.s.size)


def wavefunction(bf: BoundaryFunction, r) -> np.ndarray | float:
    """``psi(r) = -(1/4) * integral u(t) Y0(k |r - r(t)|) dt`` over the full boundary.

    ``r`` is an ``(x, y)`` pair or an ``(n, 2)`` array of points strictly
    inside the quarter stadium. The full boundary is covered by the four
    signed mirror images of the quarter boundary.
    """
    pts = np.atleast_2d(np.asarray(r, dtype=float))
    if pts.shape[-1] != 2:
        raise InputError("points must have shape (2,) or (n, 2)")
    shape = bf.shape
    px, py = pts[:, 0], pts[:, 1]
    inside = (px > 0) & (py > 0) & shape.contains(px, py)
    if not np.all(inside):
        raise PointOnBoundary("wavefunction needs points strictly inside the quarter stadium")
    x, y, _, _, _ = boundary_arrays(shape, bf.s)
    wu = _weights(bf) * bf.u
    out = np.zeros(px.size)
    for sx, sy, sign in ((x, y, 1.0), (x, -y, -1.0), (-x, y, -1.0), (-x, -y, 1.0)):
        rho = np.hypot(px[:, None] - sx[None, :], py[:, None] - sy[None, :])
        out += sign * (y0(bf.k * rho) @ wu)
    out *= -0.25
    return float(out[0]) if np.ndim(r) == 1 else out


def circle_levels(k_lo: float, k_hi: float, step: float = 0.05) -> SpectrumWindow:
    """Odd-odd quarter-disc levels: zeros of ``J_{2n}`` in ``[k_lo, k_hi]``.

    Sign changes on a grid finer than half the zero spacing (> pi) are refined
    with Brent's method.
    """
    if not 0 <= k_lo < k_hi:
        raise InputError("need 0 <= k_lo < k_hi")
    found = []
    n = 1
    while 2 * n < k_hi:
        order = 2 * n
        lo = max(k_lo, float(order))  # J_m has no zeros below m
        if lo < k_hi:
            grid = np.append(np.arange(lo, k_hi, step), k_hi)
            f = jv(order, grid)
            for i in np.nonzero(np.sign(f[:-1]) * np.sign(f[1:]) < 0)[0]:
                found.append(brentq(lambda k: jv(order, k), grid[i], grid[i + 1], xtol=1e-14, rtol=1e-15))
            found.extend(grid[f == 0.0])
        n += 1
    levels = np.unique(np.asarray(found))
    return SpectrumWindow(0.0, k_lo, k_hi, levels, "circle_oracle")


def circle_state(k: float, order: int, r, theta):
    """Normalized odd-odd disc eigenfunction ``c J_m(k r) sin(m theta)`` on the quarter disc."""
    c = 1.0 / math.sqrt((math.pi / 8) * jv(order + 1, k) ** 2)
    return c * jv(order, k * np.asarray(r)) * np.sin(order * np.asarray(theta))
