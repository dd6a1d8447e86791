"""Gauss-Legendre panel quadrature on the physical quarter boundary."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from ..geometry import StadiumShape, boundary_arrays


@lru_cache(maxsize=None)
def gauss_legendre(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def quarter_pieces(shape: StadiumShape):
    """Smooth pieces of the quarter boundary as ``(lo, hi)`` arclength intervals."""
    hp = 0.5 * math.pi
    pieces = [(0.0, hp)]
    if shape.epsilon > 0:
        pieces.append((hp, hp + shape.half_length))
    return pieces


def panel_edges(shape: StadiumShape, k: float, ppw: float, order: int, grade: int = 0):
    """Panel breakpoints on the quarter boundary.

    ``ppw`` is the node density per wavelength ``2 pi / k``. With ``grade > 0``
    the panels touching the arc/segment junction are halved ``grade`` times
    toward it.
    """
    lam = 2 * math.pi / k
    junction = 0.5 * math.pi
    panels = []
    for lo, hi in quarter_pieces(shape):
        n = max(1, math.ceil((hi - lo) / lam * ppw / order))
        edges = list(np.linspace(lo, hi, n + 1))
        if grade > 0 and shape.epsilon > 0:
            if hi == junction:
                h = junction - edges[-2]
                edges = edges[:-1] + [junction - h / 2**m for m in range(1, grade + 1)] + [junction]
            elif lo == junction:
                h = edges[1] - junction
                edges = [junction] + [junction + h / 2**m for m in range(grade, 0, -1)] + edges[1:]
        panels.extend(zip(edges[:-1], edges[1:]))
    return np.array(panels)


def panel_nodes(panels: np.ndarray, order: int):
    """Nodes, weights and panel index for a list of panels."""
    x, w = gauss_legendre(order)
    lo = panels[:, 0:1]
    hi = panels[:, 1:2]
    s = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x
    wt = 0.5 * (hi - lo) * w
    pid = np.repeat(np.arange(len(panels)), order)
    return s.ravel(), wt.ravel(), pid


def quarter_rule(shape: StadiumShape, k: float, ppw: float = 24.0, order: int = 16):
    """Quadrature nodes on the quarter boundary with geometry attached.

    Returns a dict with ``s, w, x, y, nx, ny, rn`` where ``rn = r . n``.
    """
    panels = panel_edges(shape, k, ppw, order)
    s, w, _ = panel_nodes(panels, order)
    x, y, nx, ny, _ = boundary_arrays(shape, s)
    return {"s": s, "w": w, "x": x, "y": y, "nx": nx, "ny": ny, "rn": x * nx + y * ny}
