"""Periodized coherent states and Poincare-Husimi functions on the quarter boundary.

The Husimi function of a boundary function ``u`` is

    H(q, p) = | integral c_{q,p,k}(s) u(s) ds |^2,
    c_{q,p,k}(s) = sum_m exp(i k p (s - q + m L)) exp(-k (s - q + m L)^2 / 2),

evaluated at cell centres of a ``(q, p)`` grid on ``[0, L/4] x [0, 1]`` with
the quarter length as period, then normalized to unit sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import bernoulli

from .eigensolver.types import BoundaryFunction
from .errors import EmptyBoundaryFunction, InputError

TAIL_EXPONENT = 36.0
END_CORRECTION_ORDER = 6
MIN_SAMPLES_PER_WAVELENGTH = 12.0


def image_count(k: float, period: float) -> int:
    """Smallest ``M >= 1`` with ``k (M period)^2 / 2 > 36``."""
    m = max(1, math.ceil(math.sqrt(2 * TAIL_EXPONENT / k) / period))
    while k * (m * period) ** 2 / 2 <= TAIL_EXPONENT:
        m += 1
    return m


@dataclass(frozen=True)
class CoherentStateSpec:
    q: float
    p: float
    k: float
    period: float
    M: int | None = None

    def __post_init__(self):
        if not (self.k > 0 and self.period > 0):
            raise InputError("k and period must be positive")
        if abs(self.p) > 1:
            raise InputError("|p| must be <= 1")
        if self.M is None:
            object.__setattr__(self, "M", image_count(self.k, self.period))
        elif self.M < 1:
            raise InputError("M must be >= 1")


def coherent_state(spec: CoherentStateSpec, s):
    """Periodized coherent state amplitude at arclengths ``s``."""
    s = np.asarray(s, dtype=float)
    out = np.zeros(s.shape, dtype=complex)
    for m in range(-spec.M, spec.M + 1):
        d = s - spec.q + m * spec.period
        out += np.exp(1j * spec.k * spec.p * d - 0.5 * spec.k * d * d)
    return out


@lru_cache(maxsize=None)
def _end_corrections(r: int) -> np.ndarray:
    # midpoint-rule Euler-Maclaurin end terms: B_{2j}(1/2) = -(1 - 2^{1-2j}) B_{2j}
    bern = bernoulli(r + 1)
    rhs = np.zeros(r)
    for d in range(1, r, 2):
        m = d + 1
        rhs[d] = -(1 - 2.0 ** (1 - m)) * bern[m] / m
    vander = np.array([[(j + 0.5) ** d for j in range(r)] for d in range(r)])
    return np.linalg.solve(vander, rhs)


def midpoint_weights(n: int, length: float, order: int = END_CORRECTION_ORDER) -> np.ndarray:
    """End-corrected midpoint weights for ``n`` uniform cell-centre samples."""
    h = length / n
    w = np.full(n, h)
    r = min(order, n // 2)
    if r >= 2:
        c = _end_corrections(r)
        w[:r] += h * c
        w[n - r:] += h * c[::-1]
    return w


def _quadrature_weights(bf: BoundaryFunction, period: float) -> np.ndarray:
    w = bf.meta.get("weights") if bf.meta else None
    if w is not None:
        return np.asarray(w, dtype=float)
    n = bf.s.size
    mid = (np.arange(n) + 0.5) * period / n
    if not np.allclose(bf.s, mid, rtol=0, atol=1e-9 * period):
        raise InputError("boundary samples must be uniform cell centres on the quarter boundary")
    return midpoint_weights(n, period)


@dataclass
class HusimiGrid:
    epsilon: float
    k: float
    values: np.ndarray
    p_range: tuple = (0.0, 1.0)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise InputError("Husimi values must be a 2-D array")

    @property
    def nq(self) -> int:
        return self.values.shape[0]

    @property
    def np(self) -> int:
        return self.values.shape[1]

    @property
    def N(self) -> int:
        return self.values.size

    def q_centers(self) -> np.ndarray:
        lq = 0.5 * math.pi + 0.5 * self.epsilon
        return (np.arange(self.nq) + 0.5) * lq / self.nq

    def p_centers(self) -> np.ndarray:
        lo, hi = self.p_range
        return lo + (np.arange(self.np) + 0.5) * (hi - lo) / self.np

    def normalized(self) -> "HusimiGrid":
        return HusimiGrid(self.epsilon, self.k, self.values / self.values.sum(), self.p_range, dict(self.meta))


def husimi_grid(bf: BoundaryFunction, nq: int = 400, np_: int = 400,
                p_range: tuple = (0.0, 1.0), normalize: bool = True) -> HusimiGrid:
    """Husimi function of ``bf`` at the centres of an ``nq x np_`` grid."""
    if bf.u.size == 0 or not np.any(bf.u):
        raise EmptyBoundaryFunction("boundary function is empty or identically zero")
    if nq < 1 or np_ < 1:
        raise InputError("grid dimensions must be positive")
    period = bf.shape.quarter_length()
    if bf.meta.get("weights") is None and bf.samples_per_wavelength() < MIN_SAMPLES_PER_WAVELENGTH - 1e-9:
        raise InputError(f"boundary function has {bf.samples_per_wavelength():.1f} < 12 samples per wavelength")
    k = bf.k
    w = _quadrature_weights(bf, period)
    wu = w * bf.u
    lo, hi = p_range
    q = (np.arange(nq) + 0.5) * period / nq
    p = lo + (np.arange(np_) + 0.5) * (hi - lo) / np_
    m_img = image_count(k, period)
    # H(q,p) = | sum_{m,s} exp(-k d^2/2) w u exp(i k p (s + mL)) |^2 with d = s - q + mL;
    # the common phase exp(-i k p q) drops out of the modulus
    gauss = []
    phase = []
    for m in range(-m_img, m_img + 1):
        d = bf.s[None, :] - q[:, None] + m * period
        gauss.append(np.exp(-0.5 * k * d * d) * wu[None, :])
        phase.append(np.exp(1j * k * np.outer(bf.s + m * period, p)))
    amp = np.hstack(gauss) @ np.vstack(phase)
    vals = amp.real ** 2 + amp.imag ** 2
    grid = HusimiGrid(bf.epsilon, k, vals, (float(lo), float(hi)),
                      meta={"images": m_img, "samples": int(bf.s.size)})
    return grid.normalized() if normalize else grid
