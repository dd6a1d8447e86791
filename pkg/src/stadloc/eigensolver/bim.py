"""Boundary integral method, used as an independent check on the scaling method.

For a Dirichlet eigenfunction the boundary function ``u = dpsi/dn`` obeys

    u(s) = -2 * integral u(t) dG/dn_s (r(s), r(t)) dt,   G = -(i/4) H0(k |r - r'|)

over the full stadium boundary. Odd-odd symmetry folds this onto the quarter
boundary with four signed image copies of the source. The kernel has a
logarithmic singularity at the junction of curvature jumps and a smooth
part elsewhere; near-field pairs use product quadrature against ``ln|s - t|``.
Levels are minima of the smallest singular value of ``I + 2 K``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.optimize import minimize_scalar
from scipy.special import eval_legendre, j0, j1, y0, y1

from ..errors import InputError
from ..geometry import StadiumShape, boundary_arrays
from .quadrature import gauss_legendre, panel_edges, panel_nodes
from .types import BoundaryFunction, SpectrumWindow, mean_spacing

ORDER = 16


@lru_cache(maxsize=None)
def _legendre_vandermonde(order: int):
    x, _ = gauss_legendre(order)
    return np.array([eval_legendre(m, x) for m in range(order)])


def log_moments(z: float, order: int = ORDER) -> np.ndarray:
    """``int_{-1}^{1} ln|z - x| P_m(x) dx`` for ``m < order``.

    Geometric grading toward the singular point plus the analytic integral of
    the last tiny piece, where ``P_m`` is effectively constant.
    """
    gx, gw = gauss_legendre(24)
    r, levels = 0.15, 15
    pts, wts = [], []
    tail = np.zeros(order)

    def add(lo, hi):
        pts.append(0.5 * (lo + hi) + 0.5 * (hi - lo) * gx)
        wts.append(0.5 * (hi - lo) * gw)

    def graded(a, b, toward_a):
        length = b - a
        if toward_a:
            br = [a + length * r**j for j in range(levels, -1, -1)]
        else:
            br = [b - length * r**j for j in range(levels + 1)]
        for lo, hi in zip(br[:-1], br[1:]):
            add(lo, hi)
        return length * r**levels

    if -1 < z < 1:
        pz = np.array([eval_legendre(m, z) for m in range(order)])
        for a, b, toward_a in ((-1.0, z, False), (z, 1.0, True)):
            d = graded(a, b, toward_a)
            tail += pz * d * (math.log(d) - 1)
    else:
        if z > 0:
            br = [1.0 - 2.0 * r**j for j in range(levels + 1)] + [1.0]
        else:
            br = [-1.0] + [-1.0 + 2.0 * r**j for j in range(levels, -1, -1)]
        for lo, hi in zip(br[:-1], br[1:]):
            add(lo, hi)
    x = np.concatenate(pts)
    w = np.concatenate(wts)
    pm = np.array([eval_legendre(m, x) for m in range(order)])
    return pm @ (w * np.log(np.abs(z - x))) + tail


def log_weights(z: float, order: int = ORDER) -> np.ndarray:
    """Weights ``w_j`` with ``sum w_j f(x_j) ~ int ln|z - x| f(x) dx`` on [-1, 1]."""
    return np.linalg.solve(_legendre_vandermonde(order), log_moments(z, order))


@dataclass(frozen=True)
class BIMOptions:
    ppw: float = 10.0
    grade: int = 6
    near: float = 1.0            # correction reach in panel half-lengths beyond the panel
    scan_per_spacing: float = 12.0
    accept: float = 1e-5         # max smallest singular value at an accepted level
    xtol: float = 1e-12
    dedupe_tol: float = 1e-6     # in mean spacings


class BoundaryIntegral:
    """Discretized boundary operator on the quarter boundary for wavenumbers up to ``k_max``."""

    def __init__(self, shape: StadiumShape, k_max: float, options: BIMOptions = BIMOptions()):
        self.shape = shape
        self.options = options
        panels = panel_edges(shape, k_max, options.ppw, ORDER, options.grade)
        self.panels = panels
        self.s, self.w, self.pid = panel_nodes(panels, ORDER)
        self.n = self.s.size
        x, y, nx, ny, kap = boundary_arrays(shape, self.s)
        self.x, self.y, self.nx, self.ny, self.kap = x, y, nx, ny, kap
        total = shape.perimeter()
        lq = shape.quarter_length()
        # source images (x, y, sign) and the full-boundary arclength of each image node
        self.images = [(x, y, 1.0), (x, -y, -1.0), (-x, y, -1.0), (-x, -y, 1.0)]
        taus = [self.s, -self.s, 2 * lq - self.s, self.s + 0.5 * total]
        self._build_corrections(taus, total)
        self._start = None

    def _build_corrections(self, taus, total):
        gx, _ = gauss_legendre(ORDER)
        self.corr = []
        for g, tau in enumerate(taus):
            rows, cols, lws, dls = [], [], [], []
            for p, (lo, hi) in enumerate(self.panels):
                cols_p = np.arange(p * ORDER, (p + 1) * ORDER)
                t = tau[cols_p]
                c = 0.5 * (t.max() + t.min())  # nodes are symmetric about the panel centre
                half = 0.5 * (hi - lo)
                reversed_ = t[0] > t[-1]
                d = (self.s - c + 0.5 * total) % total - 0.5 * total
                z = d / half
                for i in np.nonzero(np.abs(z) < 1 + 2 * self.options.near)[0]:
                    lw = (log_weights(z[i]) + math.log(half) * gauss_legendre(ORDER)[1]) * half
                    tj = c + half * gx
                    if reversed_:
                        lw = lw[::-1]
                        tj = tj[::-1]
                    rows.append(np.full(ORDER, i))
                    cols.append(cols_p)
                    lws.append(lw)
                    dls.append(np.abs((self.s[i] - tj + 0.5 * total) % total - 0.5 * total))
            if rows:
                rows = np.concatenate(rows)
                cols = np.concatenate(cols)
                dl = np.concatenate(dls)
                self.corr.append((g, rows, cols, np.concatenate(lws), dl))

    def _kernels(self, k, sx, sy, single_layer=False):
        dx = self.x[:, None] - sx[None, :]
        dy = self.y[:, None] - sy[None, :]
        rho = np.hypot(dx, dy)
        kr = k * rho
        with np.errstate(divide="ignore", invalid="ignore"):
            if single_layer:
                # G = -(i/4) H0 = (1/4) Y0 - (i/4) J0 ; log part of Re: (1/2pi) J0 ln rho
                kern = 0.25 * y0(kr) - 0.25j * j0(kr)
                logc = (1 / (2 * math.pi)) * j0(kr)
            else:
                q = (self.nx[:, None] * dx + self.ny[:, None] * dy) / rho
                jj = j1(kr)
                kern = (k / 4) * q * (-y1(kr) + 1j * jj)
                logc = -(k / (2 * math.pi)) * jj * q
        return kern, logc

    def _assemble(self, k, single_layer=False):
        mats = []
        for sx, sy, sign in self.images:
            kern, logc = self._kernels(k, sx, sy, single_layer)
            with np.errstate(invalid="ignore"):  # coincident points are replaced below
                mats.append([kern * self.w[None, :], kern, logc, sign])
        euler = 0.5772156649015329
        for g, rows, cols, lw, dl in self.corr:
            kw, kern, logc, _ = mats[g]
            lr = logc[rows, cols]
            with np.errstate(divide="ignore", invalid="ignore"):
                m = kern[rows, cols] - lr * np.log(dl)
            zero = dl < 1e-14
            if single_layer:
                m[zero] = 0.25 * (2 / math.pi) * (math.log(k / 2) + euler) - 0.25j
            else:
                m[zero] = self.kap[rows[zero]] / (4 * math.pi)
            # log coefficient at coincident points: J0(0)/2pi for the single layer, 0 for the double layer
            lr = np.where(zero, 1 / (2 * math.pi) if single_layer else 0.0, lr)
            kw[rows, cols] = m * self.w[cols] + lr * lw
        return sum(sign * kw for kw, _, _, sign in mats)

    def matrix(self, k: float) -> np.ndarray:
        """``I + 2 K`` with the symmetry-folded double-layer kernel."""
        return np.eye(self.n) + 2 * self._assemble(k)

    def smallest_singular(self, k: float, count: int = 1, exact: bool = False) -> np.ndarray:
        """Smallest singular values of the operator at ``k``, ascending.

        Subspace inverse iteration on ``(A^H A)^-1`` through one LU factorization;
        ``exact`` falls back to a dense SVD.
        """
        a = self.matrix(k)
        if exact:
            return np.linalg.svd(a, compute_uv=False)[::-1][:count]
        lu = lu_factor(a)
        block = count + 2
        v = self._start if self._start is not None and self._start.shape[1] == block else \
            np.random.default_rng(0).standard_normal((self.n, block)) + 0j
        for _ in range(6):
            v = lu_solve(lu, lu_solve(lu, v, trans=2))
            v, _ = np.linalg.qr(v)
        self._start = v
        av = a @ v
        sv = np.linalg.svd(av, compute_uv=False)[::-1]
        return sv[:count]

    def null_vector(self, k: float) -> np.ndarray:
        """Real boundary function at a level (phase fixed, unnormalized), on the nodes."""
        _, _, vh = np.linalg.svd(self.matrix(k))
        v = vh[-1].conj()
        v = v * np.exp(-1j * np.angle(v[np.argmax(np.abs(v))]))
        return v.real

    def boundary_function(self, k: float) -> BoundaryFunction:
        u = self.null_vector(k)
        rn = self.x * self.nx + self.y * self.ny
        u = u * math.sqrt(2 * k * k / np.sum(self.w * rn * u * u))
        return BoundaryFunction(k=k, s=self.s.copy(), u=u, epsilon=self.shape.epsilon,
                                meta={"method": "bim", "weights": self.w.copy()})

    def single_layer(self, k: float, u: np.ndarray) -> np.ndarray:
        """Real part of ``-integral u G`` at the boundary nodes (should vanish at a level)."""
        return -(self._assemble(k, single_layer=True) @ u).real

    def field(self, k: float, u: np.ndarray, px, py) -> np.ndarray:
        """``psi = -(1/4) integral u Y0`` at interior points."""
        px = np.asarray(px, dtype=float).ravel()
        py = np.asarray(py, dtype=float).ravel()
        out = np.zeros(px.size)
        for sx, sy, sign in self.images:
            rho = np.hypot(px[:, None] - sx[None, :], py[:, None] - sy[None, :])
            out += sign * (y0(k * rho) @ (self.w * u))
        return -0.25 * out


def _deflated_partner(op, k1, reach, slope, options):
    """Second level within ``reach`` of the known level ``k1``, if any.

    ``s1 * s2 / |k - k1|`` stays finite at ``k1`` and vanishes at a partner.
    A partner must dip far below the V-shaped minimum of ``k1`` itself.
    """
    def g(k):
        s = op.smallest_singular(k, 2)
        return (s[0] * s[1] / max(abs(k - k1), 1e-300)) ** 2

    best = None
    for lo, hi in ((k1 - reach, k1 - 1e-9), (k1 + 1e-9, k1 + reach)):
        res = minimize_scalar(g, bounds=(lo, hi), method="bounded", options={"xatol": options.xtol})
        k2 = float(res.x)
        val = op.smallest_singular(k2, 1)[0]
        if val < min(options.accept, 0.01 * slope * abs(k2 - k1)) and (best is None or val < best[1]):
            best = (k2, val)
    if best is None:
        return None
    h = 0.01 * abs(best[0] - k1)
    res = minimize_scalar(lambda k: op.smallest_singular(k, 1)[0] ** 2,
                          bracket=(best[0] - h, best[0], best[0] + h), tol=options.xtol / best[0])
    return float(res.x)


def bim_levels(shape: StadiumShape, k_lo: float, k_hi: float, options: BIMOptions = BIMOptions(),
               operator: BoundaryIntegral | None = None):
    """Levels in ``[k_lo, k_hi]`` as minima of the smallest singular value.

    A coarse scan brackets the minima; each is refined with Brent's method on
    the squared singular value (smooth at a simple level). A second small
    singular value at a refined level flags a close pair, refined the same way.
    Two levels a step or two apart can leave no grid minimum between them, so
    low grid points far from every found level are searched again.
    """
    if not (0 < k_lo < k_hi) or not math.isfinite(k_hi):
        raise InputError("need 0 < k_lo < k_hi")
    op = operator or BoundaryIntegral(shape, k_hi, options)
    spacing = mean_spacing(shape, 0.5 * (k_lo + k_hi))
    step = spacing / options.scan_per_spacing
    grid = np.arange(k_lo - step, k_hi + 2 * step, step)
    sv = np.array([op.smallest_singular(k, 2) for k in grid])
    s1 = sv[:, 0]
    found, slopes = [], []

    def refine(a, b, c, which):
        res = minimize_scalar(lambda k: op.smallest_singular(k, 2)[which] ** 2,
                              bracket=(a, b, c), tol=options.xtol / max(b, 1.0))
        return float(res.x), math.sqrt(max(res.fun, 0.0))

    def accept(k):
        # close pair: the second singular value also dips near this level
        s2 = op.smallest_singular(k, 2)[1]
        h = step / 8
        slope = op.smallest_singular(k + h, 1)[0] / h
        found.append(k)
        slopes.append(slope)
        reach = 3 * step
        if s2 < slope * reach:
            k2 = _deflated_partner(op, k, reach, slope, options)
            if k2 is not None:
                found.append(k2)
                slopes.append(slope)

    for i in range(1, grid.size - 1):
        if s1[i] <= s1[i - 1] and s1[i] < s1[i + 1]:
            try:
                k, val = refine(grid[i - 1], grid[i], grid[i + 1], 0)
            except ValueError:
                continue
            if val <= options.accept:
                accept(k)

    # near known levels s1 follows the lower envelope of their Vs,
    # slope * |k - level|; a grid point well below it has another level close by
    def envelope(k):
        if not found:
            return math.inf
        return float(np.min(np.asarray(slopes) * np.abs(np.asarray(found) - k)))

    # a level within two steps keeps s1 below about two steps of a typical V
    low = 2 * step * float(np.median(slopes)) if slopes else 0.5 * float(np.median(s1))
    for i in np.argsort(s1):
        if s1[i] >= low:
            break
        if s1[i] > 0.8 * envelope(grid[i]):
            continue
        # divide out the known levels so the search cannot settle on them
        res = minimize_scalar(lambda k: op.smallest_singular(k, 1)[0] / min(envelope(k), 1.0), method="bounded",
                              bounds=(grid[i] - step, grid[i] + step), options={"xatol": options.xtol})
        k = float(res.x)
        if min(k - grid[i] + step, grid[i] + step - k) < 1e-3 * step:
            continue  # minimum at the edge: the level belongs to a neighbouring point
        h = min(1e-3 * step, 0.5 * envelope(k) / max(slopes, default=1.0))
        try:
            k, val = refine(k - h, k, k + h, 0)
        except ValueError:
            continue
        if val <= options.accept:
            accept(k)

    # the same level can be reached from a grid minimum and from a partner search
    levels = np.sort(np.asarray(found, dtype=float))
    if levels.size:
        keep = np.r_[True, np.diff(levels) > options.dedupe_tol * spacing]
        levels = levels[keep]
    levels = levels[(levels >= k_lo) & (levels <= k_hi)]
    return SpectrumWindow(shape.epsilon, k_lo, k_hi, levels, "bim",
                          meta={"nodes": op.n, "scan_step": step})
