"""Scaling method for odd-odd Dirichlet levels of the quarter stadium.

A single generalized eigenproblem at reference wavenumber ``k0`` yields every
level in a narrow band around ``k0``. The basis is odd in x and y:

* plane waves ``sin(k0 x cos t) sin(k0 y sin t)`` at evenly spaced angles,
* for ``eps > 0``, evanescent waves ``sin(k0 x cosh t) sinh(k0 y sinh t)``
  decaying away from the straight segment. Plane waves alone cannot resolve
  the curvature jump at the arc/segment junction to better than ~1e-4.

With boundary weight ``1/(r.n)``, ``F`` is the boundary-norm matrix and ``G``
its derivative under dilation. Eigenvalues ``mu`` of the pencil ``(G, F)``
give levels ``k = k0 exp(-2/mu)``; the residual error is odd and cubic in
``k0 - k``, so averaging solves at ``k +- delta`` cancels it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..errors import IllConditioned, InputError, WindowTooWide
from ..geometry import StadiumShape, boundary_arrays
from .quadrature import quarter_rule
from .types import BoundaryFunction, SpectrumWindow, mean_spacing


@dataclass(frozen=True)
class ScalingOptions:
    oversampling: float = 3.0       # plane waves per half-wavelength of boundary
    extra_waves: int = 8            # floor for low k
    evanescent_per_k: float = 0.25
    evanescent_min: int = 24
    evanescent_tmax: float = 2.5
    quad_ppw: float = 24.0          # matrix quadrature nodes per wavelength
    sample_ppw: float = 32.0        # output samples of u per wavelength (Husimi quadrature)
    sub_half_width: float = 0.08    # half-width of one raw solve, absolute k units
    polish_delta: float = 0.003
    gram_tol: float = 1e-14
    accept_slope: float = 0.1       # max |dk/dk0| of a genuine prediction across the +-delta pair
    dedupe_tol: float = 1e-6        # in mean spacings; genuine near-degeneracies exist
    max_half_width: float = 10.0    # window half-width limit in mean spacings
    min_k: float = 2.0

    def __post_init__(self):
        if self.oversampling < 1.5:
            raise InputError("oversampling below 1.5 cannot represent the boundary data")
        if self.sample_ppw < 12:
            raise InputError("sample_ppw must be >= 12")
        if not 0 < self.polish_delta < self.sub_half_width:
            raise InputError("need 0 < polish_delta < sub_half_width")


class ScalingBasis:
    """Odd-odd basis at wavenumber ``k0`` for a given stadium."""

    def __init__(self, shape: StadiumShape, k0: float, options: ScalingOptions):
        self.shape = shape
        self.k0 = float(k0)
        lq = shape.quarter_length()
        n = math.ceil(options.oversampling * k0 * lq / (2 * math.pi)) + options.extra_waves
        th = (np.arange(n) + 0.5) * math.pi / (2 * n)
        self.ax = k0 * np.cos(th)
        self.ay = k0 * np.sin(th)
        if shape.epsilon > 0:
            m = max(options.evanescent_min, math.ceil(options.evanescent_per_k * k0))
            t = np.linspace(options.evanescent_tmax / m, options.evanescent_tmax, m)
            self.ex = k0 * np.cosh(t)
            self.eq = k0 * np.sinh(t)
        else:
            self.ex = self.eq = np.zeros(0)
        self.scale = np.ones(self.size)

    @property
    def size(self) -> int:
        return self.ax.size + self.ex.size

    def _sinh_parts(self, y):
        # sinh(qy)/sinh(q), cosh(qy)/sinh(q) without overflow for y in [-1, 1]
        q = self.eq[None, :]
        y = y[:, None]
        e1 = np.exp(q * (y - 1))
        e2 = np.exp(-q * (y + 1))
        den = 1 - np.exp(-2 * q)
        return (e1 - e2) / den, (e1 + e2) / den

    def values(self, x, y, dilation: bool = False):
        """Basis values (and ``r . grad`` of each function when ``dilation``)."""
        px = np.outer(x, self.ax)
        py = np.outer(y, self.ay)
        sx, cx, sy, cy = np.sin(px), np.cos(px), np.sin(py), np.cos(py)
        b = [sx * sy]
        d = [px * cx * sy + py * sx * cy]
        if self.ex.size:
            ex = np.outer(x, self.ex)
            sh, ch = self._sinh_parts(y)
            se, ce = np.sin(ex), np.cos(ex)
            b.append(se * sh)
            d.append(ex * ce * sh + (y[:, None] * self.eq[None, :]) * se * ch)
        bm = np.hstack(b) / self.scale
        if not dilation:
            return bm
        return bm, np.hstack(d) / self.scale

    def gradient(self, x, y):
        px = np.outer(x, self.ax)
        py = np.outer(y, self.ay)
        gx = [self.ax * np.cos(px) * np.sin(py)]
        gy = [self.ay * np.sin(px) * np.cos(py)]
        if self.ex.size:
            ex = np.outer(x, self.ex)
            sh, ch = self._sinh_parts(y)
            gx.append(self.ex * np.cos(ex) * sh)
            gy.append(self.eq * np.sin(ex) * ch)
        return np.hstack(gx) / self.scale, np.hstack(gy) / self.scale


@dataclass
class _Solve:
    basis: ScalingBasis
    k: np.ndarray        # predicted levels
    coef: np.ndarray     # basis coefficients, one column per level


def _solve_at(shape: StadiumShape, k0: float, options: ScalingOptions) -> _Solve:
    basis = ScalingBasis(shape, k0, options)
    q = quarter_rule(shape, k0, ppw=options.quad_ppw)
    w = q["w"] / q["rn"]
    b, d = basis.values(q["x"], q["y"], dilation=True)
    nrm = np.sqrt(np.einsum("i,ij,ij->j", w, b, b))
    if not np.all(np.isfinite(nrm)) or np.any(nrm == 0):
        raise IllConditioned(f"degenerate basis column at k0={k0}")
    basis.scale = nrm
    b /= nrm
    d /= nrm
    bw = b * w[:, None]
    f = b.T @ bw
    g = bw.T @ d
    g = g + g.T
    lam, v = np.linalg.eigh(f)
    keep = lam > options.gram_tol * lam[-1]
    rank = int(keep.sum())
    needed = math.ceil(k0 * shape.quarter_length() / math.pi)
    if rank < min(needed, basis.size) // 2:
        raise IllConditioned(f"basis Gram matrix has rank {rank} at k0={k0}")
    z = v[:, keep] / np.sqrt(lam[keep])
    mu, y = np.linalg.eigh(z.T @ g @ z)
    with np.errstate(divide="ignore", over="ignore"):
        k = k0 * np.exp(-2.0 / mu)
    coef = z @ y
    good = np.isfinite(k)
    return _Solve(basis, k[good], coef[:, good])


def _nearest(solve: _Solve, k: float):
    j = int(np.argmin(np.abs(solve.k - k)))
    return j, float(solve.k[j])


def _boundary_u(shape, solve: _Solve, j: int, s):
    """Unnormalized ``u(s)`` of level ``j`` of a solve, and the dilated interior field."""
    kj = solve.k[j]
    c = solve.basis.k0 / kj
    x, y, nx, ny, _ = boundary_arrays(shape, s)
    gx, gy = solve.basis.gradient(x / c, y / c)
    a = solve.coef[:, j]
    return (nx * (gx @ a) + ny * (gy @ a)) / c


def _boundary_function(shape, solve: _Solve, j: int, k: float, options: ScalingOptions, meta=None):
    q = quarter_rule(shape, k, ppw=options.quad_ppw)
    uq = _boundary_u(shape, solve, j, q["s"])
    norm2 = float(np.sum(q["w"] * q["rn"] * uq * uq))
    scale = math.sqrt(2.0 * k * k / norm2)
    # Dirichlet residual of the normalized eigenfunction (interior norm is 1)
    c = solve.basis.k0 / solve.k[j]
    psi = solve.basis.values(q["x"] / c, q["y"] / c) @ solve.coef[:, j] * scale
    tension = float(np.sum(q["w"] * psi * psi))

    lq = shape.quarter_length()
    n = math.ceil(options.sample_ppw * k * lq / (2 * math.pi))
    s = (np.arange(n) + 0.5) * lq / n
    u = _boundary_u(shape, solve, j, s) * scale
    imax = int(np.argmax(np.abs(u)))
    if u[imax] < 0:
        u = -u
    info = {"tension": tension}
    if meta:
        info.update(meta)
    return BoundaryFunction(k=k, s=s, u=u, epsilon=shape.epsilon, meta=info)


def _pair(solve_p: _Solve, solve_m: _Solve, k: float, radius: float, spacing: float, options: ScalingOptions):
    """Average matched predictions of the +delta and -delta solves near ``k``."""
    out = []
    for kp in solve_p.k[np.abs(solve_p.k - k) <= radius]:
        km = solve_m.k[np.argmin(np.abs(solve_m.k - kp))]
        if abs(kp - km) <= 2 * options.polish_delta * options.accept_slope:
            out.append((0.5 * (kp + km), abs(kp - km) / spacing))
    return out


def polish(shape: StadiumShape, k_guess: float, options: ScalingOptions = ScalingOptions(),
           spacing=None, radius=None):
    """Refine the levels near ``k_guess`` by symmetric solves at ``k +- delta``.

    The odd cubic error of the raw prediction cancels in the average. Every
    level within ``radius`` of the guess is returned as ``(k, spread)``, where
    ``spread`` is the disagreement of the one-sided predictions in mean
    spacings. Genuine levels barely move with ``k0``; candidates whose
    prediction drifts faster than ``accept_slope`` are dropped as spurious.
    """
    if spacing is None:
        spacing = mean_spacing(shape, k_guess)
    if radius is None:
        radius = 0.02 * spacing
    delta = options.polish_delta
    first = _pair(_solve_at(shape, k_guess + delta, options), _solve_at(shape, k_guess - delta, options),
                  k_guess, radius, spacing, options)
    out = []
    for k, _ in first:
        sp = _solve_at(shape, k + delta, options)
        sm = _solve_at(shape, k - delta, options)
        kp = sp.k[np.argmin(np.abs(sp.k - k))]
        km = sm.k[np.argmin(np.abs(sm.k - k))]
        if abs(kp - km) <= 2 * delta * options.accept_slope:
            out.append((0.5 * (kp + km), abs(kp - km) / spacing))
    return out


def _raw_candidates(shape, k_lo, k_hi, options):
    # each solve contributes only predictions near its own centre, where they are most accurate
    h = options.sub_half_width
    n = max(1, math.ceil((k_hi - k_lo) / h))
    centers = np.linspace(k_lo, k_hi, n + 1)
    step = centers[1] - centers[0]
    reach = 0.75 * step
    cand = []
    for c in centers:
        sol = _solve_at(shape, c, options)
        cand.extend(sol.k[np.abs(sol.k - c) <= reach])
    return np.sort(np.asarray(cand))


def dedupe(levels, tol):
    """Drop entries within ``tol`` of their sorted predecessor; returns kept indices."""
    levels = np.asarray(levels, dtype=float)
    order = np.argsort(levels, kind="stable")
    kept = []
    last = -math.inf
    for i in order:
        if levels[i] - last > tol:
            kept.append(i)
            last = levels[i]
    return np.array(kept, dtype=int)


def _resolve_clusters(shape, levels, spreads, options, spacing):
    """Decide the multiplicity of candidates closer than the drift bound.

    One level polished from two guesses can land a few accuracy units apart,
    while genuine near-degenerate pairs can be closer than that bound too.
    A single pair of solves at the cluster centre settles it: the number of
    matched predictions there is the number of levels.
    """
    gap = 2 * options.polish_delta * options.accept_slope
    out_k, out_s = [], []
    i = 0
    while i < levels.size:
        j = i + 1
        while j < levels.size and levels[j] - levels[j - 1] < gap:
            j += 1
        if j - i == 1:
            out_k.append(levels[i])
            out_s.append(spreads[i])
        else:
            centre = 0.5 * (levels[i] + levels[j - 1])
            radius = 0.5 * (levels[j - 1] - levels[i]) + gap
            found = sorted(polish(shape, centre, options, spacing, radius))
            if not found:
                found = list(zip(levels[i:j], spreads[i:j]))
            ks = np.array([f[0] for f in found])
            for m in dedupe(ks, options.dedupe_tol * spacing):
                out_k.append(found[m][0])
                out_s.append(found[m][1])
        i = j
    order = np.argsort(out_k)
    return np.asarray(out_k)[order], np.asarray(out_s)[order]


def _check_window(shape, k_center, half_width, options):
    if not (math.isfinite(k_center) and math.isfinite(half_width)) or half_width <= 0:
        raise InputError("k_center and half_width must be finite, half_width > 0")
    if k_center - half_width < options.min_k:
        raise InputError(f"window reaches below k={options.min_k}")
    limit = options.max_half_width * mean_spacing(shape, k_center)
    if half_width > limit:
        raise WindowTooWide(f"half_width {half_width} exceeds {options.max_half_width} mean spacings ({limit:.4g})")


def solve_window(shape: StadiumShape, k_center: float, half_width: float,
                 options: ScalingOptions = ScalingOptions(), with_functions: bool = True):
    """All odd-odd levels in ``[k_center - half_width, k_center + half_width]``.

    Returns ``(SpectrumWindow, list[BoundaryFunction])``.
    """
    _check_window(shape, k_center, half_width, options)
    k_lo, k_hi = k_center - half_width, k_center + half_width
    spacing = mean_spacing(shape, k_center)
    levels, spreads = [], []
    radius = 0.02 * spacing
    covered = []
    for kc in _raw_candidates(shape, k_lo, k_hi, options):
        # guesses deep inside an earlier polish neighbourhood add nothing
        if covered and abs(kc - covered[-1]) < 0.5 * radius:
            continue
        covered.append(kc)
        for k, sp in polish(shape, kc, options, spacing, radius):
            levels.append(k)
            spreads.append(sp)
    levels = np.asarray(levels)
    spreads = np.asarray(spreads)
    idx = dedupe(levels, options.dedupe_tol * spacing)
    levels, spreads = _resolve_clusters(shape, levels[idx], spreads[idx], options, spacing)
    inside = (levels >= k_lo) & (levels <= k_hi)
    levels, spreads = levels[inside], spreads[inside]

    funcs = _functions(shape, levels, spreads, options) if with_functions else []
    window = SpectrumWindow(shape.epsilon, k_lo, k_hi, levels, "scaling",
                            meta={"k_center": k_center, "half_width": half_width,
                                  "spreads": [float(v) for v in spreads]})
    return window, funcs


def _functions(shape, levels, spreads, options):
    funcs = []
    for k, sp in zip(levels, spreads):
        # at k0 == k the level itself is regularized away, so solve just above it
        sol = _solve_at(shape, k + options.polish_delta, options)
        j, _ = _nearest(sol, k)
        funcs.append(_boundary_function(shape, sol, j, k, options, {"spread": float(sp)}))
    return funcs


def solve_range(shape: StadiumShape, k_lo: float, k_hi: float,
                options: ScalingOptions = ScalingOptions(), window_spacings: float = 4.0,
                with_functions: bool = True):
    """Stitch half-overlapping windows over ``[k_lo, k_hi]``.

    Each level keeps the id of the first window that found it. Windows are
    sized in mean spacings at their centre.
    """
    if not (math.isfinite(k_lo) and math.isfinite(k_hi)) or k_hi <= k_lo:
        raise InputError("need finite k_lo < k_hi")
    centers, widths = [], []
    c = k_lo
    while True:
        hw = min(window_spacings, options.max_half_width) * mean_spacing(shape, c)
        centers.append(c)
        widths.append(hw)
        if c + hw >= k_hi:
            break
        c += hw
    levels, ids, spreads = [], [], []
    for wid, (c, hw) in enumerate(zip(centers, widths)):
        lo, hi = max(c - hw, k_lo), min(c + hw, k_hi)
        win, _ = solve_window(shape, 0.5 * (lo + hi), 0.5 * (hi - lo), options, with_functions=False)
        levels.extend(win.levels)
        ids.extend([wid] * len(win))
        spreads.extend(win.meta["spreads"])
    levels, ids, spreads = np.asarray(levels), np.asarray(ids, dtype=int), np.asarray(spreads)
    spacing = mean_spacing(shape, 0.5 * (k_lo + k_hi))
    keep = dedupe(levels, options.dedupe_tol * spacing)
    final, spreads = _resolve_clusters(shape, levels[keep], spreads[keep], options, spacing)
    # provenance: the first window with a candidate near each final level
    gap = 2 * options.polish_delta * options.accept_slope
    final_ids = []
    for k in final:
        near = np.abs(levels - k) <= gap
        final_ids.append(ids[near].min() if near.any() else ids[np.argmin(np.abs(levels - k))])
    final_ids = np.asarray(final_ids, dtype=int)
    inside = (final >= k_lo) & (final <= k_hi)
    final, spreads, final_ids = final[inside], spreads[inside], final_ids[inside]
    window = SpectrumWindow(shape.epsilon, k_lo, k_hi, final, "scaling", window_ids=final_ids,
                            meta={"windows": [[float(c), float(h)] for c, h in zip(centers, widths)],
                                  "spreads": [float(v) for v in spreads]})
    return window, (_functions(shape, final, spreads, options) if with_functions else [])


def boundary_function_at(shape: StadiumShape, k: float, s, options: ScalingOptions = ScalingOptions()):
    """Normalized ``u`` of the level nearest ``k`` at arbitrary arclengths ``s``."""
    sol = _solve_at(shape, k + options.polish_delta, options)
    j, _ = _nearest(sol, k)
    bf = _boundary_function(shape, sol, j, k, replace(options, sample_ppw=12.0))
    scale = bf.u[np.argmax(np.abs(bf.u))] / _boundary_u(shape, sol, j, bf.s[[np.argmax(np.abs(bf.u))]])[0]
    return _boundary_u(shape, sol, j, np.asarray(s, dtype=float)) * scale
