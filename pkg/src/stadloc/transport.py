"""Classical momentum diffusion in the stadium and the transport time N_T."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import DegenerateShape, FitDiverged, InputError, NotSaturated
from .geometry import StadiumShape, bounce

CRITERIA = ("f50", "f70", "f80", "f90", "expmodel")
ASYMPTOTE = 1.0 / 3.0
CHUNK = 2048          # fixed work unit: results do not depend on the worker count
SATURATION_TAIL = 0.1  # fraction of the curve averaged to judge saturation
EXPFIT_LEVEL = 0.95


@dataclass
class DiffusionCurve:
    epsilon: float
    n: np.ndarray
    var_p: np.ndarray
    n_particles: int
    seed: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.n = np.asarray(self.n)
        self.var_p = np.asarray(self.var_p, dtype=float)
        if self.n.shape != self.var_p.shape:
            raise InputError("n and var_p must have equal length")

    def terminal(self, tail: float = SATURATION_TAIL) -> float:
        """Mean of the last ``tail`` fraction of the curve."""
        m = max(1, int(round(tail * self.var_p.size)))
        return float(self.var_p[-m:].mean())


@dataclass(frozen=True)
class TransportEstimate:
    epsilon: float
    criterion: str
    N_T: float
    fit_residual: float = math.nan


def initial_arclengths(shape: StadiumShape, n_particles: int, seed: int, start: int = 0, count=None):
    """Uniform positions on the two semicircles, one independent stream per particle."""
    count = n_particles - start if count is None else count
    children = np.random.SeedSequence(seed).spawn(n_particles)[start:start + count]
    t = np.array([np.random.default_rng(c).random() for c in children]) * 2 * math.pi
    e = shape.epsilon
    right = t < math.pi
    # right arc: polar angle t - pi/2 in [-pi/2, pi/2); left arc starts at s = pi/2 + eps
    s = np.where(right, np.mod(t - 0.5 * math.pi, shape.perimeter()), 0.5 * math.pi + e + (t - math.pi))
    return s


def _chunk_sums(args):
    eps, seed, n_particles, start, count, n_collisions = args
    shape = StadiumShape(eps)
    s = initial_arclengths(shape, n_particles, seed, start, count)
    p = np.zeros_like(s)
    out = np.zeros(n_collisions + 1)
    for i in range(1, n_collisions + 1):
        s, p = bounce(shape, s, p, check=False)
        out[i] = np.sum(p * p)
    return out


def simulate_ensemble(shape: StadiumShape, n_particles: int, n_collisions: int, seed: int = 0,
                      jobs: int = 1, min_particles: int = 1000) -> DiffusionCurve:
    """Ensemble ``<p^2>`` after each collision, starting at ``p = 0`` on the arcs."""
    if shape.epsilon == 0:
        raise DegenerateShape("the circle does not diffuse in momentum")
    if n_particles < min_particles:
        raise InputError(f"need at least {min_particles} particles")
    if n_collisions < 1:
        raise InputError("n_collisions must be >= 1")
    tasks = [(shape.epsilon, seed, n_particles, start, min(CHUNK, n_particles - start), n_collisions)
             for start in range(0, n_particles, CHUNK)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            sums = list(ex.map(_chunk_sums, tasks))
    else:
        sums = [_chunk_sums(t) for t in tasks]
    total = np.zeros(n_collisions + 1)
    for part in sums:  # fixed reduction order
        total += part
    return DiffusionCurve(shape.epsilon, np.arange(n_collisions + 1), total / n_particles, n_particles, seed,
                          meta={"chunk": CHUNK})


def _check_saturated(curve: DiffusionCurve):
    final = curve.terminal()
    if final < 0.9 * ASYMPTOTE:
        raise NotSaturated(f"terminal <p^2> = {final:.4f} < 0.9/3")


def first_crossing(curve: DiffusionCurve, level: float) -> float:
    """First ``n`` with ``<p^2>(n) >= level``, linearly interpolated."""
    v = curve.var_p
    idx = np.nonzero(v >= level)[0]
    if idx.size == 0:
        raise NotSaturated(f"<p^2> never reaches {level:.4f}")
    i = int(idx[0])
    if i == 0:
        return float(curve.n[0])
    n0, n1 = float(curve.n[i - 1]), float(curve.n[i])
    v0, v1 = v[i - 1], v[i]
    return n0 + (level - v0) / (v1 - v0) * (n1 - n0)


def estimate_NT(curve: DiffusionCurve, criterion: str = "expmodel") -> TransportEstimate:
    """Transport time by a fractional criterion ``fNN`` or the exponential model fit."""
    if criterion not in CRITERIA:
        raise InputError(f"unknown criterion {criterion!r}; choose from {CRITERIA}")
    _check_saturated(curve)
    if criterion != "expmodel":
        frac = int(criterion[1:]) / 100
        return TransportEstimate(curve.epsilon, criterion, first_crossing(curve, frac * ASYMPTOTE))
    n_star = first_crossing(curve, EXPFIT_LEVEL * ASYMPTOTE)
    sel = curve.n <= n_star
    n = curve.n[sel].astype(float)
    v = curve.var_p[sel]
    if n.size < 3:
        raise FitDiverged("too few points before 95% saturation")
    guess = first_crossing(curve, 0.5 * ASYMPTOTE) / math.log(2)

    def resid(t):
        return ASYMPTOTE * -np.expm1(-n / t[0]) - v

    res = optimize.least_squares(resid, [max(guess, 1e-3)], bounds=([1e-9], [np.inf]),
                                 xtol=1e-14, ftol=1e-14, gtol=1e-14)
    nt = float(res.x[0])
    if not res.success or not math.isfinite(nt) or nt <= 0 or nt > 1e3 * max(n_star, 1.0):
        raise FitDiverged(f"exponential fit failed (N_T={nt})")
    return TransportEstimate(curve.epsilon, "expmodel", nt, float(np.sqrt(np.mean(res.fun ** 2))))


def diffuse(shape: StadiumShape, n_particles: int = 10000, seed: int = 0, jobs: int = 1,
            n_collisions: int | None = None, max_collisions: int = 2**21):
    """Simulate and estimate ``N_T`` under every criterion.

    With ``n_collisions=None`` the run length starts at 1000 and doubles until
    it covers five exponential transport times.
    """
    n = n_collisions or 1000
    while True:
        curve = simulate_ensemble(shape, n_particles, n, seed, jobs)
        try:
            ests = {c: estimate_NT(curve, c) for c in CRITERIA}
            if n_collisions or n >= 5 * ests["expmodel"].N_T:
                return curve, ests
        except NotSaturated:
            if n_collisions:
                raise
        if n >= max_collisions:
            raise NotSaturated(f"eps={shape.epsilon}: not saturated after {n} collisions")
        n *= 2


def alpha(k: float, estimate) -> float:
    """``2 k / N_T``; ``estimate`` is a TransportEstimate or a number."""
    if not k > 0:
        raise InputError("k must be positive")
    nt = estimate.N_T if isinstance(estimate, TransportEstimate) else float(estimate)
    return 2.0 * k / nt


def loglog_slope(epsilons, nts) -> float:
    """Least-squares slope of ``ln N_T`` against ``ln eps``."""
    return float(np.polyfit(np.log(epsilons), np.log(nts), 1)[0])


def write_curve(path, curve: DiffusionCurve, estimates=()):
    from .io import write_csv, write_json

    path = write_csv(path, ["n", "var_p"], zip(curve.n.tolist(), curve.var_p))
    write_json(path.with_suffix(".json"), {
        "epsilon": curve.epsilon,
        "n_particles": curve.n_particles,
        "seed": curve.seed,
        "criteria": {e.criterion: {"N_T": e.N_T, "fit_residual": e.fit_residual} for e in estimates},
    })
    return path


def read_curve(path) -> DiffusionCurve:
    from pathlib import Path

    from .io import read_csv, read_json

    rows = read_csv(path)
    side = read_json(Path(path).with_suffix(".json"))
    return DiffusionCurve(side["epsilon"], np.array([int(r["n"]) for r in rows]),
                          np.array([float(r["var_p"]) for r in rows]), side["n_particles"], side["seed"])
