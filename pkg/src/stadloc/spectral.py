"""Unfolding, nearest-neighbour spacings and Brody fits of the level repulsion exponent."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import digamma, gammaln
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .eigensolver.types import SpectrumWindow, weyl_count
from .errors import InputError, NonConvergence, TooFewLevels
from .geometry import StadiumShape

BETA_BRACKET = (-0.2, 1.3)


@dataclass
class UnfoldedSpectrum:
    window_id: int
    levels: np.ndarray
    spacings: np.ndarray

    @property
    def mean_spacing(self) -> float:
        return float(self.spacings.mean())


def unfold(window: SpectrumWindow, window_id: int = 0, min_levels: int = 100) -> UnfoldedSpectrum:
    """Map levels through the smooth Weyl count, then rescale spacings to unit mean."""
    if len(window) < min_levels:
        raise TooFewLevels(f"need at least {min_levels} levels, got {len(window)}")
    e = weyl_count(StadiumShape(window.epsilon), window.levels)
    s = np.diff(e)
    if np.any(s <= 0):
        raise InputError("unfolded spacings must be positive")
    scale = s.mean()
    return UnfoldedSpectrum(window_id, e / scale, s / scale)


def brody_constants(beta: float):
    """``(c, d)`` making the Brody density normalized with unit mean."""
    if beta <= -1:
        raise InputError("beta must exceed -1")
    b1 = beta + 1.0
    d = math.exp(b1 * gammaln((beta + 2.0) / b1))
    return b1 * d, d


def brody_pdf(S, beta: float):
    c, d = brody_constants(beta)
    S = np.asarray(S, dtype=float)
    if np.any(S < 0):
        raise InputError("spacings must be non-negative")
    with np.errstate(divide="ignore"):
        out = c * np.power(S, beta) * np.exp(-d * np.power(S, beta + 1.0))
    return float(out) if out.ndim == 0 else out


def brody_cdf(S, beta: float):
    _, d = brody_constants(beta)
    S = np.asarray(S, dtype=float)
    if np.any(S < 0):
        raise InputError("spacings must be non-negative")
    out = -np.expm1(-d * np.power(S, beta + 1.0))
    return float(out) if out.ndim == 0 else out


def brody_sample(beta: float, n: int, rng) -> np.ndarray:
    """Inverse-cdf sampling."""
    _, d = brody_constants(beta)
    u = np.asarray(rng.random(n))
    return (-np.log1p(-u) / d) ** (1.0 / (beta + 1.0))


def brody_loglik(beta: float, S) -> float:
    S = np.asarray(S, dtype=float)
    c, d = brody_constants(beta)
    return S.size * math.log(c) + beta * float(np.sum(np.log(S))) - d * float(np.sum(S ** (beta + 1.0)))


@dataclass
class BrodyFit:
    beta: float
    loglik: float
    n: int
    ci: tuple = (math.nan, math.nan)

    @property
    def c(self) -> float:
        return brody_constants(self.beta)[0]

    @property
    def d(self) -> float:
        return brody_constants(self.beta)[1]


def brody_score(beta: float, S) -> float:
    """Derivative of :func:`brody_loglik` with respect to ``beta``."""
    S = np.asarray(S, dtype=float)
    b1 = beta + 1.0
    x = (beta + 2.0) / b1
    _, d = brody_constants(beta)
    dlogd = gammaln(x) - digamma(x) / b1
    lnS = np.log(S)
    p = S ** b1
    return (S.size * (1.0 / b1 + dlogd) + float(np.sum(lnS))
            - d * (dlogd * float(np.sum(p)) + float(np.sum(p * lnS))))


def _mle(S, bracket):
    lo, hi = bracket
    res = minimize_scalar(lambda b: -brody_loglik(b, S), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12, "maxiter": 500})
    if not res.success:
        raise NonConvergence(f"Brody MLE failed: {res.message}")
    width = hi - lo
    if res.x - lo < 1e-6 * width or hi - res.x < 1e-6 * width:
        raise NonConvergence(f"Brody MLE hit the search bracket at beta={res.x:.4f}")
    # the bounded search stops near sqrt(eps); polish on the score to full precision
    beta = float(res.x)
    h = 1e-6 * width
    a, b = max(lo, beta - h), min(hi, beta + h)
    fa, fb = brody_score(a, S), brody_score(b, S)
    if fa > 0 > fb:
        beta = brentq(brody_score, a, b, args=(S,), xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return beta, brody_loglik(beta, S)


def _prepare(spacings, min_spacings):
    S = np.asarray(spacings, dtype=float).ravel()
    if S.size < min_spacings:
        raise TooFewLevels(f"need at least {min_spacings} spacings, got {S.size}")
    if np.any(S <= 0) or not np.all(np.isfinite(S)):
        raise InputError("spacings must be finite and positive")
    # the model has unit mean, so the sample is put on that scale
    return S / S.mean()


def fit_brody(spacings, bootstrap: int = 200, seed: int = 0, bracket=BETA_BRACKET,
              min_spacings: int = 500) -> BrodyFit:
    """Maximum-likelihood Brody exponent with a percentile bootstrap interval."""
    S = _prepare(spacings, min_spacings)
    beta, ll = _mle(S, bracket)
    ci = (math.nan, math.nan)
    if bootstrap > 0:
        rng = np.random.default_rng(seed)
        boots = []
        for _ in range(bootstrap):
            r = S[rng.integers(0, S.size, S.size)]
            try:
                boots.append(_mle(r / r.mean(), bracket)[0])
            except NonConvergence:
                continue
        if boots:
            ci = tuple(float(v) for v in np.percentile(boots, [2.5, 97.5]))
    return BrodyFit(beta=beta, loglik=ll, n=S.size, ci=ci)


def fit_brody_histogram(spacings, bins: int = 40, s_max: float = 4.0, bracket=BETA_BRACKET) -> float:
    """Least-squares fit of the Brody density to a histogram; a diagnostic only."""
    S = np.asarray(spacings, dtype=float)
    S = S / S.mean()
    dens, edges = np.histogram(S, bins=bins, range=(0, s_max), density=False)
    dens = dens / (S.size * np.diff(edges))
    mid = 0.5 * (edges[1:] + edges[:-1])
    res = minimize_scalar(lambda b: float(np.sum((brody_pdf(mid, b) - dens) ** 2)),
                          bounds=bracket, method="bounded", options={"xatol": 1e-10})
    return float(res.x)


class BrodyEstimator(BaseEstimator):
    """Estimator wrapper around :func:`fit_brody`; ``X`` is a 1-D array of spacings."""

    def __init__(self, bootstrap: int = 200, random_state: int = 0, bracket=BETA_BRACKET, min_spacings: int = 500):
        self.bootstrap = bootstrap
        self.random_state = random_state
        self.bracket = bracket
        self.min_spacings = min_spacings

    def fit(self, X, y=None):
        fit = fit_brody(X, self.bootstrap, self.random_state, self.bracket, self.min_spacings)
        self.beta_ = fit.beta
        self.ci_ = fit.ci
        self.loglik_ = fit.loglik
        self.n_samples_ = fit.n
        self.result_ = fit
        return self

    def score(self, X, y=None):
        """Mean log-likelihood per spacing."""
        check_is_fitted(self, "beta_")
        S = np.asarray(X, dtype=float)
        return brody_loglik(self.beta_, S / S.mean()) / S.size

    def pdf(self, S):
        check_is_fitted(self, "beta_")
        return brody_pdf(S, self.beta_)


def write_brody_table(path, rows):
    """``rows``: dicts with epsilon, k_lo, k_hi, fit (BrodyFit) and alpha."""
    from .io import write_csv

    return write_csv(path, ["epsilon", "k_lo", "k_hi", "n_spacings", "beta", "ci_lo", "ci_hi", "alpha"],
                     [(r["epsilon"], r["k_lo"], r["k_hi"], r["fit"].n, r["fit"].beta, r["fit"].ci[0],
                       r["fit"].ci[1], r["alpha"]) for r in rows])
