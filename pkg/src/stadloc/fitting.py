"""Beta-distribution fits of P(A), rational fits in alpha, and the sigma(beta) curve.

The density is ``P(A) = C A^a (A0 - A)^b`` on ``[0, A0]`` with
``1/C = A0^(a+b+1) B(a+1, b+1)``. Its moments follow from beta-function
ratios::

    <A>   = A0 (a+1) / (a+b+2)
    <A^2> = A0^2 (a+1)(a+2) / ((a+b+2)(a+b+3))
    var   = A0^2 (a+1)(b+1) / ((a+b+2)^2 (a+b+3))
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats
from scipy.special import betaln, digamma, polygamma, xlog1py, xlogy
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .errors import DegenerateSpan, InputError, NonConvergence, OutOfSupport, SampleAtBoundary

DEFAULT_A0 = 0.7


@dataclass
class BetaFit:
    a: float
    b: float
    A0: float = DEFAULT_A0
    loglik: float = math.nan
    gof: float = math.nan
    gof_pvalue: float = math.nan
    n: int = 0
    a_ci: tuple = (math.nan, math.nan)
    b_ci: tuple = (math.nan, math.nan)

    def __post_init__(self):
        if not (self.a > -1 and self.b > -1 and self.A0 > 0):
            raise InputError("need a, b > -1 and A0 > 0")

    @property
    def log_C(self) -> float:
        return -(self.a + self.b + 1) * math.log(self.A0) - betaln(self.a + 1, self.b + 1)

    @property
    def C(self) -> float:
        return math.exp(self.log_C)

    def dist(self):
        """The equivalent frozen scipy distribution."""
        return stats.beta(self.a + 1, self.b + 1, scale=self.A0)


def _check_support(A, A0):
    A = np.asarray(A, dtype=float)
    if np.any(A < 0) or np.any(A > A0):
        raise OutOfSupport(f"A must lie in [0, {A0}]")
    return A


def beta_pdf(A, fit: BetaFit):
    A = _check_support(A, fit.A0)
    out = np.exp(fit.log_C + xlogy(fit.a, A) + xlog1py(fit.b, -A / fit.A0) + fit.b * math.log(fit.A0))
    return float(out) if out.ndim == 0 else out


def beta_cdf(A, fit: BetaFit):
    """``W(A)``, the integral of the density from 0 to ``A``."""
    A = _check_support(A, fit.A0)
    out = stats.beta.cdf(A / fit.A0, fit.a + 1, fit.b + 1)
    return float(out) if np.ndim(out) == 0 else out


def beta_moments(fit: BetaFit):
    """``(<A>, <A^2>, sigma)`` in closed form."""
    a, b, A0 = fit.a, fit.b, fit.A0
    s = a + b + 2
    mean = A0 * (a + 1) / s
    second = A0 * A0 * (a + 1) * (a + 2) / (s * (s + 1))
    sigma = A0 * math.sqrt((a + 1) * (b + 1) / (s * s * (s + 1)))
    return mean, second, sigma


def _beta_negll(theta, n, sum_la, sum_lb, log_A0):
    """Negative log-likelihood, gradient and Hessian in ``(a, b)``."""
    a, b = theta
    s = a + b + 2
    f = n * ((a + b + 1) * log_A0 + betaln(a + 1, b + 1)) - a * sum_la - b * sum_lb
    common = digamma(s)
    g = np.array([n * (log_A0 + digamma(a + 1) - common) - sum_la,
                  n * (log_A0 + digamma(b + 1) - common) - sum_lb])
    t = polygamma(1, s)
    h = n * np.array([[polygamma(1, a + 1) - t, -t], [-t, polygamma(1, b + 1) - t]])
    return f, g, h


def _beta_mle(A, A0, max_iter: int = 200):
    """Projected Newton on the convex negative log-likelihood over ``a, b >= 0``."""
    n = A.size
    args = (n, float(np.sum(np.log(A))), float(np.sum(np.log(A0 - A))), math.log(A0))
    # method-of-moments start on the unit interval
    x = A / A0
    m, v = x.mean(), x.var()
    common = max(m * (1 - m) / max(v, 1e-300) - 1, 1e-3)
    theta = np.array([max(m * common - 1, 0.0), max((1 - m) * common - 1, 0.0)])
    f, g, h = _beta_negll(theta, *args)
    for _ in range(max_iter):
        free = ~((theta <= 0) & (g > 0))
        step = np.zeros(2)
        if np.any(free):
            idx = np.nonzero(free)[0]
            step[idx] = -np.linalg.solve(h[np.ix_(idx, idx)], g[idx])
        lam = 1.0
        while True:
            trial = np.maximum(theta + lam * step, 0.0)
            ft, gt, ht = _beta_negll(trial, *args)
            if ft <= f + 1e-4 * lam * float(g @ (trial - theta)) or lam < 1e-12:
                break
            lam *= 0.5
        done = np.max(np.abs(trial - theta)) <= 1e-13 * (1 + np.max(np.abs(theta)))
        theta, f, g, h = trial, ft, gt, ht
        if done:
            break
    else:
        raise NonConvergence("beta MLE did not converge")
    if not np.all(np.isfinite(theta)):
        raise NonConvergence("beta MLE diverged")
    return float(theta[0]), float(theta[1]), -float(f)


def fit_beta(samples, A0: float | None = DEFAULT_A0, bootstrap: int = 200, seed: int = 0,
             min_samples: int = 200) -> BetaFit:
    """Maximum-likelihood ``(a, b)`` with ``A0`` fixed.

    ``samples`` may be a :class:`MeasureDistribution` or an array. With
    ``A0=None`` the support bound is the largest sample, nudged up so that
    sample stays interior. Exponents are constrained to ``a, b >= 0``.
    """
    if hasattr(samples, "samples"):
        if A0 is not None and A0 == DEFAULT_A0 and getattr(samples, "A0", None) is not None:
            A0 = samples.A0
        samples = samples.samples
    A = np.asarray(samples, dtype=float).ravel()
    if A.size < min_samples:
        raise InputError(f"need at least {min_samples} samples, got {A.size}")
    if A0 is None:
        A0 = float(A.max()) * (1 + 1e-6)
    if np.any(A <= 0) or np.any(A >= A0):
        raise SampleAtBoundary(f"samples must lie strictly inside (0, {A0})")
    a, b, ll = _beta_mle(A, A0)
    ks = stats.kstest(A, stats.beta(a + 1, b + 1, scale=A0).cdf)
    a_ci = b_ci = (math.nan, math.nan)
    if bootstrap > 0:
        rng = np.random.default_rng(seed)
        boots = []
        for _ in range(bootstrap):
            try:
                boots.append(_beta_mle(A[rng.integers(0, A.size, A.size)], A0)[:2])
            except NonConvergence:
                continue
        if boots:
            arr = np.array(boots)
            a_ci = tuple(float(v) for v in np.percentile(arr[:, 0], [2.5, 97.5]))
            b_ci = tuple(float(v) for v in np.percentile(arr[:, 1], [2.5, 97.5]))
    return BetaFit(a=a, b=b, A0=A0, loglik=ll, gof=float(ks.statistic), gof_pvalue=float(ks.pvalue),
                   n=A.size, a_ci=a_ci, b_ci=b_ci)


@dataclass
class RationalFit:
    limit: float
    s: float
    residual: float = math.nan

    def __call__(self, alpha):
        x = self.s * np.asarray(alpha, dtype=float)
        return self.limit * x / (1 + x)


def rational(alpha, limit, s):
    x = s * np.asarray(alpha, dtype=float)
    return limit * x / (1 + x)


def fit_rational(alpha, y=None) -> RationalFit:
    """Least-squares ``y = limit * s alpha / (1 + s alpha)``.

    Accepts ``(alpha, y)`` arrays or a list of ``(alpha, y)`` pairs. The start
    is fixed (``limit = max y``, ``s = 1 / median alpha``) so results are
    deterministic.
    """
    if y is None:
        pts = np.asarray(alpha, dtype=float)
        alpha, y = pts[:, 0], pts[:, 1]
    alpha = np.asarray(alpha, dtype=float)
    y = np.asarray(y, dtype=float)
    if alpha.size < 5:
        raise DegenerateSpan("need at least 5 points")
    if np.any(alpha <= 0):
        raise InputError("alpha must be positive")
    if alpha.max() / alpha.min() < 10:
        raise DegenerateSpan("alpha must span at least one decade")
    if not np.any(y != 0):
        raise DegenerateSpan("all y are zero")
    start = [float(y.max()), 1.0 / float(np.median(alpha))]
    res = optimize.least_squares(lambda t: rational(alpha, *t) - y, start, method="lm",
                                 xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=10000)
    limit, s = (float(v) for v in res.x)
    if not res.success or limit <= 0 or s <= 0:
        raise DegenerateSpan(f"rational fit degenerate (limit={limit:.3g}, s={s:.3g})")
    return RationalFit(limit, s, float(np.sqrt(np.mean(res.fun ** 2))))


@dataclass
class SigmaCurveFit:
    C: float
    a: float
    b: float
    residual: float = math.nan
    notes: dict = field(default_factory=dict)

    def __call__(self, beta):
        return sigma_curve(beta, self.C, self.a, self.b)


def sigma_curve(beta, C, a, b):
    beta = np.asarray(beta, dtype=float)
    return C * np.power(beta, a) * np.power(1 - beta, b)


def fit_sigma_curve(beta, sigma=None, start=(0.3, 1.0, 1.0)) -> SigmaCurveFit:
    """Least-squares ``sigma = C beta^a (1 - beta)^b``."""
    if sigma is None:
        pts = np.asarray(beta, dtype=float)
        beta, sigma = pts[:, 0], pts[:, 1]
    beta = np.asarray(beta, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(beta < 0) or np.any(beta > 1):
        raise InputError("beta values must lie in [0, 1]")
    inner = (beta > 0) & (beta < 1)
    if np.unique(beta[inner]).size < 3:
        raise DegenerateSpan("need at least 3 distinct interior beta values")
    res = optimize.least_squares(lambda t: sigma_curve(beta, *t) - sigma, list(start), method="trf",
                                 bounds=([0, 0, 0], [np.inf, np.inf, np.inf]),
                                 xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000)
    C, a, b = (float(v) for v in res.x)
    if not res.success or C <= 0:
        raise DegenerateSpan("sigma curve fit degenerate")
    return SigmaCurveFit(C, a, b, float(np.sqrt(np.mean(res.fun ** 2))))


class BetaEstimator(BaseEstimator):
    """``fit(X)`` with ``X`` a 1-D array of localization measures."""

    def __init__(self, A0=DEFAULT_A0, bootstrap: int = 200, random_state: int = 0):
        self.A0 = A0
        self.bootstrap = bootstrap
        self.random_state = random_state

    def fit(self, X, y=None):
        fit = fit_beta(X, self.A0, self.bootstrap, self.random_state)
        self.a_, self.b_, self.A0_, self.C_ = fit.a, fit.b, fit.A0, fit.C
        self.result_ = fit
        return self

    def pdf(self, A):
        check_is_fitted(self, "result_")
        return beta_pdf(A, self.result_)

    def score(self, X, y=None):
        """Mean log-likelihood per sample."""
        check_is_fitted(self, "result_")
        return float(np.mean(np.log(beta_pdf(X, self.result_))))


class RationalEstimator(RegressorMixin, BaseEstimator):
    """``fit(alpha, y)``; ``predict(alpha)`` evaluates the fitted rational curve."""

    def fit(self, X, y):
        X = np.asarray(X, dtype=float).ravel()
        fit = fit_rational(X, y)
        self.limit_, self.s_ = fit.limit, fit.s
        self.result_ = fit
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        return self.result_(np.asarray(X, dtype=float).ravel())


class SigmaCurveEstimator(RegressorMixin, BaseEstimator):
    def fit(self, X, y):
        fit = fit_sigma_curve(np.asarray(X, dtype=float).ravel(), y)
        self.C_, self.a_, self.b_ = fit.C, fit.a, fit.b
        self.result_ = fit
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        return self.result_(np.asarray(X, dtype=float).ravel())


def write_beta_table(path, rows):
    """Table-I-style CSV. ``rows``: dicts with epsilon, k0, alpha and fit (BetaFit)."""
    from .io import write_csv

    header = ["epsilon", "k0", "alpha", "a", "b", "A0", "mean_A", "sigma_A", "gof", "gof_pvalue",
              "a_ci_lo", "a_ci_hi", "b_ci_lo", "b_ci_hi", "n"]
    out = []
    for r in rows:
        f = r["fit"]
        mean, _, sigma = beta_moments(f)
        out.append((r["epsilon"], r["k0"], r["alpha"], f.a, f.b, f.A0, mean, sigma, f.gof, f.gof_pvalue,
                    f.a_ci[0], f.a_ci[1], f.b_ci[0], f.b_ci[1], f.n))
    return write_csv(path, header, out)
