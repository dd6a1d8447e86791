"""Entropy localization measure, normalized IPR, and their empirical statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import InputError, NotNormalized, SampleExceedsA0, WindowTooLarge
from .husimi import HusimiGrid

NORMALIZATION_TOL = 1e-10
CLAMP_TOL = 1e-9


@dataclass(frozen=True)
class LocalizationRecord:
    k: float
    A: float
    nIPR: float
    I: float
    N: int


def _checked_values(H) -> np.ndarray:
    vals = H.values if isinstance(H, HusimiGrid) else np.asarray(H, dtype=float)
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise NotNormalized("Husimi values must be finite and non-negative")
    total = math.fsum(vals.ravel())
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise NotNormalized(f"Husimi grid sums to {total!r}, not 1")
    return vals.ravel()


def entropy(H) -> float:
    """``I = -sum H ln H`` with ``0 ln 0 = 0``."""
    v = _checked_values(H)
    nz = v[v > 0]
    return -math.fsum(nz * np.log(nz))


def entropy_measure(H: HusimiGrid) -> LocalizationRecord:
    v = _checked_values(H)
    n = v.size
    nz = v[v > 0]
    info = -math.fsum(nz * np.log(nz))
    # A = 1 only for a uniform grid; roundoff in ln N must not hide that
    a = 1.0 if _uniform(v) else min(max(math.exp(info) / n, 1.0 / n), 1.0)
    ipr = nipr(H)
    return LocalizationRecord(k=float(getattr(H, "k", math.nan)), A=a, nIPR=ipr, I=info, N=n)


def nipr(H) -> float:
    """``1 / (N sum H^2)``."""
    v = _checked_values(H)
    n = v.size
    if _uniform(v):
        return 1.0
    return min(max(1.0 / (n * math.fsum(v * v)), 1.0 / n), 1.0)


def _uniform(v) -> bool:
    return bool(np.all(v == v[0]))


class LocalizationTransformer(TransformerMixin, BaseEstimator):
    """Map Husimi grids to rows ``(A, nIPR, I)``."""

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        recs = [entropy_measure(h) for h in X]
        return np.array([[r.A, r.nIPR, r.I] for r in recs]).reshape(len(recs), 3)


def windowed_stats(records, window: int):
    """Mean and population standard deviation of A over non-overlapping windows.

    Trailing records that do not fill a window are dropped.
    """
    values = np.array([r.A if isinstance(r, LocalizationRecord) else float(r) for r in records])
    if window < 1:
        raise InputError("window must be >= 1")
    if window > values.size:
        raise WindowTooLarge(f"window {window} exceeds {values.size} records")
    ks = [r.k for r in records if isinstance(r, LocalizationRecord)]
    if ks and np.any(np.diff(ks) < 0):
        raise InputError("records must be sorted by k")
    m = values.size // window
    blocks = values[: m * window].reshape(m, window)
    return blocks.mean(axis=1), blocks.std(axis=1)


def block_average(x, y, window: int):
    """Non-overlapping block means of paired sequences."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if window > x.size:
        raise WindowTooLarge(f"window {window} exceeds {x.size} values")
    m = x.size // window
    return x[: m * window].reshape(m, window).mean(1), y[: m * window].reshape(m, window).mean(1)


@dataclass
class MeasureDistribution:
    epsilon: float
    k0: float
    samples: np.ndarray
    edges: np.ndarray
    density: np.ndarray
    A0: float = 0.7
    k_values: np.ndarray = field(default=None)

    @property
    def counts(self) -> np.ndarray:
        return np.round(self.density * np.diff(self.edges) * self.samples.size).astype(int)

    def cumulative(self):
        """Empirical W(A) as a step function: sorted samples and ``i/n``."""
        xs = np.sort(self.samples)
        return xs, np.arange(1, xs.size + 1) / xs.size

    def W(self, a):
        xs = np.sort(self.samples)
        return np.searchsorted(xs, np.asarray(a, dtype=float), side="right") / xs.size

    def mean(self) -> float:
        return float(self.samples.mean())

    def std(self) -> float:
        return float(self.samples.std())


def distribution(records, A0: float = 0.7, nbins: int = 35, epsilon: float = math.nan,
                 k0: float | None = None, min_samples: int = 100) -> MeasureDistribution:
    """Density histogram of A on ``[0, A0]`` plus the empirical cumulative.

    Samples within ``1e-9`` above ``A0`` are clamped; anything larger is an error
    naming the offending wavenumbers.
    """
    recs = list(records)
    a = np.array([r.A if isinstance(r, LocalizationRecord) else float(r) for r in recs])
    k = np.array([r.k if isinstance(r, LocalizationRecord) else math.nan for r in recs])
    if a.size < min_samples:
        raise InputError(f"need at least {min_samples} samples, got {a.size}")
    if not 0 < A0 <= 1:
        raise InputError("A0 must lie in (0, 1]")
    over = a > A0 + CLAMP_TOL
    if np.any(over):
        raise SampleExceedsA0(f"{int(over.sum())} samples exceed A0={A0}", k_values=k[over].tolist())
    a = np.minimum(a, A0)
    if np.any(a <= 0):
        raise InputError("localization measures must be positive")
    edges = np.linspace(0.0, A0, nbins + 1)
    density, _ = np.histogram(a, bins=edges, density=True)
    if k0 is None:
        k0 = float(np.nanmin(k)) if np.any(np.isfinite(k)) else math.nan
    return MeasureDistribution(epsilon=epsilon, k0=k0, samples=a, edges=edges, density=density, A0=A0, k_values=k)


def write_records(path, records):
    from .io import write_csv

    return write_csv(path, ["k", "A", "nIPR", "I"], [(r.k, r.A, r.nIPR, r.I) for r in records])


def read_records(path, N: int):
    from .io import read_csv

    return [LocalizationRecord(float(r["k"]), float(r["A"]), float(r["nIPR"]), float(r["I"]), N) for r in read_csv(path)]


def write_distribution(path, dist: MeasureDistribution):
    from .io import write_json

    return write_json(path, {
        "epsilon": dist.epsilon,
        "k0": dist.k0,
        "A0": dist.A0,
        "edges": dist.edges,
        "densities": dist.density,
        "sample_count": int(dist.samples.size),
        "mean": dist.mean(),
        "std": dist.std(),
    })
