import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, optimize, stats

from stadloc.eigensolver import SpectrumWindow, weyl_count
from stadloc.errors import InputError, TooFewLevels
from stadloc.geometry import StadiumShape
from stadloc.spectral import (BrodyEstimator, brody_cdf, brody_constants, brody_loglik, brody_pdf, brody_sample,
                              brody_score, fit_brody,
                              fit_brody_histogram, unfold, write_brody_table)
from stadloc.io import read_csv


def test_poisson_constants():
    c, d = brody_constants(0.0)
    assert c == pytest.approx(1.0, abs=1e-15) and d == pytest.approx(1.0, abs=1e-15)
    s = np.linspace(0, 5, 11)
    assert np.allclose(brody_pdf(s, 0.0), np.exp(-s), rtol=1e-14)


def test_wigner_constants():
    c, d = brody_constants(1.0)
    assert d == pytest.approx(math.pi / 4, rel=1e-14)
    assert c == pytest.approx(math.pi / 2, rel=1e-14)
    s = np.linspace(0, 4, 9)
    assert np.allclose(brody_pdf(s, 1.0), math.pi * s / 2 * np.exp(-math.pi * s * s / 4), rtol=1e-14)


@pytest.mark.parametrize("beta", [0.0, 0.3, 0.7, 1.0])
def test_normalization_and_unit_mean(beta):
    norm, _ = integrate.quad(lambda s: brody_pdf(s, beta), 0, np.inf, epsabs=1e-14, epsrel=1e-13, limit=200)
    mean, _ = integrate.quad(lambda s: s * brody_pdf(s, beta), 0, np.inf, epsabs=1e-14, epsrel=1e-13, limit=200)
    assert abs(norm - 1) < 1e-10
    assert abs(mean - 1) < 1e-10


@given(st.floats(-0.15, 1.25), st.floats(0.05, 4.0))
def test_pdf_is_cdf_derivative(beta, s):
    h = 1e-6
    fd = (brody_cdf(s + h, beta) - brody_cdf(s - h, beta)) / (2 * h)
    assert abs(fd - brody_pdf(s, beta)) < 1e-6


@given(st.floats(-0.15, 1.25))
def test_cdf_limits(beta):
    assert brody_cdf(0.0, beta) == 0.0
    assert brody_cdf(60.0, beta) == pytest.approx(1.0, abs=1e-15)


def test_negative_spacing_rejected():
    with pytest.raises(InputError):
        brody_pdf(-0.1, 0.5)
    with pytest.raises(InputError):
        brody_constants(-1.0)


def test_recovers_brody_half():
    s = brody_sample(0.5, 10_000, np.random.default_rng(11))
    assert abs(fit_brody(s, bootstrap=0).beta - 0.5) < 0.05


def test_exponential_limit():
    s = np.random.default_rng(12).exponential(1.0, 10_000)
    assert abs(fit_brody(s, bootstrap=0).beta) < 0.05


def test_wigner_limit():
    s = np.random.default_rng(13).rayleigh(math.sqrt(2 / math.pi), 10_000)
    assert abs(fit_brody(s, bootstrap=0).beta - 1) < 0.05


def test_scale_consistency():
    s = brody_sample(0.4, 2000, np.random.default_rng(14))
    b1 = fit_brody(s, bootstrap=0).beta
    b2 = fit_brody(3.7 * s, bootstrap=0).beta
    assert abs(b1 - b2) < 1e-12


def test_bootstrap_deterministic_and_covers():
    s = brody_sample(0.6, 2000, np.random.default_rng(15))
    f1 = fit_brody(s, bootstrap=50, seed=3)
    f2 = fit_brody(s, bootstrap=50, seed=3)
    assert f1.ci == f2.ci
    assert f1.ci[0] < f1.beta < f1.ci[1]


def test_histogram_fit_agrees_roughly():
    s = brody_sample(0.7, 20_000, np.random.default_rng(16))
    assert abs(fit_brody_histogram(s) - 0.7) < 0.1


@given(st.floats(0.0, 1.0))
def test_score_matches_loglik_slope(beta):
    s = brody_sample(0.5, 300, np.random.default_rng(20))
    h = 1e-6
    fd = (brody_loglik(beta + h, s) - brody_loglik(beta - h, s)) / (2 * h)
    assert abs(brody_score(beta, s) - fd) < 1e-5 * max(1.0, abs(fd))


def test_too_few_spacings():
    with pytest.raises(TooFewLevels):
        fit_brody(np.ones(100))


def test_estimator():
    s = brody_sample(0.3, 5000, np.random.default_rng(17))
    est = BrodyEstimator(bootstrap=0).fit(s)
    assert est.beta_ == pytest.approx(fit_brody(s, bootstrap=0).beta, abs=1e-15)
    assert est.pdf(1.0) == pytest.approx(brody_pdf(1.0, est.beta_))


def test_unfold_poisson_levels():
    shape = StadiumShape(0.3)
    gen = np.random.default_rng(18).exponential(1.0, 5000)
    gen /= gen[1:].mean()
    e = weyl_count(shape, 50.0) + np.cumsum(gen)
    k = np.array([optimize.brentq(lambda x: weyl_count(shape, x) - t, 40.0, 2000.0, xtol=1e-14) for t in e])
    win = SpectrumWindow(0.3, float(k[0]), float(k[-1]), k, "scaling")
    u = unfold(win)
    assert abs(u.mean_spacing - 1) < 1e-12
    # the Weyl map recovers the generated spacings up to one common scale
    raw = np.diff(weyl_count(shape, k))
    assert abs(raw.mean() - 1) < 0.02
    assert np.allclose(u.spacings * raw.mean(), gen[1:], atol=1e-8)


def test_unfold_needs_levels():
    win = SpectrumWindow(0.3, 50.0, 51.0, np.linspace(50, 51, 20), "scaling")
    with pytest.raises(TooFewLevels):
        unfold(win)


def test_table_csv(tmp_path):
    fit = fit_brody(brody_sample(0.5, 600, np.random.default_rng(19)), bootstrap=0)
    p = write_brody_table(tmp_path / "b.csv", [{"epsilon": 0.1, "k_lo": 100, "k_hi": 150, "fit": fit, "alpha": 1.5}])
    row = read_csv(p)[0]
    assert float(row["beta"]) == pytest.approx(fit.beta, rel=1e-12) and int(row["n_spacings"]) == 600


@pytest.mark.slow
def test_repulsion_grows_with_epsilon():
    from stadloc.eigensolver import solve_range

    betas = {}
    for eps in (0.02, 0.2):
        win, _ = solve_range(StadiumShape(eps), 60.0, 78.0, with_functions=False)
        u = unfold(win)
        betas[eps] = fit_brody(u.spacings, bootstrap=0, min_spacings=100).beta
        if eps == 0.2:
            wigner = stats.rayleigh(scale=math.sqrt(2 / math.pi))
            assert stats.kstest(u.spacings, wigner.cdf).pvalue > 0.01
    assert betas[0.02] < 1 and betas[0.02] < betas[0.2]
