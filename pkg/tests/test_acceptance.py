"""Acceptance criteria 1-10.

Each test records one PASS/FAIL line (shown in the terminal summary) before
asserting, so a failing criterion still reports its measured numbers.
Run with ``pytest tests/test_acceptance.py -v``.
"""

import math
import time

import numpy as np
import pytest
from scipy import integrate, optimize, special, stats
from scipy.special import betaln

from stadloc.eigensolver import bim_levels, mean_spacing, solve_range, weyl_count
from stadloc.errors import SampleAtBoundary
from stadloc.fitting import BetaFit, beta_moments, fit_beta, fit_rational, rational
from stadloc.geometry import StadiumShape
from stadloc.husimi import HusimiGrid, husimi_grid
from stadloc.localization import block_average, entropy_measure, windowed_stats
from stadloc.spectral import brody_constants, brody_sample, fit_brody
from stadloc.transport import ASYMPTOTE, alpha, diffuse, loglog_slope, simulate_ensemble

pytestmark = pytest.mark.slow

# desk-scale localization cells shared by criteria 6 and 10: 200 consecutive
# states from k0 = 100 at each epsilon, spanning localized to extended
CELL_EPSILONS = (0.1, 0.15, 0.2, 0.25, 0.3, 1.0)
CELL_K0 = 100.0
CELL_STATES = 200
GRID = 400
A0 = 0.7


def bessel_even_zeros(k_max):
    """Zeros of J_2, J_4, ... below ``k_max`` by bracketing sign changes on a fine grid."""
    x = np.linspace(0.5, k_max, 200_001)
    out = []
    n = 2
    while True:
        f = special.jv(n, x)
        idx = np.nonzero(np.sign(f[:-1]) * np.sign(f[1:]) < 0)[0]
        if idx.size == 0:
            break
        out.extend(optimize.brentq(lambda t: special.jv(n, t), x[i], x[i + 1], xtol=1e-15, rtol=1e-15)
                   for i in idx)
        n += 2
    return np.sort(out)


def test_criterion_1_circle_limit(criterion):
    t = time.perf_counter()
    win, _ = solve_range(StadiumShape(0.0), 4.0, 30.0, with_functions=False)
    elapsed = time.perf_counter() - t
    ref = bessel_even_zeros(30.0)
    ref = ref[ref >= 4.0]
    same = len(win) == ref.size
    err = float(np.max(np.abs(win.levels / ref - 1))) if same else math.inf
    ok = same and err < 1e-6 and elapsed < 60
    criterion(1, ok, f"{len(win)} levels vs {ref.size} Bessel zeros, max rel err {err:.2e}, {elapsed:.1f}s")
    assert ok


def test_criterion_2_solver_cross_validation(criterion):
    shape = StadiumShape(0.1)
    t = time.perf_counter()
    vs, _ = solve_range(shape, 100.0, 110.0, with_functions=False)
    ref = bim_levels(shape, 100.0, 110.0)
    elapsed = time.perf_counter() - t
    spacing = mean_spacing(shape, 105.0)
    same = len(vs) == len(ref)
    err = float(np.max(np.abs(vs.levels - ref.levels))) / spacing if same else math.inf
    ok = same and err < 1e-5 and elapsed < 1800
    detail = f"scaling {len(vs)} / BIM {len(ref)} levels, max |dk| = {err:.2e} spacings, {elapsed:.0f}s"
    if not same:
        def unmatched(a, b):
            return [f"{k:.8f}" for k in a if np.min(np.abs(b - k)) > 1e-3 * spacing]
        detail += f"; scaling only {unmatched(vs.levels, ref.levels)}, BIM only {unmatched(ref.levels, vs.levels)}"
    criterion(2, ok, detail)
    assert ok


def test_criterion_3_weyl_completeness(criterion):
    shape = StadiumShape(0.1)
    win, _ = solve_range(shape, 130.0, 150.0, with_functions=False)
    expected = float(weyl_count(shape, 150.0) - weyl_count(shape, 130.0))
    diff = len(win) - expected
    ok = len(win) >= 300 and abs(diff) <= 2
    criterion(3, ok, f"{len(win)} levels in [130, 150], Weyl {expected:.2f}, difference {diff:+.2f}")
    assert ok


def test_criterion_4_transport(criterion):
    t = time.perf_counter()
    curve = simulate_ensemble(StadiumShape(0.1), 10_000, 10_000, seed=0)
    final = curve.terminal()
    eps = (0.03, 0.04, 0.055, 0.075, 0.1)
    nts = [diffuse(StadiumShape(e), 2000, seed=0)[1]["expmodel"].N_T for e in eps]
    slope = loglog_slope(eps, nts)
    elapsed = time.perf_counter() - t
    sat = abs(final / ASYMPTOTE - 1)
    ok = sat < 0.02 and abs(slope + 2.3) <= 0.3 and elapsed < 600
    criterion(4, ok, f"terminal <p^2> off by {sat:.2%}, slope {slope:.3f}, {elapsed:.0f}s")
    assert ok


def test_criterion_5_localization_limits(criterion):
    n = GRID * GRID
    uniform = entropy_measure(HusimiGrid(0.1, 100.0, np.full((GRID, GRID), 1.0 / n)))
    v = np.zeros((GRID, GRID))
    v[17, 301] = 1.0
    single = entropy_measure(HusimiGrid(0.1, 100.0, v))
    ok = uniform.A == 1.0 and uniform.nIPR == 1.0 and single.A == 1.0 / n and single.nIPR == 1.0 / n
    criterion(5, ok, f"uniform A={uniform.A!r} nIPR={uniform.nIPR!r}; single A*N={single.A * n!r} "
                     f"nIPR*N={single.nIPR * n!r}")
    assert ok


@pytest.fixture(scope="module")
def cells():
    out = []
    for eps in CELL_EPSILONS:
        shape = StadiumShape(eps)
        # a little past the Weyl estimate so truncation never comes up short
        k_hi = optimize.brentq(lambda k: weyl_count(shape, k) - weyl_count(shape, CELL_K0) - 1.05 * CELL_STATES - 5,
                               CELL_K0, 4 * CELL_K0)
        _, funcs = solve_range(shape, CELL_K0, k_hi)
        funcs = funcs[:CELL_STATES]
        recs = [entropy_measure(husimi_grid(f, GRID, GRID)) for f in funcs]
        nt = diffuse(shape, 2000, seed=0)[1]["expmodel"]
        k_mid = 0.5 * (recs[0].k + recs[-1].k)
        out.append({"epsilon": eps, "records": recs, "alpha": alpha(k_mid, nt)})
    return out


def test_criterion_6_nipr_linear_in_A(criterion, cells):
    xs, ys = [], []
    for c in cells:
        a, i = block_average([r.A for r in c["records"]], [r.nIPR for r in c["records"]], 100)
        xs.extend(a)
        ys.extend(i)
    fit = stats.linregress(xs, ys)
    states = sum(len(c["records"]) for c in cells)
    ok = states >= 300 and fit.rvalue > 0.95 and abs(fit.slope - 0.64) <= 0.15
    criterion(6, ok, f"{states} states, {len(xs)} blocks: r = {fit.rvalue:.4f}, slope = {fit.slope:.3f}")
    assert ok


def test_criterion_7_brody_fitter(criterion):
    rng = np.random.default_rng(7)
    got = {b: fit_brody(brody_sample(b, 10_000, rng), bootstrap=0).beta for b in (0.0, 0.3, 0.7, 1.0)}
    c0, d0 = brody_constants(0.0)
    c1, d1 = brody_constants(1.0)
    limits = (abs(c0 - 1) < 1e-14 and abs(d0 - 1) < 1e-14
              and abs(d1 - math.pi / 4) < 1e-14 and abs(c1 - math.pi / 2) < 1e-14)
    worst = max(abs(v - b) for b, v in got.items())
    ok = worst <= 0.05 and limits
    criterion(7, ok, "recovered " + ", ".join(f"{b}->{v:.3f}" for b, v in got.items())
              + f"; limits {'exact' if limits else 'wrong'}")
    assert ok


def _quad_moment(a, b, A0_, n):
    logC = -(a + b + 1) * math.log(A0_) - betaln(a + 1, b + 1)
    mode = A0_ * a / (a + b)
    return integrate.quad(lambda x: x ** n * math.exp(logC + a * math.log(x) + b * math.log(A0_ - x)),
                          0.0, A0_, points=[mode], epsabs=0, epsrel=1e-13, limit=400)[0]


def test_criterion_8_beta_fitter(criterion):
    points = [(2.869704, 4.433526), (3.390150, 2.806308), (4.745791, 17.092065)]
    rng = np.random.default_rng(8)
    worst_fit, worst_mom, notes = 0.0, 0.0, []
    for a, b in points:
        samples = BetaFit(a, b, A0).dist().rvs(1000, random_state=rng)
        est = fit_beta(samples, A0, bootstrap=0)
        rel = (est.a / a - 1, est.b / b - 1)
        worst_fit = max(worst_fit, *map(abs, rel))
        # asymptotic standard errors from the Fisher information, for context only
        s = a + b + 2
        t = special.polygamma(1, s)
        info = samples.size * np.array([[special.polygamma(1, a + 1) - t, -t], [-t, special.polygamma(1, b + 1) - t]])
        se = np.sqrt(np.diag(np.linalg.inv(info))) / (a, b)
        notes.append(f"({a:g}, {b:g}): " + ", ".join(f"{r:+.3f} ({r / e:+.1f} SE)" for r, e in zip(rel, se)))
        mean, second, _ = beta_moments(BetaFit(a, b, A0))
        q0 = _quad_moment(a, b, A0, 0)
        worst_mom = max(worst_mom, abs(_quad_moment(a, b, A0, 1) / q0 / mean - 1),
                        abs(_quad_moment(a, b, A0, 2) / q0 / second - 1))
    ok = worst_fit <= 0.10 and worst_mom <= 1e-10
    criterion(8, ok, f"worst (a, b) relative error {worst_fit:.3f} [{'; '.join(notes)}]; "
                     f"closed form vs quadrature {worst_mom:.1e}")
    assert ok


def test_criterion_9_rational_fits(criterion):
    alpha_ = np.logspace(-1.2, 1.8, 12)
    fa = fit_rational(alpha_, rational(alpha_, 0.58, 0.19))
    fb = fit_rational(alpha_, rational(alpha_, 0.98, 0.20))
    err = max(abs(fa.limit - 0.58), abs(fa.s - 0.19), abs(fb.limit - 0.98), abs(fb.s - 0.20))
    ok = err < 1e-8
    criterion(9, ok, f"<A>: ({fa.limit:.10f}, {fa.s:.10f}); beta: ({fb.limit:.10f}, {fb.s:.10f}); "
                     f"max error {err:.1e}")
    assert ok


def test_criterion_10_qualitative_trends(criterion, cells):
    rows = []
    for c in sorted(cells, key=lambda c: c["alpha"]):
        mean, sigma = windowed_stats(c["records"], len(c["records"]))
        A = np.array([r.A for r in c["records"]])
        try:
            p = fit_beta(A, A0, bootstrap=0).gof_pvalue
        except SampleAtBoundary:
            p = math.nan  # some A at or above A0: no beta fit on [0, A0]
        rows.append((c["epsilon"], c["alpha"], float(mean[0]), float(sigma[0]), p, float(A.max())))
    means = [r[2] for r in rows]
    sigmas = [r[3] for r in rows]
    monotone = all(b > a for a, b in zip(means, means[1:]))
    passed = sum(1 for r in rows if r[4] >= 0.01)
    ks_ok = passed >= 0.8 * len(rows)
    inner = max(sigmas[1:-1])
    ends_ok = sigmas[0] < inner and sigmas[-1] < inner
    ok = len(rows) >= 5 and monotone and ks_ok and ends_ok
    table = "; ".join(f"eps={e:g} alpha={a:.2f} <A>={m:.3f} sigma={s:.3f} KS p={p:.3f} maxA={x:.3f}"
                      for e, a, m, s, p, x in rows)
    criterion(10, ok, f"monotone={monotone}, KS passed {passed}/{len(rows)}, sigma ends below interior "
                      f"peak={ends_ok} [{table}]")
    assert ok
