import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stadloc.eigensolver import BoundaryFunction, ScalingOptions, solve_window
from stadloc.errors import EmptyBoundaryFunction, InputError
from stadloc.geometry import StadiumShape
from stadloc.husimi import (CoherentStateSpec, HusimiGrid, coherent_state, husimi_grid, image_count,
                            midpoint_weights)
from stadloc.localization import entropy_measure


@pytest.fixture(scope="module")
def state():
    _, funcs = solve_window(StadiumShape(0.2), 60.0, 0.15)
    return funcs[0]


def test_centre_amplitude_is_one():
    spec = CoherentStateSpec(q=0.7, p=0.0, k=100.0, period=math.pi / 2 + 0.1)
    c = coherent_state(spec, np.array([0.7]))[0]
    assert abs(c - 1) < 1e-15


@given(st.floats(0, 1.6), st.floats(-1, 1), st.floats(30, 300), st.floats(0, 1.6))
def test_modulus_periodic(q, p, k, s):
    spec = CoherentStateSpec(q=q, p=p, k=k, period=1.6)
    # the shifted point needs one more image to see the same neighbourhood
    wider = CoherentStateSpec(q=q, p=p, k=k, period=1.6, M=spec.M + 1)
    a = abs(coherent_state(spec, np.array([s]))[0])
    b = abs(coherent_state(wider, np.array([s + 1.6]))[0])
    assert abs(a - b) < 1e-12


@pytest.mark.parametrize("k", [100.0, 400.0])
def test_image_truncation(k):
    period = math.pi / 2 + 0.05
    spec = CoherentStateSpec(q=0.3, p=0.4, k=k, period=period)
    more = CoherentStateSpec(q=0.3, p=0.4, k=k, period=period, M=spec.M + 1)
    s = np.linspace(0, period, 301)
    a, b = coherent_state(spec, s), coherent_state(more, s)
    assert np.max(np.abs(a - b)) < 1e-15 * np.max(np.abs(b))


def test_image_count_rule():
    for k in (10.0, 100.0, 1000.0):
        m = image_count(k, 1.6)
        assert k * (m * 1.6) ** 2 / 2 > 36
        assert m == 1 or k * ((m - 1) * 1.6) ** 2 / 2 <= 36


def test_spec_validation():
    with pytest.raises(InputError):
        CoherentStateSpec(q=0, p=1.5, k=10, period=1)
    with pytest.raises(InputError):
        CoherentStateSpec(q=0, p=0.5, k=-1, period=1)


def test_midpoint_weights_exact_for_polynomials():
    w = midpoint_weights(200, 2.0)
    x = (np.arange(200) + 0.5) * 2.0 / 200
    for n in range(7):
        assert w @ x ** n == pytest.approx(2.0 ** (n + 1) / (n + 1), rel=1e-13)


def test_grid_normalized_and_nonnegative(state):
    g = husimi_grid(state, 80, 60)
    assert g.values.shape == (80, 60)
    assert np.all(g.values >= 0)
    assert abs(math.fsum(g.values.ravel()) - 1) < 1e-12
    assert g.N == 80 * 60
    again = g.normalized()
    assert np.array_equal(again.values, g.values / g.values.sum())


def test_momentum_reflection_symmetry(state):
    g = husimi_grid(state, 40, 80, p_range=(-1.0, 1.0))
    assert np.max(np.abs(g.values - g.values[:, ::-1])) < 1e-12 * g.values.max()


def test_refinement_changes_A_little(state):
    a400 = entropy_measure(husimi_grid(state, 400, 400)).A
    a800 = entropy_measure(husimi_grid(state, 800, 800)).A
    assert abs(a800 - a400) / a400 < 0.01


def test_sampling_convergence():
    sh = StadiumShape(0.2)
    base = ScalingOptions()
    _, f1 = solve_window(sh, 60.0, 0.15, base)
    _, f2 = solve_window(sh, 60.0, 0.15, ScalingOptions(sample_ppw=2 * base.sample_ppw))
    h1 = husimi_grid(f1[0], 60, 60, normalize=False).values
    h2 = husimi_grid(f2[0], 60, 60, normalize=False).values
    assert np.max(np.abs(h1 - h2)) < 1e-6 * h2.max()


def test_empty_rejected():
    bf = BoundaryFunction(k=50.0, s=np.array([0.1, 0.2]), u=np.zeros(2), epsilon=0.1)
    with pytest.raises(EmptyBoundaryFunction):
        husimi_grid(bf)


def test_undersampled_rejected(state):
    n = 20
    lq = state.shape.quarter_length()
    s = (np.arange(n) + 0.5) * lq / n
    bf = BoundaryFunction(k=state.k, s=s, u=np.sin(s), epsilon=state.epsilon)
    with pytest.raises(InputError):
        husimi_grid(bf)


def test_torus_like_states_concentrate_in_p():
    # near the circle at low k, states sit on bands of nearly constant |p|
    sh = StadiumShape(0.02)
    _, funcs = solve_window(sh, 40.0, 0.4)
    spreads = []
    for f in funcs:
        g = husimi_grid(f, 50, 100)
        pm = g.values.sum(axis=0)
        p = g.p_centers()
        mean = pm @ p
        spreads.append(math.sqrt(pm @ (p - mean) ** 2))
    # a uniform p-marginal on [0, 1] has spread 1/sqrt(12) ~ 0.29
    assert np.median(spreads) < 0.5 / math.sqrt(12)


@settings(max_examples=20)
@given(st.integers(1, 30), st.integers(1, 30))
def test_grid_geometry(nq, np_):
    g = HusimiGrid(0.1, 50.0, np.full((nq, np_), 1.0 / (nq * np_)))
    assert g.q_centers().size == nq and g.p_centers().size == np_
    assert g.q_centers()[-1] < 0.5 * math.pi + 0.05
