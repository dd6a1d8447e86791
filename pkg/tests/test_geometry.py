import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from stadloc.errors import Grazing, InputError
from stadloc.geometry import PhasePoint, StadiumShape, boundary_arrays, boundary_point, bounce, bounce_map, orbit

eps_st = st.floats(0.01, 1.0)


@pytest.mark.parametrize("eps", [0.0, 0.1, 0.37, 1.0])
def test_perimeter_and_area(eps):
    sh = StadiumShape(eps)
    assert sh.perimeter() == 2 * math.pi + 2 * eps
    assert sh.area() == math.pi + 2 * eps


def test_negative_epsilon_rejected():
    with pytest.raises(InputError):
        StadiumShape(-0.1)


def test_circle_origin():
    bp = boundary_point(StadiumShape(0.0), 0.0)
    assert np.allclose(bp.position, (1.0, 0.0), atol=1e-15)
    assert np.allclose(bp.normal, (1.0, 0.0), atol=1e-15)
    assert bp.curvature == 1.0


def test_flat_segment_curvature():
    sh = StadiumShape(0.2)
    # the top segment runs from s = pi/2 to pi/2 + eps
    for s in (math.pi / 2 + 0.05, math.pi / 2 + 0.15, 1.5 * math.pi + 0.3):
        assert boundary_point(sh, s).curvature == 0.0


def test_quarter_point_is_top():
    sh = StadiumShape(0.2)
    bp = boundary_point(sh, sh.perimeter() / 4)
    assert bp.position[0] == pytest.approx(0.0, abs=1e-14)
    assert bp.position[1] == pytest.approx(1.0, abs=1e-14)


def test_arclength_matches_numeric_integration():
    sh = StadiumShape(0.2)
    h = 1e-6

    def speed(s):
        x1, y1 = boundary_arrays(sh, np.array([s - h]))[:2]
        x2, y2 = boundary_arrays(sh, np.array([s + h]))[:2]
        return math.hypot(x2[0] - x1[0], y2[0] - y1[0]) / (2 * h)

    brk = [0, math.pi / 2, math.pi / 2 + 0.2, 1.5 * math.pi + 0.2, 1.5 * math.pi + 0.4, sh.perimeter()]
    total = sum(quad(speed, a + 1e-9, b - 1e-9, limit=200)[0] for a, b in zip(brk[:-1], brk[1:]))
    assert total == pytest.approx(sh.perimeter(), abs=1e-6)


@given(eps_st, st.floats(-50, 50))
def test_normals_are_unit(eps, s):
    bp = boundary_point(StadiumShape(eps), s)
    assert abs(math.hypot(*bp.normal) - 1) < 1e-12
    assert bp.curvature in (0.0, 1.0)


def test_bouncing_ball():
    sh = StadiumShape(0.3)
    start = PhasePoint(math.pi / 2 + 0.1, 0.0)
    nxt = bounce_map(sh, start)
    assert nxt.p == pytest.approx(0.0, abs=1e-14)
    x0 = boundary_point(sh, start.s).position
    x1 = boundary_point(sh, nxt.s).position
    assert x1[0] == pytest.approx(x0[0], abs=1e-13)
    assert x1[1] == pytest.approx(-x0[1], abs=1e-13)


def test_grazing_rejected():
    with pytest.raises(Grazing):
        bounce_map(StadiumShape(0.1), PhasePoint(0.3, 1.0))


def test_circle_conserves_p():
    traj = orbit(StadiumShape(0.0), PhasePoint(0.123, 0.4321), 10_000)
    assert np.max(np.abs(np.abs(traj[:, 1]) - 0.4321)) < 1e-12


@given(eps_st, st.floats(0, 2 * math.pi), st.floats(-0.95, 0.95))
def test_reversibility(eps, s, p):
    sh = StadiumShape(eps)
    a = bounce_map(sh, PhasePoint(s, p))
    b = bounce_map(sh, a.time_reversed())
    ds = (b.s - s + sh.perimeter() / 2) % sh.perimeter() - sh.perimeter() / 2
    assert abs(ds) < 1e-9
    assert abs(b.p + p) < 1e-9


@given(eps_st, st.floats(0, 2 * math.pi), st.floats(-0.9, 0.9))
def test_unit_jacobian(eps, s, p):
    sh = StadiumShape(eps)
    h = 1e-6
    pts_s = np.array([s + h, s - h, s, s])
    pts_p = np.array([p, p, p + h, p - h])
    ns, np_ = bounce(sh, pts_s, pts_p)
    # a derivative straddling a piece boundary is not smooth; skip those samples
    L = sh.perimeter()
    dss = ((ns[0] - ns[1] + L / 2) % L - L / 2) / (2 * h)
    dsp = ((ns[2] - ns[3] + L / 2) % L - L / 2) / (2 * h)
    dps = (np_[0] - np_[1]) / (2 * h)
    dpp = (np_[2] - np_[3]) / (2 * h)
    det = dss * dpp - dsp * dps
    if max(abs(dss), abs(dsp), abs(dps), abs(dpp)) > 1e3:
        return
    base = bounce(sh, np.array([s, s + 2 * h]), np.array([p, p]))
    if abs(((base[0][1] - base[0][0] + L / 2) % L - L / 2) / (2 * h) - dss) > 1e-2 * (1 + abs(dss)):
        return  # a corner of the piecewise map lies inside the stencil
    assert abs(det - 1) < 1e-6


@given(eps_st, st.floats(0, 2 * math.pi), st.floats(-0.95, 0.95))
def test_chord_midpoint_inside(eps, s, p):
    sh = StadiumShape(eps)
    a = boundary_point(sh, s).position
    b = boundary_point(sh, bounce_map(sh, PhasePoint(s, p)).s).position
    mid = 0.5 * (np.asarray(a) + np.asarray(b))
    assert sh.contains(mid[0], mid[1], tol=1e-12)


def test_unit_jacobian_fixed_points():
    sh = StadiumShape(0.25)
    rng = np.random.default_rng(3)
    h = 1e-6
    L = sh.perimeter()
    dets = []
    for s, p in zip(rng.uniform(0, L, 200), rng.uniform(-0.9, 0.9, 200)):
        ns, np_ = bounce(sh, np.array([s + h, s - h, s, s]), np.array([p, p, p + h, p - h]))
        J = np.array([[((ns[0] - ns[1] + L / 2) % L - L / 2), ((ns[2] - ns[3] + L / 2) % L - L / 2)],
                      [np_[0] - np_[1], np_[2] - np_[3]]]) / (2 * h)
        dets.append(np.linalg.det(J))
    dets = np.array(dets)
    # stencils straddling a piece boundary are rare outliers; the bulk must be area preserving
    good = np.abs(dets - 1) < 1e-6
    assert good.mean() > 0.95
