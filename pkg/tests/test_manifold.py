import math

import numpy as np
import pytest

from coho1.equilibria import fixed_point_coords, stable_frame
from coho1.errors import NotInLocus
from coho1.integrator import HCrossing, integrate
from coho1.manifold import (DEFAULT_EPS, SLICE_HEADER, TRACE_CFG, FunnelSpec, ShootSpec, extend_to_q,
                            face_point, limit_angle_fit, point_at_h, ricci_flat, shoot,
                            shoot_frame, shoot_start, slice_curve, unwrap_angles)
from coho1.model import (Dims, LocusClass, StateZDH, face_a, face_b, membership, volume_F,
                         volume_F_cone)
from coho1.rotation import PlanarCurve, brute_intersections

from conftest import S10

PAIRS = S10 + (Dims(3, 4),)
_CURVES: dict = {}


def curve(dims, i=1):
    key = (dims, i)
    if key not in _CURVES:
        _CURVES[key] = slice_curve(i, "+", 0.0, dims)
    return _CURVES[key]


def polyline_distance(q, pts):
    a, b = pts[:-1], pts[1:]
    ab = b - a
    u = np.clip(((q - a) * ab).sum(1) / np.maximum((ab * ab).sum(1), 1e-300), 0.0, 1.0)
    return float(np.min(np.hypot(*(a + u[:, None] * ab - q).T)))


@pytest.mark.parametrize("dims", PAIRS)
@pytest.mark.parametrize("i", (1, 2))
def test_shoot_frame_arc(dims, i):
    fr = shoot_frame(i, dims)
    assert abs(fr.direction(fr.psi_cap)[2]) < 1e-14
    grad = np.array([dims.d1, 2 * dims.k * fr.point[1], 0.0]) if i == 1 else \
        np.array([-dims.d2, 2 * dims.k * fr.point[1], 0.0])
    assert abs(grad @ fr.direction(fr.psi_face)) < 1e-14
    assert abs(fr.e_a @ fr.e_b) < 1e-15
    for t in (1e-6, 0.3, 0.5, 0.999):
        st, w = shoot_start(fr, fr.psi_of_t(t), DEFAULT_EPS, dims)
        assert 0 < w and st.h == 1.0 - w
        assert membership(st, dims, tol=1e-12).kind is LocusClass.INTERIOR


def test_shoot_guards():
    with pytest.raises(ValueError):
        ShootSpec("p1+", 0.1, epsilon=0.1)
    with pytest.raises(ValueError):
        ShootSpec("cone+", 0.1)
    dims = Dims(4, 5)
    fr = shoot_frame(1, dims)
    above = next(p for p in np.linspace(0, 2 * math.pi, 64) if fr.direction(p)[2] > 0.1)
    with pytest.raises(NotInLocus):
        shoot_start(fr, above, DEFAULT_EPS, dims)


def test_shoot_both_signs():
    dims = Dims(4, 5)
    fr = shoot_frame(2, dims)
    psi = fr.psi_of_t(0.4)
    fwd = shoot(ShootSpec("p2+", psi), dims, [HCrossing(0.0)])
    bwd = shoot(ShootSpec("p2-", psi), dims, [HCrossing(0.0)])
    a, b = fwd.end_state, bwd.end_state
    assert (a.z, -a.delta) == pytest.approx((b.z, b.delta), abs=1e-9)


@pytest.mark.parametrize("dims", PAIRS)
def test_slice_curve_properties(dims):
    c = curve(dims)
    assert len(c) >= 2000
    assert {"ReachesBoundary", "SpiralsToCone"} <= c.flags
    # starts on face A and ends at the truncation radius around the cone axis
    st0 = StateZDH(c.z[0], c.delta[0], 0.0)
    assert abs(face_a(st0, dims)) < 1e-5
    assert c.radius[-1] == pytest.approx(1e-8, rel=1e-3)
    assert np.all(np.isfinite(c.angle))
    assert c.winding == pytest.approx(c.angle[-1] - c.angle[0])
    assert np.allclose(c.rows()[:, 3], c.radius)


@pytest.mark.parametrize("dims", PAIRS)
@pytest.mark.parametrize("i", (1, 2))
def test_no_self_intersections(dims, i):
    pts = curve(dims, i).points
    assert brute_intersections(PlanarCurve(pts), PlanarCurve(pts)) == []


@pytest.mark.parametrize("dims", S10)
@pytest.mark.parametrize("i", (1, 2))
def test_stable_manifold_is_bar_image(dims, i):
    """Backward shots from p_i- through its stable frame land on the mirrored M_i+ slice."""
    c = curve(dims, i)
    minus = slice_curve(i, "-", 0.0, dims)
    assert np.array_equal(minus.delta, -c.delta)
    fr = shoot_frame(i, dims)
    a, b = stable_frame(f"p{i}-", dims)
    e_a = a / np.linalg.norm(a)
    e_b = b - (b @ e_a) * e_a
    e_b /= np.linalg.norm(e_b)
    p = np.array(fixed_point_coords(dims)[f"p{i}-"])
    worst = 0.0
    for j in np.linspace(0, len(c) - 1, 12).astype(int):
        v = math.cos(c.psi[j]) * e_a + math.sin(c.psi[j]) * e_b
        st, _ = shoot_start(fr, c.psi[j], DEFAULT_EPS, dims)
        start = StateZDH(st.z, -st.delta, -st.h)
        assert np.allclose(np.array(start) - p, DEFAULT_EPS * v, atol=1e-12)
        tr = integrate(start, dims, TRACE_CFG,
                       [HCrossing(0.0)], w0=2.0 - (1.0 - st.h), direction=-1, record=False)
        q = np.array([tr.end_state.z, tr.end_state.delta])
        worst = max(worst, polyline_distance(q, minus.points))
    assert worst <= 1e-6


@pytest.mark.parametrize("dims", S10)
def test_extend_to_q(dims):
    c = curve(dims)
    e = extend_to_q(c, dims)
    assert e.extended and extend_to_q(e, dims) is e
    assert (e.z[0], e.delta[0]) == pytest.approx((0.0, -dims.q_delta), abs=1e-15)
    ext = np.isnan(e.psi)
    assert ext.sum() == len(e) - len(c)
    for z, d in zip(e.z[ext], e.delta[ext]):
        assert abs(face_a(StateZDH(z, d, 0.0), dims)) < 1e-14
    chords = np.hypot(*np.diff(e.points, axis=0).T)
    assert chords[: ext.sum()].max() < 0.01
    c2 = extend_to_q(curve(dims, 2), dims)
    assert (c2.z[0], c2.delta[0]) == pytest.approx((0.0, dims.q_delta), abs=1e-15)
    assert face_point(2, 0.0, dims)[0] == pytest.approx(-dims.m / dims.d2)


@pytest.mark.parametrize("dims", PAIRS)
def test_quadrant_rotation_along_shots(dims):
    fr = shoot_frame(1, dims)
    crossings = 0
    for t in (0.2, 0.5, 0.8, 0.95):
        st, w = shoot_start(fr, fr.psi_of_t(t), DEFAULT_EPS, dims)
        tr = integrate(st, dims, TRACE_CFG,
                       [HCrossing(-0.99)], w0=w)
        z, d = tr.states[:, 0], tr.states[:, 1]
        ang = unwrap_angles(z, d)
        axis = (np.sign(z[:-1]) != np.sign(z[1:])) | (np.sign(d[:-1]) != np.sign(d[1:]))
        axis &= np.hypot(z[1:], d[1:]) > 1e-12
        crossings += int(axis.sum())
        assert np.all(np.diff(ang)[axis] > 0)
    assert crossings > 0


@pytest.mark.parametrize("dims", S10)
def test_funnel_invariance(dims):
    fun = FunnelSpec(0.9 * volume_F_cone(dims))
    fun.validate(dims)
    fr = shoot_frame(2, dims)
    entered = 0
    for t in np.linspace(0.05, 0.95, 10):
        st, w = shoot_start(fr, fr.psi_of_t(t), DEFAULT_EPS, dims)
        tr = integrate(st, dims, TRACE_CFG,
                       [HCrossing(0.0)], w0=w)
        # drop the event sample, which may land a rounding error below H = 0
        inside = [fun.contains(StateZDH(*x), dims) for x in tr.states[:-1]]
        if any(inside):
            entered += 1
            first = inside.index(True)
            assert all(inside[first:])
    assert entered > 0
    with pytest.raises(ValueError):
        FunnelSpec(2.0).validate(dims)


@pytest.mark.parametrize("dims", (Dims(4, 5), Dims(2, 7)))
def test_epsilon_robustness(dims):
    """Halving the offset moves slice points along the curve, not off it."""
    c = curve(dims)
    fr = shoot_frame(1, dims)
    for j in np.linspace(0, len(c) - 1, 15).astype(int):
        q = np.array(point_at_h(fr, c.t[j], dims, 0.0, DEFAULT_EPS / 2))
        assert polyline_distance(q, c.points) <= 1e-8


@pytest.mark.parametrize("dims", S10)
@pytest.mark.parametrize("i", (1, 2))
def test_ricci_flat_tangent_n9(dims, i):
    rf = ricci_flat(i, dims)
    assert rf.trajectory.status == "event"
    assert rf.radius[-1] <= 1e-8 * (1 + 1e-9)
    assert rf.fitted_deviation < 1e-3
    assert np.all(rf.trajectory.states[:, 2] == 1.0)
    assert rf.final_F == pytest.approx(volume_F_cone(dims), rel=1e-6)


def test_limit_angle_fit_synthetic():
    """exp(lam s) (y0 + s w) approaches along w."""
    lam = -4 / 9
    s = np.linspace(0, 60, 6001)
    w = np.array([4.0, 9.0])
    y0 = np.array([1.0, -3.0])
    y = np.exp(lam * s)[:, None] * (y0 + s[:, None] * w)
    ang = limit_angle_fit(s, y, lam, r_max=1e-2)
    assert abs(ang - math.atan2(9, 4)) < 1e-9
    # pure eigen-approach: no drift, the direction of y0 itself
    y = np.exp(lam * s)[:, None] * w
    assert abs(limit_angle_fit(s, y, lam, r_max=1e-2) - math.atan2(9, 4)) < 1e-12
    with pytest.raises(ValueError):
        limit_angle_fit(s[:2], y[:2], lam, r_max=1e-12)


def test_ricci_flat_spiral_n7():
    rf = ricci_flat(1, Dims(3, 4))
    assert rf.tangent_deviation is None
    # the spiral rate 0.577 rad per e-fold of radius bounds the gain
    ln_r = math.log(rf.radius[0] / rf.radius[-1])
    ratio = math.sqrt(2) / math.sqrt(6)
    assert rf.angle_gain == pytest.approx(ratio * ln_r, rel=0.1)


def test_slice_serialization(tmp_path):
    c = curve(Dims(4, 5))
    c.to_csv(tmp_path / "c.csv")
    c.to_json(tmp_path / "c.json")
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == SLICE_HEADER
    assert '"coho1/slice/1"' in (tmp_path / "c.json").read_text()
    with pytest.raises(ValueError):
        slice_curve(3, "+", 0.0, Dims(4, 5))
    with pytest.raises(ValueError):
        slice_curve(1, "+", 1.0, Dims(4, 5))
