"""Shooting from the saddles p1+/p2+ and the slice curves of their unstable manifolds.

A point of the unstable manifold of ``p_i+`` is reached by integrating from
``p + eps * v(psi)`` where ``v(psi)`` runs over the unit circle of the
(orthonormalized) unstable plane.  Only an arc of directions points into the
invariant locus; it is bounded by the cap direction (the trajectory stays in
``h = 1``) and the face direction (the trajectory stays on a quadratic face).
Slice curves are parametrized by ``t`` in ``(0, 1]`` along that arc, with
``t -> 0`` at the cap end.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _dopri as K
from .equilibria import fixed_point_coords, stable_frame, unstable_frame
from .errors import IncompleteCurve, NoConvergence, NotInLocus
from .integrator import (ArcCap, HCrossing, IntegratorConfig, NearPoint, SLimit, Trajectory,
                         integrate)
from .model import (Dims, StateZDH, face_a, face_b, membership, LocusClass, volume_F,
                    volume_F_cone)

SLICE_SCHEMA = "coho1/slice/1"
SLICE_HEADER = "psi,Z,Delta,radius,angle_unwrapped"

# Tracer tolerances: the w = 1 - h component is controlled in relative terms
# down to w ~ 1e-15, so the absolute floor has to sit far below it.
TRACE_CFG = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-20, max_step=0.1, min_step=1e-14,
                             max_steps=400_000, locus_tol=1e-6)
REFINE_CFG = replace(TRACE_CFG, rel_tol=1e-12)

DEFAULT_EPS = 1e-6
TRUNCATION_RADIUS = 1e-8
PSI_FLOOR = 1e-12


@dataclass(frozen=True)
class ShootSpec:
    fp_label: str
    psi: float
    epsilon: float = DEFAULT_EPS
    cfg: IntegratorConfig = TRACE_CFG

    def __post_init__(self):
        if not (0.0 < self.epsilon <= 1e-3):
            raise ValueError("epsilon must lie in (0, 1e-3]")
        if self.fp_label not in ("p1+", "p2+", "p1-", "p2-"):
            raise ValueError(f"cannot shoot from {self.fp_label!r}")


@dataclass(frozen=True)
class FunnelSpec:
    c: float

    def contains(self, state: StateZDH, dims: Dims) -> bool:
        if state.h < 0:
            return False
        return volume_F(state, dims, tol=1e-6) >= self.c

    def validate(self, dims: Dims):
        if not (0.0 < self.c < volume_F_cone(dims)):
            raise ValueError("funnel threshold must lie in (0, F_cone)")


# Shooting frame ---------------------------------------------------------------

@dataclass(frozen=True)
class ShootFrame:
    """Orthonormal frame of the unstable plane at ``p_i+`` and its interior arc."""

    label: str
    point: np.ndarray
    e_a: np.ndarray
    e_b: np.ndarray
    psi_cap: float
    psi_face: float
    face: str

    def direction(self, psi: float) -> np.ndarray:
        return math.cos(psi) * self.e_a + math.sin(psi) * self.e_b

    def psi_of_t(self, t: float) -> float:
        return self.psi_cap + t * (self.psi_face - self.psi_cap)


def _orthonormal(u_a, u_b):
    e_a = u_a / np.linalg.norm(u_a)
    v = u_b - (u_b @ e_a) * e_a
    return e_a, v / np.linalg.norm(v)


def shoot_frame(i: int, dims: Dims) -> ShootFrame:
    dims.require_regular()
    label = f"p{i}+"
    p = np.array(fixed_point_coords(dims)[label], dtype=float)
    e_a, e_b = _orthonormal(*unstable_frame(label, dims))
    # gradient of the active face: face A passes through p1+, face B through p2+
    k = dims.k
    if i == 1:
        grad = np.array([dims.d1, 2 * k * p[1], 0.0])
        face = "A"
    else:
        grad = np.array([-dims.d2, 2 * k * p[1], 0.0])
        face = "B"
    # v(psi) = cos psi e_a + sin psi e_b; constraints v_h <= 0 and grad.v <= 0
    ch = (e_a[2], e_b[2])
    cf = (grad @ e_a, grad @ e_b)

    def zero_dirs(c):
        base = math.atan2(-c[0], c[1])  # c0 cos + c1 sin = 0
        return [base % (2 * math.pi), (base + math.pi) % (2 * math.pi)]

    def hval(psi):
        return ch[0] * math.cos(psi) + ch[1] * math.sin(psi)

    def fval(psi):
        return cf[0] * math.cos(psi) + cf[1] * math.sin(psi)

    psi_cap = next(p_ for p_ in zero_dirs(ch) if fval(p_) < 0)
    psi_face = next(p_ for p_ in zero_dirs(cf) if hval(p_) < 0)
    # choose the representative of psi_face on the side of the feasible arc
    for shift in (0.0, 2 * math.pi, -2 * math.pi):
        cand = psi_face + shift
        mid = 0.5 * (psi_cap + cand)
        if hval(mid) < 0 and fval(mid) < 0 and abs(cand - psi_cap) < math.pi:
            psi_face = cand
            break
    else:
        raise RuntimeError("could not locate the interior arc")
    return ShootFrame(label, p, e_a, e_b, psi_cap, psi_face, face)


def shoot_start(frame: ShootFrame, psi: float, eps: float, dims: Dims) -> tuple[StateZDH, float]:
    """Offset start point and its exact ``w = 1 - h``.

    Starts that fall outside the active face by the second-order curvature of
    the face are pushed back onto it along z.
    """
    v = frame.direction(psi)
    z, dl = frame.point[0] + eps * v[0], frame.point[1] + eps * v[1]
    w = -eps * v[2]
    if w < -1e-15:
        raise NotInLocus(f"psi={psi!r} points above the cap")
    w = max(w, 0.0)
    st = StateZDH(z, dl, 1.0 - w)
    if frame.face == "A" and face_a(st, dims) > 0:
        z = (dims.m - dims.k * dl * dl) / dims.d1
    elif frame.face == "B" and face_b(st, dims) > 0:
        z = -(dims.m - dims.k * dl * dl) / dims.d2
    st = StateZDH(z, dl, 1.0 - w)
    m = membership(st, dims, tol=1e-12)
    if m.kind is LocusClass.OUTSIDE:
        raise NotInLocus(f"offset start for psi={psi!r} leaves the locus")
    return st, w


def shoot(spec: ShootSpec, dims: Dims, stop: Sequence = (), record: bool = True) -> Trajectory:
    """Integrate from the offset start of ``spec``.

    For ``p_i-`` labels the stable manifold is traced by integrating backward
    from the sigma-image of the corresponding ``p_i+`` offset.
    """
    i = int(spec.fp_label[1])
    frame = shoot_frame(i, dims)
    st, w = shoot_start(frame, spec.psi, spec.epsilon, dims)
    if spec.fp_label.endswith("+"):
        return integrate(st, dims, spec.cfg, list(stop), w0=w, record=record)
    sig = StateZDH(st.z, -st.delta, -st.h)
    return integrate(sig, dims, spec.cfg, list(stop), w0=2.0 - w, direction=-1, record=record)


def point_at_h(frame: ShootFrame, t: float, dims: Dims, h: float = 0.0,
               eps: float = DEFAULT_EPS, cfg: IntegratorConfig = TRACE_CFG) -> tuple[float, float]:
    """(z, delta) where the shot with arc parameter ``t`` crosses ``H = h``."""
    st, w = shoot_start(frame, frame.psi_of_t(t), eps, dims)
    traj = integrate(st, dims, cfg, [HCrossing(h)], w0=w, record=False)
    end = traj.events[0].state_hit
    return float(end.z), float(end.delta)


# Slice curves -----------------------------------------------------------------

@dataclass
class SliceCurve:
    """Samples of ``M_i^sign`` on ``{H = h}`` ordered from the boundary end inward.

    Extension samples (added by :func:`extend_to_q`) carry ``psi = nan``.
    """

    dims: Dims
    i: int
    sign: str
    h: float
    psi: np.ndarray
    t: np.ndarray
    z: np.ndarray
    delta: np.ndarray
    flags: frozenset = frozenset()
    epsilon: float = DEFAULT_EPS
    extended: bool = False
    angle: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.angle is None:
            self.angle = unwrap_angles(self.z, self.delta)

    @property
    def radius(self) -> np.ndarray:
        return np.hypot(self.z, self.delta)

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.z, self.delta])

    @property
    def winding(self) -> float:
        return float(self.angle[-1] - self.angle[0])

    def __len__(self):
        return len(self.z)

    def bar(self) -> "SliceCurve":
        """Mirror image under (z, delta) -> (z, -delta)."""
        return replace(self, z=self.z.copy(), delta=-self.delta, angle=None,
                       sign=self.sign + "bar")

    def rows(self):
        return np.column_stack([self.psi, self.z, self.delta, self.radius, self.angle])

    def to_csv(self, path):
        from .io import write_csv
        write_csv(path, SLICE_HEADER.split(","), self.rows())

    def to_json(self, path):
        from .io import write_json
        write_json(path, {"schema": SLICE_SCHEMA, "d1": self.dims.d1, "d2": self.dims.d2,
                          "manifold": f"m{self.i}{self.sign}", "h": self.h,
                          "epsilon": self.epsilon, "flags": sorted(self.flags),
                          "extended": self.extended, "columns": SLICE_HEADER.split(","),
                          "rows": self.rows().tolist()})


def unwrap_angles(z: np.ndarray, delta: np.ndarray) -> np.ndarray:
    ang = np.arctan2(delta, z)
    if len(ang) < 2:
        return ang
    d = np.diff(ang)
    d = (d + np.pi) % (2 * np.pi) - np.pi
    return np.concatenate([[ang[0]], ang[0] + np.cumsum(d)])


def _wrapped_gap(a0, a1):
    d = a1 - a0
    return abs((d + math.pi) % (2 * math.pi) - math.pi)


def _locate_truncation(frame, dims, h, eps, cfg, r_trunc):
    """Largest-|x| boundary of the sampled range, x = ln t.

    Returns (x_min, spirals) where ``spirals`` tells whether the radius at the
    slice actually drops to ``r_trunc`` before the psi-resolution floor.
    """
    span = abs(frame.psi_face - frame.psi_cap)
    x_floor = math.log(PSI_FLOOR / span)

    def radius(x):
        z, d = point_at_h(frame, math.exp(x), dims, h, eps, cfg)
        return math.hypot(z, d)

    if radius(x_floor) > r_trunc:
        return x_floor, False
    lo, hi = x_floor, 0.0
    if radius(hi) <= r_trunc:
        raise IncompleteCurve("the whole slice curve lies inside the truncation radius")
    # find a bracket: radius(lo) <= r_trunc < radius(hi); scan from the face end
    xs = np.linspace(0.0, x_floor, 60)
    prev = 0.0
    for x in xs[1:]:
        if radius(x) <= r_trunc:
            lo, hi = x, prev
            break
        prev = x
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if radius(mid) <= r_trunc:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-6:
            break
    return hi, True


def slice_curve(i: int, sign: str, h: float, dims: Dims, cfg: IntegratorConfig = TRACE_CFG,
                eps: float = DEFAULT_EPS, min_samples: int = 2000, max_angle_gap: float = 0.1,
                max_chord: float = 0.01, r_trunc: float = TRUNCATION_RADIUS,
                initial: int = 400) -> SliceCurve:
    """Sample ``M_i^sign`` on ``{H = h}``.

    The stable manifolds ``M_i^-`` are obtained from ``M_i^+`` by the
    time-reversal symmetry: their slice at ``h`` is the mirror of the ``M_i^+``
    slice at ``-h``.
    """
    if i not in (1, 2) or sign not in ("+", "-"):
        raise ValueError("need i in {1, 2} and sign in {'+', '-'}")
    if not -1.0 < h < 1.0:
        raise ValueError("h must lie in (-1, 1)")
    if sign == "-":
        plus = slice_curve(i, "+", -h, dims, cfg, eps, min_samples, max_angle_gap, max_chord,
                           r_trunc, initial)
        return replace(plus, z=plus.z.copy(), delta=-plus.delta, sign="-", h=h, angle=None)

    frame = shoot_frame(i, dims)
    x_min, spirals = _locate_truncation(frame, dims, h, eps, cfg, r_trunc)
    cache: dict[float, tuple[float, float]] = {}

    def pt(x):
        if x not in cache:
            cache[x] = point_at_h(frame, math.exp(x), dims, h, eps, cfg)
        return cache[x]

    xs = list(np.linspace(0.0, x_min, initial))
    for x in xs:
        pt(x)
    while True:
        pts = np.array([pt(x) for x in xs])
        ang = np.arctan2(pts[:, 1], pts[:, 0])
        chord = np.hypot(*np.diff(pts, axis=0).T)
        gaps = np.abs((np.diff(ang) + np.pi) % (2 * np.pi) - np.pi)
        bad = (gaps >= max_angle_gap) | (chord >= max_chord)
        if not bad.any():
            if len(xs) >= min_samples:
                break
            # densify where the curve is longest until the sample budget is met
            need = min_samples - len(xs)
            order = np.argsort(-chord, kind="stable")[:need]
            bad = np.zeros_like(bad)
            bad[order] = True
        new_xs = []
        for j, x in enumerate(xs[:-1]):
            new_xs.append(x)
            if bad[j]:
                xa, xb = x, xs[j + 1]
                ta, tb = math.exp(xa), math.exp(xb)
                if abs(ta - tb) * abs(frame.psi_face - frame.psi_cap) < PSI_FLOOR:
                    raise IncompleteCurve(f"gap persists at psi resolution floor near t={ta:.3e}")
                new_xs.append(0.5 * (xa + xb))
        new_xs.append(xs[-1])
        xs = new_xs
    pts = np.array([pt(x) for x in xs])
    ts = np.exp(np.array(xs))
    psis = np.array([frame.psi_of_t(t) for t in ts])
    flags = {"ReachesBoundary"}
    if spirals:
        flags.add("SpiralsToCone")
    return SliceCurve(dims, i, "+", h, psis, ts, pts[:, 0].copy(), pts[:, 1].copy(),
                      frozenset(flags), eps)


def face_point(i: int, delta: float, dims: Dims) -> tuple[float, float]:
    """Point of the face through ``p_i+`` with the given delta."""
    q = dims.m - dims.k * delta * delta
    return (q / dims.d1, delta) if i == 1 else (-q / dims.d2, delta)


def extend_to_q(curve: SliceCurve, dims: Dims, max_chord: float = 0.002) -> SliceCurve:
    """Prepend the arc of the face from the q-point of the slice to the boundary end.

    The extension is the branch of the face parabola in the half-plane of
    ``p_i+``, so for ``M_i^+`` it starts at ``(0, -b)`` (i = 1) or ``(0, b)``
    (i = 2), with ``b = sqrt((n-1)/(d1 d2))``.
    """
    if "ReachesBoundary" not in curve.flags:
        raise ValueError("curve has no boundary endpoint")
    if curve.extended:
        return curve
    b = dims.q_delta
    mirrored = curve.sign == "-"
    i = curve.i
    d_end = curve.delta[0] * (-1 if mirrored else 1)
    d_start = -b if i == 1 else b
    # resolution: parabola arc length is at most a few units; use a fine uniform grid
    m = max(int(math.ceil(abs(d_end - d_start) * 4 / max_chord)), 8)
    ds = np.linspace(d_start, d_end, m + 1)[:-1]
    zs = np.array([face_point(i, d, dims)[0] for d in ds])
    if mirrored:
        ds = -ds
    return replace(curve, psi=np.concatenate([np.full(len(ds), np.nan), curve.psi]),
                   t=np.concatenate([np.full(len(ds), np.nan), curve.t]),
                   z=np.concatenate([zs, curve.z]), delta=np.concatenate([ds, curve.delta]),
                   extended=True, angle=None)


# Ricci-flat trajectory ------------------------------------------------------------

@dataclass
class RicciFlatResult:
    trajectory: Trajectory
    angle: np.ndarray
    radius: np.ndarray
    limit_angle: float
    tangent_deviation: float | None
    final_F: float
    fitted_deviation: float | None = None

    @property
    def angle_gain(self) -> float:
        return float(self.angle[-1] - self.angle[0])


def ricci_flat(i: int, dims: Dims, cfg: IntegratorConfig = TRACE_CFG, eps: float = DEFAULT_EPS,
               radius: float = 1e-8) -> RicciFlatResult:
    """Trajectory in the cap ``h = 1`` from ``p_i+`` into the cone point.

    For the double root case (n = 9) the deviation of the final approach
    direction from the (4, 9) eigendirection is reported at the stopping
    radius, where it decays only like 1/|log r|, and as extrapolated by
    :func:`limit_angle_fit`.
    """
    frame = shoot_frame(i, dims)
    st, w = shoot_start(frame, frame.psi_cap, eps, dims)
    cone = StateZDH(0.0, 0.0, 1.0)
    traj = integrate(StateZDH(st.z, st.delta, 1.0), dims, replace(cfg, max_steps=cfg.max_steps),
                     [NearPoint(cone, radius, "cone+")], w0=0.0, raise_on_failure=False)
    if traj.status != "event":
        raise NoConvergence(f"cap trajectory stopped with status {traj.status!r}")
    z, dl = traj.states[:, 0], traj.states[:, 1]
    ang = unwrap_angles(z, dl)
    r = np.hypot(z, dl)
    dev = fit = None
    if dims.n == 9:
        target = math.atan2(9.0, 4.0)
        dev = abs(_mod_pi(ang[-1] - target))
        fit = abs(_mod_pi(limit_angle_fit(traj.s, traj.states[:, :2], -4.0 / 9.0) - target))
    F = volume_F(traj.end_state, dims, tol=1e-6)
    return RicciFlatResult(traj, ang, r, float(ang[-1]), dev, F, fit)


def _mod_pi(a: float) -> float:
    return (a + math.pi / 2) % math.pi - math.pi / 2


def limit_angle_fit(s: np.ndarray, y: np.ndarray, lam: float, r_max: float = 1e-4) -> float:
    """Limiting polar angle of a planar trajectory entering a Jordan-block node.

    With a double eigenvalue ``lam`` the linear solution is
    ``exp(lam s) (y0 + s w)``, so ``exp(-lam s) y(s)`` is affine in ``s`` and
    its slope ``w`` points along the limiting direction.  The fit uses the
    samples with radius below ``r_max``.  When the drift ``w`` is negligible
    the trajectory already runs along the eigenline and its own direction is
    returned.
    """
    r = np.hypot(y[:, 0], y[:, 1])
    m = r < r_max
    if m.sum() < 3:
        raise ValueError("too few samples inside r_max")
    e = y[m] * np.exp(-lam * s[m])[:, None]
    w = np.polyfit(s[m], e, 1)[0]
    span = s[m][-1] - s[m][0]
    if np.linalg.norm(w) * span < 1e-3 * np.linalg.norm(e[-1]):
        return float(math.atan2(e[-1, 1], e[-1, 0]))
    return float(math.atan2(w[1], w[0]))
