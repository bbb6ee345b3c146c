"""Intersections of the H = 0 slices of M1+ and the mirrored M2+ (sphere metrics)
and of M_i+ with its own mirror (product metrics)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NotHeteroclinic, RefinementDiverged
from .integrator import HCrossing, IntegratorConfig, Trajectory, integrate
from .manifold import (DEFAULT_EPS, REFINE_CFG, TRACE_CFG, SliceCurve, extend_to_q,
                       point_at_h, shoot_frame, shoot_start, slice_curve)
from .model import Dims, LocusClass, StateZDH, membership, recover_y, s1_residual
from .rotation import PlanarCurve, brute_intersections

INTERSECTIONS_SCHEMA = "coho1/intersections/1"
INTERSECTIONS_HEADER = "d1,d2,target,psi1,psi2,Z,Delta,residual,classification"
MATCH_TOL = 1e-4
MERGE_TOL = 1e-4
RESIDUAL_TOL = 1e-9


def analytic_round_point(dims: Dims) -> tuple[float, float]:
    """(z, delta) of the round metric on its maximal-volume orbit (any d1, d2 >= 1)."""
    d1, d2, n = dims.d1, dims.d2, dims.n
    return (d1 - d2) / (n * d1 * d2), 1.0 / math.sqrt(d1 * d2)


def analytic_round_product_point(dims: Dims, i: int) -> tuple[float, float]:
    """(z, delta) of the product of round spheres, collapsing S^{d_i} at both ends."""
    dims.require_regular()
    if i == 1:
        return -1.0 / (dims.n * dims.d1), 0.0
    if i == 2:
        return 1.0 / (dims.n * dims.d2), 0.0
    raise ValueError("i must be 1 or 2")


def reference_residual(point: tuple[float, float], dims: Dims) -> float:
    """S1 residual of the recovered state; zero when the point lies on the locus."""
    st = recover_y(StateZDH(point[0], point[1], 0.0), dims)
    return s1_residual(st, dims)


@dataclass
class IntersectionRecord:
    d1: int
    d2: int
    target: str          # "sphere", "product1" or "product2"
    psi1: float
    psi2: float
    t1: float
    t2: float
    z: float
    delta: float
    residual: float
    classification: str = ""
    converged: bool = True
    iterations: int = 0
    epsilon: float = DEFAULT_EPS

    @property
    def dims(self) -> Dims:
        return Dims(self.d1, self.d2)

    @property
    def point(self) -> tuple[float, float]:
        return self.z, self.delta

    @property
    def manifolds(self) -> tuple[int, int]:
        if self.target == "sphere":
            return 1, 2
        i = int(self.target[-1])
        return i, i

    def row(self):
        return [self.d1, self.d2, self.target, self.psi1, self.psi2, self.z, self.delta,
                self.residual, self.classification]

    def to_dict(self):
        return {"d1": self.d1, "d2": self.d2, "target": self.target, "psi1": self.psi1,
                "psi2": self.psi2, "t1": self.t1, "t2": self.t2, "Z": self.z,
                "Delta": self.delta, "residual": self.residual,
                "classification": self.classification, "converged": self.converged,
                "iterations": self.iterations, "epsilon": self.epsilon}

    @classmethod
    def from_dict(cls, d) -> "IntersectionRecord":
        return cls(int(d["d1"]), int(d["d2"]), d["target"], float(d["psi1"]), float(d["psi2"]),
                   float(d["t1"]), float(d["t2"]), float(d["Z"]), float(d["Delta"]),
                   float(d["residual"]), d.get("classification", ""),
                   bool(d.get("converged", True)), int(d.get("iterations", 0)),
                   float(d.get("epsilon", DEFAULT_EPS)))


def reference_point(target: str, dims: Dims) -> tuple[float, float]:
    if target == "sphere":
        return analytic_round_point(dims)
    return analytic_round_product_point(dims, int(target[-1]))


def classify(record: IntersectionRecord, dims: Dims, tol: float = MATCH_TOL) -> str:
    ref = reference_point(record.target, dims)
    near = math.hypot(record.z - ref[0], record.delta - ref[1]) <= tol
    if record.target == "sphere":
        return "Round" if near else "NonRound"
    return "RoundProduct" if near else "NonRoundProduct"


# Curves for a target ------------------------------------------------------------

@dataclass
class TargetCurves:
    target: str
    a: SliceCurve        # extended M_i+ slice
    b: SliceCurve        # mirrored extended slice of the partner manifold
    b_source: SliceCurve  # unmirrored partner (for winding bookkeeping)


def target_curves(target: str, dims: Dims, cfg: IntegratorConfig = TRACE_CFG,
                  eps: float = DEFAULT_EPS, min_samples: int = 2000,
                  cache: dict | None = None) -> TargetCurves:
    cache = {} if cache is None else cache

    def get(i):
        key = (dims, i, eps, min_samples)
        if key not in cache:
            cache[key] = extend_to_q(slice_curve(i, "+", 0.0, dims, cfg, eps, min_samples), dims)
        return cache[key]

    if target == "sphere":
        a, src = get(1), get(2)
    elif target in ("product1", "product2"):
        a = src = get(int(target[-1]))
    else:
        raise ValueError(f"unknown target {target!r}")
    return TargetCurves(target, a, src.bar(), src)


def _segment_x(curve: SliceCurve, seg: int, u: float) -> float | None:
    ta, tb = curve.t[seg], curve.t[seg + 1]
    if not (np.isfinite(ta) and np.isfinite(tb)):
        return None
    xa, xb = math.log(ta), math.log(tb)
    return xa + u * (xb - xa)


def candidates(curves: TargetCurves) -> list[tuple[float, float]]:
    """Crossings of the two polylines away from the boundary extensions, as (x1, x2)."""
    A = PlanarCurve.from_xy(curves.a.z, curves.a.delta)
    B = PlanarCurve.from_xy(curves.b.z, curves.b.delta)
    out = []
    for c in brute_intersections(A, B):
        x1 = _segment_x(curves.a, c.seg_a, c.u_a)
        x2 = _segment_x(curves.b, c.seg_b, c.u_b)
        if x1 is None or x2 is None:
            continue
        out.append((x1, x2))
    return out


def merge_candidates(cands, frame_a, frame_b, tol=MERGE_TOL):
    merged = []
    for x1, x2 in cands:
        p1, p2 = frame_a.psi_of_t(math.exp(x1)), frame_b.psi_of_t(math.exp(x2))
        if any(abs(p1 - q1) < tol and abs(p2 - q2) < tol for _, _, q1, q2 in merged):
            continue
        merged.append((x1, x2, p1, p2))
    return [(m[0], m[1]) for m in merged]


# Refinement -------------------------------------------------------------------

class ShotMap:
    """x = ln t  ->  (z, delta) at H = 0, with memoization."""

    def __init__(self, i: int, dims: Dims, eps: float, cfg: IntegratorConfig, mirror: bool):
        self.frame = shoot_frame(i, dims)
        self.dims, self.eps, self.cfg, self.mirror = dims, eps, cfg, mirror
        self._memo: dict[float, np.ndarray] = {}

    def __call__(self, x: float) -> np.ndarray:
        x = min(x, 0.0)
        if x not in self._memo:
            z, d = point_at_h(self.frame, math.exp(x), self.dims, 0.0, self.eps, self.cfg)
            self._memo[x] = np.array([z, -d if self.mirror else d])
        return self._memo[x]

    def derivative(self, x: float, hx: float) -> np.ndarray:
        if x + hx <= 0.0:
            return (self(x + hx) - self(x - hx)) / (2 * hx)
        return (self(x) - self(x - hx)) / hx


def refine(x1: float, x2: float, pa: ShotMap, pb: ShotMap, tol: float = RESIDUAL_TOL,
           max_iter: int = 40, hx: float = 1e-6) -> tuple[float, float, float, int, bool]:
    """Damped Newton on F(x1, x2) = P_a(x1) - mirror(P_b(x2))."""
    F = pa(x1) - pb(x2)
    nf = float(np.linalg.norm(F))
    it = 0
    while nf > tol and it < max_iter:
        it += 1
        J = np.column_stack([pa.derivative(x1, hx), -pb.derivative(x2, hx)])
        try:
            step = -np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(J, F, rcond=None)[0]
        lam = 1.0
        improved = False
        for _ in range(30):
            y1, y2 = min(x1 + lam * step[0], 0.0), min(x2 + lam * step[1], 0.0)
            Fn = pa(y1) - pb(y2)
            nn = float(np.linalg.norm(Fn))
            if nn < nf:
                x1, x2, F, nf = y1, y2, Fn, nn
                improved = True
                break
            lam *= 0.5
        if not improved:
            break
    return x1, x2, nf, it, nf <= tol


def find_intersections(curves: TargetCurves, dims: Dims, cfg: IntegratorConfig = REFINE_CFG,
                       eps: float = DEFAULT_EPS, strict: bool = False) -> list[IntersectionRecord]:
    """Refined intersection records for ``curves``, sorted by (psi1, psi2)."""
    ia, ib = (1, 2) if curves.target == "sphere" else (int(curves.target[-1]),) * 2
    pa = ShotMap(ia, dims, eps, cfg, mirror=False)
    pb = ShotMap(ib, dims, eps, cfg, mirror=True)
    cands = merge_candidates(candidates(curves), pa.frame, pb.frame)
    records: list[IntersectionRecord] = []
    for x1, x2 in cands:
        y1, y2, res, it, ok = refine(x1, x2, pa, pb)
        if not ok and strict:
            raise RefinementDiverged(f"candidate at x=({x1:.6g}, {x2:.6g}) left residual {res:.3e}")
        z, d = pa(y1)
        t1, t2 = math.exp(y1), math.exp(y2)
        rec = IntersectionRecord(dims.d1, dims.d2, curves.target, pa.frame.psi_of_t(t1),
                                 pb.frame.psi_of_t(t2), t1, t2, float(z), float(d), res,
                                 converged=ok, iterations=it, epsilon=eps)
        m = membership(StateZDH(rec.z, rec.delta, 0.0), dims, tol=1e-9)
        if m.kind is not LocusClass.INTERIOR:
            continue
        rec.classification = classify(rec, dims)
        if any(math.hypot(rec.z - r.z, rec.delta - r.delta) < 1e-7 and
               abs(rec.psi1 - r.psi1) < 1e-6 for r in records):
            continue
        records.append(rec)
    records.sort(key=lambda r: (r.psi1, r.psi2))
    return records


# Heteroclinic connection ---------------------------------------------------------

@dataclass
class Connection:
    """Trajectory through an intersection, assembled from two shots.

    The first leg is the shot from ``p_i+`` to the intersection point.  The
    second leg is the time-reversal image of the partner shot, which runs
    from the intersection point into ``p_j-``.
    """

    first: Trajectory
    second: Trajectory
    s_junction: float
    gap: float
    start_distance: float
    end_distance: float
    start_label: str
    end_label: str

    def sample(self, ds: float) -> tuple[np.ndarray, np.ndarray]:
        """Samples (s, states) along the whole connection, uniform in s per leg."""
        s1 = self.first.s
        grid1 = np.linspace(s1[0], s1[-1], max(int(math.ceil((s1[-1] - s1[0]) / ds)), 2) + 1)
        st1 = self.first.state_at(grid1)
        s2 = self.second.s
        grid2 = np.linspace(s2[0], s2[-1], max(int(math.ceil((s2[-1] - s2[0]) / ds)), 2) + 1)
        st2 = self.second.state_at(grid2)
        # map the second leg: partner time tau -> s_junction + (tau_end - tau), sigma applied
        s_map = self.s_junction + (s2[-1] - grid2)
        st2 = np.column_stack([st2[:, 0], -st2[:, 1], -st2[:, 2]])
        order = np.argsort(s_map)
        s = np.concatenate([grid1, s_map[order][1:]])
        states = np.vstack([st1, st2[order][1:]])
        return s, states


def _shot_trajectory(i, t, dims, eps, cfg):
    frame = shoot_frame(i, dims)
    st, w = shoot_start(frame, frame.psi_of_t(t), eps, dims)
    return integrate(st, dims, cfg, [HCrossing(0.0)], w0=w, record=True)


def connection(record: IntersectionRecord, cfg: IntegratorConfig = REFINE_CFG,
               radius: float = 1e-5) -> Connection:
    """Assemble the trajectory through ``record`` and check both ends."""
    dims = record.dims
    if math.hypot(record.z, record.delta) < 1e-6:
        raise NotHeteroclinic("point lies on the cone axis")
    ia, ib = record.manifolds
    eps = record.epsilon
    first = _shot_trajectory(ia, record.t1, dims, eps, cfg)
    second = _shot_trajectory(ib, record.t2, dims, eps, cfg)
    from .equilibria import fixed_point_coords
    fps = fixed_point_coords(dims)
    start = np.array(fps[f"p{ia}+"])
    end = np.array(fps[f"p{ib}-"])
    p_first0 = first.states[0]
    p_second0 = second.states[0]
    sig0 = np.array([p_second0[0], -p_second0[1], -p_second0[2]])
    d_start = float(np.linalg.norm(p_first0 - start))
    d_end = float(np.linalg.norm(sig0 - end))
    e1 = first.end_state
    e2 = second.end_state
    gap = math.hypot(e1.z - e2.z, e1.delta + e2.delta)
    if d_start > radius or d_end > radius:
        raise NotHeteroclinic(f"ends at distance {d_start:.2e} / {d_end:.2e} from the saddles")
    return Connection(first, second, first.end_s, gap, d_start, d_end, f"p{ia}+", f"p{ib}-")


def direct_closest_approach(record: IntersectionRecord, cfg: IntegratorConfig = REFINE_CFG
                            ) -> tuple[float, float]:
    """Diagnostic: closest approach to the two saddles when integrating straight
    from the intersection point.  Both saddles repel along one direction, so
    the achievable distance is bounded by the amplification of the residual."""
    dims = record.dims
    from .equilibria import fixed_point_coords
    from .integrator import SLimit
    fps = fixed_point_coords(dims)
    ia, ib = record.manifolds
    st = StateZDH(record.z, record.delta, 0.0)
    out = []
    for direction, label in ((-1, f"p{ia}+"), (1, f"p{ib}-")):
        tr = integrate(st, dims, cfg, [SLimit(80.0)], direction=direction,
                       raise_on_failure=False)
        c = np.array(fps[label])
        out.append(float(np.min(np.linalg.norm(tr.states - c, axis=1))))
    return out[0], out[1]
