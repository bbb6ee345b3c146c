"""Batch runs over dimension pairs: sphere and product intersections, and the d1 = 1 case."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .fields import jacobian_zdh
from .equilibria import fixed_point_coords
from .integrator import HCrossing, IntegratorConfig, integrate
from .intersect import IntersectionRecord, TargetCurves, classify, find_intersections, target_curves
from .manifold import DEFAULT_EPS, REFINE_CFG, TRACE_CFG, SliceCurve
from .model import Dims, StateZDH
from .rotation import SMALL_RADIUS, PlanarCurve, WindingReport, winding_limit

SETS = {
    "s10": ((2, 7), (3, 6), (4, 5)),
    "s11": ((2, 8), (3, 7), (4, 6), (5, 5)),
    "products": ((2, 7), (3, 6), (4, 5)),
    "degenerate-d1": ((1, 8),),
}
SET_TARGETS = {
    "s10": ("sphere",), "s11": ("sphere",), "products": ("product1", "product2"),
    "degenerate-d1": ("sphere",),
}


@dataclass
class PairResult:
    dims: Dims
    target: str
    records: list[IntersectionRecord]
    theta_a: float = float("nan")
    theta_b: float = float("nan")
    curves: TargetCurves | None = None
    notes: dict = field(default_factory=dict)

    @property
    def n_round(self) -> int:
        return sum(r.classification in ("Round", "RoundProduct") for r in self.records)

    @property
    def n_nonround(self) -> int:
        return sum(r.classification in ("NonRound", "NonRoundProduct") for r in self.records)

    @property
    def winding_sum(self) -> float:
        return self.theta_a + self.theta_b

    def row(self):
        return [self.dims.d1, self.dims.d2, self.target, len(self.records), self.n_round,
                self.n_nonround, self.theta_a, self.theta_b]


SURVEY_HEADER = "d1,d2,target,intersections,round,nonround,theta_a,theta_b"


def winding_report(curve: SliceCurve) -> WindingReport:
    """Truncation windings of a slice curve, oriented to be positive."""
    pts = curve.points
    pts = pts[np.hypot(pts[:, 0], pts[:, 1]) > 0.0]
    v = np.vstack([pts, [0.0, 0.0]])
    rep = winding_limit(PlanarCurve(v, ends_at_origin=True))
    sign = 1.0 if rep.thetas[-1] >= 0 else -1.0
    return WindingReport(rep.radii, sign * rep.thetas)


def certified_winding(curve: SliceCurve, r_max: float = SMALL_RADIUS) -> float:
    """Lower bound of |winding| over truncations at radius <= ``r_max``."""
    return winding_report(curve).tail_bound(r_max)


def run_pair(dims: Dims, target: str = "sphere", trace_cfg: IntegratorConfig = TRACE_CFG,
             refine_cfg: IntegratorConfig = REFINE_CFG, eps: float = DEFAULT_EPS,
             min_samples: int = 2000, cache: dict | None = None) -> PairResult:
    if dims.degenerate:
        return degenerate_pair(dims, samples=min_samples, eps=eps, cfg=refine_cfg)
    curves = target_curves(target, dims, trace_cfg, eps, min_samples, cache)
    recs = find_intersections(curves, dims, refine_cfg, eps)
    return PairResult(dims, target, recs, certified_winding(curves.a),
                      certified_winding(curves.b), curves)


def _pair_results(pair: tuple[int, int], targets: tuple[str, ...], kw: dict) -> list[PairResult]:
    cache: dict = {}
    return [run_pair(Dims(*pair), t, cache=cache, **kw) for t in targets]


def survey(name: str, workers: int | None = None, **kw) -> list[PairResult]:
    """Run every pair of a named set; pairs are spread over ``workers`` processes.

    Results come back in the order of the set, so the output does not depend
    on the number of workers.
    """
    if name not in SETS:
        raise ValueError(f"unknown survey set {name!r}")
    pairs, targets = SETS[name], SET_TARGETS[name]
    workers = min(len(pairs), workers or os.cpu_count() or 1)
    if workers <= 1:
        chunks = [_pair_results(p, targets, kw) for p in pairs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_pair_results, pairs, [targets] * len(pairs),
                                   [kw] * len(pairs)))
    return [res for chunk in chunks for res in chunk]


# d1 = 1: the flow lives on face B -----------------------------------------------------

def _face_b_z(delta: float, dims: Dims) -> float:
    return (dims.k * delta * delta - dims.m) / dims.d2


def _face_tangent(st: StateZDH, dims: Dims) -> np.ndarray:
    """Orthonormal basis of the face-B tangent plane at ``st`` (columns)."""
    e1 = np.array([2.0 * dims.k * st.delta, dims.d2, 0.0])
    return np.column_stack([e1 / np.linalg.norm(e1), [0.0, 0.0, 1.0]])


def _face_shot(delta0: float, w0: float, dims: Dims, cfg: IntegratorConfig) -> tuple[float, float]:
    st = StateZDH(_face_b_z(delta0, dims), delta0, 1.0 - w0)
    tr = integrate(st, dims, cfg, [HCrossing(0.0)], w0=w0, record=False)
    e = tr.end_state
    return e.z, e.delta


def degenerate_pair(dims: Dims, samples: int = 2000, eps: float = DEFAULT_EPS,
                    cfg: IntegratorConfig = REFINE_CFG, tol: float = 1e-12) -> PairResult:
    """Intersections at H = 0 for d1 = 1, where every physical state lies on face B.

    The unstable set of p1+ inside the face is a fan of trajectories (the
    point is a star source there) and meets H = 0 in an arc of delta values.
    The stable set of p2- inside the face is a single trajectory, the bar
    image of the unstable branch of the face saddle p2+.
    """
    if dims.d1 != 1:
        raise ValueError("degenerate scan handles d1 = 1")
    fps = fixed_point_coords(dims)

    # partner: the unstable branch of p2+ within the face, mirrored
    p2 = fps["p2+"]
    q = _face_tangent(p2, dims)
    a = q.T @ jacobian_zdh(p2, dims) @ q
    vals, vecs = np.linalg.eig(a)
    v = q @ vecs[:, int(np.argmax(vals.real))].real
    if v[2] > 0:
        v = -v
    z_b, d_b = _face_shot(p2.delta + eps * v[1], -eps * v[2], dims, cfg)
    z_b, d_b = z_b, -d_b

    p1 = fps["p1+"]
    q1 = _face_tangent(p1, dims)

    def shot(psi):
        d = -math.cos(psi) * q1[:, 0] - math.sin(psi) * q1[:, 1]
        return _face_shot(p1.delta + eps * d[1], -eps * d[2], dims, cfg)

    psis = np.linspace(0.0, 0.5 * math.pi, samples + 2)[1:-1]
    gap = np.array([shot(p)[1] - d_b for p in psis])
    records = []
    for j in np.nonzero(np.sign(gap[:-1]) * np.sign(gap[1:]) <= 0)[0]:
        if gap[j] == 0.0:
            psi = psis[j]
        else:
            psi = brentq(lambda p: shot(p)[1] - d_b, psis[j], psis[j + 1], xtol=tol)
        z, d = shot(psi)
        rec = IntersectionRecord(dims.d1, dims.d2, "sphere", float(psi), float("nan"),
                                 float("nan"), float("nan"), float(z), float(d),
                                 float(math.hypot(z - z_b, d - d_b)), epsilon=eps)
        rec.classification = classify(rec, dims)
        if not any(abs(r.delta - rec.delta) < 1e-7 for r in records):
            records.append(rec)
    return PairResult(dims, "sphere", records,
                      notes={"partner": (z_b, d_b), "arc": (float(gap.min() + d_b),
                                                            float(gap.max() + d_b))})
