"""Winding angles of planar polylines about the origin and segment intersections."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .errors import AmbiguousUnwrap, OriginVertex


@dataclass(frozen=True)
class PlanarCurve:
    vertices: np.ndarray
    ends_at_origin: bool = False

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 2:
            raise ValueError("vertices must be an (N, 2) array with N >= 2")
        object.__setattr__(self, "vertices", v)

    @classmethod
    def from_xy(cls, x, y, ends_at_origin=False) -> "PlanarCurve":
        return cls(np.column_stack([x, y]), ends_at_origin)

    def __len__(self):
        return len(self.vertices)


def _body(c: PlanarCurve) -> np.ndarray:
    v = c.vertices
    if c.ends_at_origin:
        if np.any(v[-1] != 0.0):
            raise ValueError("curve flagged ends_at_origin must end at (0, 0)")
        v = v[:-1]
    if np.any(np.all(v == 0.0, axis=1)):
        raise OriginVertex("vertex at the origin")
    return v


def turn_angles(v: np.ndarray) -> np.ndarray:
    """Signed angle swept by each segment as seen from the origin."""
    a = np.arctan2(v[:, 1], v[:, 0])
    d = np.diff(a)
    d = (d + np.pi) % (2 * np.pi) - np.pi
    return d


def winding_angle(c: PlanarCurve) -> float:
    """Total signed polar-angle change along the polyline.

    For a curve ending at the origin the final segment is excluded (its
    angle is undefined); use :func:`winding_limit` for those.
    """
    v = _body(c)
    if len(v) < 2:
        return 0.0
    d = turn_angles(v)
    # a segment through the origin sweeps exactly pi and has no defined sign
    cross = v[:-1, 0] * v[1:, 1] - v[:-1, 1] * v[1:, 0]
    dot = np.einsum("ij,ij->i", v[:-1], v[1:])
    if np.any((cross == 0.0) & (dot < 0.0)):
        raise AmbiguousUnwrap("a segment passes through the origin")
    return float(np.sum(d))


# truncations at or below this radius count as "small" for eventual lower bounds
SMALL_RADIUS = 1e-4


@dataclass(frozen=True)
class WindingReport:
    radii: np.ndarray
    thetas: np.ndarray

    def certifies(self, c: float, r_max: float | None = None) -> bool:
        """True when every computed truncation (optionally only those with
        radius <= ``r_max``) has winding at least ``c``."""
        return bool(np.all(self._tail(r_max) >= c))

    def _tail(self, r_max):
        if r_max is None:
            return self.thetas
        return self.thetas[self.radii <= r_max]

    @property
    def lower_bound(self) -> float:
        return float(np.min(self.thetas))

    def tail_bound(self, r_max: float = SMALL_RADIUS) -> float:
        """Smallest winding among truncations at radius <= ``r_max``."""
        return float(np.min(self._tail(r_max)))

    @property
    def monotone(self) -> bool:
        """Truncation windings never decrease as the radius shrinks."""
        return bool(np.all(np.diff(self.thetas) >= -1e-12))


DEFAULT_RADII = tuple(10.0 ** (-2 - k) for k in range(7))


def truncate_at_radius(v: np.ndarray, r: float) -> np.ndarray:
    """Polyline up to its first entry into the disk of radius ``r``."""
    rad = np.hypot(v[:, 0], v[:, 1])
    inside = np.nonzero(rad <= r)[0]
    if len(inside) == 0:
        return v
    j = inside[0]
    if j == 0:
        return v[:1]
    p, q = v[j - 1], v[j]
    # solve |p + u (q - p)| = r for u in [0, 1]
    d = q - p
    a = d @ d
    b = 2 * (p @ d)
    cc = p @ p - r * r
    disc = max(b * b - 4 * a * cc, 0.0)
    u = (-b - math.sqrt(disc)) / (2 * a)
    u = min(max(u, 0.0), 1.0)
    return np.vstack([v[:j], p + u * d])


def winding_limit(c: PlanarCurve, radii=DEFAULT_RADII) -> WindingReport:
    """Winding of the truncations of a curve that limits into the origin."""
    if not c.ends_at_origin:
        raise ValueError("winding_limit needs a curve ending at the origin")
    v = c.vertices
    if np.any(np.all(v[:-1] == 0.0, axis=1)):
        raise OriginVertex("vertex at the origin before the end")
    radii = np.asarray(sorted(radii, reverse=True), dtype=float)
    thetas = []
    for r in radii:
        tv = truncate_at_radius(v, r)
        thetas.append(0.0 if len(tv) < 2 else float(np.sum(turn_angles(tv))))
    return WindingReport(radii, np.array(thetas))


def min_intersections(theta0: float) -> int:
    return max(0, math.ceil(theta0 / (2 * math.pi)) - 1)


class Crossing(NamedTuple):
    x: float
    y: float
    seg_a: int
    seg_b: int
    u_a: float    # position along segment a, in [0, 1]
    u_b: float


def _orient_exact(ax, ay, bx, by, cx, cy) -> int:
    ax, ay, bx, by, cx, cy = map(Fraction, (ax, ay, bx, by, cx, cy))
    v = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return (v > 0) - (v < 0)


def _orient(P, Q, R):
    return (Q[..., 0] - P[..., 0]) * (R[..., 1] - P[..., 1]) - \
        (Q[..., 1] - P[..., 1]) * (R[..., 0] - P[..., 0])


def brute_intersections(a: PlanarCurve, b: PlanarCurve, tol: float = 1e-10,
                        include_touching: bool = False, chunk: int = 512) -> list[Crossing]:
    """All transversal crossings between the segments of ``a`` and ``b``.

    Orientation tests that are too close to zero for floating point are
    redone in exact rational arithmetic on the vertex coordinates.  Touching
    configurations (a vertex exactly on the other segment) are excluded
    unless ``include_touching`` is set.
    """
    A, B = a.vertices, b.vertices
    A0, A1 = A[:-1], A[1:]
    B0, B1 = B[:-1], B[1:]
    bmin = np.minimum(B0, B1)
    bmax = np.maximum(B0, B1)
    out: list[Crossing] = []
    for s in range(0, len(A0), chunk):
        a0, a1 = A0[s:s + chunk, None, :], A1[s:s + chunk, None, :]
        amin = np.minimum(a0, a1)
        amax = np.maximum(a0, a1)
        box = np.all((amin <= bmax[None]) & (bmin[None] <= amax), axis=2)
        ii, jj = np.nonzero(box)
        if len(ii) == 0:
            continue
        p0, p1 = A0[s + ii], A1[s + ii]
        q0, q1 = B0[jj], B1[jj]
        o1 = _orient(p0, p1, q0)
        o2 = _orient(p0, p1, q1)
        o3 = _orient(q0, q1, p0)
        o4 = _orient(q0, q1, p1)
        scale = np.max(np.abs(np.concatenate([p0, p1, q0, q1], axis=1)), axis=1) + 1e-300
        eps = 1e-12 * scale * scale
        s1, s2, s3, s4 = (np.sign(o) for o in (o1, o2, o3, o4))
        unsure = (np.abs(o1) < eps) | (np.abs(o2) < eps) | (np.abs(o3) < eps) | (np.abs(o4) < eps)
        for k in np.nonzero(unsure)[0]:
            P0, P1, Q0, Q1 = p0[k], p1[k], q0[k], q1[k]
            s1[k] = _orient_exact(*P0, *P1, *Q0)
            s2[k] = _orient_exact(*P0, *P1, *Q1)
            s3[k] = _orient_exact(*Q0, *Q1, *P0)
            s4[k] = _orient_exact(*Q0, *Q1, *P1)
        proper = (s1 * s2 < 0) & (s3 * s4 < 0)
        if include_touching:
            touch = ((s1 * s2 <= 0) & (s3 * s4 <= 0)) & ~proper
            proper = proper | touch
        for k in np.nonzero(proper)[0]:
            P0, P1, Q0, Q1 = p0[k], p1[k], q0[k], q1[k]
            r = P1 - P0
            q = Q1 - Q0
            den = r[0] * q[1] - r[1] * q[0]
            if den == 0.0:
                continue   # collinear overlap, only reachable with include_touching
            w = Q0 - P0
            ua = (w[0] * q[1] - w[1] * q[0]) / den
            ub = (w[0] * r[1] - w[1] * r[0]) / den
            ua = min(max(ua, 0.0), 1.0)
            ub = min(max(ub, 0.0), 1.0)
            x, y = P0 + ua * r
            out.append(Crossing(float(x), float(y), int(s + ii[k]), int(jj[k]), float(ua),
                                float(ub)))
    out.sort(key=lambda c: (c.seg_a, c.u_a, c.seg_b))
    dedup: list[Crossing] = []
    for c in out:
        if any(math.hypot(c.x - d.x, c.y - d.y) <= tol for d in dedup):
            continue
        dedup.append(c)
    return dedup
