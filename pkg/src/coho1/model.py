"""Parameters, coordinate systems and scalar functionals of the reduced Einstein ODE.

Three coordinate systems are used for the cohomogeneity-one Einstein equations
on S^{d1+d2+1}:

* ``StateXYH``: rescaled principal curvatures ``x1, x2``, inverse radii
  ``y1, y2`` and the rescaled mean curvature ``h``;
* ``StateYDH``: ``x1, x2`` replaced by their difference ``delta``;
* ``StateZDH``: ``y1, y2`` replaced by ``z = (d1-1) y1^2 - (d2-1) y2^2``.

The invariant locus (the compact region that contains every Einstein
trajectory) is cut out in ``(z, delta, h)`` by two quadratic faces and the
caps ``h = +-1``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

from .errors import Degenerate, OutsideLocus

LOCUS_TOL = 1e-9


@dataclass(frozen=True)
class Dims:
    """Dimensions of the two sphere factors of the principal orbit."""

    d1: int
    d2: int

    def __post_init__(self):
        for name in ("d1", "d2"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    @property
    def n(self) -> int:
        return self.d1 + self.d2

    @property
    def degenerate(self) -> bool:
        return self.d1 == 1 or self.d2 == 1

    def require_regular(self):
        if self.degenerate:
            raise Degenerate(f"operation needs d1, d2 >= 2, got ({self.d1}, {self.d2})")

    def swapped(self) -> "Dims":
        return Dims(self.d2, self.d1)

    # frequently used coefficients
    @property
    def k(self) -> float:
        """d1*d2/n."""
        return self.d1 * self.d2 / self.n

    @property
    def m(self) -> float:
        """(n-1)/n."""
        return (self.n - 1) / self.n

    @property
    def q_delta(self) -> float:
        """|delta| of the singular solutions q_i, sqrt((n-1)/(d1 d2))."""
        return math.sqrt((self.n - 1) / (self.d1 * self.d2))


class StateZDH(NamedTuple):
    z: float
    delta: float
    h: float


class StateYDH(NamedTuple):
    y1: float
    y2: float
    delta: float
    h: float


class StateXYH(NamedTuple):
    x1: float
    x2: float
    y1: float
    y2: float
    h: float


def face_a(state: StateZDH, dims: Dims) -> float:
    """Face function of the face where y2 vanishes; <= 0 inside the locus."""
    return dims.d1 * state.z + dims.k * state.delta ** 2 - dims.m


def face_b(state: StateZDH, dims: Dims) -> float:
    """Face function of the face where y1 vanishes; <= 0 inside the locus."""
    return -dims.d2 * state.z + dims.k * state.delta ** 2 - dims.m


def _clamp_radicand(value: float, tol: float, what: str) -> float:
    if value < -tol:
        raise OutsideLocus(f"{what} radicand {value:.3e} below -{tol:g}")
    return max(value, 0.0)


def recover_y(state: StateZDH, dims: Dims, tol: float = LOCUS_TOL) -> StateYDH:
    """Recover ``(y1, y2)`` from ``(z, delta)`` through the constraint S1 = 0."""
    dims.require_regular()
    d1, d2, n = dims.d1, dims.d2, dims.n
    kd2 = dims.k * state.delta ** 2
    r1 = _clamp_radicand(dims.m + d2 * state.z - kd2, tol, "y1")
    r2 = _clamp_radicand(dims.m - d1 * state.z - kd2, tol, "y2")
    return StateYDH(math.sqrt(r1 / (n * (d1 - 1))), math.sqrt(r2 / (n * (d2 - 1))),
                    state.delta, state.h)


def to_zdh(state: StateYDH, dims: Dims) -> StateZDH:
    z = (dims.d1 - 1) * state.y1 ** 2 - (dims.d2 - 1) * state.y2 ** 2
    return StateZDH(z, state.delta, state.h)


def split_delta(state: StateYDH, dims: Dims) -> StateXYH:
    """Split delta into the two curvatures so that S2 = d1 x1 + d2 x2 - h = 0."""
    n = dims.n
    x1 = (dims.d2 * state.delta + state.h) / n
    x2 = (-dims.d1 * state.delta + state.h) / n
    return StateXYH(x1, x2, state.y1, state.y2, state.h)


def merge_delta(state: StateXYH) -> StateYDH:
    return StateYDH(state.y1, state.y2, state.x1 - state.x2, state.h)


def s1_residual(state: StateYDH, dims: Dims) -> float:
    d1, d2 = dims.d1, dims.d2
    return (d1 * (d1 - 1) * state.y1 ** 2 + d2 * (d2 - 1) * state.y2 ** 2
            + dims.k * state.delta ** 2 - dims.m)


def s1_residual_xyh(state: StateXYH, dims: Dims) -> float:
    d1, d2, n = dims.d1, dims.d2, dims.n
    return (d1 * state.x1 ** 2 + d2 * state.x2 ** 2
            + d1 * (d1 - 1) * state.y1 ** 2 + d2 * (d2 - 1) * state.y2 ** 2
            - state.h ** 2 / n - (n - 1) / n)


def s2_residual(state: StateXYH, dims: Dims) -> float:
    return dims.d1 * state.x1 + dims.d2 * state.x2 - state.h


class LocusClass(enum.Enum):
    INTERIOR = "Interior"
    BOUNDARY_FACE1 = "BoundaryFace1"
    BOUNDARY_FACE2 = "BoundaryFace2"
    TOP_CAP = "TopCap"
    BOTTOM_CAP = "BottomCap"
    OUTSIDE = "Outside"


class Membership(NamedTuple):
    kind: LocusClass
    face1: bool
    face2: bool
    top: bool
    bottom: bool

    @property
    def on_boundary(self) -> bool:
        return self.kind not in (LocusClass.INTERIOR, LocusClass.OUTSIDE)


def membership(state: StateZDH, dims: Dims, tol: float = LOCUS_TOL) -> Membership:
    """Classify a point against the three inequalities defining the locus.

    Caps take precedence over faces in ``kind``; the flags report every
    active constraint (a q-point is on both faces and a cap).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    fa = face_a(state, dims)
    fb = face_b(state, dims)
    cap = state.h ** 2 - 1.0
    if fa > tol or fb > tol or cap > tol:
        return Membership(LocusClass.OUTSIDE, False, False, False, False)
    f1 = abs(fa) <= tol
    f2 = abs(fb) <= tol
    top = abs(state.h - 1.0) <= tol
    bottom = abs(state.h + 1.0) <= tol
    if top:
        kind = LocusClass.TOP_CAP
    elif bottom:
        kind = LocusClass.BOTTOM_CAP
    elif f1:
        kind = LocusClass.BOUNDARY_FACE1
    elif f2:
        kind = LocusClass.BOUNDARY_FACE2
    else:
        kind = LocusClass.INTERIOR
    return Membership(kind, f1, f2, top, bottom)


def volume_F(state: StateZDH, dims: Dims, tol: float = LOCUS_TOL) -> float:
    """Monotone volume functional, non-decreasing along the flow while h >= 0."""
    base1 = dims.m - dims.k * state.delta ** 2 + dims.d2 * state.z
    base2 = dims.m - dims.k * state.delta ** 2 - dims.d1 * state.z
    base1 = _clamp_radicand(base1, tol, "F first")
    base2 = _clamp_radicand(base2, tol, "F second")
    return base1 ** dims.d1 * base2 ** dims.d2


def volume_F_cone(dims: Dims) -> float:
    return dims.m ** dims.n


def bar_involution(state: StateZDH) -> StateZDH:
    return StateZDH(state.z, -state.delta, state.h)


def sigma_symmetry(state: StateZDH) -> StateZDH:
    """Time-reversal symmetry of the flow."""
    return StateZDH(state.z, -state.delta, -state.h)


def swap_symmetry(state: StateZDH) -> StateZDH:
    """Maps the (d1, d2) system onto the (d2, d1) system."""
    return StateZDH(-state.z, -state.delta, state.h)
