"""Vector fields of the three ODE systems, the (z, delta, h) Jacobian and the
linearization along the cone axis."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import Dims, StateXYH, StateYDH, StateZDH


class Deriv3(NamedTuple):
    z: float
    delta: float
    h: float


class Deriv4(NamedTuple):
    y1: float
    y2: float
    delta: float
    h: float


class Deriv5(NamedTuple):
    x1: float
    x2: float
    y1: float
    y2: float
    h: float


def rhs_zdh(state: StateZDH, dims: Dims) -> Deriv3:
    z, dl, h = state
    d1, d2, n = dims.d1, dims.d2, dims.n
    k, m = dims.k, dims.m
    dz = (2.0 / n) * dl * (d1 * d2 * z * dl * h + k * dl * dl - m + (d1 - d2) * z)
    ddl = dl * h * (k * dl * dl - m) + z
    dh = -((1.0 - h * h) / n) * (d1 * d2 * dl * dl + 1.0)
    return Deriv3(dz, ddl, dh)


def rhs_zdh_array(y: np.ndarray, d1: int, d2: int) -> np.ndarray:
    """Vectorized field; ``y`` has shape (3, ...)."""
    z, dl, h = y
    n = d1 + d2
    k, m = d1 * d2 / n, (n - 1) / n
    return np.array([
        (2.0 / n) * dl * (d1 * d2 * z * dl * h + k * dl * dl - m + (d1 - d2) * z),
        dl * h * (k * dl * dl - m) + z,
        -((1.0 - h * h) / n) * (d1 * d2 * dl * dl + 1.0),
    ])


def rhs_ydh(state: StateYDH, dims: Dims) -> Deriv4:
    y1, y2, dl, h = state
    d1, d2, n = dims.d1, dims.d2, dims.n
    k = dims.k
    return Deriv4(
        k * y1 * dl * (dl * h - 1.0 / d1),
        k * y2 * dl * (dl * h + 1.0 / d2),
        (dl * h / n) * (d1 * d2 * dl * dl - (n - 1)) + (d1 - 1) * y1 * y1 - (d2 - 1) * y2 * y2,
        -((1.0 - h * h) / n) * (d1 * d2 * dl * dl + 1.0),
    )


def rhs_xyh(state: StateXYH, dims: Dims) -> Deriv5:
    x1, x2, y1, y2, h = state
    d1, d2, n = dims.d1, dims.d2, dims.n
    g = d1 * x1 * x1 + d2 * x2 * x2 + (1.0 - h * h) / n
    return Deriv5(
        x1 * h * (g - 1.0) + (d1 - 1) * y1 * y1 - (1.0 - h * h) / n,
        x2 * h * (g - 1.0) + (d2 - 1) * y2 * y2 - (1.0 - h * h) / n,
        y1 * (h * g - x1),
        y2 * (h * g - x2),
        (h * h - 1.0) * g,
    )


def jacobian_zdh(state: StateZDH, dims: Dims) -> np.ndarray:
    """Analytic Jacobian of :func:`rhs_zdh`, rows and columns ordered (z, delta, h)."""
    z, dl, h = state
    d1, d2, n = dims.d1, dims.d2, dims.n
    p = d1 * d2
    k, m = dims.k, dims.m
    c = 2.0 / n
    return np.array([
        [c * dl * (p * dl * h + d1 - d2),
         c * (2 * p * z * dl * h + 3 * k * dl * dl - m + (d1 - d2) * z),
         c * p * z * dl * dl],
        [1.0, h * (3 * k * dl * dl - m), dl * (k * dl * dl - m)],
        [0.0, -((1.0 - h * h) / n) * 2 * p * dl, (2.0 * h / n) * (p * dl * dl + 1.0)],
    ])


def face_gradients(state: StateZDH, dims: Dims) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of the two face functions in (z, delta, h)."""
    dl = state.delta
    ga = np.array([dims.d1, 2 * dims.k * dl, 0.0])
    gb = np.array([-dims.d2, 2 * dims.k * dl, 0.0])
    return ga, gb


@dataclass(frozen=True)
class ConeEigen:
    """Eigen-data of the linearization at the cone axis point (0, 0, h).

    ``values[0]`` is the h-direction eigenvalue; ``values[1:]`` are the
    in-plane pair, possibly complex.  ``degenerate`` marks the double root
    where only one in-plane eigenvector exists.
    """

    h: float
    n: int
    values: tuple[complex, complex, complex]
    vectors: tuple[np.ndarray, np.ndarray, np.ndarray]
    degenerate: bool

    @property
    def spiral(self) -> bool:
        return abs(self.values[1].imag) > 0.0


def cone_eigen(h: float, n: int, tol: float = 1e-12) -> ConeEigen:
    if n < 2:
        raise ValueError("n must be at least 2")
    disc = (n - 1) * h * h - 8.0
    pref = math.sqrt(n - 1) / (2.0 * n)
    base = -math.sqrt(n - 1) * h
    degenerate = abs(disc) <= tol
    root = 0.0 if degenerate else cmath.sqrt(disc)
    lam1 = complex(pref * (base + root))
    lam2 = complex(pref * (base - root))
    if degenerate:
        lam1 = lam2 = complex(pref * base)
        # Collapsed in-plane eigenvector; the sign of the second entry follows h.
        v = np.array([math.sqrt(2.0 * (n - 1)), math.copysign(n, h), 0.0])
        vectors = (np.array([0.0, 0.0, 1.0]), v, v.copy())
    else:
        a = -2.0 * (n - 1) / n ** 2
        vectors = (np.array([0.0, 0.0, 1.0]),
                   np.array([a, lam1, 0.0], dtype=complex),
                   np.array([a, lam2, 0.0], dtype=complex))
    return ConeEigen(h, n, (complex(2.0 * h / n), lam1, lam2), vectors, degenerate)
