"""Fixed points of the (z, delta, h) system, their linearizations and shooting frames."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import WrongPoint
from .fields import jacobian_zdh
from .model import Dims, StateZDH

LABELS = ("p1+", "p1-", "p2+", "p2-", "cone+", "cone-", "q1+", "q1-", "q2+", "q2-")


def fixed_point_coords(dims: Dims) -> dict[str, StateZDH]:
    d1, d2 = dims.d1, dims.d2
    b = dims.q_delta
    return {
        "p1+": StateZDH((d1 - 1) / d1 ** 2, 1.0 / d1, 1.0),
        "p1-": StateZDH((d1 - 1) / d1 ** 2, -1.0 / d1, -1.0),
        "p2+": StateZDH(-(d2 - 1) / d2 ** 2, -1.0 / d2, 1.0),
        "p2-": StateZDH(-(d2 - 1) / d2 ** 2, 1.0 / d2, -1.0),
        "cone+": StateZDH(0.0, 0.0, 1.0),
        "cone-": StateZDH(0.0, 0.0, -1.0),
        "q1+": StateZDH(0.0, -b, 1.0),
        "q1-": StateZDH(0.0, b, -1.0),
        "q2+": StateZDH(0.0, b, 1.0),
        "q2-": StateZDH(0.0, -b, -1.0),
    }


@dataclass(frozen=True)
class FixedPoint:
    label: str
    coords: StateZDH
    eigenvalues: tuple[complex, complex, complex]
    eigenvectors: tuple[np.ndarray, np.ndarray, np.ndarray]
    classification: str
    # classification of the planar system restricted to the cap through the point
    cap_classification: str
    geometric_multiplicities: tuple[int, int, int]


def _classify(values) -> str:
    pos = sum(1 for v in values if v.real > 0)
    if pos == len(values):
        return "Source"
    if pos == 0:
        return "Sink"
    return "Saddle"


def fixed_point_eigen(coords: StateZDH, dims: Dims, tol: float = 1e-12):
    """Closed-form eigen-decomposition at a point on a cap.

    On ``h = +-1`` the Jacobian is block upper triangular: a 2x2 block in
    (z, delta) and the scalar h-entry.  Returns values, vectors and the
    geometric multiplicity of each value.
    """
    if abs(abs(coords.h) - 1.0) > 1e-14:
        raise WrongPoint("closed-form eigen-data needs a point on a cap")
    J = jacobian_zdh(coords, dims)
    a, b, c, d = J[0, 0], J[0, 1], J[1, 0], J[1, 1]
    tr = a + d
    det = a * d - b * c
    disc = tr * tr / 4.0 - det
    if abs(disc) <= tol * max(1.0, tr * tr):
        mu1 = mu2 = complex(tr / 2.0)
        double = True
    else:
        r = cmath.sqrt(disc)
        mu1, mu2 = complex(tr / 2.0 + r), complex(tr / 2.0 - r)
        double = False
    lam3 = J[2, 2]
    # c == 1 on every cap point, so (mu - d, c) spans the kernel of A - mu
    v1 = np.array([mu1 - d, c, 0.0], dtype=complex)
    v2 = np.array([mu2 - d, c, 0.0], dtype=complex)
    A = J[:2, :2]
    rhs = -J[:2, 2]
    M = A - lam3 * np.eye(2)
    u, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    consistent = np.linalg.norm(M @ u - rhs) <= 1e-12 * max(1.0, np.linalg.norm(rhs))
    v3 = np.array([u[0], u[1], 1.0], dtype=complex)
    geo = [1, 1, 1]
    if double:
        # one eigenvector unless the block is a multiple of the identity
        if np.linalg.matrix_rank(A - mu1.real * np.eye(2), tol=1e-12) == 0:
            geo[0] = geo[1] = 2
    if not consistent:
        # defective coupling to the h-direction; keep the in-plane vector
        v3 = v1.copy()
    for i, mu in enumerate((mu1, mu2)):
        if abs(mu - lam3) <= 1e-12 and consistent:
            geo[i] = geo[2] = 2
    vecs = []
    for v in (v1, v2, v3):
        v = v / np.linalg.norm(v)
        vecs.append(v.real.copy() if np.all(np.abs(v.imag) < 1e-15) else v)
    return (mu1, mu2, complex(lam3)), tuple(vecs), tuple(geo)


def catalogue(dims: Dims) -> list[FixedPoint]:
    dims.require_regular()
    out = []
    for label, st in fixed_point_coords(dims).items():
        vals, vecs, geo = fixed_point_eigen(st, dims)
        out.append(FixedPoint(label, st, vals, vecs, _classify(vals), _classify(vals[:2]), geo))
    return out


def lookup(dims: Dims, label: str) -> FixedPoint:
    for fp in catalogue(dims):
        if fp.label == label:
            return fp
    raise WrongPoint(f"unknown fixed point {label!r}")


_SWAP = np.diag([-1.0, -1.0, 1.0])
_SIGMA = np.diag([1.0, -1.0, -1.0])


def _p1_frame(d1: int, d2: int) -> tuple[np.ndarray, np.ndarray]:
    n = d1 + d2
    u_a = np.array([1.0 + (d1 - d2) / (d1 * n), 1.0, 0.0])
    u_b = np.array([(d1 - 1) / d1 ** 2, 0.0, 1.0])
    return u_a, u_b


def _p1_stable(d1: int, d2: int) -> np.ndarray:
    n = d1 + d2
    return np.array([-(2.0 / n) * (d2 / d1), 1.0, 0.0])


def _label(fp) -> str:
    return fp if isinstance(fp, str) else fp.label


def unstable_frame(fp, dims: Dims) -> tuple[np.ndarray, np.ndarray]:
    """Two vectors spanning the unstable plane at ``p1+`` or ``p2+``."""
    label = _label(fp)
    if label == "p1+":
        return _p1_frame(dims.d1, dims.d2)
    if label == "p2+":
        u_a, u_b = _p1_frame(dims.d2, dims.d1)
        return _SWAP @ u_a, _SWAP @ u_b
    raise WrongPoint(f"unstable frame is defined at p1+ and p2+, not {label!r}")


def stable_frame(fp, dims: Dims) -> tuple[np.ndarray, np.ndarray]:
    """Two vectors spanning the stable plane at ``p1-`` or ``p2-`` (sigma transport)."""
    label = _label(fp)
    if label in ("p1-", "p2-"):
        u_a, u_b = unstable_frame(label[:2] + "+", dims)
        return _SIGMA @ u_a, _SIGMA @ u_b
    raise WrongPoint(f"stable frame is defined at p1- and p2-, not {label!r}")


def stable_direction(fp, dims: Dims) -> np.ndarray:
    """The one-dimensional stable direction at ``p1+``/``p2+`` (unstable at ``p_i-``)."""
    label = _label(fp)
    if label == "p1+":
        return _p1_stable(dims.d1, dims.d2)
    if label == "p2+":
        return _SWAP @ _p1_stable(dims.d2, dims.d1)
    if label in ("p1-", "p2-"):
        return _SIGMA @ stable_direction(label[:2] + "+", dims)
    raise WrongPoint(f"no distinguished direction at {label!r}")


def frame_residual(fp, dims: Dims, frame) -> float:
    """Distance of ``J @ span`` from the span (0 when the plane is invariant)."""
    st = fixed_point_coords(dims)[_label(fp)]
    J = jacobian_zdh(st, dims)
    B = np.column_stack(frame)
    Q, _ = np.linalg.qr(B)
    img = J @ Q
    return float(np.linalg.norm(img - Q @ (Q.T @ img)))


def fixed_point_table(dims: Dims) -> list[dict]:
    rows = []
    for fp in catalogue(dims):
        row = {"label": fp.label, "Z": fp.coords.z, "Delta": fp.coords.delta, "H": fp.coords.h,
               "classification": fp.classification, "cap_classification": fp.cap_classification}
        for i, v in enumerate(fp.eigenvalues, 1):
            row[f"lambda{i}_re"] = v.real
            row[f"lambda{i}_im"] = v.imag
        rows.append(row)
    return rows
