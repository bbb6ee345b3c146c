"""Metric profile (t, f1, f2) along a connecting trajectory and Einstein-equation checks."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson

from .errors import NotHeteroclinic
from .integrator import IntegratorConfig
from .intersect import Connection, IntersectionRecord, connection
from .io import write_csv
from .manifold import REFINE_CFG
from .model import Dims

PROFILE_HEADER = "t,f1,f1dot,f2,f2dot"
SUMMARY_HEADER = ("d1,d2,target,Z,Delta,lambda,T_sqrt_lambda,fbar1_sqrt_lambda,"
                  "fbar2_sqrt_lambda,t_maxvol_sqrt_lambda,f1_maxvol_sqrt_lambda,"
                  "f2_maxvol_sqrt_lambda")
DEFAULT_DS = 0.002


def xy_from_zdh(states: np.ndarray, dims: Dims) -> np.ndarray:
    """Columns (x1, x2, y1, y2) for rows (z, delta, h) on the constraint surface."""
    d1, d2, n = dims.d1, dims.d2, dims.n
    z, dl, h = states[:, 0], states[:, 1], states[:, 2]
    kd2 = dims.k * dl * dl
    r1 = np.maximum(dims.m + d2 * z - kd2, 0.0)
    r2 = np.maximum(dims.m - d1 * z - kd2, 0.0)
    y1 = np.sqrt(r1 / (n * (d1 - 1)))
    y2 = np.sqrt(r2 / (n * (d2 - 1)))
    x1 = (d2 * dl + h) / n
    x2 = (-d1 * dl + h) / n
    return np.column_stack([x1, x2, y1, y2])


def zdh_from_profile(f1, f1dot, f2, f2dot, lam: float, dims: Dims) -> np.ndarray:
    """Inverse of the recovery map: rows (z, delta, h) from metric data."""
    d1, d2, n = dims.d1, dims.d2, dims.n
    l1, l2 = f1dot / f1, f2dot / f2
    trl = d1 * l1 + d2 * l2
    ell = 1.0 / np.sqrt(trl * trl + n * lam)
    y1, y2 = ell / f1, ell / f2
    z = (d1 - 1) * y1 ** 2 - (d2 - 1) * y2 ** 2
    return np.column_stack([z, ell * (l1 - l2), ell * trl])


@dataclass(frozen=True)
class MetricProfile:
    dims: Dims
    lam: float
    s: np.ndarray
    states: np.ndarray
    t: np.ndarray
    f1: np.ndarray
    f1dot: np.ndarray
    f2: np.ndarray
    f2dot: np.ndarray
    T: float
    fbar1: float     # f1 at t = T
    fbar2: float     # f2 at t = 0
    record: IntersectionRecord | None = None

    def rows(self):
        return np.column_stack([self.t, self.f1, self.f1dot, self.f2, self.f2dot])

    def to_csv(self, path):
        write_csv(path, PROFILE_HEADER.split(","), self.rows())

    @property
    def log_volume(self) -> np.ndarray:
        return self.dims.d1 * np.log(self.f1) + self.dims.d2 * np.log(self.f2)


def profile_from_states(s: np.ndarray, states: np.ndarray, dims: Dims, lam: float,
                        record: IntersectionRecord | None = None) -> MetricProfile:
    """Apply the recovery formulas to samples of a trajectory from p1+ to p2-.

    The first sample must lie near ``p1+`` and the last near ``p2-``; the
    time origin and total length are fixed by the linear collapse of f1 at
    the start and of f2 at the end.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    dims.require_regular()
    n = dims.n
    h = states[:, 2]
    ell = np.sqrt((1.0 - h) * (1.0 + h) / (n * lam))
    x1, x2, y1, y2 = xy_from_zdh(states, dims).T
    f1, f2 = ell / y1, ell / y2
    f1dot, f2dot = x1 / y1, x2 / y2
    t = cumulative_simpson(ell, x=s, initial=0.0)
    t = t + f1[0]                     # f1 ~ t near the collapsing end
    T = float(t[-1] + f2[-1])
    # the non-collapsing function is even about the singular orbit
    fbar1 = f1[-1] + 0.5 * f1dot[-1] * (T - t[-1])
    fbar2 = f2[0] - 0.5 * f2dot[0] * t[0]
    return MetricProfile(dims, lam, s, states, t, f1, f1dot, f2, f2dot, T,
                         float(fbar1), float(fbar2), record)


def reconstruct(record: IntersectionRecord, lam: float | None = None,
                cfg: IntegratorConfig = REFINE_CFG, ds: float = DEFAULT_DS,
                conn: Connection | None = None) -> MetricProfile:
    """Profile of the Einstein metric carried by a refined intersection point."""
    dims = record.dims
    lam = float(dims.n if lam is None else lam)
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if conn is None:
        conn = connection(record, cfg)
    if conn.start_label != "p1+" or conn.end_label != "p2-":
        raise NotHeteroclinic(f"connection runs {conn.start_label} -> {conn.end_label}")
    s, states = conn.sample(ds)
    return profile_from_states(s, states, dims, lam, record)


def einstein_residual(p: MetricProfile, parts: bool = False):
    """Sup over interior samples of the relative Einstein residuals.

    Each residual is scaled by the largest magnitude among its terms.
    With ``parts`` the three sup values (two components, constraint) are
    returned separately.
    """
    d1, d2, n, lam = p.dims.d1, p.dims.d2, p.dims.n, p.lam
    l1, l2 = p.f1dot / p.f1, p.f2dot / p.f2
    dl1 = np.gradient(l1, p.t, edge_order=2)
    dl2 = np.gradient(l2, p.t, edge_order=2)
    trl = d1 * l1 + d2 * l2
    out = []
    for d, li, dli, fi in ((d1, l1, dl1, p.f1), (d2, l2, dl2, p.f2)):
        ric = (d - 1) / fi ** 2
        terms = (-dli, -trl * li, ric, -lam * np.ones_like(li))
        out.append(sum(terms) / np.max(np.abs(terms), axis=0))
    terms = (d1 * l1 ** 2, d2 * l2 ** 2, d1 * (d1 - 1) / p.f1 ** 2, d2 * (d2 - 1) / p.f2 ** 2,
             -trl ** 2, -(n - 1) * lam * np.ones_like(l1))
    out.append(sum(terms) / np.max(np.abs(terms), axis=0))
    sups = [float(np.max(np.abs(r[1:-1]))) for r in out]
    return tuple(sups) if parts else max(sups)


def recovery_consistency(p: MetricProfile) -> float:
    back = zdh_from_profile(p.f1, p.f1dot, p.f2, p.f2dot, p.lam, p.dims)
    return float(np.max(np.abs(back - p.states)))


def boundary_slopes(p: MetricProfile, decade: float = 10.0) -> tuple[float, float]:
    """Least-squares slopes of f1 against t near 0 and of f2 against t near T."""
    m0 = p.t <= decade * p.t[0]
    tail = p.T - p.t
    m1 = tail <= decade * tail[-1]
    k0 = np.polyfit(p.t[m0], p.f1[m0], 1)[0]
    k1 = np.polyfit(p.t[m1], p.f2[m1], 1)[0]
    return float(k0), float(k1)


def max_volume_index(p: MetricProfile) -> int:
    return int(np.argmax(p.log_volume))


def summary(p: MetricProfile) -> dict:
    r = math.sqrt(p.lam)
    j = max_volume_index(p)
    rec = p.record
    return {
        "d1": p.dims.d1, "d2": p.dims.d2,
        "target": rec.target if rec else "",
        "Z": rec.z if rec else float("nan"), "Delta": rec.delta if rec else float("nan"),
        "lambda": p.lam,
        "T_sqrt_lambda": p.T * r,
        "fbar1_sqrt_lambda": p.fbar1 * r,
        "fbar2_sqrt_lambda": p.fbar2 * r,
        "t_maxvol_sqrt_lambda": float(p.t[j]) * r,
        "f1_maxvol_sqrt_lambda": float(p.f1[j]) * r,
        "f2_maxvol_sqrt_lambda": float(p.f2[j]) * r,
    }


def summary_text(rows: list[dict]) -> str:
    cols = SUMMARY_HEADER.split(",")
    cells = [[c] + [f"{row[c]:.6g}" if isinstance(row[c], float) else str(row[c]) for row in rows]
             for c in cols]
    widths = [max(len(x) for x in col) for col in cells]
    lines = []
    for k in range(len(rows) + 1):
        lines.append("  ".join(cells[c][k].rjust(widths[c]) for c in range(len(cols))))
    return "\n".join(lines)
