"""Deterministic SVG figures of H-slices, intersections and metric profiles.

Every function takes plain arrays (as read back from the emitted CSV files)
so that figures can be regenerated offline from the data alone.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .equilibria import fixed_point_coords  # noqa: E402
from .model import Dims  # noqa: E402

CANVAS_PX = 800
DPI = 72            # SVG user units are points; 72 per inch gives an 800 x 800 viewBox
CANVAS_IN = CANVAS_PX / DPI
_RC = {"svg.hashsalt": "coho1", "svg.fonttype": "none", "font.size": 11,
       "axes.grid": True, "grid.alpha": 0.3}


def _figure():
    fig, ax = plt.subplots(figsize=(CANVAS_IN, CANVAS_IN), dpi=DPI)
    return fig, ax


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def locus_boundary(dims: Dims, h: float = 0.0, n: int = 401) -> np.ndarray:
    """Closed polyline bounding the slice {H = h} of the invariant locus in (Z, Delta)."""
    b = dims.q_delta
    dl = np.linspace(-b, b, n)
    rad = dims.m - dims.k * dl * dl
    right = np.column_stack([rad / dims.d1, dl])
    left = np.column_stack([-rad / dims.d2, dl])[::-1]
    return np.vstack([right, left, right[:1]])


def _markers(ax, dims: Dims):
    fps = fixed_point_coords(dims)
    for lab in ("p1+", "p2+", "q1+", "q2+", "cone+"):
        st = fps[lab]
        ax.plot(st.z, st.delta, "s", color="0.3", ms=5)
        ax.annotate(lab.rstrip("+"), (st.z, st.delta), textcoords="offset points",
                    xytext=(6, 4), fontsize=9, color="0.3")


def plot_slice(z, delta, dims: Dims, path, h: float = 0.0, label: str = "slice curve"):
    with plt.rc_context(_RC):
        fig, ax = _figure()
        bd = locus_boundary(dims, h)
        ax.plot(bd[:, 0], bd[:, 1], color="k", lw=0.8, label="locus boundary")
        ax.plot(z, delta, color="tab:blue", lw=0.9, label=label)
        _markers(ax, dims)
        ax.set_xlabel("Z")
        ax.set_ylabel("Delta")
        ax.set_title(f"(d1, d2) = ({dims.d1}, {dims.d2}),  H = {h:g}")
        ax.legend(loc="upper left")
        _save(fig, path)


def plot_intersections(curve_a, curve_b, points, dims: Dims, path, target: str = "sphere",
                       classes=None, inset: float | None = 0.02):
    """Both slice curves at H = 0, fixed-point markers and intersection markers.

    ``curve_a``/``curve_b`` are (N, 2) arrays, ``points`` an (M, 2) array.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    classes = list(classes) if classes is not None else [""] * len(points)
    with plt.rc_context(_RC):
        fig, ax = _figure()
        bd = locus_boundary(dims)
        ax.plot(bd[:, 0], bd[:, 1], color="k", lw=0.8, label="locus boundary")
        la, lb = ("M1+", "bar M2+") if target == "sphere" else (f"M{target[-1]}+",
                                                                 f"bar M{target[-1]}+")
        ax.plot(curve_a[:, 0], curve_a[:, 1], color="tab:blue", lw=0.9, label=la)
        ax.plot(curve_b[:, 0], curve_b[:, 1], color="tab:orange", lw=0.9, label=lb)
        _markers(ax, dims)
        for (x, y), c in zip(points, classes):
            round_ = c.startswith("Round")
            ax.plot(x, y, "o", mfc="none", mec="tab:green" if round_ else "tab:red", ms=9, mew=1.5)
        ax.set_xlabel("Z")
        ax.set_ylabel("Delta")
        ax.set_title(f"{target}: (d1, d2) = ({dims.d1}, {dims.d2}),  H = 0")
        ax.legend(loc="upper left")
        if inset and len(points):
            sub = ax.inset_axes([0.58, 0.06, 0.38, 0.38])
            for arr, col in ((curve_a, "tab:blue"), (curve_b, "tab:orange")):
                sub.plot(arr[:, 0], arr[:, 1], color=col, lw=0.7)
            for (x, y), c in zip(points, classes):
                sub.plot(x, y, "o", mfc="none", mec="tab:green" if c.startswith("Round")
                         else "tab:red", ms=7)
            sub.set_xlim(-inset, inset)
            sub.set_ylim(-inset, inset)
            sub.tick_params(labelsize=7)
            sub.set_title("near the cone axis", fontsize=8)
        _save(fig, path)


def plot_profile(t, f1, f2, path, title: str = ""):
    with plt.rc_context(_RC):
        fig, ax = _figure()
        ax.plot(t, f1, label="f1")
        ax.plot(t, f2, label="f2")
        ax.set_xlabel("t")
        ax.set_ylabel("f")
        ax.set_title(title)
        ax.legend()
        _save(fig, path)


def plot_barrier(h, phi, path, title: str = ""):
    with plt.rc_context(_RC):
        fig, ax = _figure()
        ax.plot(h, phi, color="tab:purple")
        ax.axhline(np.arctan(9 / 4), color="0.5", lw=0.8, ls="--", label="arctan(9/4)")
        ax.set_xlabel("h")
        ax.set_ylabel("phi")
        ax.set_title(title)
        ax.legend()
        _save(fig, path)
