"""Adaptive integration of the (z, delta, h) system with dense output and events."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import _dopri as K
from .errors import LeftLocus, MaxStepsExceeded, StepUnderflow, Unreachable
from .model import Dims, StateZDH, face_a, face_b, recover_y, volume_F

TRAJECTORY_SCHEMA = "coho1/trajectory/1"
CSV_HEADER = "s,Z,Delta,H,Y1,Y2,S1faceA,S1faceB,F"
EVENT_TOL = 1e-12


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = 0.1
    min_step: float = 1e-14
    max_steps: int = 10_000_000
    # allowed excursion outside the locus before LeftLocus is raised
    locus_tol: float = 1e-6
    first_step: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.rel_tol < 1.0 and 0.0 < self.abs_tol < 1.0):
            raise ValueError("tolerances must lie in (0, 1)")
        if not (0.0 < self.min_step <= self.max_step):
            raise ValueError("need 0 < min_step <= max_step")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


# Event kinds ---------------------------------------------------------------

@dataclass(frozen=True)
class HCrossing:
    h_target: float


@dataclass(frozen=True)
class NearPoint:
    center: StateZDH
    radius: float
    label: str = ""


@dataclass(frozen=True)
class ExitLocus:
    margin: float = 0.0


@dataclass(frozen=True)
class SLimit:
    """Stop after the integration has covered ``length`` in |s|."""
    length: float


@dataclass(frozen=True)
class ArcCap:
    """Stop once ``1 - |h|`` falls to ``eps`` (approach to a cap)."""
    eps: float


EventKind = Union[HCrossing, NearPoint, ExitLocus, SLimit, ArcCap]


@dataclass(frozen=True)
class Event:
    kind: EventKind
    s_hit: float
    state_hit: StateZDH
    w_hit: float = float("nan")


def _encode_events(events: Sequence[EventKind]):
    kinds = np.empty(len(events), dtype=np.int64)
    pars = np.zeros((len(events), 4))
    for i, ev in enumerate(events):
        if isinstance(ev, HCrossing):
            kinds[i] = K.EV_HCROSS
            pars[i, 0] = ev.h_target
            pars[i, 1] = 1.0 - ev.h_target
        elif isinstance(ev, NearPoint):
            if ev.radius <= 0:
                raise ValueError("NearPoint radius must be positive")
            kinds[i] = K.EV_NEAR
            pars[i, :3] = (ev.center.z, ev.center.delta, 1.0 - ev.center.h)
            pars[i, 3] = ev.radius
        elif isinstance(ev, ExitLocus):
            kinds[i] = K.EV_EXIT
            pars[i, 0] = ev.margin
        elif isinstance(ev, SLimit):
            if ev.length <= 0:
                raise ValueError("SLimit length must be positive")
            kinds[i] = K.EV_SLIMIT
            pars[i, 0] = ev.length
        elif isinstance(ev, ArcCap):
            kinds[i] = K.EV_CAP
            pars[i, 0] = ev.eps
        else:
            raise TypeError(f"unknown event kind {ev!r}")
    return kinds, pars


@dataclass
class Trajectory:
    """Numerical solution with dense output.

    Samples are stored in increasing ``s`` regardless of the integration
    direction.  ``w`` holds ``1 - h`` at full precision.
    """

    dims: Dims
    direction: int
    s_start: float
    s: np.ndarray
    states: np.ndarray
    w: np.ndarray
    events: list = field(default_factory=list)
    status: str = "event"
    n_accepted: int = 0
    n_rejected: int = 0
    # dense data in integration order
    _tau: np.ndarray = None
    _coefs: np.ndarray = None
    _hsteps: np.ndarray = None

    @property
    def end_state(self) -> StateZDH:
        i = -1 if self.direction > 0 else 0
        return StateZDH(*self.states[i])

    @property
    def end_s(self) -> float:
        return float(self.s[-1] if self.direction > 0 else self.s[0])

    @property
    def end_w(self) -> float:
        return float(self.w[-1] if self.direction > 0 else self.w[0])

    def state_at(self, s: Union[float, np.ndarray]) -> np.ndarray:
        """Dense-output evaluation; returns rows (z, delta, h)."""
        if self._coefs is None or len(self._coefs) == 0:
            raise ValueError("trajectory carries no dense output")
        s = np.atleast_1d(np.asarray(s, dtype=float))
        tau = (s - self.s_start) * self.direction
        j = np.clip(np.searchsorted(self._tau, tau, side="right") - 1, 0, len(self._coefs) - 1)
        theta = (tau - self._tau[j]) / self._hsteps[j]
        c = self._coefs[j]
        t1 = 1.0 - theta
        th = theta[:, None]
        t1 = t1[:, None]
        y = c[:, 0] + th * (c[:, 1] + t1 * (c[:, 2] + th * (c[:, 3] + t1 * c[:, 4])))
        out = y.copy()
        out[:, 2] = 1.0 - y[:, 2]
        return out

    # serialization -------------------------------------------------------
    def table(self) -> np.ndarray:
        rows = []
        for s, (z, dl, h) in zip(self.s, self.states):
            st = StateZDH(z, dl, h)
            try:
                y = recover_y(st, self.dims, tol=1e-6)
                y1, y2 = y.y1, y.y2
            except Exception:
                y1 = y2 = float("nan")
            try:
                F = volume_F(st, self.dims, tol=1e-6)
            except Exception:
                F = float("nan")
            rows.append((s, z, dl, h, y1, y2, face_a(st, self.dims), face_b(st, self.dims), F))
        return np.array(rows)

    def to_csv(self, path) -> None:
        from .io import write_csv
        write_csv(path, CSV_HEADER.split(","), self.table())

    def to_json(self, path) -> None:
        from .io import write_json
        write_json(path, {
            "schema": TRAJECTORY_SCHEMA,
            "d1": self.dims.d1, "d2": self.dims.d2,
            "direction": self.direction,
            "status": self.status,
            "events": [{"kind": type(e.kind).__name__, "s": e.s_hit,
                        "state": list(e.state_hit)} for e in self.events],
            "columns": CSV_HEADER.split(","),
            "rows": self.table().tolist(),
        })


_STATUS = {K.ST_EVENT: "event", K.ST_MAXSTEPS: "max_steps", K.ST_UNDERFLOW: "underflow",
           K.ST_LEFT: "left_locus", K.ST_NONFINITE: "nonfinite"}


def integrate(start: StateZDH, dims: Dims, cfg: IntegratorConfig = IntegratorConfig(),
              events: Sequence[EventKind] = (), *, direction: int = 1, s_start: float = 0.0,
              w0: float | None = None, record: bool = True, raise_on_failure: bool = True
              ) -> Trajectory:
    """Integrate the (z, delta, h) field from ``start``.

    ``direction=-1`` integrates backward in s.  ``w0`` overrides ``1 - h`` of
    the start to keep precision very close to the top cap.  With
    ``record=False`` only the final step is kept.
    """
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    w_init = 1.0 - start.h if w0 is None else float(w0)
    y0 = np.array([start.z, start.delta, w_init], dtype=float)
    if not np.all(np.isfinite(y0)):
        raise ValueError("start state must be finite")
    g0 = max(face_a(start, dims), face_b(start, dims), -w_init, w_init - 2.0)
    if g0 > cfg.locus_tol:
        raise LeftLocus(f"start lies outside the locus by {g0:.3e}")
    kinds, pars = _encode_events(events)
    status, ev_i, tau, ys, coefs, hsteps, nacc, nrej = K.dopri_kernel(
        y0, dims.d1, dims.d2, float(direction), cfg.rel_tol, cfg.abs_tol, cfg.max_step,
        cfg.min_step, int(cfg.max_steps), cfg.first_step, kinds, pars, EVENT_TOL,
        cfg.locus_tol, record)

    s = s_start + direction * tau
    w = ys[:, 2].copy()
    states = ys.copy()
    states[:, 2] = 1.0 - w
    hit = []
    if status == K.ST_EVENT:
        hit.append(Event(events[ev_i], float(s[-1]), StateZDH(*states[-1]), float(w[-1])))
    order = slice(None) if direction > 0 else slice(None, None, -1)
    traj = Trajectory(dims, direction, s_start, s[order].copy(), states[order].copy(),
                      w[order].copy(), hit, _STATUS[status], int(nacc), int(nrej),
                      tau, coefs, hsteps)
    if raise_on_failure and status != K.ST_EVENT:
        exc = {K.ST_MAXSTEPS: MaxStepsExceeded, K.ST_UNDERFLOW: StepUnderflow,
               K.ST_LEFT: LeftLocus, K.ST_NONFINITE: StepUnderflow}[status]
        err = exc(f"integration stopped with status {_STATUS[status]!r} at s={traj.end_s:.6g}")
        err.trajectory = traj
        raise err
    return traj


def fixed_point_events(dims: Dims, radius: float, h_above: float | None = None,
                       labels: Sequence[str] | None = None) -> list[NearPoint]:
    from .equilibria import fixed_point_coords
    out = []
    for label, st in fixed_point_coords(dims).items():
        if labels is not None and label not in labels:
            continue
        if h_above is not None and not st.h > h_above:
            continue
        out.append(NearPoint(st, radius, label))
    return out


def integrate_to_h(start: StateZDH, dims: Dims, h_target: float,
                   cfg: IntegratorConfig = IntegratorConfig(), *, w0: float | None = None,
                   direction: int = 1, near_radius: float = 1e-8,
                   record: bool = False) -> tuple[StateZDH, float]:
    """Follow the flow until ``h = h_target`` and return the crossing state and s.

    Forward in s the mean curvature decreases, so ``h_target`` must lie below
    the start; with ``direction=-1`` it must lie above it.
    """
    traj = trace_to_h(start, dims, h_target, cfg, w0=w0, direction=direction,
                      near_radius=near_radius, record=record)
    ev = traj.events[0]
    return ev.state_hit, ev.s_hit


def trace_to_h(start: StateZDH, dims: Dims, h_target: float,
               cfg: IntegratorConfig = IntegratorConfig(), *, w0: float | None = None,
               direction: int = 1, near_radius: float = 1e-8,
               record: bool = True) -> Trajectory:
    w_init = 1.0 - start.h if w0 is None else w0
    h0 = 1.0 - w_init
    if direction > 0 and not h_target < h0:
        raise ValueError("h_target must lie below the start h when integrating forward")
    if direction < 0 and not h_target > h0:
        raise ValueError("h_target must lie above the start h when integrating backward")
    if w_init <= 0.0 or w_init >= 2.0:
        raise Unreachable("start lies on an invariant cap; h is constant there")
    if direction > 0:
        traps = fixed_point_events(dims, near_radius, h_above=h_target) if not dims.degenerate else []
    else:
        traps = [e for e in fixed_point_events(dims, near_radius) if e.center.h < h_target] \
            if not dims.degenerate else []
    traj = integrate(start, dims, cfg, [HCrossing(h_target), *traps], w0=w0,
                     direction=direction, record=record)
    ev = traj.events[0]
    if not isinstance(ev.kind, HCrossing):
        raise Unreachable(f"trajectory converges to {ev.kind.label} before reaching h={h_target}")
    return traj
