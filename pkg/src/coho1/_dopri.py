"""Compiled Dormand-Prince 5(4) kernel for the (z, delta, h) system.

The kernel works in ``(z, delta, w)`` with ``w = 1 - h`` so that states close
to the top cap keep full relative precision in their distance to it.  The
whole stepping loop, including event location on the dense output, runs
inside one numba function.
"""
import math

import numpy as np
from numba import njit

# Butcher tableau (Dormand & Prince 1980).
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                           49.0 / 176.0, -5103.0 / 18656.0)
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                          -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)
# Dense output (Hairer, Norsett & Wanner, dopri5 contd5).
D1 = -12715105075.0 / 11282082432.0
D3 = 87487479700.0 / 32700410799.0
D4 = -10690763975.0 / 1880347072.0
D5 = 701980252875.0 / 199316789632.0
D6 = -1453857185.0 / 822651844.0
D7 = 69997945.0 / 29380423.0

BETA = 0.04
EXPO1 = 0.2 - BETA * 0.75
SAFE = 0.9
FACC1 = 5.0   # largest step shrink factor is 1/FACC1
FACC2 = 0.1   # largest step growth factor is 1/FACC2

# event kinds
EV_HCROSS = 0
EV_NEAR = 1
EV_EXIT = 2
EV_SLIMIT = 3
EV_CAP = 4

# status codes
ST_EVENT = 0
ST_MAXSTEPS = 1
ST_UNDERFLOW = 2
ST_LEFT = 3
ST_NONFINITE = 4


@njit(cache=True)
def field(y, d1, d2, sgn, out):
    n = d1 + d2
    p = d1 * d2
    k = p / n
    m = (n - 1.0) / n
    z = y[0]
    dl = y[1]
    w = y[2]
    h = 1.0 - w
    out[0] = sgn * (2.0 / n) * dl * (p * z * dl * h + k * dl * dl - m + (d1 - d2) * z)
    out[1] = sgn * (dl * h * (k * dl * dl - m) + z)
    out[2] = sgn * (w * (2.0 - w) / n) * (p * dl * dl + 1.0)


@njit(cache=True)
def dense_eval(coef, theta, out):
    t1 = 1.0 - theta
    for i in range(3):
        out[i] = coef[0, i] + theta * (coef[1, i] + t1 * (coef[2, i] + theta * (
            coef[3, i] + t1 * coef[4, i])))


@njit(cache=True)
def event_value(kind, par, y, d1, d2):
    if kind == EV_HCROSS:
        return par[1] - y[2]          # par[1] = 1 - h_target
    if kind == EV_NEAR:
        a = y[0] - par[0]
        b = y[1] - par[1]
        c = y[2] - par[2]             # par[2] = 1 - h_center
        return math.sqrt(a * a + b * b + c * c) - par[3]
    if kind == EV_EXIT:
        n = d1 + d2
        k = d1 * d2 / n
        m = (n - 1.0) / n
        q = k * y[1] * y[1] - m
        g = d1 * y[0] + q
        gb = -d2 * y[0] + q
        if gb > g:
            g = gb
        if -y[2] > g:
            g = -y[2]
        if y[2] - 2.0 > g:
            g = y[2] - 2.0
        return g - par[0]
    if kind == EV_CAP:
        w = y[2]
        if 2.0 - w < w:
            w = 2.0 - w
        return w - par[0]
    return 1.0


@njit(cache=True)
def _weighted_norm(e, y0, y1, rtol, atol):
    r0 = math.sqrt(y0[0] * y0[0] + y0[1] * y0[1])
    r1 = math.sqrt(y1[0] * y1[0] + y1[1] * y1[1])
    sp = atol + rtol * max(r0, r1)
    sw = atol + rtol * max(abs(y0[2]), abs(y1[2]))
    a = e[0] / sp
    b = e[1] / sp
    c = e[2] / sw
    return math.sqrt((a * a + b * b + c * c) / 3.0)


@njit(cache=True)
def _triggered(kind, g_old, g_new, armed):
    if kind == EV_HCROSS:
        return g_new == 0.0 or (g_old != 0.0 and (g_old < 0.0) != (g_new < 0.0))
    if kind == EV_EXIT:
        return g_new > 0.0
    if kind == EV_NEAR or kind == EV_CAP:
        return armed and g_new <= 0.0
    return False


@njit(cache=True)
def _refine(kind, par, coef, ta, tb, ga, gb, d1, d2, tol, ybuf):
    # Illinois variant of regula falsi on the dense output; for
    # one-sided predicates the bracket endpoints have g(ta) > 0 >= g(tb)
    # (or the reverse), which is all the method needs.
    if gb == 0.0:
        return tb
    side = 0
    tc = tb
    for _ in range(60):
        tc = (ta * gb - tb * ga) / (gb - ga)
        if not (ta < tc < tb):
            tc = 0.5 * (ta + tb)
        dense_eval(coef, tc, ybuf)
        gc = event_value(kind, par, ybuf, d1, d2)
        if abs(gc) <= tol and (kind == EV_HCROSS or (ga > 0.0) != (gc > 0.0) or gc == 0.0):
            return tc
        if (gc > 0.0) == (ga > 0.0):
            ta, ga = tc, gc
            if side == -1:
                gb *= 0.5
            side = -1
        else:
            tb, gb = tc, gc
            if side == 1:
                ga *= 0.5
            side = 1
        if tb - ta <= 4e-16 * max(1.0, abs(tb)):
            break
    # for one-sided predicates return the side where the event holds
    if kind == EV_HCROSS:
        return tc
    return tb


@njit(cache=True)
def dopri_kernel(y0, d1, d2, sgn, rtol, atol, max_step, min_step, max_steps, first_step,
                 ev_kind, ev_par, ev_tol, locus_tol, record):
    """Integrate from ``y0`` in the direction ``sgn`` until an event fires.

    Returns ``(status, event_index, tau, ys, coefs, hsteps, n_accept, n_reject)``.
    ``tau`` is the elapsed time (always increasing); ``coefs[j]`` is the
    dense polynomial on the full step ``[tau[j], tau[j] + hsteps[j]]``.
    """
    ne = ev_kind.shape[0]
    cap = 1024 if record else 2
    taus = np.empty(cap)
    ys = np.empty((cap, 3))
    coefs = np.empty((cap, 5, 3))
    hsteps = np.empty(cap)
    npts = 1
    taus[0] = 0.0
    ys[0, :] = y0

    y = y0.copy()
    k1 = np.empty(3)
    k2 = np.empty(3)
    k3 = np.empty(3)
    k4 = np.empty(3)
    k5 = np.empty(3)
    k6 = np.empty(3)
    k7 = np.empty(3)
    yt = np.empty(3)
    y1 = np.empty(3)
    err = np.empty(3)
    coef = np.empty((5, 3))
    ybuf = np.empty(3)

    s_limit = -1.0
    check_locus = locus_tol > 0.0
    zero_par = np.zeros(4)
    armed = np.zeros(ne, dtype=np.bool_)
    g_prev = np.empty(ne)
    for i in range(ne):
        if ev_kind[i] == EV_SLIMIT:
            s_limit = ev_par[i, 0]
        if ev_kind[i] == EV_EXIT:
            check_locus = False
        g_prev[i] = event_value(ev_kind[i], ev_par[i], y, d1, d2)
        armed[i] = g_prev[i] > 0.0

    field(y, d1, d2, sgn, k1)
    tau = 0.0
    # initial step (Hairer's heuristic)
    if first_step > 0.0:
        hs = first_step
    else:
        sp = atol + rtol * math.sqrt(y[0] * y[0] + y[1] * y[1])
        sw = atol + rtol * abs(y[2])
        dn0 = math.sqrt(((y[0] / sp) ** 2 + (y[1] / sp) ** 2 + (y[2] / sw) ** 2) / 3.0)
        dn1 = math.sqrt(((k1[0] / sp) ** 2 + (k1[1] / sp) ** 2 + (k1[2] / sw) ** 2) / 3.0)
        if dn0 < 1e-5 or dn1 < 1e-5:
            h0 = 1e-6
        else:
            h0 = 0.01 * dn0 / dn1
        h0 = min(h0, max_step)
        for i in range(3):
            yt[i] = y[i] + h0 * k1[i]
        field(yt, d1, d2, sgn, k2)
        dn2 = math.sqrt((((k2[0] - k1[0]) / sp) ** 2 + ((k2[1] - k1[1]) / sp) ** 2
                         + ((k2[2] - k1[2]) / sw) ** 2) / 3.0) / h0
        dmax = max(dn1, dn2)
        if dmax <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / dmax) ** 0.2
        hs = min(100.0 * h0, h1, max_step)

    facold = 1e-4
    n_acc = 0
    n_rej = 0
    status = ST_MAXSTEPS
    ev_hit = -1
    last_rejected = False

    while n_acc + n_rej < max_steps:
        if hs < min_step:
            status = ST_UNDERFLOW
            break
        clipped = False
        h = hs
        if s_limit >= 0.0 and tau + h >= s_limit:
            h = s_limit - tau
            clipped = True
        for i in range(3):
            yt[i] = y[i] + h * A21 * k1[i]
        field(yt, d1, d2, sgn, k2)
        for i in range(3):
            yt[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
        field(yt, d1, d2, sgn, k3)
        for i in range(3):
            yt[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        field(yt, d1, d2, sgn, k4)
        for i in range(3):
            yt[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        field(yt, d1, d2, sgn, k5)
        for i in range(3):
            yt[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i]
                                + A65 * k5[i])
        field(yt, d1, d2, sgn, k6)
        for i in range(3):
            y1[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
        field(y1, d1, d2, sgn, k7)
        for i in range(3):
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                          + E7 * k7[i])
        en = _weighted_norm(err, y, y1, rtol, atol)
        if not (math.isfinite(en) and math.isfinite(y1[0]) and math.isfinite(y1[1])
                and math.isfinite(y1[2])):
            if h > 2.0 * min_step:
                hs = 0.25 * h
                n_rej += 1
                last_rejected = True
                continue
            status = ST_NONFINITE
            break

        fac11 = en ** EXPO1
        fac = fac11 / facold ** BETA
        fac = max(FACC2, min(FACC1, fac / SAFE))
        hnew = h / fac
        if en > 1.0:
            hs = h / min(FACC1, fac11 / SAFE)
            n_rej += 1
            last_rejected = True
            continue

        # accepted
        facold = max(en, 1e-4)
        n_acc += 1
        for i in range(3):
            ydiff = y1[i] - y[i]
            bspl = h * k1[i] - ydiff
            coef[0, i] = y[i]
            coef[1, i] = ydiff
            coef[2, i] = bspl
            coef[3, i] = ydiff - h * k7[i] - bspl
            coef[4, i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                              + D7 * k7[i])

        # event detection on this step
        best_theta = 2.0
        best_ev = -1
        for e in range(ne):
            kind = ev_kind[e]
            if kind == EV_SLIMIT:
                continue
            if kind == EV_NEAR or kind == EV_CAP:
                ta = 0.0
                ga = g_prev[e]
                for q in range(1, 5):
                    th = 0.25 * q
                    if q == 4:
                        gq = event_value(kind, ev_par[e], y1, d1, d2)
                    else:
                        dense_eval(coef, th, ybuf)
                        gq = event_value(kind, ev_par[e], ybuf, d1, d2)
                    if not armed[e]:
                        if gq > 0.0:
                            armed[e] = True
                        ta = th
                        ga = gq
                        continue
                    if gq <= 0.0:
                        if ta < best_theta:
                            th_hit = _refine(kind, ev_par[e], coef, ta, th, ga, gq, d1, d2,
                                             ev_tol, ybuf)
                            if th_hit < best_theta:
                                best_theta = th_hit
                                best_ev = e
                        break
                    ta = th
                    ga = gq
            else:
                g_new = event_value(kind, ev_par[e], y1, d1, d2)
                if _triggered(kind, g_prev[e], g_new, armed[e]):
                    th_hit = _refine(kind, ev_par[e], coef, 0.0, 1.0, g_prev[e], g_new, d1, d2,
                                     ev_tol, ybuf)
                    if th_hit < best_theta:
                        best_theta = th_hit
                        best_ev = e
        if clipped and best_ev < 0:
            for e in range(ne):
                if ev_kind[e] == EV_SLIMIT:
                    best_ev = e
                    best_theta = 1.0
                    break

        left = False
        if best_ev < 0 and check_locus:
            left = event_value(EV_EXIT, zero_par, y1, d1, d2) > locus_tol

        # store the step
        if record and npts + 1 > cap:
            ncap = 2 * cap
            t2 = np.empty(ncap)
            y2 = np.empty((ncap, 3))
            c2 = np.empty((ncap, 5, 3))
            hh2 = np.empty(ncap)
            t2[:npts] = taus[:npts]
            y2[:npts] = ys[:npts]
            c2[:npts - 1] = coefs[:npts - 1]
            hh2[:npts - 1] = hsteps[:npts - 1]
            taus, ys, coefs, hsteps, cap = t2, y2, c2, hh2, ncap
        idx = npts if record else 1
        if best_ev >= 0 and best_theta < 1.0:
            dense_eval(coef, best_theta, ybuf)
            taus[idx] = tau + best_theta * h
            ys[idx, :] = ybuf
        else:
            taus[idx] = tau + h
            ys[idx, :] = y1
        coefs[idx - 1, :, :] = coef
        hsteps[idx - 1] = h
        if record:
            npts += 1
        else:
            npts = 2
            taus[0] = tau
            ys[0, :] = y

        if best_ev >= 0:
            status = ST_EVENT
            ev_hit = best_ev
            break
        if left:
            status = ST_LEFT
            break

        tau = tau + h
        for i in range(3):
            y[i] = y1[i]
            k1[i] = k7[i]
        for e in range(ne):
            g_prev[e] = event_value(ev_kind[e], ev_par[e], y, d1, d2)
        if last_rejected:
            hnew = min(hnew, h)
        last_rejected = False
        hs = min(hnew, max_step)

    return (status, ev_hit, taus[:npts].copy(), ys[:npts].copy(), coefs[:npts - 1].copy(),
            hsteps[:npts - 1].copy(), n_acc, n_rej)
