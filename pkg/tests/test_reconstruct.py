import dataclasses
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from coho1.errors import NotHeteroclinic
from coho1.intersect import IntersectionRecord
from coho1.model import Dims
from coho1.reconstruct import (boundary_slopes, einstein_residual, max_volume_index,
                               profile_from_states, reconstruct, recovery_consistency, summary,
                               summary_text, xy_from_zdh, zdh_from_profile)

from conftest import S10


def round_samples(dims, lam, count=40001, cut=5e-4):
    """Round sphere of Einstein constant lam, sampled uniformly in the flow time s.

    Returns (t, T, s, states); s is obtained by integrating dt/ds = ell(t).  The
    default cut keeps the ends about as far from the collapse as a traced profile.
    Much closer in, the quadrature noise in t dominates the differenced L."""
    T = math.pi / 2 / math.sqrt(lam / dims.n)
    w = math.pi / 2 / T

    def ell(t):
        trl = w * (dims.d1 / np.tan(w * t) - dims.d2 * np.tan(w * t))
        return 1.0 / np.sqrt(trl * trl + dims.n * lam)

    end = lambda s, y: y[0] - (1 - cut) * T  # noqa: E731
    end.terminal = True
    sol = solve_ivp(lambda s, y: ell(y), (0.0, 1e3), [cut * T], events=end, dense_output=True,
                    rtol=1e-13, atol=1e-16)
    s = np.linspace(0.0, sol.t_events[0][0], count)
    t = sol.sol(s)[0]
    f1, f2 = np.sin(w * t) / w, np.cos(w * t) / w
    st = zdh_from_profile(f1, np.cos(w * t), f2, -np.sin(w * t), lam, dims)
    return t, T, s, st


def _round(run_cached, dims):
    return next(r for r in run_cached(dims).records if r.classification == "Round")


@pytest.mark.parametrize("dims", S10)
def test_recovery_maps_are_inverse(dims, rng):
    _, _, _, st = round_samples(dims, dims.n, count=101)
    x1, x2, y1, y2 = xy_from_zdh(st, dims).T
    n = dims.n
    assert np.allclose(n * x1 - dims.d2 * st[:, 1], st[:, 2], atol=1e-13)
    assert np.allclose(x1 - x2, st[:, 1], atol=1e-13)
    assert np.all(y1 > 0) and np.all(y2 > 0)


@pytest.mark.parametrize("dims", S10)
def test_profile_from_round_states(dims):
    """Synthetic round data: time origin, T and the collapse values follow the sine law."""
    lam = dims.n
    t, T, s, st = round_samples(dims, lam)
    p = profile_from_states(s, st, dims, lam)
    assert p.T == pytest.approx(math.pi / 2, abs=1e-7)
    assert np.allclose(p.t, t, atol=1e-7)
    assert np.allclose(p.f1, np.sin(p.t), atol=1e-7)
    assert np.allclose(p.f2, np.cos(p.t), atol=1e-7)
    assert p.fbar1 == pytest.approx(1.0, abs=1e-7)
    assert p.fbar2 == pytest.approx(1.0, abs=1e-7)
    assert einstein_residual(p) < 1e-6
    assert recovery_consistency(p) < 1e-12


@pytest.mark.parametrize("lam", (0.5, 9.0, 40.0))
def test_lambda_scaling(lam):
    dims = Dims(4, 5)
    _, _, s, st = round_samples(dims, dims.n)
    base = profile_from_states(s, st, dims, dims.n)
    p = profile_from_states(s, st, dims, lam)
    r = math.sqrt(lam / dims.n)
    assert p.T * r == pytest.approx(base.T, rel=1e-12)
    assert np.allclose(p.f1 * r, base.f1, rtol=1e-12)
    assert einstein_residual(p) == pytest.approx(einstein_residual(base), abs=1e-9)
    assert summary(p)["T_sqrt_lambda"] == pytest.approx(summary(base)["T_sqrt_lambda"], rel=1e-12)


def test_corrupted_profile_is_detected():
    dims = Dims(3, 6)
    _, _, s, st = round_samples(dims, dims.n)
    p = profile_from_states(s, st, dims, dims.n)
    bad = dataclasses.replace(p, f2=p.f2 * 1.01)
    assert einstein_residual(bad) > 1e-2
    with pytest.raises(ValueError):
        profile_from_states(s, st, dims, 0.0)


@pytest.mark.parametrize("dims", S10)
def test_round_reconstruction(dims, run_cached):
    p = reconstruct(_round(run_cached, dims))
    assert p.T == pytest.approx(math.pi / 2, abs=1e-5)
    assert np.max(np.abs(p.f1 - np.sin(p.t))) < 1e-5
    assert np.max(np.abs(p.f2 - np.cos(p.t))) < 1e-5
    assert einstein_residual(p) <= 1e-6
    assert recovery_consistency(p) <= 1e-8
    k0, k1 = boundary_slopes(p)
    assert k0 == pytest.approx(1.0, abs=1e-3) and k1 == pytest.approx(-1.0, abs=1e-3)
    j = max_volume_index(p)
    assert math.tan(p.t[j]) ** 2 == pytest.approx(dims.d1 / dims.d2, rel=1e-2)
    assert summary(p)["T_sqrt_lambda"] == pytest.approx(1.5 * math.pi, abs=1e-4)


def test_reconstruct_lambda_doubling(run_cached):
    rec = _round(run_cached, Dims(4, 5))
    p, q = reconstruct(rec, lam=9.0), reconstruct(rec, lam=18.0)
    assert q.T == pytest.approx(p.T / math.sqrt(2), rel=1e-12)
    assert np.allclose(q.f1, p.f1 / math.sqrt(2), rtol=1e-12)
    assert np.allclose(q.t, p.t / math.sqrt(2), rtol=1e-12)


@pytest.mark.parametrize("dims", S10)
def test_nonround_reconstruction(dims, run_cached):
    rows = []
    for rec in run_cached(dims).records:
        if rec.classification != "NonRound":
            continue
        p = reconstruct(rec, lam=2.0)
        assert einstein_residual(p) <= 1e-5
        k0, k1 = boundary_slopes(p)
        assert abs(k0 - 1) <= 1e-3 and abs(k1 + 1) <= 1e-3
        assert p.fbar1 > 0 and p.fbar2 > 0
        assert np.all(p.f1 > 0) and np.all(p.f2 > 0)
        assert recovery_consistency(p) <= 1e-8
        # the largest orbit sits at H = 0
        j = max_volume_index(p)
        assert abs(p.states[j, 2]) <= 2 * np.max(np.abs(np.diff(p.states[:, 2])))
        rows.append(summary(p))
    assert rows
    round_row = summary(reconstruct(_round(run_cached, dims), lam=2.0))
    inv = ["T_sqrt_lambda", "fbar1_sqrt_lambda", "fbar2_sqrt_lambda"]
    for row in rows:
        assert max(abs(row[c] - round_row[c]) for c in inv) > 1e-3
    text = summary_text(rows)
    assert text.splitlines()[0].split()[0] == "d1"
    assert len(text.splitlines()) == len(rows) + 1


def test_reconstruct_rejects_products(run_cached):
    rec = run_cached(Dims(4, 5), "product1").records[0]
    with pytest.raises(NotHeteroclinic):
        reconstruct(rec)
    with pytest.raises(ValueError):
        reconstruct(rec, lam=-1.0)


def test_profile_csv(tmp_path, run_cached):
    p = reconstruct(_round(run_cached, Dims(4, 5)))
    p.to_csv(tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "t,f1,f1dot,f2,f2dot"
    assert len(lines) == len(p.t) + 1
