"""Acceptance criteria 1-12 at their stated tolerances and runtime budgets.

Each test records one PASS/FAIL line, printed in the terminal summary.
"""
import math
import time

import numpy as np
import pytest

from coho1 import cli
from coho1.barrier import PHI_STAR, checkpoint_report, monotonicity_violations
from coho1.equilibria import fixed_point_coords, lookup
from coho1.fields import jacobian_zdh, rhs_zdh
from coho1.integrator import IntegratorConfig, SLimit, integrate
from coho1.intersect import analytic_round_point, analytic_round_product_point, connection
from coho1.manifold import ricci_flat
from coho1.model import Dims, StateZDH, face_a, face_b
from coho1.reconstruct import boundary_slopes, einstein_residual, reconstruct
from coho1.rotation import brute_intersections, winding_angle
from coho1.survey import degenerate_pair, run_pair

from conftest import S10, interior_samples, record_criterion
from test_equilibria import closed_forms
from test_integrator import _law
from test_rotation import brute_oracle_bound, spiral


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0

    @property
    def ok(self):
        return self.elapsed <= self.seconds

    def __str__(self):
        return f"{self.elapsed:.2f} s (budget {self.seconds:g} s)"


def check(key, ok, detail):
    record_criterion(key, ok, detail)
    assert ok, detail


def test_criterion_1_fixed_points():
    worst_x = worst_f = 0.0
    with Budget(1.0) as b:
        for dims in S10:
            fps = fixed_point_coords(dims)
            for label, ref in closed_forms(dims.d1, dims.d2).items():
                worst_x = max(worst_x, float(np.max(np.abs(np.array(fps[label]) - ref))))
                worst_f = max(worst_f, float(np.max(np.abs(rhs_zdh(fps[label], dims)))))
    check("1", worst_x <= 1e-12 and worst_f <= 1e-14 and b.ok,
          f"coords {worst_x:.1e}, rhs {worst_f:.1e}, {b}")


def test_criterion_2_cone_degeneracy():
    worst = 0.0
    ok = True
    with Budget(1.0) as b:
        for dims in S10:
            fp = lookup(dims, "cone+")
            ok &= all(abs(v + 4 / 9) <= 1e-12 for v in fp.eigenvalues[:2])
            A = jacobian_zdh(fp.coords, dims)[:2, :2]
            ok &= np.linalg.matrix_rank(A + 4 / 9 * np.eye(2), tol=1e-10) == 1
            ok &= fp.geometric_multiplicities[:2] == (1, 1)
            v = np.real(fp.eigenvectors[0])
            dev = abs(math.atan2(v[1], v[0]) - math.atan2(9, 4)) % math.pi
            worst = max(worst, min(dev, math.pi - dev))
    check("2", ok and worst < 1e-9 and b.ok,
          f"double eigenvalue -4/9, one eigenvector, angle to (4,9) {worst:.1e}, {b}")


def test_criterion_3_jacobian(rng):
    worst = 0.0
    with Budget(1.0) as b:
        for dims in S10:
            for p in interior_samples(dims, 100, rng):
                J = jacobian_zdh(p, dims)
                x = np.array(p)
                num = np.zeros((3, 3))
                for j in range(3):
                    e = np.zeros(3)
                    e[j] = 1e-6
                    num[:, j] = (np.array(rhs_zdh(StateZDH(*(x + e)), dims)) -
                                 np.array(rhs_zdh(StateZDH(*(x - e)), dims))) / 2e-6
                rel = np.max(np.abs(J - num)) / max(1.0, np.max(np.abs(J)))
                worst = max(worst, float(rel))
    check("3", worst <= 1e-6 and b.ok, f"max relative deviation {worst:.1e}, {b}")


def test_criterion_4_integrator(rng):
    with Budget(10.0) as b:
        law = 0.0
        for dims in S10:
            law = max(law, _law(dims, 0.0, dims.n)[1])
            for sign in (1, -1):
                law = max(law, _law(dims, sign * dims.q_delta, 1.0)[1])
        drift = 0.0
        cfg = IntegratorConfig(rel_tol=1e-10)
        for dims in S10:
            for face, fun in (("A", face_a), ("B", face_b)):
                dl = rng.uniform(-0.8, 0.8) * dims.q_delta
                q = dims.m - dims.k * dl * dl
                st = StateZDH(q / dims.d1 if face == "A" else -q / dims.d2, dl, 0.5)
                tr = integrate(st, dims, cfg, [SLimit(10.0)])
                drift = max(drift, abs(fun(tr.end_state, dims)) - abs(fun(st, dims)))
        dims = Dims(3, 6)
        steps, errs = [], []
        for tol in (1e-6, 1e-7, 1e-8, 1e-9):
            tr, err = _law(dims, dims.q_delta, 1.0,
                           IntegratorConfig(rel_tol=tol, abs_tol=tol * 1e-2, max_step=10.0))
            steps.append(tr.n_accepted)
            errs.append(err)
        order = -np.polyfit(np.log(steps), np.log(errs), 1)[0]
    check("4", law <= 1e-8 and drift <= 1e-7 and order >= 4 and b.ok,
          f"tanh laws {law:.1e}, face drift {drift:.1e}, order {order:.2f}, {b}")


def test_criterion_5_barrier():
    with Budget(5.0) as b:
        r0 = checkpoint_report(0.0)
        r1 = checkpoint_report(1e-3)
    got = {r.name: r.computed for r in r0.records}
    ok = (got["step1"] <= math.pi + PHI_STAR and got["step2"] <= math.pi
          and got["limit"] < PHI_STAR and got["limit_uncertainty"] < 1e-4
          and r0.passed and r1.passed and r0.epsilon >= 1e-3 and r1.epsilon >= 1e-3
          and round(got["s0"], 2) == -4.94 and round(got["step4_location_value"], 2) == 0.99)
    check("5", ok and b.ok,
          f"phi(1/4) {got['step1']:.4f}, phi(1/2) {got['step2']:.4f}, limit {got['limit']:.8f} "
          f"(+- {got['limit_uncertainty']:.0e}), eps {r0.epsilon:.3g}/{r1.epsilon:.3g}, "
          f"s0 {got['s0']:.3f}, loc {got['step4_location_value']:.3f}, {b}")


def test_criterion_6_n10_probe():
    with Budget(1.0) as b:
        count, low = monotonicity_violations(10)
    check("6", count > 0 and low < 0 and b.ok,
          f"{count} sampled violations, min speed {low:.3g}, {b}")


def test_criterion_7_rotation_suite():
    with Budget(30.0) as b:
        violations = 0
        for seed in range(500):
            rng = np.random.default_rng(seed)
            start = rng.uniform(0, 2 * np.pi)
            a = spiral(start, start + rng.uniform(-2, 8) * np.pi, rng.uniform(4, 12),
                       int(rng.integers(400, 900)), rng.uniform(0, 1.0),
                       int(rng.integers(0, 5)))
            c = spiral(start, start + rng.uniform(-6, 4) * np.pi, rng.uniform(4, 12),
                       int(rng.integers(400, 900)), rng.uniform(0, 1.0),
                       int(rng.integers(0, 5)))
            found = len(brute_intersections(a, c))
            violations += found < brute_oracle_bound(a, c)[1]
            violations += found < brute_oracle_bound(c, a)[1]
        exact = max(abs(winding_angle(spiral(0.0, 2 * math.pi * t, 3.0, 20_001,
                                             to_origin=False)) - 2 * math.pi * t)
                    for t in (0.3, 1.0, 2.5, 7.0, -3.2))
    check("7", violations == 0 and exact <= 1e-6 and b.ok,
          f"{violations} violations over 500 pairs, spiral winding error {exact:.1e}, {b}")


@pytest.mark.parametrize("dims", S10)
def test_criterion_8_sphere_intersections(dims, pair_cache):
    with Budget(600.0) as b:
        res = run_pair(dims, "sphere")
    pair_cache.setdefault((dims.d1, dims.d2, "sphere"), res)
    recs = res.records
    rounds = [r for r in recs if math.hypot(r.z - analytic_round_point(dims)[0],
                                            r.delta - analytic_round_point(dims)[1]) <= 1e-6]
    worst = max(r.residual for r in recs)
    ok = len(recs) >= 2 and worst <= 1e-9 and len(rounds) == 1 and \
        res.winding_sum > 4 * math.pi and b.ok
    check(f"8{'abc'[S10.index(dims)]}", ok,
          f"({dims.d1},{dims.d2}): {len(recs)} intersections, residual {worst:.1e}, "
          f"theta_A + theta_B = {res.winding_sum:.3f} > 4 pi = {4 * math.pi:.3f}, {b}")


def test_criterion_9_heteroclinic(run_cached):
    details, ok = [], True
    for dims in S10:
        for rec in run_cached(dims).records:
            if rec.classification != "NonRound":
                continue
            with Budget(120.0) as b:
                conn = connection(rec)
                prof = reconstruct(rec, conn=conn)
                res = einstein_residual(prof)
                k0, k1 = boundary_slopes(prof)
            ok &= (conn.start_distance <= 1e-5 and conn.end_distance <= 1e-5 and res <= 1e-5
                   and abs(k0 - 1) <= 1e-3 and abs(k1 + 1) <= 1e-3 and b.ok)
            details.append(f"({dims.d1},{dims.d2}) residual {res:.1e} slopes {k0:.5f}/{k1:.5f} "
                           f"{b.elapsed:.3f} s")
    check("9", ok and details, "; ".join(details))


def test_criterion_10a_bohm_intersections(run_cached):
    dims = Dims(3, 4)
    with Budget(600.0) as b:
        res = run_cached(dims)
    n = len(res.records)
    check("10a", n >= 3 and b.ok, f"(3,4): {n} sphere intersections, {b}")


@pytest.mark.xfail(strict=True, reason="the Ricci-flat spiral turns by about 0.577 rad per "
                   "e-fold of radius, so it gains roughly 9.6 rad before radius 1e-8")
def test_criterion_10b_ricci_flat_angle_gain():
    with Budget(600.0) as b:
        rf = ricci_flat(1, Dims(3, 4))
    gain = abs(rf.angle_gain)
    check("10b", gain > 4 * math.pi and b.ok,
          f"angle gain {gain:.3f} rad vs 4 pi = {4 * math.pi:.3f} at radius "
          f"{rf.radius[-1]:.0e}, {b}")


def test_criterion_11_survey_counts(run_cached):
    expect = {(2, 8): True, (3, 7): True, (4, 6): False, (5, 5): False}
    parts, ok = [], True
    t0 = time.perf_counter()
    for pair, nonround in expect.items():
        res = run_cached(Dims(*pair))
        ok &= (res.n_nonround > 0) is nonround
        parts.append(f"{pair}: {res.n_nonround} non-round")
    for dims in S10:
        products = [run_cached(dims, f"product{i}") for i in (1, 2)]
        ref = analytic_round_product_point(dims, 1)
        ok &= any(math.hypot(r.z - ref[0], r.delta - ref[1]) <= 1e-6
                  for r in products[0].records)
        nonround = sum(p.n_nonround for p in products)
        ok &= (nonround > 0) is (dims == Dims(2, 7))
        parts.append(f"products ({dims.d1},{dims.d2}): {nonround} non-round")
    deg = degenerate_pair(Dims(1, 8))
    ok &= deg.n_round == 1 and deg.n_nonround == 0 and len(deg.records) == 1
    parts.append(f"(1,8): {len(deg.records)} intersection")
    elapsed = time.perf_counter() - t0
    check("11", ok and elapsed <= 3600, "; ".join(parts) + f"; {elapsed:.1f} s")


DETERMINISM_RUNS = [
    ["fixed-points", "--d1", "2", "--d2", "7"],
    ["barrier", "--n", "9", "--delta", "0"],
    ["barrier", "--n", "9", "--delta", "0.001"],
    ["barrier", "--n", "10", "--delta", "0"],
    ["intersect", "--target", "sphere", "--d1", "4", "--d2", "5"],
    ["intersect", "--target", "product1", "--d1", "2", "--d2", "7"],
    ["survey", "--set", "degenerate-d1"],
]


def test_criterion_12_determinism(tmp_path):
    import json
    mismatched, files = [], 0
    for k, args in enumerate(DETERMINISM_RUNS):
        hashes = []
        for rep in ("a", "b"):
            out = tmp_path / f"{k}{rep}"
            assert cli.main(args + ["--out", str(out)]) == 0
            (manifest,) = out.glob("*.manifest.json")
            hashes.append(json.loads(manifest.read_text())["files"])
        files += len(hashes[0])
        if not hashes[0] or hashes[0] != hashes[1]:
            mismatched.append(" ".join(args))
    check("12", not mismatched,
          f"{files} files over {len(DETERMINISM_RUNS)} commands hash-identical"
          if not mismatched else f"mismatch in: {mismatched}")
