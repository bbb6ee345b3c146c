"""Command-line entry point: ``coho1 <subcommand> [options]``."""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import config as config_mod
from .barrier import (PHI_STAR, barrier_solution, checkpoint_report, find_margins,
                      min_angle_speed, monotonicity_violations)
from .equilibria import fixed_point_table
from .errors import (Coho1Error, ConfigError, NoConvergence, NonConvergentLimit,
                     RefinementDiverged)
from .integrator import HCrossing
from .intersect import INTERSECTIONS_HEADER, INTERSECTIONS_SCHEMA, IntersectionRecord
from .io import file_sha256, read_csv, write_csv, write_json
from .manifold import ShootSpec, shoot, shoot_frame, slice_curve
from .model import Dims
from .reconstruct import (SUMMARY_HEADER, boundary_slopes, einstein_residual, reconstruct,
                          summary, summary_text)
from .rotation import PlanarCurve, min_intersections, winding_angle, winding_limit
from .survey import SETS, SURVEY_HEADER, run_pair, survey

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_REFINE = 0, 2, 3, 4


class Run:
    """Output bookkeeping for one subcommand: emitted files and their hashes."""

    def __init__(self, cfg: config_mod.RunConfig, command: str, argv: list[str]):
        self.cfg = cfg
        self.command = command
        self.argv = argv
        self.out = cfg.out_dir
        self.out.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []
        self.stage = command
        self.t0 = time.perf_counter()
        self.extra: dict = {}

    def wants(self, fmt: str) -> bool:
        return fmt in self.cfg.output.formats

    def path(self, name: str) -> Path:
        p = self.out / name
        self.files.append(p)
        return p

    def csv(self, name, header, rows):
        if self.wants("csv"):
            write_csv(self.path(name), header, rows)

    def json(self, name, payload):
        if self.wants("json"):
            write_json(self.path(name), payload)

    def manifest(self, stem: str):
        payload = {
            "tool": "coho1", "version": __version__, "command": self.command,
            "argv": self.argv, "config": self.cfg.to_dict(),
            "tolerances": {"trace": self.cfg.to_dict()["trace"],
                           "refine": self.cfg.to_dict()["refine"],
                           "epsilon": self.cfg.epsilon},
            "files": {p.name: file_sha256(p) for p in sorted(set(self.files)) if p.exists()},
            "wall_clock_s": round(time.perf_counter() - self.t0, 3),
            **self.extra,
        }
        write_json(self.out / f"{stem}.manifest.json", payload)


def _dims_tag(d: Dims) -> str:
    return f"{d.d1}-{d.d2}"


def _curve_rows(path):
    header, rows = read_csv(path)
    ix, iy = header.index("Z"), header.index("Delta")
    return np.array([[float(r[ix]), float(r[iy])] for r in rows])


# subcommands -----------------------------------------------------------------------

def cmd_fixed_points(run: Run, args):
    dims = run.cfg.dims
    rows = fixed_point_table(dims)
    header = list(rows[0])
    run.csv(f"fixed_points_{_dims_tag(dims)}.csv", header, [[r[k] for k in header] for r in rows])
    for r in rows:
        print(f"{r['label']:>6}  Z={r['Z']: .12f}  Delta={r['Delta']: .12f}  H={r['H']: .0f}  "
              f"{r['classification']:<7} (cap: {r['cap_classification']})  "
              f"eig=({r['lambda1_re']:.6g}{r['lambda1_im']:+.6g}i, "
              f"{r['lambda2_re']:.6g}{r['lambda2_im']:+.6g}i, {r['lambda3_re']:.6g})")
    return f"fixed_points_{_dims_tag(dims)}"


def cmd_trace(run: Run, args):
    dims = run.cfg.dims
    eps = run.cfg.epsilon if args.epsilon is None else args.epsilon
    frame = shoot_frame(int(args.start[1]), dims)
    psi = args.psi if args.psi is not None else frame.psi_of_t(args.t)
    print(f"unstable arc at {args.start[:2]}+: psi in [{min(frame.psi_cap, frame.psi_face):.9g}, "
          f"{max(frame.psi_cap, frame.psi_face):.9g}]")
    args.psi = psi
    spec = ShootSpec(args.start, psi, eps, run.cfg.refine)
    tr = shoot(spec, dims, stop=[HCrossing(args.until_h)])
    stem = f"trace_{_dims_tag(dims)}_{args.start}_{psi:.6g}"
    if run.wants("csv"):
        tr.to_csv(run.path(stem + ".csv"))
    if run.wants("json"):
        tr.to_json(run.path(stem + ".json"))
    e = tr.end_state
    print(f"{args.start} psi={args.psi:g} eps={eps:g}: {tr.status} at s={tr.end_s:.10g}, "
          f"(Z, Delta, H)=({e.z:.12g}, {e.delta:.12g}, {e.h:.3g}), {len(tr.s)} steps")
    return stem


def cmd_slice(run: Run, args):
    dims = run.cfg.dims
    i, sign = int(args.manifold[1]), args.manifold[2]
    h = run.cfg.scan.h if args.h is None else args.h
    run.stage = "slice"
    curve = slice_curve(i, sign, h, dims, run.cfg.trace, run.cfg.epsilon,
                        min_samples=run.cfg.scan.min_samples,
                        r_trunc=run.cfg.scan.truncation_radius)
    stem = f"slice_{_dims_tag(dims)}_{args.manifold}_{h:g}"
    csv_path = run.out / (stem + ".csv")
    curve.to_csv(csv_path)
    run.files.append(csv_path)
    if run.wants("json"):
        curve.to_json(run.path(stem + ".json"))
    if run.wants("svg"):
        from .plotting import plot_slice
        pts = _curve_rows(csv_path)
        plot_slice(pts[:, 0], pts[:, 1], dims, run.path(stem + ".svg"), h,
                   label=f"{args.manifold} at H = {h:g}")
    print(f"{args.manifold} at H={h:g}: {len(curve)} samples, winding "
          f"{curve.winding:.9f} rad, flags {sorted(curve.flags)}")
    return stem


def cmd_winding(run: Run, args):
    header, rows = read_csv(args.curve)
    cols = ("x", "y") if "x" in header else ("Z", "Delta")
    ix, iy = header.index(cols[0]), header.index(cols[1])
    v = np.array([[float(r[ix]), float(r[iy])] for r in rows])
    v = v[np.hypot(v[:, 0], v[:, 1]) > 0.0]
    r_end = float(np.hypot(*v[-1]))
    to_origin = args.to_origin == "yes" or (args.to_origin == "auto" and r_end <= 1e-6)
    report = {"curve": str(args.curve), "vertices": len(v), "end_radius": r_end,
              "ends_at_origin": to_origin, "theta": winding_angle(PlanarCurve(v))}
    if to_origin:
        rep = winding_limit(PlanarCurve(np.vstack([v, [0.0, 0.0]]), ends_at_origin=True))
        report["truncation_radii"] = rep.radii.tolist()
        report["truncation_thetas"] = rep.thetas.tolist()
        report["monotone"] = rep.monotone
    report["min_intersections_from_theta"] = min_intersections(abs(report["theta"]))
    stem = f"winding_{Path(args.curve).stem}"
    run.json(stem + ".json", report)
    print(f"theta = {report['theta']:.12g} rad ({report['theta'] / (2 * math.pi):.6f} turns)")
    for r, t in zip(report.get("truncation_radii", []), report.get("truncation_thetas", [])):
        print(f"  r = {r:.0e}: theta = {t:.12g}")
    return stem


def cmd_barrier(run: Run, args):
    n = run.cfg.barrier.n if args.n is None else args.n
    delta = run.cfg.barrier.delta if args.delta is None else args.delta
    stem = f"barrier_n{n}_delta{delta:g}"
    if n == 9:
        rep = checkpoint_report(delta)
        payload = rep.to_dict()
        if args.margins:
            eps, delta0, _ = find_margins()
            payload["margins"] = {"epsilon": eps, "delta0": delta0}
            run.extra["barrier_margins"] = payload["margins"]
        run.json(stem + ".json", payload)
        sol = rep.solution
        print(rep.text())
        print(f"limit = {sol.phi_limit:.12f} (+- {sol.limit_uncertainty:.1e}), "
              f"arctan(9/4) = {PHI_STAR:.12f}; report {'PASS' if rep.passed else 'FAIL'}")
        if args.margins:
            print(f"margins: epsilon = {payload['margins']['epsilon']:.6g}, "
                  f"delta0 = {payload['margins']['delta0']:g}")
    else:
        count, vmin = monotonicity_violations(n)
        sol = barrier_solution(n, delta)
        payload = {"n": n, "delta": delta, "monotonicity_violations": count,
                   "min_sampled_speed": vmin, "min_speed": min_angle_speed(n),
                   "phi_limit": sol.phi_limit, "limit_uncertainty": sol.limit_uncertainty}
        run.json(stem + ".json", payload)
        print(f"n={n}: {count} sampled violations of monotonicity, min speed {vmin:.6g}")
    rows = sol.rows()
    run.csv(stem + ".csv", ["h", "phi"], rows)
    if run.wants("svg") and run.wants("csv"):
        from .plotting import plot_barrier
        _, data = read_csv(run.out / (stem + ".csv"))
        arr = np.array(data, dtype=float)
        plot_barrier(arr[:, 0], arr[:, 1], run.path(stem + ".svg"), f"n = {n}, delta = {delta:g}")
    return stem


def _write_pair(run: Run, res, stem: str):
    rows = [r.row() for r in res.records]
    run.csv(stem + ".csv", INTERSECTIONS_HEADER.split(","), rows)
    run.json(stem + ".json", {"schema": INTERSECTIONS_SCHEMA,
                              "records": [r.to_dict() for r in res.records],
                              "theta_a": res.theta_a, "theta_b": res.theta_b,
                              "notes": {k: list(v) for k, v in res.notes.items()}})
    if res.curves is None:
        return
    pa, pb = run.out / (stem + "_curveA.csv"), run.out / (stem + "_curveB.csv")
    res.curves.a.to_csv(pa)
    res.curves.b.to_csv(pb)
    run.files += [pa, pb]
    if run.wants("svg"):
        from .plotting import plot_intersections
        _, data = read_csv(run.out / (stem + ".csv")) if run.wants("csv") else (None, rows)
        pts = np.array([[float(r[5]), float(r[6])] for r in data]).reshape(-1, 2)
        cls = [r[8] for r in data]
        plot_intersections(_curve_rows(pa), _curve_rows(pb), pts, res.dims,
                           run.path(stem + ".svg"), res.target, cls)


def _print_pair(res):
    print(f"({res.dims.d1},{res.dims.d2}) {res.target}: {len(res.records)} intersections, "
          f"{res.n_round} round, {res.n_nonround} non-round; "
          f"theta_A + theta_B = {res.winding_sum:.6f} (4 pi = {4 * math.pi:.6f})")
    for r in res.records:
        print(f"   {r.classification:<15} Z={r.z: .12f} Delta={r.delta: .12f} "
              f"residual={r.residual:.2e}")


def cmd_intersect(run: Run, args):
    dims = run.cfg.dims
    run.stage = "intersect"
    res = run_pair(dims, args.target, run.cfg.trace, run.cfg.refine, run.cfg.epsilon,
                   run.cfg.scan.min_samples)
    bad = [r for r in res.records if not r.converged]
    stem = f"intersect_{_dims_tag(dims)}_{args.target}"
    _write_pair(run, res, stem)
    _print_pair(res)
    if bad:
        raise RefinementDiverged(f"{len(bad)} candidates did not converge")
    return stem


def _load_records(path) -> list[IntersectionRecord]:
    with open(path) as fh:
        data = json.load(fh)
    recs = data["records"] if isinstance(data, dict) else data
    return [IntersectionRecord.from_dict(d) for d in recs]


def cmd_reconstruct(run: Run, args):
    recs = _load_records(args.record)
    if args.index is not None:
        rec = recs[args.index]
    else:
        nonround = [r for r in recs if r.classification == "NonRound"]
        rec = (nonround or recs)[0]
    run.stage = "reconstruct"
    prof = reconstruct(rec, args.lam, run.cfg.refine)
    row = summary(prof)
    res = einstein_residual(prof)
    k0, k1 = boundary_slopes(prof)
    stem = f"profile_{rec.d1}-{rec.d2}_{rec.classification}"
    run.csv(stem + ".csv", "t,f1,f1dot,f2,f2dot".split(","), prof.rows())
    run.csv(stem + "_summary.csv", SUMMARY_HEADER.split(","),
            [[row[k] for k in SUMMARY_HEADER.split(",")]])
    run.extra["checks"] = {"einstein_residual": res, "slope_start": k0, "slope_end": k1}
    if run.wants("svg") and run.wants("csv"):
        from .plotting import plot_profile
        _, data = read_csv(run.out / (stem + ".csv"))
        arr = np.array(data, dtype=float)
        plot_profile(arr[:, 0], arr[:, 1], arr[:, 3], run.path(stem + ".svg"),
                     f"({rec.d1}, {rec.d2}) {rec.classification}, lambda = {prof.lam:g}")
    print(summary_text([row]))
    print(f"Einstein residual {res:.3e}; boundary slopes {k0:.6f}, {k1:.6f}; T = {prof.T:.12g}")
    return stem


def cmd_survey(run: Run, args):
    run.stage = f"survey {args.set}"
    results = survey(args.set, trace_cfg=run.cfg.trace, refine_cfg=run.cfg.refine,
                     eps=run.cfg.epsilon, min_samples=run.cfg.scan.min_samples)
    for res in results:
        _write_pair(run, res, f"survey_{args.set}_{_dims_tag(res.dims)}_{res.target}")
        _print_pair(res)
    run.csv(f"survey_{args.set}.csv", SURVEY_HEADER.split(","), [r.row() for r in results])
    if args.set in ("s10", "s11") and not args.no_profiles:
        rows = []
        run.stage = f"survey {args.set} reconstruct"
        picked = [r for res in results for r in res.records if r.classification == "NonRound"]
        rounds = [r for res in results for r in res.records if r.classification == "Round"]
        if rounds:
            picked.append(rounds[-1])
        for rec in picked:
            rows.append(summary(reconstruct(rec, None, run.cfg.refine)))
        run.csv(f"survey_{args.set}_metrics.csv", SUMMARY_HEADER.split(","),
                [[r[k] for k in SUMMARY_HEADER.split(",")] for r in rows])
        print(summary_text(rows))
    return f"survey_{args.set}"


# parser and dispatch -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--d1", type=int)
    common.add_argument("--d2", type=int)

    p = argparse.ArgumentParser(prog="coho1", description=__doc__)
    p.add_argument("--version", action="version", version=f"coho1 {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("fixed-points", parents=[common], help="fixed-point catalogue")

    s = sub.add_parser("trace", parents=[common], help="integrate one shot")
    s.add_argument("--from", dest="start", required=True, choices=["p1+", "p2+", "p1-", "p2-"])
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--psi", type=float, help="shooting angle in the unstable plane")
    g.add_argument("--t", type=float, help="position along the unstable arc, 0 (cap) to 1 (face)")
    s.add_argument("--epsilon", type=float)
    s.add_argument("--until-h", type=float, default=0.0)

    s = sub.add_parser("slice", parents=[common], help="slice curve of a manifold")
    s.add_argument("--manifold", required=True, choices=["m1+", "m2+", "m1-", "m2-"])
    s.add_argument("--h", type=float)

    s = sub.add_parser("winding", parents=[common], help="winding report for a curve CSV")
    s.add_argument("--curve", type=Path, required=True)
    s.add_argument("--to-origin", choices=["auto", "yes", "no"], default="auto")

    s = sub.add_parser("barrier", parents=[common], help="barrier checkpoints")
    s.add_argument("--n", type=int)
    s.add_argument("--delta", type=float)
    s.add_argument("--margins", action="store_true", help="also scan the delta grid")

    s = sub.add_parser("intersect", parents=[common], help="intersections at H = 0")
    s.add_argument("--target", choices=["sphere", "product1", "product2"], default="sphere")

    s = sub.add_parser("reconstruct", parents=[common], help="metric profile of a record")
    s.add_argument("--record", type=Path, required=True, help="intersections JSON file")
    s.add_argument("--index", type=int)
    s.add_argument("--lambda", dest="lam", type=float)

    s = sub.add_parser("survey", parents=[common], help="batch over dimension pairs")
    s.add_argument("--set", required=True, choices=sorted(SETS))
    s.add_argument("--no-profiles", action="store_true")
    return p


COMMANDS = {
    "fixed-points": cmd_fixed_points, "trace": cmd_trace, "slice": cmd_slice,
    "winding": cmd_winding, "barrier": cmd_barrier, "intersect": cmd_intersect,
    "reconstruct": cmd_reconstruct, "survey": cmd_survey,
}


def _resolve_config(args) -> config_mod.RunConfig:
    cfg = config_mod.load(args.config) if args.config else config_mod.RunConfig()
    if args.d1 is not None or args.d2 is not None:
        try:
            dims = Dims(args.d1 if args.d1 is not None else cfg.dims.d1,
                        args.d2 if args.d2 is not None else cfg.dims.d2)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        cfg = replace(cfg, dims=dims)
    if args.out is not None:
        cfg = replace(cfg, output=replace(cfg.output, directory=str(args.out)))
    return cfg


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
    except ConfigError as exc:
        print(f"coho1: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    run = Run(cfg, args.command, argv)
    try:
        stem = COMMANDS[args.command](run, args)
    except ConfigError as exc:
        print(f"coho1: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RefinementDiverged, NoConvergence) as exc:
        print(f"coho1: stage {run.stage}: refinement did not converge: {exc}", file=sys.stderr)
        return EXIT_REFINE
    except (Coho1Error, ValueError, FloatingPointError) as exc:
        kind = "limit did not converge" if isinstance(exc, NonConvergentLimit) else \
            type(exc).__name__
        print(f"coho1: stage {run.stage}: numerical failure ({kind}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    run.manifest(stem)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
