"""Command-line surface: capwalk green|cap|simulate|estimate|construct|experiment."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from ._version import __version__
from .capacity import capacity_bounds, equilibrium_measure, point_set
from .constructions import cube_blueprint, realize_deterministic, sphere_blueprint
from .estimator import capacity_mc, capacity_mc_subsampled
from .experiments import load_config, run_suite, write_records
from .green import default_table
from .walk import WalkPath, simulate_srw


def _read_points(path: str) -> np.ndarray:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append([int(tok) for tok in line.split()])
    return np.array(rows, dtype=np.int64)


def _cmd_green(args) -> int:
    table = default_table()
    value = table((args.x, args.y, args.z))
    print(f"G({args.x}, {args.y}, {args.z}) = {value:.12f}")
    if args.report:
        for key in sorted(table.build_report):
            print(f"  {key}: {table.build_report[key]:.6g}")
    return 0


def _cmd_cap(args) -> int:
    pts = point_set(_read_points(args.points))
    measure = equilibrium_measure(pts)
    lo, hi = capacity_bounds(pts)
    out = args.out or sys.stdout
    close = out is not sys.stdout
    fh = open(out, "w", encoding="utf-8") if close else out
    try:
        fh.write("x,y,z,esc\n")
        for p, esc in zip(pts.points, measure.esc):
            fh.write(f"{p[0]},{p[1]},{p[2]},{esc:.12g}\n")
        fh.write(f"# cap,{measure.cap:.12g}\n")
        fh.write(f"# lower,{lo:.12g}\n")
        fh.write(f"# upper,{hi:.12g}\n")
        fh.write(f"# residual,{measure.solver_residual:.3g}\n")
    finally:
        if close:
            fh.close()
    if close:
        print(f"cap = {measure.cap:.9g} (bounds [{lo:.9g}, {hi:.9g}]) -> {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    path = simulate_srw(args.n, args.seed)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(path.to_text())
    print(
        f"n={path.n} D_n={path.diameter:.3f} fresh={int(path.fresh.sum())} "
        f"range={path.range_set.size}"
    )
    return 0


def _cmd_estimate(args) -> int:
    if args.path:
        path = WalkPath.from_text(open(args.path, "r", encoding="utf-8").read())
        target = path.range_set
    else:
        target = point_set(_read_points(args.points))
    if args.fraction < 1.0:
        est = capacity_mc_subsampled(
            target,
            fraction=args.fraction,
            kill_radius_factor=args.kill_radius_factor,
            samples_per_point=args.samples,
            seed=args.seed,
        )
    else:
        est = capacity_mc(
            target,
            kill_radius_factor=args.kill_radius_factor,
            samples_per_point=args.samples,
            seed=args.seed,
        )
    print("value,stderr,samples_per_point,kill_radius_factor,correction,subsample_fraction")
    print(
        f"{est.value:.9g},{est.stderr:.3g},{est.samples_per_point},"
        f"{est.kill_radius_factor},{est.correction:.6g},{est.subsample_fraction}"
    )
    return 0


def _cmd_construct(args) -> int:
    if args.kind == "cube":
        bp = cube_blueprint(args.n, args.k_n, kappa=args.kappa, delta=args.delta)
    else:
        bp = sphere_blueprint(
            args.n, args.k_n, m=args.m, eps=args.eps, kappa=args.kappa, delta=args.delta
        )
    print(f"{bp.kind} blueprint: {bp.edge_count} edges, t_f = {bp.t_final}")
    for warning in bp.warnings:
        print(f"  warning: {warning}")
    if args.blueprint_out:
        with open(args.blueprint_out, "w", encoding="utf-8") as fh:
            fh.write(bp.to_text())
    if args.realize:
        path = realize_deterministic(bp)
        print(f"realized: n={path.n} D_n={path.diameter:.3f} range={path.range_set.size}")
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(path.to_text())
    return 0


def _cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    records = run_suite(cfg)
    out = args.out or cfg.out_path or "records.jsonl"
    fmt = "csv" if out.endswith(".csv") else "jsonl"
    write_records(records, out, fmt)
    failures = sum(1 for r in records if r.error)
    print(f"{len(records)} records -> {out} ({failures} failures)")
    return 0 if failures == 0 else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="capwalk", description=__doc__)
    parser.add_argument("--version", action="version", version=f"capwalk {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("green", help="print G(x) and the table build report")
    p.add_argument("x", type=int)
    p.add_argument("y", type=int)
    p.add_argument("z", type=int)
    p.add_argument("--report", action="store_true")
    p.set_defaults(func=_cmd_green)

    p = sub.add_parser("cap", help="exact capacity of a point-list file (x y z per line)")
    p.add_argument("points")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_cap)

    p = sub.add_parser("simulate", help="simulate an SRW and print summary")
    p.add_argument("n", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="write the path (text format)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("estimate", help="Monte Carlo capacity of a path or point set")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--path", default=None, help="path file (text format)")
    group.add_argument("--points", default=None, help="point-list file")
    p.add_argument("--fraction", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--kill-radius-factor", type=float, default=50.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("construct", help="build a cube/sphere blueprint and realize it")
    p.add_argument("kind", choices=["cube", "sphere"])
    p.add_argument("n", type=int)
    p.add_argument("k_n", type=float)
    p.add_argument("--m", type=int, default=8)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--kappa", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--realize", action="store_true")
    p.add_argument("--blueprint-out", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_construct)

    p = sub.add_parser("experiment", help="run a seeded suite from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_experiment)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
