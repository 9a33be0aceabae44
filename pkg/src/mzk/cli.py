"""Command-line entry point: ``mzk <subcommand> ...``."""

from __future__ import annotations

import argparse
import concurrent.futures as cf
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__


def _global_flags(defaults: bool) -> argparse.ArgumentParser:
    kw = {} if defaults else {"default": argparse.SUPPRESS}
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="run configuration (JSON)", **({"default": None} if defaults else kw))
    p.add_argument("--out", type=Path, help="output root directory", **({"default": Path("out")} if defaults else kw))
    p.add_argument("--jobs", type=int, help="presets run concurrently", **({"default": 1} if defaults else kw))
    p.add_argument("--seed", type=int, help="override preset/random seeds", **({"default": None} if defaults else kw))
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mzk", description=__doc__, parents=[_global_flags(True)])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _global_flags(False)

    sub.add_parser("simulate", parents=[common], help="run a configuration and write norms and snapshots")

    p = sub.add_parser("report", parents=[common], help="norms CSV from a configuration or a snapshot directory")
    p.add_argument("--snapshots", type=Path, help="directory of .mzkf files (instead of --config)")
    p.add_argument("--output", type=Path, help="CSV path (default: stdout)")

    p = sub.add_parser("decay-fit", parents=[common], help="fit a power law to a norms.csv column")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--column", default="linf")
    p.add_argument("--window", type=float, nargs=2, default=(4.0, math.inf), metavar=("T_LO", "T_HI"))

    p = sub.add_parser("scatter-report", parents=[common], help="dyadic profile increments from snapshots")
    p.add_argument("--snapshots", type=Path, required=True)
    p.add_argument("--window", type=float, nargs=2, default=(4.0, math.inf), metavar=("T_LO", "T_HI"))
    p.add_argument("--linear", action="store_true", help="snapshots come from a linear-only run")

    p = sub.add_parser("airy-check", parents=[common], help="spectral vs closed-form Airy kernel (CSV)")
    p.add_argument("--times", type=float, nargs="+", default=[1.0, 8.0])
    p.add_argument("--x-max", type=float, default=20.0)
    p.add_argument("--points", type=int, default=4001)

    p = sub.add_parser("kernel-weaklp", parents=[common], help="weak-L^p scaling of the 2D kernel (CSV)")
    p.add_argument("--times", type=float, nargs="+", default=[1.0, 8.0, 64.0])
    p.add_argument("--p", type=float, nargs="+", default=[4.0, 6.0])

    p = sub.add_parser("resonance-scan", parents=[common], help="space-time resonance scan (JSON)")
    p.add_argument("--rho-grid", type=float, nargs="+", default=[-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0])
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--random", type=int, default=10000)

    p = sub.add_parser("identity-check", parents=[common], help="singular identities on random inputs (JSON)")
    p.add_argument("--n", type=int, default=10000)

    p = sub.add_parser("duhamel-oracle", parents=[common], help="pseudospectral cubic term vs direct sum")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--s", type=float, default=1.0)

    p = sub.add_parser("preset", parents=[common], help="run named acceptance presets")
    p.add_argument("name", nargs="?")
    p.add_argument("--all", action="store_true")
    p.add_argument("--list", action="store_true")
    return parser


def _emit_csv(columns, rows, output=None) -> None:
    from .io import write_csv

    if output is not None:
        write_csv(output, columns, rows)
        return
    import csv

    w = csv.writer(sys.stdout, lineterminator="\r\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(float(r[c])) if isinstance(r[c], (float, np.floating)) else r[c] for c in columns])


def _print_json(obj) -> None:
    from .io import dumps_json

    print(dumps_json(obj))


def _require_config(args):
    from .config import parse_config

    if args.config is None:
        raise SystemExit("error: --config is required for this subcommand")
    return parse_config(args.config)


def _load_snapshots(directory: Path):
    from .io import read_snapshot

    files = sorted(directory.glob("*.mzkf"))
    if not files:
        raise SystemExit(f"error: no .mzkf files in {directory}")
    return sorted((read_snapshot(f) for f in files), key=lambda f: f.time)


def cmd_simulate(args) -> int:
    from .diagnostics import NormReport
    from .presets import PresetContext, _stamp, _write_run
    from .io import write_json
    from .solver import SimulationAborted, simulate

    cfg = _require_config(args)
    out_dir = args.out / "simulate" / _stamp()
    out_dir.mkdir(parents=True)
    ctx = PresetContext(out_dir, args.seed or 0)
    abort = None
    try:
        traj = simulate(cfg)
    except SimulationAborted as exc:
        traj, abort = exc.trajectory, {"reason": exc.reason, "diagnostics": exc.diagnostics}
    _write_run(ctx, cfg, traj)
    write_json(out_dir / "manifest.json", {"command": "simulate", "tool_version": __version__,
                                           "config_hash": cfg.hash(), "outputs": ctx.outputs,
                                           "columns": NormReport.columns(), "aborted": abort})
    print(out_dir)
    if abort is not None:
        print(f"simulation aborted: {abort['reason']} {abort['diagnostics']}", file=sys.stderr)
        return 3
    return 0


def _reports_from_snapshots(fields, nonlinear: bool = True):
    from .diagnostics import norms
    from .linear import profile_of

    out = []
    for f in fields:
        prof = profile_of(f)
        out.append((prof, norms(f, prof, nonlinear=nonlinear)))
    return out


def cmd_report(args) -> int:
    from .diagnostics import NormReport
    from .solver import simulate

    if args.snapshots is not None:
        reports = [r for _, r in _reports_from_snapshots(_load_snapshots(args.snapshots))]
    else:
        reports = [p.norms for p in simulate(_require_config(args))]
    _emit_csv(NormReport.columns(), [r.as_row() for r in reports], args.output)
    return 0


def cmd_decay_fit(args) -> int:
    from .diagnostics import decay_fit
    from .io import read_csv

    rows = read_csv(args.input)
    if not rows or args.column not in rows[0]:
        raise SystemExit(f"error: column {args.column!r} not in {args.input}")
    series = [(float(r["t"]), float(r[args.column])) for r in rows]
    _print_json(decay_fit(series, tuple(args.window)).to_json())
    return 0


def cmd_scatter_report(args) -> int:
    from .diagnostics import scattering_report

    pairs = _reports_from_snapshots(_load_snapshots(args.snapshots), nonlinear=not args.linear)
    rep = scattering_report([p for p, _ in pairs], [(r.t, r.dtf_h2) for _, r in pairs], tuple(args.window))
    _print_json(rep.to_json())
    return 0


def cmd_airy_check(args) -> int:
    from .airy import airy_ai_quadrature
    from .linear import airy_kernel_closed, airy_kernel_spectral

    rows = []
    x = np.linspace(-args.x_max, args.x_max, args.points)
    for t in args.times:
        err = float(np.max(np.abs(airy_kernel_spectral(t, x) - airy_kernel_closed(t, x))))
        rows.append({"t": t, "x_max": args.x_max, "n_points": args.points, "max_abs_error": err,
                     "ai0_error": abs(float(airy_ai_quadrature(0.0)) - float(airy_kernel_closed(1 / 3, 0.0)))})
    _emit_csv(["t", "x_max", "n_points", "max_abs_error", "ai0_error"], rows)
    return 0


def cmd_kernel_weaklp(args) -> int:
    from .linear import kernel_weak_lp_scaling

    rows = kernel_weak_lp_scaling(args.times, args.p)
    _emit_csv(["t", "p", "quasi_norm", "predicted_ratio", "measured_ratio", "deviation"], rows)
    return 0


def cmd_resonance_scan(args) -> int:
    from .resonance import resonance_scan

    rep = resonance_scan(args.rho_grid, args.tol, n_random=args.random, seed=args.seed or 0)
    keys = ["n_points", "n_space", "n_time", "n_space_time", "n_predicate_mismatches",
            "max_m_gradxi_on_resonances", "n_off_manifold", "n_off_manifold_flagged_space"]
    _print_json({k: rep[k] for k in keys})
    return 0 if rep["n_predicate_mismatches"] == 0 else 1


def cmd_identity_check(args) -> int:
    from .resonance import identity_check

    _print_json(identity_check(args.n, seed=args.seed or 0))
    return 0


def cmd_duhamel_oracle(args) -> int:
    from .solver import oracle_equivalence

    res = oracle_equivalence(args.n, args.trials, args.s, seed=args.seed or 0)
    print(f"max relative deviation: {res['max_relative_deviation']:.3e}")
    return 0


def _run_group(names, out, seed):
    from .presets import run_preset

    return [run_preset(n, out, seed=seed).to_json() for n in names]


def cmd_preset(args) -> int:
    from .presets import PRESETS, run_preset

    if args.list:
        for p in PRESETS.values():
            print(f"{p.name:22s} criterion {p.criterion:2d}  {p.description}")
        return 0
    if args.all:
        names = list(PRESETS)
    elif args.name:
        if args.name not in PRESETS:
            print(f"error: unknown preset {args.name!r}; available: {', '.join(PRESETS)}", file=sys.stderr)
            return 2
        names = [args.name]
    else:
        print("error: give a preset name or --all", file=sys.stderr)
        return 2
    # presets sharing a simulation stay in one job so the run is computed once
    groups: dict[str, list[str]] = {}
    for n in names:
        groups.setdefault(PRESETS[n].group or n, []).append(n)
    manifests = []
    if args.jobs > 1 and len(groups) > 1:
        with cf.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futs = [pool.submit(_run_group, g, args.out, args.seed) for g in groups.values()]
            for f in futs:
                manifests.extend(f.result())
    else:
        for g in groups.values():
            manifests.extend(m.to_json() for m in (run_preset(n, args.out, seed=args.seed) for n in g))
    ok = True
    for m in sorted(manifests, key=lambda m: m["criterion"]):
        ok &= m["passed"]
        print(f"[{'PASS' if m['passed'] else 'FAIL'}] {m['preset']:22s} criterion {m['criterion']:2d}  "
              f"{m['wall_seconds']:7.1f}s  {m['out_dir']}")
    return 0 if ok else 1


COMMANDS = {
    "simulate": cmd_simulate,
    "report": cmd_report,
    "decay-fit": cmd_decay_fit,
    "scatter-report": cmd_scatter_report,
    "airy-check": cmd_airy_check,
    "kernel-weaklp": cmd_kernel_weaklp,
    "resonance-scan": cmd_resonance_scan,
    "identity-check": cmd_identity_check,
    "duhamel-oracle": cmd_duhamel_oracle,
    "preset": cmd_preset,
}


def main(argv=None) -> int:
    from .config import ConfigError
    from .solver import SimulationAborted

    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SimulationAborted as exc:
        print(f"simulation aborted: {exc.reason} {exc.diagnostics}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
