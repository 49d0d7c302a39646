"""Command-line interface.

Subcommands:
  sweep     full voltage sweep: tables, trajectories, tomography, work analysis
  validate  quadrature-only invariant suite (no SDE integration)
  coeffs    coefficient table only, exported as CSV + sidecar
  analyze   recompute thermodynamics from stored populations files

Exit codes: 0 success, 2 partial/check failure, 3 configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .errors import ConfigError, FlywheelError
from .sweep import RunConfig, load_config, reanalyze, run_sweep, validate_device
from .tables import build_table, find_negative_damping_interval, write_table_csv


def _base_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    if getattr(args, "out_dir", None):
        overrides["out_dir"] = args.out_dir
    if getattr(args, "seed", None) is not None:
        overrides["master_seed"] = args.seed
    if getattr(args, "steps", None) is not None:
        overrides["n_steps"] = args.steps
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = args.workers
    if getattr(args, "voltages", None):
        overrides["voltages"] = tuple(float(v) for v in args.voltages)
    if getattr(args, "no_figures", False):
        overrides["figures"] = False
    if getattr(args, "dump_trajectories", False):
        overrides["dump_trajectories"] = True
    return dataclasses.replace(config, **overrides) if overrides else config


def cmd_sweep(args) -> int:
    config = _base_config(args)
    result = run_sweep(config)
    for report in result.reports:
        print(f"V={report.voltage:g}: nbar={report.nbar:.4g} S={report.entropy:.4g} "
              f"g2={'-' if report.g2 is None else format(report.g2, '.4g')} "
              f"W_E={report.ergotropy:.4g} W_F={report.free_energy_work:.4g} "
              f"{'above' if report.above_threshold else 'below'} threshold")
    for voltage, error in result.failures.items():
        print(f"V={voltage:g}: FAILED ({error})", file=sys.stderr)
    print(f"summary: {result.summary_path}")
    print(f"manifest: {result.manifest_path}")
    return result.exit_code


def cmd_validate(args) -> int:
    config = _base_config(args)
    device = config.device
    if args.voltage is not None:
        device = device.at_voltage(args.voltage)
    report = validate_device(device)
    print(str(report))
    return 0 if report.passed else 2


def cmd_coeffs(args) -> int:
    config = _base_config(args)
    device = config.device.at_voltage(args.voltage)
    extent = config.table_extent * device.x_scale
    table = build_table(device, -extent, extent, config.table_points)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"coefficients_V_{args.voltage:g}.csv"
    write_table_csv(table, path, device)
    interval = find_negative_damping_interval(table)
    if interval:
        print(f"negative damping on x in [{interval[0]:.4g}, {interval[1]:.4g}]")
    else:
        print("no negative-damping interval")
    if config.figures:
        from .figures import plot_coefficients
        plot_coefficients(table, device, path.with_suffix(".png"))
    print(f"table: {path}")
    return 0


def cmd_analyze(args) -> int:
    target = reanalyze(args.out_dir, args.summary)
    print(f"summary: {target}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flywheel",
        description="Electromechanical oscillator sweeps: transport coefficients, "
                    "stochastic steady states, tomography and extractable work.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, steps=True):
        p.add_argument("--config", help="run configuration file (INI)")
        p.add_argument("--out-dir", help="output directory")
        p.add_argument("--seed", type=int, help="master seed")
        if steps:
            p.add_argument("--steps", type=int, help="SDE steps per voltage")
            p.add_argument("--workers", type=int, help="parallel voltage workers")

    p = sub.add_parser("sweep", help="run the full voltage sweep")
    common(p)
    p.add_argument("--voltages", nargs="+", help="override the voltage list")
    p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    p.add_argument("--dump-trajectories", action="store_true",
                   help="write decimated gzip trajectory dumps")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="run the quadrature invariant checks")
    common(p, steps=False)
    p.add_argument("--voltage", type=float, default=None,
                   help="bias the device before checking (default: config device)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("coeffs", help="build and export one coefficient table")
    common(p, steps=False)
    p.add_argument("--voltage", type=float, default=0.0)
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("analyze", help="recompute thermodynamics from stored populations")
    p.add_argument("out_dir", help="sweep output directory")
    p.add_argument("--summary", help="summary CSV destination (default: in place)")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 3
    except FlywheelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
