"""Command-line entry points.

    ale2fluid run <config> [--scheme M1|M2|M3] [--gravity-domain prev|next|half]
                           [--dt DT] [--end-time T] [--out DIR]
    ale2fluid gcl <config> [--out DIR]

Config files are `key = value` lines; see the README for the key list.
The environment variable ALE2FLUID_THREADS caps the parallelism of the
conservation-check suite.
"""

import argparse
import sys

from .config import ConfigError, load_config
from .scenarios import run_couette_gnbc, run_gcl_suite, run_gravity_relaxation


def _add_overrides(parser):
    parser.add_argument("--scheme", choices=["M1", "M2", "M3"],
                        help="mesh-motion scheme override")
    parser.add_argument("--gravity-domain", choices=["prev", "next", "half"],
                        dest="gravity_domain", help="body-force domain override")
    parser.add_argument("--dt", type=float, help="time step override")
    parser.add_argument("--end-time", type=float, dest="end_time",
                        help="final time override")
    parser.add_argument("--out", help="output directory override")


def _overrides(args):
    out = {}
    if args.scheme:
        out["motion_scheme"] = args.scheme
    if args.gravity_domain:
        out["gravity_domain"] = args.gravity_domain
    if args.dt is not None:
        out["dt"] = args.dt
    if args.end_time is not None:
        out["end_time"] = args.end_time
    if args.out:
        out["out"] = args.out
    return out


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="ale2fluid",
        description="Two-fluid moving-mesh flow scenarios and conservation checks")
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run a flow scenario from a config file")
    run_p.add_argument("config")
    _add_overrides(run_p)
    gcl_p = sub.add_parser("gcl", help="run the conservation-check suite")
    gcl_p.add_argument("config")
    _add_overrides(gcl_p)
    args = parser.parse_args(argv)

    try:
        overrides = _overrides(args)
        if args.command == "gcl":
            overrides["scenario"] = "gcl_suite"
        cfg = load_config(args.config, overrides)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.command == "gcl":
        rows, code = run_gcl_suite(cfg)
        for name, value, tol, ok, note in rows:
            status = "PASS" if ok else "FAIL"
            extra = f"  ({note})" if note else ""
            print(f"{status}  {name}: {value:.6e}{extra}")
        return code

    if cfg.scenario == "gravity_relaxation":
        record, summary = run_gravity_relaxation(cfg)
    elif cfg.scenario == "couette_gnbc":
        record, summary = run_couette_gnbc(cfg)
    else:
        print(f"error: `run` expects a flow scenario, got {cfg.scenario!r}",
              file=sys.stderr)
        return 2
    for key, val in summary.items():
        print(f"{key} = {val}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
