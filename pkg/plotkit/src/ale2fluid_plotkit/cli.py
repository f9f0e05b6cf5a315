"""Command-line figure regeneration.

    ale2fluid-plot energy <run_dir>... --columns balance,euler_diss --out fig.png
    ale2fluid-plot interface <run_dir>... [--steps 0,last] --out fig.png
    ale2fluid-plot wallvel <run_dir>... [--steps last] --out fig.png
"""

import argparse
import sys

from .artifacts import ArtifactError, load_run
from .figures import plot_energy_balance, plot_interface_profiles, \
    plot_wall_velocity


def _steps_arg(raw):
    if raw is None:
        return None
    return [s if s == "last" else int(s) for s in raw.split(",") if s]


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="ale2fluid-plot",
        description="Regenerate figures from ale2fluid run directories")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind, help_text in (("energy", "CSV column time series"),
                            ("interface", "interface profiles"),
                            ("wallvel", "wall velocity against x")):
        p = sub.add_parser(kind, help=help_text)
        p.add_argument("run_dirs", nargs="+")
        p.add_argument("--out", required=True)
        if kind == "energy":
            p.add_argument("--columns", required=True,
                           help="comma-separated CSV columns")
        else:
            p.add_argument("--steps", default="last",
                           help="comma-separated step numbers or `last`")
    args = parser.parse_args(argv)

    try:
        runs = [load_run(d) for d in args.run_dirs]
        if args.kind == "energy":
            columns = [c for c in args.columns.split(",") if c]
            plot_energy_balance(runs, columns, args.out)
        elif args.kind == "interface":
            plot_interface_profiles(runs, _steps_arg(args.steps), args.out)
        else:
            plot_wall_velocity(runs, _steps_arg(args.steps), args.out)
    except (ArtifactError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
