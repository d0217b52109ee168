"""Command line entry point: ``kdeis <experiment> [options]``."""

import argparse
import sys
import time

from . import __version__
from .errors import ConfigError, KdeisError
from .experiments import config_dict, load_config, run_experiment
from .plotting import plot_agg
from .report import write_outputs

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 2, 3

_DEFAULT_NOTE = (
    "N_grid and n_grid are package defaults (geometric grids around N=200, n=2000); "
    "no grid values are prescribed for these panels."
)


def _common(p):
    p.add_argument("--config", metavar="PATH", help="INI file with [common] and per-experiment sections")
    p.add_argument("--seed", type=int, metavar="U64", help="master seed (default 0)")
    p.add_argument("--reps", type=int, metavar="INT", help="replications per grid point")
    p.add_argument("--out", metavar="DIR", help="output directory (default .)")
    p.add_argument("--threads", type=int, metavar="INT", help="worker threads")
    p.add_argument("--emit-svg", action="store_true", help="also write <experiment>.svg")
    p.add_argument("--strict", action="store_true", help="exit 3 if any check column reads fail")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key, e.g. --set N_grid=50,100,200")


def build_parser():
    parser = argparse.ArgumentParser(prog="kdeis", description="KDE-based importance sampling experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("fig3", help="MAE panels for the Laplace / Cauchy problem")
    p.add_argument("panel", choices=("left", "mid", "right"))
    _common(p)
    p = sub.add_parser("rates", help="empirical KDE MISE / MIAE rates")
    p.add_argument("norm", choices=("mise", "miae"))
    _common(p)
    for name, text in (("bounds", "empirical errors against the error bounds"),
                       ("lowerbound", "bimodal lower-bound construction"),
                       ("estimate", "replicated single-configuration estimates")):
        _common(sub.add_parser(name, help=text))
    return parser


def _experiment(args):
    if args.command == "fig3":
        return f"fig3_{args.panel}"
    if args.command == "rates":
        return f"rates_{args.norm}"
    return args.command


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    experiment = _experiment(args)
    overrides = {"master_seed": args.seed, "reps": args.reps, "output_dir": args.out,
                 "threads": args.threads}
    try:
        for item in args.set:
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            overrides[key.strip()] = value.strip()
        config = load_config(experiment, args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    start = time.perf_counter()
    try:
        raw, agg = run_experiment(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KdeisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    meta = {"config": config_dict(config), "version": __version__,
            "grids": "package defaults" if config.grid_defaults else "user supplied"}
    if config.grid_defaults and experiment.startswith("fig3"):
        meta["note"] = _DEFAULT_NOTE
    paths = write_outputs(config.output_dir, experiment, raw, agg, meta)
    if args.emit_svg:
        svg = paths["agg"].with_name(f"{experiment}.svg")
        if plot_agg(agg, svg, experiment):
            paths["svg"] = svg
    failed = [r for r in agg if r.get("check") == "fail"]
    elapsed = time.perf_counter() - start
    for kind, path in paths.items():
        print(f"{kind}: {path}")
    print(f"{len(agg)} aggregate rows, {len(failed)} failed checks, {elapsed:.1f} s")
    if args.strict and failed:
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
