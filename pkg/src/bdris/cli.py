"""Command-line entry point: ``bdris <subcommand> [options]``.

Exit codes: 0 success, 2 invalid configuration, 3 unsupported Hadamard
order, 4 I/O failure.
"""

import argparse
import logging
import sys

from . import harness
from .channel_model import InvalidParameterError
from .pattern_builder import UnsupportedOrderError, make_plan, write_matrix

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_HADAMARD = 3
EXIT_IO = 4

_SUBCOMMANDS = {
    "mse-sweep": "normalized channel-estimation MSE versus training SNR",
    "mimo-rate": "point-to-point MIMO rate versus surface size",
    "mumiso-sumrate": "multi-sector MU-MISO sum-rate versus total elements",
    "se-tradeoff": "spectral efficiency versus tile size and frame length",
}


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser():
    parser = argparse.ArgumentParser(prog="bdris", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in _SUBCOMMANDS.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", help="flat TOML file overriding the built-in grid")
        p.add_argument("--seed", type=_u64, help="master seed (unsigned 64-bit)")
        p.add_argument("--out", help="CSV destination (default: stdout)")
        p.add_argument("--trials", type=_positive, help="Monte Carlo trials per grid point")
        p.add_argument("--workers", type=_positive, help="worker processes (default 1)")
        p.add_argument("--paper-scale", action="store_true",
                       help="use the full-size grids and trial counts of the original study")
    p = sub.add_parser("export-pattern", help="write a training pattern matrix as text")
    p.add_argument("--kind", default="dft", choices=("dft", "hadamard", "random"))
    p.add_argument("--group-size", type=_positive, default=2)
    p.add_argument("--num-tiles", type=_positive, default=2)
    p.add_argument("--users", type=_positive, default=1, help="antennas sending pilots (K)")
    p.add_argument("--what", default="phi", choices=("phi", "pilots", "codes"),
                   help="pattern matrix, pilot matrix or per-slot sensing codes")
    p.add_argument("--seed", type=_u64, default=0, help="seed for the random pattern")
    p.add_argument("--out", help="destination file (default: stdout)")
    return parser


def _export(args):
    plan = make_plan(args.kind, args.group_size, args.num_tiles, args.users,
                     seed=args.seed if args.kind == "random" else None)
    mat = {"phi": plan.Phi, "pilots": plan.X, "codes": plan.codes}[args.what]
    write_matrix(args.out or sys.stdout, mat)


def _experiment(args):
    scenario = args.command.replace("-", "_")
    overrides = dict(seed=args.seed, trials=args.trials, workers=args.workers, out=args.out)
    if args.config:
        cfg = harness.load_config(args.config, scenario=scenario,
                                  paper_scale=args.paper_scale, **overrides)
    else:
        cfg = harness.make_config(scenario=scenario, paper_scale=args.paper_scale, **overrides)
    logging.getLogger(__name__).info("running %s: %d grid points x %d trials", scenario,
                                     len(harness.grid_points(cfg)), cfg.trials)
    table = harness.run(cfg)
    if cfg.out:
        harness.write_csv(table, cfg.out)
    else:
        sys.stdout.write(harness.format_csv(table))


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "export-pattern":
            _export(args)
        else:
            _experiment(args)
    except UnsupportedOrderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_HADAMARD
    except (harness.ConfigError, InvalidParameterError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
