"""Command-line entry point.

Usage::

    oqt infer --config configs/ramsey.json [--seed N] [--out DIR] [--particles N]
    oqt rb --seed 7 --out out/rb
    oqt report --out out/ramsey

Exit status is 0 on success, 2 for invalid configuration or input files and
3 when inference fails (every particle ruled out by the data).  The thread
count of the likelihood kernels comes from ``OQT_NUM_THREADS``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import ConfigError, RunConfig, config_from_dict, parse_config
from .smc import InferenceFailure

EXIT_USAGE = 2
EXIT_INFERENCE = 3

log = logging.getLogger("oqt")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oqt", description="Operational tomography runs.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for mode in ("simulate", "infer", "rb", "dynamics", "statetomo"):
        p = sub.add_parser(mode, help=f"run in {mode} mode")
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="override the output directory")
        p.add_argument("--particles", type=int, help="override the particle count")
    p = sub.add_parser("report", help="summarize a finished run directory")
    p.add_argument("--out", required=True, help="run directory containing posterior.json")
    p.add_argument("--config", help="unused; accepted for symmetry")
    p.add_argument("--seed", type=int, help="unused; accepted for symmetry")
    p.add_argument("--particles", type=int, help="unused; accepted for symmetry")
    return parser


def load_config(args) -> RunConfig:
    if args.config:
        cfg = parse_config(args.config)
        doc = cfg.to_dict()
    else:
        if args.seed is None:
            raise ConfigError("seed: required (pass --seed or --config)")
        doc = {"version": 1, "seed": args.seed}
    doc["mode"] = args.command
    if args.command in ("rb", "statetomo", "dynamics"):
        doc["protocol"] = args.command
    for key, value in (("seed", args.seed), ("output_dir", args.out), ("particles", args.particles)):
        if value is not None:
            doc[key] = value
    return config_from_dict(doc)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from . import runner

    try:
        if args.command == "report":
            result = runner.report(args.out)
        else:
            result = runner.run(load_config(args))
    except InferenceFailure as exc:
        print(f"oqt: inference failed: {exc}", file=sys.stderr)
        return EXIT_INFERENCE
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"oqt: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(json.dumps(result, sort_keys=True, default=float))
    return 0


if __name__ == "__main__":
    sys.exit(main())
