"""Command line entry point: ``mvsde {drift-gen,density-compare,rate-sweep}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import PROFILES, ConfigError, parse_config, parse_override
from .euler import EulerPathError
from .experiments import NumericalFailure, run_density_compare, run_drift_gen, run_rate_sweep
from .fokker_planck import FpSolverError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
OUTPUT_ENV = "MVSDE_OUTPUT_DIR"

PIPELINES = {
    "drift-gen": run_drift_gen,
    "density-compare": run_density_compare,
    "rate-sweep": run_rate_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mvsde", description="Euler schemes for McKean-Vlasov SDEs with rough drift.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in PIPELINES.items():
        s = sub.add_parser(name, help=(fn.__doc__ or "").strip().splitlines()[0] if fn.__doc__ else None)
        s.add_argument("-c", "--config", type=Path, help="INI-style config file")
        s.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key (repeatable)")
        s.add_argument("--profile", choices=sorted(PROFILES))
        s.add_argument("-o", "--out", type=Path, default=Path("out") / name,
                       help=f"output directory (${OUTPUT_ENV} takes precedence)")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        overrides = dict(parse_override(s) for s in args.overrides)
        text = args.config.read_text() if args.config else ""
        cfg = parse_config(text, overrides, args.profile)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(os.environ.get(OUTPUT_ENV) or args.out)
    try:
        result = PIPELINES[args.command](cfg)
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, FpSolverError, EulerPathError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    for f in result.write(out):
        print(f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
