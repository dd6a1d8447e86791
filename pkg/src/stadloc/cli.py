"""Command-line entry point: ``stadloc <stage|pipeline> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import load_config
from .errors import ConfigError, InputError, StadlocError
from .pipeline import STAGES, Run

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

log = logging.getLogger("stadloc")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stadloc", description="Localization pipeline for the stadium billiard.")
    p.add_argument("command", choices=STAGES + ("pipeline",))
    p.add_argument("--config", metavar="PATH", help="JSON run configuration")
    p.add_argument("--out", metavar="DIR", help="output root (default: out)")
    p.add_argument("--jobs", type=int, metavar="N", help="worker processes")
    p.add_argument("--seed", type=int, metavar="U64", help="master seed")
    p.add_argument("--run-id", help="run directory name under --out")
    p.add_argument("--epsilons", type=float, nargs="+", metavar="EPS", help="override the epsilon list")
    p.add_argument("--resume", action="store_true", help="reuse verified work items of an unfinished stage")
    p.add_argument("--force", action="store_true", help="recompute stages even when complete")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {"out": args.out, "jobs": args.jobs, "seed": args.seed, "run_id": args.run_id,
                 "epsilons": args.epsilons}
    try:
        cfg = load_config(args.config, overrides)
        run = Run(cfg, resume=args.resume, force=args.force)
    except (ConfigError, InputError) as exc:
        print(f"stadloc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    code = EXIT_OK
    try:
        if args.command == "pipeline":
            run.pipeline()
        else:
            run.stage(args.command)
    except ConfigError as exc:
        print(f"stadloc: config error: {exc}", file=sys.stderr)
        code = EXIT_CONFIG
    except StadlocError as exc:
        print(f"stadloc: {type(exc).__name__}: {exc}", file=sys.stderr)
        code = EXIT_NUMERICAL
    finally:
        run.write_manifest()
    return code


if __name__ == "__main__":
    sys.exit(main())
