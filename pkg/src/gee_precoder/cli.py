"""Command-line front end: `gee-precoder run | check`."""

import argparse
import dataclasses
import sys

from .exceptions import GeePrecoderError
from .harness import run_self_check, spec_from_json, write_sweep


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gee-precoder",
        description="Energy-efficient interference-channel precoding under "
                    "imperfect channel knowledge.")
    sub = parser.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="run a Monte-Carlo sweep from a JSON spec")
    runp.add_argument("--spec", required=True, metavar="FILE",
                      help="experiment spec (JSON; schema in the harness docs)")
    runp.add_argument("--seed", type=int, default=None,
                      help="override the spec's master seed")
    runp.add_argument("--output", default=None, metavar="PATH",
                      help="override the spec's CSV output path")
    runp.add_argument("--solver", choices=("statistical", "worstcase"),
                      default=None, help="override the spec's solver")

    sub.add_parser("check", help="run the invariant self-checks on tiny instances")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "check":
        return run_self_check()
    try:
        with open(args.spec, encoding="utf-8") as fh:
            spec = spec_from_json(fh.read())
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.output is not None:
            overrides["output"] = args.output
        if args.solver is not None:
            overrides["solver"] = args.solver
        if overrides:
            spec = dataclasses.replace(spec, **overrides)
        result = write_sweep(spec)
    except (GeePrecoderError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {spec.output}: {len(result.rows)} rows, "
          f"{result.failures} failed trials")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
