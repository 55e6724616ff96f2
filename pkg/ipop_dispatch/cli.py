"""
ipop-dispatch command line.

Exit codes: 0 success, 2 input or parse error, 3 infeasible demand,
4 model or solver failure.
"""

import argparse
import logging
import sys
from typing import List, Optional

from ipop_dispatch.commands import anneal, compare, dispatch, fit, oracle, synth, tps
from ipop_dispatch.utils.logging_setup import setup_logging
from ipop_dispatch.validation import DispatchError

logger = logging.getLogger("ipop_dispatch")

VISIBLE_COMMANDS = ["fit", "dispatch", "schedule", "anneal", "compare", "tps", "synth", "curves"]


def _global_flags() -> argparse.ArgumentParser:
    # SUPPRESS keeps a subcommand's defaults from overwriting flags given before it
    flags = argparse.ArgumentParser(add_help=False)
    flags.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="Random seed (u64)")
    flags.add_argument("--out", default=argparse.SUPPRESS, help="Output file (directory for fit)")
    flags.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS,
                       help="Only report errors on stderr")
    return flags


def build_parser() -> argparse.ArgumentParser:
    flags = _global_flags()
    parser = argparse.ArgumentParser(
        prog="ipop-dispatch",
        description="Efficiency-optimal load dispatch for input-parallel output-parallel converters",
        parents=[flags],
    )
    subparsers = parser.add_subparsers(dest="command", metavar="{" + ",".join(VISIBLE_COMMANDS) + "}")
    subparsers.required = True

    for module in (fit, dispatch, anneal, compare, tps, synth, oracle):
        module.register(subparsers, parents=[flags])
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    args.argv = argv
    seed = getattr(args, "seed", None)
    if seed is not None and not 0 <= seed < 2 ** 64:
        print(f"ipop-dispatch: --seed must be an unsigned 64-bit integer (got {seed})", file=sys.stderr)
        return 2

    setup_logging(quiet=bool(getattr(args, "quiet", False)))
    try:
        return args.func(args)
    except DispatchError as e:
        logger.debug("Command failed", exc_info=True)
        print(f"ipop-dispatch {args.command}: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
