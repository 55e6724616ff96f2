import argparse
import logging

from ipop_dispatch.commands.common import add_profiles_argument, load_fleet, output_path, parse_modules
from ipop_dispatch.config import settings
from ipop_dispatch.oracle import enumerate_combinations, grid_search
from ipop_dispatch.utils.export_utils import allocation_document, open_output, write_document

logger = logging.getLogger(__name__)


def cmd_oracle(args: argparse.Namespace) -> int:
    fleet = load_fleet(args)
    active = parse_modules(args.modules, fleet)
    if active is None:
        result = enumerate_combinations(fleet, args.demand, args.step)
    else:
        result = grid_search(active, args.demand, args.step, fleet)
    logger.info(f"Oracle evaluated {result.evaluations} grid cells, best set {result.active_set}")
    with open_output(output_path(args)) as stream:
        write_document(allocation_document(result.best, args.demand), stream)
    return 0


def register(subparsers, parents=()):
    # debugging aid, left out of the help listing
    parser = subparsers.add_parser("oracle", parents=parents)
    add_profiles_argument(parser)
    parser.add_argument("--demand", type=float, required=True)
    parser.add_argument("--step", type=float, default=settings.ORACLE_DEFAULT_STEP_W)
    parser.add_argument("--modules")
    parser.set_defaults(func=cmd_oracle)
