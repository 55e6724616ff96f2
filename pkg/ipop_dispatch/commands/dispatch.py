import argparse
import sys

from ipop_dispatch.commands.common import (
    add_profiles_argument, is_quiet, load_fleet, output_path, parse_modules
)
from ipop_dispatch.config import settings
from ipop_dispatch.dispatch import (
    build_dispatch_schedule, optimal_allocation, solve_equal_incremental
)
from ipop_dispatch.utils.export_utils import (
    allocation_document, open_output, write_document, write_schedule
)


def cmd_dispatch(args: argparse.Namespace) -> int:
    fleet = load_fleet(args)
    active = parse_modules(args.modules, fleet)
    if active is None:
        _, allocation = optimal_allocation(fleet, args.demand, args.exhaustive)
    else:
        allocation = solve_equal_incremental(active, args.demand, fleet)
    with open_output(output_path(args)) as stream:
        write_document(allocation_document(allocation, args.demand), stream)
    return 0


def cmd_schedule(args: argparse.Namespace) -> int:
    fleet = load_fleet(args)
    schedule = build_dispatch_schedule(
        fleet, args.p_min, args.p_max, args.step,
        exhaustive=args.exhaustive, workers=args.workers,
    )
    with open_output(output_path(args)) as stream:
        write_schedule(schedule, stream)

    if not is_quiet(args):
        # CSV may own stdout, so the switching points go to stderr
        for point in schedule.switching_points:
            print(
                f"switching point {point.p_total:.2f} W: {point.set_below} -> {point.set_above} "
                f"(eta {point.eta_at_switch:.6f})",
                file=sys.stderr,
            )
    return 0


def register(subparsers, parents=()):
    parser = subparsers.add_parser("dispatch", parents=parents, help="Efficiency-optimal allocation for one demand")
    add_profiles_argument(parser)
    parser.add_argument("--demand", type=float, required=True, help="Total output power (W)")
    parser.add_argument("--modules", help="Comma-separated module ids to keep active")
    parser.add_argument("--exhaustive", action="store_true", help="Evaluate every module subset")
    parser.set_defaults(func=cmd_dispatch)

    parser = subparsers.add_parser("schedule", parents=parents, help="Best combination over a demand range")
    add_profiles_argument(parser)
    parser.add_argument("--p-min", type=float, required=True, help="Lowest demand (W)")
    parser.add_argument("--p-max", type=float, required=True, help="Highest demand (W)")
    parser.add_argument("--step", type=float, default=settings.SCHEDULE_DEFAULT_STEP_W, help="Grid step (W)")
    parser.add_argument("--exhaustive", action="store_true", help="Evaluate every module subset")
    parser.add_argument("--workers", type=int, default=None, help="Parallel gridpoint workers")
    parser.set_defaults(func=cmd_schedule)
