import argparse

from ipop_dispatch.commands.common import add_profiles_argument, load_fleet, output_path
from ipop_dispatch.compare import Comparison, compare_equal_split, compare_sweep
from ipop_dispatch.models.documents import ComparisonDocument
from ipop_dispatch.utils.export_utils import (
    allocation_document, open_output, round_sig, write_document, write_rows
)
from ipop_dispatch.validation import ValidationError

SWEEP_COLUMNS = ["demand_w", "eta_equal_split", "eta_optimized", "improvement_points"]


def comparison_document(comparison: Comparison) -> ComparisonDocument:
    return ComparisonDocument(
        demand_w=round_sig(comparison.demand),
        eta_equal_split=round_sig(comparison.eta_equal_split),
        equal_split_note=comparison.equal_split_note,
        eta_optimized=round_sig(comparison.eta_optimized),
        improvement_points=round_sig(comparison.improvement_points),
        optimized_modules=list(comparison.active_set.module_ids),
        allocation=allocation_document(comparison.allocation, comparison.demand),
    )


def cmd_compare(args: argparse.Namespace) -> int:
    fleet = load_fleet(args)
    if args.sweep:
        p_min, p_max, step = args.sweep
        rows = [
            (c.demand, c.eta_equal_split, c.eta_optimized, c.improvement_points)
            for c in compare_sweep(fleet, p_min, p_max, step, args.exhaustive)
        ]
        with open_output(output_path(args)) as stream:
            write_rows(SWEEP_COLUMNS, rows, stream)
        return 0

    if args.demand is None:
        raise ValidationError("compare needs --demand or --sweep P_MIN P_MAX STEP")
    comparison = compare_equal_split(fleet, args.demand, args.exhaustive)
    with open_output(output_path(args)) as stream:
        write_document(comparison_document(comparison), stream)
    return 0


def register(subparsers, parents=()):
    parser = subparsers.add_parser("compare", parents=parents, help="Optimized dispatch against an equal split")
    add_profiles_argument(parser)
    parser.add_argument("--demand", type=float, help="Total output power (W)")
    parser.add_argument("--sweep", type=float, nargs=3, metavar=("P_MIN", "P_MAX", "STEP"),
                        help="Emit a CSV over a demand range instead")
    parser.add_argument("--exhaustive", action="store_true", help="Evaluate every module subset")
    parser.set_defaults(func=cmd_compare)
