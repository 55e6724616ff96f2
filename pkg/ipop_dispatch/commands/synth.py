import argparse

import numpy as np

from ipop_dispatch.commands.common import add_profiles_argument, load_fleet, output_path, seed
from ipop_dispatch.profile import efficiency, invert_pout
from ipop_dispatch.synth import dab_pair_samples
from ipop_dispatch.utils.export_utils import open_output, write_rows, write_samples

CURVE_COLUMNS = ["module_id", "p_out_w", "current_a", "eta"]


def cmd_synth(args: argparse.Namespace) -> int:
    samples = dab_pair_samples(args.points, args.noise, seed(args) or 0)
    with open_output(output_path(args)) as stream:
        write_samples(samples, stream)
    return 0


def cmd_curves(args: argparse.Namespace) -> int:
    """Plot-ready efficiency curves over each module's output range"""
    fleet = load_fleet(args)
    rows = []
    for module_id, profile in fleet.items():
        for p_out in np.linspace(profile.p_out_min, profile.p_out_max, args.points):
            current = invert_pout(profile, float(p_out))
            rows.append((module_id, float(p_out), current, efficiency(profile, current)))
    with open_output(output_path(args)) as stream:
        write_rows(CURVE_COLUMNS, rows, stream)
    return 0


def register(subparsers, parents=()):
    parser = subparsers.add_parser("synth", parents=parents, help="Emit the pinned synthetic two-module sample set")
    parser.add_argument("--points", type=int, default=25, help="Samples per module")
    parser.add_argument("--noise", type=float, default=0.0, help="Gaussian P_in noise (W)")
    parser.set_defaults(func=cmd_synth)

    parser = subparsers.add_parser("curves", parents=parents, help="Emit efficiency curves as CSV")
    add_profiles_argument(parser)
    parser.add_argument("--points", type=int, default=101, help="Points per module")
    parser.set_defaults(func=cmd_curves)
