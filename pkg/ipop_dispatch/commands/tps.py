import argparse

from ipop_dispatch.commands.common import output_path
from ipop_dispatch.models.documents import TpsRecord
from ipop_dispatch.tps import (
    OperatingPoint, current_stress, per_unit_power, phase_shifts, power_base, sweep, voltage_gain
)
from ipop_dispatch.utils.export_utils import open_output, round_sig, write_document, write_rows
from ipop_dispatch.validation import ValidationError

SWEEP_COLUMNS = ["p", "mode", "d1", "d2", "d3", "i_m_pu"]


def _gain(args: argparse.Namespace) -> float:
    if args.k is not None:
        return args.k
    if None in (args.n, args.u_in, args.u_out):
        raise ValidationError("tps needs --k or all of --n, --u-in, --u-out")
    return voltage_gain(args.n, args.u_in, args.u_out)


def _power(args: argparse.Namespace) -> float:
    if args.p is not None:
        return args.p
    if args.p_watts is None:
        raise ValidationError("tps needs --p, --p-watts or --sweep N")
    if None in (args.n, args.u_in, args.u_out, args.fs, args.lr):
        raise ValidationError("--p-watts needs --n, --u-in, --u-out, --fs and --lr for the power base")
    return per_unit_power(args.p_watts, power_base(args.n, args.u_in, args.u_out, args.fs, args.lr))


def cmd_tps(args: argparse.Namespace) -> int:
    k = _gain(args)
    if args.sweep:
        rows = [
            (row.p,
             int(row.shifts.mode) if row.shifts else None,
             row.shifts.d1 if row.shifts else None,
             row.shifts.d2 if row.shifts else None,
             row.shifts.d3 if row.shifts else None,
             row.i_m)
            for row in sweep(k, args.sweep)
        ]
        with open_output(output_path(args)) as stream:
            write_rows(SWEEP_COLUMNS, rows, stream)
        return 0

    point = OperatingPoint(k, _power(args))
    shifts = phase_shifts(point)
    record = TpsRecord(
        k=round_sig(point.k),
        p=round_sig(point.p),
        regime=shifts.regime.value,
        mode=int(shifts.mode),
        d1=round_sig(shifts.d1),
        d2=round_sig(shifts.d2),
        d3=round_sig(shifts.d3),
        i_m_pu=round_sig(current_stress(point.k, shifts)),
    )
    with open_output(output_path(args)) as stream:
        write_document(record, stream)
    return 0


def register(subparsers, parents=()):
    parser = subparsers.add_parser("tps", parents=parents, help="Minimum-current-stress phase shifts of a DAB")
    parser.add_argument("--k", type=float, help="Voltage gain n*U_in/U_out")
    parser.add_argument("--n", type=float, help="Transformer turns ratio")
    parser.add_argument("--u-in", type=float, help="Input voltage (V)")
    parser.add_argument("--u-out", type=float, help="Output voltage (V)")
    parser.add_argument("--p", type=float, help="Per-unit power in [0, 1]")
    parser.add_argument("--p-watts", type=float, help="Power in watts, scaled by the SPS power base")
    parser.add_argument("--fs", type=float, help="Switching frequency (Hz) for the power base")
    parser.add_argument("--lr", type=float, help="Series inductance (H) for the power base")
    parser.add_argument("--sweep", type=int, metavar="N", help="Emit a CSV of N points over p in [0, 1]")
    parser.set_defaults(func=cmd_tps)
