import argparse
import logging
import sys
from pathlib import Path
from typing import List

from pydantic import TypeAdapter

from ipop_dispatch.commands.common import output_path
from ipop_dispatch.config import settings
from ipop_dispatch.curvefit import fit_module, group_samples
from ipop_dispatch.models.documents import FitReportDocument
from ipop_dispatch.profile import peak_efficiency
from ipop_dispatch.utils.export_utils import read_samples, round_sig, write_profile
from ipop_dispatch.validation import ValidationError

logger = logging.getLogger(__name__)

_reports_adapter = TypeAdapter(List[FitReportDocument])


def cmd_fit(args: argparse.Namespace) -> int:
    """Fit one profile per module id and write <out>/<module_id>.json"""
    out_dir = output_path(args)
    if not out_dir:
        raise ValidationError("fit needs --out DIR for the profile files")
    samples = read_samples(args.samples)

    reports = []
    for module_id, module_samples in group_samples(samples).items():
        fit = fit_module(module_samples, args.degree)
        path = write_profile(fit.profile, Path(out_dir) / f"{module_id}.json")
        current, eta = peak_efficiency(fit.profile)
        logger.info(f"Wrote profile for '{module_id}' to {path}")
        reports.append(FitReportDocument(
            module_id=module_id,
            profile_path=str(path),
            degree=args.degree,
            sample_count=fit.pin_report.sample_count,
            pin_rmse_w=round_sig(fit.pin_report.rmse),
            pin_r_squared=round_sig(fit.pin_report.r_squared),
            pout_rmse_w=round_sig(fit.pout_report.rmse),
            pout_r_squared=round_sig(fit.pout_report.r_squared),
            peak_eta=round_sig(eta),
            peak_p_out_w=round_sig(fit.profile.pout_poly(current)),
        ))

    sys.stdout.write(_reports_adapter.dump_json(reports, indent=2).decode("utf-8") + "\n")
    return 0


def register(subparsers, parents=()):
    parser = subparsers.add_parser("fit", parents=parents, help="Fit power models from a sample CSV")
    parser.add_argument("samples", help="Sample CSV (module_id,current_a,p_in_w,p_out_w)")
    parser.add_argument("--degree", type=int, default=settings.DEFAULT_FIT_DEGREE,
                        help=f"Polynomial degree, at least {settings.MIN_FIT_DEGREE}")
    parser.set_defaults(func=cmd_fit)
