import argparse
from typing import List, Optional

from ipop_dispatch.dispatch import ActiveSet
from ipop_dispatch.utils.export_utils import read_profiles
from ipop_dispatch.validation import ValidationError


def add_profiles_argument(parser: argparse.ArgumentParser):
    parser.add_argument("profiles", nargs="+", metavar="PROFILE", help="Profile JSON file(s)")


def load_fleet(args: argparse.Namespace) -> dict:
    return read_profiles(args.profiles)


def parse_modules(value: Optional[str], fleet: dict) -> Optional[ActiveSet]:
    """``--modules a,b`` as an ActiveSet of known module ids"""
    if not value:
        return None
    module_ids: List[str] = [part.strip() for part in value.split(",") if part.strip()]
    unknown = [mid for mid in module_ids if mid not in fleet]
    if unknown:
        raise ValidationError(f"Unknown module id(s) in --modules: {', '.join(unknown)}")
    return ActiveSet(tuple(module_ids))


def output_path(args: argparse.Namespace) -> Optional[str]:
    return getattr(args, "out", None)


def seed(args: argparse.Namespace) -> Optional[int]:
    return getattr(args, "seed", None)


def is_quiet(args: argparse.Namespace) -> bool:
    return bool(getattr(args, "quiet", False))
