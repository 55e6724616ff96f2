import argparse
import logging
import time
from pathlib import Path

import pydantic

from ipop_dispatch.annealer import AnnealerConfig, run_annealing
from ipop_dispatch.commands.common import (
    add_profiles_argument, load_fleet, output_path, parse_modules, seed
)
from ipop_dispatch.dispatch import optimal_allocation
from ipop_dispatch.models.documents import RunReport
from ipop_dispatch.utils.export_utils import (
    allocation_document, digest, file_digest, open_output, read_allocation, read_schedule, round_sig
)
from ipop_dispatch.validation import FeasibilityError, ValidationError

logger = logging.getLogger(__name__)


def load_config(path, notes: list) -> AnnealerConfig:
    """AnnealerConfig from JSON; a missing file falls back to defaults"""
    if not path:
        notes.append("no config file given, annealer defaults used")
        return AnnealerConfig()
    config_path = Path(path)
    if not config_path.exists():
        logger.warning(f"Config file {config_path} not found, using annealer defaults")
        notes.append(f"config file {config_path} not found, annealer defaults used")
        return AnnealerConfig()
    try:
        return AnnealerConfig.model_validate_json(config_path.read_text(encoding="utf-8"))
    except pydantic.ValidationError as e:
        raise ValidationError(f"{config_path}: invalid annealer config: {e}")


def cmd_anneal(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    notes = []
    fleet = load_fleet(args)
    config = load_config(args.config, notes)
    seed_override = seed(args)
    if seed_override is not None:
        try:
            config = AnnealerConfig(**{**config.model_dump(), "seed": seed_override})
        except pydantic.ValidationError as e:
            raise ValidationError(f"invalid --seed: {e}")

    active = parse_modules(args.modules, fleet)
    if active is None and args.schedule:
        entry = read_schedule(args.schedule).lookup(args.demand)
        if entry.active_set is None:
            raise FeasibilityError(f"schedule {args.schedule} has no combination for {args.demand:g} W")
        active = entry.active_set
        notes.append(f"active set {active} from schedule range [{entry.p_lo:g}, {entry.p_hi:g}) W")
    elif active is None:
        active, _ = optimal_allocation(fleet, args.demand)
        notes.append(f"active set {active} from the equal-incremental optimum")

    warm_start = read_allocation(args.warm_start, fleet) if args.warm_start else None
    outcome = run_annealing(fleet, active, args.demand, config, warm_start)

    text = allocation_document(outcome.best, args.demand).model_dump_json(indent=2) + "\n"
    with open_output(output_path(args)) as stream:
        stream.write(text)

    if args.report:
        inputs = [*args.profiles, *(p for p in (args.schedule, args.warm_start) if p)]
        if args.config and Path(args.config).exists():
            inputs.append(args.config)
        report = RunReport(
            command=list(getattr(args, "argv", [])),
            inputs_digest=digest(file_digest(inputs), repr((args.demand, str(active)))),
            outputs_digest=digest(text),
            seed=config.seed,
            elapsed_s=round(time.perf_counter() - started, 6),
            notes=notes,
            outputs={
                "active_modules": list(active.module_ids),
                "initial_eta": round_sig(outcome.initial.eta),
                "best_eta": round_sig(outcome.best.eta),
                "final_eta": round_sig(outcome.final.eta),
                "levels": outcome.levels,
                "evaluations": outcome.evaluations,
                "accepted": outcome.accepted,
            },
        )
        with open_output(args.report) as stream:
            stream.write(report.model_dump_json(indent=2) + "\n")
    return 0


def register(subparsers, parents=()):
    parser = subparsers.add_parser("anneal", parents=parents, help="Simulated-annealing allocation for one demand")
    add_profiles_argument(parser)
    parser.add_argument("--demand", type=float, required=True, help="Total output power (W)")
    parser.add_argument("--modules", help="Comma-separated module ids to keep active")
    parser.add_argument("--schedule", help="Schedule CSV used to pick the active set")
    parser.add_argument("--warm-start", help="Allocation JSON to start from")
    parser.add_argument("--config", help="AnnealerConfig JSON")
    parser.add_argument("--report", help="Write a RunReport JSON here")
    parser.set_defaults(func=cmd_anneal)
