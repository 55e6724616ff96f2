"""
Readers and writers for the files the CLI consumes and produces.

Sample CSV: header ``module_id,current_a,p_in_w,p_out_w``. Profile,
allocation and report files are JSON documents from ``models.documents``.
Floats are written with 9 significant digits.
"""

import contextlib
import hashlib
import io
import logging
import math
import sys
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Sequence, TextIO, Union

import pandas as pd
import pydantic

from ipop_dispatch.config import settings
from ipop_dispatch.dispatch import (
    ActiveSet, Allocation, DispatchSchedule, Fleet, ScheduleEntry, allocation_from_powers, profiles_for
)
from ipop_dispatch.models.documents import (
    AllocationDocument, ModuleShareDocument, ProfileDocument
)
from ipop_dispatch.profile import (
    EfficiencySample, ModuleProfile, fleet_from_profiles, profile_from_document, profile_to_document
)
from ipop_dispatch.validation import SampleFormatError, ValidationError

logger = logging.getLogger(__name__)

SAMPLE_COLUMNS = ["module_id", "current_a", "p_in_w", "p_out_w"]
SCHEDULE_COLUMNS = ["p_lo_w", "p_hi_w", "active_modules", "example_demand_w", "eta"]
MODULE_SEPARATOR = ";"

PathLike = Union[str, Path]


def round_sig(value: Optional[float]) -> Optional[float]:
    """Round to the configured number of significant digits"""
    if value is None:
        return None
    return float(f"{value:.{settings.SIGNIFICANT_DIGITS}g}")


def digest(*chunks: Union[bytes, str]) -> str:
    hasher = hashlib.sha256()
    for chunk in chunks:
        hasher.update(chunk.encode("utf-8") if isinstance(chunk, str) else chunk)
    return hasher.hexdigest()


def file_digest(paths: Iterable[PathLike]) -> str:
    return digest(*(Path(path).read_bytes() for path in paths))


@contextlib.contextmanager
def open_output(path: Optional[PathLike]) -> Iterator[TextIO]:
    """Text stream for ``path``, or standard output when no path is given"""
    if path is None:
        yield sys.stdout
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", encoding="utf-8", newline="\n") as stream:
        yield stream


def _read_text(path: PathLike) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ValidationError(f"File not found: {path}")
    except UnicodeDecodeError as e:
        raise ValidationError(f"{path} is not UTF-8 text: {e}")


def parse_samples(text: str) -> List[EfficiencySample]:
    """Parse sample CSV text; errors carry the 1-based file line number"""
    if not text.strip():
        raise SampleFormatError("empty file, expected header " + ",".join(SAMPLE_COLUMNS), line=1)
    try:
        # blank lines stay in the frame so row offsets map onto file lines
        frame = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False, skip_blank_lines=False)
    except pd.errors.ParserError as e:
        raise SampleFormatError(f"malformed CSV: {e}")
    if list(frame.columns) != SAMPLE_COLUMNS:
        raise SampleFormatError(
            f"header must be exactly {','.join(SAMPLE_COLUMNS)} (got {','.join(map(str, frame.columns))})",
            line=1,
        )

    samples = []
    for offset, row in enumerate(frame.itertuples(index=False)):
        if all(pd.isna(field) or not str(field).strip() for field in row):
            continue
        line = offset + 2
        values = []
        for column, raw in zip(SAMPLE_COLUMNS[1:], row[1:]):
            try:
                value = float(raw)
            except ValueError:
                raise SampleFormatError(f"{column} '{raw}' is not a number", line=line)
            if not math.isfinite(value):
                raise SampleFormatError(f"{column} must be finite", line=line)
            values.append(value)
        try:
            samples.append(EfficiencySample(
                module_id=row[0], current=values[0], p_in=values[1], p_out=values[2]
            ))
        except pydantic.ValidationError as e:
            reasons = "; ".join(err["msg"] for err in e.errors())
            raise SampleFormatError(reasons, line=line)
    if not samples:
        raise SampleFormatError("no data rows")
    return samples


def read_samples(path: PathLike) -> List[EfficiencySample]:
    samples = parse_samples(_read_text(path))
    logger.info(f"Read {len(samples)} samples from {path}")
    return samples


def write_samples(samples: Sequence[EfficiencySample], stream: TextIO):
    frame = pd.DataFrame(
        [[s.module_id, round_sig(s.current), round_sig(s.p_in), round_sig(s.p_out)] for s in samples],
        columns=SAMPLE_COLUMNS, dtype=object,
    )
    frame.to_csv(stream, index=False, lineterminator="\n")


def read_profile(path: PathLike) -> ModuleProfile:
    try:
        document = ProfileDocument.model_validate_json(_read_text(path))
    except pydantic.ValidationError as e:
        raise ValidationError(f"{path}: invalid profile document: {e}")
    return profile_from_document(document)


def read_profiles(paths: Sequence[PathLike]) -> dict:
    """Fleet keyed by module id, in argument order"""
    if not paths:
        raise ValidationError("At least one profile is required")
    return fleet_from_profiles([read_profile(path) for path in paths])


def write_profile(profile: ModuleProfile, path: PathLike) -> Path:
    target = Path(path)
    with open_output(target) as stream:
        stream.write(profile_to_document(profile).model_dump_json(indent=2) + "\n")
    return target


def allocation_document(allocation: Allocation, demand: float) -> AllocationDocument:
    return AllocationDocument(
        demand_w=round_sig(demand),
        total_p_out_w=round_sig(allocation.total_p_out),
        total_p_in_w=round_sig(allocation.total_p_in),
        eta=round_sig(allocation.eta),
        active_modules=list(allocation.active_set.module_ids),
        modules=[
            ModuleShareDocument(
                module_id=share.module_id,
                p_out_w=round_sig(share.p_out),
                p_in_w=round_sig(share.p_in),
                current_a=round_sig(share.current),
                clamped=share.clamped,
            )
            for share in allocation.shares
        ],
    )


def read_allocation(path: PathLike, profiles: Fleet) -> Allocation:
    """Allocation JSON back into an Allocation evaluated on ``profiles``"""
    try:
        document = AllocationDocument.model_validate_json(_read_text(path))
    except pydantic.ValidationError as e:
        raise ValidationError(f"{path}: invalid allocation document: {e}")
    if not document.modules:
        raise ValidationError(f"{path}: allocation lists no modules")
    active = ActiveSet(tuple(module.module_id for module in document.modules))
    # 9-digit rounding can push a bound value just outside its range
    p_outs = [
        min(max(module.p_out_w, profile.p_out_min), profile.p_out_max)
        for module, profile in zip(document.modules, profiles_for(active, profiles))
    ]
    return allocation_from_powers(active, p_outs, profiles)


def write_document(document: pydantic.BaseModel, stream: TextIO):
    stream.write(document.model_dump_json(indent=2) + "\n")


def write_schedule(schedule: DispatchSchedule, stream: TextIO):
    rows = [
        [
            round_sig(entry.p_lo),
            round_sig(entry.p_hi),
            MODULE_SEPARATOR.join(entry.active_set.module_ids) if entry.active_set else "",
            round_sig(entry.example_demand),
            round_sig(entry.eta),
        ]
        for entry in schedule.entries
    ]
    pd.DataFrame(rows, columns=SCHEDULE_COLUMNS, dtype=object).to_csv(stream, index=False, lineterminator="\n")


def read_schedule(path: PathLike) -> DispatchSchedule:
    """Schedule CSV as a lookup-only DispatchSchedule (no exemplars)"""
    try:
        frame = pd.read_csv(io.StringIO(_read_text(path)), dtype=str, keep_default_na=False)
    except pd.errors.ParserError as e:
        raise ValidationError(f"{path}: malformed schedule CSV: {e}")
    if list(frame.columns) != SCHEDULE_COLUMNS:
        raise ValidationError(f"{path}: schedule header must be {','.join(SCHEDULE_COLUMNS)}")
    if frame.empty:
        raise ValidationError(f"{path}: schedule has no rows")

    entries = []
    for offset, row in enumerate(frame.itertuples(index=False)):
        try:
            p_lo, p_hi = float(row.p_lo_w), float(row.p_hi_w)
            example = float(row.example_demand_w) if row.example_demand_w else None
        except ValueError:
            raise ValidationError(f"{path}: line {offset + 2}: non-numeric power")
        active = ActiveSet(tuple(row.active_modules.split(MODULE_SEPARATOR))) if row.active_modules else None
        entries.append(ScheduleEntry(p_lo=p_lo, p_hi=p_hi, active_set=active,
                                     example_demand=example, exemplar=None))
    return DispatchSchedule(entries=tuple(entries), switching_points=())


def write_rows(columns: Sequence[str], rows: Iterable[Sequence], stream: TextIO):
    """Plot-ready CSV; floats rounded, None written as an empty field"""
    rounded = [[round_sig(v) if isinstance(v, float) else v for v in row] for row in rows]
    pd.DataFrame(rounded, columns=list(columns), dtype=object).to_csv(stream, index=False, lineterminator="\n")
