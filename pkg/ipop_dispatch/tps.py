"""
Minimum-current-stress triple-phase-shift control of a dual active bridge.

For voltage gain k = n * U_in / U_out and per-unit power p the closed forms
give the inner phase shifts D1 (primary) and D3 (secondary) and the outer
shift D2. k > 1 is the boost regime, k <= 1 the buck regime; each has a
light-load Mode 2 (p below the mode boundary) and a Mode 1 (at or above).
"""

import enum
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from ipop_dispatch.validation import TpsDomainError, ValidationError, validate_positive

logger = logging.getLogger(__name__)

RADICAND_TOLERANCE = 1e-12


class Regime(str, enum.Enum):
    BUCK = "buck"
    BOOST = "boost"


class Mode(enum.IntEnum):
    MODE1 = 1
    MODE2 = 2


@dataclass(frozen=True)
class OperatingPoint:
    k: float
    p: float

    def __post_init__(self):
        if not math.isfinite(self.k) or self.k <= 0:
            raise ValidationError(f"voltage gain k must be > 0 (got {self.k:g})")
        if not math.isfinite(self.p) or not 0 <= self.p <= 1:
            raise ValidationError(f"per-unit power p must lie in [0, 1] (got {self.p:g})")


@dataclass(frozen=True)
class PhaseShiftSet:
    d1: float
    d2: float
    d3: float
    mode: Mode
    regime: Regime


@dataclass(frozen=True)
class SweepRow:
    p: float
    shifts: Optional[PhaseShiftSet]
    i_m: Optional[float]
    note: Optional[str] = None


def voltage_gain(n: float, u_in: float, u_out: float) -> float:
    validate_positive(n, "n")
    validate_positive(u_in, "u_in")
    validate_positive(u_out, "u_out")
    return n * u_in / u_out


def regime_for(k: float) -> Regime:
    return Regime.BOOST if k > 1 else Regime.BUCK


def mode_boundary(k: float) -> float:
    """p separating Mode 2 (below) from Mode 1 (at or above)"""
    validate_positive(k, "k")
    if k > 1:
        return 2 * (k - 1) / k ** 2
    return 2 * (k - k ** 2)


def _root(radicand: float, expression: str, k: float, p: float) -> float:
    if radicand < -RADICAND_TOLERANCE:
        raise TpsDomainError(k, p, expression, radicand)
    return math.sqrt(max(radicand, 0.0))


def _inner(k: float, p: float, regime: Regime, mode: Mode) -> Tuple[float, float]:
    if regime is Regime.BOOST:
        if mode is Mode.MODE2:
            d1 = 1 - _root(p / (2 * (k - 1)), "D1 = 1 - sqrt(p/(2(k-1)))", k, p)
            d3 = 1 - _root(p * k ** 2 / (2 * (k - 1)), "D3 = 1 - sqrt(p k^2/(2(k-1)))", k, p)
        else:
            d1 = (k - 1) * _root((1 - p) / (k ** 2 - 2 * k + 2), "D1 = (k-1) sqrt((1-p)/(k^2-2k+2))", k, p)
            d3 = 0.0
    else:
        if mode is Mode.MODE2:
            d1 = 1 - _root(p / (2 * k * (1 - k)), "D1 = 1 - sqrt(p/(2k(1-k)))", k, p)
            d3 = 1 - _root(p * k / (2 * (1 - k)), "D3 = 1 - sqrt(p k/(2(1-k)))", k, p)
        else:
            d1 = 0.0
            d3 = (1 - k) * _root((1 - p) / (2 * k ** 2 - 2 * k + 1), "D3 = (1-k) sqrt((1-p)/(2k^2-2k+1))", k, p)
    return d1, d3


def _outer(k: float, p: float, mode: Mode, d1: float, d3: float) -> float:
    if mode is Mode.MODE2:
        return 0.5 * (1 + d1 - d3 - _root(1 - d1 ** 2 - d3 ** 2 - p, "D2 radicand 1 - D1^2 - D3^2 - p", k, p))
    return 1 - d3 - _root((1 - d1) * (1 - d3) - p / 2, "D2 radicand (1-D1)(1-D3) - p/2", k, p)


def inner_phase_shifts(k: float, p: float) -> Tuple[Regime, Mode, float, float]:
    """(regime, mode, D1, D3) for the operating point"""
    point = OperatingPoint(k, p)
    regime = regime_for(point.k)
    mode = Mode.MODE2 if point.p < mode_boundary(point.k) else Mode.MODE1
    d1, d3 = _inner(point.k, point.p, regime, mode)
    return regime, mode, d1, d3


def evaluate_mode(k: float, p: float, mode: Mode) -> PhaseShiftSet:
    """Evaluate one mode's closed forms regardless of which mode p falls in"""
    point = OperatingPoint(k, p)
    regime = regime_for(point.k)
    if mode is Mode.MODE2 and point.k == 1:
        raise ValidationError("Mode 2 is undefined at unity gain")
    d1, d3 = _inner(point.k, point.p, regime, mode)
    d2 = _outer(point.k, point.p, mode, d1, d3)
    return PhaseShiftSet(d1=d1, d2=d2, d3=d3, mode=mode, regime=regime)


def phase_shifts(point: OperatingPoint) -> PhaseShiftSet:
    regime, mode, d1, d3 = inner_phase_shifts(point.k, point.p)
    d2 = _outer(point.k, point.p, mode, d1, d3)
    if not 0 <= d2 <= 1:
        logger.warning(f"D2={d2:.6f} outside [0, 1] at k={point.k:g}, p={point.p:g}")
    return PhaseShiftSet(d1=d1, d2=d2, d3=d3, mode=mode, regime=regime)


def current_stress(k: float, shifts: PhaseShiftSet) -> float:
    """Peak inductor current in per unit"""
    validate_positive(k, "k")
    d1, d2, d3 = shifts.d1, shifts.d2, shifts.d3
    if k > 1:
        return -k * d1 + 2 * d2 + d3 + k - 1
    return -k * d1 + 2 * k * d2 - d3 * (1 - 2 * k) + 1 - k


def power_base(n: float, u_in: float, u_out: float, f_s: float, l_r: float) -> float:
    """Per-unit power base n * U_in * U_out / (8 f_s L) in watts"""
    for value, name in ((n, "n"), (u_in, "u_in"), (u_out, "u_out"), (f_s, "f_s"), (l_r, "l_r")):
        validate_positive(value, name)
    return n * u_in * u_out / (8 * f_s * l_r)


def per_unit_power(p_watts: float, base: float) -> float:
    validate_positive(base, "base")
    p = p_watts / base
    if not 0 <= p <= 1:
        raise ValidationError(f"{p_watts:g} W is {p:.4f} p.u. of a {base:g} W base, outside [0, 1]")
    return p


def sweep(k: float, points: int) -> List[SweepRow]:
    """Phase shifts over p in [0, 1]; points outside the closed forms' domain carry a note"""
    if points < 2:
        raise ValidationError("A sweep needs at least 2 points")
    rows = []
    for p in np.linspace(0.0, 1.0, points):
        p = float(p)
        try:
            shifts = phase_shifts(OperatingPoint(k, p))
        except TpsDomainError as e:
            rows.append(SweepRow(p=p, shifts=None, i_m=None, note=str(e)))
            continue
        rows.append(SweepRow(p=p, shifts=shifts, i_m=current_stress(k, shifts)))
    skipped = sum(1 for row in rows if row.shifts is None)
    if skipped:
        logger.info(f"{skipped} of {points} sweep points fall outside the closed forms at k={k:g}")
    return rows
