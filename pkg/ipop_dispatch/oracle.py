"""
Brute-force ground truth: exhaustive grid search over allocations.

Every module but the last walks a step grid over its output range (both
ends included); the last module absorbs the remainder of the demand and
the cell is dropped when that remainder leaves its range.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from ipop_dispatch.config import settings
from ipop_dispatch.dispatch import (
    ActiveSet, Allocation, Fleet, allocation_from_powers, check_feasible, feasible_range, profiles_for
)
from ipop_dispatch.profile import ModuleProfile, pin_at_pout_array
from ipop_dispatch.validation import CapabilityError, FeasibilityError, validate_step

logger = logging.getLogger(__name__)

_REMAINDER_RTOL = 1e-12


@dataclass(frozen=True)
class OracleResult:
    best: Allocation
    active_set: ActiveSet
    grid_step: float
    evaluations: int


def _check_capability(count: int):
    if count > settings.ORACLE_MAX_MODULES:
        raise CapabilityError(
            f"grid search over {count} modules is too large (limit {settings.ORACLE_MAX_MODULES}); "
            f"use the annealer for bigger fleets"
        )


def _axis(profile: ModuleProfile, step: float) -> np.ndarray:
    lo, hi = profile.p_out_min, profile.p_out_max
    inner = np.arange(math.floor(lo / step) + 1, math.ceil(hi / step)) * step
    inner = inner[(inner > lo) & (inner < hi)]
    return np.concatenate(([lo], inner, [hi]))


def grid_cardinality(active: ActiveSet, step: float, profiles: Fleet) -> int:
    """Number of grid cells grid_search visits for ``active``"""
    validate_step(step)
    members = profiles_for(active, profiles)
    return math.prod(len(_axis(profile, step)) for profile in members[:-1])


def grid_search(active: ActiveSet, demand: float, step: float, profiles: Fleet) -> OracleResult:
    """
    Most efficient grid allocation of ``demand`` over ``active``. Among equal
    efficiencies the lexicographically smallest power vector wins.
    """
    validate_step(step)
    members = profiles_for(active, profiles)
    _check_capability(len(members))
    check_feasible(active, demand, profiles)

    if len(members) == 1:
        best = allocation_from_powers(active, [demand], profiles)
        return OracleResult(best=best, active_set=active, grid_step=step, evaluations=1)

    last = members[-1]
    slack = _REMAINDER_RTOL * max(1.0, last.p_out_max)
    axes = [_axis(profile, step) for profile in members[:-1]]
    axis_pins = [pin_at_pout_array(profile, axis) for profile, axis in zip(members[:-1], axes)]
    inner_axis, inner_pins = axes[-1], axis_pins[-1]

    best_eta, best_powers = -math.inf, None
    for prefix in itertools.product(*(range(len(axis)) for axis in axes[:-1])):
        prefix_power = math.fsum(axes[j][i] for j, i in enumerate(prefix))
        prefix_pin = math.fsum(axis_pins[j][i] for j, i in enumerate(prefix))
        remainder = demand - prefix_power - inner_axis
        valid = (remainder >= last.p_out_min - slack) & (remainder <= last.p_out_max + slack)
        if not np.any(valid):
            continue
        total_pin = prefix_pin + inner_pins + pin_at_pout_array(last, remainder)
        eta = np.where(valid, demand / total_pin, -np.inf)
        k = int(np.argmax(eta))
        if eta[k] > best_eta:
            best_eta = float(eta[k])
            best_powers = [axes[j][i] for j, i in enumerate(prefix)] + [inner_axis[k], remainder[k]]

    if best_powers is None:
        raise FeasibilityError(f"no grid cell at step {step:g} W delivers {demand:g} W over {active}")
    best = allocation_from_powers(active, [float(p) for p in best_powers], profiles)
    evaluations = math.prod(len(axis) for axis in axes)
    logger.debug(f"Grid search over {active} at {demand:g} W: {evaluations} cells, eta {best.eta:.9f}")
    return OracleResult(best=best, active_set=active, grid_step=step, evaluations=evaluations)


def enumerate_combinations(profiles: Fleet, demand: float, step: float) -> OracleResult:
    """Grid search over every non-empty feasible subset of the fleet"""
    validate_step(step)
    ids = list(profiles)
    _check_capability(len(ids))

    best: Optional[OracleResult] = None
    evaluations = 0
    searched: List[str] = []
    for size in range(1, len(ids) + 1):
        for combo in itertools.combinations(ids, size):
            active = ActiveSet(combo)
            lo, hi = feasible_range(active, profiles)
            if not lo <= demand <= hi:
                continue
            result = grid_search(active, demand, step, profiles)
            evaluations += result.evaluations
            searched.append(str(active))
            if best is None or result.best.eta > best.best.eta:
                best = result

    if best is None:
        raise FeasibilityError(f"no module combination can deliver {demand:g} W")
    logger.debug(f"Searched {len(searched)} combination(s): {', '.join(searched)}")
    return OracleResult(best=best.best, active_set=best.active_set, grid_step=step, evaluations=evaluations)
