"""Optimized dispatch against the equal-split control group."""

import logging
from dataclasses import dataclass
from typing import List, Optional

from ipop_dispatch.dispatch import (
    ActiveSet, Allocation, Fleet, demand_grid, equal_split, optimal_allocation
)
from ipop_dispatch.validation import FeasibilityError, validate_demand_range, validate_step

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Comparison:
    demand: float
    eta_equal_split: Optional[float]
    equal_split_note: Optional[str]
    eta_optimized: float
    active_set: ActiveSet
    allocation: Allocation

    @property
    def improvement_points(self) -> Optional[float]:
        """Efficiency gain in absolute percentage points"""
        if self.eta_equal_split is None:
            return None
        return 100.0 * (self.eta_optimized - self.eta_equal_split)


def compare_equal_split(profiles: Fleet, demand: float, exhaustive: bool = False) -> Comparison:
    """
    Optimized combination and split against every module delivering
    demand / m. An infeasible equal split is reported, not raised.
    """
    active, allocation = optimal_allocation(profiles, demand, exhaustive)
    eta_equal, note = None, None
    try:
        eta_equal = equal_split(ActiveSet(tuple(profiles)), demand, profiles).eta
    except FeasibilityError as e:
        note = f"equal split infeasible: {e}"
        logger.warning(f"Demand {demand:g} W: {note}")
    return Comparison(
        demand=demand,
        eta_equal_split=eta_equal,
        equal_split_note=note,
        eta_optimized=allocation.eta,
        active_set=active,
        allocation=allocation,
    )


def compare_sweep(profiles: Fleet, p_min: float, p_max: float, step: float,
                  exhaustive: bool = False) -> List[Comparison]:
    validate_demand_range(p_min, p_max)
    validate_step(step)
    comparisons = []
    for demand in demand_grid(p_min, p_max, step):
        try:
            comparisons.append(compare_equal_split(profiles, demand, exhaustive))
        except FeasibilityError as e:
            logger.warning(f"Skipping {demand:g} W: {e}")
    return comparisons
