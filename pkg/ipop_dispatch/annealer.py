"""
Simulated-annealing refinement of the continuous split for a fixed active set.

Procedure: draw a feasible random split of the demand (or start from a
previous allocation), cool T <- cooling * T, run ``iters_per_temp``
perturbation/acceptance rounds at that temperature and stop after the first
level at or below ``t_thres``. The best allocation ever visited is returned.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ipop_dispatch.dispatch import (
    ActiveSet, Allocation, Fleet, check_feasible, profiles_for, allocation_from_powers
)
from ipop_dispatch.profile import pin_at_pout
from ipop_dispatch.validation import ValidationError

logger = logging.getLogger(__name__)

_PROJECTION_PASSES = 8


class AnnealerConfig(BaseModel):
    """Annealing parameters; ``boltzmann`` scales the acceptance exponent"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    t0: float = Field(default=1.0, gt=0, allow_inf_nan=False)
    cooling: float = Field(default=0.95, gt=0, lt=1)
    iters_per_temp: int = Field(default=100, ge=1)
    t_thres: float = Field(default=1e-4, gt=0, allow_inf_nan=False)
    boltzmann: float = Field(default=0.01, gt=0, allow_inf_nan=False)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    max_transfer_frac: float = Field(default=0.25, gt=0, le=1)

    @model_validator(mode="after")
    def _check_threshold(self):
        if self.t_thres >= self.t0:
            raise ValueError(f"t_thres ({self.t_thres:g}) must be below t0 ({self.t0:g})")
        return self


@dataclass(frozen=True)
class AnnealOutcome:
    best: Allocation
    initial: Allocation
    final: Allocation
    levels: int
    evaluations: int
    accepted: int


def temperature_schedule(config: AnnealerConfig) -> List[float]:
    """Levels t0*c, t0*c**2, ... through the first one at or below t_thres"""
    levels = []
    n = 1
    while True:
        temperature = config.t0 * config.cooling ** n
        levels.append(temperature)
        if temperature <= config.t_thres:
            return levels
        n += 1


def metropolis_accept(delta_eta: float, temperature: float, config: AnnealerConfig,
                      rng: np.random.Generator) -> bool:
    if temperature <= 0:
        raise ValidationError(f"temperature must be > 0 (got {temperature:g})")
    if delta_eta > 0:
        return True
    return bool(rng.random() < math.exp(delta_eta / (config.boltzmann * temperature)))


def _project_onto_demand(p: np.ndarray, lows: np.ndarray, highs: np.ndarray, demand: float) -> np.ndarray:
    # proportional scaling: a shortfall is spread by headroom, a surplus by slack above the minimum
    p = np.clip(p, lows, highs)
    for _ in range(_PROJECTION_PASSES):
        gap = demand - math.fsum(p)
        if abs(gap) <= 1e-12 * max(1.0, demand):
            break
        room = highs - p if gap > 0 else p - lows
        total_room = float(np.sum(room))
        if total_room <= 0:
            break
        p = np.clip(p + math.copysign(1.0, gap) * min(abs(gap), total_room) * room / total_room, lows, highs)
    return p


def _draw_transfer(p: np.ndarray, lows: np.ndarray, highs: np.ndarray, frac: float,
                   rng: np.random.Generator):
    m = len(p)
    giver = int(rng.integers(m))
    taker = int(rng.integers(m - 1))
    if taker >= giver:
        taker += 1
    room = min(p[giver] - lows[giver], highs[taker] - p[taker])
    delta = rng.uniform(0.0, frac * max(room, 0.0))
    return giver, taker, delta


def random_feasible_allocation(active: ActiveSet, demand: float, profiles: Fleet,
                               rng: np.random.Generator) -> Allocation:
    """Uniform draws inside every module range, scaled onto the demand"""
    members = profiles_for(active, profiles)
    check_feasible(active, demand, profiles)
    lows = np.array([p.p_out_min for p in members])
    highs = np.array([p.p_out_max for p in members])
    p = _project_onto_demand(rng.uniform(lows, highs), lows, highs, demand)
    return allocation_from_powers(active, list(p), profiles)


def perturb(allocation: Allocation, temperature: float, config: AnnealerConfig,
            rng: np.random.Generator, profiles: Fleet) -> Allocation:
    """
    Move a random amount of power between two distinct modules.

    The transfer size depends only on the headroom of the pair, so
    ``temperature`` is accepted for call compatibility and not used.
    """
    if len(allocation.shares) < 2:
        return allocation
    active = allocation.active_set
    members = profiles_for(active, profiles)
    p = np.array(allocation.p_out_vector())
    lows = np.array([m.p_out_min for m in members])
    highs = np.array([m.p_out_max for m in members])
    giver, taker, delta = _draw_transfer(p, lows, highs, config.max_transfer_frac, rng)
    if delta == 0:
        return allocation
    p[giver] = max(p[giver] - delta, lows[giver])
    p[taker] = min(p[taker] + delta, highs[taker])
    return allocation_from_powers(active, list(p), profiles)


def _starting_powers(active: ActiveSet, warm_start: Allocation, lows: np.ndarray,
                     highs: np.ndarray, demand: float) -> np.ndarray:
    if warm_start.active_set.key != active.key:
        raise ValidationError(
            f"warm start covers {warm_start.active_set}, annealing runs on {active}"
        )
    p = np.array([warm_start.share(mid).p_out for mid in active.module_ids])
    return _project_onto_demand(p, lows, highs, demand)


def run_annealing(profiles: Fleet, active: ActiveSet, demand: float,
                  config: Optional[AnnealerConfig] = None,
                  warm_start: Optional[Allocation] = None) -> AnnealOutcome:
    config = config or AnnealerConfig()
    members = profiles_for(active, profiles)
    check_feasible(active, demand, profiles)
    rng = np.random.default_rng(config.seed)

    lows = np.array([m.p_out_min for m in members])
    highs = np.array([m.p_out_max for m in members])
    if warm_start is not None:
        p = _starting_powers(active, warm_start, lows, highs, demand)
    else:
        p = _project_onto_demand(rng.uniform(lows, highs), lows, highs, demand)

    initial = allocation_from_powers(active, list(p), profiles)
    levels = temperature_schedule(config)
    if len(members) == 1:
        return AnnealOutcome(initial, initial, initial, len(levels), 0, 0)

    pin = np.array([pin_at_pout(m, x) for m, x in zip(members, p)])
    eta = math.fsum(p) / math.fsum(pin)
    best_p, best_eta = p.copy(), eta
    evaluations = accepted = 0

    for temperature in levels:
        for _ in range(config.iters_per_temp):
            giver, taker, delta = _draw_transfer(p, lows, highs, config.max_transfer_frac, rng)
            candidate = p.copy()
            candidate[giver] = max(p[giver] - delta, lows[giver])
            candidate[taker] = min(p[taker] + delta, highs[taker])
            candidate_pin = pin.copy()
            candidate_pin[giver] = pin_at_pout(members[giver], candidate[giver])
            candidate_pin[taker] = pin_at_pout(members[taker], candidate[taker])
            candidate_eta = math.fsum(candidate) / math.fsum(candidate_pin)
            evaluations += 1

            if metropolis_accept(candidate_eta - eta, temperature, config, rng):
                p, pin, eta = candidate, candidate_pin, candidate_eta
                accepted += 1
                if eta > best_eta:
                    best_p, best_eta = p.copy(), eta
        logger.debug(f"T={temperature:.3e} eta={eta:.9f} best={best_eta:.9f}")

    logger.info(
        f"Annealed {active} at {demand:g} W: {len(levels)} levels, "
        f"{accepted}/{evaluations} moves accepted, best eta {best_eta:.6f}"
    )
    return AnnealOutcome(
        best=allocation_from_powers(active, list(best_p), profiles),
        initial=initial,
        final=allocation_from_powers(active, list(p), profiles),
        levels=len(levels),
        evaluations=evaluations,
        accepted=accepted,
    )


def anneal(profiles: Fleet, active: ActiveSet, demand: float,
           config: Optional[AnnealerConfig] = None,
           warm_start: Optional[Allocation] = None) -> Allocation:
    """Best allocation of ``demand`` over ``active`` found by simulated annealing"""
    return run_annealing(profiles, active, demand, config, warm_start).best
