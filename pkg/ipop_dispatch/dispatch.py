"""
Load distribution across IPOP-connected modules.

For a fixed active set the optimum of eta = sum(P_out) / sum(P_in) under
sum(P_out) = demand is the economic-dispatch problem "minimize total input
power": every unclamped module runs at the same marginal rate
dP_out/dP_in. The solver parametrizes that common rate by its reciprocal
mu = dP_in/dP_out, lets every module pick its best current for a trial mu,
and bisects mu until the modules together deliver the demand.
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from ipop_dispatch.config import settings
from ipop_dispatch.profile import (
    ModuleProfile, eval_pin, invert_pout, marginal_rate, peak_efficiency
)
from ipop_dispatch.validation import (
    FeasibilityError, SolverError, ValidationError, validate_demand_range, validate_step
)

logger = logging.getLogger(__name__)

Fleet = Mapping[str, ModuleProfile]

RESPONSE_GRID_POINTS = 257
MAX_BISECTIONS = 200
# demand match for the mu bisection, relative to the demand
_DEMAND_RTOL = 1e-11
_FEASIBLE_RTOL = 1e-9
_CONSERVATION_RTOL = 1e-6
_SWITCH_RESIDUAL = 1e-8
# candidate sets closer than this in eta count as tied
_SET_TIE = 1e-9


@dataclass(frozen=True)
class ActiveSet:
    module_ids: Tuple[str, ...]

    def __post_init__(self):
        module_ids = tuple(self.module_ids)
        if not module_ids:
            raise ValidationError("An active set needs at least one module")
        if len(set(module_ids)) != len(module_ids):
            raise ValidationError(f"Duplicate module in active set: {', '.join(module_ids)}")
        object.__setattr__(self, "module_ids", module_ids)

    @property
    def key(self) -> FrozenSet[str]:
        return frozenset(self.module_ids)

    def __len__(self) -> int:
        return len(self.module_ids)

    def __str__(self) -> str:
        return "+".join(self.module_ids)


@dataclass(frozen=True)
class ModuleShare:
    module_id: str
    p_out: float
    p_in: float
    current: float
    clamped: bool = False


@dataclass(frozen=True)
class Allocation:
    shares: Tuple[ModuleShare, ...]
    total_p_out: float
    total_p_in: float
    eta: float

    @property
    def active_set(self) -> ActiveSet:
        return ActiveSet(tuple(share.module_id for share in self.shares))

    def share(self, module_id: str) -> ModuleShare:
        for share in self.shares:
            if share.module_id == module_id:
                return share
        raise KeyError(module_id)

    def p_out_vector(self) -> Tuple[float, ...]:
        return tuple(share.p_out for share in self.shares)


@dataclass(frozen=True)
class PriorityEntry:
    module_id: str
    peak_eta: float
    peak_power: float
    peak_current: float


@dataclass(frozen=True)
class PriorityList:
    entries: Tuple[PriorityEntry, ...]

    def __post_init__(self):
        etas = [entry.peak_eta for entry in self.entries]
        if any(later > earlier for earlier, later in zip(etas, etas[1:])):
            raise ValidationError("Priority list must be ordered by non-increasing peak efficiency")

    @property
    def module_ids(self) -> Tuple[str, ...]:
        return tuple(entry.module_id for entry in self.entries)


@dataclass(frozen=True)
class SwitchingPoint:
    p_total: float
    set_below: ActiveSet
    set_above: ActiveSet
    eta_at_switch: float


@dataclass(frozen=True)
class ScheduleEntry:
    p_lo: float
    p_hi: float
    active_set: Optional[ActiveSet]
    example_demand: Optional[float]
    exemplar: Optional[Allocation]

    @property
    def eta(self) -> Optional[float]:
        return self.exemplar.eta if self.exemplar else None

    @property
    def is_gap(self) -> bool:
        return self.active_set is None


@dataclass(frozen=True)
class DispatchSchedule:
    entries: Tuple[ScheduleEntry, ...]
    switching_points: Tuple[SwitchingPoint, ...]

    def lookup(self, demand: float) -> ScheduleEntry:
        """Entry serving ``demand``; a demand on a boundary belongs to the range above"""
        if not self.entries:
            raise ValidationError("Empty schedule")
        first, last = self.entries[0], self.entries[-1]
        if demand < first.p_lo or demand > last.p_hi:
            raise FeasibilityError(
                f"demand {demand:g} W outside schedule range [{first.p_lo:g}, {last.p_hi:g}] W"
            )
        for entry in self.entries:
            if entry.p_lo <= demand < entry.p_hi:
                return entry
        return last


def build_allocation(shares: Sequence[ModuleShare]) -> Allocation:
    total_p_out = math.fsum(share.p_out for share in shares)
    total_p_in = math.fsum(share.p_in for share in shares)
    return Allocation(
        shares=tuple(shares),
        total_p_out=total_p_out,
        total_p_in=total_p_in,
        eta=total_p_out / total_p_in,
    )


def profiles_for(active: ActiveSet, profiles: Fleet) -> List[ModuleProfile]:
    missing = [mid for mid in active.module_ids if mid not in profiles]
    if missing:
        raise ValidationError(f"No profile for module(s): {', '.join(missing)}")
    return [profiles[mid] for mid in active.module_ids]


def _at_bound(profile: ModuleProfile, current: float) -> bool:
    slack = 1e-12 * max(1.0, profile.i_max)
    return current <= profile.i_min + slack or current >= profile.i_max - slack


def share_at_power(profile: ModuleProfile, p_out: float, clamped: bool = False) -> ModuleShare:
    current = invert_pout(profile, p_out)
    return ModuleShare(
        module_id=profile.module_id,
        p_out=min(max(p_out, profile.p_out_min), profile.p_out_max),
        p_in=eval_pin(profile, current),
        current=current,
        clamped=clamped,
    )


def share_at_current(profile: ModuleProfile, current: float, clamped: bool = False) -> ModuleShare:
    return ModuleShare(
        module_id=profile.module_id,
        p_out=profile.pout_poly(current),
        p_in=profile.pin_poly(current),
        current=current,
        clamped=clamped,
    )


def allocation_from_powers(active: ActiveSet, p_outs: Sequence[float], profiles: Fleet) -> Allocation:
    """Allocation for explicit per-module output powers; bound-touching modules are flagged"""
    members = profiles_for(active, profiles)
    if len(p_outs) != len(members):
        raise ValidationError("One output power per active module is required")
    shares = []
    for profile, p_out in zip(members, p_outs):
        share = share_at_power(profile, p_out)
        shares.append(ModuleShare(
            share.module_id, share.p_out, share.p_in, share.current,
            clamped=_at_bound(profile, share.current),
        ))
    return build_allocation(shares)


def feasible_range(active: ActiveSet, profiles: Fleet) -> Tuple[float, float]:
    members = profiles_for(active, profiles)
    return (
        math.fsum(p.p_out_min for p in members),
        math.fsum(p.p_out_max for p in members),
    )


def check_feasible(active: ActiveSet, demand: float, profiles: Fleet) -> Tuple[float, float]:
    lo, hi = feasible_range(active, profiles)
    slack = _FEASIBLE_RTOL * max(1.0, abs(hi))
    if not math.isfinite(demand) or demand < lo - slack or demand > hi + slack:
        violated = "minimum" if demand < lo else "maximum"
        raise FeasibilityError(
            f"demand {demand:g} W violates the {violated} of set {active}: "
            f"feasible range is [{lo:g}, {hi:g}] W"
        )
    return lo, hi


def build_priority_list(profiles: Fleet) -> PriorityList:
    """Modules ordered by peak efficiency, best first"""
    if not profiles:
        raise ValidationError("At least one module profile is required")
    entries = []
    for module_id, profile in profiles.items():
        current, eta = peak_efficiency(profile)
        entries.append((PriorityEntry(module_id, eta, profile.pout_poly(current), current),
                        profile.pin_poly(profile.i_min)))
    # ties: lower light-load input power first, then module id
    entries.sort(key=lambda item: (-item[0].peak_eta, item[1], item[0].module_id))
    return PriorityList(tuple(entry for entry, _ in entries))


class _Responder:
    """Best current of one module for a trial mu = dP_in/dP_out"""

    def __init__(self, profile: ModuleProfile):
        self.profile = profile
        self.dpin = profile.pin_poly.as_numpy().deriv()
        self.dpout = profile.pout_poly.as_numpy().deriv()
        grid = np.linspace(profile.i_min, profile.i_max, RESPONSE_GRID_POINTS)
        mu = self.dpin(grid) / self.dpout(grid)
        self.mu_min = float(np.min(mu))
        self.mu_max = float(np.max(mu))

    def respond(self, mu: float) -> Tuple[float, bool]:
        """
        Minimize P_in(I) - mu * P_out(I) over the range. Every interior root of
        dP_in/dI - mu * dP_out/dI is a candidate next to both ends, so modules
        whose marginal rate is not monotone still get the global best.
        """
        profile = self.profile
        q = self.dpin - mu * self.dpout
        dq = q.deriv()
        candidates = []
        for root in q.roots() if q.degree() >= 1 else ():
            if abs(root.imag) > 1e-9 * max(1.0, abs(root.real)):
                continue
            current = float(root.real)
            for _ in range(2):
                slope = dq(current)
                if slope == 0:
                    break
                current -= q(current) / slope
            if profile.i_min < current < profile.i_max:
                candidates.append((current, False))
        candidates.sort()
        candidates.append((profile.i_min, True))
        candidates.append((profile.i_max, True))

        best, best_value = candidates[0], math.inf
        for current, at_bound in candidates:
            value = profile.pin_poly(current) - mu * profile.pout_poly(current)
            if value < best_value:
                best, best_value = (current, at_bound), value
        return best


def _total(responses: Dict[str, Tuple[float, bool]], responders: Dict[str, _Responder]) -> float:
    return math.fsum(responders[mid].profile.pout_poly(current) for mid, (current, _) in responses.items())


def _bridge_jump(low: Dict[str, Tuple[float, bool]], t_low: float,
                 high: Dict[str, Tuple[float, bool]], t_high: float,
                 demand: float, responders: Dict[str, _Responder]) -> Dict[str, Tuple[float, bool]]:
    # Demand falls inside a discontinuity of the summed response: modules
    # that jump take the remainder in proportion to their jump.
    theta = (demand - t_low) / (t_high - t_low)
    logger.debug(f"Demand {demand:g} W lies in a response jump, interpolating at theta={theta:.6f}")
    bridged = {}
    for mid, (current_low, bound_low) in low.items():
        profile = responders[mid].profile
        p_low = profile.pout_poly(current_low)
        p_high = profile.pout_poly(high[mid][0])
        if abs(p_high - p_low) <= 1e-12 * max(1.0, p_high):
            bridged[mid] = (current_low, bound_low)
            continue
        current = invert_pout(profile, p_low + theta * (p_high - p_low))
        bridged[mid] = (current, _at_bound(profile, current))
    return bridged


def _solve_free(free: Sequence[str], demand: float,
                responders: Dict[str, _Responder]) -> Dict[str, Tuple[float, bool]]:
    if len(free) == 1:
        profile = responders[free[0]].profile
        current = invert_pout(profile, demand)
        return {free[0]: (current, _at_bound(profile, current))}

    mu_lo = min(responders[mid].mu_min for mid in free)
    mu_hi = max(responders[mid].mu_max for mid in free)
    margin = (mu_hi - mu_lo) + 1.0
    mu_lo, mu_hi = mu_lo - margin, mu_hi + margin

    def respond_all(mu: float) -> Dict[str, Tuple[float, bool]]:
        return {mid: responders[mid].respond(mu) for mid in free}

    low, high = respond_all(mu_lo), respond_all(mu_hi)
    t_low, t_high = _total(low, responders), _total(high, responders)
    tolerance = _DEMAND_RTOL * max(1.0, abs(demand))
    if not t_low - tolerance <= demand <= t_high + tolerance:
        raise SolverError(
            f"marginal-rate bracket [{mu_lo:g}, {mu_hi:g}] does not enclose demand {demand:g} W "
            f"(delivers {t_low:g}..{t_high:g} W)"
        )
    if abs(t_low - demand) <= tolerance:
        return low
    if abs(t_high - demand) <= tolerance:
        return high

    for _ in range(MAX_BISECTIONS):
        mu = 0.5 * (mu_lo + mu_hi)
        if not mu_lo < mu < mu_hi:
            break
        middle = respond_all(mu)
        t_mid = _total(middle, responders)
        if abs(t_mid - demand) <= tolerance:
            return middle
        if t_mid < demand:
            mu_lo, low, t_low = mu, middle, t_mid
        else:
            mu_hi, high, t_high = mu, middle, t_mid
    return _bridge_jump(low, t_low, high, t_high, demand, responders)


def solve_equal_incremental(active: ActiveSet, demand: float, profiles: Fleet) -> Allocation:
    """
    Efficiency-optimal split of ``demand`` over ``active``.

    Unclamped modules end at a common marginal rate dP_out/dP_in. Modules whose
    best operating point is a range end are clamped there and the remaining
    demand is re-solved on the reduced set until no new clamps appear.
    """
    members = profiles_for(active, profiles)
    lo, hi = check_feasible(active, demand, profiles)
    slack = _FEASIBLE_RTOL * max(1.0, abs(hi))
    if demand >= hi - slack:
        return build_allocation([share_at_current(p, p.i_max, clamped=True) for p in members])
    if demand <= lo + slack:
        return build_allocation([share_at_current(p, p.i_min, clamped=True) for p in members])

    responders = {p.module_id: _Responder(p) for p in members}
    clamped: Dict[str, float] = {}
    free = list(active.module_ids)
    solution: Dict[str, Tuple[float, bool]] = {}

    for _ in range(len(members) + 1):
        remaining = demand - math.fsum(responders[mid].profile.pout_poly(i) for mid, i in clamped.items())
        solution = _solve_free(free, remaining, responders)
        newly_clamped = [mid for mid in free if solution[mid][1]]
        if not newly_clamped:
            break
        for mid in newly_clamped:
            clamped[mid] = solution[mid][0]
            free.remove(mid)
        logger.debug(f"Clamped {', '.join(newly_clamped)} at a bound; {len(free)} module(s) left free")
        if not free:
            break

    shares = []
    for profile in members:
        mid = profile.module_id
        if mid in clamped:
            shares.append(share_at_current(profile, clamped[mid], clamped=True))
        else:
            shares.append(share_at_current(profile, solution[mid][0]))
    allocation = build_allocation(shares)

    if abs(allocation.total_p_out - demand) > _CONSERVATION_RTOL * max(1.0, abs(demand)):
        raise SolverError(
            f"set {active}: allocated {allocation.total_p_out:g} W for a demand of {demand:g} W"
        )
    return allocation


def marginal_spread(allocation: Allocation, profiles: Fleet) -> float:
    """Largest pairwise marginal-rate difference among unclamped modules"""
    rates = [
        marginal_rate(profiles[share.module_id], share.current)
        for share in allocation.shares if not share.clamped
    ]
    if len(rates) < 2:
        return 0.0
    return max(rates) - min(rates)


def equal_split(active: ActiveSet, demand: float, profiles: Fleet) -> Allocation:
    """Control-group allocation: every active module delivers demand / m"""
    members = profiles_for(active, profiles)
    share = demand / len(members)
    return build_allocation([share_at_power(profile, share) for profile in members])


def find_switching_point(set_a: ActiveSet, set_b: ActiveSet, p_lo: float, p_hi: float,
                         profiles: Fleet) -> Optional[SwitchingPoint]:
    """Total output power in [p_lo, p_hi] where both sets reach the same optimal efficiency"""
    validate_demand_range(p_lo, p_hi)
    for active in (set_a, set_b):
        for p in (p_lo, p_hi):
            check_feasible(active, p, profiles)

    def gap(p: float) -> float:
        return (solve_equal_incremental(set_a, p, profiles).eta
                - solve_equal_incremental(set_b, p, profiles).eta)

    g_lo, g_hi = gap(p_lo), gap(p_hi)
    if g_lo == 0:
        p_star = p_lo
    elif g_hi == 0:
        p_star = p_hi
    elif g_lo * g_hi > 0:
        return None
    else:
        try:
            p_star = optimize.bisect(gap, p_lo, p_hi, xtol=1e-10, maxiter=MAX_BISECTIONS)
        except RuntimeError as e:
            raise SolverError(f"switching point between {set_a} and {set_b} did not converge: {e}") from e

    eta_a = solve_equal_incremental(set_a, p_star, profiles).eta
    eta_b = solve_equal_incremental(set_b, p_star, profiles).eta
    if abs(eta_a - eta_b) >= _SWITCH_RESIDUAL:
        logger.warning(
            f"Switching point {p_star:.6f} W between {set_a} and {set_b} leaves an efficiency gap of {eta_a - eta_b:.3e}"
        )

    a_wins_below = g_lo > 0 if g_lo != 0 else g_hi < 0
    below, above = (set_a, set_b) if a_wins_below else (set_b, set_a)
    return SwitchingPoint(
        p_total=p_star,
        set_below=below,
        set_above=above,
        eta_at_switch=eta_a if above is set_a else eta_b,
    )


def candidate_sets(priority: PriorityList, exhaustive: bool = False) -> List[ActiveSet]:
    """
    Combinations worth evaluating: priority-list prefixes plus every single
    module, or every non-empty subset when ``exhaustive`` and the fleet is small.
    """
    ids = priority.module_ids
    if exhaustive and len(ids) > settings.EXHAUSTIVE_SUBSET_LIMIT:
        logger.warning(
            f"Exhaustive search disabled for {len(ids)} modules "
            f"(limit {settings.EXHAUSTIVE_SUBSET_LIMIT}); using priority-list prefixes"
        )
        exhaustive = False
    if exhaustive:
        sets = [ActiveSet(combo) for size in range(1, len(ids) + 1)
                for combo in itertools.combinations(ids, size)]
    else:
        sets = [ActiveSet(ids[:size]) for size in range(1, len(ids) + 1)]
        sets += [ActiveSet((mid,)) for mid in ids]

    unique, seen = [], set()
    for active in sets:
        if active.key not in seen:
            seen.add(active.key)
            unique.append(active)
    return unique


def _set_size(active: ActiveSet, profiles: Fleet) -> Tuple[int, float]:
    return len(active.module_ids), math.fsum(profiles[mid].p_out_max for mid in active.module_ids)


def _best_candidate(candidates: Sequence[ActiveSet], demand: float,
                    profiles: Fleet) -> Tuple[Optional[ActiveSet], Optional[Allocation]]:
    # on a tie the larger set wins, so a demand at a switching point goes above
    best_set, best = None, None
    for active in candidates:
        lo, hi = feasible_range(active, profiles)
        slack = _FEASIBLE_RTOL * max(1.0, abs(hi))
        if demand < lo - slack or demand > hi + slack:
            continue
        allocation = solve_equal_incremental(active, demand, profiles)
        if best is None or allocation.eta > best.eta + _SET_TIE:
            best_set, best = active, allocation
        elif (allocation.eta >= best.eta - _SET_TIE
              and _set_size(active, profiles) > _set_size(best_set, profiles)):
            best_set, best = active, allocation
    return best_set, best


def optimal_allocation(profiles: Fleet, demand: float,
                       exhaustive: bool = False) -> Tuple[ActiveSet, Allocation]:
    """Most efficient candidate combination and its allocation for one demand"""
    candidates = candidate_sets(build_priority_list(profiles), exhaustive)
    active, allocation = _best_candidate(candidates, demand, profiles)
    if active is None:
        total_max = math.fsum(p.p_out_max for p in profiles.values())
        smallest_min = min(p.p_out_min for p in profiles.values())
        raise FeasibilityError(
            f"no module combination can deliver {demand:g} W "
            f"(fleet range [{smallest_min:g}, {total_max:g}] W, sum of p_out_max {total_max:g} W)"
        )
    return active, allocation


def demand_grid(p_min: float, p_max: float, step: float) -> List[float]:
    count = int(math.floor((p_max - p_min) / step + 1e-9))
    grid = [p_min + k * step for k in range(count + 1)]
    if grid[-1] < p_max - 1e-9 * max(1.0, p_max):
        grid.append(p_max)
    return grid


def _refine_boundary(set_a: Optional[ActiveSet], set_b: Optional[ActiveSet],
                     d_lo: float, d_hi: float, profiles: Fleet) -> Tuple[float, Optional[SwitchingPoint]]:
    if set_a is None:
        edge = feasible_range(set_b, profiles)[0]
        return min(max(edge, d_lo), d_hi), None
    if set_b is None:
        edge = feasible_range(set_a, profiles)[1]
        return min(max(edge, d_lo), d_hi), None

    a_lo, a_hi = feasible_range(set_a, profiles)
    b_lo, b_hi = feasible_range(set_b, profiles)
    lo, hi = max(d_lo, a_lo, b_lo), min(d_hi, a_hi, b_hi)
    if lo < hi:
        point = find_switching_point(set_a, set_b, lo, hi, profiles)
        if point is not None:
            return point.p_total, point
    # the winner changed because a set left or entered its feasible range
    if a_hi < d_hi:
        return max(a_hi, d_lo), None
    if b_lo > d_lo:
        return min(b_lo, d_hi), None
    return 0.5 * (d_lo + d_hi), None


def build_dispatch_schedule(profiles: Fleet, p_min: float, p_max: float, step: float,
                            exhaustive: bool = False, workers: Optional[int] = None) -> DispatchSchedule:
    """
    Best combination over a demand range, merged into ranges whose inner
    boundaries are refined to the switching points.
    """
    validate_demand_range(p_min, p_max)
    validate_step(step)
    candidates = candidate_sets(build_priority_list(profiles), exhaustive)
    demands = demand_grid(p_min, p_max, step)
    workers = settings.SCHEDULE_WORKERS if workers is None else workers
    logger.info(
        f"Evaluating {len(candidates)} combination(s) at {len(demands)} demand points "
        f"({workers} worker(s))"
    )

    def evaluate(demand: float):
        return _best_candidate(candidates, demand, profiles)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(evaluate, demands))
    else:
        results = [evaluate(demand) for demand in demands]

    # group consecutive gridpoints with the same winner
    runs: List[List[int]] = []
    for index, (active, _) in enumerate(results):
        key = active.key if active else None
        if runs:
            previous = results[runs[-1][0]][0]
            if (previous.key if previous else None) == key:
                runs[-1].append(index)
                continue
        runs.append([index])

    boundaries, switching_points = [], []
    for run, following in zip(runs, runs[1:]):
        boundary, point = _refine_boundary(
            results[run[-1]][0], results[following[0]][0],
            demands[run[-1]], demands[following[0]], profiles,
        )
        boundaries.append(boundary)
        if point is not None:
            switching_points.append(point)

    edges = [p_min] + boundaries + [p_max]
    entries = []
    for run, p_lo, p_hi in zip(runs, edges, edges[1:]):
        active, _ = results[run[0]]
        middle = 0.5 * (p_lo + p_hi)
        example = min(run, key=lambda index: (abs(demands[index] - middle), index))
        entries.append(ScheduleEntry(
            p_lo=p_lo,
            p_hi=p_hi,
            active_set=active,
            example_demand=demands[example] if active else None,
            exemplar=results[example][1],
        ))
        if active is None:
            logger.warning(f"No feasible combination for demands in [{p_lo:g}, {p_hi:g}] W")

    for point in switching_points:
        logger.info(f"Switching point {point.p_total:.2f} W: {point.set_below} -> {point.set_above}")
    return DispatchSchedule(entries=tuple(entries), switching_points=tuple(switching_points))
