"""
Per-module power models.

A ModuleProfile holds two polynomials in the module current I, P_in(I) and
P_out(I), plus the current range the module is allowed to operate in.
Coefficients are stored constant-term first: ``coefficients[k]`` multiplies
``I**k``. Published models are usually written highest degree first
(a_N ... a_1), so ``coefficients == list(reversed(published))``.
"""

import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import optimize

from ipop_dispatch.models.documents import ProfileDocument
from ipop_dispatch.validation import (
    ModelError, OperatingRangeError, SingularityError, ValidationError
)


MONOTONICITY_SAMPLES = 256
PEAK_SCAN_POINTS = 1024
INVERSION_TABLE_POINTS = 1025

# relative slack when checking a value against a module bound
_BOUND_RTOL = 1e-12
_INVERT_RTOL = 1e-13
_EFFICIENCY_RTOL = 1e-9


class EfficiencySample(BaseModel):
    """One measured operating point of one module"""
    model_config = ConfigDict(frozen=True)

    module_id: str = Field(min_length=1)
    current: float = Field(gt=0, allow_inf_nan=False)
    p_in: float = Field(gt=0, allow_inf_nan=False)
    p_out: float = Field(gt=0, allow_inf_nan=False)

    @model_validator(mode="after")
    def _check_efficiency(self):
        if self.p_out > self.p_in:
            raise ValueError(f"p_out ({self.p_out:g} W) exceeds p_in ({self.p_in:g} W)")
        return self


@dataclass(frozen=True)
class PowerPolynomial:
    """Polynomial in current, constant term first"""
    coefficients: Tuple[float, ...]

    def __post_init__(self):
        coefficients = tuple(float(c) for c in self.coefficients)
        if not coefficients:
            raise ValidationError("A power polynomial needs at least one coefficient")
        if not all(math.isfinite(c) for c in coefficients):
            raise ValidationError("Polynomial coefficients must be finite")
        object.__setattr__(self, "coefficients", coefficients)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x: float) -> float:
        acc = 0.0
        for c in reversed(self.coefficients):
            acc = acc * x + c
        return acc

    def derivative(self) -> "PowerPolynomial":
        if self.degree == 0:
            return PowerPolynomial((0.0,))
        return PowerPolynomial(tuple(k * c for k, c in enumerate(self.coefficients) if k > 0))

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return np.polynomial.polynomial.polyval(x, self.coefficients)

    def as_numpy(self) -> Polynomial:
        return Polynomial(self.coefficients)


@dataclass(frozen=True)
class ModuleProfile:
    """Fitted P_in(I), P_out(I) models of one module and its operating range"""
    module_id: str
    pin_poly: PowerPolynomial
    pout_poly: PowerPolynomial
    i_min: float
    i_max: float
    p_out_min: float = field(init=False)
    p_out_max: float = field(init=False)

    def __post_init__(self):
        if not self.module_id:
            raise ValidationError("module_id is required")
        if not (math.isfinite(self.i_min) and math.isfinite(self.i_max)):
            raise ValidationError(f"module '{self.module_id}': current range must be finite")
        if not 0 <= self.i_min < self.i_max:
            raise ValidationError(
                f"module '{self.module_id}': need 0 <= i_min < i_max (got {self.i_min:g}, {self.i_max:g})"
            )
        object.__setattr__(self, "p_out_min", self.pout_poly(self.i_min))
        object.__setattr__(self, "p_out_max", self.pout_poly(self.i_max))
        self._validate_models()

    def _validate_models(self):
        grid = np.linspace(self.i_min, self.i_max, MONOTONICITY_SAMPLES)
        slope = self.pout_poly.derivative().evaluate(grid)
        if np.any(slope <= 0):
            bad = float(grid[np.argmax(slope <= 0)])
            raise ModelError(
                f"module '{self.module_id}': P_out(I) is not strictly increasing on "
                f"[{self.i_min:g}, {self.i_max:g}] A (dP_out/dI <= 0 near I={bad:g} A)"
            )
        p_out = self.pout_poly.evaluate(grid)
        p_in = self.pin_poly.evaluate(grid)
        if np.any(p_out <= 0):
            raise ModelError(f"module '{self.module_id}': P_out(I) must be positive on the range")
        if np.any(p_out > p_in * (1 + _EFFICIENCY_RTOL)):
            bad = float(grid[np.argmax(p_out > p_in * (1 + _EFFICIENCY_RTOL))])
            raise ModelError(
                f"module '{self.module_id}': P_out exceeds P_in near I={bad:g} A (efficiency > 1)"
            )
        if not self.p_out_min < self.p_out_max:
            raise ModelError(f"module '{self.module_id}': p_out_min must be below p_out_max")


def _check_current(profile: ModuleProfile, current: float) -> float:
    slack = _BOUND_RTOL * max(1.0, abs(profile.i_max))
    if not math.isfinite(current) or current < profile.i_min - slack or current > profile.i_max + slack:
        raise OperatingRangeError(profile.module_id, "current", current, profile.i_min, profile.i_max)
    return min(max(current, profile.i_min), profile.i_max)


def eval_pin(profile: ModuleProfile, current: float) -> float:
    """Input power at ``current`` (W)"""
    return profile.pin_poly(_check_current(profile, current))


def eval_pout(profile: ModuleProfile, current: float) -> float:
    """Output power at ``current`` (W)"""
    return profile.pout_poly(_check_current(profile, current))


def efficiency(profile: ModuleProfile, current: float) -> float:
    current = _check_current(profile, current)
    return profile.pout_poly(current) / profile.pin_poly(current)


def invert_pout(profile: ModuleProfile, p_out: float) -> float:
    """
    Current at which the module delivers ``p_out``.

    Bracketed Newton iteration: every Newton step that would leave the current
    bracket is replaced by a bisection step, so convergence holds for any
    strictly increasing P_out(I).
    """
    slack = _BOUND_RTOL * max(1.0, abs(profile.p_out_max))
    if not math.isfinite(p_out) or p_out < profile.p_out_min - slack or p_out > profile.p_out_max + slack:
        raise OperatingRangeError(
            profile.module_id, "p_out", p_out, profile.p_out_min, profile.p_out_max
        )
    if p_out <= profile.p_out_min:
        return profile.i_min
    if p_out >= profile.p_out_max:
        return profile.i_max

    pout = profile.pout_poly
    dpout = pout.derivative()
    lo, hi = profile.i_min, profile.i_max
    x = lo + (hi - lo) * (p_out - profile.p_out_min) / (profile.p_out_max - profile.p_out_min)
    tolerance = _INVERT_RTOL * max(1.0, abs(p_out))

    for _ in range(200):
        residual = pout(x) - p_out
        if abs(residual) <= tolerance:
            return x
        if residual < 0:
            lo = x
        else:
            hi = x
        slope = dpout(x)
        if slope <= 0:
            raise ModelError(
                f"module '{profile.module_id}': non-monotone P_out(I) detected at I={x:g} A"
            )
        candidate = x - residual / slope
        if not lo < candidate < hi:
            candidate = 0.5 * (lo + hi)
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(x)):
            return candidate
        x = candidate
    return x


def pin_at_pout(profile: ModuleProfile, p_out: float) -> float:
    """Input power needed to deliver ``p_out``"""
    return profile.pin_poly(invert_pout(profile, p_out))


def pin_at_pout_array(profile: ModuleProfile, p_out: np.ndarray) -> np.ndarray:
    """
    Vectorized P_in(P_out). Values outside the module range are clipped to it;
    callers that care mask them out first.
    """
    p_out = np.clip(np.asarray(p_out, dtype=float), profile.p_out_min, profile.p_out_max)
    table_i = np.linspace(profile.i_min, profile.i_max, INVERSION_TABLE_POINTS)
    table_p = profile.pout_poly.evaluate(table_i)
    current = np.interp(p_out, table_p, table_i)
    dpout = profile.pout_poly.derivative()
    for _ in range(4):
        current = current - (profile.pout_poly.evaluate(current) - p_out) / dpout.evaluate(current)
        current = np.clip(current, profile.i_min, profile.i_max)
    return profile.pin_poly.evaluate(current)


def marginal_rate(profile: ModuleProfile, current: float) -> float:
    """dP_out/dP_in at ``current``, from analytic derivatives"""
    current = _check_current(profile, current)
    din = profile.pin_poly.derivative()(current)
    if din == 0.0:
        raise SingularityError(
            f"module '{profile.module_id}': dP_in/dI vanishes at I={current:g} A"
        )
    return profile.pout_poly.derivative()(current) / din


def peak_efficiency(profile: ModuleProfile) -> Tuple[float, float]:
    """
    (current, eta) of the efficiency maximum on the operating range.

    A dense scan finds the best grid cell; a bounded Brent search (golden
    section with parabolic steps) refines inside the neighbouring cells.
    """
    grid = np.linspace(profile.i_min, profile.i_max, PEAK_SCAN_POINTS)
    eta = profile.pout_poly.evaluate(grid) / profile.pin_poly.evaluate(grid)
    k = int(np.argmax(eta))
    best_current, best_eta = float(grid[k]), float(eta[k])

    lo = float(grid[max(k - 1, 0)])
    hi = float(grid[min(k + 1, len(grid) - 1)])
    result = optimize.minimize_scalar(
        lambda i: -(profile.pout_poly(i) / profile.pin_poly(i)),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-12 * max(1.0, abs(hi))},
    )
    if result.success and -result.fun > best_eta:
        best_current, best_eta = float(result.x), float(-result.fun)
    return best_current, best_eta


def quadratic_loss_profile(module_id: str, a0: float, a1: float, a2: float,
                           p_out_min: float, p_out_max: float, v_out: float = 1.0) -> ModuleProfile:
    """
    Profile for the quadratic loss model P_in = P + a0 + a1*P + a2*P**2,
    written in current with P_out = v_out * I.
    """
    if v_out <= 0:
        raise ValidationError("v_out must be positive")
    return ModuleProfile(
        module_id=module_id,
        pin_poly=PowerPolynomial((a0, v_out * (1.0 + a1), a2 * v_out ** 2)),
        pout_poly=PowerPolynomial((0.0, v_out)),
        i_min=p_out_min / v_out,
        i_max=p_out_max / v_out,
    )


def profile_to_document(profile: ModuleProfile) -> ProfileDocument:
    return ProfileDocument(
        module_id=profile.module_id,
        pin_coeffs=list(profile.pin_poly.coefficients),
        pout_coeffs=list(profile.pout_poly.coefficients),
        i_min=profile.i_min,
        i_max=profile.i_max,
    )


def profile_from_document(document: ProfileDocument) -> ModuleProfile:
    return ModuleProfile(
        module_id=document.module_id,
        pin_poly=PowerPolynomial(tuple(document.pin_coeffs)),
        pout_poly=PowerPolynomial(tuple(document.pout_coeffs)),
        i_min=document.i_min,
        i_max=document.i_max,
    )


def fleet_from_profiles(profiles: Sequence[ModuleProfile]) -> dict:
    """Index profiles by module id, rejecting duplicates"""
    fleet = {}
    for profile in profiles:
        if profile.module_id in fleet:
            raise ValidationError(f"Duplicate module id '{profile.module_id}' in fleet")
        fleet[profile.module_id] = profile
    return fleet
