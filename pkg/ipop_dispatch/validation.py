"""
Exception hierarchy and input validation helpers for ipop-dispatch.

Every exception carries the process exit code the CLI reports for it.
"""

import math
from typing import Optional

from ipop_dispatch.config import settings


class DispatchError(Exception):
    """Base error for the package"""
    exit_code = 4


class ValidationError(DispatchError):
    """Invalid input or arguments"""
    exit_code = 2


class SampleFormatError(ValidationError):
    """Malformed sample CSV content"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FitInputError(ValidationError):
    """Samples cannot support the requested fit"""
    pass


class CapabilityError(ValidationError):
    """Request exceeds what a component is built to handle"""
    pass


class TpsDomainError(ValidationError):
    """Phase-shift closed form left its real domain"""

    def __init__(self, k: float, p: float, expression: str, radicand: float):
        self.k = k
        self.p = p
        self.expression = expression
        self.radicand = radicand
        super().__init__(
            f"negative radicand {radicand:.3e} in {expression} at k={k:g}, p={p:g}"
        )


class FeasibilityError(DispatchError):
    """Demand cannot be served within module bounds"""
    exit_code = 3


class OperatingRangeError(FeasibilityError):
    """A value lies outside a module's operating range"""

    def __init__(self, module_id: str, quantity: str, value: float, low: float, high: float):
        self.module_id = module_id
        self.quantity = quantity
        self.value = value
        self.low = low
        self.high = high
        super().__init__(
            f"module '{module_id}': {quantity} {value:g} outside [{low:g}, {high:g}]"
        )


class ModelError(DispatchError):
    """A power model violates its invariants"""
    pass


class ConditioningError(ModelError):
    """Rank-deficient least-squares design"""

    def __init__(self, degree: int, rank: int):
        self.degree = degree
        self.rank = rank
        super().__init__(
            f"design matrix for degree {degree} is rank deficient (rank {rank} < {degree + 1})"
        )


class SingularityError(ModelError):
    """Marginal rate undefined because dP_in/dI vanishes"""
    pass


class SolverError(DispatchError):
    """Numerical solver failed to produce a consistent answer"""
    pass


def validate_positive(value: float, field_name: str) -> float:
    """Validate a finite, strictly positive number"""
    if value is None or not math.isfinite(value):
        raise ValidationError(f"{field_name} must be a finite number")
    if value <= 0:
        raise ValidationError(f"{field_name} must be > 0 (got {value:g})")
    return float(value)


def validate_degree(degree: int, minimum: Optional[int] = None) -> int:
    """Validate a polynomial degree against a minimum"""
    minimum = settings.MIN_FIT_DEGREE if minimum is None else minimum
    if not isinstance(degree, int) or isinstance(degree, bool):
        raise ValidationError("Degree must be an integer")
    if degree < minimum:
        if minimum == settings.MIN_FIT_DEGREE:
            raise FitInputError(
                f"degree {degree} rejected: N is at least {minimum} so the fit can carry I^2 R loss terms"
            )
        raise FitInputError(f"degree {degree} rejected (minimum {minimum})")
    return degree


def validate_step(step: float) -> float:
    """Validate a grid step in watts"""
    return validate_positive(step, "step")


def validate_demand_range(p_min: float, p_max: float) -> tuple:
    """Validate an ordered demand interval"""
    if not (math.isfinite(p_min) and math.isfinite(p_max)):
        raise ValidationError("Demand range must be finite")
    if p_min >= p_max:
        raise ValidationError(f"p_min ({p_min:g}) must be below p_max ({p_max:g})")
    return float(p_min), float(p_max)
