"""
Least-squares polynomial fits of measured module samples.

Currents are mapped onto [-1, 1] before the solve (numpy's Polynomial.fit
window) and the coefficients converted back to the raw ampere domain, which
keeps the Vandermonde system well conditioned at higher degrees.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial

from ipop_dispatch.config import settings
from ipop_dispatch.profile import EfficiencySample, ModuleProfile, PowerPolynomial
from ipop_dispatch.validation import (
    ConditioningError, FitInputError, ModelError, validate_degree
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitReport:
    degree: int
    rmse: float
    r_squared: float
    max_residual: float
    sample_count: int


@dataclass(frozen=True)
class ProfileFit:
    profile: ModuleProfile
    pin_report: FitReport
    pout_report: FitReport


def _report(poly: PowerPolynomial, x: np.ndarray, y: np.ndarray) -> FitReport:
    residuals = y - poly.evaluate(x)
    ss_res = float(np.sum(residuals ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot > 0:
        r_squared = 1.0 - ss_res / ss_tot
    else:
        r_squared = 1.0 if ss_res == 0 else 0.0
    return FitReport(
        degree=poly.degree,
        rmse=float(np.sqrt(ss_res / len(x))),
        r_squared=r_squared,
        max_residual=float(np.max(np.abs(residuals))),
        sample_count=len(x),
    )


def fit_polynomial(samples: Sequence[Tuple[float, float]], degree: int) -> Tuple[PowerPolynomial, FitReport]:
    """Least-squares polynomial through (x, y) pairs, solved by SVD on the scaled design"""
    validate_degree(degree, minimum=1)
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise FitInputError("samples must be (x, y) pairs")
    if len(data) < degree + 1:
        raise FitInputError(
            f"{len(data)} samples cannot determine a degree-{degree} polynomial (need {degree + 1})"
        )
    if not np.all(np.isfinite(data)):
        raise FitInputError("samples must be finite")

    # sorting makes the solve independent of row order
    order = np.lexsort((data[:, 1], data[:, 0]))
    x, y = data[order, 0], data[order, 1]
    if np.ptp(x) == 0:
        raise ConditioningError(degree, 1)

    fitted, (_, rank, _, _) = Polynomial.fit(x, y, degree, full=True)
    if rank < degree + 1:
        raise ConditioningError(degree, int(rank))

    coefficients = fitted.convert().coef
    coefficients = np.pad(coefficients, (0, degree + 1 - len(coefficients)))
    poly = PowerPolynomial(tuple(coefficients))
    return poly, _report(poly, x, y)


def group_samples(samples: Sequence[EfficiencySample]) -> Dict[str, List[EfficiencySample]]:
    """Group samples by module id, keeping first-seen order"""
    groups: Dict[str, List[EfficiencySample]] = {}
    for sample in samples:
        groups.setdefault(sample.module_id, []).append(sample)
    return groups


def fit_module(samples: Sequence[EfficiencySample], degree: int = settings.DEFAULT_FIT_DEGREE) -> ProfileFit:
    """Fit P_in(I) and P_out(I) of one module and validate the resulting profile"""
    validate_degree(degree)
    if not samples:
        raise FitInputError("no samples to fit")
    module_ids = {sample.module_id for sample in samples}
    if len(module_ids) != 1:
        raise FitInputError(f"samples mix module ids: {', '.join(sorted(module_ids))}")
    module_id = samples[0].module_id
    if len(samples) < degree + 1:
        raise FitInputError(
            f"module '{module_id}': {len(samples)} samples cannot support degree {degree} (need {degree + 1})"
        )

    currents = [s.current for s in samples]
    pin_poly, pin_report = fit_polynomial([(s.current, s.p_in) for s in samples], degree)
    pout_poly, pout_report = fit_polynomial([(s.current, s.p_out) for s in samples], degree)
    logger.debug(
        f"Fitted '{module_id}' at degree {degree}: "
        f"P_in rmse={pin_report.rmse:.3g} W, P_out rmse={pout_report.rmse:.3g} W"
    )

    try:
        profile = ModuleProfile(
            module_id=module_id,
            pin_poly=pin_poly,
            pout_poly=pout_poly,
            i_min=min(currents),
            i_max=max(currents),
        )
    except ModelError as e:
        raise ModelError(
            f"{e}; try a lower degree than {degree} or add samples across the current range"
        ) from e
    return ProfileFit(profile=profile, pin_report=pin_report, pout_report=pout_report)


def fit_profile(samples: Sequence[EfficiencySample], degree: int = settings.DEFAULT_FIT_DEGREE) -> ModuleProfile:
    return fit_module(samples, degree).profile
