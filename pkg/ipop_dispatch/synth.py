"""
Pinned synthetic two-module fleet shaped after measured 100 uH / 150 uH DAB
modules: single-module efficiencies cross at 290 W, the lighter-loss
150 uH module peaks higher at light load and the 100 uH module carries
heavy load.
"""

from typing import Dict, List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ipop_dispatch.profile import EfficiencySample, ModuleProfile, quadratic_loss_profile
from ipop_dispatch.validation import ValidationError


class SynthModule(BaseModel):
    """Quadratic-loss module: P_in = P_out + a0 + a2 * P_out**2"""
    model_config = ConfigDict(frozen=True)

    module_id: str
    a0: float = Field(ge=0)
    a2: float = Field(ge=0)
    p_out_min: float = Field(gt=0)
    p_out_max: float = Field(gt=0)
    v_out: float = Field(default=80.0, gt=0)

    def profile(self) -> ModuleProfile:
        return quadratic_loss_profile(
            self.module_id, self.a0, 0.0, self.a2, self.p_out_min, self.p_out_max, self.v_out
        )


DAB_PAIR_MODULES = (
    SynthModule(module_id="dab-100uH", a0=23.35, a2=6.9941e-5, p_out_min=10.0, p_out_max=1000.0),
    SynthModule(module_id="dab-150uH", a0=4.0, a2=3.0e-4, p_out_min=10.0, p_out_max=600.0),
)


def dab_pair_fleet() -> Dict[str, ModuleProfile]:
    return {module.module_id: module.profile() for module in DAB_PAIR_MODULES}


def dab_pair_samples(points: int = 25, noise_w: float = 0.0, seed: int = 0) -> List[EfficiencySample]:
    """
    Evenly spaced samples over each module's range. Gaussian noise of
    ``noise_w`` watts is added to P_in only.
    """
    if points < 2:
        raise ValidationError("At least 2 sample points per module are required")
    if noise_w < 0:
        raise ValidationError("noise_w must be >= 0")
    rng = np.random.default_rng(seed)
    samples = []
    for module in DAB_PAIR_MODULES:
        p_out = np.linspace(module.p_out_min, module.p_out_max, points)
        p_in = p_out + module.a0 + module.a2 * p_out ** 2
        if noise_w > 0:
            p_in = np.maximum(p_in + rng.normal(0.0, noise_w, points), p_out)
        for power, power_in in zip(p_out, p_in):
            samples.append(EfficiencySample(
                module_id=module.module_id,
                current=float(power / module.v_out),
                p_in=float(power_in),
                p_out=float(power),
            ))
    return samples
