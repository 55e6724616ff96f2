from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field


class ProfileDocument(BaseModel):
    """
    Serialized ModuleProfile.

    Coefficients are constant term first: pin_coeffs[k] multiplies I**k.
    A model published as a_N*I**N + ... + a_1*I + a_0 is stored as
    [a_0, a_1, ..., a_N].
    """
    model_config = ConfigDict(extra="forbid")

    module_id: str = Field(min_length=1)
    pin_coeffs: List[float] = Field(min_length=1)
    pout_coeffs: List[float] = Field(min_length=1)
    i_min: float
    i_max: float


class ModuleShareDocument(BaseModel):
    module_id: str
    p_out_w: float
    p_in_w: float
    current_a: float
    clamped: bool = False


class AllocationDocument(BaseModel):
    demand_w: float
    total_p_out_w: float
    total_p_in_w: float
    eta: float
    active_modules: List[str]
    modules: List[ModuleShareDocument]


class TpsRecord(BaseModel):
    k: float
    p: float
    regime: str
    mode: int
    d1: float
    d2: float
    d3: float
    i_m_pu: float


class ComparisonDocument(BaseModel):
    demand_w: float
    eta_equal_split: Optional[float] = None
    equal_split_note: Optional[str] = None
    eta_optimized: float
    improvement_points: Optional[float] = None
    optimized_modules: List[str]
    allocation: AllocationDocument


class RunReport(BaseModel):
    command: List[str]
    inputs_digest: str
    outputs_digest: str
    seed: Optional[int] = None
    elapsed_s: float
    notes: List[str] = []
    outputs: Dict[str, object] = {}


class FitReportDocument(BaseModel):
    module_id: str
    profile_path: Optional[str] = None
    degree: int
    sample_count: int
    pin_rmse_w: float
    pin_r_squared: float
    pout_rmse_w: float
    pout_r_squared: float
    peak_eta: float
    peak_p_out_w: float
