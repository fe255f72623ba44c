"""
Pydantic schemas for evaluation reports
"""
from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from app.common.enums import MetricName


class EvalRecord(BaseModel):
    """
    One metric value for one dataset and horizon; ``horizon`` None marks the average row
    """
    dataset: str
    horizon: Optional[int] = None
    metric: MetricName
    value: Optional[float] = None
    num_windows: int = 0

    class Config:
        json_schema_extra = {
            "example": {"dataset": "ETTh1", "horizon": 96, "metric": "mse", "value": 0.364, "num_windows": 2785}
        }


class ExpertUsage(BaseModel):
    """
    How often and how strongly the gate picks one expert
    """
    expert_name: str
    assigned_frequency: Optional[float] = None
    mean_weight: float
    selection_rate: float = Field(ge=0.0, le=1.0)


class EvalReport(BaseModel):
    """
    Metric records plus per-dataset expert histograms
    """
    records: List[EvalRecord] = Field(default_factory=list)
    expert_histogram: Dict[str, List[ExpertUsage]] = Field(default_factory=dict)
    k: Optional[int] = None


class BoundReport(BaseModel):
    """
    Decomposition of one forecast's error into the out-of-span energy and the routing term

    bound = sqrt(e_perp) + estimation_term, estimation_term = gamma ||X|| ||beta - G||_1
    """
    e_perp: float = Field(ge=0.0)
    e_perp_input: float = Field(ge=0.0)
    estimation_term: float = Field(ge=0.0)
    bound: float
    empirical_error: float = Field(ge=0.0)
    gamma: float = Field(gt=0.0)
    relaxed_bound: Optional[float] = None
    beta: List[float] = Field(default_factory=list)
    gate_weights: List[float] = Field(default_factory=list)

    @property
    def holds(self) -> bool:
        return self.empirical_error <= self.bound


class SineExperimentRow(BaseModel):
    """
    Pooled test MSE of a model with ``expert_count`` experts on the sine-mixture benchmark
    """
    expert_count: int
    test_mse: float
    seed: int
