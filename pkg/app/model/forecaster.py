"""
The composed model: an expert bank routed by a spectral gate
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from app.common.errors import ConfigError
from app.data.schemas import parse_frequency
from app.model.experts import ExpertBank, LinearExpert, default_frequency_table
from app.model.gating import GateDecision, GatingNetwork, mixture_forward

logger = logging.getLogger(__name__)


class ModelConfig(BaseModel):
    """
    Architecture of a forecaster

    ``frequencies`` defaults to the shipped 37-entry table.
    """
    lookback: int = Field(default=512, ge=2)
    horizon: int = Field(default=96, ge=1)
    spectrum_size: int = Field(default=2500, ge=1)
    num_complementary: int = Field(default=12, ge=0)
    include_naive: bool = True
    include_mean: bool = True
    top_k: int = Field(default=12, ge=1)
    noise_std: float = Field(default=0.1, ge=0.0)
    frequencies: Optional[List[float]] = None

    @field_validator("frequencies", mode="before")
    @classmethod
    def parse_frequencies(cls, value):
        if value is None:
            return None
        if isinstance(value, str):
            value = [v for v in value.split(",") if v.strip()]
        return [parse_frequency(v) for v in value]

    @field_validator("frequencies")
    @classmethod
    def check_frequencies(cls, value):
        if value is None:
            return None
        for f in value:
            if not 0.0 < f <= 0.5:
                raise ValueError(f"Expert frequencies must lie in (0, 0.5], got {f}")
        if len(set(value)) != len(value):
            raise ValueError("Expert frequencies must be distinct")
        return sorted(value)

    @model_validator(mode="after")
    def check_geometry(self):
        if 2 * self.spectrum_size < self.lookback:
            raise ConfigError(f"Spectrum size {self.spectrum_size} too small for lookback {self.lookback} (need 2M >= L)")
        if self.top_k > self.num_experts:
            raise ConfigError(f"top_k={self.top_k} exceeds the {self.num_experts} experts of this configuration")
        return self

    def frequency_table(self) -> List[float]:
        return list(self.frequencies) if self.frequencies is not None else default_frequency_table()

    @property
    def num_learnable(self) -> int:
        return len(self.frequency_table()) + self.num_complementary

    @property
    def num_experts(self) -> int:
        return self.num_learnable + int(self.include_naive) + int(self.include_mean)

    def analytic_parameter_count(self) -> int:
        """
        N_learnable (L H + H) + M N + N
        """
        per_expert = self.lookback * self.horizon + self.horizon
        return self.num_learnable * per_expert + self.spectrum_size * self.num_experts + self.num_experts

    class Config:
        json_schema_extra = {
            "example": {
                "lookback": 512,
                "horizon": 96,
                "spectrum_size": 2500,
                "num_complementary": 12,
                "include_naive": True,
                "include_mean": True,
                "top_k": 12,
                "noise_std": 0.1,
                "frequencies": ["1/24", "1/168"],
            }
        }


# Zero-shot pretraining architecture
ZS_MODEL = ModelConfig()
# Full-shot architecture: fewer complementary experts, k chosen by sweep
FS_MODEL = ModelConfig(num_complementary=10)


@dataclass
class MixtureForecaster:
    """
    An expert bank and the gate routing over it
    """
    bank: ExpertBank
    gate: GatingNetwork

    def __post_init__(self):
        if self.gate.num_experts != self.bank.size:
            raise ConfigError(f"Gate scores {self.gate.num_experts} experts, bank holds {self.bank.size}")
        if 2 * self.gate.spectrum_size < self.bank.lookback:
            raise ConfigError(f"Gate spectrum size {self.gate.spectrum_size} too small for lookback {self.bank.lookback}")

    @property
    def lookback(self) -> int:
        return self.bank.lookback

    @property
    def horizon(self) -> int:
        return self.bank.horizon

    @property
    def top_k(self) -> int:
        return self.gate.top_k

    def forward(
        self,
        X: np.ndarray,
        training: bool = False,
        rng: Optional[np.random.Generator] = None,
        k: Optional[int] = None,
    ) -> Tuple[np.ndarray, GateDecision]:
        return mixture_forward(self.bank, self.gate, X, training=training, rng=rng, k=k)

    def predict(self, X: np.ndarray, k: Optional[int] = None) -> np.ndarray:
        """
        Inference-mode forecast of H steps for every row of X
        """
        output, _ = self.forward(X, training=False, k=k)
        return output

    def parameter_count(self) -> int:
        return self.bank.learnable_parameter_count() + self.gate.parameter_count()

    def expert_names(self) -> List[str]:
        return self.bank.expert_names()


def assemble_forecaster(
    config: ModelConfig,
    frequency_experts: Sequence[LinearExpert],
    complementary_experts: Sequence[LinearExpert],
    rng: np.random.Generator,
) -> MixtureForecaster:
    """
    Build a bank from trained experts and attach a freshly initialized gate

    Args:
        config (ModelConfig): architecture; its naive/mean flags decide the fixed experts
        frequency_experts (Sequence[LinearExpert]): one per assigned frequency
        complementary_experts (Sequence[LinearExpert]): may be empty
        rng (np.random.Generator): stream for the gate initialization

    Returns:
        MixtureForecaster: the composed model
    """
    bank = ExpertBank(
        frequency_experts=list(frequency_experts),
        complementary_experts=list(complementary_experts),
        include_naive=config.include_naive,
        include_mean=config.include_mean,
        lookback=config.lookback,
        horizon=config.horizon,
    )
    top_k = min(config.top_k, bank.size)
    if top_k != config.top_k:
        logger.warning(f"top_k={config.top_k} exceeds the bank of {bank.size}; using {top_k}")
    gate = GatingNetwork.initialize(config.spectrum_size, bank.size, top_k, config.noise_std, rng)
    logger.info(f"Assembled forecaster with {bank.size} experts ({bank.num_frequency} frequency, "
                f"{bank.num_complementary} complementary), {gate.parameter_count() + bank.learnable_parameter_count()} parameters")
    return MixtureForecaster(bank=bank, gate=gate)
