"""
The expert bank

Learnable experts are linear maps wrapped in non-affine reversible instance normalization:

    F(X) = sigma * (((X - mu) / sigma) W + b) + mu

where mu and sigma are the per-row mean and (clamped) standard deviation of the input.
Two fixed experts complete the bank: the naive forecaster (repeat the last value) and the mean
forecaster (repeat the lookback average).
"""
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Tuple

import numpy as np

from app.common.enums import ExpertKind
from app.common.errors import ConfigError, DimensionError

logger = logging.getLogger(__name__)

# Lower bound on the instance standard deviation
REVIN_EPS = 1e-5

# Periods (in steps) of the shipped frequency-expert table, longest first. Each matches one or
# more natural sampling rates: e.g. 21600 = 4-second samples over a day, 1440 = minutely/day,
# 288 = 5-minute/day, 48 = 30-minute/day, 24 = hourly/day, 7 = daily/week, 12 = monthly/year.
DEFAULT_PERIODS = (
    21600, 10080, 4320, 2016, 1440, 720, 672, 365, 336, 288, 240, 180, 168, 144, 120, 96,
    84, 60, 52, 48, 36, 30, 28, 27, 24, 20, 16, 14, 12, 10, 8, 7, 6, 5, 4, 3, 2,
)


def default_frequency_table() -> List[float]:
    """
    The 37 frequencies (cycles per step) assigned to frequency experts, lowest first
    """
    return [1.0 / p for p in DEFAULT_PERIODS]


def frequency_label(frequency: float) -> str:
    """
    Render a frequency as "1/N" when it is the reciprocal of a whole period
    """
    period = 1.0 / frequency
    if abs(period - round(period)) < 1e-9:
        return f"1/{int(round(period))}"
    return str(Fraction(frequency).limit_denominator(100000))


@dataclass
class RevinState:
    """
    Per-row statistics removed by instance normalization
    """
    mu: np.ndarray
    sigma: np.ndarray


@dataclass
class LinearExpert:
    """
    A RevIN-wrapped linear map from L_train lookback steps to H horizon steps
    """
    weight: np.ndarray
    bias: np.ndarray
    kind: ExpertKind
    assigned_frequency: Optional[float] = None
    frozen: bool = False
    index: int = 0

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise DimensionError(f"Expert weight {self.weight.shape} and bias {self.bias.shape} disagree")
        if self.kind == ExpertKind.FREQUENCY:
            if self.assigned_frequency is None or not 0.0 < self.assigned_frequency <= 0.5:
                raise ConfigError(f"Frequency expert needs a frequency in (0, 0.5], got {self.assigned_frequency}")
        elif self.kind == ExpertKind.COMPLEMENTARY:
            if self.assigned_frequency is not None:
                raise ConfigError("Complementary experts carry no frequency")
        else:
            raise ConfigError(f"{self.kind.value} experts are not learnable")

    @property
    def lookback(self) -> int:
        return self.weight.shape[0]

    @property
    def horizon(self) -> int:
        return self.weight.shape[1]

    @property
    def name(self) -> str:
        if self.kind == ExpertKind.FREQUENCY:
            return f"freq_{1.0 / self.assigned_frequency:g}"
        return f"comp_{self.index}"

    @classmethod
    def zeros(cls, lookback: int, horizon: int, frequency: float) -> "LinearExpert":
        """
        An untrained frequency expert: predicts the de-normalized input mean
        """
        return cls(
            weight=np.zeros((lookback, horizon)),
            bias=np.zeros(horizon),
            kind=ExpertKind.FREQUENCY,
            assigned_frequency=frequency,
        )


def revin_normalize(X: np.ndarray, eps: float = REVIN_EPS) -> Tuple[np.ndarray, RevinState]:
    """
    Standardize every row to zero mean and unit standard deviation

    The standard deviation is clamped from below by ``eps`` so constant rows map to zeros.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] < 1:
        raise DimensionError("Instance normalization needs at least one step")
    mu = X.mean(axis=1, keepdims=True)
    sigma = np.maximum(X.std(axis=1, keepdims=True), eps)
    return (X - mu) / sigma, RevinState(mu=mu, sigma=sigma)


def revin_denormalize(Y: np.ndarray, state: RevinState) -> np.ndarray:
    """
    Re-apply the removed statistics to normalized outputs
    """
    return Y * state.sigma + state.mu


def expert_forward(expert: LinearExpert, X: np.ndarray) -> np.ndarray:
    """
    Forecast H steps for every row of X with one learnable expert

    Args:
        expert (LinearExpert): the expert to apply
        X (np.ndarray): batch of shape B x L_train

    Returns:
        np.ndarray: forecasts of shape B x H
    """
    X = np.atleast_2d(X)
    if X.shape[1] != expert.lookback:
        raise DimensionError(f"Expert {expert.name} expects lookback {expert.lookback}, got {X.shape[1]}")
    normalized, state = revin_normalize(X)
    return revin_denormalize(normalized @ expert.weight + expert.bias, state)


def naive_forward(X: np.ndarray, horizon: int) -> np.ndarray:
    """
    Repeat the last lookback value of every row
    """
    X = np.atleast_2d(X)
    return np.repeat(X[:, -1:], horizon, axis=1)


def mean_forward(X: np.ndarray, horizon: int) -> np.ndarray:
    """
    Repeat the lookback mean of every row
    """
    X = np.atleast_2d(X)
    return np.repeat(X.mean(axis=1, keepdims=True), horizon, axis=1)


@dataclass
class ExpertBank:
    """
    Ordered collection of experts; gate columns index into this order

    Order: frequency experts by descending period, complementary experts, naive, mean.
    """
    frequency_experts: List[LinearExpert]
    complementary_experts: List[LinearExpert] = field(default_factory=list)
    include_naive: bool = True
    include_mean: bool = True
    lookback: int = 512
    horizon: int = 96

    def __post_init__(self):
        self.frequency_experts = sorted(self.frequency_experts, key=lambda e: e.assigned_frequency)
        for i, expert in enumerate(self.complementary_experts):
            expert.index = i
        for expert in self.learnable():
            if expert.weight.shape != (self.lookback, self.horizon):
                raise DimensionError(
                    f"Expert {expert.name} has shape {expert.weight.shape}, bank expects {(self.lookback, self.horizon)}"
                )
        if self.size == 0:
            raise ConfigError("An expert bank needs at least one expert")

    @property
    def num_frequency(self) -> int:
        return len(self.frequency_experts)

    @property
    def num_complementary(self) -> int:
        return len(self.complementary_experts)

    @property
    def size(self) -> int:
        return self.num_frequency + self.num_complementary + int(self.include_naive) + int(self.include_mean)

    def learnable(self) -> List[LinearExpert]:
        return self.frequency_experts + self.complementary_experts

    def naive_index(self) -> Optional[int]:
        return len(self.learnable()) if self.include_naive else None

    def mean_index(self) -> Optional[int]:
        if not self.include_mean:
            return None
        return len(self.learnable()) + int(self.include_naive)

    def expert_names(self) -> List[str]:
        names = [e.name for e in self.learnable()]
        if self.include_naive:
            names.append("naive")
        if self.include_mean:
            names.append("mean")
        return names

    def expert_kinds(self) -> List[ExpertKind]:
        kinds = [e.kind for e in self.learnable()]
        if self.include_naive:
            kinds.append(ExpertKind.NAIVE)
        if self.include_mean:
            kinds.append(ExpertKind.MEAN)
        return kinds

    def assigned_frequencies(self) -> List[Optional[float]]:
        return [e.assigned_frequency for e in self.learnable()] + [None] * (int(self.include_naive) + int(self.include_mean))

    def frequency_table(self) -> List[float]:
        return [e.assigned_frequency for e in self.frequency_experts]

    def forward_expert(self, index: int, X: np.ndarray) -> np.ndarray:
        """
        Output of the expert at ``index`` for every row of X
        """
        learnable = self.learnable()
        if index < len(learnable):
            return expert_forward(learnable[index], X)
        if index == self.naive_index():
            return naive_forward(X, self.horizon)
        if index == self.mean_index():
            return mean_forward(X, self.horizon)
        raise IndexError(f"Expert index {index} out of range for a bank of {self.size}")

    def learnable_parameter_count(self) -> int:
        return len(self.learnable()) * (self.lookback * self.horizon + self.horizon)
