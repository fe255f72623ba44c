"""
Linear-interpolation resampling

Three uses:
- stage-1 augmentation: stretch or compress a labelled series so its dominant frequency lands
  on an expert's assigned frequency
- short lookbacks: upsample inputs shorter than the trained lookback
- long lookbacks: search a downsampling scale that makes the gate most confident, with a
  penalty for the spectral energy the downsampling would fold away
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator

from app.common.enums import AdaptationMethod, ResampleDirection, ShortLookbackMode
from app.common.errors import ConfigError, DomainError
from app.model.experts import ExpertBank
from app.model.gating import GatingNetwork, gate_weights
from app.model.spectral import normalize_l1, periodogram, spectral_entropy, tail_energy_fraction

logger = logging.getLogger(__name__)


class ResampleConfig(BaseModel):
    """
    Knobs of the lookback adapters and of augmentation retargeting
    """
    scales: List[int] = Field(default_factory=lambda: [2, 4, 6])
    penalty_lambda: float = Field(default=2.0, ge=0.0)
    max_energy_loss: float = Field(default=0.2, gt=0.0, lt=1.0)
    r_max: float = Field(default=20.0, ge=1.0)
    omega_min: Optional[float] = Field(default=None, gt=0.0, le=0.5)
    enabled: bool = True
    short_mode: ShortLookbackMode = ShortLookbackMode.CEIL_FACTOR

    @field_validator("scales")
    @classmethod
    def check_scales(cls, value):
        if any(s <= 1 for s in value):
            raise ValueError(f"Search scales must all be greater than 1, got {value}")
        return sorted(set(value))

    class Config:
        json_schema_extra = {
            "example": {
                "scales": [2, 4, 6],
                "penalty_lambda": 2.0,
                "max_energy_loss": 0.2,
                "r_max": 20.0,
                "omega_min": None,
                "enabled": True,
                "short_mode": "ceil_factor",
            }
        }


@dataclass
class ResamplePlan:
    """
    How a series is resized: by ``scale`` >= 1 up or down
    """
    scale: float
    direction: ResampleDirection

    def __post_init__(self):
        if self.scale < 1.0:
            raise ConfigError(f"Resample scale must be >= 1, got {self.scale}")

    @classmethod
    def from_ratio(cls, ratio: float) -> "ResamplePlan":
        """
        Plan for output length ~ input length * ratio
        """
        if ratio > 1.0:
            return cls(scale=ratio, direction=ResampleDirection.UP)
        if ratio < 1.0:
            return cls(scale=1.0 / ratio, direction=ResampleDirection.DOWN)
        return cls(scale=1.0, direction=ResampleDirection.NONE)

    def output_length(self, input_length: int) -> int:
        if self.direction == ResampleDirection.UP:
            return int(round(input_length * self.scale))
        if self.direction == ResampleDirection.DOWN:
            return int(round(input_length / self.scale))
        return input_length


@dataclass
class LookbackAdaptation:
    """
    A lookback brought to the trained length, plus how to map the forecast back

    ``output_rescale`` multiplies the forecast length: 1/factor after short upsampling, the
    chosen scale s after the long search.
    """
    adapted_input: np.ndarray
    output_rescale: float
    method: AdaptationMethod
    scale: int = 1
    scores: Dict[int, float] = field(default_factory=dict)

    @classmethod
    def identity(cls, x: np.ndarray) -> "LookbackAdaptation":
        return cls(adapted_input=x, output_rescale=1.0, method=AdaptationMethod.NONE)


def linear_resample(x: np.ndarray, target_len: int) -> np.ndarray:
    """
    Resample a series to ``target_len`` uniformly spaced points over its index range

    The first and last samples are preserved exactly.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size < 2:
        raise DomainError(f"Resampling needs at least 2 samples, got {x.size}")
    if target_len < 2:
        raise DomainError(f"Resampling target length must be at least 2, got {target_len}")
    if target_len == x.size:
        return x.copy()
    positions = np.linspace(0.0, x.size - 1, target_len)
    return np.interp(positions, np.arange(x.size, dtype=np.float64), x)


def frequency_retarget(
    x: np.ndarray,
    source_freq: float,
    target_freq: float,
    r_max: float = 20.0,
    min_length: int = 2,
) -> Optional[np.ndarray]:
    """
    Stretch or compress a series so a tone at ``source_freq`` moves to ``target_freq``

    Args:
        x (np.ndarray): the labelled series
        source_freq (float): its dominant frequency, cycles per step
        target_freq (float): the frequency it should carry afterwards
        r_max (float): largest upsampling factor accepted
        min_length (int): shortest acceptable result, typically lookback + horizon

    Returns:
        Optional[np.ndarray]: the resampled series, or None when the factor exceeds ``r_max``
        or the result is too short
    """
    for value in (source_freq, target_freq):
        if not 0.0 < value <= 0.5:
            raise DomainError(f"Frequencies must lie in (0, 0.5], got {value}")

    ratio = source_freq / target_freq
    plan = ResamplePlan.from_ratio(ratio)
    if plan.direction == ResampleDirection.UP and plan.scale > r_max:
        logger.debug(f"Retarget {source_freq:.6g} -> {target_freq:.6g} needs factor {plan.scale:.3g} > r_max {r_max:g}")
        return None
    if plan.direction == ResampleDirection.NONE:
        return np.asarray(x, dtype=np.float64).copy()

    target_len = int(round(len(x) * ratio))
    if target_len < max(min_length, 2):
        logger.debug(f"Retarget {source_freq:.6g} -> {target_freq:.6g} leaves {target_len} < {min_length} steps")
        return None
    return linear_resample(x, target_len)


def adapt_short_lookback(
    x: np.ndarray,
    lookback: int,
    mode: ShortLookbackMode = ShortLookbackMode.CEIL_FACTOR,
) -> LookbackAdaptation:
    """
    Upsample a lookback shorter than the trained length

    In the default mode the series is upsampled by ceil(L_train / len) and the most recent
    L_train points are kept; the exact mode interpolates straight to L_train.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size < 2:
        raise DomainError(f"Lookback needs at least 2 samples, got {x.size}")
    if x.size == lookback:
        return LookbackAdaptation.identity(x)
    if x.size > lookback:
        raise ConfigError(f"Lookback of {x.size} exceeds the trained {lookback}; use the long-lookback search")

    if mode == ShortLookbackMode.EXACT:
        adapted = linear_resample(x, lookback)
        return LookbackAdaptation(
            adapted_input=adapted,
            output_rescale=x.size / lookback,
            method=AdaptationMethod.SHORT_UPSAMPLE,
        )

    factor = math.ceil(lookback / x.size)
    upsampled = linear_resample(x, x.size * factor)
    return LookbackAdaptation(
        adapted_input=upsampled[-lookback:],
        output_rescale=1.0 / factor,
        method=AdaptationMethod.SHORT_UPSAMPLE,
        scale=factor,
    )


def _gate_entropy(net: GatingNetwork, window: np.ndarray) -> float:
    decision = gate_weights(net, window[None, :], training=False)
    return spectral_entropy(decision.weights[0])


def max_admissible_scale(x: np.ndarray, spectrum_size: int, max_energy_loss: float, omega_min: float) -> int:
    """
    Largest downsampling scale the retained spectral content allows

    j* is the last bin whose cumulative normalized energy stays within 1 - max_energy_loss;
    the scale is floor(freq(j*) / omega_min), never below 1.
    """
    p = normalize_l1(periodogram(x, spectrum_size))
    cumulative = np.cumsum(p.bins)
    within = np.flatnonzero(cumulative <= 1.0 - max_energy_loss)
    j_star = int(within[-1]) if within.size else 0
    return max(1, int(math.floor(p.bin_frequencies[j_star] / omega_min)))


def long_lookback_search(
    x: np.ndarray,
    bank: ExpertBank,
    net: GatingNetwork,
    config: Optional[ResampleConfig] = None,
) -> LookbackAdaptation:
    """
    Pick the downsampling scale of a long lookback that minimizes gate entropy plus an
    energy-loss penalty

    Scale 1 (the most recent L_train points, no resampling) is scored first; a candidate scale
    replaces the current best only when its score is strictly lower, so ties keep the smaller
    scale.

    Args:
        x (np.ndarray): lookback longer than the trained length
        bank (ExpertBank): provides the trained lookback and the expert frequency table
        net (GatingNetwork): the gate whose entropy is minimized
        config (ResampleConfig): scales, penalty weight, energy budget and omega_min override

    Returns:
        LookbackAdaptation: the adapted lookback and the scale s the forecast must be
        stretched by
    """
    config = config or ResampleConfig()
    x = np.asarray(x, dtype=np.float64).ravel()
    lookback = bank.lookback
    if x.size <= lookback:
        raise ConfigError(f"Long-lookback search needs more than {lookback} samples, got {x.size}")

    cropped = x[-lookback:]
    if not config.enabled:
        return LookbackAdaptation.identity(cropped)

    spectrum_size = max(net.spectrum_size, math.ceil(x.size / 2))
    table = bank.frequency_table()
    omega_min = config.omega_min or (max(table) if table else 0.5)
    s_max = max_admissible_scale(x, spectrum_size, config.max_energy_loss, omega_min)
    p = normalize_l1(periodogram(x, spectrum_size))

    best_scale, best_input = 1, cropped
    best_score = _gate_entropy(net, cropped)
    scores = {1: best_score}
    admissible = 0
    for s in config.scales:
        length = int(round(x.size / s))
        if s > s_max or length < lookback:
            continue
        admissible += 1
        candidate = linear_resample(x, length)[-lookback:]
        score = _gate_entropy(net, candidate) + config.penalty_lambda * tail_energy_fraction(p, 0.5 / s)
        scores[s] = score
        if score < best_score:
            best_scale, best_input, best_score = s, candidate, score

    if admissible == 0:
        logger.info(f"No admissible scale for a lookback of {x.size} (s_max={s_max}); cropping to {lookback}")
        return LookbackAdaptation(adapted_input=cropped, output_rescale=1.0, method=AdaptationMethod.NONE, scores=scores)

    logger.info(f"Long-lookback search over {x.size} steps chose s={best_scale} (scores {scores})")
    return LookbackAdaptation(
        adapted_input=best_input,
        output_rescale=float(best_scale),
        method=AdaptationMethod.LONG_SEARCH,
        scale=best_scale,
        scores=scores,
    )


def rescale_forecast(y: np.ndarray, adaptation: LookbackAdaptation) -> np.ndarray:
    """
    Map a forecast made at the adapted granularity back to the original one
    """
    y = np.asarray(y, dtype=np.float64).ravel()
    if adaptation.method == AdaptationMethod.NONE or adaptation.output_rescale == 1.0:
        return y
    target_len = max(1, int(round(y.size * adaptation.output_rescale)))
    if target_len == y.size:
        return y
    if y.size < 2 or target_len < 2:
        return np.full(target_len, y[0])
    return linear_resample(y, target_len)
