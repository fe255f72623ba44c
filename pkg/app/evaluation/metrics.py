"""
Point-forecast metrics
"""
import logging
from typing import Iterable, Optional

import numpy as np

from app.common.errors import DimensionError, DomainError

logger = logging.getLogger(__name__)

# Seasonal period used by MASE for each sampling-rate label
SEASON_BY_LABEL = {
    "4s": 21600,
    "10s": 8640,
    "minutely": 1440,
    "1min": 1440,
    "5min": 288,
    "10min": 144,
    "15min": 96,
    "30min": 48,
    "half_hourly": 48,
    "hourly": 24,
    "daily": 7,
    "weekly": 52,
    "monthly": 12,
    "quarterly": 4,
    "yearly": 1,
}


def _check_shapes(pred: np.ndarray, target: np.ndarray):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"Prediction {pred.shape} and target {target.shape} differ")
    return pred, target


def mse(pred: np.ndarray, target: np.ndarray) -> float:
    pred, target = _check_shapes(pred, target)
    return float(np.mean((pred - target) ** 2))


def mae(pred: np.ndarray, target: np.ndarray) -> float:
    pred, target = _check_shapes(pred, target)
    return float(np.mean(np.abs(pred - target)))


def season_for_label(label: Optional[str], default: int = 1) -> int:
    """
    Seasonal period of a sampling-rate label such as "hourly"
    """
    if label is None:
        return default
    return SEASON_BY_LABEL.get(label.strip().lower(), default)


def mase(pred: np.ndarray, target: np.ndarray, insample: np.ndarray, season: int = 1) -> Optional[float]:
    """
    Mean absolute scaled error

    Args:
        pred (np.ndarray): forecasts
        target (np.ndarray): observed values, same shape as ``pred``
        insample (np.ndarray): the history the seasonal-naive scale is computed on
        season (int): seasonal lag

    Returns:
        Optional[float]: MAE divided by the in-sample seasonal-naive MAE, or None when that
        scale is zero
    """
    pred, target = _check_shapes(pred, target)
    insample = np.asarray(insample, dtype=np.float64).ravel()
    if season < 1:
        raise DomainError(f"Season must be positive, got {season}")
    if insample.size <= season:
        raise DomainError(f"MASE needs more than {season} in-sample points, got {insample.size}")
    scale = float(np.mean(np.abs(insample[season:] - insample[:-season])))
    if scale == 0.0:
        logger.warning(f"Seasonal-naive error at lag {season} is zero, MASE undefined")
        return None
    return mae(pred, target) / scale


def geometric_mean(values: Iterable[Optional[float]]) -> float:
    """
    exp(mean(ln v)); undefined (None) entries are skipped with a warning
    """
    values = list(values)
    defined = [v for v in values if v is not None]
    if len(defined) != len(values):
        logger.warning(f"Skipping {len(values) - len(defined)} undefined values in the geometric mean")
    if not defined:
        raise DomainError("Geometric mean of no values")
    array = np.asarray(defined, dtype=np.float64)
    if np.any(array <= 0):
        raise DomainError(f"Geometric mean needs positive values, got {array.min()}")
    return float(np.exp(np.mean(np.log(array))))
