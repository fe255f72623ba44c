"""
Forecast pipelines: autoregressive rollout, arbitrary-length series and benchmark evaluation
"""
import logging
import math
from typing import Iterable, List, Optional, Tuple

import numpy as np

from app.common.enums import AdaptationMethod, MetricName
from app.common.errors import DomainError
from app.data.schemas import SplitSpec
from app.data.series import Dataset, chronological_split, make_windows, prepend_context, standardize
from app.evaluation.metrics import mae, mase, mse
from app.evaluation.schemas import EvalRecord
from app.model.forecaster import MixtureForecaster
from app.model.resampling import (
    LookbackAdaptation,
    ResampleConfig,
    adapt_short_lookback,
    long_lookback_search,
    rescale_forecast,
)

# Configure logging
logger = logging.getLogger(__name__)

# Horizons of the long-horizon benchmark
DEFAULT_HORIZONS = (96, 192, 336, 720)

# Rows per chunk when rolling out many windows
ROLLOUT_CHUNK = 2048


def autoregressive_forecast(
    model: MixtureForecaster,
    X: np.ndarray,
    total_horizon: int,
    k: Optional[int] = None,
) -> np.ndarray:
    """
    Roll the model forward H steps at a time, feeding its forecasts back as lookback

    Args:
        model (MixtureForecaster): the forecaster
        X (np.ndarray): lookback of length L, or a batch B x L
        total_horizon (int): number of steps to produce
        k (int): optional inference-time k

    Returns:
        np.ndarray: forecasts of length ``total_horizon`` (B x total_horizon for a batch)
    """
    if total_horizon < 1:
        raise DomainError(f"Horizon must be positive, got {total_horizon}")
    single = np.ndim(X) == 1
    window = np.atleast_2d(np.asarray(X, dtype=np.float64))
    passes = math.ceil(total_horizon / model.horizon)

    pieces = []
    for _ in range(passes):
        step = model.predict(window, k=k)
        pieces.append(step)
        window = np.concatenate([window, step], axis=1)[:, -model.lookback:]
    output = np.concatenate(pieces, axis=1)[:, :total_horizon]
    return output[0] if single else output


def forecast_series(
    model: MixtureForecaster,
    x: np.ndarray,
    horizon: int,
    config: Optional[ResampleConfig] = None,
    k: Optional[int] = None,
) -> Tuple[np.ndarray, LookbackAdaptation]:
    """
    Forecast ``horizon`` steps after a series of any length >= 2

    Shorter lookbacks are upsampled, longer ones go through the resample search; the forecast
    is produced at the adapted granularity and mapped back to the original one.
    """
    config = config or ResampleConfig()
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size < 2:
        raise DomainError(f"Forecasting needs at least 2 input points, got {x.size}")
    if horizon < 1:
        raise DomainError(f"Horizon must be positive, got {horizon}")

    if x.size < model.lookback:
        adaptation = adapt_short_lookback(x, model.lookback, config.short_mode)
        logger.info(f"Lookback {x.size} < {model.lookback}: upsampled ({config.short_mode.value}, rescale {adaptation.output_rescale:.4g})")
    elif x.size > model.lookback:
        adaptation = long_lookback_search(x, model.bank, model.gate, config)
    else:
        adaptation = LookbackAdaptation.identity(x)

    if adaptation.method == AdaptationMethod.NONE:
        return autoregressive_forecast(model, adaptation.adapted_input, horizon, k=k), adaptation

    model_horizon = max(1, math.ceil(horizon / adaptation.output_rescale - 1e-9))
    raw = autoregressive_forecast(model, adaptation.adapted_input, model_horizon, k=k)
    return rescale_forecast(raw, adaptation)[:horizon], adaptation


def evaluate_dataset(
    model: MixtureForecaster,
    dataset: Dataset,
    split: SplitSpec,
    horizons: Iterable[int] = DEFAULT_HORIZONS,
    metrics: Iterable[MetricName] = (MetricName.MSE, MetricName.MAE),
    k: Optional[int] = None,
    season: int = 1,
) -> List[EvalRecord]:
    """
    Long-horizon benchmark protocol on one dataset

    Channels are split in time, standardized with train statistics, and every test window
    (lookback read across the validation border) is forecast for each horizon. Horizons the
    test split cannot hold are skipped with a warning. An average row closes the records.
    """
    metrics = list(metrics)
    train, val, test = chronological_split(dataset, split)
    _, (train, val, test) = standardize(train, [val, test])
    test = prepend_context(val, test, model.lookback)

    records: List[EvalRecord] = []
    per_metric = {metric: [] for metric in metrics}
    for horizon in horizons:
        windows = make_windows(test, model.lookback, horizon)
        if len(windows) == 0:
            logger.warning(f"{dataset.name}: test split too short for L={model.lookback} + H={horizon}, horizon skipped")
            continue
        preds = np.concatenate([
            autoregressive_forecast(model, windows.inputs[start : start + ROLLOUT_CHUNK], horizon, k=k)
            for start in range(0, len(windows), ROLLOUT_CHUNK)
        ])
        targets = windows.targets
        for metric in metrics:
            if metric == MetricName.MSE:
                value = mse(preds, targets)
            elif metric == MetricName.MAE:
                value = mae(preds, targets)
            else:
                value = _channel_mase(preds, targets, windows.source_channel, train, season)
            records.append(EvalRecord(dataset=dataset.name, horizon=horizon, metric=metric, value=value, num_windows=len(windows)))
            if value is not None:
                per_metric[metric].append(value)
        logger.info(f"{dataset.name} H={horizon}: " + ", ".join(f"{r.metric.value}={r.value}" for r in records[-len(metrics):]))

    for metric, values in per_metric.items():
        if values:
            records.append(EvalRecord(dataset=dataset.name, horizon=None, metric=metric, value=float(np.mean(values)), num_windows=0))
    return records


def _channel_mase(preds, targets, channels, train: Dataset, season: int) -> Optional[float]:
    values = []
    for channel in np.unique(channels):
        rows = channels == channel
        value = mase(preds[rows], targets[rows], train.channels[int(channel)], season)
        if value is not None:
            values.append(value)
    return float(np.mean(values)) if values else None
