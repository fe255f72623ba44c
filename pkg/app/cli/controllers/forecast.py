"""
Forecast Controller

Controller for forecasting series of any length with a trained model
"""
import argparse
import logging
from pathlib import Path
from typing import Dict, Optional

import numpy as np
import pandas as pd

from app.cli.checkpoint import load_model
from app.cli.options import add_common_options, add_data_options, add_resample_options, build_run_config, load_datasets
from app.cli.schemas.run import RunConfig
from app.common.enums import Command
from app.common.errors import ConfigError
from app.evaluation.forecasting import forecast_series

logger = logging.getLogger(__name__)


class ForecastController:
    """
    Controller for forecast operations
    """

    @staticmethod
    def forecast(
        run: RunConfig,
        horizon: int,
        columns: Optional[list] = None,
        context: Optional[int] = None,
        k: Optional[int] = None,
    ) -> Path:
        """
        Forecast every selected channel and write one CSV column per channel

        Args:
            run (RunConfig): resolved configuration, needs a checkpoint and one data file
            horizon (int): steps to forecast at the series' own granularity
            columns (list): channels to forecast, all numeric columns by default
            context (int): use only the last ``context`` points as lookback
            k (int): inference-time number of active experts

        Returns:
            Path: the written forecast CSV
        """
        if run.checkpoint is None:
            raise ConfigError("forecast needs --checkpoint")
        if len(run.data) != 1:
            raise ConfigError(f"forecast takes exactly one --data file, got {len(run.data)}")
        model = load_model(run.checkpoint)
        dataset = load_datasets(run, columns)[0]

        forecasts: Dict[str, np.ndarray] = {}
        for name, channel in zip(dataset.channel_names, dataset.channels):
            lookback = channel[-context:] if context else channel
            prediction, adaptation = forecast_series(model, lookback, horizon, run.resample, k=k)
            logger.info(f"{dataset.name}/{name}: lookback {lookback.size} via {adaptation.method.value} (scale {adaptation.scale})")
            forecasts[name] = prediction

        output = Path(run.output)
        output.mkdir(parents=True, exist_ok=True)
        path = output / f"forecast_{dataset.name}.csv"
        frame = pd.DataFrame(forecasts)
        frame.index = pd.RangeIndex(1, horizon + 1, name="step")
        frame.to_csv(path)
        run.write(output)
        logger.info(f"Wrote {horizon}-step forecasts for {len(forecasts)} channels to {path}")
        return path

    # Command handlers
    @staticmethod
    def cmd_forecast(args: argparse.Namespace) -> int:
        run = build_run_config(args, Command.FORECAST)
        ForecastController.forecast(run, args.horizon_steps, args.column, args.context, args.k)
        return 0


def register(subparsers) -> None:
    """
    Add the forecast subcommand
    """
    parser = subparsers.add_parser(Command.FORECAST.value, help="Forecast a series with a trained model")
    add_common_options(parser)
    add_data_options(parser)
    add_resample_options(parser)
    parser.add_argument("--checkpoint", type=Path, required=True)
    parser.add_argument("--horizon", type=int, dest="horizon_steps", default=96, help="Steps to forecast")
    parser.add_argument("--context", type=int, help="Use only the last N points as lookback")
    parser.add_argument("--k", type=int, help="Inference-time number of active experts")
    parser.set_defaults(handler=ForecastController.cmd_forecast)
