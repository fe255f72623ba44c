"""
Evaluate Controller

Controller for the long-horizon benchmark protocol
"""
import argparse
import logging
from pathlib import Path
from typing import List, Optional

from app.cli.checkpoint import load_model
from app.cli.options import add_common_options, add_data_options, build_run_config, default_split, int_list, load_datasets
from app.cli.schemas.run import RunConfig
from app.common.enums import Command, MetricName
from app.common.errors import ConfigError
from app.data.series import chronological_split, make_windows, prepend_context, standardize
from app.evaluation.diagnostics import expert_distribution
from app.evaluation.forecasting import DEFAULT_HORIZONS, evaluate_dataset
from app.evaluation.metrics import season_for_label
from app.evaluation.report import render_table, write_histogram_csv, write_report_csv
from app.evaluation.schemas import EvalReport

logger = logging.getLogger(__name__)


class EvaluateController:
    """
    Controller for evaluation operations
    """

    @staticmethod
    def evaluate(
        run: RunConfig,
        horizons: List[int] = DEFAULT_HORIZONS,
        metrics: List[MetricName] = (MetricName.MSE, MetricName.MAE),
        k: Optional[int] = None,
        season: Optional[int] = None,
        split=None,
        columns: Optional[list] = None,
    ) -> EvalReport:
        """
        Evaluate a checkpoint on every --data file; writes eval.csv and expert_histogram.csv
        """
        if run.checkpoint is None:
            raise ConfigError("evaluate needs --checkpoint")
        if not run.data:
            raise ConfigError("evaluate needs at least one --data file")
        model = load_model(run.checkpoint)
        if k is not None:
            logger.info(f"Rebalancing the gate from k={model.top_k} to k={k}")

        report = EvalReport(k=model.top_k if k is None else k)
        for dataset in load_datasets(run, columns):
            dataset_split = split or default_split(dataset.name)
            dataset_season = season or season_for_label(dataset.sampling_rate_label)
            report.records.extend(
                evaluate_dataset(model, dataset, dataset_split, horizons, metrics, k=k, season=dataset_season)
            )
            train, val, test = chronological_split(dataset, dataset_split)
            _, (_, val, test) = standardize(train, [val, test])
            windows = make_windows(prepend_context(val, test, model.lookback), model.lookback, 0)
            if len(windows):
                report.expert_histogram[dataset.name] = expert_distribution(model, windows.inputs, k=k)

        output = Path(run.output)
        write_report_csv(report, output / "eval.csv")
        write_histogram_csv(report, output / "expert_histogram.csv")
        run.write(output)
        print(render_table(report))
        return report

    # Command handlers
    @staticmethod
    def cmd_evaluate(args: argparse.Namespace) -> int:
        run = build_run_config(args, Command.EVALUATE)
        metrics = [MetricName(m) for m in (args.metric or [MetricName.MSE.value, MetricName.MAE.value])]
        EvaluateController.evaluate(run, args.horizons, metrics, args.k, args.season, args.split, args.column)
        return 0


def register(subparsers) -> None:
    """
    Add the evaluate subcommand
    """
    parser = subparsers.add_parser(Command.EVALUATE.value, help="Benchmark a checkpoint on datasets")
    add_common_options(parser)
    add_data_options(parser)
    parser.add_argument("--checkpoint", type=Path, required=True)
    parser.add_argument("--horizons", type=int_list, default=list(DEFAULT_HORIZONS))
    parser.add_argument("--metric", action="append", choices=[m.value for m in MetricName])
    parser.add_argument("--season", type=int, help="MASE seasonal lag, default from the sampling-rate label")
    parser.add_argument("--k", type=int, help="Inference-time number of active experts")
    parser.set_defaults(handler=EvaluateController.cmd_evaluate)
