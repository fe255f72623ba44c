"""
Analyze Controller

Controller for model and data inspection: parameter counts, periodograms and expert usage
"""
import argparse
import logging
from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd

from app.cli.checkpoint import load_model
from app.cli.options import add_common_options, add_data_options, add_model_options, build_run_config, load_datasets
from app.cli.schemas.run import RunConfig
from app.common.enums import Command
from app.common.errors import ConfigError
from app.data.series import make_windows
from app.evaluation.diagnostics import expert_distribution
from app.evaluation.report import histogram_frame
from app.model.spectral import normalize_l1, periodogram

logger = logging.getLogger(__name__)


class AnalyzeController:
    """
    Controller for analysis operations
    """

    @staticmethod
    def parameter_count(run: RunConfig) -> Dict[str, int]:
        """
        Count learnable parameters of a checkpoint, or of the configured model when none is given

        Returns:
            Dict[str, int]: total and per-component counts
        """
        if run.checkpoint is not None:
            model = load_model(run.checkpoint)
            experts = sum(e.weight.size + e.bias.size for e in model.bank.learnable())
            counts = {"experts": experts, "gate": model.gate.parameter_count(), "total": model.parameter_count()}
        else:
            config = run.model
            experts = config.num_learnable * (config.lookback * config.horizon + config.horizon)
            gate = config.spectrum_size * config.num_experts + config.num_experts
            counts = {"experts": experts, "gate": gate, "total": config.analytic_parameter_count()}
        for name, value in counts.items():
            print(f"{name}: {value:,}")
        return counts

    @staticmethod
    def periodograms(run: RunConfig, columns: Optional[List[str]] = None) -> Path:
        """
        Write the L1-normalized periodogram of each channel's last lookback window
        """
        M, L = run.model.spectrum_size, run.model.lookback
        frames = []
        for dataset in load_datasets(run, columns):
            for name, channel in zip(dataset.channel_names, dataset.channels):
                window = channel[-L:]
                spectrum = normalize_l1(periodogram(window, M))
                frames.append(pd.DataFrame({
                    "dataset": dataset.name,
                    "channel": name,
                    "frequency": spectrum.bin_frequencies,
                    "power": spectrum.bins,
                }))
        if not frames:
            raise ConfigError("--periodogram needs at least one --data file")
        output = Path(run.output)
        output.mkdir(parents=True, exist_ok=True)
        path = output / "periodogram.csv"
        pd.concat(frames, ignore_index=True).to_csv(path, index=False)
        logger.info(f"Wrote {len(frames)} periodograms to {path}")
        return path

    @staticmethod
    def histogram(run: RunConfig, columns: Optional[List[str]] = None, k: Optional[int] = None) -> Path:
        """
        Expert usage of a checkpoint over every lookback window of the given data
        """
        if run.checkpoint is None:
            raise ConfigError("--histogram needs --checkpoint")
        model = load_model(run.checkpoint)
        frames = []
        for dataset in load_datasets(run, columns):
            windows = make_windows(dataset, model.lookback, 0, run.train.stride)
            if not len(windows):
                logger.warning(f"{dataset.name}: shorter than the lookback {model.lookback}, skipped")
                continue
            frames.append(histogram_frame(expert_distribution(model, windows.inputs, k=k), dataset.name))
        if not frames:
            raise ConfigError("--histogram found no dataset long enough to window")
        output = Path(run.output)
        output.mkdir(parents=True, exist_ok=True)
        path = output / "expert_histogram.csv"
        frame = pd.concat(frames, ignore_index=True)
        frame.to_csv(path, index=False)
        print(frame.to_string(index=False))
        return path

    # Command handlers
    @staticmethod
    def cmd_analyze(args: argparse.Namespace) -> int:
        if not (args.params or args.periodogram or args.histogram):
            raise ConfigError("analyze needs at least one of --params, --periodogram, --histogram")
        run = build_run_config(args, Command.ANALYZE)
        if args.params:
            AnalyzeController.parameter_count(run)
        if args.periodogram:
            AnalyzeController.periodograms(run, args.column)
        if args.histogram:
            AnalyzeController.histogram(run, args.column, args.k)
        return 0


def register(subparsers) -> None:
    """
    Add the analyze subcommand
    """
    parser = subparsers.add_parser(Command.ANALYZE.value, help="Inspect parameter counts, spectra and expert usage")
    add_common_options(parser)
    add_data_options(parser)
    add_model_options(parser)
    parser.add_argument("--checkpoint", type=Path)
    parser.add_argument("--params", action="store_true", help="Print learnable parameter counts")
    parser.add_argument("--periodogram", action="store_true", help="Write normalized periodograms of the data")
    parser.add_argument("--histogram", action="store_true", help="Write expert usage of a checkpoint on the data")
    parser.add_argument("--k", type=int, help="Inference-time number of active experts")
    parser.set_defaults(handler=AnalyzeController.cmd_analyze)
