"""
Experiment Controller

Controller for the synthetic sine-mixture experiment
"""
import argparse
import logging
from pathlib import Path
from typing import List


from app.cli.options import add_common_options, build_run_config, int_list
from app.cli.schemas.run import RunConfig
from app.common.enums import Command
from app.evaluation.experiments import SineExperimentConfig, sine_mixture_experiment
from app.evaluation.report import sine_frame
from app.evaluation.schemas import SineExperimentRow

logger = logging.getLogger(__name__)


class ExperimentController:
    """
    Controller for experiment operations
    """

    @staticmethod
    def sine_experiment(
        run: RunConfig,
        num_freqs: int = 12,
        noise_scale: float = 0.05,
        expert_counts: List[int] = (1, 3, 6, 12),
        seeds: int = 1,
    ) -> List[SineExperimentRow]:
        """
        Run the sine experiment for ``seeds`` consecutive seeds and write sine_experiment.csv
        """
        rows = []
        for offset in range(seeds):
            seed = run.seed + offset
            rows.extend(sine_mixture_experiment(
                num_freqs=num_freqs,
                noise_scale=noise_scale,
                expert_counts=expert_counts,
                seed=seed,
                config=SineExperimentConfig(seed=seed),
            ))

        output = Path(run.output)
        output.mkdir(parents=True, exist_ok=True)
        frame = sine_frame(rows)
        frame.to_csv(output / "sine_experiment.csv", index=False)
        run.write(output)
        summary = frame.groupby("expert_count")["test_mse"].agg(["mean", "std"])
        print(summary.to_string(float_format=lambda v: f"{v:.6f}"))
        return rows

    # Command handlers
    @staticmethod
    def cmd_sine_experiment(args: argparse.Namespace) -> int:
        run = build_run_config(args, Command.SINE_EXP)
        ExperimentController.sine_experiment(run, args.num_freqs, args.noise, args.expert_counts, args.seeds)
        return 0


def register(subparsers) -> None:
    """
    Add the sine-exp subcommand
    """
    parser = subparsers.add_parser(Command.SINE_EXP.value, help="Synthetic sine-mixture experiment")
    add_common_options(parser)
    parser.add_argument("--num-freqs", type=int, dest="num_freqs", default=12)
    parser.add_argument("--noise", type=float, default=0.05, help="Random-walk step std")
    parser.add_argument("--expert-counts", type=int_list, dest="expert_counts", default=[1, 3, 6, 12])
    parser.add_argument("--seeds", type=int, default=1, help="Number of consecutive seeds to run")
    parser.set_defaults(handler=ExperimentController.cmd_sine_experiment)
