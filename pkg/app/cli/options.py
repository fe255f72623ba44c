"""
Shared command-line options and their resolution into a RunConfig

Precedence: built-in preset < environment settings < --config JSON file < explicit flags.
Flags default to None so only the ones actually given override anything.
"""
import argparse
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from app.common.config import get_settings
from app.common.enums import Command, LrDecay, ShortLookbackMode, TrainingMode
from app.common.errors import ConfigError
from app.data.schemas import ETT_SPLIT, LTSF_SPLIT, CsvSchema, SplitSpec, parse_frequency
from app.data.series import Dataset, attach_metadata, load_csv, load_metadata
from app.cli.schemas.run import RunConfig
from app.model.forecaster import FS_MODEL, ZS_MODEL
from app.training.schemas import FS_TRAIN, ZS_TRAIN

logger = logging.getLogger(__name__)


def int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Expected comma-separated integers, got {text!r}")


def frequency_list(text: str) -> List[float]:
    try:
        return [parse_frequency(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def add_common_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON file with model/train/resample sections")
    parser.add_argument("--output", type=Path, help="Output directory")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threads", type=int, help="Worker cap; 1 guarantees bit-level determinism")
    parser.add_argument("--log-level", dest="log_level")


def add_data_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", type=Path, action="append", default=[], help="CSV file; repeat for several")
    parser.add_argument("--metadata", type=Path, help="JSON sidecar with dataset frequency labels")
    parser.add_argument("--column", action="append", default=None, help="Column to use; repeat for several")
    parser.add_argument("--split", type=SplitSpec.parse, help='Train/val/test fractions, e.g. "0.6,0.2,0.2"')
    parser.add_argument("--cap", type=int, dest="window_cap", help="Per-dataset window cap")
    parser.add_argument("--stride", type=int)


def add_model_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--lookback", type=int)
    parser.add_argument("--horizon", type=int)
    parser.add_argument("--spectrum-size", type=int, dest="spectrum_size")
    parser.add_argument("--freqs", type=frequency_list, dest="frequencies", help='e.g. "1/24,1/48"')
    parser.add_argument("--num-comp", type=int, dest="num_complementary")
    parser.add_argument("--no-comp", action="store_true", help="No complementary experts")
    parser.add_argument("--no-naive-mean", action="store_true", help="Drop the naive and mean experts")


def add_train_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mode", type=TrainingMode, choices=list(TrainingMode), help="zs (pretraining) or fs (single dataset)")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch-size", type=int, dest="batch_size")
    parser.add_argument("--lr", type=float, dest="learning_rate")
    parser.add_argument("--patience", type=int)
    parser.add_argument("--lr-decay", type=LrDecay, choices=list(LrDecay), dest="lr_decay")
    parser.add_argument("--top-k", type=int, dest="top_k")
    parser.add_argument("--k-sweep", type=int_list, dest="k_sweep")
    parser.add_argument("--noise", type=float, dest="noise_std", help="Gate noise std during training")
    parser.add_argument("--rmax", type=float, dest="r_max")


def add_resample_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scales", type=int_list)
    parser.add_argument("--lambda", type=float, dest="penalty_lambda")
    parser.add_argument("--max-energy-loss", type=float, dest="max_energy_loss")
    parser.add_argument("--omega-min", type=parse_frequency, dest="omega_min")
    parser.add_argument("--short-mode", type=ShortLookbackMode, choices=list(ShortLookbackMode), dest="short_mode")
    parser.add_argument("--no-resample", action="store_true", help="Crop long lookbacks instead of searching")


def _given(args: argparse.Namespace, names: List[str]) -> Dict[str, Any]:
    return {n: getattr(args, n) for n in names if getattr(args, n, None) is not None}


def _read_config_file(path: Optional[Path]) -> Dict[str, Any]:
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"Malformed config file {path}: {e}")


def build_run_config(args: argparse.Namespace, command: Command) -> RunConfig:
    """
    Merge preset, environment, config file and flags into a validated RunConfig
    """
    settings = get_settings()
    file_config = _read_config_file(getattr(args, "config", None))
    mode = getattr(args, "mode", None) or TrainingMode(file_config.get("mode", TrainingMode.ZERO_SHOT.value))
    model_preset, train_preset = (FS_MODEL, FS_TRAIN) if mode == TrainingMode.FULL_SHOT else (ZS_MODEL, ZS_TRAIN)

    model = model_preset.model_dump()
    model.update(file_config.get("model", {}))
    model.update(_given(args, ["lookback", "horizon", "spectrum_size", "frequencies", "num_complementary", "top_k", "noise_std"]))
    if getattr(args, "no_comp", False):
        model["num_complementary"] = 0
    if getattr(args, "no_naive_mean", False):
        model["include_naive"] = model["include_mean"] = False

    train = train_preset.model_dump()
    train.update(file_config.get("train", {}))
    train.update(_given(args, ["epochs", "batch_size", "learning_rate", "patience", "lr_decay", "top_k", "k_sweep", "noise_std", "window_cap", "stride"]))

    resample = dict(file_config.get("resample", {}))
    resample.update(_given(args, ["scales", "penalty_lambda", "max_energy_loss", "r_max", "omega_min", "short_mode"]))
    if getattr(args, "no_resample", False):
        resample["enabled"] = False

    seed = next(v for v in (getattr(args, "seed", None), file_config.get("seed"), settings.seed) if v is not None)
    data = [settings.resolve_data_path(p) for p in (getattr(args, "data", None) or file_config.get("data", []))]
    try:
        return RunConfig(
            command=command,
            mode=mode,
            data=data,
            metadata=settings.resolve_data_path(getattr(args, "metadata", None) or file_config.get("metadata")),
            checkpoint=getattr(args, "checkpoint", None) or file_config.get("checkpoint"),
            experts_dir=getattr(args, "experts", None) or file_config.get("experts_dir"),
            output=getattr(args, "output", None) or file_config.get("output") or settings.output_dir,
            seed=seed,
            threads=getattr(args, "threads", None) or file_config.get("threads") or settings.threads,
            model=model,
            train=dict(train, seed=seed),
            resample=resample,
        )
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}")


def default_split(dataset_name: str) -> SplitSpec:
    """
    0.6/0.2/0.2 for the ETT family, 0.7/0.1/0.2 otherwise
    """
    return ETT_SPLIT if dataset_name.upper().startswith("ETT") else LTSF_SPLIT


def load_datasets(run: RunConfig, columns: Optional[List[str]] = None) -> List[Dataset]:
    """
    Load every --data CSV and attach sidecar metadata when given
    """
    metadata = load_metadata(run.metadata) if run.metadata is not None else {}
    schema = CsvSchema(columns=columns) if columns else CsvSchema()
    datasets = []
    for path in run.data:
        dataset = load_csv(path, schema)
        datasets.append(attach_metadata(dataset, metadata))
    return datasets
