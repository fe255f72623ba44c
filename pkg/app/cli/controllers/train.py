"""
Train Controller

Controller for the two training stages: per-frequency expert pretraining and router training
"""
import argparse
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Tuple

from app.cli.checkpoint import file_sha256, load_checkpoint, save_checkpoint, save_model
from app.cli.options import (
    add_common_options,
    add_data_options,
    add_model_options,
    add_resample_options,
    add_train_options,
    build_run_config,
    default_split,
    load_datasets,
)
from app.cli.schemas.run import MANIFEST_FILE, TRAINING_LOG_FILE, ExpertManifest, ManifestEntry, RunConfig
from app.common.enums import Command, TrainingMode
from app.common.errors import ConfigError, DataError, IntegrityError, TrainingError
from app.common.seeding import substream
from app.data.schemas import PRETRAIN_SPLIT, SplitSpec
from app.data.series import chronological_split, make_windows, prepend_context, standardize
from app.model.experts import ExpertBank, LinearExpert, frequency_label
from app.model.forecaster import MixtureForecaster, assemble_forecaster
from app.training.corpus import FrequencyPool, PooledBatches
from app.training.schemas import TrainingHistory
from app.training.stages import (
    complementary_init,
    select_k_full_shot,
    train_expert_stage1,
    train_joint,
    train_router_stage2,
)

logger = logging.getLogger(__name__)


def expert_file_name(frequency: float) -> str:
    return f"expert_{frequency_label(frequency).replace('/', '-')}.ckpt"


def _append_logs(directory: Path, histories: List[TrainingHistory]) -> None:
    with open(Path(directory) / TRAINING_LOG_FILE, "a") as log_file:
        for history in histories:
            log_file.write(history.to_jsonl())


class TrainController:
    """
    Controller for training operations
    """

    @staticmethod
    def train_experts(run: RunConfig, force: bool = False, split: Optional[SplitSpec] = None) -> ExpertManifest:
        """
        Stage 1: train one expert per frequency and record them in a manifest

        Frequencies already in the manifest, with an intact artifact, are skipped unless ``force``.
        ``split`` replaces the 80/20 train/validation split of every corpus series.
        """
        output = Path(run.output)
        output.mkdir(parents=True, exist_ok=True)
        lookback, horizon = run.model.lookback, run.model.horizon
        manifest_path = output / MANIFEST_FILE
        if manifest_path.exists():
            manifest = ExpertManifest.model_validate_json(manifest_path.read_text())
            if (manifest.lookback, manifest.horizon) != (lookback, horizon):
                raise ConfigError(
                    f"{manifest_path} was trained with L={manifest.lookback}, H={manifest.horizon}; "
                    f"requested L={lookback}, H={horizon}"
                )
        else:
            manifest = ExpertManifest(lookback=lookback, horizon=horizon, seed=run.seed)

        frequencies = run.model.frequency_table()
        pending = []
        for frequency in frequencies:
            entry = manifest.find(frequency)
            if not force and entry is not None and (output / entry.file).exists() and file_sha256(output / entry.file) == entry.sha256:
                logger.info(f"Expert {entry.label} already trained, skipping")
                continue
            pending.append(frequency)
        if not pending:
            logger.info("Every requested expert is already trained")
            run.write(output)
            return manifest

        datasets = load_datasets(run)
        if not any(d.dominant_frequency is not None for d in datasets):
            raise DataError(
                "No dataset carries a dominant-frequency label; pass --metadata with records "
                '{"name": ..., "dominant_frequency": "1/N"} for the corpus files'
            )
        pool = FrequencyPool.build(datasets, pending, lookback, horizon, run.train, r_max=run.resample.r_max, split=split or PRETRAIN_SPLIT)

        def train_one(frequency: float) -> Optional[Tuple[float, LinearExpert, TrainingHistory]]:
            try:
                expert, history = train_expert_stage1(pool, frequency, lookback, horizon, run.train)
            except TrainingError as e:
                logger.error(e.message)
                return None
            return frequency, expert, history

        with ThreadPoolExecutor(max_workers=run.threads) as executor:
            outcomes = list(executor.map(train_one, pending))
        results = [o for o in outcomes if o is not None]
        failed = [frequency_label(f) for f, o in zip(pending, outcomes) if o is None]

        run_snapshot = run.checkpoint_snapshot()
        for frequency, expert, history in results:
            bank = ExpertBank(
                frequency_experts=[expert],
                include_naive=False,
                include_mean=False,
                lookback=lookback,
                horizon=horizon,
            )
            name = expert_file_name(frequency)
            digest = save_checkpoint(output / name, bank, run_config=run_snapshot, history=[e.record() for e in history.epochs])
            manifest.upsert(ManifestEntry(
                label=frequency_label(frequency),
                frequency=frequency,
                file=name,
                sha256=digest,
                best_val_loss=history.best_val_loss,
            ))

        _append_logs(output, [h for _, _, h in results])
        manifest_path.write_text(manifest.model_dump_json(indent=2))
        run.write(output)
        logger.info(f"Stage 1 done: {len(results)} experts trained, {len(manifest.entries)} in {manifest_path}")
        if failed:
            raise TrainingError(f"No admissible training windows for {', '.join(failed)}", {"frequencies": failed})
        return manifest

    @staticmethod
    def load_stage1_experts(experts_dir: Path, frequencies: Optional[List[float]] = None) -> Tuple[ExpertManifest, List[LinearExpert]]:
        """
        Read a stage-1 manifest and every expert it lists, verifying the checksums
        """
        experts_dir = Path(experts_dir)
        manifest_path = experts_dir / MANIFEST_FILE
        if not manifest_path.exists():
            raise IntegrityError(f"No stage-1 manifest at {manifest_path}")
        manifest = ExpertManifest.model_validate_json(manifest_path.read_text())

        entries = manifest.entries
        if frequencies is not None:
            wanted = set(frequencies)
            entries = [e for e in entries if e.frequency in wanted]
            missing = wanted - {e.frequency for e in entries}
            if missing:
                raise IntegrityError(f"Manifest lacks experts for {sorted(frequency_label(f) for f in missing)}")

        experts = []
        for entry in entries:
            path = experts_dir / entry.file
            if not path.exists():
                raise IntegrityError(f"Manifest lists {entry.file} but the file is missing")
            if file_sha256(path) != entry.sha256:
                raise IntegrityError(f"Checksum mismatch for {entry.file}")
            loaded = load_checkpoint(path)
            if len(loaded.bank.frequency_experts) != 1 or loaded.bank.frequency_table() != [entry.frequency]:
                raise IntegrityError(f"{entry.file} does not hold the {entry.label} expert")
            experts.append(loaded.bank.frequency_experts[0])
        return manifest, experts

    @staticmethod
    def train_router(run: RunConfig, single_stage: bool = False, split=None) -> MixtureForecaster:
        """
        Stage 2: assemble the bank around frozen stage-1 experts and train gate plus
        complementary experts

        With ``single_stage`` every expert starts from scratch and trains together with the gate.
        """
        output = Path(run.output)
        output.mkdir(parents=True, exist_ok=True)
        model_config = run.model

        if single_stage:
            frequency_experts = [LinearExpert.zeros(model_config.lookback, model_config.horizon, f) for f in model_config.frequency_table()]
        else:
            if run.experts_dir is None:
                raise ConfigError("train-router needs --experts pointing at a stage-1 output directory")
            requested = model_config.frequencies
            manifest, frequency_experts = TrainController.load_stage1_experts(run.experts_dir, requested)
            model_config = model_config.model_copy(update={
                "lookback": manifest.lookback,
                "horizon": manifest.horizon,
                "frequencies": [e.assigned_frequency for e in frequency_experts],
            })
        if not run.data:
            raise ConfigError("train-router needs at least one --data file")

        def build(k: int) -> MixtureForecaster:
            complementary = complementary_init(model_config.num_complementary, model_config.lookback, model_config.horizon, run.seed)
            experts = [LinearExpert(weight=e.weight.copy(), bias=e.bias.copy(), kind=e.kind, assigned_frequency=e.assigned_frequency, frozen=not single_stage)
                       for e in frequency_experts]
            return assemble_forecaster(model_config.model_copy(update={"top_k": k}), experts, complementary, substream(run.seed, "init/gate"))

        histories: List[TrainingHistory] = []
        datasets = load_datasets(run)

        if run.mode == TrainingMode.FULL_SHOT:
            if len(datasets) != 1:
                raise ConfigError(f"Full-shot training takes exactly one dataset, got {len(datasets)}")
            dataset = datasets[0]
            train, val, _ = chronological_split(dataset, split or default_split(dataset.name))
            _, (train, val) = standardize(train, [val])
            L, H = model_config.lookback, model_config.horizon
            train_windows = make_windows(train, L, H, run.train.stride)
            val_windows = make_windows(prepend_context(train, val, L), L, H)
            if len(train_windows) == 0:
                raise DataError(f"{dataset.name}: train split too short for L={L} + H={H}")
            if run.train.k_sweep and not single_stage:
                model, best_k, table = select_k_full_shot(build, train_windows, val_windows, run.train, run.train.k_sweep)
                logger.info(f"Full-shot k sweep {table} -> k={best_k}")
            else:
                model = build(model_config.top_k)
                if single_stage:
                    histories.append(train_joint(model, train_windows, val_windows, run.train))
                else:
                    histories.append(train_router_stage2(model, train_windows, val_windows, run.train)[2])
        else:
            frequencies = model_config.frequency_table()
            pool = FrequencyPool.build(
                datasets, frequencies, model_config.lookback, model_config.horizon, run.train,
                r_max=run.resample.r_max, split=split or PRETRAIN_SPLIT,
            )
            source = PooledBatches(pool, run.train.batch_size)
            model = build(model_config.top_k)
            if single_stage:
                histories.append(train_joint(model, source, pool.validation_union(), run.train))
            else:
                histories.append(train_router_stage2(model, source, pool.validation_union(), run.train)[2])

        history_dump = [e.record() for h in histories for e in h.epochs]
        save_model(output / "model.ckpt", model, run_config=run.checkpoint_snapshot(), history=history_dump)
        _append_logs(output, histories)
        run.write(output)
        return model

    # Command handlers
    @staticmethod
    def cmd_train_experts(args: argparse.Namespace) -> int:
        run = build_run_config(args, Command.TRAIN_EXPERTS)
        TrainController.train_experts(run, force=args.force, split=args.split)
        return 0

    @staticmethod
    def cmd_train_router(args: argparse.Namespace) -> int:
        run = build_run_config(args, Command.TRAIN_ROUTER)
        TrainController.train_router(run, single_stage=args.single_stage, split=args.split)
        return 0


def register(subparsers) -> None:
    """
    Add the train-experts and train-router subcommands
    """
    experts = subparsers.add_parser(Command.TRAIN_EXPERTS.value, help="Stage 1: one expert per frequency")
    add_common_options(experts)
    add_data_options(experts)
    add_model_options(experts)
    add_train_options(experts)
    experts.add_argument("--force", action="store_true", help="Retrain experts already in the manifest")
    experts.set_defaults(handler=TrainController.cmd_train_experts)

    router = subparsers.add_parser(Command.TRAIN_ROUTER.value, help="Stage 2: gate and complementary experts")
    add_common_options(router)
    add_data_options(router)
    add_model_options(router)
    add_train_options(router)
    add_resample_options(router)
    router.add_argument("--experts", type=Path, help="Stage-1 output directory holding manifest.json")
    router.add_argument("--single-stage", action="store_true", help="Train every expert and the gate together")
    router.set_defaults(handler=TrainController.cmd_train_router)
