"""
Training stages

Stage 1 trains every frequency expert on its own, on corpus windows retargeted to its
frequency. Stage 2 freezes them and trains the gate together with the complementary experts.
``train_joint`` is the single-stage alternative that trains everything at once.
"""
import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.common.enums import ExpertKind, TrainStage
from app.common.errors import ConfigError, TrainingError
from app.common.seeding import substream
from app.data.series import Dataset, WindowSet
from app.model.experts import ExpertBank, LinearExpert, frequency_label
from app.model.forecaster import MixtureForecaster
from app.model.gating import GatingNetwork
from app.training.corpus import FrequencyPool
from app.training.schemas import EpochLog, TrainConfig, TrainingHistory
from app.training.trainer import BatchSource, ExpertObjective, MixtureObjective, Trainer, WindowBatches, evaluate_loss

logger = logging.getLogger(__name__)

LogSink = Optional[Callable[[EpochLog], None]]


def complementary_init(num_complementary: int, lookback: int, horizon: int, seed: int) -> List[LinearExpert]:
    """
    Fresh complementary experts: weights N(0, 1/sqrt(L)), zero bias

    Each expert draws from its own ``init/comp_<i>`` stream.
    """
    experts = []
    for i in range(num_complementary):
        rng = substream(seed, f"init/comp_{i}")
        experts.append(
            LinearExpert(
                weight=rng.normal(0.0, 1.0 / np.sqrt(lookback), size=(lookback, horizon)),
                bias=np.zeros(horizon),
                kind=ExpertKind.COMPLEMENTARY,
                index=i,
            )
        )
    return experts


def freeze_frequency_experts(bank: ExpertBank) -> None:
    for expert in bank.frequency_experts:
        expert.frozen = True


def train_expert_stage1(
    corpus: Union[FrequencyPool, Sequence[Dataset]],
    target_freq: float,
    lookback: int,
    horizon: int,
    config: TrainConfig,
    r_max: float = 20.0,
    log_sink: LogSink = None,
) -> Tuple[LinearExpert, TrainingHistory]:
    """
    Train one frequency expert on windows retargeted to ``target_freq``

    Args:
        corpus: a prepared pool, or labelled datasets to build one from
        target_freq (float): the expert's assigned frequency
        lookback (int): L_train
        horizon (int): H
        config (TrainConfig): stage-1 hyperparameters
        r_max (float): largest accepted upsampling factor
        log_sink: optional receiver of epoch logs

    Returns:
        Tuple[LinearExpert, TrainingHistory]: the best-validation expert and its history
    """
    label = frequency_label(target_freq)
    if not isinstance(corpus, FrequencyPool):
        corpus = FrequencyPool.build(corpus, [target_freq], lookback, horizon, config, r_max=r_max)
    if target_freq not in corpus.entries or len(corpus.entry(target_freq).train) == 0:
        raise TrainingError(f"No admissible training windows for frequency {label}", {"frequency": label})
    entry = corpus.entry(target_freq)

    expert = LinearExpert.zeros(lookback, horizon, target_freq)
    trainer = Trainer(config, TrainStage.EXPERT_PRETRAIN, log_sink)
    history = trainer.fit(
        ExpertObjective(expert),
        WindowBatches(entry.train, config.batch_size, config.channel_mode),
        entry.validation,
        substream(config.seed, f"shuffle/{expert.name}"),
    )
    logger.info(f"Expert {label}: best validation loss {history.best_val_loss} at epoch {history.best_epoch}")
    return expert, history


def _train_mixture(
    model: MixtureForecaster,
    source: BatchSource,
    validation: Optional[WindowSet],
    config: TrainConfig,
    stage: TrainStage,
    log_sink: LogSink,
) -> TrainingHistory:
    objective = MixtureObjective(model, train_gate=True, noise_rng=substream(config.seed, "noise"))
    if len(objective.parameters()) == 0:
        raise ConfigError("No unfrozen parameters to train")
    trainer = Trainer(config, stage, log_sink)
    return trainer.fit(objective, source, validation, substream(config.seed, f"shuffle/{stage.value}"))


def train_router_stage2(
    model: MixtureForecaster,
    source: Union[BatchSource, WindowSet],
    validation: Optional[WindowSet],
    config: TrainConfig,
    log_sink: LogSink = None,
) -> Tuple[GatingNetwork, List[LinearExpert], TrainingHistory]:
    """
    Train the gate and the complementary experts with the frequency experts frozen

    ``source`` is either a batch source (zero-shot pooling) or one target dataset's windows
    (full shot), which are batched according to the config's channel mode.
    """
    unfrozen = [e.name for e in model.bank.frequency_experts if not e.frozen]
    if unfrozen:
        logger.info(f"Freezing {len(unfrozen)} frequency experts before router training")
        freeze_frequency_experts(model.bank)
    if isinstance(source, WindowSet):
        source = WindowBatches(source, config.batch_size, config.channel_mode)

    history = _train_mixture(model, source, validation, config, TrainStage.ROUTER_TRAIN, log_sink)
    return model.gate, model.bank.complementary_experts, history


def train_joint(
    model: MixtureForecaster,
    source: Union[BatchSource, WindowSet],
    validation: Optional[WindowSet],
    config: TrainConfig,
    log_sink: LogSink = None,
) -> TrainingHistory:
    """
    Single-stage training: frequency experts, complementary experts and gate together
    """
    for expert in model.bank.learnable():
        expert.frozen = False
    if isinstance(source, WindowSet):
        source = WindowBatches(source, config.batch_size, config.channel_mode)
    return _train_mixture(model, source, validation, config, TrainStage.JOINT, log_sink)


def select_k_full_shot(
    build_model: Callable[[int], MixtureForecaster],
    train: WindowSet,
    validation: WindowSet,
    config: TrainConfig,
    ks: Sequence[int],
    log_sink: LogSink = None,
) -> Tuple[MixtureForecaster, int, Dict[int, float]]:
    """
    Train one full-shot router per k and keep the one with the lowest validation MSE

    Args:
        build_model (Callable[[int], MixtureForecaster]): returns a fresh model routing to k experts
        train (WindowSet): target dataset training windows
        validation (WindowSet): target dataset validation windows
        config (TrainConfig): full-shot hyperparameters
        ks (Sequence[int]): candidate k values; ties go to the smaller k

    Returns:
        Tuple[MixtureForecaster, int, Dict[int, float]]: best model, its k, validation MSE per k
    """
    if not ks:
        raise ConfigError("The k sweep is empty")
    if len(validation) == 0:
        raise TrainingError("Selecting k needs validation windows")

    table: Dict[int, float] = {}
    best: Optional[Tuple[MixtureForecaster, int]] = None
    for k in sorted(set(ks)):
        model = build_model(k)
        if model.top_k != k:
            logger.warning(f"Skipping k={k}: the bank only holds {model.bank.size} experts")
            continue
        train_router_stage2(model, train, validation, config, log_sink)
        table[k] = evaluate_loss(MixtureObjective(model), validation)
        logger.info(f"k={k}: validation MSE {table[k]:.6f}")
        if best is None or table[k] < table[best[1]]:
            best = (model, k)
    if best is None:
        raise ConfigError(f"No k in {list(ks)} fits the bank")
    return best[0], best[1], table
