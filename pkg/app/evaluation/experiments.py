"""
Synthetic experiment: more frequency experts on a bank of sine datasets
"""
import logging
from typing import List, Optional, Sequence

import numpy as np

from app.common.enums import ChannelMode, LrDecay, TrainStage
from app.common.seeding import substream
from app.data.schemas import LTSF_SPLIT
from app.data.series import Dataset, WindowSet, chronological_split, make_windows, prepend_context, standardize
from app.data.synthetic import tone_dataset
from app.evaluation.metrics import mse
from app.evaluation.schemas import SineExperimentRow
from app.model.experts import ExpertBank, LinearExpert
from app.model.forecaster import MixtureForecaster
from app.model.gating import GatingNetwork
from app.training.schemas import TrainConfig
from app.training.stages import train_router_stage2
from app.training.trainer import ExpertObjective, Trainer, WindowBatches

logger = logging.getLogger(__name__)

# Periods of the twelve sine datasets, in steps
SINE_PERIODS = (4, 5, 6, 8, 10, 12, 16, 20, 24, 32, 40, 48)


class SineExperimentConfig(TrainConfig):
    """
    Desk-scale settings of the sine benchmark
    """
    lookback: int = 96
    horizon: int = 24
    spectrum_size: int = 96
    series_length: int = 2400
    learning_rate: float = 0.01
    batch_size: int = 128
    epochs: int = 20
    patience: int = 3
    lr_decay: LrDecay = LrDecay.NONE
    top_k: int = 2
    noise_std: float = 0.1
    stride: int = 2
    window_cap: Optional[int] = None
    total_cap: Optional[int] = None


def sine_datasets(num_freqs: int, noise_scale: float, length: int, seed: int) -> List[Dataset]:
    """
    One single-channel tone dataset per period, with random-walk noise of step ``noise_scale``
    """
    periods = SINE_PERIODS[:num_freqs]
    return [
        tone_dataset(
            f"sine_{p}",
            period=p,
            length=length,
            num_channels=1,
            rng=substream(seed, f"data/sine_{p}"),
            walk_std=noise_scale,
        )
        for p in periods
    ]


def _prepare(datasets: Sequence[Dataset], lookback: int, horizon: int, stride: int):
    splits = []
    for dataset in datasets:
        train, val, test = chronological_split(dataset, LTSF_SPLIT)
        _, (train, val, test) = standardize(train, [val, test])
        splits.append((
            make_windows(train, lookback, horizon, stride),
            make_windows(prepend_context(train, val, lookback), lookback, horizon, stride),
            make_windows(prepend_context(val, test, lookback), lookback, horizon),
        ))
    return splits


def _train_group_expert(group, frequency: float, config: SineExperimentConfig, seed: int) -> LinearExpert:
    L, H = config.lookback, config.horizon
    train = WindowSet.concatenate([g[0] for g in group], L, H)
    val = WindowSet.concatenate([g[1] for g in group], L, H)
    expert = LinearExpert.zeros(L, H, frequency)
    Trainer(config, TrainStage.EXPERT_PRETRAIN).fit(
        ExpertObjective(expert),
        WindowBatches(train, config.batch_size, ChannelMode.INDEPENDENT),
        val,
        substream(seed, f"shuffle/{expert.name}"),
    )
    return expert


def sine_mixture_experiment(
    num_freqs: int = 12,
    noise_scale: float = 0.05,
    expert_counts: Sequence[int] = (1, 3, 6, 12),
    seed: int = 2025,
    config: Optional[SineExperimentConfig] = None,
) -> List[SineExperimentRow]:
    """
    Train banks of increasing size on the sine datasets and report pooled test MSE

    With c experts the datasets (ordered by period) are cut into c contiguous groups and
    each frequency expert is trained on one group. Banks with more than one expert then get
    a router trained on all datasets; test forecasts use the top-1 expert.

    Args:
        num_freqs (int): number of sine datasets, at most 12
        noise_scale (float): random-walk step standard deviation
        expert_counts (Sequence[int]): bank sizes, ascending, each <= num_freqs
        seed (int): run seed
        config (SineExperimentConfig): desk-scale training settings

    Returns:
        List[SineExperimentRow]: one row per expert count
    """
    config = config or SineExperimentConfig(seed=seed)
    if list(expert_counts) != sorted(expert_counts):
        raise ValueError(f"Expert counts must be ascending, got {list(expert_counts)}")
    if not 1 <= num_freqs <= len(SINE_PERIODS):
        raise ValueError(f"num_freqs must lie in [1, {len(SINE_PERIODS)}], got {num_freqs}")

    L, H = config.lookback, config.horizon
    datasets = sine_datasets(num_freqs, noise_scale, config.series_length, seed)
    splits = _prepare(datasets, L, H, config.stride)
    test = WindowSet.concatenate([s[2] for s in splits], L, H)

    rows = []
    for count in expert_counts:
        if count > num_freqs:
            raise ValueError(f"Cannot split {num_freqs} datasets among {count} experts")
        groups = np.array_split(np.arange(num_freqs), count)
        experts = []
        for members in groups:
            frequency = float(np.exp(np.mean(np.log([datasets[i].dominant_frequency for i in members]))))
            experts.append(_train_group_expert([splits[i] for i in members], frequency, config, seed))

        bank = ExpertBank(frequency_experts=experts, include_naive=False, include_mean=False, lookback=L, horizon=H)
        top_k = min(config.top_k, bank.size)
        gate = GatingNetwork.initialize(config.spectrum_size, bank.size, top_k, config.noise_std, substream(seed, "init/gate"))
        model = MixtureForecaster(bank=bank, gate=gate)
        if bank.size > 1:
            train = WindowSet.concatenate([s[0] for s in splits], L, H)
            val = WindowSet.concatenate([s[1] for s in splits], L, H)
            train_router_stage2(model, train, val, config.model_copy(update={"stage": TrainStage.ROUTER_TRAIN}))

        test_mse = mse(model.predict(test.inputs, k=1), test.targets)
        logger.info(f"Sine experiment: {count} experts -> test MSE {test_mse:.6f}")
        rows.append(SineExperimentRow(expert_count=count, test_mse=test_mse, seed=seed))
    return rows
