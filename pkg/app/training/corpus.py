"""
Pretraining corpus organised by target frequency

Every dataset with a dominant-frequency label is standardized, split 80/20 in time, and each
split is retargeted so its dominant frequency lands on the target. Windows from all datasets
that survive retargeting form the pool entry of that frequency.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence

import numpy as np

from app.common.errors import DataError
from app.common.seeding import substream
from app.data.schemas import PRETRAIN_SPLIT, SplitSpec
from app.data.series import Dataset, WindowSet, cap_total, chronological_split, make_windows, standardize
from app.model.experts import frequency_label
from app.model.resampling import frequency_retarget
from app.training.schemas import TrainConfig

logger = logging.getLogger(__name__)


@dataclass
class PoolEntry:
    """
    Windows retargeted to one expert frequency
    """
    frequency: float
    train: WindowSet
    validation: WindowSet
    sources: List[str] = field(default_factory=list)

    @property
    def label(self) -> str:
        return frequency_label(self.frequency)


def _retarget_dataset(dataset: Dataset, target: float, min_length: int, r_max: float) -> Optional[Dataset]:
    channels = []
    for channel in dataset.channels:
        if len(channel) < 2:
            continue
        moved = frequency_retarget(channel, dataset.dominant_frequency, target, r_max=r_max, min_length=min_length)
        if moved is not None:
            channels.append(moved)
    if not channels:
        return None
    return dataset.with_channels(channels)


class FrequencyPool:
    """
    Per-frequency window sets for stage-1 and zero-shot stage-2 training
    """

    def __init__(self, entries: Dict[float, PoolEntry], lookback: int, horizon: int):
        self.entries = entries
        self.lookback = lookback
        self.horizon = horizon

    @classmethod
    def build(
        cls,
        datasets: Sequence[Dataset],
        frequencies: Sequence[float],
        lookback: int,
        horizon: int,
        config: TrainConfig,
        r_max: float = 20.0,
        split: SplitSpec = PRETRAIN_SPLIT,
    ) -> "FrequencyPool":
        """
        Retarget every labelled dataset to every requested frequency

        Args:
            datasets (Sequence[Dataset]): the corpus; unlabelled datasets are skipped
            frequencies (Sequence[float]): target frequencies
            lookback (int): window lookback
            horizon (int): window horizon
            config (TrainConfig): stride, per-dataset and total caps, seed
            r_max (float): largest accepted upsampling factor
            split (SplitSpec): train/validation split applied before retargeting

        Returns:
            FrequencyPool: one entry per requested frequency (possibly empty)
        """
        labelled = [d for d in datasets if d.dominant_frequency is not None]
        skipped = len(datasets) - len(labelled)
        if skipped:
            logger.warning(f"Skipping {skipped} datasets without a dominant-frequency label")

        prepared = []
        for dataset in labelled:
            try:
                train, val, _ = chronological_split(dataset, split)
            except DataError as e:
                logger.warning(f"Skipping {dataset.name}: {e.message}")
                continue
            _, (train, val) = standardize(train, [val])
            prepared.append((dataset, train, val))

        width = lookback + horizon
        entries: Dict[float, PoolEntry] = {}
        for target in frequencies:
            label = frequency_label(target)
            train_parts, val_parts, sources = [], [], []
            for dataset, train, val in prepared:
                moved_train = _retarget_dataset(train, target, width, r_max)
                if moved_train is None:
                    continue
                rng = substream(config.seed, f"subsample/{label}/{dataset.name}")
                train_parts.append(make_windows(moved_train, lookback, horizon, config.stride, config.window_cap, rng))
                moved_val = _retarget_dataset(val, target, width, r_max)
                if moved_val is not None:
                    val_parts.append(make_windows(moved_val, lookback, horizon, config.stride, config.window_cap, rng))
                sources.append(dataset.name)

            rng = substream(config.seed, f"subsample/{label}")
            entry = PoolEntry(
                frequency=target,
                train=cap_total(WindowSet.concatenate(train_parts, lookback, horizon), config.total_cap, rng),
                validation=cap_total(WindowSet.concatenate(val_parts, lookback, horizon), config.total_cap, rng),
                sources=sources,
            )
            logger.info(f"Pool {label}: {len(entry.train)} train / {len(entry.validation)} validation windows from {len(sources)} datasets")
            entries[target] = entry
        return cls(entries, lookback, horizon)

    def entry(self, frequency: float) -> PoolEntry:
        return self.entries[frequency]

    def frequencies_with_data(self) -> List[float]:
        return [f for f, e in self.entries.items() if len(e.train)]

    def train_union(self) -> WindowSet:
        return WindowSet.concatenate([e.train for e in self.entries.values()], self.lookback, self.horizon)

    def validation_union(self) -> WindowSet:
        return WindowSet.concatenate([e.validation for e in self.entries.values()], self.lookback, self.horizon)


class PooledBatches:
    """
    Mini-batches that each come from one target frequency, drawn uniformly per batch

    An epoch yields as many batches as the pooled windows fill.
    """

    def __init__(self, pool: FrequencyPool, batch_size: int):
        self.frequencies = pool.frequencies_with_data()
        if not self.frequencies:
            raise DataError("Every frequency pool is empty")
        self.windows = [pool.entry(f).train for f in self.frequencies]
        self.batch_size = batch_size

    def __len__(self) -> int:
        return math.ceil(sum(len(w) for w in self.windows) / self.batch_size)

    def batches(self, rng: np.random.Generator) -> Iterator:
        orders = [rng.permutation(len(w)) for w in self.windows]
        cursors = [0] * len(self.windows)
        for _ in range(len(self)):
            pick = int(rng.integers(len(self.windows)))
            if cursors[pick] >= orders[pick].size:
                orders[pick] = rng.permutation(len(self.windows[pick]))
                cursors[pick] = 0
            rows = np.sort(orders[pick][cursors[pick] : cursors[pick] + self.batch_size])
            cursors[pick] += self.batch_size
            windows = self.windows[pick]
            yield windows.inputs[rows], windows.targets[rows]
