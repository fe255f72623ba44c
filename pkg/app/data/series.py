"""
Series ingestion, chronological splitting, standardization and windowing

Every channel is handled as its own univariate series (channel independence): splits and
scaling are computed per channel and windows are contiguous slices of a single channel.
"""
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

from app.common.enums import MissingPolicy
from app.common.errors import ConfigError, DataError, EmptyDatasetError, ParseError
from app.data.schemas import CsvSchema, DatasetMetadata, SplitSpec

logger = logging.getLogger(__name__)

# Cells treated as missing rather than malformed
MISSING_TOKENS = {"", "nan", "na", "n/a", "null", "none", "inf", "-inf", "+inf"}


@dataclass
class Dataset:
    """
    A named collection of univariate channels
    """
    name: str
    channels: List[np.ndarray]
    channel_names: List[str] = field(default_factory=list)
    sampling_rate_label: Optional[str] = None
    dominant_frequency: Optional[float] = None
    missing_policy: MissingPolicy = MissingPolicy.FORWARD_FILL
    missing_count: int = 0

    def __post_init__(self):
        self.channels = [np.asarray(c, dtype=np.float64) for c in self.channels]
        if not self.channel_names:
            self.channel_names = [f"ch{i}" for i in range(len(self.channels))]
        if self.dominant_frequency is not None and not 0.0 < self.dominant_frequency <= 0.5:
            raise DataError(
                f"Dataset {self.name}: dominant frequency {self.dominant_frequency} outside (0, 0.5]"
            )

    @property
    def num_channels(self) -> int:
        return len(self.channels)

    def lengths(self) -> List[int]:
        return [len(c) for c in self.channels]

    def with_channels(self, channels: List[np.ndarray], suffix: str = "") -> "Dataset":
        """
        Copy of this dataset holding other channel values
        """
        return replace(self, name=self.name + suffix, channels=channels)


@dataclass
class ScalerParams:
    """
    Per-channel standardization statistics fitted on a train split
    """
    mean: np.ndarray
    std: np.ndarray

    def transform(self, dataset: Dataset) -> Dataset:
        channels = [(c - self.mean[i]) / self.std[i] for i, c in enumerate(dataset.channels)]
        return dataset.with_channels(channels)

    def inverse_transform(self, dataset: Dataset) -> Dataset:
        channels = [c * self.std[i] + self.mean[i] for i, c in enumerate(dataset.channels)]
        return dataset.with_channels(channels)


@dataclass
class WindowSet:
    """
    Fixed-width training/evaluation examples, one row per window

    Each row holds ``lookback`` inputs followed by ``horizon`` targets.
    """
    windows: np.ndarray
    lookback: int
    horizon: int
    source_channel: np.ndarray
    start_offset: np.ndarray

    def __len__(self) -> int:
        return self.windows.shape[0]

    @property
    def inputs(self) -> np.ndarray:
        return self.windows[:, : self.lookback]

    @property
    def targets(self) -> np.ndarray:
        return self.windows[:, self.lookback:]

    def subset(self, index: np.ndarray) -> "WindowSet":
        return WindowSet(
            windows=self.windows[index],
            lookback=self.lookback,
            horizon=self.horizon,
            source_channel=self.source_channel[index],
            start_offset=self.start_offset[index],
        )

    @classmethod
    def empty(cls, lookback: int, horizon: int) -> "WindowSet":
        return cls(
            windows=np.zeros((0, lookback + horizon)),
            lookback=lookback,
            horizon=horizon,
            source_channel=np.zeros(0, dtype=np.int64),
            start_offset=np.zeros(0, dtype=np.int64),
        )

    @classmethod
    def concatenate(cls, parts: Sequence["WindowSet"], lookback: int, horizon: int) -> "WindowSet":
        """
        Stack window sets built with the same geometry
        """
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls.empty(lookback, horizon)
        return cls(
            windows=np.concatenate([p.windows for p in parts]),
            lookback=lookback,
            horizon=horizon,
            source_channel=np.concatenate([p.source_channel for p in parts]),
            start_offset=np.concatenate([p.start_offset for p in parts]),
        )


def load_csv(path, schema: Optional[CsvSchema] = None, name: Optional[str] = None) -> Dataset:
    """
    Load a CSV file into a dataset with one channel per selected numeric column

    Args:
        path: CSV file with a header row
        schema (CsvSchema): column selection, delimiter and missing-value policy
        name (str): dataset name, defaults to the file stem

    Returns:
        Dataset: the ingested channels
    """
    schema = schema or CsvSchema()
    path = Path(path)
    if not path.exists():
        raise DataError(f"Data file not found: {path}")

    try:
        frame = pd.read_csv(path, sep=schema.delimiter, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise EmptyDatasetError(f"Empty data file: {path}")
    except pd.errors.ParserError as e:
        raise ParseError(f"Malformed CSV {path}: {e}")

    if frame.empty:
        raise EmptyDatasetError(f"Data file has no rows: {path}")

    if schema.columns:
        missing_columns = [c for c in schema.columns if c not in frame.columns]
        if missing_columns:
            raise DataError(f"Columns not found in {path}: {missing_columns}")
        columns = list(schema.columns)
    else:
        columns = [c for c in frame.columns if c != schema.timestamp_column]
    if not columns:
        raise EmptyDatasetError(f"No data columns in {path}")

    values = np.empty((len(frame), len(columns)), dtype=np.float64)
    for j, column in enumerate(columns):
        cells = frame[column].str.strip()
        missing = cells.str.lower().isin(MISSING_TOKENS)
        parsed = pd.to_numeric(cells.where(~missing), errors="coerce")
        bad = parsed.isna() & ~missing
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            # +2: header line and 1-based numbering
            raise ParseError(
                f"Cannot parse value {frame[column].iloc[row]!r} at line {row + 2}, column {column!r} of {path}",
                line=row + 2,
                column=column,
            )
        values[:, j] = parsed.to_numpy(dtype=np.float64)

    values[~np.isfinite(values)] = np.nan
    frame_values = pd.DataFrame(values, columns=columns)
    missing_count = int(frame_values.isna().sum().sum())

    if missing_count:
        if schema.missing_policy == MissingPolicy.DROP_ROW:
            before = len(frame_values)
            frame_values = frame_values.dropna(axis=0, how="any")
            logger.info(f"{path.name}: dropped {before - len(frame_values)} rows with {missing_count} missing values")
        else:
            # Leading gaps have nothing to carry forward and take the first observed value
            frame_values = frame_values.ffill().bfill()
            logger.info(f"{path.name}: forward-filled {missing_count} missing values")

    if frame_values.empty or frame_values.isna().any().any():
        raise EmptyDatasetError(f"No usable rows left in {path} after missing-value policy {schema.missing_policy.value}")

    dataset = Dataset(
        name=name or path.stem,
        channels=[frame_values[c].to_numpy(dtype=np.float64) for c in columns],
        channel_names=columns,
        missing_policy=schema.missing_policy,
        missing_count=missing_count,
    )
    logger.info(f"Loaded {dataset.name}: {dataset.num_channels} channels of length {len(frame_values)}")
    return dataset


def load_metadata(path) -> Dict[str, DatasetMetadata]:
    """
    Load the metadata sidecar: a JSON list of {name, sampling_rate_label, dominant_frequency}
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"Metadata file not found: {path}")
    try:
        records = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ParseError(f"Malformed metadata file {path}: {e}", line=e.lineno)
    if isinstance(records, dict):
        records = [dict(name=k, **v) for k, v in records.items()]
    try:
        parsed = [DatasetMetadata.model_validate(r) for r in records]
    except ValidationError as e:
        raise DataError(f"Invalid metadata in {path}: {e}")
    return {m.name: m for m in parsed}


def attach_metadata(dataset: Dataset, metadata: Dict[str, DatasetMetadata]) -> Dataset:
    """
    Copy sampling-rate label and dominant frequency from the sidecar onto a dataset
    """
    record = metadata.get(dataset.name)
    if record is None:
        return dataset
    return replace(
        dataset,
        sampling_rate_label=record.sampling_rate_label,
        dominant_frequency=record.dominant_frequency,
    )


def chronological_split(dataset: Dataset, spec: SplitSpec) -> Tuple[Dataset, Dataset, Dataset]:
    """
    Split every channel on the time axis into train, validation and test segments

    Train gets the first floor(train_frac * n) points, validation the next floor(val_frac * n),
    test the remainder.
    """
    train, val, test = [], [], []
    for i, channel in enumerate(dataset.channels):
        n = len(channel)
        if n < 3:
            raise DataError(f"Dataset {dataset.name}: channel {i} has length {n}, need at least 3 to split")
        n_train = int(math.floor(spec.train_frac * n))
        n_val = int(math.floor(spec.val_frac * n))
        train.append(channel[:n_train])
        val.append(channel[n_train : n_train + n_val])
        test.append(channel[n_train + n_val :])
    return (
        dataset.with_channels(train, ":train"),
        dataset.with_channels(val, ":val"),
        dataset.with_channels(test, ":test"),
    )


def standardize(train: Dataset, others: Sequence[Dataset] = ()) -> Tuple[ScalerParams, List[Dataset]]:
    """
    Standardize every channel with statistics of its train segment

    Returns:
        Tuple[ScalerParams, List[Dataset]]: the fitted parameters and the standardized train set
        followed by the standardized ``others``
    """
    means, stds = [], []
    for i, channel in enumerate(train.channels):
        if len(channel) == 0:
            raise DataError(f"Dataset {train.name}: channel {i} has an empty train split")
        mean = float(np.mean(channel))
        std = float(np.std(channel))
        if std == 0.0:
            logger.warning(f"Dataset {train.name}: channel {train.channel_names[i]} is constant on train, divisor clamped to 1")
            std = 1.0
        means.append(mean)
        stds.append(std)

    scaler = ScalerParams(mean=np.array(means), std=np.array(stds))
    standardized = [scaler.transform(train)] + [scaler.transform(d) for d in others]
    return scaler, standardized


def prepend_context(previous: Dataset, current: Dataset, lookback: int) -> Dataset:
    """
    Prefix each channel of ``current`` with the last ``lookback`` points of ``previous``

    Windows built on the result read their lookback across the split border while their
    targets stay inside ``current``.
    """
    channels = [
        np.concatenate([prev[-lookback:] if lookback else prev[:0], cur])
        for prev, cur in zip(previous.channels, current.channels)
    ]
    return current.with_channels(channels)


def make_windows(
    dataset: Dataset,
    lookback: int,
    horizon: int,
    stride: int = 1,
    cap: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> WindowSet:
    """
    Slide a window of width lookback + horizon over every channel

    Rows are ordered by channel index, then start offset. When ``cap`` is set and more windows
    exist, a uniform subset without replacement is kept (order preserved).
    """
    if lookback < 1 or horizon < 0 or stride < 1:
        raise ConfigError(f"Invalid window geometry L={lookback}, H={horizon}, stride={stride}")

    width = lookback + horizon
    rows, channels, offsets = [], [], []
    for index, channel in enumerate(dataset.channels):
        count = (len(channel) - width) // stride + 1 if len(channel) >= width else 0
        if count <= 0:
            continue
        starts = np.arange(count) * stride
        view = np.lib.stride_tricks.sliding_window_view(channel, width)[::stride][:count]
        rows.append(np.array(view, dtype=np.float64))
        channels.append(np.full(count, index, dtype=np.int64))
        offsets.append(starts.astype(np.int64))

    if not rows:
        return WindowSet.empty(lookback, horizon)

    windows = WindowSet(
        windows=np.concatenate(rows),
        lookback=lookback,
        horizon=horizon,
        source_channel=np.concatenate(channels),
        start_offset=np.concatenate(offsets),
    )
    if cap is not None and len(windows) > cap:
        if rng is None:
            raise ConfigError("A seeded generator is required to cap windows")
        keep = np.sort(rng.choice(len(windows), size=cap, replace=False))
        windows = windows.subset(keep)
    return windows


def cap_total(windows: WindowSet, total_cap: Optional[int], rng: np.random.Generator) -> WindowSet:
    """
    Uniformly subsample a pooled window set down to a corpus-wide cap
    """
    if total_cap is None or len(windows) <= total_cap:
        return windows
    keep = np.sort(rng.choice(len(windows), size=total_cap, replace=False))
    return windows.subset(keep)
