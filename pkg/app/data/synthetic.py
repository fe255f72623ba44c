"""
Synthetic series used by the experiments and tests
"""
from typing import Optional

import numpy as np

from app.data.series import Dataset


def tone(length: int, period: float, amplitude: float = 1.0, phase: float = 0.0, offset: float = 0.0) -> np.ndarray:
    """
    A sampled sine with the given period in steps
    """
    t = np.arange(length, dtype=np.float64)
    return offset + amplitude * np.sin(2.0 * np.pi * t / period + phase)


def random_walk(length: int, step_std: float, rng: np.random.Generator) -> np.ndarray:
    """
    Gaussian random walk starting at zero
    """
    if step_std == 0.0:
        return np.zeros(length)
    return np.cumsum(rng.normal(0.0, step_std, size=length))


def tone_dataset(
    name: str,
    period: float,
    length: int,
    num_channels: int,
    rng: np.random.Generator,
    noise_std: float = 0.0,
    walk_std: float = 0.0,
    sampling_rate_label: Optional[str] = None,
) -> Dataset:
    """
    Channels holding one tone each with random phase and amplitude, plus optional noise
    """
    channels = []
    for _ in range(num_channels):
        amplitude = rng.uniform(0.5, 2.0)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        series = tone(length, period, amplitude=amplitude, phase=phase, offset=rng.normal())
        if noise_std:
            series = series + rng.normal(0.0, noise_std, size=length)
        if walk_std:
            series = series + random_walk(length, walk_std, rng)
        channels.append(series)
    return Dataset(
        name=name,
        channels=channels,
        sampling_rate_label=sampling_rate_label,
        dominant_frequency=1.0 / period,
    )
