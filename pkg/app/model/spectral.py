"""
Periodogram, L1 normalization, spectral entropy and energy accounting

The periodogram of a window x of length L with M retained bins is

    I_j = |FFT(x - mean(x), n=2M)_j|^2 / (2M),    j = 0..M-1

with bin j sitting at frequency j / (2M) cycles per step. Zero-padding to 2M >= L gives a
finer frequency grid than L alone would.
"""
from dataclasses import dataclass

import numpy as np

from app.common.errors import ConfigError, DomainError

# Added to the denominator of energy fractions
ENERGY_EPSILON = 1e-10


@dataclass
class Periodogram:
    """
    Retained half of a (possibly normalized) periodogram
    """
    bins: np.ndarray
    bin_frequencies: np.ndarray
    pad_length: int

    @property
    def size(self) -> int:
        return self.bins.shape[-1]

    @property
    def resolution(self) -> float:
        return 1.0 / self.pad_length


def bin_frequencies(M: int) -> np.ndarray:
    """
    Frequencies in cycles per step of the M retained bins
    """
    return np.arange(M, dtype=np.float64) / (2 * M)


def _check_size(length: int, M: int) -> None:
    if M < 1 or 2 * M < length:
        raise ConfigError(f"Spectrum size M={M} too small for input length {length} (need 2M >= L)")


def periodogram_batch(X: np.ndarray, M: int) -> np.ndarray:
    """
    Unnormalized periodogram of every row of a B x L matrix, shape B x M
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    _check_size(X.shape[1], M)
    centered = X - X.mean(axis=1, keepdims=True)
    spectrum = np.fft.rfft(centered, n=2 * M, axis=1)[:, :M]
    return (spectrum.real ** 2 + spectrum.imag ** 2) / (2 * M)


def normalize_rows(P: np.ndarray) -> np.ndarray:
    """
    L1-normalize every row; rows with zero energy become uniform
    """
    P = np.atleast_2d(P)
    totals = P.sum(axis=1, keepdims=True)
    out = np.empty_like(P)
    zero = totals[:, 0] == 0.0
    out[~zero] = P[~zero] / totals[~zero]
    out[zero] = 1.0 / P.shape[1]
    return out


def normalized_periodogram_batch(X: np.ndarray, M: int) -> np.ndarray:
    """
    L1-normalized periodogram of every row, the gate's input
    """
    return normalize_rows(periodogram_batch(X, M))


def periodogram(x: np.ndarray, M: int) -> Periodogram:
    """
    Periodogram of one window

    Args:
        x (np.ndarray): real vector of length L >= 2
        M (int): number of retained bins, 2M >= L

    Returns:
        Periodogram: bins 0..M-1 of |FFT(x - mean)|^2 / 2M
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size < 2:
        raise DomainError(f"Periodogram needs at least 2 samples, got {x.size}")
    bins = periodogram_batch(x[None, :], M)[0]
    return Periodogram(bins=bins, bin_frequencies=bin_frequencies(M), pad_length=2 * M)


def normalize_l1(p: Periodogram) -> Periodogram:
    """
    Divide the bins by their L1 norm; an all-zero periodogram maps to the uniform vector
    """
    return Periodogram(bins=normalize_rows(p.bins[None, :])[0], bin_frequencies=p.bin_frequencies, pad_length=p.pad_length)


def two_sided_energy(x: np.ndarray, M: int) -> float:
    """
    Sum of all 2M periodogram bins (both halves of the symmetric spectrum)

    Equals the energy of the mean-removed signal by Parseval's identity.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    _check_size(x.size, M)
    spectrum = np.fft.fft(x - x.mean(), n=2 * M)
    return float(np.sum(np.abs(spectrum) ** 2) / (2 * M))


def spectral_entropy(w: np.ndarray) -> float:
    """
    Shannon entropy -sum(w ln w) of a probability vector, with 0 ln 0 = 0
    """
    w = np.asarray(w, dtype=np.float64).ravel()
    if np.any(w < 0):
        raise DomainError("Entropy is undefined for negative weights")
    total = w.sum()
    if abs(total - 1.0) > 1e-6:
        raise DomainError(f"Entropy needs weights summing to 1, got {total}")
    positive = w[w > 0]
    return float(-np.sum(positive * np.log(positive)))


def tail_energy_fraction(p: Periodogram, cutoff_freq: float) -> float:
    """
    Fraction of the periodogram's energy strictly above a cutoff frequency
    """
    if not 0.0 < cutoff_freq <= 0.5:
        raise DomainError(f"Cutoff frequency must lie in (0, 0.5], got {cutoff_freq}")
    lost = p.bins[p.bin_frequencies > cutoff_freq].sum()
    return float(lost / (p.bins.sum() + ENERGY_EPSILON))


def dominant_frequency(x: np.ndarray, M: int) -> float:
    """
    Frequency of the strongest periodogram bin
    """
    p = periodogram(x, M)
    return float(p.bin_frequencies[int(np.argmax(p.bins))])
