"""
Spectral sparse gating

    g(X) = P(X) W_g + b_g,        P = L1-normalized periodogram of the zero-mean input
    G(X) = softmax(TopK(g(X) + sigma * R, k))

The noise R is standard normal and only added while training. TopK keeps the k largest scores
of every row (ties go to the lower expert index); the softmax runs over the survivors only, so
every other expert gets a weight of exactly zero and is never evaluated.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from app.common.errors import ConfigError, DimensionError
from app.model.experts import ExpertBank
from app.model.spectral import normalized_periodogram_batch

logger = logging.getLogger(__name__)

# Floor of every surviving weight
MIN_ACTIVE_WEIGHT = np.finfo(np.float64).tiny


@dataclass
class GatingNetwork:
    """
    Linear map from the normalized periodogram (M bins) to N expert scores
    """
    weight: np.ndarray
    bias: np.ndarray
    noise_std: float = 0.1
    top_k: int = 12

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise DimensionError(f"Gate weight {self.weight.shape} and bias {self.bias.shape} disagree")
        if self.noise_std < 0:
            raise ConfigError(f"Gate noise must be non-negative, got {self.noise_std}")
        check_k(self.top_k, self.num_experts)

    @property
    def spectrum_size(self) -> int:
        return self.weight.shape[0]

    @property
    def num_experts(self) -> int:
        return self.weight.shape[1]

    @classmethod
    def initialize(cls, spectrum_size: int, num_experts: int, top_k: int, noise_std: float, rng: np.random.Generator) -> "GatingNetwork":
        """
        Dense-layer style initialization, uniform in +-1/sqrt(M)
        """
        bound = 1.0 / np.sqrt(spectrum_size)
        return cls(
            weight=rng.uniform(-bound, bound, size=(spectrum_size, num_experts)),
            bias=rng.uniform(-bound, bound, size=num_experts),
            noise_std=noise_std,
            top_k=top_k,
        )

    def parameter_count(self) -> int:
        return self.weight.size + self.bias.size


@dataclass
class GateDecision:
    """
    Scores, sparse weights and active experts for a batch

    ``scores`` are the values TopK ran on (noise included while training); ``active`` lists the
    k surviving expert indices of every row, highest score first.
    """
    scores: np.ndarray
    weights: np.ndarray
    active: np.ndarray
    spectrum: Optional[np.ndarray] = None

    @property
    def k(self) -> int:
        return self.active.shape[1]

    def active_mask(self) -> np.ndarray:
        mask = np.zeros(self.scores.shape, dtype=bool)
        np.put_along_axis(mask, self.active, True, axis=1)
        return mask


def check_k(k: int, num_experts: int) -> None:
    if not 1 <= k <= num_experts:
        raise ConfigError(f"k must lie in [1, {num_experts}], got {k}")


def gate_scores(net: GatingNetwork, X: np.ndarray, spectrum: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Raw scores g(X) for every row of X, shape B x N
    """
    if spectrum is None:
        spectrum = normalized_periodogram_batch(X, net.spectrum_size)
    if spectrum.shape[1] != net.spectrum_size:
        raise ConfigError(f"Periodogram has {spectrum.shape[1]} bins, gate expects {net.spectrum_size}")
    return spectrum @ net.weight + net.bias


def top_k_indices(scores: np.ndarray, k: int) -> np.ndarray:
    """
    Indices of the k largest entries of every row, highest first, ties to the lower index
    """
    scores = np.atleast_2d(scores)
    check_k(k, scores.shape[1])
    order = np.argsort(-scores, axis=1, kind="stable")
    return order[:, :k]


def top_k_mask(scores: np.ndarray, k: int) -> np.ndarray:
    """
    Keep the k largest entries of every row and set the rest to -inf
    """
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    keep = top_k_indices(scores, k)
    masked = np.full_like(scores, -np.inf)
    np.put_along_axis(masked, keep, np.take_along_axis(scores, keep, axis=1), axis=1)
    return masked


def softmax_over_active(scores: np.ndarray, active: np.ndarray) -> np.ndarray:
    """
    Softmax restricted to the active entries of every row; all other weights are exactly 0

    Survivors keep a weight of at least the smallest normal float, so a row always has exactly
    as many nonzero weights as active entries even when a score trails the row maximum by more
    than exp can represent.
    """
    surviving = np.take_along_axis(scores, active, axis=1)
    shifted = surviving - surviving.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    active_weights = np.maximum(exp / exp.sum(axis=1, keepdims=True), MIN_ACTIVE_WEIGHT)
    weights = np.zeros_like(scores)
    np.put_along_axis(weights, active, active_weights, axis=1)
    return weights


def _decide(scores: np.ndarray, k: int, spectrum: Optional[np.ndarray] = None) -> GateDecision:
    active = top_k_indices(scores, k)
    return GateDecision(scores=scores, weights=softmax_over_active(scores, active), active=active, spectrum=spectrum)


def gate_weights(
    net: GatingNetwork,
    X: np.ndarray,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
    k: Optional[int] = None,
) -> GateDecision:
    """
    Sparse mixture weights for every row of X

    Args:
        net (GatingNetwork): the gate
        X (np.ndarray): batch B x L
        training (bool): add sigma-scaled Gaussian noise to the scores before TopK
        rng (np.random.Generator): source of the noise, required when training with sigma > 0
        k (int): overrides the gate's trained k

    Returns:
        GateDecision: scores, weights and active sets
    """
    X = np.atleast_2d(X)
    spectrum = normalized_periodogram_batch(X, net.spectrum_size)
    scores = gate_scores(net, X, spectrum)
    if training and net.noise_std > 0:
        if rng is None:
            raise ConfigError("Training-time gating needs a seeded generator for the noise")
        scores = scores + net.noise_std * rng.standard_normal(scores.shape)
    return _decide(scores, net.top_k if k is None else k, spectrum)


def rebalance_k(decision: GateDecision, new_k: int) -> GateDecision:
    """
    Recompute the top-k mask and softmax of an existing decision with another k
    """
    check_k(new_k, decision.scores.shape[1])
    return _decide(decision.scores, new_k, decision.spectrum)


def mixture_forward(
    bank: ExpertBank,
    net: GatingNetwork,
    X: np.ndarray,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
    k: Optional[int] = None,
) -> Tuple[np.ndarray, GateDecision]:
    """
    Weighted sum of the active experts' forecasts

    Experts are visited in index order and each one only runs on the rows that selected it.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != bank.lookback:
        raise DimensionError(f"Model expects lookback {bank.lookback}, got {X.shape[1]}")
    if net.num_experts != bank.size:
        raise DimensionError(f"Gate scores {net.num_experts} experts, bank holds {bank.size}")

    decision = gate_weights(net, X, training=training, rng=rng, k=k)
    output = np.zeros((X.shape[0], bank.horizon))
    for index in np.unique(decision.active):
        rows = np.flatnonzero(decision.weights[:, index] > 0)
        if rows.size == 0:
            continue
        output[rows] += decision.weights[rows, index, None] * bank.forward_expert(int(index), X[rows])
    return output, decision
