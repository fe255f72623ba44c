"""
Analytic gradients of the MSE loss through the mixture

Forward:
    Xn, (mu, sigma) = RevIN(X)
    F_i = sigma * (Xn W_i + b_i) + mu              for every active learnable expert
    Y   = sum_{i in S} w_i F_i,   w = softmax over the active set S of z = P W_g + b_g (+ noise)

Backward, with dY the loss gradient:
    dF_i = w_i dY
    dW_i = Xn^T (sigma * dF_i),  db_i = sum_rows(sigma * dF_i)
    dw_i = <dY, F_i> per row
    dz_j = w_j (dw_j - sum_{i in S} w_i dw_i)      for j in S, zero elsewhere
    dW_g = P^T dz,  db_g = sum_rows(dz)

Gradients flow only into surviving experts; the noise is a constant shift of z.
"""
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from app.model.experts import LinearExpert, RevinState, revin_normalize
from app.model.forecaster import MixtureForecaster
from app.model.gating import GateDecision, gate_weights

GATE_WEIGHT = "gate.weight"
GATE_BIAS = "gate.bias"


def weight_key(expert: LinearExpert) -> str:
    return f"{expert.name}.weight"


def bias_key(expert: LinearExpert) -> str:
    return f"{expert.name}.bias"


@dataclass
class ForwardCache:
    """
    What the backward pass needs from a mixture forward pass
    """
    normalized: np.ndarray
    revin: RevinState
    decision: GateDecision
    # expert index -> (rows the expert ran on, its de-normalized outputs on those rows)
    outputs: Dict[int, Tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)


def forward_with_cache(
    model: MixtureForecaster,
    X: np.ndarray,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
    k: Optional[int] = None,
) -> Tuple[np.ndarray, ForwardCache]:
    """
    Same computation as ``mixture_forward``, keeping the intermediates
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    bank = model.bank
    decision = gate_weights(model.gate, X, training=training, rng=rng, k=k)
    normalized, revin = revin_normalize(X)
    cache = ForwardCache(normalized=normalized, revin=revin, decision=decision)

    output = np.zeros((X.shape[0], bank.horizon))
    for index in np.unique(decision.active):
        index = int(index)
        rows = np.flatnonzero(decision.weights[:, index] > 0)
        if rows.size == 0:
            continue
        expert_out = bank.forward_expert(index, X[rows])
        cache.outputs[index] = (rows, expert_out)
        output[rows] += decision.weights[rows, index, None] * expert_out
    return output, cache


def mixture_backward(
    model: MixtureForecaster,
    cache: ForwardCache,
    d_output: np.ndarray,
    train_gate: bool = True,
) -> Dict[str, np.ndarray]:
    """
    Gradients of the loss for every trainable parameter that took part in the forward pass

    Frozen experts and experts no row selected get no entry.
    """
    bank = model.bank
    learnable = bank.learnable()
    weights = cache.decision.weights
    sigma = cache.revin.sigma

    grads: Dict[str, np.ndarray] = {}
    d_weights = np.zeros_like(weights)
    for index, (rows, expert_out) in cache.outputs.items():
        d_weights[rows, index] = np.einsum("bh,bh->b", d_output[rows], expert_out)
        if index >= len(learnable) or learnable[index].frozen:
            continue
        expert = learnable[index]
        d_z = sigma[rows] * (weights[rows, index, None] * d_output[rows])
        grads[weight_key(expert)] = cache.normalized[rows].T @ d_z
        grads[bias_key(expert)] = d_z.sum(axis=0)

    if train_gate:
        mask = cache.decision.active_mask()
        centered = d_weights - np.sum(weights * d_weights, axis=1, keepdims=True)
        d_scores = np.where(mask, weights * centered, 0.0)
        grads[GATE_WEIGHT] = cache.decision.spectrum.T @ d_scores
        grads[GATE_BIAS] = d_scores.sum(axis=0)
    return grads


def expert_backward(expert: LinearExpert, X: np.ndarray, d_output: np.ndarray) -> Dict[str, np.ndarray]:
    """
    Gradients of a single expert trained on its own
    """
    normalized, revin = revin_normalize(X)
    d_z = revin.sigma * d_output
    return {weight_key(expert): normalized.T @ d_z, bias_key(expert): d_z.sum(axis=0)}


def model_parameters(model: MixtureForecaster, train_gate: bool = True) -> Dict[str, np.ndarray]:
    """
    Named views of every trainable array: unfrozen experts and, optionally, the gate
    """
    params: Dict[str, np.ndarray] = {}
    for expert in model.bank.learnable():
        if expert.frozen:
            continue
        params[weight_key(expert)] = expert.weight
        params[bias_key(expert)] = expert.bias
    if train_gate:
        params[GATE_WEIGHT] = model.gate.weight
        params[GATE_BIAS] = model.gate.bias
    return params
