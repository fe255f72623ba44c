"""
MSE loss, Adam and the learning-rate schedule
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from app.common.enums import LrDecay
from app.common.errors import DimensionError, TrainingError

logger = logging.getLogger(__name__)

# Epochs trained at the base rate before decay starts
WARM_EPOCHS = 3
DECAY_RATE = 0.9


def mse_loss(pred: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Mean squared error over all entries and its gradient with respect to ``pred``
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"Prediction {pred.shape} and target {target.shape} differ")
    diff = pred - target
    return float(np.mean(diff ** 2)), 2.0 * diff / diff.size


@dataclass
class OptimizerState:
    """
    Adam moment accumulators keyed by parameter name
    """
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    state: OptimizerState,
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    lr: float,
) -> Dict[str, np.ndarray]:
    """
    One bias-corrected Adam update, applied in place

    Parameters without a gradient entry are left untouched.

    Args:
        state (OptimizerState): moments and step counter, updated in place
        params (Dict[str, np.ndarray]): named parameter arrays
        grads (Dict[str, np.ndarray]): gradients for some or all of ``params``
        lr (float): step size

    Returns:
        Dict[str, np.ndarray]: the updated parameters (same arrays)
    """
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise TrainingError(
                f"Non-finite gradient for {name} at step {state.step + 1}",
                {"parameter": name, "step": state.step + 1, "max_abs": float(np.nanmax(np.abs(grad)))},
            )

    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    for name, grad in grads.items():
        if name not in params:
            raise TrainingError(f"Gradient for unknown parameter {name}")
        m = state.first_moment.setdefault(name, np.zeros_like(grad))
        v = state.second_moment.setdefault(name, np.zeros_like(grad))
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad ** 2
        params[name] -= lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
    return params


def lr_schedule(epoch: int, base_lr: float, decay: LrDecay = LrDecay.EXPONENTIAL) -> float:
    """
    Learning rate for a 1-based epoch: the base rate for the first three epochs, then 0.9 per epoch
    """
    if epoch < 1:
        raise ValueError(f"Epochs are numbered from 1, got {epoch}")
    if decay == LrDecay.NONE or epoch <= WARM_EPOCHS:
        return base_lr
    return base_lr * DECAY_RATE ** (epoch - WARM_EPOCHS)
