"""
Routing diagnostics and the approximation/estimation error bound
"""
import logging
from typing import Dict, List, Optional, Sequence

import numpy as np

from app.common.enums import ExpertKind
from app.common.errors import DimensionError
from app.evaluation.metrics import mse
from app.evaluation.schemas import BoundReport, ExpertUsage
from app.model.forecaster import MixtureForecaster
from app.model.gating import gate_weights
from app.model.spectral import ENERGY_EPSILON

logger = logging.getLogger(__name__)

# Rows per chunk when gating many windows
DIAGNOSTIC_CHUNK = 4096
SIMPLEX_ITERATIONS = 500


def expert_distribution(model: MixtureForecaster, X: np.ndarray, k: Optional[int] = None) -> List[ExpertUsage]:
    """
    Mean gate weight and selection rate of every expert over a batch of lookbacks

    Inference mode: no gate noise. Selection rates sum to k.
    """
    X = np.atleast_2d(X)
    weight_sum = np.zeros(model.bank.size)
    selected = np.zeros(model.bank.size)
    for start in range(0, X.shape[0], DIAGNOSTIC_CHUNK):
        decision = gate_weights(model.gate, X[start : start + DIAGNOSTIC_CHUNK], training=False, k=k)
        weight_sum += decision.weights.sum(axis=0)
        selected += decision.active_mask().sum(axis=0)

    rows = max(X.shape[0], 1)
    return [
        ExpertUsage(
            expert_name=name,
            assigned_frequency=frequency,
            mean_weight=float(weight_sum[i] / rows),
            selection_rate=float(selected[i] / rows),
        )
        for i, (name, frequency) in enumerate(zip(model.bank.expert_names(), model.bank.assigned_frequencies()))
    ]


def top_k_sweep(model: MixtureForecaster, X: np.ndarray, Y: np.ndarray, ks: Sequence[int]) -> Dict[int, float]:
    """
    Test MSE of the same trained model with the gate rebalanced to each k
    """
    return {k: mse(model.predict(X, k=k), Y) for k in ks}


def routing_accuracy(model: MixtureForecaster, X: np.ndarray, expected_expert: int, k: int = 1) -> float:
    """
    Fraction of lookbacks whose highest-weighted expert is ``expected_expert``
    """
    decision = gate_weights(model.gate, np.atleast_2d(X), training=False, k=k)
    return float(np.mean(decision.active[:, 0] == expected_expert))


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """
    Euclidean projection onto {b : b >= 0, sum(b) = 1}
    """
    u = np.sort(v)[::-1]
    cumulative = np.cumsum(u) - 1.0
    index = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - cumulative / index > 0)[-1]
    theta = cumulative[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def simplex_least_squares(F: np.ndarray, y: np.ndarray, iterations: int = SIMPLEX_ITERATIONS) -> np.ndarray:
    """
    Mixture weights on the simplex minimizing ||F^T beta - y||^2 by projected gradient

    Args:
        F (np.ndarray): expert outputs, N x H
        y (np.ndarray): target, length H
        iterations (int): gradient steps

    Returns:
        np.ndarray: beta of length N
    """
    F = np.asarray(F, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if F.shape[1] != y.size:
        raise DimensionError(f"Expert outputs {F.shape} do not match a target of length {y.size}")
    lipschitz = 2.0 * np.linalg.norm(F, 2) ** 2
    beta = np.full(F.shape[0], 1.0 / F.shape[0])
    if lipschitz == 0.0:
        return beta
    for _ in range(iterations):
        gradient = 2.0 * F @ (F.T @ beta - y)
        beta = project_to_simplex(beta - gradient / lipschitz)
    return beta


def _out_of_span_energy(y: np.ndarray, frequencies: Sequence[float]) -> float:
    """
    Two-sided periodogram energy of y outside +-1 bin of every expert frequency, DC excluded
    """
    n = y.size
    spectrum = np.fft.fft(y - y.mean())
    energy = np.abs(spectrum) ** 2 / n
    folded = np.minimum(np.arange(n), n - np.arange(n)) / n
    in_span = np.zeros(n, dtype=bool)
    in_span[0] = True
    for f in frequencies:
        in_span |= np.abs(folded - f) <= 1.0 / n + 1e-12
    return float(energy[~in_span].sum())


def _band_energy(x: np.ndarray, frequency: float) -> float:
    n = x.size
    spectrum = np.fft.fft(x - x.mean())
    energy = np.abs(spectrum) ** 2 / n
    folded = np.minimum(np.arange(n), n - np.arange(n)) / n
    return float(energy[np.abs(folded - frequency) <= 1.0 / n + 1e-12].sum())


def fit_gamma(model: MixtureForecaster, x: np.ndarray, outputs: np.ndarray) -> float:
    """
    Smallest gamma with ||F_i(x)|| <= gamma sqrt(I_i(x)) for every expert

    I_i is the input energy around a frequency expert's frequency; experts without a
    frequency (or with no energy in their band) use the whole input energy ||x||^2.
    """
    total = float(np.sum(x ** 2))
    ratios = []
    for i, (kind, frequency) in enumerate(zip(model.bank.expert_kinds(), model.bank.assigned_frequencies())):
        energy = _band_energy(x, frequency) if kind == ExpertKind.FREQUENCY else total
        if energy <= ENERGY_EPSILON:
            energy = total
        ratios.append(np.linalg.norm(outputs[i]) / np.sqrt(max(energy, ENERGY_EPSILON)))
    return max(float(max(ratios)), ENERGY_EPSILON)


def bound_report(
    model: MixtureForecaster,
    x: np.ndarray,
    y: np.ndarray,
    expert_freqs: Optional[Sequence[float]] = None,
    gamma: Optional[float] = None,
    beta: Optional[np.ndarray] = None,
    epsilon: Optional[float] = None,
) -> BoundReport:
    """
    Compare one forecast's error with sqrt(E_perp) + gamma ||x|| ||beta - G||_1

    Args:
        model (MixtureForecaster): the forecaster
        x (np.ndarray): one lookback
        y (np.ndarray): the true continuation, length H
        expert_freqs (Sequence[float]): frequency set spanning the experts, defaults to the bank's table
        gamma (float): fixed gamma, fitted from the expert outputs when omitted
        beta (np.ndarray): oracle weights, least-squares fitted on the simplex when omitted
        epsilon (float): periodicity mismatch allowance for the relaxed bound

    Returns:
        BoundReport: every term of the bound and the observed error
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size != model.horizon:
        raise DimensionError(f"Target has {y.size} steps, model forecasts {model.horizon}")

    prediction, decision = model.forward(x[None, :])
    prediction, G = prediction[0], decision.weights[0]
    outputs = np.stack([model.bank.forward_expert(i, x[None, :])[0] for i in range(model.bank.size)])

    if beta is None:
        beta = simplex_least_squares(outputs, y)
    beta = np.asarray(beta, dtype=np.float64)
    if gamma is None:
        gamma = fit_gamma(model, x, outputs)
    frequencies = list(expert_freqs) if expert_freqs is not None else model.bank.frequency_table()

    e_perp = _out_of_span_energy(y, frequencies)
    e_perp_input = _out_of_span_energy(x, frequencies)
    estimation = float(gamma * np.linalg.norm(x) * np.sum(np.abs(beta - G)))
    relaxed = None
    if epsilon is not None:
        relaxed = float(np.sqrt(1.0 + epsilon) * np.sqrt(e_perp_input) + estimation)

    report = BoundReport(
        e_perp=e_perp,
        e_perp_input=e_perp_input,
        estimation_term=estimation,
        bound=float(np.sqrt(e_perp) + estimation),
        empirical_error=float(np.linalg.norm(y - prediction)),
        gamma=float(gamma),
        relaxed_bound=relaxed,
        beta=beta.tolist(),
        gate_weights=G.tolist(),
    )
    if not report.holds:
        logger.info(f"Bound not met: error {report.empirical_error:.4g} > bound {report.bound:.4g}")
    return report
