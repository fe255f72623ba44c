"""
Spectral analysis, experts, gating, resampling and the composed forecaster
"""
from app.model.experts import ExpertBank, LinearExpert, default_frequency_table
from app.model.forecaster import FS_MODEL, ZS_MODEL, MixtureForecaster, ModelConfig, assemble_forecaster
from app.model.gating import GateDecision, GatingNetwork, gate_weights, mixture_forward, rebalance_k
from app.model.resampling import LookbackAdaptation, ResampleConfig

__all__ = [
    'ExpertBank',
    'LinearExpert',
    'default_frequency_table',
    'FS_MODEL',
    'ZS_MODEL',
    'MixtureForecaster',
    'ModelConfig',
    'assemble_forecaster',
    'GateDecision',
    'GatingNetwork',
    'gate_weights',
    'mixture_forward',
    'rebalance_k',
    'LookbackAdaptation',
    'ResampleConfig',
]
