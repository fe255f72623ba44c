"""
Metrics, forecast pipelines, diagnostics and experiments
"""
from app.evaluation.diagnostics import bound_report, expert_distribution, routing_accuracy, simplex_least_squares, top_k_sweep
from app.evaluation.forecasting import DEFAULT_HORIZONS, autoregressive_forecast, evaluate_dataset, forecast_series
from app.evaluation.metrics import geometric_mean, mae, mase, mse
from app.evaluation.schemas import BoundReport, EvalRecord, EvalReport, ExpertUsage

__all__ = [
    'bound_report',
    'expert_distribution',
    'routing_accuracy',
    'simplex_least_squares',
    'top_k_sweep',
    'DEFAULT_HORIZONS',
    'autoregressive_forecast',
    'evaluate_dataset',
    'forecast_series',
    'geometric_mean',
    'mae',
    'mase',
    'mse',
    'BoundReport',
    'EvalRecord',
    'EvalReport',
    'ExpertUsage',
]
