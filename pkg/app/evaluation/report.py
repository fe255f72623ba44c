"""
CSV and text rendering of evaluation reports
"""
import logging
from pathlib import Path
from typing import List

import pandas as pd

from app.evaluation.schemas import EvalReport, ExpertUsage, SineExperimentRow

logger = logging.getLogger(__name__)

AVERAGE_LABEL = "avg"


def report_frame(report: EvalReport) -> pd.DataFrame:
    """
    One row per (dataset, horizon, metric); the average row shows horizon "avg"
    """
    rows = [
        {
            "dataset": r.dataset,
            "horizon": AVERAGE_LABEL if r.horizon is None else str(r.horizon),
            "metric": r.metric.value,
            "value": r.value,
            "num_windows": r.num_windows,
        }
        for r in report.records
    ]
    return pd.DataFrame(rows, columns=["dataset", "horizon", "metric", "value", "num_windows"])


def write_report_csv(report: EvalReport, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    report_frame(report).to_csv(path, index=False)
    logger.info(f"Wrote {len(report.records)} metric records to {path}")
    return path


def render_table(report: EvalReport) -> str:
    """
    Datasets and horizons as rows, metrics as columns
    """
    frame = report_frame(report)
    if frame.empty:
        return "(no results)"
    table = frame.pivot_table(index=["dataset", "horizon"], columns="metric", values="value", sort=False)
    return table.to_string(float_format=lambda v: f"{v:.4f}")


def histogram_frame(usage: List[ExpertUsage], dataset: str = "") -> pd.DataFrame:
    frame = pd.DataFrame([u.model_dump() for u in usage], columns=["expert_name", "assigned_frequency", "mean_weight", "selection_rate"])
    if dataset:
        frame.insert(0, "dataset", dataset)
    return frame


def write_histogram_csv(report: EvalReport, path: Path) -> Path:
    """
    Expert histograms of every dataset in one CSV
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frames = [histogram_frame(usage, dataset) for dataset, usage in report.expert_histogram.items()]
    frame = pd.concat(frames, ignore_index=True) if frames else histogram_frame([], "")
    frame.to_csv(path, index=False)
    return path


def sine_frame(rows: List[SineExperimentRow]) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in rows], columns=["expert_count", "test_mse", "seed"])
