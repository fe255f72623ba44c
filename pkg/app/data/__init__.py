"""
Dataset ingestion, splitting, scaling and windowing
"""
from app.data.schemas import CsvSchema, DatasetMetadata, SplitSpec, ETT_SPLIT, LTSF_SPLIT, PRETRAIN_SPLIT
from app.data.series import (
    Dataset,
    ScalerParams,
    WindowSet,
    attach_metadata,
    cap_total,
    chronological_split,
    load_csv,
    load_metadata,
    make_windows,
    prepend_context,
    standardize,
)

__all__ = [
    'CsvSchema',
    'DatasetMetadata',
    'SplitSpec',
    'ETT_SPLIT',
    'LTSF_SPLIT',
    'PRETRAIN_SPLIT',
    'Dataset',
    'ScalerParams',
    'WindowSet',
    'attach_metadata',
    'cap_total',
    'chronological_split',
    'load_csv',
    'load_metadata',
    'make_windows',
    'prepend_context',
    'standardize',
]
