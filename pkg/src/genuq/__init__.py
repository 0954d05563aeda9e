"""Uncertainty scoring, confidence calibration, and selective-prediction
evaluation for generative language model outputs.

The package consumes pre-generated model responses as structured JSONL
records and provides: sequence- and claim-level uncertainty scores (token
probability based, sample diversity based, density based, and reflexive),
confidence normalizers that map raw scores into calibrated [0, 1]
confidences, and evaluation through prediction-rejection curves, AUCs, and
calibration error.
"""

from . import (
    calibrate,
    claims,
    density,
    diversity,
    info_scores,
    metrics,
    nli,
    records,
    reflexive,
    registry,
    similarity,
    synth,
    text_metrics,
)
from .errors import GenuqError
from .records import (
    CalibrationPair,
    ClaimSpan,
    GenerationRecord,
    SampleResponse,
    TokenStep,
    parse_record,
    serialize_record,
    stream_dataset,
    write_dataset,
)
from .registry import UncertaintyScore, catalog, method_ids

__version__ = "0.1.0"

__all__ = [
    "GenuqError",
    "GenerationRecord",
    "TokenStep",
    "SampleResponse",
    "ClaimSpan",
    "CalibrationPair",
    "UncertaintyScore",
    "parse_record",
    "serialize_record",
    "stream_dataset",
    "write_dataset",
    "catalog",
    "method_ids",
    "calibrate",
    "claims",
    "density",
    "diversity",
    "info_scores",
    "metrics",
    "nli",
    "records",
    "reflexive",
    "registry",
    "similarity",
    "synth",
    "text_metrics",
]
