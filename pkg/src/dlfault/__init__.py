"""Fault diagnosis and localization for deep-learning training programs."""

from .indicators import IndicatorConfig, IndicatorMatrix, compute_indicators
from .features import (
    FEATURE_NAMES,
    N_FEATURES,
    NormParams,
    aggregate,
    extract_features,
    fit_normalizer,
    normalize,
)
from .labels import FaultLabelSet, FaultType
from .stats import KillVerdict, cohens_d, glm_p_value, is_kill
from .trace_model import RunTrace, load_trace, parse_trace_file, serialize_trace, validate_trace

__all__ = [
    "IndicatorConfig",
    "IndicatorMatrix",
    "compute_indicators",
    "FEATURE_NAMES",
    "N_FEATURES",
    "NormParams",
    "aggregate",
    "extract_features",
    "fit_normalizer",
    "normalize",
    "FaultLabelSet",
    "FaultType",
    "KillVerdict",
    "cohens_d",
    "glm_p_value",
    "is_kill",
    "RunTrace",
    "load_trace",
    "parse_trace_file",
    "serialize_trace",
    "validate_trace",
]

__version__ = "0.1.0"
