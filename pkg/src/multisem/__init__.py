"""Two-level (fine -> coarse) semantic recognition and interpretability metrics."""

from multisem.errors import (
    BadK,
    ConfigError,
    DimensionMismatch,
    EmptyEvaluation,
    MissingPrediction,
    MultisemError,
    ParseError,
    UnknownLabel,
)
from multisem.hierarchy import LabelHierarchy, coarse_of, default_coco_hierarchy
from multisem.metrics import InterpretabilityReport, QuadrantCounts, build_report

__version__ = "0.1.0"

__all__ = [
    "BadK",
    "ConfigError",
    "DimensionMismatch",
    "EmptyEvaluation",
    "InterpretabilityReport",
    "LabelHierarchy",
    "MissingPrediction",
    "MultisemError",
    "ParseError",
    "QuadrantCounts",
    "UnknownLabel",
    "build_report",
    "coarse_of",
    "default_coco_hierarchy",
]
