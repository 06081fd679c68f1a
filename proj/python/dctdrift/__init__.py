"""Sensor drift estimation: causal TCN with DCT shrinkage, plus a Papoulis-Gerchberg baseline."""

from ._dctdrift import (
    CorruptCheckpoint,
    Error,
    InvalidParameter,
    IoError,
    Model,
    NumericError,
    ParseError,
    ShapeMismatch,
    VersionMismatch,
    cosine_similarity,
    mse,
    pg_extrapolate,
    synthesize_example,
    total_variation,
)

__all__ = [
    "CorruptCheckpoint",
    "Error",
    "InvalidParameter",
    "IoError",
    "Model",
    "NumericError",
    "ParseError",
    "ShapeMismatch",
    "VersionMismatch",
    "cosine_similarity",
    "mse",
    "pg_extrapolate",
    "synthesize_example",
    "total_variation",
]
