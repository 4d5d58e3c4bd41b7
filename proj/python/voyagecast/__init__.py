"""Container-ship sailing duration forecasting."""

from ._core import (
    Config,
    ConfigError,
    IoError,
    ShapeError,
    ValidationError,
    counts,
    evaluate,
    featurize,
    preprocess,
    sensitivity_regression,
    synth,
    train,
    window_bounds,
    window_identifier,
    window_of,
)

__all__ = [
    "Config",
    "ConfigError",
    "IoError",
    "ShapeError",
    "ValidationError",
    "counts",
    "evaluate",
    "featurize",
    "preprocess",
    "sensitivity_regression",
    "synth",
    "train",
    "window_bounds",
    "window_identifier",
    "window_of",
]
