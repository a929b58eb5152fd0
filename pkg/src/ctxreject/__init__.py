"""Superpixel image classification with a reject option and multiscale context."""

from .core import (ConfigError, CostMatrix, DataError, LabelSet,
                   NumericalError, PipelineConfig, build_cost_matrix,
                   is_metric, load_config, validate_config)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "CostMatrix", "DataError", "LabelSet", "NumericalError",
    "PipelineConfig", "build_cost_matrix", "is_metric", "load_config",
    "validate_config", "__version__",
]
