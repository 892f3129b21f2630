"""Sparse feature selection and forecasting on technical-indicator pools."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AnnealcastError,
    ConfigError,
    ConvergenceError,
    DataError,
    DivergenceError,
    NumericalError,
    ProtocolError,
)
from .features import FeatureMatrix, TargetVector, align_horizon, build_pool  # noqa: E402
from .fsa import FsaConfig, annealing_schedule, fsa_fit  # noqa: E402
from .lasso import LassoConfig, lasso_fit  # noqa: E402
from .linear import LinearModel  # noqa: E402
from .market_data import OhlcvSeries, parse_ohlcv_csv, split  # noqa: E402

__all__ = [
    "AnnealcastError",
    "ConfigError",
    "ConvergenceError",
    "DataError",
    "DivergenceError",
    "FeatureMatrix",
    "FsaConfig",
    "LassoConfig",
    "LinearModel",
    "NumericalError",
    "OhlcvSeries",
    "ProtocolError",
    "TargetVector",
    "align_horizon",
    "annealing_schedule",
    "build_pool",
    "fsa_fit",
    "lasso_fit",
    "parse_ohlcv_csv",
    "split",
]
