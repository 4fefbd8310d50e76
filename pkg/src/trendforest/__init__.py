"""Stock direction prediction: smoothed OHLCV -> technical indicators -> random forest."""

__version__ = "0.1.0"

from .errors import TrendForestError
from .forest import Forest, oob_curve, oob_error, train
from .indicators import FEATURE_NAMES, FeatureMatrix, build_matrix
from .market_data import OhlcvSeries, parse_csv
from .preprocess import label, smooth

__all__ = [
    "FEATURE_NAMES",
    "FeatureMatrix",
    "Forest",
    "OhlcvSeries",
    "TrendForestError",
    "build_matrix",
    "label",
    "oob_curve",
    "oob_error",
    "parse_csv",
    "smooth",
    "train",
]
