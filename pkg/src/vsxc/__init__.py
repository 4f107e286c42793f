"""Decomposition-based time-series forecasting: Kalman smoothing, VMD, per-component models."""
from .series import MetricsReport, SplitSeries, TimeSeries, evaluate, load_csv, mape, rmse, split

__version__ = "0.1.0"

__all__ = ["MetricsReport", "SplitSeries", "TimeSeries", "evaluate", "load_csv", "mape", "rmse",
           "split", "__version__"]
