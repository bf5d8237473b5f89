"""Exogenous-aware patch transformer forecasting with temporal window smoothing."""

__version__ = "0.1.0"
