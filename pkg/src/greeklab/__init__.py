"""Classical emulation of quantum and Monte Carlo greek estimators."""
__version__ = "0.1.0"
