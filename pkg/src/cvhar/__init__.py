"""Realized-kernel volatility forecasting with a C-vine copula alternative to HAR.

Pipeline: tick ingestion and cleaning -> daily realized-kernel estimates ->
daily/weekly/monthly component series -> marginal CDF models -> C-vine copula
over the components -> one-step-ahead forecasts as conditional expectations,
benchmarked against the linear HAR model under FW/IW/RW backtesting schemes.
"""

from cvhar.errors import CvharError, DataError, DomainError, FitError
from cvhar.evaluate import SchemeConfig, run_scheme
from cvhar.har import HarModel, fit_har, har_forecast
from cvhar.ingest import CleaningConfig, clean_ticks, parse_ticks, to_daily_sessions
from cvhar.margins import Margin, fit_margin
from cvhar.realized import build_components, realized_kernel
from cvhar.vine import CVineModel, conditional_expectation, fit_cvine, simulate_cvine

__version__ = "0.1.0"

__all__ = [
    "CvharError",
    "DataError",
    "DomainError",
    "FitError",
    "SchemeConfig",
    "run_scheme",
    "HarModel",
    "fit_har",
    "har_forecast",
    "CleaningConfig",
    "clean_ticks",
    "parse_ticks",
    "to_daily_sessions",
    "Margin",
    "fit_margin",
    "build_components",
    "realized_kernel",
    "CVineModel",
    "conditional_expectation",
    "fit_cvine",
    "simulate_cvine",
    "__version__",
]
