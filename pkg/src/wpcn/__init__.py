"""Stochastic-geometry analysis of harvest-then-transmit wireless powered networks.

The package covers the downlink harvested-energy law, uplink success
probability, transmission probabilities with and without batteries, the
spatial-throughput optimizers, and a Monte Carlo engine used to check them.
"""

from .errors import (
    BracketError,
    ConfigError,
    ConvergenceError,
    DomainError,
    InfeasibleParamsError,
    QuantizationError,
    ResourceError,
    UnsupportedAlphaError,
    WpcnError,
)
from .params import NetworkParams, dbm_to_watt, watt_to_dbm

__version__ = "0.1.0"

__all__ = [
    "BracketError",
    "ConfigError",
    "ConvergenceError",
    "DomainError",
    "InfeasibleParamsError",
    "NetworkParams",
    "QuantizationError",
    "ResourceError",
    "UnsupportedAlphaError",
    "WpcnError",
    "dbm_to_watt",
    "watt_to_dbm",
    "__version__",
]
