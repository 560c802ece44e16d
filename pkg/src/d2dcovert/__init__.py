"""Covert D2D communication with friendly jamming: analytic model, Monte Carlo check and Stackelberg power control."""
from .model import (
    DomainError,
    ParameterError,
    ProbabilityBundle,
    Strategy,
    SystemParams,
    dbm_to_watt,
    validate,
    watt_to_dbm,
)

__all__ = [
    "DomainError",
    "ParameterError",
    "ProbabilityBundle",
    "Strategy",
    "SystemParams",
    "dbm_to_watt",
    "validate",
    "watt_to_dbm",
]
