"""Valuation of stock loans and capped stock loans under Black-Scholes dynamics."""

from .closedform import Exponents, Shape, ValueFunction, boundary_b, build, derivative, exponents, value, value_process
from .exceptions import (
    ArbitrageViolation,
    ConfigError,
    DomainError,
    GridError,
    NoBracket,
    NonConvergence,
    ParameterError,
    RegimeViolation,
    StockLoanError,
)
from .fairterms import FairTermsReport, PriceCase, fair_fee, solve_parameter
from .params import LoanTerms, MarketParams, Regime, RegimeTag, classify, load_config, parse_config, validate

__all__ = [
    "ArbitrageViolation",
    "ConfigError",
    "DomainError",
    "Exponents",
    "FairTermsReport",
    "GridError",
    "LoanTerms",
    "MarketParams",
    "NoBracket",
    "NonConvergence",
    "ParameterError",
    "PriceCase",
    "Regime",
    "RegimeTag",
    "RegimeViolation",
    "Shape",
    "StockLoanError",
    "ValueFunction",
    "boundary_b",
    "build",
    "classify",
    "derivative",
    "exponents",
    "fair_fee",
    "load_config",
    "parse_config",
    "solve_parameter",
    "validate",
    "value",
    "value_process",
]

__version__ = "0.1.0"
