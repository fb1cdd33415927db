"""Market and contract parameters, regime classification and config ingestion."""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .exceptions import ArbitrageViolation, ConfigError, ParameterError, RegimeViolation


def _require_finite(**values: Optional[float]) -> None:
    for name, value in values.items():
        if value is not None and not math.isfinite(value):
            raise ParameterError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class MarketParams:
    """Black-Scholes market: risk-free rate ``r``, volatility ``sigma``,
    dividend yield ``delta`` (all per year, continuously compounded)."""

    r: float
    sigma: float
    delta: float = 0.0

    def __post_init__(self) -> None:
        _require_finite(r=self.r, sigma=self.sigma, delta=self.delta)
        if self.sigma <= 0:
            raise ParameterError(f"sigma must be > 0, got {self.sigma}")
        if self.r <= 0:
            raise ParameterError(f"r must be > 0, got {self.r}")
        if self.delta < 0:
            raise ParameterError(f"delta must be >= 0, got {self.delta}")


@dataclass(frozen=True)
class LoanTerms:
    """Stock loan contract.

    Attributes:
        q: principal lent against one share.
        gamma: loan interest rate (per year).
        c: service fee charged by the lender. Does not enter the valuation.
        cap: cap level ``L``; ``None`` for an uncapped loan.
        s0: initial stock price.
    """

    q: float
    gamma: float
    c: float = 0.0
    cap: Optional[float] = None
    s0: float = 1.0

    def __post_init__(self) -> None:
        _require_finite(q=self.q, gamma=self.gamma, c=self.c, cap=self.cap, s0=self.s0)
        if self.q <= 0:
            raise ParameterError(f"q must be > 0, got {self.q}")
        if self.s0 <= 0:
            raise ParameterError(f"s0 must be > 0, got {self.s0}")
        if self.cap is not None:
            if self.cap <= 0:
                raise ParameterError(f"cap must be > 0, got {self.cap}")
            if self.cap <= self.q:
                # payoff (min(x, L) - q)+ would vanish identically
                raise ParameterError(f"cap must exceed q, got cap={self.cap}, q={self.q}")
        if not 0 <= self.c <= self.q:
            warnings.warn(
                f"service fee c={self.c} outside [0, q={self.q}]", UserWarning, stacklevel=3
            )

    @property
    def capped(self) -> bool:
        return self.cap is not None


class RegimeTag(str, enum.Enum):
    DIVIDEND = "DividendRegime"
    ZERO_DIVIDEND = "ZeroDividendRegime"


@dataclass(frozen=True)
class Regime:
    tag: RegimeTag
    r_tilde: float


def classify(market: MarketParams, gamma: float) -> Regime:
    """Return the admissible parameter regime or raise :class:`RegimeViolation`.

    Comparisons are exact: a dividend of 0.0 selects the zero-dividend branch,
    and ``gamma - r == sigma**2 / 2`` is rejected.
    """
    _require_finite(gamma=gamma)
    r, sigma, delta = market.r, market.sigma, market.delta
    spread = gamma - r
    if delta > 0:
        if not spread + delta >= 0:
            raise RegimeViolation(f"need γ−r+δ≥0 when δ>0, got γ−r+δ={spread + delta:.6g}")
        if not spread > 0:
            raise RegimeViolation(f"need γ>r (negative effective rate), got γ−r={spread:.6g}")
        tag = RegimeTag.DIVIDEND
    else:
        half_var = sigma * sigma / 2
        if not spread > half_var:
            raise RegimeViolation(
                f"need γ−r>σ²/2 when δ=0, got γ−r={spread:.6g}, σ²/2={half_var:.6g}"
            )
        tag = RegimeTag.ZERO_DIVIDEND
    return Regime(tag=tag, r_tilde=r - gamma)


def validate(market: MarketParams, terms: LoanTerms) -> Regime:
    """Check the regime hypotheses and the no-arbitrage condition s0 - q + c > 0."""
    regime = classify(market, terms.gamma)
    if not terms.s0 - terms.q + terms.c > 0:
        raise ArbitrageViolation(
            f"need s0−q+c>0, got {terms.s0}−{terms.q}+{terms.c}={terms.s0 - terms.q + terms.c:.6g}"
        )
    return regime


CONFIG_KEYS = ("r", "sigma", "delta", "gamma", "q", "c", "cap", "s0")
_REQUIRED = ("r", "sigma", "delta", "gamma", "q", "s0")


def parse_config(text: str) -> tuple[MarketParams, LoanTerms]:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, _, val = (part.strip() for part in line.partition("="))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown key {key!r} on line {lineno}")
        if key in values:
            raise ConfigError(f"duplicate key {key!r} on line {lineno}")
        try:
            values[key] = float(val)
        except ValueError:
            raise ConfigError(f"key {key!r}: cannot parse {val!r} as a number") from None
        if not math.isfinite(values[key]):
            raise ConfigError(f"key {key!r}: value must be finite, got {val!r}")
    missing = [k for k in _REQUIRED if k not in values]
    if missing:
        raise ConfigError(f"missing key {missing[0]!r}")
    market = MarketParams(r=values["r"], sigma=values["sigma"], delta=values["delta"])
    terms = LoanTerms(
        q=values["q"],
        gamma=values["gamma"],
        c=values.get("c", 0.0),
        cap=values.get("cap"),
        s0=values["s0"],
    )
    return market, terms


def load_config(path: str | Path) -> tuple[MarketParams, LoanTerms]:
    return parse_config(Path(path).read_text())
