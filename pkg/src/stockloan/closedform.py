"""Closed-form value of capped and uncapped stock loans.

The loan is a perpetual American call on the discounted stock
``S~_t = exp(-gamma t) S_t`` with effective rate ``r~ = r - gamma <= 0``.
Its value solves ``0.5 sigma^2 x^2 h'' + (r~ - delta) x h' - r~ h = 0`` in the
continuation region, is pinned by ``h'(0+) = 0`` near zero, and meets the
payoff ``(min(x, L) - q)+`` with smooth fit at the free boundary ``b``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .exceptions import DomainError, RegimeViolation
from .params import LoanTerms, MarketParams, Regime, RegimeTag, classify

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class Exponents:
    """Roots of ``0.5 sigma^2 l (l - 1) + (r~ - delta) l - r~ = 0``."""

    mu: float
    lambda1: float
    lambda2: float
    regime: Regime


class Shape(str, enum.Enum):
    CAP_ABOVE_B = "CapAboveB"
    CAP_BELOW_B = "CapBelowB"
    UNCAPPED = "Uncapped"


@dataclass(frozen=True)
class Piece:
    """One branch on ``[lo, hi]``: ``scale * (x / ref) ** exponent``, or
    ``x - q`` when ``exponent`` is None."""

    lo: float
    hi: float
    scale: float
    ref: float
    exponent: Optional[float]

    def value(self, x: np.ndarray) -> np.ndarray:
        if self.exponent is None:
            return x - self.scale
        return self.scale * _power(x / self.ref, self.exponent)

    def slope(self, x: np.ndarray) -> np.ndarray:
        if self.exponent is None:
            return np.ones_like(x)
        return self.scale * self.exponent / self.ref * _power(x / self.ref, self.exponent - 1)

    def curvature(self, x: np.ndarray) -> np.ndarray:
        if self.exponent is None:
            return np.zeros_like(x)
        lam = self.exponent
        return self.scale * lam * (lam - 1) / self.ref**2 * _power(x / self.ref, lam - 2)


def _power(ratio: np.ndarray, exponent: float) -> np.ndarray:
    # exp(l * log(ratio)) with ratio == 0 mapped to 0 (the exponents used on x -> 0 are positive)
    ratio = np.asarray(ratio, dtype=float)
    out = np.zeros_like(ratio)
    pos = ratio > 0
    out[pos] = np.exp(exponent * np.log(ratio[pos]))
    return out


@dataclass(frozen=True)
class ValueFunction:
    exponents: Exponents
    b: float
    shape: Shape
    q: float
    cap: Optional[float]
    gamma: float
    pieces: tuple[Piece, ...]

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(p.hi for p in self.pieces[:-1])

    def to_dict(self) -> dict:
        exp = self.exponents
        return {
            "regime": exp.regime.tag.value,
            "mu": exp.mu,
            "lambda1": exp.lambda1,
            "lambda2": exp.lambda2,
            "b": self.b,
            "shape": self.shape.value,
            "q": self.q,
            "cap": self.cap,
        }

    def __call__(self, x: ArrayLike) -> ArrayLike:
        return value(self, x)


def exponents(market: MarketParams, terms: LoanTerms) -> Exponents:
    regime = classify(market, terms.gamma)
    sigma, spread = market.sigma, terms.gamma - market.r
    mu = -(sigma / 2 + (spread + market.delta) / sigma)
    if regime.tag is RegimeTag.ZERO_DIVIDEND:
        # the discriminant is a perfect square here; use the exact roots
        return Exponents(mu=mu, lambda1=2 * spread / sigma**2, lambda2=1.0, regime=regime)
    root = math.sqrt(mu * mu - 2 * spread)
    return Exponents(
        mu=mu,
        lambda1=(-mu + root) / sigma,
        lambda2=(-mu - root) / sigma,
        regime=regime,
    )


def boundary_b(exp: Exponents, q: float) -> float:
    """Free boundary ``b = q l1 / (l1 - 1)``."""
    lam = exp.lambda1
    if not lam > 1:
        raise RegimeViolation(f"free boundary needs lambda1 > 1, got {lam}")
    return q * lam / (lam - 1)


def build(market: MarketParams, terms: LoanTerms) -> ValueFunction:
    """Assemble the piecewise value function for ``terms``.

    Only the regime is checked; ``s0`` and ``c`` do not enter the value, so the
    no-arbitrage condition is left to :func:`stockloan.params.validate`.
    """
    exp = exponents(market, terms)
    q = terms.q
    b = boundary_b(exp, q)
    l1, l2 = exp.lambda1, exp.lambda2
    inf = math.inf
    if terms.cap is None:
        shape = Shape.UNCAPPED
        pieces = (Piece(0.0, b, b - q, b, l1), Piece(b, inf, q, 1.0, None))
    elif terms.cap >= b:
        cap = terms.cap
        shape = Shape.CAP_ABOVE_B
        pieces = (
            Piece(0.0, b, b - q, b, l1),
            Piece(b, cap, q, 1.0, None),
            Piece(cap, inf, cap - q, cap, l2),
        )
    else:
        cap = terms.cap
        shape = Shape.CAP_BELOW_B
        pieces = (Piece(0.0, cap, cap - q, cap, l1), Piece(cap, inf, cap - q, cap, l2))
    return ValueFunction(
        exponents=exp, b=b, shape=shape, q=q, cap=terms.cap, gamma=terms.gamma, pieces=pieces
    )


def _as_prices(x: ArrayLike, *, strictly_positive: bool = False) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("stock price must be finite")
    if strictly_positive and np.any(arr <= 0):
        raise DomainError("stock price must be > 0")
    if np.any(arr < 0):
        raise DomainError("stock price must be >= 0")
    return arr


def _piece_index(vf: ValueFunction, x: np.ndarray, side: str = "left") -> np.ndarray:
    # side="left": a breakpoint belongs to the piece on its left
    return np.searchsorted(np.asarray(vf.breakpoints), x, side=side)


def _evaluate(vf: ValueFunction, x: np.ndarray, attr: str, side: str = "left") -> np.ndarray:
    idx = _piece_index(vf, x, side)
    out = np.empty_like(x)
    for i, piece in enumerate(vf.pieces):
        mask = idx == i
        if np.any(mask):
            out[mask] = getattr(piece, attr)(x[mask])
    return out


def _scalar_or_array(template: ArrayLike, out: np.ndarray) -> ArrayLike:
    return float(out) if np.ndim(template) == 0 else out


def value(vf: ValueFunction, x: ArrayLike) -> ArrayLike:
    """Loan value at discounted stock price ``x`` (scalar or array)."""
    arr = _as_prices(x)
    return _scalar_or_array(x, _evaluate(vf, np.atleast_1d(arr), "value").reshape(arr.shape))


def derivative(vf: ValueFunction, x: ArrayLike, side: Optional[str] = None) -> ArrayLike:
    """Exact slope of the value function.

    The value has a kink at the cap, where a two-sided derivative does not
    exist; pass ``side="left"`` or ``side="right"`` to get a one-sided slope.
    """
    arr = np.atleast_1d(_as_prices(x, strictly_positive=True))
    if side not in (None, "left", "right"):
        raise ValueError(f"side must be None, 'left' or 'right', got {side!r}")
    if side is None and vf.cap is not None and np.any(arr == vf.cap):
        raise DomainError("value function has a kink at the cap; request a one-sided derivative")
    out = _evaluate(vf, arr, "slope", side="right" if side == "right" else "left")
    return _scalar_or_array(x, out.reshape(np.shape(x)))


def second_derivative(vf: ValueFunction, x: ArrayLike, side: Optional[str] = None) -> ArrayLike:
    arr = np.atleast_1d(_as_prices(x, strictly_positive=True))
    out = _evaluate(vf, arr, "curvature", side="right" if side == "right" else "left")
    return _scalar_or_array(x, out.reshape(np.shape(x)))


def value_process(vf: ValueFunction, t: float, s_t: ArrayLike) -> ArrayLike:
    """Value at time ``t`` given the undiscounted price ``s_t``:
    ``exp(gamma t) * value(exp(-gamma t) s_t)``."""
    if not (math.isfinite(t) and t >= 0):
        raise DomainError(f"time must be finite and >= 0, got {t}")
    growth = math.exp(vf.gamma * t)
    arr = _as_prices(s_t)
    out = growth * np.asarray(value(vf, arr / growth))
    return _scalar_or_array(s_t, out)


def payoff(x: ArrayLike, q: float, cap: Optional[float]) -> ArrayLike:
    """Immediate redemption value ``(min(x, L) - q)+``."""
    arr = np.asarray(x, dtype=float)
    capped = arr if cap is None else np.minimum(arr, cap)
    out = np.maximum(capped - q, 0.0)
    return _scalar_or_array(x, out)
