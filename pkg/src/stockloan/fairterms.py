"""Fair service fee and parameter inversion.

A contract is fair when the loan value equals what the client hands over net
of cash received: ``f(S0) = S0 - q + c``. Hence ``c = f(S0) - S0 + q``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import closedform
from .closedform import Shape
from .exceptions import NoBracket, ParameterError, RegimeViolation
from .params import LoanTerms, MarketParams, classify


class PriceCase(str, enum.Enum):
    HIGH = "HighPrice"  # S0 >= L
    MID = "MidPrice"  # b <= S0 < L
    LOW = "LowPrice"  # S0 < b (or S0 < L when L < b)


_RULES = {
    PriceCase.HIGH: "stop when the discounted price falls to the cap (tau_L)",
    PriceCase.MID: "redeem immediately (tau_b = 0)",
}


@dataclass(frozen=True)
class FairTermsReport:
    case: PriceCase
    fair_fee: float
    optimal_rule: str
    b: float
    value_at_s0: float
    s0: float
    q: float
    cap: Optional[float]

    @property
    def negative_fee(self) -> bool:
        """The lender pays the client to enter the loan."""
        return self.fair_fee < 0

    def to_dict(self) -> dict:
        return {
            "case": self.case.value,
            "fair_fee": self.fair_fee,
            "negative_fee": self.negative_fee,
            "optimal_rule": self.optimal_rule,
            "b": self.b,
            "value_at_s0": self.value_at_s0,
            "s0": self.s0,
            "q": self.q,
            "cap": self.cap,
        }

    def table(self) -> str:
        rows = [
            ("case", self.case.value),
            ("fair fee c", f"{self.fair_fee:.10g}"),
            ("negative fee", "yes" if self.negative_fee else "no"),
            ("value f(S0)", f"{self.value_at_s0:.10g}"),
            ("free boundary b", f"{self.b:.10g}"),
            ("S0", f"{self.s0:.10g}"),
            ("q", f"{self.q:.10g}"),
            ("cap L", "none" if self.cap is None else f"{self.cap:.10g}"),
            ("optimal rule", self.optimal_rule),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)


def fair_fee(
    market: MarketParams, q: float, gamma: float, cap: Optional[float], s0: float
) -> FairTermsReport:
    terms = LoanTerms(q=q, gamma=gamma, c=0.0, cap=cap, s0=s0)
    vf = closedform.build(market, terms)
    b = vf.b
    value = float(closedform.value(vf, s0))
    if cap is not None and s0 >= cap:
        case = PriceCase.HIGH
        fee = value - s0 + q
    elif vf.shape is not Shape.CAP_BELOW_B and s0 >= b:
        case = PriceCase.MID
        # f(S0) = S0 - q exactly on the exercise region
        fee = 0.0
    else:
        case = PriceCase.LOW
        fee = value - s0 + q
    if case is PriceCase.LOW:
        target = "b" if vf.shape is not Shape.CAP_BELOW_B else "the cap"
        rule = f"stop when the discounted price first reaches {target}"
    else:
        rule = _RULES[case]
    return FairTermsReport(
        case=case, fair_fee=fee, optimal_rule=rule, b=b, value_at_s0=value, s0=s0, q=q, cap=cap
    )


FREE_PARAMETERS = ("q", "gamma", "cap")


def _scan_grid(free: str, market: MarketParams, fixed: dict, n: int) -> np.ndarray:
    s0 = fixed["s0"]
    if free == "q":
        upper = fixed["cap"] if fixed.get("cap") is not None else 10 * s0
        return np.geomspace(upper * 1e-4, upper * (1 - 1e-9), n)
    if free == "cap":
        return np.geomspace(fixed["q"] * (1 + 1e-9), fixed["q"] * 1e4, n)
    # gamma: lower edge of the admissible regime
    if market.delta > 0:
        lo = market.r
    else:
        lo = market.r + market.sigma**2 / 2
    return lo + np.geomspace(1e-9, 2.0, n)


def solve_parameter(
    free: str,
    target_fee: float,
    market: MarketParams,
    *,
    q: Optional[float] = None,
    gamma: Optional[float] = None,
    cap: Optional[float] = None,
    s0: float,
    tol: float = 1e-8,
    scan_points: int = 400,
    max_iter: int = 200,
) -> float:
    """Find the value of ``free`` (one of ``q``, ``gamma``, ``cap``) whose fair fee
    equals ``target_fee``, holding the other parameters fixed.

    A sign change of ``fair_fee - target_fee`` is located on a scan grid, then
    refined by bisection until the fee is within ``tol`` of the target.
    """
    if free not in FREE_PARAMETERS:
        raise ParameterError(f"free parameter must be one of {FREE_PARAMETERS}, got {free!r}")
    fixed = {"q": q, "gamma": gamma, "cap": cap, "s0": s0}
    for name in ("q", "gamma"):
        if name != free and fixed[name] is None:
            raise ParameterError(f"{name} must be given when solving for {free}")

    def excess(val: float) -> float:
        kwargs = dict(fixed, **{free: val})
        return fair_fee(market, kwargs["q"], kwargs["gamma"], kwargs["cap"], s0).fair_fee - target_fee

    def safe_excess(val: float) -> float:
        try:
            return excess(val)
        except (RegimeViolation, ParameterError):
            return math.nan

    grid = _scan_grid(free, market, fixed, scan_points)
    diffs = np.array([safe_excess(v) for v in grid])
    for v, dv in zip(grid, diffs):
        if dv == 0:
            return float(v)
    lo = hi = None
    for i in range(len(grid) - 1):
        a, c = diffs[i], diffs[i + 1]
        if np.isfinite(a) and np.isfinite(c) and a * c < 0:
            lo, hi, f_lo = grid[i], grid[i + 1], a
            break
    if lo is None:
        raise NoBracket(f"fair fee never crosses {target_fee} while scanning {free}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = excess(mid)
        if abs(f_mid) <= tol or hi - lo <= 1e-15 * abs(mid):
            break
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    # re-validates the regime at the root
    classify(market, mid if free == "gamma" else gamma)
    return float(mid)
