"""Run the closed form against the three numerical oracles at one price."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import closedform, lcp, simulate
from .exceptions import DomainError
from .params import LoanTerms, MarketParams

LCP_REL_TOL = 1e-3
MC_SIGMAS = 3.0
LATTICE_REL_TOL = 0.01


@dataclass
class CrossCheck:
    x: float
    closed_form: float
    lcp: float
    mc: simulate.McEstimate
    lattice: float
    gates: dict[str, bool] = field(default_factory=dict)

    @property
    def max_abs_disagreement(self) -> float:
        return max(abs(v - self.closed_form) for v in (self.lcp, self.mc.mean, self.lattice))

    @property
    def passed(self) -> bool:
        return all(self.gates.values())

    @property
    def failing(self) -> list[str]:
        return [name for name, ok in self.gates.items() if not ok]

    def to_dict(self) -> dict:
        return {
            "x": self.x,
            "closed_form": self.closed_form,
            "lcp": self.lcp,
            "mc": {
                "mean": self.mc.mean,
                "stderr": self.mc.stderr,
                "truncated_fraction": self.mc.truncated_fraction,
            },
            "lattice": self.lattice,
            "max_abs_disagreement": self.max_abs_disagreement,
            "gates": dict(self.gates),
        }


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b) if b != 0 else abs(a - b)


def cross_check(
    market: MarketParams,
    terms: LoanTerms,
    x: Optional[float] = None,
    *,
    mc_paths: int = 100_000,
    seed: int = 0,
    lattice_steps: int = 20_000,
    lattice_horizon: float = 400.0,
    lcp_nodes: int = 2048,
    path_config: Optional[simulate.PathConfig] = None,
) -> CrossCheck:
    """Value the loan at ``x`` four ways and gate the oracles against the closed form.

    The Monte Carlo oracle values the threshold strategy at ``b``. The lattice
    horizon defaults to 400 years: the finite-horizon value converges slowly
    when the effective rate is negative.
    """
    x = terms.s0 if x is None else x
    if not x > 0:
        raise DomainError(f"cross-check price must be > 0, got {x}")
    vf = closedform.build(market, terms)
    closed = float(closedform.value(vf, x))

    top = vf.b if terms.cap is None else max(vf.b, terms.cap)
    sol = lcp.solve(
        market, terms, n=lcp_nodes, lo=min(terms.q / 8, x / 2), hi=max(8 * top, 2 * x)
    )
    lcp_value = float(lcp.solution_value(sol, x))

    cfg = path_config or simulate.PathConfig(n_paths=mc_paths, seed=seed)
    mc = simulate.threshold_strategy_value(market, terms, vf.b, cfg, x=x)

    lattice = simulate.lattice_value(market, terms, lattice_steps, lattice_horizon, x=x).value

    check = CrossCheck(x=x, closed_form=closed, lcp=lcp_value, mc=mc, lattice=lattice)
    check.gates = {
        "lcp": _rel(lcp_value, closed) < LCP_REL_TOL,
        "mc": abs(mc.mean - closed) <= MC_SIGMAS * mc.stderr,
        "lattice": _rel(lattice, closed) < LATTICE_REL_TOL,
    }
    return check
