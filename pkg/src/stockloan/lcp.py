"""Obstacle-problem solver for the stock loan value.

The variational inequality is discretised on a uniform log-price grid and
solved as a linear complementarity problem with projected SOR:

    h >= g,   -(A h) >= 0,   (h - g) * (A h) = 0,

where ``A h = 0.5 sigma^2 h_yy + (r~ - delta - sigma^2/2) h_y - r~ h`` and
``g = (min(x, L) - q)+``. The grid edges use Robin conditions built from the
characteristic exponents (``h_y = l1 h`` below, ``h_y = l2 h`` above), so no
value of the closed-form solution is fed into the solver.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numba
import numpy as np

from . import closedform
from .exceptions import DomainError, GridError, NonConvergence, ParameterError
from .params import LoanTerms, MarketParams

MIN_NODES = 64


@dataclass(frozen=True)
class LogGrid:
    n: int
    y_min: float
    y_max: float
    nodes: np.ndarray
    payoff: np.ndarray

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / (self.n - 1)

    @property
    def prices(self) -> np.ndarray:
        return np.exp(self.nodes)


@dataclass(frozen=True)
class Operator:
    """Tridiagonal ``(A h)_i = lower_i h_{i-1} + diag_i h_i + upper_i h_{i+1} + const_i``."""

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    const: np.ndarray

    def apply(self, h: np.ndarray) -> np.ndarray:
        out = self.diag * h + self.const
        out[1:] += self.lower[1:] * h[:-1]
        out[:-1] += self.upper[:-1] * h[1:]
        return out


@dataclass(frozen=True)
class LcpSolution:
    values: np.ndarray
    iterations: int
    residual: float
    omega: float
    grid: LogGrid


def make_grid(
    market: MarketParams,
    terms: LoanTerms,
    n: int = 2048,
    lo: Optional[float] = None,
    hi: Optional[float] = None,
) -> LogGrid:
    """Uniform log-price grid covering at least ``[q/8, 8 max(L, b)]``.

    When the loan is capped the grid is shifted so that ``L`` is a node; the
    payoff kink then sits exactly on the grid.
    """
    if n < MIN_NODES:
        raise GridError(f"need at least {MIN_NODES} nodes, got {n}")
    exp = closedform.exponents(market, terms)
    b = closedform.boundary_b(exp, terms.q)
    top = b if terms.cap is None else max(terms.cap, b)
    lo = terms.q / 8 if lo is None else lo
    hi = 8 * top if hi is None else hi
    if not 0 < lo < hi:
        raise GridError(f"invalid grid span [{lo}, {hi}]")
    y_lo, y_hi = math.log(lo), math.log(hi)
    if terms.cap is None:
        dy = (y_hi - y_lo) / (n - 1)
        y_min = y_lo
    else:
        # one spare cell absorbs the shift that puts log(L) on a node
        dy = (y_hi - y_lo) / (n - 2)
        y_cap = math.log(terms.cap)
        y_min = y_cap - math.ceil((y_cap - y_lo) / dy - 1e-9) * dy
    nodes = y_min + dy * np.arange(n)
    payoff = np.asarray(closedform.payoff(np.exp(nodes), terms.q, terms.cap))
    return LogGrid(n=n, y_min=float(nodes[0]), y_max=float(nodes[-1]), nodes=nodes, payoff=payoff)


def assemble(market: MarketParams, terms: LoanTerms, grid: LogGrid) -> Operator:
    """Central-difference discretisation of the pricing operator in log price."""
    exp = closedform.exponents(market, terms)
    sigma2 = market.sigma**2
    r_tilde = exp.regime.r_tilde
    drift = r_tilde - market.delta - sigma2 / 2
    dy = grid.dy
    if abs(drift) * dy >= sigma2:
        raise GridError(
            f"grid spacing {dy:.3g} too coarse: |drift|*dy must stay below sigma^2 "
            "for non-negative off-diagonals; refine the grid"
        )
    n = grid.n
    diffusion = sigma2 / (2 * dy * dy)
    advection = drift / (2 * dy)
    lower = np.full(n, diffusion - advection)
    upper = np.full(n, diffusion + advection)
    diag = np.full(n, -2 * diffusion - r_tilde)
    const = np.zeros(n)

    # ghost node below: h_{-1} = exp(-2 l1 dy) h_1, exact for h ~ exp(l1 y)
    upper[0] += lower[0] * math.exp(-2 * exp.lambda1 * dy)
    lower[0] = 0.0
    if terms.cap is not None:
        # ghost node above: h_n = exp(2 l2 dy) h_{n-2}
        lower[-1] += upper[-1] * math.exp(2 * exp.lambda2 * dy)
    else:
        # uncapped: the top of the grid lies in the exercise region, h_y = x
        lower[-1] += upper[-1]
        const[-1] = upper[-1] * 2 * dy * math.exp(grid.nodes[-1])
    upper[-1] = 0.0
    return Operator(lower=lower, diag=diag, upper=upper, const=const)


@numba.njit(cache=True)
def _residual(lower, diag, upper, const, g, h):
    n = h.size
    floor = 0.0
    for i in range(n):
        floor = max(floor, abs(h[i]))
    floor = max(floor * 1e-12, 1e-300)
    worst = 0.0
    for i in range(n):
        a = diag[i] * h[i] + const[i]
        if i > 0:
            a += lower[i] * h[i - 1]
        if i < n - 1:
            a += upper[i] * h[i + 1]
        res = abs(min(-a, h[i] - g[i])) / max(abs(h[i]), floor)
        if res > worst:
            worst = res
    return worst


@numba.njit(cache=True)
def _psor(lower, diag, upper, const, g, h, omega, tol, max_iter, check_every):
    n = h.size
    res = np.inf
    for it in range(1, max_iter + 1):
        for i in range(n):
            acc = const[i]
            if i > 0:
                acc += lower[i] * h[i - 1]
            if i < n - 1:
                acc += upper[i] * h[i + 1]
            trial = h[i] + omega * (-acc / diag[i] - h[i])
            h[i] = trial if trial > g[i] else g[i]
        if it % check_every == 0 or it == max_iter:
            res = _residual(lower, diag, upper, const, g, h)
            if res <= tol:
                return it, res
    return max_iter, res


def psor_solve(
    op: Operator,
    payoff: np.ndarray,
    grid: LogGrid,
    omega: float = 1.95,
    tol: float = 1e-8,
    max_iter: Optional[int] = None,
    initial: Optional[np.ndarray] = None,
) -> LcpSolution:
    """Projected SOR for the discretised obstacle problem.

    The residual is the pointwise complementarity ``min(-(Ah)_i, h_i - g_i)``
    divided by ``|h_i|``. Values span several decades below the free
    boundary, so an absolute criterion would stop early there. Scaling by the
    diagonal as well is tempting (it is the size of the next update) but lets
    the iteration error grow like ``n^2`` on fine grids.

    Raises:
        NonConvergence: if the residual is above ``tol`` after ``max_iter`` sweeps.
    """
    if not 1 < omega < 2:
        raise ParameterError(f"omega must lie in (1, 2), got {omega}")
    g = np.ascontiguousarray(payoff, dtype=float)
    max_iter = 200 * g.size if max_iter is None else int(max_iter)
    h = g.copy() if initial is None else np.maximum(np.asarray(initial, dtype=float), g)
    iterations, res = _psor(
        op.lower, op.diag, op.upper, op.const, g, h, float(omega), float(tol), max_iter, 8
    )
    if res > tol:
        raise NonConvergence(
            f"PSOR residual {res:.3g} above {tol:.3g} after {iterations} sweeps",
            residual=float(res),
            iterations=int(iterations),
        )
    return LcpSolution(values=h, iterations=int(iterations), residual=float(res), omega=omega, grid=grid)


def solve(
    market: MarketParams,
    terms: LoanTerms,
    n: int = 2048,
    omega: float = 1.95,
    tol: float = 1e-8,
    max_iter: Optional[int] = None,
    lo: Optional[float] = None,
    hi: Optional[float] = None,
) -> LcpSolution:
    grid = make_grid(market, terms, n=n, lo=lo, hi=hi)
    op = assemble(market, terms, grid)
    return psor_solve(op, grid.payoff, grid, omega=omega, tol=tol, max_iter=max_iter)


def solution_value(sol: LcpSolution, x):
    """Piecewise-linear interpolation of the grid solution in log price."""
    arr = np.asarray(x, dtype=float)
    grid = sol.grid
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError("price must be finite and > 0")
    y = np.log(arr)
    # tolerate round-off at the edges
    slack = 1e-12 * max(1.0, abs(grid.y_min), abs(grid.y_max))
    if np.any(y < grid.y_min - slack) or np.any(y > grid.y_max + slack):
        raise DomainError(
            f"price outside grid span [{math.exp(grid.y_min):.6g}, {math.exp(grid.y_max):.6g}]"
        )
    out = np.interp(y, grid.nodes, sol.values)
    return float(out) if out.ndim == 0 else out


def free_boundary(sol: LcpSolution, cap: Optional[float] = None, tol: float = 1e-8) -> float:
    """Smallest node price where the solution touches a positive obstacle."""
    grid = sol.grid
    prices = grid.prices
    touch = (sol.values - grid.payoff <= tol) & (grid.payoff > 0)
    if cap is not None:
        touch &= prices <= cap * (1 + 1e-12)
    idx = np.flatnonzero(touch)
    if idx.size == 0:
        return math.nan
    return float(prices[idx[0]])


def write_csv(sol: LcpSolution, vf: closedform.ValueFunction, path: str | Path) -> None:
    """Dump ``x,h_lcp,h_closed,payoff`` per grid node."""
    prices = sol.grid.prices
    closed = np.asarray(closedform.value(vf, prices))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "h_lcp", "h_closed", "payoff"])
        for row in zip(prices, sol.values, closed, sol.grid.payoff):
            writer.writerow([f"{v:.12g}" for v in row])
