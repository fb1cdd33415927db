"""Stochastic cross-checks: hitting-time Monte Carlo and a binomial lattice.

All simulation runs on the discounted price ``S~_t = exp(-gamma t) S_t``,
whose log has drift ``r - gamma - delta - sigma^2/2`` and volatility ``sigma``,
so barriers and payoffs are stationary.

Monte Carlo paths are advanced with exact log-normal steps of size ``dt``.
Barrier crossings between grid points are detected with the Brownian-bridge
crossing probability ``exp(-2 z0 z1 / (sigma^2 dt))``. For speed, paths are
first advanced over blocks of ``block`` steps; a block is only filled in at
``dt`` resolution (by sampling the bridge conditioned on the block end points)
when the chance of a crossing inside it exceeds ``1e-10``. This reproduces the
``dt``-step scheme in distribution up to that negligible probability.

Random numbers come from ``numpy.random.SeedSequence(seed).spawn``: one
independent stream per chunk of ``chunk_size`` paths. Results therefore do not
depend on how chunks are scheduled across workers.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import Executor
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .closedform import payoff as _payoff
from .exceptions import ConfigError, ParameterError
from .params import LoanTerms, MarketParams, classify

log = logging.getLogger(__name__)

CROSSING_EPS = 1e-10


@dataclass(frozen=True)
class PathConfig:
    dt: float = 1 / 252
    horizon: float = 200.0
    n_paths: int = 100_000
    seed: int = 0
    bridge: bool = True
    block: int = 63
    chunk_size: int = 10_000

    def __post_init__(self) -> None:
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ConfigError(f"horizon must be > 0, got {self.horizon}")
        if self.dt > self.horizon / 100:
            raise ConfigError(f"dt={self.dt} too coarse for horizon={self.horizon} (max horizon/100)")
        if self.n_paths < 1000:
            raise ConfigError(f"n_paths must be >= 1000, got {self.n_paths}")
        if self.block < 1 or self.chunk_size < 1:
            raise ConfigError("block and chunk_size must be positive")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    n: int
    truncated_fraction: float

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "n": self.n,
            "truncated_fraction": self.truncated_fraction,
        }


@dataclass(frozen=True)
class LatticeResult:
    value: float
    steps: int
    horizon: float
    exercise_boundary: np.ndarray
    up_probability: float
    aligned: bool


def log_drift(market: MarketParams, gamma: float) -> float:
    """Drift of ``log S~``."""
    return market.r - gamma - market.delta - market.sigma**2 / 2


def recommended_horizon(market: MarketParams, gamma: float) -> float:
    return 10 * max(1.0, 1 / abs(log_drift(market, gamma)))


def _stream_seeds(cfg: PathConfig) -> list[tuple[np.random.SeedSequence, int]]:
    n_chunks = -(-cfg.n_paths // cfg.chunk_size)
    seeds = np.random.SeedSequence(cfg.seed).spawn(n_chunks)
    sizes = [cfg.chunk_size] * (n_chunks - 1) + [cfg.n_paths - cfg.chunk_size * (n_chunks - 1)]
    return list(zip(seeds, sizes))


def simulate_paths(
    market: MarketParams,
    terms: LoanTerms,
    cfg: PathConfig,
    x: Optional[float] = None,
    zero_noise: bool = False,
) -> Iterator[np.ndarray]:
    """Yield chunks of discounted price paths, shape ``(chunk, n_steps + 1)``.

    Memory grows with ``n_steps``; meant for short horizons and diagnostics.
    ``zero_noise`` replaces every normal draw by 0 (deterministic drift path).
    """
    classify(market, terms.gamma)
    x0 = terms.s0 if x is None else x
    drift = log_drift(market, terms.gamma) * cfg.dt
    vol = market.sigma * math.sqrt(cfg.dt)
    for seed, size in _stream_seeds(cfg):
        rng = np.random.Generator(np.random.PCG64(seed))
        z = rng.standard_normal((size, cfg.n_steps))
        if zero_noise:
            z[:] = 0.0
        logs = np.empty((size, cfg.n_steps + 1))
        logs[:, 0] = math.log(x0)
        np.cumsum(drift + vol * z, axis=1, out=logs[:, 1:])
        logs[:, 1:] += logs[:, :1]
        yield np.exp(logs)


def _first_passage_steps(
    seed: np.random.SeedSequence,
    n: int,
    levels: np.ndarray,
    drift: float,
    sigma: float,
    dt: float,
    n_steps: int,
    block: int,
    bridge: bool,
) -> np.ndarray:
    """First step index (1-based) at which the progress process reaches each
    level; 0 when a level is not reached within ``n_steps``.

    The progress process starts at 0, has drift ``drift`` and volatility
    ``sigma``; ``levels`` are increasing positive distances.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    n_lev = levels.size
    hit = np.zeros((n, n_lev), dtype=np.int64)
    nxt = np.zeros(n, dtype=np.int64)
    w = np.zeros(n)
    alive = np.arange(n)
    var_dt = sigma * sigma * dt
    step0 = 0
    while step0 < n_steps and alive.size:
        k = min(block, n_steps - step0)
        span = k * dt
        w0 = w[alive]
        w1 = w0 + drift * span + sigma * math.sqrt(span) * rng.standard_normal(alive.size)
        gap0 = levels[nxt[alive]] - w0
        gap1 = levels[nxt[alive]] - w1
        with np.errstate(over="ignore", under="ignore"):
            p_block = np.where(
                gap1 <= 0, 1.0, np.exp(-2 * gap0 * np.maximum(gap1, 0) / (sigma * sigma * span))
            )
        rows = np.flatnonzero(p_block > CROSSING_EPS)
        if rows.size:
            a0 = w0[rows][:, None]
            a1 = w1[rows][:, None]
            if k > 1:
                frac = np.arange(1, k + 1) / k
                free = np.cumsum(rng.standard_normal((rows.size, k)), axis=1) * math.sqrt(dt) * sigma
                path = a0 + frac * (a1 - a0) + free - frac * free[:, -1:]
                path[:, -1] = a1[:, 0]
            else:
                path = a1
            prev = np.concatenate([a0, path[:, :-1]], axis=1)
            u = rng.random((rows.size, k)) if bridge else None
            ids = alive[rows]
            for lev in range(n_lev):
                todo = np.flatnonzero(nxt[ids] <= lev)
                if todo.size == 0:
                    continue
                za = levels[lev] - prev[todo]
                zb = levels[lev] - path[todo]
                crossed = (za <= 0) | (zb <= 0)
                if bridge:
                    with np.errstate(over="ignore", under="ignore"):
                        p = np.exp(-2 * np.maximum(za, 0) * np.maximum(zb, 0) / var_dt)
                    crossed |= u[todo] < p
                any_cross = crossed.any(axis=1)
                first = np.argmax(crossed, axis=1)
                sel = todo[any_cross]
                hit[ids[sel], lev] = step0 + first[any_cross] + 1
            nxt[ids] = np.count_nonzero(hit[ids] > 0, axis=1)
        w[alive] = w1
        alive = alive[nxt[alive] < n_lev]
        step0 += k
    return hit


def _passage_moments(args) -> np.ndarray:
    """Per-chunk sums used by the estimators: rows are levels, columns are
    (sum, sum of squares, count, not reached)."""
    seed, size, levels, drift, sigma, dt, n_steps, block, bridge, r_tilde, payoffs = args
    steps = _first_passage_steps(seed, size, levels, drift, sigma, dt, n_steps, block, bridge)
    reached = steps > 0
    with np.errstate(over="ignore"):
        sample = np.where(reached, payoffs * np.exp(-r_tilde * steps * dt), 0.0)
    return np.stack(
        [
            sample.sum(axis=0),
            (sample * sample).sum(axis=0),
            np.full(levels.size, float(size)),
            (~reached).sum(axis=0).astype(float),
        ],
        axis=1,
    )


def _passage_estimates(
    market: MarketParams,
    gamma: float,
    x: float,
    targets: Sequence[float],
    payoffs: Sequence[float],
    cfg: PathConfig,
    executor: Optional[Executor],
) -> list[McEstimate]:
    """Estimate ``E[payoff * exp(-r~ tau) 1{tau < horizon}]`` where ``tau`` is the
    first passage of ``S~`` from ``x`` to each target; all targets lie on the
    same side of ``x``."""
    regime = classify(market, gamma)
    if cfg.horizon < recommended_horizon(market, gamma):
        log.info(
            "horizon %.4g below recommended %.4g; check truncated_fraction",
            cfg.horizon,
            recommended_horizon(market, gamma),
        )
    targets = np.asarray(targets, dtype=float)
    up = bool(np.all(targets > x))
    if not up and not np.all(targets < x):
        raise ParameterError("targets must all lie on the same side of the start price")
    dist = np.abs(np.log(targets / x))
    order = np.argsort(dist)
    drift = log_drift(market, gamma) * (1 if up else -1)
    jobs = [
        (
            seed,
            size,
            dist[order],
            drift,
            market.sigma,
            cfg.dt,
            cfg.n_steps,
            cfg.block,
            cfg.bridge,
            regime.r_tilde,
            np.asarray(payoffs, dtype=float)[order],
        )
        for seed, size in _stream_seeds(cfg)
    ]
    mapper = executor.map if executor is not None else map
    totals = sum(mapper(_passage_moments, jobs))
    out: list[Optional[McEstimate]] = [None] * targets.size
    for rank, idx in enumerate(order):
        s1, s2, n, missed = totals[rank]
        mean = s1 / n
        var = max(s2 / n - mean * mean, 0.0) * n / (n - 1)
        out[idx] = McEstimate(
            mean=float(mean),
            stderr=float(math.sqrt(var / n)),
            n=int(n),
            truncated_fraction=float(missed / n),
        )
    return out  # type: ignore[return-value]


def hitting_transform_mc(
    market: MarketParams,
    terms: LoanTerms,
    level: float,
    cfg: PathConfig,
    x: Optional[float] = None,
    executor: Optional[Executor] = None,
) -> McEstimate:
    """Estimate the truncated discounted hitting transform
    ``E[exp(-r~ tau) 1{tau < horizon}]`` of ``level`` started from ``x``
    (default ``terms.s0``)."""
    x0 = terms.s0 if x is None else x
    if not (level > 0 and x0 > 0):
        raise ParameterError("level and start price must be > 0")
    if level == x0:
        return McEstimate(mean=1.0, stderr=0.0, n=cfg.n_paths, truncated_fraction=0.0)
    return _passage_estimates(market, terms.gamma, x0, [level], [1.0], cfg, executor)[0]


def threshold_sweep(
    market: MarketParams,
    terms: LoanTerms,
    thresholds: Sequence[float],
    cfg: PathConfig,
    x: Optional[float] = None,
    executor: Optional[Executor] = None,
) -> list[McEstimate]:
    """Value the strategies "stop on first entry into ``[min(θ, L), L]``" for each θ.

    Uncapped loans stop on entry into ``[θ, ∞)``. Strategies are simulated on
    common random numbers, so differences between thresholds are sharper than
    the individual standard errors suggest.
    """
    x0 = terms.s0 if x is None else x
    q, cap = terms.q, terms.cap
    results: dict[int, McEstimate] = {}
    groups: dict[bool, list[tuple[int, float, float]]] = {True: [], False: []}
    for i, theta in enumerate(thresholds):
        if not theta >= q:
            raise ParameterError(f"threshold must be >= q={q}, got {theta}")
        lo = theta if cap is None else min(theta, cap)
        hi = math.inf if cap is None else cap
        if lo <= x0 <= hi:
            results[i] = McEstimate(
                mean=float(_payoff(x0, q, cap)), stderr=0.0, n=cfg.n_paths, truncated_fraction=0.0
            )
        elif x0 < lo:
            groups[True].append((i, lo, lo - q))
        else:
            groups[False].append((i, hi, hi - q))
    for members in groups.values():
        if members:
            idx, levels, pays = zip(*members)
            ests = _passage_estimates(market, terms.gamma, x0, levels, pays, cfg, executor)
            results.update(zip(idx, ests))
    return [results[i] for i in range(len(thresholds))]


def threshold_strategy_value(
    market: MarketParams,
    terms: LoanTerms,
    threshold: float,
    cfg: PathConfig,
    x: Optional[float] = None,
    executor: Optional[Executor] = None,
) -> McEstimate:
    return threshold_sweep(market, terms, [threshold], cfg, x=x, executor=executor)[0]


def lattice_value(
    market: MarketParams,
    terms: LoanTerms,
    steps: int,
    horizon: float,
    x: Optional[float] = None,
    align_cap: bool = True,
) -> LatticeResult:
    """Finite-horizon optimal stopping value on a CRR tree for ``S~``.

    With ``align_cap`` the step is shortened slightly so that the cap lies on
    a node level; a ±1 walk cannot then step over the cap, which is the only
    exercise point when ``L < b``. Alignment is skipped when it would more
    than double the step count. ``steps`` and ``horizon`` in the result are the
    values actually used.
    """
    regime = classify(market, terms.gamma)
    if steps < 1 or not horizon > 0:
        raise ConfigError("steps must be >= 1 and horizon > 0")
    x0 = terms.s0 if x is None else x
    if not x0 > 0:
        raise ParameterError("start price must be > 0")
    sigma, cap, q = market.sigma, terms.cap, terms.q
    dt = horizon / steps
    aligned = False
    if align_cap and cap is not None and cap != x0:
        dist = abs(math.log(cap / x0))
        levels = math.ceil(dist / (sigma * math.sqrt(dt)) - 1e-12)
        dt_aligned = (dist / (levels * sigma)) ** 2
        steps_aligned = max(1, int(round(horizon / dt_aligned)))
        if steps_aligned <= 2 * steps:
            dt, steps, aligned = dt_aligned, steps_aligned, True
    log_u = sigma * math.sqrt(dt)
    u, d = math.exp(log_u), math.exp(-log_u)
    p = (math.exp((regime.r_tilde - market.delta) * dt) - d) / (u - d)
    if not 0 < p < 1:
        raise ConfigError(f"up-probability {p:.4g} outside (0, 1); increase steps")
    disc = math.exp(-regime.r_tilde * dt)

    prices = x0 * np.exp(log_u * np.arange(-steps, steps + 1))
    pay_all = np.asarray(_payoff(prices, q, cap))
    boundary = np.full(steps + 1, np.nan)

    def lowest_exercise(ex: np.ndarray, n: int) -> float:
        if ex.any():
            return float(prices[steps - n + 2 * int(np.argmax(ex))])
        return math.nan

    values = pay_all[0 : 2 * steps + 1 : 2].copy()
    boundary[steps] = lowest_exercise(values > 0, steps)
    for n in range(steps - 1, -1, -1):
        cont = disc * (p * values[1:] + (1 - p) * values[:-1])
        pay = pay_all[steps - n : steps + n + 1 : 2]
        ex = (pay >= cont) & (pay > 0)
        values = np.where(ex, pay, cont)
        boundary[n] = lowest_exercise(ex, n)
    return LatticeResult(
        value=float(values[0]),
        steps=steps,
        horizon=steps * dt,
        exercise_boundary=boundary,
        up_probability=p,
        aligned=aligned,
    )
