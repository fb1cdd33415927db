"""Independent reference computations used by the tests.

Nothing here imports the package under test. Exponents come from
high-precision polynomial roots, the value function is assembled directly
from its piecewise definition, and hitting transforms are integrated from the
first-passage density of Brownian motion with drift.
"""

from __future__ import annotations

import math
from typing import Optional

import mpmath as mp
from scipy.integrate import quad

mp.mp.dps = 40


def exponents(r, sigma, delta, gamma):
    """Roots of 0.5 s^2 l (l - 1) + (rt - delta) l - rt, largest first."""
    rt = mp.mpf(r) - mp.mpf(gamma)
    s2 = mp.mpf(sigma) ** 2
    a = s2 / 2
    b = rt - mp.mpf(delta) - s2 / 2
    c = -rt
    roots = sorted((mp.re(z) for z in mp.polyroots([a, b, c], maxsteps=200, extraprec=100)), reverse=True)
    return roots[0], roots[1]


def free_boundary(r, sigma, delta, gamma, q):
    l1, _ = exponents(r, sigma, delta, gamma)
    return mp.mpf(q) * l1 / (l1 - 1)


def value(x, r, sigma, delta, gamma, q, cap: Optional[float] = None):
    l1, l2 = exponents(r, sigma, delta, gamma)
    x, q = mp.mpf(x), mp.mpf(q)
    b = q * l1 / (l1 - 1)
    if cap is None:
        return (b - q) * (x / b) ** l1 if x <= b else x - q
    L = mp.mpf(cap)
    if L > b:
        if x <= b:
            return (b - q) * (x / b) ** l1
        if x < L:
            return x - q
        return (L - q) * (x / L) ** l2
    if x < L:
        return (L - q) * (x / L) ** l1
    return (L - q) * (x / L) ** l2


def hitting_transform(x, level, r, sigma, delta, gamma, horizon=math.inf):
    """``E[exp(-rt tau) 1{tau < horizon}]`` for the discounted price from ``x``.

    With ``a = |log(level/x)|`` and ``m`` the log drift signed toward the
    level, ``tau`` has density ``a / (s sqrt(2 pi t^3)) exp(-(a - m t)^2 / (2 s^2 t))``.
    """
    rt = r - gamma
    drift = r - gamma - delta - sigma**2 / 2
    a = math.log(level / x)
    m = drift if a > 0 else -drift
    a = abs(a)

    def integrand(t):
        if t <= 0:
            return 0.0
        expo = -rt * t - (a - m * t) ** 2 / (2 * sigma**2 * t)
        return a / (sigma * math.sqrt(2 * math.pi * t**3)) * math.exp(expo)

    if math.isinf(horizon):
        # analytic transform when the integral runs to infinity
        l1, l2 = exponents(r, sigma, delta, gamma)
        return float((x / level) ** (l1 if x < level else l2))
    # peak of the density sits near a / |m|; split there for quad
    pts = sorted({p for p in (a / max(abs(m), 1e-9), 1.0, 10.0) if 0 < p < horizon})
    total = 0.0
    edges = [0.0, *pts, horizon]
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = quad(integrand, lo, hi, limit=400, epsabs=1e-14, epsrel=1e-12)
        total += val
    return total
