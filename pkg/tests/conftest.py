import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stockloan import LoanTerms, MarketParams  # noqa: E402

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

EX_MARKET = MarketParams(r=0.05, sigma=0.15, delta=0.01)
EX_GAMMA = 0.07
EX_Q = 100.0


def ex_terms(cap=240.0, s0=150.0, c=0.0):
    return LoanTerms(q=EX_Q, gamma=EX_GAMMA, c=c, cap=cap, s0=s0)


def random_parameter_sets(n, seed=20240601):
    """Draw admissible (market, gamma, q) triples across both regimes.

    Rates 1-8%, volatility 10-40%, dividend yield 0 (30% of draws) or
    0.5-6%, and a loan rate 0.5-8% above the regime's lower edge.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        r = rng.uniform(0.01, 0.08)
        sigma = rng.uniform(0.10, 0.40)
        delta = 0.0 if rng.random() < 0.3 else rng.uniform(0.005, 0.06)
        edge = r + (sigma**2 / 2 if delta == 0 else 0.0)
        gamma = edge + rng.uniform(0.005, 0.08)
        q = rng.uniform(20, 500)
        out.append((MarketParams(r=r, sigma=sigma, delta=delta), gamma, q, rng.uniform(0.5, 3.0)))
    return out


@pytest.fixture
def market():
    return EX_MARKET


@pytest.fixture
def example1():
    return EX_MARKET, ex_terms(240.0)


@pytest.fixture
def example2():
    return EX_MARKET, ex_terms(120.0)


@pytest.fixture
def uncapped():
    return EX_MARKET, ex_terms(None)


@pytest.fixture
def configs():
    return CONFIGS


# acceptance bookkeeping: criterion number -> list of (label, ok, detail)
ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


@pytest.fixture
def record():
    def _record(criterion, label, ok, detail=""):
        ACCEPTANCE.setdefault(criterion, []).append((label, bool(ok), detail))
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[n]
        ok = all(c[1] for c in checks)
        passed = sum(c[1] for c in checks)
        tr.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'} ({passed}/{len(checks)} checks)")
        for label, good, detail in checks:
            if not good or tr.config.option.verbose > 0:
                tr.write_line(f"    {'ok  ' if good else 'FAIL'} {label}: {detail}")
