import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from stockloan import (
    DomainError,
    LoanTerms,
    MarketParams,
    RegimeViolation,
    Shape,
    boundary_b,
    build,
    derivative,
    exponents,
    value,
    value_process,
)
from stockloan.closedform import payoff, second_derivative

from conftest import EX_MARKET, ex_terms, random_parameter_sets

# 40-digit values from tests/oracles.py, frozen
LAMBDA1 = 3.0916390725451254
LAMBDA2 = 0.57502759412154178
B = 147.80939566132655
F1_100 = 14.284195724493363
F1_60 = 2.9442828537896294
F2_60 = 2.3461398653674705
VP_5_150 = 24.061951750347329


def test_frozen_values_match_oracle():
    l1, l2 = oracles.exponents(0.05, 0.15, 0.01, 0.07)
    assert float(l1) == pytest.approx(LAMBDA1, rel=1e-15)
    assert float(l2) == pytest.approx(LAMBDA2, rel=1e-15)
    assert float(oracles.value(60, 0.05, 0.15, 0.01, 0.07, 100, 120)) == pytest.approx(F2_60, rel=1e-15)


def test_example_exponents_and_boundary(example1):
    vf = build(*example1)
    assert vf.exponents.lambda1 == pytest.approx(LAMBDA1, rel=1e-13)
    assert vf.exponents.lambda2 == pytest.approx(LAMBDA2, rel=1e-13)
    assert vf.b == pytest.approx(B, rel=1e-13)
    assert vf.shape is Shape.CAP_ABOVE_B


@pytest.mark.parametrize("cap, x, expected", [(240, 100, F1_100), (240, 60, F1_60), (120, 60, F2_60)])
def test_example_values(cap, x, expected):
    vf = build(EX_MARKET, ex_terms(cap))
    assert value(vf, x) == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("cap", [240.0, 120.0, None])
def test_value_matches_oracle_on_grid(cap):
    vf = build(EX_MARKET, ex_terms(cap))
    xs = np.geomspace(1, 1000, 57)
    got = value(vf, xs)
    want = np.array([float(oracles.value(x, 0.05, 0.15, 0.01, 0.07, 100, cap)) for x in xs])
    np.testing.assert_allclose(got, want, rtol=1e-12)


def test_shapes():
    assert build(EX_MARKET, ex_terms(120)).shape is Shape.CAP_BELOW_B
    assert build(EX_MARKET, ex_terms(None)).shape is Shape.UNCAPPED


def test_zero_dividend_regime_exact_roots():
    m = MarketParams(r=0.03, sigma=0.2, delta=0.0)
    e = exponents(m, LoanTerms(q=1, gamma=0.09))
    assert e.lambda2 == 1.0
    assert e.lambda1 == pytest.approx(2 * 0.06 / 0.04, rel=1e-14)


def test_boundary_needs_lambda1_above_one():
    e = exponents(EX_MARKET, ex_terms())
    with pytest.raises(RegimeViolation):
        boundary_b(type(e)(mu=e.mu, lambda1=1.0, lambda2=e.lambda2, regime=e.regime), 100)


def test_build_rejects_inadmissible_rates():
    with pytest.raises(RegimeViolation):
        build(EX_MARKET, LoanTerms(q=100, gamma=0.03))


def test_value_at_zero_and_scalar_type(example1):
    vf = build(*example1)
    assert value(vf, 0.0) == 0.0
    assert isinstance(value(vf, 100.0), float)
    assert value(vf, [0.0, 100.0]).shape == (2,)


def test_derivative_domain(example2):
    vf = build(*example2)
    with pytest.raises(DomainError):
        derivative(vf, 120.0)
    with pytest.raises(DomainError):
        derivative(vf, 0.0)
    left, right = derivative(vf, 120.0, side="left"), derivative(vf, 120.0, side="right")
    assert left == pytest.approx(0.51527317875752082, rel=1e-12)
    assert right == pytest.approx(0.095837932353590286, rel=1e-12)
    assert left > right  # convex kink is not smooth at the cap


def test_value_process(example1):
    vf = build(*example1)
    assert value_process(vf, 5.0, 150.0) == pytest.approx(VP_5_150, rel=1e-13)
    assert value_process(vf, 0.0, 123.0) == pytest.approx(value(vf, 123.0), rel=1e-15)


def test_to_dict_is_json(example1):
    d = json.loads(json.dumps(build(*example1).to_dict()))
    assert set(d) == {"regime", "mu", "lambda1", "lambda2", "b", "shape", "q", "cap"}
    assert d["shape"] == "CapAboveB"


def _ode_residual(vf, market, x):
    rt = market.r - vf.gamma
    h = value(vf, x)
    h1 = derivative(vf, x)
    h2 = second_derivative(vf, x)
    terms = np.abs([0.5 * market.sigma**2 * x**2 * h2, (rt - market.delta) * x * h1, rt * h])
    resid = 0.5 * market.sigma**2 * x**2 * h2 + (rt - market.delta) * x * h1 - rt * h
    return np.abs(resid) / np.maximum(terms.max(axis=0), 1e-300)


@pytest.mark.parametrize("k", range(12))
def test_invariants_random_parameters(k):
    market, gamma, q, ratio = random_parameter_sets(12, seed=7)[k]
    b = boundary_b(exponents(market, LoanTerms(q=q, gamma=gamma)), q)
    cap = max(ratio * b, 1.05 * q)
    vf = build(market, LoanTerms(q=q, gamma=gamma, cap=cap))
    xs = np.linspace(0, 4 * cap, 4001)[1:]
    f = value(vf, xs)
    assert np.all(f >= payoff(xs, q, cap) - 1e-12 * cap)
    assert np.all(f <= xs * (1 + 1e-12))
    below = xs <= cap
    assert np.all(f[below] <= np.minimum(xs, cap)[below] + 1e-12 * cap)
    assert np.all(np.diff(f) >= -1e-12 * cap)
    cont = xs[(xs < min(vf.b, cap)) | (xs > cap)]
    assert np.max(_ode_residual(vf, market, cont)) < 1e-9


@settings(max_examples=60, deadline=None)
@given(
    r=st.floats(0.01, 0.1),
    sigma=st.floats(0.08, 0.5),
    delta=st.floats(0.002, 0.08),
    spread=st.floats(0.005, 0.1),
    cap_ratio=st.floats(1.01, 5.0),
)
def test_cap_reduces_value(r, sigma, delta, spread, cap_ratio):
    market = MarketParams(r=r, sigma=sigma, delta=delta)
    q = 100.0
    lo = build(market, LoanTerms(q=q, gamma=r + spread, cap=q * cap_ratio))
    hi = build(market, LoanTerms(q=q, gamma=r + spread, cap=q * cap_ratio * 1.5))
    free = build(market, LoanTerms(q=q, gamma=r + spread))
    xs = np.geomspace(1, 20 * q * cap_ratio, 300)
    assert np.all(value(lo, xs) <= value(hi, xs) * (1 + 1e-12))
    assert np.all(value(hi, xs) <= value(free, xs) * (1 + 1e-12))


def test_value_above_cap_can_exceed_cap():
    # negative effective rate: waiting for the price to fall back to L pays
    # more than L; the defensible upper bound far above the cap is x
    market = MarketParams(r=0.03, sigma=0.2, delta=0.0)
    vf = build(market, LoanTerms(q=100, gamma=0.09, cap=300))
    x = 1200.0
    want = float(oracles.value(x, 0.03, 0.2, 0.0, 0.09, 100, 300))
    assert value(vf, x) == pytest.approx(want, rel=1e-12)
    assert 300 < value(vf, x) <= x


def test_exercise_region_is_between_b_and_cap(example1):
    vf = build(*example1)
    xs = np.linspace(1, 500, 5000)
    touching = np.isclose(value(vf, xs), payoff(xs, 100, 240), rtol=0, atol=1e-10) & (xs > 100)
    assert xs[touching].min() >= vf.b - 1e-9
    assert xs[touching].max() <= 240


def test_payoff_capped():
    np.testing.assert_allclose(payoff([50, 150, 300], 100, 240), [0, 50, 140])
    np.testing.assert_allclose(payoff([50, 150, 300], 100, None), [0, 50, 200])


@pytest.mark.parametrize("k", range(8))
def test_slope_vanishes_at_zero(k):
    # f'(x) ~ C x^(l1 - 1): tends to 0, but slowly when l1 is close to 1
    market, gamma, q, _ = random_parameter_sets(8, seed=3)[k]
    vf = build(market, LoanTerms(q=q, gamma=gamma, cap=None))
    lam = vf.exponents.lambda1
    xs = q * np.array([1e-3, 1e-6, 1e-9])
    d = derivative(vf, xs)
    assert np.all(np.diff(d) < 0)
    rate = np.log(d[0] / d[1]) / np.log(1e3)
    assert rate == pytest.approx(lam - 1, rel=1e-9)


@pytest.mark.parametrize("cap", [240.0, 120.0])
def test_strict_dominance_in_continuation_region(cap):
    vf = build(EX_MARKET, ex_terms(cap))
    xs = np.linspace(1e-3, min(vf.b, cap) * (1 - 1e-6), 5000)
    assert np.all(value(vf, xs) > payoff(xs, 100, cap))


def test_increasing_caps_converge_to_uncapped():
    free = build(EX_MARKET, ex_terms(None))
    xs = np.geomspace(10, 2000, 100)
    caps = (300, 600, 1200, 1e4)
    gaps = [np.max(np.abs(value(build(EX_MARKET, ex_terms(L)), xs) - value(free, xs))) for L in caps]
    assert all(a > b for a, b in zip(gaps[:3], gaps[1:3]))
    # once the cap is above every evaluation point the curves coincide
    assert gaps[-1] == 0.0
