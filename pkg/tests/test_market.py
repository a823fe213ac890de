import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from greeklab.errors import DomainError, NormalizationError
from greeklab.market import (GbmModel, KnockInBasket, PricingProblem, VanillaCall, analytic_gradient,
                             basket_problem, bs_greeks, bs_price, market_points, normalized_gradient,
                             normalized_price, normalized_prices, vanilla_problem)


def test_bs_price_reference_value():
    # textbook value: S=100, K=100, r=5%, sigma=20%, T=1
    assert bs_price(100.0, 100.0, 0.05, 0.2, 1.0) == pytest.approx(10.450583572185565, abs=1e-10)


def test_deep_in_the_money_is_forward():
    c = bs_price(200.0, 100.0, 0.03, 0.2, 0.5)
    assert c == pytest.approx(200 - 100 * np.exp(-0.015), abs=1e-4)


@pytest.mark.parametrize("greek,idx", [("delta", 0), ("rho", 2), ("vega", 3), ("theta", 4)])
def test_analytic_greeks_match_central_differences(greek, idx):
    x = np.array([99.5, 100.0, 0.01, 0.2, 0.1])
    h = 1e-5 * max(1.0, x[idx])
    up, dn = x.copy(), x.copy()
    up[idx] += h
    dn[idx] -= h
    fd = (bs_price(*up) - bs_price(*dn)) / (2 * h)
    assert bs_greeks(*x)[greek] == pytest.approx(fd, abs=1e-5)


@given(S=st.floats(50, 150), sigma=st.floats(0.05, 0.8), T=st.floats(0.05, 3.0), r=st.floats(-0.02, 0.1))
@settings(max_examples=60, deadline=None)
def test_price_bounds(S, sigma, T, r):
    c = bs_price(S, 100.0, r, sigma, T)
    assert max(S - 100 * np.exp(-r * T), 0) - 1e-9 <= c <= S + 1e-9


def test_bs_domain_errors():
    with pytest.raises(DomainError):
        bs_price(100.0, 100.0, 0.01, 0.0, 1.0)
    with pytest.raises(DomainError):
        bs_price(100.0, 100.0, 0.01, 0.2, -1.0)


@pytest.mark.parametrize("kw", [
    dict(spots=(1.0, 2.0), vols=(0.2,)),
    dict(spots=(-1.0,), vols=(0.2,)),
    dict(spots=(1.0,), vols=(-0.1,)),
    dict(spots=(1.0,), vols=(0.1,), maturity=-1.0),
    dict(spots=(1.0,), vols=(0.1,), observation_times=(0.5, 0.4)),
    dict(spots=(1.0,), vols=(0.1,), observation_times=(0.5, 2.0)),
])
def test_model_validation(kw):
    args = dict(rate=0.01, maturity=1.0)
    args.update(kw)
    with pytest.raises(DomainError):
        GbmModel(**args)


def test_payoff_validation():
    with pytest.raises(DomainError):
        VanillaCall(0.0)
    with pytest.raises(DomainError):
        KnockInBasket(1.0, 2.5, (0.5, -0.1, 0.6))
    with pytest.raises(DomainError):
        PricingProblem(GbmModel((1.0, 1.0), (0.1, 0.1), 0.0, 1.0), KnockInBasket(1.0, 2.0, (1.0,)),
                       ("spot_1",))


@pytest.mark.parametrize("axis", ["spot_4", "volatility", "rho"])
def test_bad_axes(axis):
    with pytest.raises(DomainError):
        PricingProblem(GbmModel((1.0, 1.0, 1.0), (0.1,) * 3, 0.0, 1.0), KnockInBasket(1.0, 2.0, (1, 1, 1)),
                       (axis,))


def test_market_points_apply_scaled_offsets():
    p = vanilla_problem()
    pts = market_points(p, [[0.1, 0.02, -0.5, 0.4]])
    assert pts.spots[0, 0] == pytest.approx(99.5 + 1.0)
    assert pts.rate[0] == pytest.approx(0.01 + 0.01)
    assert pts.vols[0, 0] == pytest.approx(0.2 - 0.05)
    assert pts.maturity[0] == pytest.approx(0.1 + 0.02)
    with pytest.raises(DomainError):
        market_points(p, [[0, 0, 0, -3.0]])


def test_vanilla_normalization_and_gradient_units():
    p = vanilla_problem()
    f = normalized_price(p)
    assert f == pytest.approx(bs_price(99.5, 100, 0.01, 0.2, 0.1) / 20)
    g = normalized_gradient(p, analytic_gradient(p))
    np.testing.assert_allclose(g, [0.2437, 0.1154, 0.0627, 0.0325], atol=5e-4)
    # normalized gradient times to_physical gives back the price sensitivity
    np.testing.assert_allclose(g * p.to_physical, analytic_gradient(p), rtol=1e-12)


def test_normalization_violation():
    p = vanilla_problem(payoff_cap=1.0)
    with pytest.raises(NormalizationError):
        normalized_price(p)


def test_zero_vol_model_is_deterministic():
    m = GbmModel((1.0,), (0.0,), 0.05, 1.0)
    p = PricingProblem(m, KnockInBasket(0.5, 0.1, (1.0,)), ("spot_1",), payoff_cap=2.0, mc_paths=1000)
    # forward is e^{rT}, discounted payoff (e^{rT} - K) e^{-rT}
    assert normalized_prices(p, [[0.0]])[0] == pytest.approx((1 - 0.5 * np.exp(-0.05)) / 2, rel=1e-12)


def test_basket_preset_is_normalized():
    p = basket_problem(mc_paths=20_000)
    assert p.k == 4 and p.payoff_cap == pytest.approx(4.11, abs=0.05)
    f = normalized_price(p)
    # V is about 0.33 against a cap of about 4.1
    assert 0.07 < f < 0.09
    raw = basket_problem(raw=True)
    np.testing.assert_allclose(raw.to_physical, 1.0)
