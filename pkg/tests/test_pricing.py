import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from recquant import (MertonModel, PutSpec, bs_put, merton_put_closed_form, merton_scheme,
                      quantized_put, recursive_quantize)
from recquant.engine import QuantizedChain
from recquant.pricing import bs_call, equivalent_bs_vol, quantized_expectation
from recquant.quantizer import Grid
from recquant.schemes import Affine, SchemeSpec

BASE = PutSpec(100.0, 0.08, 0.5, 100.0)


def _lognormal_put(x, sigma, r, tau, K):
    """Put by direct integration against the terminal lognormal density."""
    m = math.log(x) + (r - 0.5 * sigma ** 2) * tau
    s = sigma * math.sqrt(tau)
    dens = stats.lognorm(s=s, scale=math.exp(m)).pdf
    val, _ = integrate.quad(lambda y: (K - y) * dens(y), 0.0, K, epsabs=1e-13, epsrel=1e-12, limit=200)
    return math.exp(-r * tau) * val


def test_bs_put_examples():
    assert bs_put(100, 0.1, 0.0, 0.5, 1.0) < 1e-12
    price, flag = bs_put(100, 0.0, 0.0, 0.5, 110.0, return_flag=True)
    assert price == 10.0 and flag
    assert bs_put(100, 0.0707107, 0.08, 0.5, 100.0) == pytest.approx(0.589, abs=5e-4)


@settings(max_examples=100)
@given(x=st.floats(50, 150), sigma=st.floats(0.02, 0.8), r=st.floats(-0.02, 0.1),
       tau=st.floats(0.05, 2.0), K=st.floats(50, 150))
def test_put_call_parity(x, sigma, r, tau, K):
    lhs = bs_call(x, sigma, r, tau, K) - bs_put(x, sigma, r, tau, K)
    assert lhs == pytest.approx(x - K * math.exp(-r * tau), abs=1e-10)


@pytest.mark.parametrize("x,sigma,r,tau,K", [(100, 0.2, 0.05, 1.0, 100), (90, 0.07, 0.08, 0.5, 96),
                                             (120, 0.4, 0.0, 2.0, 100)])
def test_bs_put_against_integration(x, sigma, r, tau, K):
    assert bs_put(x, sigma, r, tau, K) == pytest.approx(_lognormal_put(x, sigma, r, tau, K), abs=1e-9)


def test_equivalent_vol():
    assert equivalent_bs_vol(0.07, 5, 0.04) == pytest.approx(0.1135782, abs=1e-7)
    assert equivalent_bs_vol(0.07, 1, 0.01) == pytest.approx(0.0707107, abs=1e-7)
    assert equivalent_bs_vol(0.3, 0, 0.7) == 0.3
    with pytest.raises(ValueError):
        equivalent_bs_vol(-0.1, 1, 0.1)


def test_closed_form_without_jumps_is_black_scholes():
    assert merton_put_closed_form(MertonModel(0.07, 0.0, 0.04), BASE) == bs_put(100, 0.07, 0.08, 0.5, 100)


@pytest.mark.parametrize("lam,theta,K", [(1.0, 0.01, 100.0), (5.0, 0.04, 90.0), (3.0, 0.04, 96.0)])
def test_closed_form_against_conditioning_on_jump_count(lam, theta, K):
    """Independent oracle: condition on the Poisson count and integrate the lognormal law."""
    model = MertonModel(0.07, lam, theta)
    put = PutSpec(K, 0.08, 0.5, 100.0)
    T = put.maturity
    eu = math.expm1(0.5 * theta ** 2)
    total = 0.0
    for k in range(40):
        w = stats.poisson.pmf(k, lam * T)
        # log X_T = log x0 + (r - lam EU - sigma^2/2) T + sigma W_T + sum of k N(0, theta^2)
        m = math.log(100.0) + (0.08 - lam * eu - 0.5 * 0.07 ** 2) * T
        s = math.sqrt(0.07 ** 2 * T + k * theta ** 2)
        dens = stats.lognorm(s=s, scale=math.exp(m)).pdf
        v, _ = integrate.quad(lambda y: (K - y) * dens(y), 0.0, K, epsabs=1e-13, limit=200)
        total += w * v
    assert merton_put_closed_form(model, put) == pytest.approx(math.exp(-0.08 * T) * total, abs=1e-9)


def test_closed_form_reference_values():
    assert merton_put_closed_form(MertonModel(0.07, 1, 0.01), BASE) == pytest.approx(0.5886, abs=5e-4)
    put90 = PutSpec(90.0, 0.08, 0.5, 100.0)
    # the published figures carry one extra discount factor
    assert merton_put_closed_form(MertonModel(0.07, 1, 0.01), BASE, outer_discount=True) == \
        pytest.approx(0.566, abs=1e-3)
    assert merton_put_closed_form(MertonModel(0.07, 5, 0.04), put90, outer_discount=True) == \
        pytest.approx(0.120, abs=1e-3)


def test_closed_form_monotonicity():
    model = MertonModel(0.07, 3, 0.04)
    spots = np.linspace(85, 115, 13)
    strikes = np.linspace(85, 115, 13)
    by_spot = [merton_put_closed_form(model, PutSpec(100, 0.08, 0.5, s)) for s in spots]
    by_strike = [merton_put_closed_form(model, PutSpec(K, 0.08, 0.5, 100)) for K in strikes]
    assert np.all(np.diff(by_spot) <= 0)
    assert np.all(np.diff(by_strike) >= 0)


def test_series_tail_tolerance():
    model = MertonModel(0.07, 5, 0.04)
    a = merton_put_closed_form(model, BASE, tail_tol=1e-14)
    b = merton_put_closed_form(model, BASE, tail_tol=1e-28)
    assert abs(a - b) < 1e-12


def _single_point_chain(x):
    g = Grid(np.array([x]))
    return QuantizedChain([g, g], [np.array([1.0]), np.array([1.0])], [np.ones((1, 1))], [])


def test_quantized_put_trivial_chains():
    put = PutSpec(100.0, 0.08, 0.5, 100.0)
    assert quantized_put(_single_point_chain(95.0), put) == pytest.approx(math.exp(-0.04) * 5.0, rel=1e-15)
    assert quantized_put(_single_point_chain(105.0), put) == 0.0
    assert quantized_expectation(_single_point_chain(3.0), lambda x: np.ones_like(x), 0.7) == 0.7


def test_quantized_expectation_consistency():
    spec = SchemeSpec("euler", Affine(0.0, 0.0), Affine(0.0, 0.2), 100.0, 1.0, 10)
    chain = recursive_quantize(spec, 40)
    assert quantized_expectation(chain, lambda x: x, 0.9) == pytest.approx(90.0, rel=1e-9)
    assert quantized_expectation(chain, lambda x: np.ones_like(x)) == pytest.approx(1.0, abs=1e-12)
    put = PutSpec(95.0, 0.0, 1.0, 100.0)
    assert quantized_expectation(chain, lambda x: np.maximum(95.0 - x, 0.0)) == quantized_put(chain, put)
    low = PutSpec(float(chain.terminal[0][0]) * 0.99, 0.0, 1.0, 100.0)
    assert quantized_put(chain, low) == 0.0


def test_quantized_put_converges_with_levels():
    model = MertonModel(0.07, 1.0, 0.01)
    spec = merton_scheme(model, BASE, 20, nu_level=20)
    # discretization reference: a fine-grid chain on the same scheme
    ref = quantized_put(recursive_quantize(spec, 200), BASE)
    errs = [abs(quantized_put(recursive_quantize(spec, N), BASE) - ref) for N in (25, 50, 100)]
    assert errs[0] > errs[1] > errs[2]
