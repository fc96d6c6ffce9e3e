import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from recquant.special import (consecutive_interval_moments, gaussian_partial_first_moment,
                              normal_tail_moments, shifted_chi2_cdf,
                              shifted_chi2_partial_first_moment, std_normal_cdf, std_normal_pdf)

mpmath.mp.dps = 40


def test_cdf_matches_mpmath_on_10k_points():
    xs = np.linspace(-40.0, 40.0, 10_000)
    worst_abs = worst_rel = 0.0
    for x in xs:
        ref = mpmath.ncdf(mpmath.mpf(float(x)))
        got = std_normal_cdf(float(x))
        worst_abs = max(worst_abs, float(abs(got - ref)))
        if x < 0 and ref > 1e-300:  # below that the double result is subnormal
            worst_rel = max(worst_rel, float(abs(got - ref) / ref))
    assert worst_abs <= 1e-12
    # the lower tail also keeps relative accuracy
    assert worst_rel <= 1e-12


def test_cdf_symmetry_and_monotone():
    xs = np.linspace(-10, 10, 1000)
    vals = np.array([std_normal_cdf(x) for x in xs])
    mirrored = np.array([std_normal_cdf(-x) for x in xs])
    assert np.max(np.abs(vals + mirrored - 1.0)) <= 1e-12
    assert np.all(np.diff(vals) >= 0)


def test_pdf_and_known_values():
    assert std_normal_cdf(0.0) == 0.5
    assert std_normal_cdf(1.0) == pytest.approx(0.8413447460685429, abs=1e-15)
    assert std_normal_pdf(0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_non_finite_rejected(bad):
    with pytest.raises(ValueError):
        std_normal_cdf(bad)
    with pytest.raises(ValueError):
        std_normal_pdf(bad)


@pytest.mark.parametrize("t", [-9.0, -2.5, -0.3, 0.0, 0.7, 4.0, 11.0])
def test_tail_moments_match_quadrature(t):
    lower, upper = normal_tail_moments(np.array(t), 4)
    for k in range(5):
        f = lambda z: z ** k * mpmath.npdf(z)
        lo = mpmath.quad(f, [-mpmath.inf, t])
        hi = mpmath.quad(f, [t, mpmath.inf])
        assert float(lower[k]) == pytest.approx(float(lo), rel=1e-11, abs=1e-300)
        assert float(upper[k]) == pytest.approx(float(hi), rel=1e-11, abs=1e-300)


def test_consecutive_moments_telescope():
    t = np.array([-np.inf, -3.0, -0.5, 0.0, 0.2, 5.0, np.inf])
    J0, J1, J2 = consecutive_interval_moments(t)
    assert math.fsum(J0) == pytest.approx(1.0, abs=1e-15)
    assert math.fsum(J1) == pytest.approx(0.0, abs=1e-15)
    assert math.fsum(J2) == pytest.approx(1.0, abs=1e-15)
    # far-right cell keeps relative accuracy
    J0, _, _ = consecutive_interval_moments(np.array([8.0, 9.0]))
    ref = mpmath.ncdf(-8) - mpmath.ncdf(-9)
    assert float(J0[0]) == pytest.approx(float(ref), rel=1e-12)


@given(st.floats(-5, 5), st.floats(0.01, 5), st.floats(-10, 10), st.floats(0, 10))
def test_partial_first_moment_quadrature(mean, std, a, width):
    b = a + width
    # split at the mean and a few stds around it so narrow peaks are not missed
    pts = sorted({a, b} | {min(max(mean + k * std, a), b) for k in (-8, -1, 0, 1, 8)})
    ref = mpmath.quad(lambda y: y * mpmath.npdf(y, mean, std), pts)
    got = gaussian_partial_first_moment(mean, std, a, b)
    assert got == pytest.approx(float(ref), abs=1e-12)


@given(st.floats(-5, 5), st.floats(0.01, 5), st.floats(-10, 10), st.floats(0, 5), st.floats(0, 5))
def test_partial_first_moment_additive(mean, std, a, w1, w2):
    b, c = a + w1, a + w1 + w2
    lhs = gaussian_partial_first_moment(mean, std, a, b) + gaussian_partial_first_moment(mean, std, b, c)
    assert lhs == pytest.approx(gaussian_partial_first_moment(mean, std, a, c), abs=1e-12)


def test_partial_first_moment_edges():
    assert gaussian_partial_first_moment(0.0, 1.0, -math.inf, 0.0) == pytest.approx(-1 / math.sqrt(2 * math.pi))
    assert gaussian_partial_first_moment(2.0, 3.0, -math.inf, math.inf) == pytest.approx(2.0, abs=1e-15)
    assert gaussian_partial_first_moment(1.5, 0.0, 1.0, 2.0) == 1.5
    assert gaussian_partial_first_moment(1.5, 0.0, 1.5, 2.0) == 0.0
    with pytest.raises(ValueError):
        gaussian_partial_first_moment(0.0, 1.0, 1.0, 0.0)


@given(st.floats(-4, 4), st.floats(0.0, 30.0))
def test_shifted_chi2_against_noncentral(c, y):
    ref = stats.ncx2(df=1, nc=c * c).cdf(y) if c != 0 else stats.chi2(1).cdf(y)
    assert shifted_chi2_cdf(c, y) == pytest.approx(ref, abs=1e-10)


@pytest.mark.parametrize("c,y", [(0.0, 1.0), (1.3, 2.0), (-0.4, 7.5), (2.0, 0.1)])
def test_shifted_chi2_partial_moment_quadrature(c, y):
    r = math.sqrt(y)
    ref = mpmath.quad(lambda z: (z + c) ** 2 * mpmath.npdf(z), [-r - c, r - c])
    assert shifted_chi2_partial_first_moment(c, y) == pytest.approx(float(ref), rel=1e-12)


def test_shifted_chi2_limits():
    assert shifted_chi2_cdf(0.3, 0.0) == 0.0
    assert shifted_chi2_cdf(0.3, math.inf) == 1.0
    assert shifted_chi2_partial_first_moment(0.5, math.inf) == 1.25
    assert shifted_chi2_cdf(0.0, 1.0) == pytest.approx(0.6826894921370859, abs=1e-14)
    with pytest.raises(ValueError):
        shifted_chi2_cdf(math.nan, 1.0)
