import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from recquant.jumps import gaussian_jumps, lognormal_jumps
from recquant.schemes import (Affine, CoefficientInputs, SchemeSpec, jump_zeta_moment,
                              key_lemma_coeffs, scheme_lipschitz, simulate_step, step_law)


def _spec(kind, **kw):
    base = dict(kind=kind, drift=Affine(0.0, 0.08), diffusion=Affine(0.0, 0.108), x0=100.0, T=0.5, n=50)
    base.update(kw)
    return SchemeSpec(**base)


def test_euler_dirac():
    spec = SchemeSpec("euler", Affine(), Affine(), 2.0, 1.0, 4)
    law = step_law(spec, 0, 2.0)
    assert law.has_atoms and law.mean() == 2.0 and law.variance() == 0.0


def test_jump_euler_without_jumps_is_euler():
    e = step_law(_spec("euler"), 3, 101.0)
    j = step_law(_spec("jump_euler", intensity=0.0), 3, 101.0)
    assert (e.weights, e.A, e.B, e.C) == pytest.approx((j.weights, j.A, j.B, j.C))


def test_gaussian_jump_components():
    spec = _spec("jump_euler", intensity=5.0, jump_law=gaussian_jumps(0.02, 0.04), jump_coef=Affine(0.0, 1.0))
    law = step_law(spec, 0, 100.0)
    h = 0.01
    assert law.weights == pytest.approx([0.95, 0.05], abs=1e-15)
    assert law.A == pytest.approx([100 + h * 8 + 0.02 * (0 - 0.05) * 100, 100 + h * 8 + 0.02 * 0.95 * 100])
    assert law.B == pytest.approx([math.sqrt(h) * 10.8, math.sqrt(h * 10.8 ** 2 + 0.04 ** 2 * 100 ** 2)])


def test_general_jump_mixture_mean():
    spec = _spec("jump_euler", intensity=5.0, jump_law=lognormal_jumps(0.04), jump_coef=Affine(0.0, 1.0))
    law = step_law(spec, 0, 100.0)
    assert law.weights.size == 51
    # the compensator makes the one-step mean exactly x (1 + r h) up to the quantized-mean gap
    assert law.mean() == pytest.approx(100 * (1 + 0.08 * 0.01), abs=1e-8)


def test_short_mode_rejects_large_intensity():
    with pytest.raises(ValueError):
        _spec("jump_euler", intensity=200.0, jump_law=lognormal_jumps(0.04), jump_coef=Affine(0.0, 1.0))
    # truncated mode accepts it
    _spec("jump_euler", intensity=200.0, jump_law=lognormal_jumps(0.04), jump_coef=Affine(0.0, 1.0),
          jump_mode="truncated:3")


def test_milstein_law_is_exact_square_completion():
    spec = _spec("milstein")
    law = step_law(spec, 0, 100.0)
    h, s, ds = 0.01, 10.8, 0.108
    z = np.linspace(-3, 3, 7)
    direct = 100 + h * 8 + math.sqrt(h) * s * z + 0.5 * h * s * ds * (z * z - 1)
    assert law.A[0] + law.B[0] * z + law.C[0] * z * z == pytest.approx(direct, rel=1e-14)


def test_milstein_tends_to_euler():
    ys = np.linspace(95, 105, 41)
    e = step_law(_spec("euler"), 0, 100.0)
    for scale in (1e-3, 1e-5, 1e-7):
        # sigma' -> 0 while sigma stays fixed at x = 100
        sp = _spec("milstein", diffusion=Affine(10.8, 0.0), diffusion_dx=Affine(scale, 0.0))
        m = step_law(sp, 0, 100.0)
        gap = np.max(np.abs(m.cdf(ys) - e.cdf(ys)))
    assert gap < 1e-6


def test_taylor_without_quadratic_term_is_gaussian():
    spec = _spec("taylor20", diffusion=Affine(2.0, 0.0))
    law = step_law(spec, 0, 100.0)
    h = 0.01
    b, b1 = 8.0, 0.08
    Bh = b * h + 0.5 * (b * b1) * h * h
    Ch = 2.0 * math.sqrt(h) + 0.5 * (b1 * 2.0) * h ** 1.5
    assert law.is_gaussian_mixture
    assert law.mean() == pytest.approx(100 + Bh, rel=1e-15)
    assert law.variance() == pytest.approx(Ch ** 2, rel=1e-12)


@pytest.mark.parametrize("kind,extra", [
    ("euler", {}),
    ("milstein", {}),
    ("taylor20", {}),
    ("jump_euler", {"intensity": 5.0, "jump_law": lognormal_jumps(0.04), "jump_coef": Affine(0.0, 1.0)}),
    ("jump_euler", {"intensity": 5.0, "jump_law": gaussian_jumps(0.01, 0.04), "jump_coef": Affine(0.0, 1.0)}),
    ("jump_euler", {"intensity": 30.0, "jump_law": gaussian_jumps(0.01, 0.04), "jump_coef": Affine(0.0, 1.0),
                    "jump_mode": "truncated:4"}),
])
def test_simulation_matches_step_law(kind, extra):
    spec = _spec(kind, **extra)
    law = step_law(spec, 0, 100.0)
    if spec.kind == "jump_euler" and spec.jump_law.kind != "gaussian":
        # simulation uses the exact jump law; compare with the exact moments
        h, lam, g = spec.h, spec.intensity, 100.0
        mean = 100 + h * 8.0
        var = h * 10.8 ** 2 + lam * h * spec.jump_law.second_moment * g * g - (lam * h * spec.jump_law.mean * g) ** 2
    else:
        mean, var = law.mean(), law.variance()
    x = simulate_step(spec, 0, np.full(1_000_000, 100.0), np.random.default_rng(11))
    se_m = math.sqrt(var / x.size)
    c = x - x.mean()
    se_v = math.sqrt(max(np.mean(c ** 4) - x.var() ** 2, 0) / x.size)
    assert abs(x.mean() - mean) < 4 * se_m
    assert abs(x.var(ddof=1) - var) < 4 * se_v


def test_simulate_deterministic():
    spec = SchemeSpec("euler", Affine(), Affine(), 2.0, 1.0, 4)
    assert simulate_step(spec, 0, [2.0], np.random.default_rng(0)).tolist() == [2.0]


def test_key_lemma_examples():
    kappa, K, a, b = key_lemma_coeffs(CoefficientInputs(0.0, 1.0, 1.0, 3.0), 0.1)
    assert kappa == 1.0
    assert key_lemma_coeffs(CoefficientInputs(1.0, 1.0, 1.0, 3.0), 0.1)[0] == 7.0
    kappa, K, a, b = key_lemma_coeffs(CoefficientInputs(0.0, 0.0, 2.0, 2.5), 0.2)
    assert K == 0.0 and a == 0.0
    assert b == pytest.approx(1 + kappa * math.exp(kappa * 0.2) * 0.2)
    with pytest.raises(ValueError):
        CoefficientInputs(0.0, 0.0, 1.0, 2.0)


@given(st.floats(0.01, 3), st.floats(0.01, 3), st.floats(0.1, 5), st.floats(2.01, 3))
def test_key_lemma_limits(L, U, z, p):
    inputs = CoefficientInputs(L, U, z, p)
    _, _, a, b = key_lemma_coeffs(inputs, 0.01)
    assert b > 1 and a > 0
    _, _, a0, b0 = key_lemma_coeffs(inputs, 1e-12)
    assert a0 < 1e-6 and b0 - 1 < 1e-6


def test_zeta_moment():
    assert jump_zeta_moment(3.0, 0.0) == pytest.approx(2 ** 0.5 * 2 * math.sqrt(2 / math.pi))


def test_lipschitz_examples():
    spec = SchemeSpec("euler", Affine(), Affine(), 0.0, 1.0, 10)
    assert scheme_lipschitz(spec, {"b": 0, "sigma": 0}) == pytest.approx(np.ones(10))
    assert scheme_lipschitz(spec, {"b": 1, "sigma": 0}) == pytest.approx(np.full(10, 1.1))
    spec = SchemeSpec("euler", Affine(), Affine(), 0.0, 1.0, 25)
    assert scheme_lipschitz(spec, {"b": 0, "sigma": 1})[0] == pytest.approx(math.sqrt(1.04))
    with pytest.raises(ValueError):
        scheme_lipschitz(spec, {"b": 1})
    js = _spec("jump_euler", intensity=5.0, jump_law=lognormal_jumps(0.04), jump_coef=Affine(0.0, 1.0))
    got = scheme_lipschitz(js, {"b": 0.08, "sigma": 0.108, "gamma": 1.0})[0]
    eu2 = lognormal_jumps(0.04).second_moment
    assert got == pytest.approx(math.sqrt((1 + 0.01 * 0.08) ** 2 + 0.01 * (0.108 ** 2 + 5 * eu2)))
    ms = _spec("milstein")
    got = scheme_lipschitz(ms, {"b": 0.08, "sigma": 0.108, "sigma_sigma_prime": 0.108 ** 2})[0]
    assert got == pytest.approx(math.sqrt((1.0008) ** 2 + 0.01 * 0.108 ** 2 + 0.5e-4 * 0.108 ** 4))


def test_spec_validation():
    with pytest.raises(ValueError):
        SchemeSpec("heun", Affine(), Affine(), 0.0, 1.0, 1)
    with pytest.raises(ValueError):
        SchemeSpec("euler", Affine(), Affine(), 0.0, 0.0, 1)
    with pytest.raises(ValueError):
        SchemeSpec("milstein", lambda t, x: x, lambda t, x: x, 0.0, 1.0, 1)
    with pytest.raises(ValueError):
        step_law(_spec("euler"), 50, 100.0)
