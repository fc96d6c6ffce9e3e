import math

import numpy as np
import pytest

from recquant import MertonModel, PutSpec, merton_scheme
from recquant.jumps import lognormal_jumps
from recquant.mc import PathBatch, exact_step_means, mc_put, simulate_paths, simulate_terminal
from recquant.schemes import Affine, SchemeSpec

GBM = SchemeSpec("euler", Affine(0.0, 0.05), Affine(0.0, 0.2), 100.0, 1.0, 20)


def test_deterministic_model():
    spec = SchemeSpec("euler", Affine(1.0, 0.0), Affine(0.0, 0.0), 2.0, 1.0, 4)
    x = simulate_paths(spec, 1000, 7)
    assert np.all(x == x[0])
    assert x[0] == pytest.approx(3.0, rel=1e-15)


def test_mean_against_exact_recursion():
    batch = simulate_terminal(GBM, 200_000, seed=11)
    m, se = batch.mean()
    ref = exact_step_means(GBM)
    assert ref == pytest.approx(100 * 1.0025 ** 20, rel=1e-14)
    assert abs(m - ref) < 4 * se


def test_seed_determinism():
    a = simulate_terminal(GBM, 5000, 3).terminal
    b = simulate_terminal(GBM, 5000, 3).terminal
    c = simulate_terminal(GBM, 5000, 4).terminal
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_paths_are_stable_under_count_change():
    # path j's draws depend only on (seed, j), also across block boundaries
    small = simulate_paths(GBM, 70_000, 5)
    large = simulate_paths(GBM, 140_000, 5)
    assert np.array_equal(small, large[:70_000])


def test_jump_paths_are_stable_under_count_change():
    spec = SchemeSpec("jump_euler", Affine(0.0, 0.08), Affine(0.0, 0.07), 100.0, 0.5, 10,
                      jump_coef=Affine(0.0, 1.0), intensity=5.0, jump_law=lognormal_jumps(0.04))
    small = simulate_paths(spec, 1000, 9)
    large = simulate_paths(spec, 3000, 9)
    assert np.array_equal(small, large[:1000])


def test_recorded_history_matches_terminal():
    x, hist = simulate_paths(GBM, 300, 2, record=True)
    assert hist.shape == (21, 300)
    assert np.array_equal(hist[-1], x)
    assert np.all(hist[0] == 100.0)


def test_mc_put_constant_batch():
    batch = PathBatch(np.full(10, 90.0), 0, "euler", 1)
    price, se = mc_put(batch, PutSpec(100.0, 0.08, 0.5, 100.0))
    assert price == pytest.approx(math.exp(-0.04) * 10.0, rel=1e-15)
    assert se == 0.0


def test_standard_error_scaling():
    put = PutSpec(100.0, 0.08, 0.5, 100.0)
    spec = merton_scheme(MertonModel(0.07, 1.0, 0.01), put, 50)
    _, se_small = mc_put(simulate_terminal(spec, 10_000, 1), put)
    _, se_large = mc_put(simulate_terminal(spec, 1_000_000, 1), put)
    assert se_small / se_large == pytest.approx(10.0, rel=0.2)


def test_variance_standard_error():
    batch = simulate_terminal(GBM, 100_000, 8)
    v, se = batch.variance()
    assert v == pytest.approx(float(np.var(batch.terminal, ddof=1)))
    assert 0 < se < v


def test_invalid_path_count():
    with pytest.raises(ValueError):
        simulate_paths(GBM, 0, 1)
