import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from fatigue_eeg.mcd import MCDConfig, choose_h, consistency_factor, exact_univariate_mcd, robust_estimate


def brute_force_mcd(x, h):
    """Minimum sample variance over every h-subset, with its subset mean."""
    best = (math.inf, math.nan)
    for comb in itertools.combinations(x, h):
        c = np.array(comb)
        v = float(np.var(c, ddof=1))
        if v < best[0]:
            best = (v, float(c.mean()))
    return best


@pytest.mark.parametrize("n, alpha, h", [(100, 1.0, 100), (100, 0.5, 51), (5, 0.6, 3), (2, 0.5, 2), (7, 0.9, 7)])
def test_choose_h(n, alpha, h):
    assert choose_h(n, alpha) == h


@pytest.mark.parametrize("alpha", [0.49, 0.0, 1.01])
def test_choose_h_rejects_alpha(alpha):
    with pytest.raises(ValueError):
        choose_h(10, alpha)


def test_exact_mcd_outlier_example():
    loc, raw, start = exact_univariate_mcd([1, 2, 3, 4, 100], 3)
    assert (loc, raw, start) == (2.0, 1.0, 0)
    assert brute_force_mcd([1, 2, 3, 4, 100], 3)[0] == 1.0


def test_exact_mcd_constant_and_full():
    assert exact_univariate_mcd([4.5] * 4, 2)[:2] == (4.5, 0.0)
    x = np.array([3.0, -1.0, 8.0, 2.5, 0.25])
    loc, raw, start = exact_univariate_mcd(x, x.size)
    assert loc == pytest.approx(x.mean(), abs=1e-15)
    assert raw == pytest.approx(np.var(x, ddof=1), abs=1e-14)
    assert start == 0


@pytest.mark.parametrize("h", [1, 6])
def test_exact_mcd_h_bounds(h):
    with pytest.raises(ValueError):
        exact_univariate_mcd([1, 2, 3, 4, 5], h)


@pytest.mark.parametrize("n", [5, 8, 11])
def test_exact_mcd_matches_enumeration_any_h(n, rng):
    for _ in range(25):
        x = rng.standard_t(2, n)
        for h in range(2, n + 1):
            var, loc = brute_force_mcd(x, h)
            got_loc, got_var, _ = exact_univariate_mcd(x, h)
            assert abs(got_var - var) <= 1e-12 * max(1.0, var)
            assert abs(got_loc - loc) <= 1e-12 * max(1.0, abs(loc))


def test_consistency_factor_values():
    assert consistency_factor(1.0) == 1.0
    assert consistency_factor(0.5) == pytest.approx(7.01, abs=0.01)
    assert consistency_factor(0.75) == pytest.approx(2.713, abs=0.005)


@pytest.mark.parametrize("alpha", [0.5, 0.6, 0.75, 0.9, 0.99])
def test_consistency_factor_truncated_normal_identity(alpha):
    # independent route: inverse variance of a standard normal truncated to +-a
    a = sps.norm.ppf((1 + alpha) / 2)
    expected = 1.0 / (1.0 - 2 * a * sps.norm.pdf(a) / (2 * sps.norm.cdf(a) - 1))
    assert consistency_factor(alpha) == pytest.approx(expected, rel=1e-9)


def test_consistency_factor_monotone():
    grid = np.linspace(0.5, 1.0, 50)
    vals = [consistency_factor(float(a)) for a in grid]
    assert all(b <= a for a, b in zip(vals, vals[1:]))
    assert min(vals) == 1.0


def test_robust_estimate_gaussian_consistency():
    x = np.random.default_rng(2024).normal(3.0, 2.0, 10_000)
    est = robust_estimate(x, MCDConfig(alpha=0.5))
    assert est.location == pytest.approx(3.0, abs=0.1)
    assert est.scaled_scale == pytest.approx(4.0, abs=0.4)
    assert est.scaled_scale == est.consistency_factor * est.raw_scale
    assert est.h == 5001


def test_robust_estimate_constant():
    est = robust_estimate(np.full(50, -2.5))
    assert est.location == -2.5
    assert est.scaled_scale == 0.0


def test_robust_estimate_alpha_one_is_classical(rng):
    x = rng.normal(size=40)
    est = robust_estimate(x, MCDConfig(alpha=1.0))
    assert est.consistency_factor == 1.0
    assert est.location == pytest.approx(x.mean())
    assert est.raw_scale == pytest.approx(np.var(x, ddof=1))


def test_quantile_level_knob_changes_factor(rng):
    x = rng.normal(size=200)
    base = robust_estimate(x)
    tuned = robust_estimate(x, MCDConfig(alpha=0.5, quantile_level=0.975))
    assert tuned.raw_scale == base.raw_scale
    assert tuned.consistency_factor != base.consistency_factor


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=4, max_size=60, unique=True),
    st.floats(0.1, 50).flatmap(lambda a: st.sampled_from([a, -a])),
    st.floats(-100, 100),
)
def test_affine_equivariance(xs, a, b):
    x = np.array(xs)
    e = robust_estimate(x)
    t = robust_estimate(a * x + b)
    assert t.location == pytest.approx(a * e.location + b, rel=1e-9, abs=1e-7)
    assert t.scaled_scale == pytest.approx(a * a * e.scaled_scale, rel=1e-9, abs=1e-7)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e4, 1e4, allow_nan=False), min_size=2, max_size=80), st.randoms())
def test_permutation_invariance(xs, rnd):
    x = list(xs)
    e = robust_estimate(x)
    rnd.shuffle(x)
    assert robust_estimate(x) == e


@pytest.mark.parametrize("sign", [1.0, -1.0])
def test_breakdown_with_huge_contaminants(sign, rng):
    n = 101
    x = rng.normal(0.0, 1.0, n)
    clean = robust_estimate(x)
    h = clean.h
    y = x.copy()
    y[: n - h] = sign * 1e6 * (1 + rng.random(n - h))
    dirty = robust_estimate(y)
    assert abs(dirty.location - clean.location) < 3.0
    assert dirty.raw_scale < 20.0
