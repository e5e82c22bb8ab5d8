"""Scalar statistics and the chi-square / F distribution functions.

The incomplete gamma and beta functions follow the classic split between a
power series and a modified-Lentz continued fraction.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 2000


def _as_series(values: Sequence[float] | np.ndarray, min_len: int, what: str) -> np.ndarray:
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"{what} expects a 1-D series, got shape {x.shape}")
    if x.size < min_len:
        raise ValueError(f"{what} needs at least {min_len} value(s), got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{what} received non-finite values")
    return x


def mean(values) -> float:
    x = _as_series(values, 1, "mean")
    return float(np.sum(x) / x.size)


def sample_variance(values) -> float:
    """Variance with the ``1/(N-1)`` divisor (two-pass, so it is shift-stable)."""
    x = _as_series(values, 2, "sample_variance")
    dev = x - np.sum(x) / x.size
    return float(np.dot(dev, dev) / (x.size - 1))


def population_autocovariance(values) -> float:
    """Zero-lag autocovariance with the ``1/N`` divisor.

    Inputs are real, so the conjugate in the complex definition is the identity.
    """
    x = _as_series(values, 1, "population_autocovariance")
    dev = x - np.sum(x) / x.size
    return float(np.dot(dev, dev) / x.size)


# ---------------------------------------------------------------------------
# incomplete gamma


def _gamma_series(a: float, x: float) -> float:
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    else:
        raise ArithmeticError(f"incomplete gamma series did not converge (a={a}, x={x})")
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_continued_fraction(a: float, x: float) -> float:
    # upper regularized Q(a, x)
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    else:
        raise ArithmeticError(f"incomplete gamma fraction did not converge (a={a}, x={x})")
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def regularized_gamma_p(a: float, x: float) -> float:
    """Regularized lower incomplete gamma ``P(a, x)``."""
    if a <= 0:
        raise ValueError(f"shape must be positive, got {a}")
    if x < 0:
        raise ValueError(f"x must be non-negative, got {x}")
    if x == 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < a + 1.0:
        return min(1.0, _gamma_series(a, x))
    return max(0.0, 1.0 - _gamma_continued_fraction(a, x))


def chi_square_cdf(x: float, k: int) -> float:
    if k < 1 or int(k) != k:
        raise ValueError(f"degrees of freedom must be a positive integer, got {k}")
    if x < 0:
        raise ValueError(f"chi-square cdf is defined for x >= 0, got {x}")
    return regularized_gamma_p(k / 2.0, x / 2.0)


def chi_square_pdf(x: float, k: int) -> float:
    if x <= 0:
        return 0.0 if k > 2 else (0.5 if k == 2 else math.inf)
    half = k / 2.0
    return math.exp((half - 1.0) * math.log(x) - x / 2.0 - half * math.log(2.0) - math.lgamma(half))


def chi_square_quantile(q: float, k: int) -> float:
    """Inverse of :func:`chi_square_cdf`: bracket, bisect, then Newton-polish."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {q}")
    if k < 1 or int(k) != k:
        raise ValueError(f"degrees of freedom must be a positive integer, got {k}")
    lo, hi = 0.0, max(1.0, float(k))
    while chi_square_cdf(hi, k) < q:
        lo, hi = hi, hi * 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if chi_square_cdf(mid, k) < q:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(3):
        dens = chi_square_pdf(x, k)
        if not dens or not math.isfinite(dens):
            break
        step = (chi_square_cdf(x, k) - q) / dens
        nxt = x - step
        if not lo <= nxt <= hi:
            break
        x = nxt
    return x


# ---------------------------------------------------------------------------
# incomplete beta and the F distribution


def _beta_fraction(a: float, b: float, x: float) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta fraction did not converge (a={a}, b={b}, x={x})")


def regularized_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta ``I_x(a, b)``."""
    if a <= 0 or b <= 0:
        raise ValueError("beta parameters must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_fraction(a, b, x) / a
    return 1.0 - front * _beta_fraction(b, a, 1.0 - x) / b


def f_survival(f: float, d1: float, d2: float) -> float:
    """Upper tail ``P(F > f)`` of the F distribution with ``(d1, d2)`` dof."""
    if d1 <= 0 or d2 <= 0:
        raise ValueError("F distribution degrees of freedom must be positive")
    if math.isnan(f):
        raise ValueError("F statistic is NaN")
    if f <= 0:
        return 1.0
    if math.isinf(f):
        return 0.0
    return regularized_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))
