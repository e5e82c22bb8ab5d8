"""Exact univariate minimum covariance determinant (MCD).

In one dimension the covariance determinant is the variance, and the
variance-minimizing h-subset is always a run of consecutive order
statistics, so scanning the ``n - h + 1`` windows of the sorted sample gives
the exact optimum.
"""
from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .stats import chi_square_cdf, chi_square_quantile

DIMENSION = 1
_EPS = np.finfo(np.float64).eps
_TINY_VAR = 1e-300


@dataclass(frozen=True)
class MCDConfig:
    """Coverage settings for the robust estimator.

    ``alpha`` is the target fraction h/n; 0.5 selects the maximal-breakdown
    half-sample h = floor((n + 2) / 2). ``quantile_level`` overrides the
    chi-square quantile level used in the consistency factor; when unset the
    realized coverage h/n is used.
    """

    alpha: float = 0.5
    quantile_level: Optional[float] = None

    def __post_init__(self):
        _check_alpha(self.alpha)
        if self.quantile_level is not None and not 0.0 < self.quantile_level <= 1.0:
            raise ValueError(f"quantile_level must lie in (0, 1], got {self.quantile_level}")


@dataclass(frozen=True)
class RobustEstimate:
    location: float
    raw_scale: float
    consistency_factor: float
    scaled_scale: float
    h: int
    subset_start: int


def _check_alpha(alpha: float) -> None:
    # 0.5 is admitted as the limiting half-sample configuration
    if not 0.5 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0.5, 1], got {alpha}")


def choose_h(n: int, alpha: float) -> int:
    if n < 2:
        raise ValueError(f"need at least 2 observations, got {n}")
    _check_alpha(alpha)
    floor_bound = (n + DIMENSION + 1) // 2
    # rounding guards against 0.6 * 5 == 3.0000000000000004
    h = max(math.ceil(round(alpha * n, 9)), floor_bound)
    return min(h, n)


def _window_sums(v: np.ndarray, h: int) -> np.ndarray:
    """Sums over every length-h window of ``v``.

    Each sum is assembled from cumulative sums that restart every h samples,
    so only values inside the window contribute rounding error. A global
    prefix sum would drag the error of far-away outliers into every window.
    """
    n = v.size
    n_blocks = -(-n // h)
    padded = np.zeros(n_blocks * h)
    padded[:n] = v
    blocks = padded.reshape(n_blocks, h)
    forward = np.cumsum(blocks, axis=1).ravel()
    backward = np.cumsum(blocks[:, ::-1], axis=1)[:, ::-1].ravel()
    starts = np.arange(n - h + 1)
    sums = backward[starts].copy()
    straddle = (starts % h) != 0
    sums[straddle] += forward[starts[straddle] + h - 1]
    return sums


def exact_univariate_mcd(data, h: int) -> tuple[float, float, int]:
    """Return ``(location, raw_scale, subset_start)`` of the optimal h-subset.

    ``raw_scale`` is the subset variance with divisor ``h - 1`` and
    ``subset_start`` indexes the sorted sample. Equal-variance windows resolve
    to the smallest start.
    """
    x = np.sort(np.asarray(data, dtype=np.float64))
    n = x.size
    if h < 2:
        raise ValueError(f"h must be at least 2, got {h}")
    if h > n:
        raise ValueError(f"h={h} exceeds the sample size n={n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("data contains non-finite values")

    if h == n:
        candidates = np.array([0])
    else:
        c = x - x[n // 2]
        s1 = _window_sums(c, h)
        s2 = _window_sums(c * c, h)
        var = (s2 - s1 * s1 / h) / (h - 1)
        # error bound of the one-pass formula; a second exact pass settles
        # every window that could still be the minimum
        slack = 8.0 * h * _EPS * (s2 + np.abs(s1) * np.abs(s1) / h) / (h - 1) + _TINY_VAR
        candidates = np.flatnonzero(var - slack <= np.min(var + slack))

    best_var = math.inf
    best_start = -1
    best_loc = math.nan
    for j in candidates:
        w = x[j : j + h]
        loc = float(np.sum(w) / h)
        dev = w - loc
        v = float(np.dot(dev, dev) / (h - 1))
        if v < best_var:
            best_var, best_start, best_loc = v, int(j), loc
    return best_loc, best_var, best_start


@lru_cache(maxsize=256)
def consistency_factor(alpha: float, p: int = DIMENSION) -> float:
    """Factor making the raw MCD scatter consistent at the Gaussian.

    alpha / F_{chi2(p+2)}(q), with q the alpha-quantile of chi2(p).
    """
    _check_alpha(alpha)
    if p != DIMENSION:
        raise ValueError("only the univariate case p=1 is supported")
    if alpha == 1.0:
        return 1.0
    q = chi_square_quantile(alpha, p)
    return alpha / chi_square_cdf(q, p + 2)


def _factor_for(cfg: MCDConfig, h: int, n: int) -> float:
    coverage = h / n
    if cfg.quantile_level is None:
        return consistency_factor(coverage)
    # explicit level: no clamping, a level far above the coverage gives c0 < 1
    if cfg.quantile_level == 1.0:
        return coverage
    q = chi_square_quantile(cfg.quantile_level, DIMENSION)
    return coverage / chi_square_cdf(q, DIMENSION + 2)


def robust_estimate(data, cfg: MCDConfig = MCDConfig()) -> RobustEstimate:
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("robust_estimate needs a 1-D series of length >= 2")
    h = choose_h(x.size, cfg.alpha)
    location, raw, start = exact_univariate_mcd(x, h)
    c0 = _factor_for(cfg, h, x.size)
    return RobustEstimate(
        location=location,
        raw_scale=raw,
        consistency_factor=c0,
        scaled_scale=c0 * raw,
        h=h,
        subset_start=start,
    )
