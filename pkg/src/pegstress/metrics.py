"""Peg deviation, rolling volatility and summary statistics.

Sums go through :func:`math.fsum` so results do not depend on array
layout or summation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DomainError
from .ingest import CoinSeries

DEFAULT_OFF_PEG_TOLERANCE = 0.001
DEFAULT_EXACT_PEG_TOLERANCE = 5e-5


def peg_deviation(price):
    """Signed fractional distance from $1: ``(price - 1) / 1``.

    Accepts a scalar or an array.  Multiply by 100 for percent display.
    """
    p = np.asarray(price, dtype=float)
    if not np.all(np.isfinite(p)):
        raise DomainError("peg_deviation needs finite prices")
    if np.any(p < 0):
        raise DomainError("peg_deviation needs non-negative prices")
    dev = p - 1.0
    return float(dev) if dev.ndim == 0 else dev


def exact_variance(x, ddof: int = 1) -> float:
    """Correctly rounded variance of float data.

    Values are scaled to a common power-of-two denominator so the sums of
    x and x**2 are exact integers; only the final division rounds.  The
    result is therefore independent of summation order.
    """
    ratios = [v.as_integer_ratio() for v in np.asarray(x, dtype=float).tolist()]
    n = len(ratios)
    if n - ddof <= 0:
        return 0.0
    k = max(d for _, d in ratios).bit_length() - 1
    nums = [num << (k - (d.bit_length() - 1)) for num, d in ratios]
    s1 = sum(nums)
    s2 = sum(v * v for v in nums)
    return float(Fraction(n * s2 - s1 * s1, (n * (n - ddof)) << (2 * k)))


@dataclass(frozen=True)
class DescriptiveStats:
    mean: float
    median: float
    std: float
    min: float
    max: float
    count: int
    ddof: int = 1

    @property
    def range(self) -> float:
        return self.max - self.min

    def as_dict(self) -> dict:
        return {"mean": self.mean, "median": self.median, "std": self.std,
                "min": self.min, "max": self.max, "range": self.range, "count": self.count}


def descriptive_stats(values, ddof: int = 1) -> DescriptiveStats:
    """Mean, median, std, min, max and count after dropping nulls.

    ``ddof=1`` (sample std) is the default; pass ``ddof=0`` for the
    population figure.
    """
    x = np.asarray(values, dtype=float)
    x = x[~np.isnan(x)]
    n = len(x)
    if n == 0:
        raise DomainError("descriptive_stats: no non-null values")
    mean = math.fsum(x) / n
    std = math.sqrt(exact_variance(x, ddof))
    return DescriptiveStats(mean, float(np.median(x)), std, float(x.min()), float(x.max()), n, ddof)


@dataclass(frozen=True)
class VolatilitySeries:
    window: int
    dates: np.ndarray
    values: np.ndarray

    def __len__(self):
        return len(self.values)

    def mean(self) -> float:
        return math.fsum(self.values) / len(self.values) if len(self.values) else math.nan


def rolling_volatility(series: CoinSeries, window: int) -> VolatilitySeries:
    """Population-normalised rolling std of price over the last ``window`` days.

    The value at day t uses prices t-window+1 .. t on the calendar; windows
    touching a missing day produce no value.
    """
    if window < 2:
        raise DomainError("rolling window must be at least 2")
    daily = series.daily()
    prices = daily["price"].to_numpy(dtype=float)
    if len(prices) < window:
        return VolatilitySeries(window, np.array([], dtype="datetime64[D]"), np.array([]))
    windows = sliding_window_view(prices, window)
    means = windows.mean(axis=1, keepdims=True)
    sigma = np.sqrt(((windows - means) ** 2).sum(axis=1) / window)
    dates = daily.index.to_numpy().astype("datetime64[D]")[window - 1:]
    ok = ~np.isnan(sigma)
    return VolatilitySeries(window, dates[ok], sigma[ok])


@dataclass(frozen=True)
class PegStats:
    avg_abs_deviation: float
    price_std: float
    max_abs_deviation: float
    off_peg_day_share: float
    longest_on_peg_run: int
    exact_peg_share: float
    observed_days: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def peg_stats(series: CoinSeries, off_peg_tolerance: float = DEFAULT_OFF_PEG_TOLERANCE,
              exact_peg_tolerance: float = DEFAULT_EXACT_PEG_TOLERANCE) -> PegStats:
    """Peg quality summary: deviation size, off-peg share and on-peg runs.

    Shares are over observed (non-null) days.  A missing day breaks an
    on-peg run.
    """
    if off_peg_tolerance < 0 or exact_peg_tolerance < 0:
        raise DomainError("peg tolerances must be non-negative")
    prices = series.daily()["price"].to_numpy(dtype=float)
    observed = ~np.isnan(prices)
    n = int(observed.sum())
    if n == 0:
        raise DomainError(f"{series.coin_id}: no observed prices")
    p = prices[observed]
    absdev = np.abs(peg_deviation(p))

    price_std = math.sqrt(exact_variance(p, 1))

    on_peg = np.zeros(len(prices), dtype=bool)
    on_peg[observed] = absdev <= exact_peg_tolerance
    longest = run = 0
    for flag in on_peg:
        run = run + 1 if flag else 0
        longest = max(longest, run)

    return PegStats(
        avg_abs_deviation=math.fsum(absdev) / n,
        price_std=price_std,
        max_abs_deviation=float(absdev.max()),
        off_peg_day_share=int((absdev > off_peg_tolerance).sum()) / n,
        longest_on_peg_run=longest,
        exact_peg_share=int((absdev <= exact_peg_tolerance).sum()) / n,
        observed_days=n,
    )


def coin_descriptives(series: CoinSeries, ddof: int = 1) -> dict[str, DescriptiveStats]:
    """Descriptive statistics for price, market cap and volume of one coin."""
    return {
        "price": descriptive_stats(series.price, ddof),
        "market_cap": descriptive_stats(series.market_cap, ddof),
        "total_volume": descriptive_stats(series.total_volume, ddof),
    }
