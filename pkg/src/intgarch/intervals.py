"""Interval-valued observations and their descriptive statistics.

An interval observation is stored as (center, radius) with radius >= 0.
Centers and radii are the native coordinates of all model equations, so
bounds (lower, upper) are derived views. Distances use the L2 metric on
(center, radius) pairs; means are componentwise (Aumann); variances and
covariances add the center and radius components.
"""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .exceptions import DataError

__all__ = [
    "Interval",
    "IntervalSeries",
    "SummaryMoments",
    "rho2_distance",
    "aumann_mean",
    "sample_variance",
    "sample_covariance",
    "sample_correlation",
    "sample_acf",
    "component_acf",
    "summarize",
]


@dataclass(frozen=True)
class Interval:
    """A closed real interval in (center, radius) coordinates.

    Parameters
    ----------
    center : float
        Midpoint of the interval.
    radius : float
        Half-width; must be nonnegative and finite.
    """

    center: float
    radius: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.center) and np.isfinite(self.radius)):
            raise DataError("interval coordinates must be finite")
        if self.radius < 0:
            raise DataError(f"interval radius must be >= 0, got {self.radius}")

    @classmethod
    def from_bounds(cls, lower: float, upper: float) -> "Interval":
        """Build from endpoints; requires lower <= upper."""
        if lower > upper:
            raise DataError(f"lower bound {lower} exceeds upper bound {upper}")
        return cls(center=(lower + upper) / 2.0, radius=(upper - lower) / 2.0)

    @property
    def lower(self) -> float:
        return self.center - self.radius

    @property
    def upper(self) -> float:
        return self.center + self.radius

    def __contains__(self, x: float) -> bool:
        return self.lower <= x <= self.upper


class IntervalSeries:
    """An ordered sequence of intervals with optional strictly increasing dates.

    Stores centers and radii as float arrays. All statistics below operate
    on these two component series.
    """

    __slots__ = ("_centers", "_radii", "_dates")

    def __init__(
        self,
        centers: Sequence[float] | np.ndarray,
        radii: Sequence[float] | np.ndarray,
        dates: Sequence[_dt.date] | None = None,
    ) -> None:
        c = np.asarray(centers, dtype=float)
        r = np.asarray(radii, dtype=float)
        if c.ndim != 1 or r.ndim != 1 or c.shape != r.shape:
            raise DataError("centers and radii must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(r))):
            raise DataError("interval coordinates must be finite")
        if np.any(r < 0):
            bad = int(np.argmax(r < 0))
            raise DataError(f"negative radius at position {bad}")
        self._centers = c
        self._radii = r
        if dates is not None:
            dates = tuple(dates)
            if len(dates) != len(c):
                raise DataError("dates length does not match series length")
            for a, b in zip(dates, dates[1:]):
                if not a < b:
                    raise DataError(f"dates must be strictly increasing, got {a} before {b}")
        self._dates = dates

    @classmethod
    def from_intervals(
        cls, intervals: Iterable[Interval], dates: Sequence[_dt.date] | None = None
    ) -> "IntervalSeries":
        ivs = list(intervals)
        return cls([iv.center for iv in ivs], [iv.radius for iv in ivs], dates)

    @classmethod
    def from_bounds(
        cls,
        lowers: Sequence[float] | np.ndarray,
        uppers: Sequence[float] | np.ndarray,
        dates: Sequence[_dt.date] | None = None,
    ) -> "IntervalSeries":
        lo = np.asarray(lowers, dtype=float)
        up = np.asarray(uppers, dtype=float)
        if lo.shape != up.shape:
            raise DataError("lower and upper bound arrays must have equal length")
        if np.any(lo > up):
            bad = int(np.argmax(lo > up))
            raise DataError(f"lower bound exceeds upper bound at position {bad}")
        return cls((lo + up) / 2.0, (up - lo) / 2.0, dates)

    @property
    def centers(self) -> np.ndarray:
        return self._centers

    @property
    def radii(self) -> np.ndarray:
        return self._radii

    @property
    def dates(self) -> tuple | None:
        return self._dates

    @property
    def lowers(self) -> np.ndarray:
        return self._centers - self._radii

    @property
    def uppers(self) -> np.ndarray:
        return self._centers + self._radii

    def __len__(self) -> int:
        return self._centers.shape[0]

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            d = self._dates[idx] if self._dates is not None else None
            return IntervalSeries(self._centers[idx], self._radii[idx], d)
        return Interval(float(self._centers[idx]), float(self._radii[idx]))

    def __iter__(self) -> Iterator[Interval]:
        for c, r in zip(self._centers, self._radii):
            yield Interval(float(c), float(r))

    def __eq__(self, other) -> bool:
        if not isinstance(other, IntervalSeries):
            return NotImplemented
        return (
            np.array_equal(self._centers, other._centers)
            and np.array_equal(self._radii, other._radii)
            and self._dates == other._dates
        )

    def __repr__(self) -> str:
        return f"IntervalSeries(n={len(self)}, dated={self._dates is not None})"


@dataclass(frozen=True)
class SummaryMoments:
    """Sample summary of an interval series.

    mean is the Aumann (componentwise) mean; variance and autocovariances
    use divisor n-1 uniformly, so autocovariances[0] equals variance.
    """

    mean: Interval
    variance: float
    autocovariances: np.ndarray = field(repr=False)


def rho2_distance(x: Interval, y: Interval) -> float:
    """L2 distance between intervals: sqrt(dc^2 + dr^2) on (center, radius)."""
    return float(np.hypot(x.center - y.center, x.radius - y.radius))


def aumann_mean(series: IntervalSeries) -> Interval:
    """Componentwise mean interval. Raises on an empty series."""
    if len(series) == 0:
        raise DataError("empty input")
    return Interval(float(series.centers.mean()), float(series.radii.mean()))


def sample_variance(series: IntervalSeries) -> float:
    """Sample variance, divisor n-1: var(centers) + var(radii).

    This is the Frechet variance under the rho2 metric: the mean interval
    minimizes the average squared rho2 distance, and this is that minimum
    (scaled by n/(n-1)).
    """
    if len(series) < 2:
        raise DataError("insufficient data: variance needs at least 2 observations")
    return float(series.centers.var(ddof=1) + series.radii.var(ddof=1))


def sample_covariance(a: IntervalSeries, b: IntervalSeries) -> float:
    """Sample covariance (divisor n-1): cov(centers) + cov(radii)."""
    if len(a) != len(b):
        raise DataError("series lengths differ")
    if len(a) < 2:
        raise DataError("insufficient data: covariance needs at least 2 observations")
    cc = np.cov(a.centers, b.centers, ddof=1)[0, 1]
    rr = np.cov(a.radii, b.radii, ddof=1)[0, 1]
    return float(cc + rr)


def sample_correlation(a: IntervalSeries, b: IntervalSeries) -> float:
    """Sample correlation: covariance normalized by the two variances."""
    va = sample_variance(a)
    vb = sample_variance(b)
    if va <= 0 or vb <= 0:
        raise DataError("degenerate series")
    return sample_covariance(a, b) / float(np.sqrt(va * vb))


def _acov_biased(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Autocovariances gamma(0..max_lag) with divisor n (biased)."""
    n = x.shape[0]
    xc = x - x.mean()
    out = np.empty(max_lag + 1)
    for s in range(max_lag + 1):
        out[s] = np.dot(xc[: n - s], xc[s:]) / n
    return out


def sample_acf(series: IntervalSeries, max_lag: int) -> np.ndarray:
    """Autocorrelations of an interval series for lags 0..max_lag.

    rho(s) = (gamma_c(s) + gamma_r(s)) / (gamma_c(0) + gamma_r(0)) where
    gamma_c, gamma_r are the biased (divisor n) autocovariances of the
    center and radius components. The common divisor cancels; using the
    biased estimator keeps |rho(s)| <= 1 for every lag.
    """
    if max_lag < 0:
        raise DataError("max_lag must be >= 0")
    if len(series) <= max_lag + 1:
        raise DataError("insufficient data: series length must exceed max_lag + 1")
    num = _acov_biased(series.centers, max_lag) + _acov_biased(series.radii, max_lag)
    if num[0] <= 0:
        raise DataError("degenerate series")
    return num / num[0]


def component_acf(values: Sequence[float] | np.ndarray, max_lag: int) -> np.ndarray:
    """Autocorrelations of a scalar series (biased autocovariances)."""
    x = np.asarray(values, dtype=float)
    if x.ndim != 1:
        raise DataError("values must be 1-d")
    if max_lag < 0:
        raise DataError("max_lag must be >= 0")
    if x.shape[0] <= max_lag + 1:
        raise DataError("insufficient data: series length must exceed max_lag + 1")
    g = _acov_biased(x, max_lag)
    if g[0] <= 0:
        raise DataError("degenerate series")
    return g / g[0]


def summarize(series: IntervalSeries, max_lag: int = 0) -> SummaryMoments:
    """Mean, variance, and autocovariances (divisor n-1 throughout)."""
    if len(series) < 2:
        raise DataError("insufficient data: summary needs at least 2 observations")
    if len(series) <= max_lag:
        raise DataError("insufficient data: series length must exceed max_lag")
    n = len(series)
    cc = series.centers - series.centers.mean()
    rr = series.radii - series.radii.mean()
    acov = np.empty(max_lag + 1)
    for s in range(max_lag + 1):
        acov[s] = (np.dot(cc[: n - s], cc[s:]) + np.dot(rr[: n - s], rr[s:])) / (n - 1)
    return SummaryMoments(
        mean=aumann_mean(series), variance=float(acov[0]), autocovariances=acov
    )
