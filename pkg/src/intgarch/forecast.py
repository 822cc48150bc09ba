"""Multi-step volatility forecasting.

The one-step forecast evaluates the scale recursion at observed lags. For
longer steps every quantity that is not yet observed is replaced by its
conditional expectation given information at the origin: |lam_{t+j}| by
sqrt(2/pi) h-hat(j), del_{t+j} by k h-hat(j), and h_{t+j} by h-hat(j).
For first-order models this collapses to

    h-hat(l) = mu + c1 * h-hat(l-1),

a geometric approach to the stationary mean mu/(1-c1) at rate c1.
Reported volatility forecasts are sigma2 = (1 + k/3) h-hat^2.
"""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field

import numpy as np

from .estimate import MIN_OBS_PER_PARAM, FitOptions, FittedModel, fit_mle, loglik_eval
from .exceptions import DataError, IntGarchError
from .intervals import IntervalSeries
from .process import ABS_NORMAL_MEAN, InitMode, ModelOrders, ModelParams, volatility

__all__ = ["ForecastResult", "forecast", "rolling_forecast"]


@dataclass(frozen=True)
class ForecastResult:
    """Forecasts from one origin: h_hat[j-1] and sigma2[j-1] are the
    j-step-ahead scale and volatility."""

    origin_index: int
    horizon: int
    h_hat: np.ndarray = field(repr=False)
    sigma2: np.ndarray = field(repr=False)
    origin_date: _dt.date | None = None


def _resolve_params(model) -> ModelParams:
    if isinstance(model, FittedModel):
        return model.params
    if isinstance(model, ModelParams):
        return model
    raise DataError(f"model must be a FittedModel or ModelParams, got {type(model).__name__}")


def forecast(
    model,
    series: IntervalSeries,
    horizon: int,
    h_path: np.ndarray | None = None,
    origin_index: int | None = None,
    init_mode: InitMode = InitMode.MEAN_H,
) -> ForecastResult:
    """Forecast h and volatility 1..horizon steps past an origin.

    Parameters
    ----------
    model : FittedModel or ModelParams
        Parameters to forecast under. A FittedModel's stored h path is
        reused when it matches the series; otherwise the path is
        recomputed from the model with the given init_mode.
    series : IntervalSeries
        Observed returns; the origin must have max(p,q,w)-1 predecessors.
    horizon : int
        Number of steps ahead, >= 1.
    h_path : ndarray, optional
        Precomputed scale path aligned with series (overrides the model's).
    origin_index : int, optional
        Index of the forecast origin; defaults to the last observation.
    """
    params = _resolve_params(model)
    if horizon < 1:
        raise DataError(f"horizon must be >= 1, got {horizon}")
    o = params.orders
    m = o.max_lag
    n = len(series)
    t = n - 1 if origin_index is None else origin_index
    if t < 0 or t >= n:
        raise DataError(f"origin_index {t} outside series of length {n}")
    if t < m - 1:
        raise DataError(
            f"insufficient history: origin {t} needs {m} observed lags"
        )
    if h_path is None and isinstance(model, FittedModel) and model.h_path is not None:
        if model.h_path.shape[0] == n:
            h_path = model.h_path
            init_mode = model.init_mode
    if h_path is None:
        _, h_path = loglik_eval(params, series[: t + 1], init_mode)
    h_path = np.asarray(h_path, dtype=float)
    if h_path.shape[0] < t + 1:
        raise DataError("h_path shorter than the forecast origin")

    abs_lam = np.abs(series.centers)
    dlt = series.radii
    k = params.k
    h_hat = np.empty(horizon)
    for j in range(1, horizon + 1):
        acc = params.mu
        for i in range(1, o.p + 1):
            acc += params.alpha[i - 1] * (
                abs_lam[t + j - i] if j - i <= 0 else ABS_NORMAL_MEAN * h_hat[j - i - 1]
            )
        for i in range(1, o.q + 1):
            acc += params.beta[i - 1] * (
                dlt[t + j - i] if j - i <= 0 else k * h_hat[j - i - 1]
            )
        for i in range(1, o.w + 1):
            acc += params.gamma[i - 1] * (
                h_path[t + j - i] if j - i <= 0 else h_hat[j - i - 1]
            )
        h_hat[j - 1] = acc
    date = series.dates[t] if series.dates is not None else None
    return ForecastResult(
        origin_index=t,
        horizon=horizon,
        h_hat=h_hat,
        sigma2=np.asarray(volatility(params, h_hat), dtype=float),
        origin_date=date,
    )


def rolling_forecast(
    series: IntervalSeries,
    orders: ModelOrders,
    horizons,
    train_size: int,
    refit_every: int = 1,
    options: FitOptions | None = None,
) -> tuple:
    """Walk-forward forecasts with periodic refitting.

    The model is fit on the first train_size observations and refit on the
    growing sample at every refit_every-th origin thereafter. Each origin
    t in train_size-1 .. len(series)-1 yields forecasts for 1..max(horizons)
    steps ahead. A failed refit skips that origin (recorded in the second
    return value) and keeps the previous parameters for later origins.

    Returns
    -------
    (list of ForecastResult, list of (origin_index, reason))
    """
    horizons = sorted(set(int(h) for h in horizons))
    if not horizons or horizons[0] < 1:
        raise DataError("horizons must be a nonempty set of integers >= 1")
    max_h = horizons[-1]
    n = len(series)
    if train_size < MIN_OBS_PER_PARAM * orders.n_params:
        raise DataError(
            f"train_size {train_size} too small for orders "
            f"({orders.p},{orders.q},{orders.w})"
        )
    if train_size > n:
        raise DataError(f"train_size {train_size} exceeds series length {n}")
    if refit_every < 1:
        raise DataError("refit_every must be >= 1")
    options = options or FitOptions()

    results: list = []
    skipped: list = []
    fitted: FittedModel | None = None
    for t in range(train_size - 1, n):
        scheduled = (t - (train_size - 1)) % refit_every == 0
        if scheduled or fitted is None:
            try:
                fitted = fit_mle(series[: t + 1], orders, options)
            except IntGarchError as exc:
                skipped.append((t, str(exc)))
                continue
            h_path = fitted.h_path
        else:
            _, h_path = loglik_eval(fitted.params, series[: t + 1], options.init_mode)
        results.append(
            forecast(
                fitted.params,
                series,
                max_h,
                h_path=h_path,
                origin_index=t,
                init_mode=options.init_mode,
            )
        )
    return results, skipped
