"""Season-trend decomposition with LOESS, for weekly deseasonalization.

Implements a locally weighted regression smoother (tricube weights) and
the classic additive season-trend decomposition loop on top of it:
detrend, smooth each cycle-subseries, low-pass filter, subtract to get
the seasonal component, then re-estimate the trend on the deseasonalized
series. The residual is defined as input - trend - seasonal, so the
additive identity holds exactly.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParameterError


@dataclass
class DailySeries:
    dates: list[dt.date]
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if len(self.dates) != len(self.values):
            raise DataError("dates and values lengths differ")
        for a, b in zip(self.dates, self.dates[1:]):
            if (b - a).days != 1:
                raise DataError(f"non-contiguous dates: {a} .. {b}")
        if np.any(np.isnan(self.values)):
            raise DataError("series contains missing values; impute first")


@dataclass
class Decomposition:
    trend: np.ndarray
    seasonal: np.ndarray
    residual: np.ndarray
    period: int


def _check_window(window: int, degree: int, n: int) -> None:
    if window % 2 == 0:
        raise ParameterError(f"window must be odd, got {window}")
    if window < degree + 1:
        raise ParameterError(f"window {window} too small for degree {degree}")
    if window > n:
        raise ParameterError(f"window {window} exceeds series length {n}")


def _loess_eval(xs, ys, window, degree, eval_xs):
    """Fit a local weighted polynomial at each point of eval_xs.

    Uses the `window` nearest data points with tricube weights
    w(u) = (1 - |u|^3)^3, u = distance / max distance in window.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    out = np.empty(len(eval_xs))
    for k, x0 in enumerate(eval_xs):
        d = np.abs(xs - x0)
        idx = np.argsort(d, kind="stable")[:window]
        h = d[idx].max()
        if h == 0:
            out[k] = ys[idx[0]]
            continue
        u = d[idx] / h
        w = np.clip(1 - u**3, 0, None) ** 3
        # centered design matrix keeps the fit well conditioned
        t = xs[idx] - x0
        A = np.vander(t, degree + 1, increasing=True)
        sw = np.sqrt(w)
        coef, *_ = np.linalg.lstsq(A * sw[:, None], ys[idx] * sw, rcond=None)
        out[k] = coef[0]
    return out


def loess_smooth(xs, ys, window: int, degree: int = 1) -> np.ndarray:
    """LOESS-smooth ys over xs, evaluated at every x."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) != len(ys):
        raise ParameterError("xs and ys lengths differ")
    if np.any(np.diff(xs) <= 0):
        raise ParameterError("xs must be strictly increasing")
    if degree not in (0, 1, 2):
        raise ParameterError(f"degree must be 0, 1 or 2, got {degree}")
    _check_window(window, degree, len(xs))
    return _loess_eval(xs, ys, window, degree, xs)


def _odd_at_most(k: int, n: int) -> int:
    k = min(k, n)
    return k if k % 2 == 1 else k - 1


def _moving_average(values: np.ndarray, length: int) -> np.ndarray:
    kernel = np.full(length, 1.0 / length)
    return np.convolve(values, kernel, mode="valid")


def _default_trend_window(period: int, seasonal_window: int) -> int:
    # smallest odd integer >= 1.5 * period / (1 - 1.5 / seasonal_window)
    w = int(np.ceil(1.5 * period / (1 - 1.5 / seasonal_window)))
    return w + 1 if w % 2 == 0 else w


def stl_decompose(
    series: DailySeries,
    period: int = 7,
    seasonal_window: int = 7,
    inner_iters: int = 2,
    outer_iters: int = 0,
    trend_window: int | None = None,
) -> Decomposition:
    """Additive season-trend decomposition of a daily series.

    ``outer_iters`` adds robustness iterations that down-weight points
    with large residuals (bisquare weights).
    """
    y = series.values
    n = len(y)
    if period < 2:
        raise ParameterError(f"period must be >= 2, got {period}")
    if n < 2 * period:
        raise ParameterError(f"series length {n} < 2 x period {period}")
    if seasonal_window % 2 == 0:
        raise ParameterError(f"seasonal_window must be odd, got {seasonal_window}")
    if trend_window is None:
        trend_window = _default_trend_window(period, seasonal_window)
    trend_window = _odd_at_most(trend_window, n)
    lowpass_window = period if period % 2 == 1 else period + 1

    rho = np.ones(n)  # robustness weights
    trend = np.zeros(n)
    seasonal = np.zeros(n)
    for _outer in range(outer_iters + 1):
        for _inner in range(inner_iters):
            detrended = y - trend
            # cycle-subseries smoothing, extended one period on each end
            # so the low-pass moving averages return length n
            C = np.empty(n + 2 * period)
            for k in range(period):
                sub_idx = np.arange(k, n, period)
                sub = detrended[sub_idx]
                m = len(sub)
                win = _odd_at_most(seasonal_window, m)
                win = max(win, 1)
                positions = np.arange(m, dtype=float)
                eval_pos = np.arange(-1, m + 1, dtype=float)
                deg = 1 if win >= 2 else 0
                smoothed = _weighted_subseries_loess(
                    positions, sub, win, deg, eval_pos, rho[sub_idx]
                )
                C[k::period][: m + 2] = smoothed
            L = _moving_average(C, period)
            L = _moving_average(L, period)
            L = _moving_average(L, 3)
            L = loess_smooth(np.arange(n), L, _odd_at_most(lowpass_window, n), 1)
            seasonal = C[period : period + n] - L
            deseason = y - seasonal
            trend = _weighted_series_loess(deseason, trend_window, rho)
        resid = y - trend - seasonal
        if _outer < outer_iters:
            s = np.median(np.abs(resid))
            h = 6 * s if s > 0 else 1.0
            rho = np.clip(1 - (np.abs(resid) / h) ** 2, 0, None) ** 2
    residual = y - trend - seasonal
    return Decomposition(trend=trend, seasonal=seasonal, residual=residual, period=period)


def _weighted_subseries_loess(xs, ys, window, degree, eval_xs, rho):
    if np.all(rho == 1):
        return _loess_eval(xs, ys, window, degree, eval_xs)
    return _loess_eval_weighted(xs, ys, window, degree, eval_xs, rho)


def _weighted_series_loess(ys, window, rho):
    xs = np.arange(len(ys), dtype=float)
    if np.all(rho == 1):
        return _loess_eval(xs, ys, window, 1, xs)
    return _loess_eval_weighted(xs, ys, window, 1, xs, rho)


def _loess_eval_weighted(xs, ys, window, degree, eval_xs, rho):
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    out = np.empty(len(eval_xs))
    for k, x0 in enumerate(eval_xs):
        d = np.abs(xs - x0)
        idx = np.argsort(d, kind="stable")[:window]
        h = d[idx].max()
        if h == 0:
            out[k] = ys[idx[0]]
            continue
        u = d[idx] / h
        w = np.clip(1 - u**3, 0, None) ** 3 * rho[idx]
        t = xs[idx] - x0
        A = np.vander(t, degree + 1, increasing=True)
        sw = np.sqrt(w)
        coef, *_ = np.linalg.lstsq(A * sw[:, None], ys[idx] * sw, rcond=None)
        out[k] = coef[0]
    return out


def deseasonalize(series: DailySeries, period: int = 7, **kwargs) -> DailySeries:
    """Remove the seasonal component; trend + residual are retained."""
    dec = stl_decompose(series, period=period, **kwargs)
    return DailySeries(list(series.dates), series.values - dec.seasonal)
