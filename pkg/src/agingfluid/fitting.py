"""Least-squares fits in log space: exponential decay rates and log-log slopes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import argrelmax

from .errors import InsufficientPointsError, NonPositiveSampleError


@dataclass(frozen=True)
class FitResult:
    """Outcome of a log-space linear fit.

    Attributes
    ----------
    value : float
        Fitted decay rate (``-slope``) or log-log slope.
    residual : float
        RMS residual of the linear fit in log space.
    window : tuple of float
        Range of abscissae actually used.
    n_points : int
        Number of samples in the fit.
    intercept : float
        Fitted intercept in log space.
    """

    value: float
    residual: float
    window: tuple[float, float]
    n_points: int
    intercept: float


def _linear_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    if x.size < 3:
        raise InsufficientPointsError(f"need at least 3 points, got {x.size}")
    if np.ptp(x) == 0:
        raise InsufficientPointsError("abscissae are all equal")
    design = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - (slope * x + intercept)
    return float(slope), float(intercept), float(np.sqrt(np.mean(resid * resid)))


def fit_exponential_rate(
    t,
    y,
    window: tuple[float, float] | None = None,
    *,
    floor: float = 0.0,
) -> FitResult:
    """Fit ``y ~ C exp(-rate t)`` by ordinary least squares on ``log y``.

    Parameters
    ----------
    t, y : array_like
        Samples; every ``y`` inside the window must be positive.
    window : tuple, optional
        Closed range of ``t`` to use. Defaults to all samples.
    floor : float
        Samples with ``y <= floor`` are dropped before fitting (use to exclude
        a round-off floor). With the default 0 any nonpositive sample is an error.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    sel = np.ones(t.shape, dtype=bool) if window is None else (t >= window[0]) & (t <= window[1])
    if floor > 0:
        sel &= y > floor
    tt, yy = t[sel], y[sel]
    if np.any(yy <= 0):
        raise NonPositiveSampleError("log-space fit needs positive samples")
    slope, intercept, resid = _linear_fit(tt, np.log(yy))
    win = (float(tt.min()), float(tt.max()))
    return FitResult(-slope, resid, win, int(tt.size), intercept)


def fit_envelope_rate(t, y, t_start: float, *, floor: float = 0.0) -> FitResult:
    """Decay rate of an oscillating signal from the local maxima of ``|y|``.

    Falls back to all samples after ``t_start`` when fewer than three maxima
    are available.
    """
    t = np.asarray(t, dtype=float)
    a = np.abs(np.asarray(y, dtype=float))
    peaks = argrelmax(a)[0]
    keep = peaks[(t[peaks] >= t_start) & (a[peaks] > floor)]
    if keep.size >= 3:
        return fit_exponential_rate(t[keep], a[keep])
    return fit_exponential_rate(t, a, (t_start, float(t[-1])), floor=floor)


def fit_loglog_slope(x, err) -> FitResult:
    """Slope of ``log err`` against ``log x``.

    Raises
    ------
    NonPositiveSampleError
        If any ``x`` or ``err`` is not positive.
    InsufficientPointsError
        With fewer than three points.
    """
    x = np.asarray(x, dtype=float)
    e = np.asarray(err, dtype=float)
    if np.any(x <= 0) or np.any(e <= 0):
        raise NonPositiveSampleError("log-log fit needs positive abscissae and errors")
    if x.size >= 3 and x.max() < 4.0 * x.min():
        raise InsufficientPointsError("abscissae must span at least a factor of 4")
    slope, intercept, resid = _linear_fit(np.log(x), np.log(e))
    return FitResult(slope, resid, (float(x.min()), float(x.max())), int(x.size), intercept)
