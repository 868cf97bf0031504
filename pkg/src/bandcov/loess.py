"""Locally weighted linear regression with tricube weights (no robustness steps)."""

from __future__ import annotations

import math

import numpy as np

from .errors import ParameterError

__all__ = ["tricube", "local_linear_fit", "ols_line_fit"]


def tricube(u):
    u = np.clip(np.abs(u), 0.0, 1.0)
    return (1.0 - u**3) ** 3


def _wls_line(x, y, w, x0):
    sw = w.sum()
    xm = (w * x).sum() / sw
    ym = (w * y).sum() / sw
    sxx = (w * (x - xm) ** 2).sum()
    if sxx <= 0.0:
        return None
    slope = (w * (x - xm) * (y - ym)).sum() / sxx
    return ym + slope * (x0 - xm)


def ols_line_fit(xs, ys) -> np.ndarray:
    """Ordinary least-squares line evaluated at ``xs``."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if np.unique(x).size < 2:
        raise ParameterError("need at least 2 distinct x values for a line fit")
    fitted = _wls_line(x, y, np.ones_like(x), x)
    return np.asarray(fitted, dtype=float)


def local_linear_fit(xs, ys, span: float = 0.75) -> np.ndarray:
    """Fitted values of a local-linear smoother at each ``xs``.

    At each point the ``ceil(span * m)`` nearest points get tricube weights
    ``(1 - |d/h|^3)^3`` with ``h`` the distance to the farthest of them, so
    that point receives zero weight.  When the weighted design at a point is
    rank deficient (too few distinct positively weighted x), the fit there
    falls back to an unweighted line through the same neighbours.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ParameterError("xs and ys must be 1-d arrays of equal length")
    if not 0.0 < span <= 1.0:
        raise ParameterError(f"span must lie in (0, 1], got {span}")
    if np.unique(x).size < 2:
        raise ParameterError("need at least 2 distinct x values")

    m = x.size
    n_near = min(m, max(2, math.ceil(span * m)))
    fitted = np.empty(m)
    for i, x0 in enumerate(x):
        dist = np.abs(x - x0)
        near = np.argsort(dist, kind="stable")[:n_near]
        h = dist[near].max()
        w = tricube(dist[near] / h) if h > 0 else np.ones(n_near)
        value = None
        if np.unique(x[near][w > 0]).size >= 2:
            value = _wls_line(x[near], y[near], w, x0)
        if value is None:
            value = _wls_line(x[near], y[near], np.ones(n_near), x0)
        if value is None:
            value = y[near].mean()
        fitted[i] = value
    return fitted
