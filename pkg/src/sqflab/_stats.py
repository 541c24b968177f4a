"""Small fitting helpers shared by the auditors and the check harness."""

from __future__ import annotations

import math

import numpy as np


def fit_constant(ratios) -> tuple[float, float]:
    """Measured constant and stability factor from an ordered ratio list.

    The constant is the max over the first half (the baseline suite); the
    stability factor is the max over the full list divided by it.  Any
    non-finite ratio fails immediately: both outputs become +inf.
    """
    ratios = list(ratios)
    if not ratios:
        raise ValueError("fit_constant needs at least one ratio")
    arr = np.asarray(ratios, dtype=float)
    if not np.all(np.isfinite(arr)):
        return math.inf, math.inf
    half = arr[: max(1, len(arr) // 2)]
    c = float(half.max())
    full = float(arr.max())
    if c <= 0.0:
        return (0.0, 1.0) if full <= 0.0 else (0.0, math.inf)
    return c, full / c


def loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x (positive data only)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    if keep.sum() < 2:
        return math.nan
    lx, ly = np.log(x[keep]), np.log(y[keep])
    lx = lx - lx.mean()
    denom = float(np.dot(lx, lx))
    if denom == 0.0:
        return math.nan
    return float(np.dot(lx, ly - ly.mean()) / denom)


def decile_table(keys, ratios) -> list[float]:
    """Max ratio within each decile of the samples ordered by ``keys``."""
    keys = np.asarray(keys, dtype=float)
    ratios = np.asarray(ratios, dtype=float)
    order = np.argsort(keys, kind="stable")
    chunks = np.array_split(ratios[order], 10)
    return [float(c.max()) if c.size else math.nan for c in chunks]
