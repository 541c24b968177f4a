"""Maximal functions over grid-aligned cubes, plus two cube-family sums.

The maximal operators are uncentered: at a point they scan every
grid-aligned cube (all anchor positions, all whole-cell side lengths) that
contains it.  The sharp variant measures mean absolute deviation about the
cube average, which stays within a factor 2^{1/delta} of the
infimum-over-constants definition and avoids an inner optimization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SingularityError
from .grid import Box, Field

__all__ = [
    "hl_maximal",
    "hl_maximal_field",
    "sharp_maximal",
    "sharp_maximal_field",
    "CubeFamilySummary",
    "marcinkiewicz_sum",
    "marcinkiewicz_field",
    "j_function",
    "j_function_field",
]


def _anchor_range(p: float, k: int, res: int) -> tuple[int, int]:
    """Anchors i with i <= p < i + k, clipped to the valid window range."""
    lo = max(0, int(math.floor(p - k)) + 1)
    hi = min(res - k, int(math.floor(p)))
    return lo, hi


def _window_max_nodes(anchored: np.ndarray, k: int) -> np.ndarray:
    """Expand anchored window scores to node maxima along every axis."""
    out = anchored
    for axis in range(anchored.ndim):
        pad_shape = list(out.shape)
        pad_shape[axis] = k - 1
        pad = np.full(pad_shape, -np.inf)
        padded = np.concatenate([pad, out, pad], axis=axis)
        view = np.lib.stride_tricks.sliding_window_view(padded, k, axis=axis)
        out = view.max(axis=-1)
    return out


def _window_means(g: np.ndarray, k: int) -> np.ndarray:
    """Mean of g over every k-cell window (all axes), via prefix sums."""
    out = g
    for axis in range(g.ndim):
        c = np.cumsum(out, axis=axis)
        zero = np.zeros_like(np.take(c, [0], axis=axis))
        c = np.concatenate([zero, c], axis=axis)
        upper = np.take(c, np.arange(k, c.shape[axis]), axis=axis)
        lower = np.take(c, np.arange(0, c.shape[axis] - k), axis=axis)
        out = upper - lower
    return out / float(k**g.ndim)


def hl_maximal_field(f: Field, delta_power: float = 1.0) -> Field:
    """Uncentered maximal function of |f|^delta_power, re-normalized, all nodes."""
    if delta_power <= 0:
        raise DomainError("delta_power must be positive")
    g = np.abs(f.samples) ** delta_power
    res = f.resolution
    best = np.full(g.shape, -np.inf)
    for k in range(1, res + 1):
        means = _window_means(g, k)
        best = np.maximum(best, _window_max_nodes(means, k))
    return f.with_samples(best ** (1.0 / delta_power))


def hl_maximal(f: Field, x, delta_power: float = 1.0) -> float:
    """Uncentered maximal function at one point (any point of the box)."""
    if delta_power <= 0:
        raise DomainError("delta_power must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not f.box.contains_point(x, tol=1e-12):
        raise DomainError(f"{x} outside the grid box")
    g = np.abs(f.samples) ** delta_power
    res = f.resolution
    p = (x - f.box.lo) / f.spacing
    best = -np.inf
    for k in range(1, res + 1):
        means = _window_means(g, k)
        ranges = [_anchor_range(p[d], k, res) for d in range(f.n)]
        if any(lo > hi for lo, hi in ranges):
            continue
        sl = tuple(slice(lo, hi + 1) for lo, hi in ranges)
        best = max(best, float(means[sl].max()))
    return best ** (1.0 / delta_power)


def _sharp_scores(g: np.ndarray, k: int) -> np.ndarray:
    """Mean |g - avg| over every k-cell window; windows as trailing axes."""
    view = g
    for axis in range(g.ndim):
        view = np.lib.stride_tricks.sliding_window_view(view, k, axis=axis)
    window_axes = tuple(range(g.ndim, 2 * g.ndim))
    mu = view.mean(axis=window_axes, keepdims=True)
    return np.abs(view - mu).mean(axis=window_axes)


def sharp_maximal_field(f: Field, delta_power: float) -> Field:
    """Oscillation maximal function of |f|^delta, re-normalized, all nodes."""
    if not (0.0 < delta_power < 1.0):
        raise DomainError("delta_power must lie in (0, 1)")
    g = np.abs(f.samples) ** delta_power
    res = f.resolution
    best = np.full(g.shape, -np.inf)
    for k in range(1, res + 1):
        scores = _sharp_scores(g, k)
        best = np.maximum(best, _window_max_nodes(scores, k))
    return f.with_samples(np.maximum(best, 0.0) ** (1.0 / delta_power))


def sharp_maximal(f: Field, x, delta_power: float) -> float:
    """Oscillation maximal function at one point."""
    if not (0.0 < delta_power < 1.0):
        raise DomainError("delta_power must lie in (0, 1)")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not f.box.contains_point(x, tol=1e-12):
        raise DomainError(f"{x} outside the grid box")
    g = np.abs(f.samples) ** delta_power
    res = f.resolution
    p = (x - f.box.lo) / f.spacing
    best = 0.0
    for k in range(1, res + 1):
        scores = _sharp_scores(g, k)
        ranges = [_anchor_range(p[d], k, res) for d in range(f.n)]
        if any(lo > hi for lo, hi in ranges):
            continue
        sl = tuple(slice(lo, hi + 1) for lo, hi in ranges)
        best = max(best, float(scores[sl].max()))
    return best ** (1.0 / delta_power)


# ---------------------------------------------------------------------------
# cube-family sums


@dataclass(frozen=True)
class CubeFamilySummary:
    """A finite cube family with the exponents its sums are formed with."""

    cubes: list
    m: int = 2
    epsilon: float = 1.0

    def __post_init__(self):
        for q in self.cubes:
            if q.half_width <= 0:
                raise DomainError("cube side lengths must be positive")

    @property
    def centers(self) -> np.ndarray:
        if not self.cubes:
            return np.zeros((0, 1))
        return np.stack([q.center for q in self.cubes])

    @property
    def sides(self) -> np.ndarray:
        return np.array([q.side for q in self.cubes])

    @property
    def total_measure(self) -> float:
        return float(sum(q.volume for q in self.cubes))


def _distances(fam: CubeFamilySummary, X: np.ndarray) -> np.ndarray:
    """|x - c_k| for evaluation rows X (N, n) -> (N, #cubes)."""
    C = fam.centers
    return np.sqrt(np.square(X[:, None, :] - C[None, :, :]).sum(axis=-1))


def marcinkiewicz_sum(fam: CubeFamilySummary, x, m: int, epsilon: float) -> float:
    """Sum over cubes of [l(Q) / ((4/5)|x-c|)]^{eps/m} |Q| / |x-c|^n."""
    if not fam.cubes:
        return 0.0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = fam.cubes[0].n
    d = _distances(fam, x[None, :])[0]
    if np.any(d <= 0.0):
        raise SingularityError("evaluation point coincides with a cube center")
    sides = fam.sides
    vols = sides**n
    terms = (sides / (0.8 * d)) ** (epsilon / m) * vols / d**n
    return float(terms.sum())


def marcinkiewicz_field(fam: CubeFamilySummary, grid: Field, m: int, epsilon: float,
                        dilate: float | None = None) -> Field:
    """Cube-family sum on all grid nodes; nodes inside any dilate are zeroed.

    ``dilate`` is the side multiplier of the excluded cubes (the classical
    choice is 5 sqrt(n)); pass 0 to disable the exclusion.
    """
    n = grid.n
    if dilate is None:
        dilate = 5.0 * math.sqrt(n)
    X = grid.coords()
    if not fam.cubes:
        return grid.with_samples(np.zeros(grid.samples.shape))
    d = _distances(fam, X)
    d = np.maximum(d, 1e-300)
    sides = fam.sides
    vols = sides**n
    terms = (sides[None, :] / (0.8 * d)) ** (epsilon / m) * vols[None, :] / d**n
    values = terms.sum(axis=1)
    if dilate > 0:
        excluded = np.zeros(X.shape[0], dtype=bool)
        for q in fam.cubes:
            inside = np.all(np.abs(X - q.center[None, :]) <= dilate * q.half_width, axis=1)
            excluded |= inside
        values = np.where(excluded, 0.0, values)
    return grid.with_samples(values.reshape(grid.samples.shape))


def j_function(fam: CubeFamilySummary, x, epsilon: float) -> float:
    """Sum over cubes of l^{n+eps} / (l + |x-c|)^{n+eps}."""
    if not fam.cubes:
        return 0.0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = fam.cubes[0].n
    d = _distances(fam, x[None, :])[0]
    sides = fam.sides
    return float(((sides ** (n + epsilon)) / (sides + d) ** (n + epsilon)).sum())


def j_function_field(fam: CubeFamilySummary, grid: Field, epsilon: float) -> Field:
    """The same sum on every grid node."""
    if not fam.cubes:
        return grid.with_samples(np.zeros(grid.samples.shape))
    X = grid.coords()
    n = grid.n
    d = _distances(fam, X)
    sides = fam.sides
    values = ((sides[None, :] ** (n + epsilon)) / (sides[None, :] + d) ** (n + epsilon)).sum(axis=1)
    return grid.with_samples(values.reshape(grid.samples.shape))
