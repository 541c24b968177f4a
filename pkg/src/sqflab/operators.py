"""The multilinear square function, its truncations, and maximal variants.

All spatial integrals run over the shared sample grid of the inputs; the
outer scale integral is the trapezoid rule of :func:`sqflab.grid.log_scale_nodes`.
Product-structure kernels get fast paths (per-scale convolution matrices with
Toeplitz-style difference tables); anything else falls back to a generic
sweep over the m-fold product grid.

The maximal variants replace the supremum over truncation radii by a finite
geometric grid.  For one evaluation point the product grid is ordered once
by its distance functional; suffix sums of that ordering then give every
truncation in a single sweep per scale node, and both variants are read off
the same table, which keeps their pointwise ordering exact in floating
point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .grid import Box, Field, log_scale_nodes
from .kernels import ApproxIdentity, KernelFamily

__all__ = [
    "SquareFunctionConfig",
    "TruncationGeometry",
    "apply_approx_identity",
    "square_function",
    "square_function_field",
    "truncated_square_function",
    "maximal_square_function",
    "maximal_square_function_pair",
    "maximal_square_function_field",
    "build_delta_grid",
    "write_operator_csv",
]


@dataclass(frozen=True)
class SquareFunctionConfig:
    """Scale quadrature and truncation-grid parameters."""

    v_min: float = 1e-4
    v_max: float = 1e4
    points_per_decade: int = 32
    delta_count: int = 16
    delta_ratio: float = 2.0

    def nodes(self):
        return log_scale_nodes(self.v_min, self.v_max, self.points_per_decade)


def build_delta_grid(f: Field, cfg: SquareFunctionConfig) -> np.ndarray:
    """Geometric truncation radii spanning [grid spacing, box diameter]."""
    if cfg.delta_count < 1 or cfg.delta_ratio <= 1.0:
        raise DomainError("delta grid needs count >= 1 and ratio > 1")
    deltas = [f.spacing]
    while len(deltas) < cfg.delta_count and deltas[-1] * cfg.delta_ratio <= f.box.diameter:
        deltas.append(deltas[-1] * cfg.delta_ratio)
    return np.array(deltas)


@dataclass(frozen=True)
class TruncationGeometry:
    """Integration region for a truncated square function at one point.

    ``outside_ball`` keeps tuples with sum_i |x-y_i|^2 > delta^2;
    ``far_field`` keeps tuples with min_j |y_j - x| >= delta; ``annulus`` is
    the complement of their union.  The three regions partition the product
    space exactly.
    """

    kind: str
    delta: float
    center: np.ndarray

    def __post_init__(self):
        if self.kind not in ("outside_ball", "far_field", "annulus"):
            raise DomainError(f"unknown truncation kind '{self.kind}'")
        if self.delta <= 0:
            raise DomainError("truncation radius must be positive")
        object.__setattr__(self, "center", np.atleast_1d(np.asarray(self.center, dtype=float)))

    def mask(self, dist_sq_sum: np.ndarray, min_dist: np.ndarray) -> np.ndarray:
        if self.kind == "outside_ball":
            return dist_sq_sum > self.delta**2
        if self.kind == "far_field":
            return min_dist >= self.delta
        # annulus: outside the ball but with some coordinate within delta
        return (dist_sq_sum >= self.delta**2) & (min_dist < self.delta)


def _shared_grid(fs) -> Field:
    first = fs[0]
    for f in fs[1:]:
        same = (
            f.resolution == first.resolution
            and f.box.n == first.box.n
            and abs(f.box.half_width - first.box.half_width) < 1e-12
            and np.allclose(f.box.center, first.box.center, atol=1e-12)
        )
        if not same:
            raise DomainError("inputs must share one grid")
    return first


def _require_inside(f: Field, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not f.box.contains_point(x, tol=1e-12):
        raise DomainError(f"evaluation point {x} outside the grid box")
    return x


# ---------------------------------------------------------------------------
# approximation-to-identity application


def apply_approx_identity(aid: ApproxIdentity, t: float, f: Field) -> Field:
    """A_t f sampled on f's grid; meta records mass ratio and warnings."""
    if t <= 0:
        raise DomainError("t must be positive")
    if aid.n != f.n:
        raise DomainError("identity and field dimension mismatch")
    coords = f.coords()
    flat = f.samples.ravel()
    n_nodes = coords.shape[0]
    out = np.empty(n_nodes)
    chunk = max(1, int(2e6) // n_nodes)
    for start in range(0, n_nodes, chunk):
        stop = min(n_nodes, start + chunk)
        block = aid.kernel(t, coords[start:stop, None, :], coords[None, :, :])
        out[start:stop] = block @ flat
    out *= f.node_weight
    meta = {}
    total_in = f.total()
    total_out = float(out.sum() * f.node_weight)
    if total_in != 0.0:
        meta["mass_ratio"] = total_out / total_in
    if aid.scale(t) < f.spacing / 2.0:
        meta["resolution_warning"] = (
            f"identity scale {aid.scale(t):.3g} below half the grid spacing {f.spacing:.3g}"
        )
    return f.with_samples(out.reshape(f.samples.shape), meta=meta)


# ---------------------------------------------------------------------------
# inner integrals


def _factor_table(kernel: KernelFamily, v_arr: np.ndarray, R: np.ndarray) -> np.ndarray:
    """factor(v, r) on the product of v nodes and displacement rows -> (nv, N)."""
    nv, N = len(v_arr), R.shape[0]
    v_big = np.repeat(v_arr, N)
    R_big = np.tile(R, (nv, 1))
    return np.asarray(kernel.factor(v_big, R_big)).reshape(nv, N)


def _inner_series_separable(kernel, fs, x, v_arr):
    grid = fs[0]
    nodes = grid.coords()
    h = grid.node_weight
    inner = np.ones(len(v_arr))
    for f in fs:
        table = _factor_table(kernel, v_arr, x[None, :] - nodes)
        inner = inner * (table @ (f.samples.ravel() * h))
    return inner


def _product_grid(kernel, fs, x):
    """Flattened m-fold product grid bookkeeping for one evaluation point."""
    grid = fs[0]
    nodes = grid.coords()
    n1 = nodes.shape[0]
    m = kernel.m
    idx = np.meshgrid(*([np.arange(n1)] * m), indexing="ij")
    idx = [ix.ravel() for ix in idx]
    dist = np.sqrt(np.square(x[None, :] - nodes).sum(axis=-1))
    dist_sq_sum = np.zeros(n1**m)
    min_dist = np.full(n1**m, np.inf)
    F = np.ones(n1**m)
    h = grid.node_weight
    for j, f in enumerate(fs):
        dj = dist[idx[j]]
        dist_sq_sum += dj * dj
        min_dist = np.minimum(min_dist, dj)
        F *= f.samples.ravel()[idx[j]] * h
    if kernel.prefactor is not None:
        Y = np.stack([nodes[idx[j]] for j in range(m)], axis=1)
        F *= np.asarray(kernel.prefactor(x, Y))
    return nodes, idx, F, dist_sq_sum, min_dist


def _weights_per_v(kernel, fs, x, v_arr, nodes, idx):
    """Per-scale kernel tables K_j so that W_v = prod_j K_j[v, idx_j]."""
    if kernel.factor is not None:
        return [_factor_table(kernel, v_arr, x[None, :] - nodes)] * kernel.m
    return None


def _inner_series_generic(kernel, fs, x, v_arr):
    nodes, idx, F, _, _ = _product_grid(kernel, fs, x)
    tables = _weights_per_v(kernel, fs, x, v_arr, nodes, idx)
    inner = np.empty(len(v_arr))
    m = kernel.m
    if tables is not None:
        for iv in range(len(v_arr)):
            w = F.copy()
            for j in range(m):
                w *= tables[j][iv, idx[j]]
            inner[iv] = w.sum()
    else:
        Y = np.stack([nodes[idx[j]] for j in range(m)], axis=1)
        for iv, v in enumerate(v_arr):
            inner[iv] = float(np.dot(kernel.eval(float(v), x, Y), F))
    return inner


def _inner_series(kernel, fs, x, cfg):
    v_arr, w = cfg.nodes()
    if kernel.separable:
        return v_arr, w, _inner_series_separable(kernel, fs, x, v_arr)
    return v_arr, w, _inner_series_generic(kernel, fs, x, v_arr)


# ---------------------------------------------------------------------------
# square function


def square_function(kernel: KernelFamily, fs, x, cfg: SquareFunctionConfig) -> float:
    """T(f_1..f_m)(x): the L^2(dv/v) norm of the inner multilinear integral."""
    fs = list(fs)
    if len(fs) != kernel.m:
        raise DomainError(f"kernel expects {kernel.m} inputs, got {len(fs)}")
    grid = _shared_grid(fs)
    if grid.n != kernel.n:
        raise DomainError("kernel and grid dimension mismatch")
    x = _require_inside(grid, x)
    _, w, inner = _inner_series(kernel, fs, x, cfg)
    return math.sqrt(max(0.0, float(np.dot(w, np.square(inner)))))


def square_function_field(kernel: KernelFamily, fs, cfg: SquareFunctionConfig) -> Field:
    """T(f..)(x) at every grid node; fast paths for product-structure kernels."""
    fs = list(fs)
    grid = _shared_grid(fs)
    v_arr, w = cfg.nodes()
    nodes = grid.coords()
    n_nodes = nodes.shape[0]
    h = grid.node_weight

    if kernel.separable and grid.n == 1:
        # difference table: x_i - y_j takes 2 res - 1 values on a shared axis
        res = grid.resolution
        diffs = (np.arange(-(res - 1), res) * grid.spacing)[:, None]
        table = _factor_table(kernel, v_arr, diffs)  # (nv, 2res-1)
        take = (np.arange(res)[:, None] - np.arange(res)[None, :]) + (res - 1)
        acc = np.zeros(res)
        peak, peak_iv = -1.0, 0
        flats = [f.samples.ravel() * h for f in fs]
        for iv in range(len(v_arr)):
            conv = table[iv][take]  # (res, res) convolution matrix
            inner = np.ones(res)
            for flat in flats:
                inner = inner * (conv @ flat)
            acc += w[iv] * np.square(inner)
            amp = float(np.max(np.abs(inner)))
            if amp > peak:
                peak, peak_iv = amp, iv
        meta = {"peak_scale": float(v_arr[peak_iv])}
        meta["boundary_loss"] = _boundary_loss(kernel, grid, float(v_arr[peak_iv]))
        return grid.with_samples(np.sqrt(np.maximum(acc, 0.0)), meta=meta)

    values = np.empty(n_nodes)
    for i in range(n_nodes):
        values[i] = square_function(kernel, fs, nodes[i], cfg)
    return grid.with_samples(values.reshape(grid.samples.shape))


def _boundary_loss(kernel, grid: Field, v: float) -> float:
    """Fraction of one-slot kernel mass outside the box at the peak scale."""
    if kernel.factor is None:
        return math.nan
    wide = np.linspace(-60.0 * max(v, grid.spacing), 60.0 * max(v, grid.spacing), 8193)
    vals = np.abs(np.asarray(kernel.factor(v, wide[:, None])))
    total = float(np.trapezoid(vals, wide))
    if total == 0.0:
        return 0.0
    inside = (wide >= -grid.box.half_width) & (wide <= grid.box.half_width)
    kept = float(np.trapezoid(np.where(inside, vals, 0.0), wide))
    return max(0.0, 1.0 - kept / total)


# ---------------------------------------------------------------------------
# truncated and maximal variants


def truncated_square_function(kernel: KernelFamily, fs, x, geom: TruncationGeometry,
                              cfg: SquareFunctionConfig) -> float:
    """Square function with the spatial integral restricted to ``geom``."""
    fs = list(fs)
    grid = _shared_grid(fs)
    x = _require_inside(grid, x)
    v_arr, w = cfg.nodes()
    nodes, idx, F, dist_sq_sum, min_dist = _product_grid(kernel, fs, x)
    keep = geom.mask(dist_sq_sum, min_dist)
    if not np.any(keep):
        return 0.0
    sel = np.nonzero(keep)[0]
    F_sel = F[sel]
    tables = _weights_per_v(kernel, fs, x, v_arr, nodes, idx)
    idx_sel = [ix[sel] for ix in idx]
    total = 0.0
    if tables is not None:
        for iv in range(len(v_arr)):
            wv = F_sel.copy()
            for j in range(kernel.m):
                wv *= tables[j][iv, idx_sel[j]]
            total += w[iv] * wv.sum() ** 2
    else:
        Y = np.stack([nodes[ix] for ix in idx_sel], axis=1)
        for iv, v in enumerate(v_arr):
            total += w[iv] * float(np.dot(kernel.eval(float(v), x, Y), F_sel)) ** 2
    return math.sqrt(max(0.0, total))


def _maximal_table(kernel, fs, x, cfg, delta_grid):
    """(star, starstar) from one suffix-sum sweep over the ordered grid."""
    fs = list(fs)
    grid = _shared_grid(fs)
    x = _require_inside(grid, x)
    v_arr, w = cfg.nodes()
    deltas = np.asarray(delta_grid, dtype=float)
    if deltas.size == 0:
        raise DomainError("delta grid must be nonempty")
    nodes, idx, F, dist_sq_sum, _ = _product_grid(kernel, fs, x)
    order = np.argsort(dist_sq_sum, kind="stable")
    rho_sorted = dist_sq_sum[order]
    # first index with rho strictly above delta^2: the truncation survives there
    thr = np.searchsorted(rho_sorted, deltas**2, side="right")
    tables = _weights_per_v(kernel, fs, x, v_arr, nodes, idx)
    idx_sorted = [ix[order] for ix in idx]
    F_sorted = F[order]
    n_tuple = F_sorted.shape[0]
    star_acc = 0.0
    ss_acc = np.zeros(len(deltas))
    suffix = np.empty(n_tuple + 1)
    Y_sorted = None
    if tables is None:
        Y_sorted = np.stack([nodes[ix] for ix in idx_sorted], axis=1)
    for iv in range(len(v_arr)):
        if tables is not None:
            wv = F_sorted.copy()
            for j in range(kernel.m):
                wv *= tables[j][iv, idx_sorted[j]]
        else:
            wv = kernel.eval(float(v_arr[iv]), x, Y_sorted) * F_sorted
        suffix[n_tuple] = 0.0
        suffix[:n_tuple] = np.cumsum(wv[::-1])[::-1]
        s_row = suffix[thr]
        sq = np.square(s_row)
        star_acc += w[iv] * float(sq.max())
        ss_acc += w[iv] * sq
    star = math.sqrt(max(0.0, star_acc))
    starstar = math.sqrt(max(0.0, float(ss_acc.max())))
    return star, starstar


def maximal_square_function_pair(kernel, fs, x, cfg, delta_grid=None):
    """Both maximal variants at one point, from the same truncation table."""
    if delta_grid is None:
        delta_grid = build_delta_grid(_shared_grid(list(fs)), cfg)
    return _maximal_table(kernel, fs, x, cfg, delta_grid)


def maximal_square_function(kernel, fs, x, variant: str, cfg, delta_grid=None) -> float:
    """Maximal square function; ``star`` puts the sup inside the scale
    integral, ``starstar`` outside.  starstar <= star always."""
    star, starstar = maximal_square_function_pair(kernel, fs, x, cfg, delta_grid)
    if variant == "star":
        return star
    if variant == "starstar":
        return starstar
    raise DomainError(f"unknown maximal variant '{variant}'")


def maximal_square_function_field(kernel, fs, variant, cfg, delta_grid=None):
    """Maximal square function at every node (pair of fields for both=True)."""
    fs = list(fs)
    grid = _shared_grid(fs)
    if delta_grid is None:
        delta_grid = build_delta_grid(grid, cfg)
    nodes = grid.coords()
    star = np.empty(nodes.shape[0])
    starstar = np.empty(nodes.shape[0])
    for i in range(nodes.shape[0]):
        star[i], starstar[i] = _maximal_table(kernel, fs, nodes[i], cfg, delta_grid)
    shape = grid.samples.shape
    if variant == "star":
        return grid.with_samples(star.reshape(shape))
    if variant == "starstar":
        return grid.with_samples(starstar.reshape(shape))
    if variant == "both":
        return grid.with_samples(star.reshape(shape)), grid.with_samples(starstar.reshape(shape))
    raise DomainError(f"unknown maximal variant '{variant}'")


# ---------------------------------------------------------------------------
# result streaming


def write_operator_csv(path, rows, n: int) -> None:
    """Stream evaluation rows: x1..xn, operator_id, value, error estimate."""
    header = ",".join(f"x{d+1}" for d in range(n)) + ",operator_id,value,quadrature_error_estimate"
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for x, op_id, value, err in rows:
            coords = ",".join(f"{c:.17g}" for c in np.atleast_1d(x))
            fh.write(f"{coords},{op_id},{value:.17g},{err:.6g}\n")
