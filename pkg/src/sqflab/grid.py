"""Uniform grids, dyadic cube trees, and the two quadrature primitives.

Scalar fields are sampled on cell-centered uniform grids over axis-aligned
cubes.  Resolutions are powers of two so that every dyadic cube is a union
of whole cells: cube averages are then exact sample means and the
stopping-time machinery never fights the quadrature.  Spatial integrals are
midpoint sums with one weight per node; the dv/v integral is a composite
trapezoid rule in log coordinates.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, EvaluationError

__all__ = [
    "Box",
    "Field",
    "DyadicTree",
    "integrate_field",
    "log_scale_nodes",
    "log_scale_integral",
    "enumerate_dyadic_cubes",
    "write_field_csv",
    "read_field_csv",
]

_ALIGN_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned cube: center, half side length, dimension."""

    center: np.ndarray
    half_width: float
    n: int

    def __post_init__(self):
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        object.__setattr__(self, "center", center)
        if self.n < 1 or center.shape != (self.n,):
            raise DomainError(f"box dimension {self.n} does not match center {center}")
        if not (self.half_width > 0):
            raise DomainError(f"half_width must be positive, got {self.half_width}")

    @classmethod
    def cube(cls, center, half_width, n=None):
        c = np.atleast_1d(np.asarray(center, dtype=float))
        if c.size == 1 and n is not None and n > 1:
            c = np.full(n, float(c[0]))
        return cls(center=c, half_width=float(half_width), n=len(c))

    @property
    def lo(self) -> np.ndarray:
        return self.center - self.half_width

    @property
    def hi(self) -> np.ndarray:
        return self.center + self.half_width

    @property
    def side(self) -> float:
        return 2.0 * self.half_width

    @property
    def volume(self) -> float:
        return self.side**self.n

    @property
    def diameter(self) -> float:
        return self.side * math.sqrt(self.n)

    def contains_point(self, x, tol=0.0) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def contains_box(self, other: "Box", tol=None) -> bool:
        tol = _ALIGN_TOL * self.half_width if tol is None else tol
        return bool(
            np.all(other.lo >= self.lo - tol) and np.all(other.hi <= self.hi + tol)
        )

    def children(self) -> list["Box"]:
        """The 2**n congruent dyadic children."""
        hw = self.half_width / 2.0
        out = []
        for signs in itertools.product((-1.0, 1.0), repeat=self.n):
            out.append(Box(self.center + hw * np.array(signs), hw, self.n))
        return out

    def dilate(self, factor: float) -> "Box":
        return Box(self.center.copy(), self.half_width * factor, self.n)


def _is_power_of_two(k: int) -> bool:
    return k >= 1 and (k & (k - 1)) == 0


@dataclass(frozen=True, eq=False)
class Field:
    """Scalar samples on the cell-centered grid of a box.

    ``samples`` has shape ``(resolution,) * n``; node i along an axis sits at
    ``lo + (i + 1/2) * spacing``.  Every node carries the same quadrature
    weight ``spacing**n``.  Instances are immutable; ``meta`` carries
    diagnostics and does not participate in any computation.
    """

    box: Box
    resolution: int
    samples: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not _is_power_of_two(self.resolution):
            raise DomainError(f"resolution must be a power of two, got {self.resolution}")
        samples = np.asarray(self.samples, dtype=float)
        expect = (self.resolution,) * self.box.n
        if samples.shape != expect:
            raise DomainError(f"samples shape {samples.shape}, expected {expect}")
        samples = samples.copy()
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def n(self) -> int:
        return self.box.n

    @property
    def spacing(self) -> float:
        return self.box.side / self.resolution

    @property
    def node_weight(self) -> float:
        return self.spacing**self.n

    def axis_nodes(self, d: int = 0) -> np.ndarray:
        h = self.spacing
        return self.box.lo[d] + h * (np.arange(self.resolution) + 0.5)

    def coords(self) -> np.ndarray:
        """All node coordinates, row-major, shape (resolution**n, n)."""
        axes = [self.axis_nodes(d) for d in range(self.n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def total(self) -> float:
        return float(self.samples.sum() * self.node_weight)

    def with_samples(self, samples, meta=None) -> "Field":
        return Field(self.box, self.resolution, samples, dict(meta or {}))

    @classmethod
    def from_function(cls, box: Box, resolution: int, fn) -> "Field":
        blank = cls.zeros(box, resolution)
        vals = np.asarray(fn(blank.coords()), dtype=float)
        return cls(box, resolution, vals.reshape((resolution,) * box.n))

    @classmethod
    def zeros(cls, box: Box, resolution: int) -> "Field":
        return cls(box, resolution, np.zeros((resolution,) * box.n))

    def window(self, region: Box) -> tuple:
        """Index slices of the nodes inside ``region`` (half-open per axis)."""
        if region.n != self.n:
            raise DomainError("region dimension mismatch")
        tol = _ALIGN_TOL * self.box.half_width
        if not self.box.contains_box(region, tol=tol):
            raise DomainError("region extends outside the field's box")
        h = self.spacing
        slices = []
        for d in range(self.n):
            a = (region.lo[d] - self.box.lo[d]) / h - 0.5
            b = (region.hi[d] - self.box.lo[d]) / h - 0.5
            i0 = max(0, math.ceil(a - _ALIGN_TOL))
            i1 = min(self.resolution, math.ceil(b - _ALIGN_TOL))
            slices.append(slice(i0, max(i0, i1)))
        return tuple(slices)


@dataclass(frozen=True, eq=False)
class DyadicTree:
    """Dyadic cube hierarchy rooted at a box, capped at ``max_depth``."""

    root: Box
    max_depth: int

    def __post_init__(self):
        if self.max_depth < 0:
            raise DomainError("max_depth must be nonnegative")


def integrate_field(f: Field, region: Box) -> float:
    """Midpoint-rule integral of ``f`` over ``region`` (must lie in f.box)."""
    sl = f.window(region)
    return float(f.samples[sl].sum() * f.node_weight)


def log_scale_nodes(v_min: float, v_max: float, points_per_decade: int):
    """Trapezoid nodes and weights for integrals against dv/v.

    Returns (v, w) with sum(w * F(v)) approximating the integral of F dv/v
    over [v_min, v_max] under the substitution v = e^u.
    """
    if not (0.0 < v_min < v_max):
        raise DomainError(f"need 0 < v_min < v_max, got [{v_min}, {v_max}]")
    if points_per_decade < 4:
        raise DomainError("points_per_decade must be at least 4")
    decades = math.log10(v_max / v_min)
    npts = max(2, int(round(decades * points_per_decade)) + 1)
    u = np.linspace(math.log(v_min), math.log(v_max), npts)
    du = u[1] - u[0]
    w = np.full(npts, du)
    w[0] = w[-1] = du / 2.0
    return np.exp(u), w


def log_scale_integral(F, v_min: float, v_max: float, points_per_decade: int) -> float:
    """Integral of F(v) dv/v over [v_min, v_max], composite trapezoid in log v."""
    v, w = log_scale_nodes(v_min, v_max, points_per_decade)
    vals = np.empty_like(v)
    for i, vi in enumerate(v):
        fi = float(F(vi))
        if not math.isfinite(fi):
            raise EvaluationError(f"integrand returned non-finite value at v={vi}", v=vi)
        vals[i] = fi
    return float(np.dot(w, vals))


def enumerate_dyadic_cubes(tree: DyadicTree, depth: int) -> list[Box]:
    """The 2**(n*depth) cubes of one generation, row-major order."""
    if not (0 <= depth <= tree.max_depth):
        raise DomainError(f"depth {depth} outside [0, {tree.max_depth}]")
    root = tree.root
    k = 2**depth
    hw = root.half_width / k
    offsets = [root.lo[d] + hw * (2 * np.arange(k) + 1) for d in range(root.n)]
    cubes = []
    for idx in itertools.product(range(k), repeat=root.n):
        center = np.array([offsets[d][i] for d, i in enumerate(idx)])
        cubes.append(Box(center, hw, root.n))
    return cubes


def write_field_csv(f: Field, path) -> None:
    """CSV dump: header x1..xn,value; rows row-major; 17 significant digits."""
    header = ",".join(f"x{d+1}" for d in range(f.n)) + ",value"
    coords = f.coords()
    flat = f.samples.ravel()
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row, val in zip(coords, flat):
            cols = [f"{c:.17g}" for c in row] + [f"{val:.17g}"]
            fh.write(",".join(cols) + "\n")


def read_field_csv(path) -> Field:
    """Inverse of :func:`write_field_csv`; reconstructs box and resolution."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        n = len(header) - 1
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = np.array([[float(c) for c in r] for r in rows])
    count = data.shape[0]
    res = int(round(count ** (1.0 / n)))
    if res**n != count:
        raise DomainError(f"row count {count} is not a perfect {n}-th power")
    coords, values = data[:, :n], data[:, n]
    h = None
    for d in range(n):
        uniq = np.unique(coords[:, d])
        if len(uniq) != res:
            raise DomainError("grid coordinates are not a tensor product")
        if h is None:
            h = uniq[1] - uniq[0] if res > 1 else 2 * uniq[0]
    lo = coords.min(axis=0) - h / 2.0
    hi = coords.max(axis=0) + h / 2.0
    box = Box((lo + hi) / 2.0, float((hi[0] - lo[0]) / 2.0), n)
    return Field(box, res, values.reshape((res,) * n))
