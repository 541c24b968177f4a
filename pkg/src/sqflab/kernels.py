"""Kernel families, approximations to the identity, and condition auditors.

Three built-in families drive the harness:

* ``smooth``     -- a product of dilated odd-Gaussian profiles; satisfies the
  size and Hoelder-smoothness bounds on the L^2(dv/v) norm with exponent 1
  (verified by the auditors, never assumed).
* ``broken``     -- the smooth family times ``(sum_j |x-y_j|)^{1/2}``, so its
  size decay is half an order too slow; negative-control material.
* ``nonsmooth``  -- the smooth family paired with a heat-profile
  approximation to the identity and exercised only through the composed
  kernels ``K^{(i)}_{t,v}``, i.e. the assumption-auditing path.

Auditors sample admissible configurations, measure the implied constants,
and judge them by exponent fits plus stability under range extension:
finite sampling cannot prove a supremum, but a constant that keeps growing
when the sample range doubles is the practical signature of an unbounded
one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._stats import decile_table, fit_constant, loglog_slope
from .errors import AccuracyError, DomainError, PreconditionError
from .grid import log_scale_nodes

__all__ = [
    "KernelFamily",
    "ApproxIdentity",
    "ComposedKernel",
    "ZQuadConfig",
    "ComposedValue",
    "KernelSampleConfig",
    "HSampleConfig",
    "HSample",
    "ConditionReport",
    "CZConditionAudit",
    "standard_bump",
    "smooth_family",
    "broken_family",
    "heat_identity",
    "nonsmooth_composed",
    "make_kernel_family",
    "eval_composed_kernel",
    "audit_cz_conditions",
    "audit_nonsmooth_assumption",
]


# ---------------------------------------------------------------------------
# kernel families


@dataclass(frozen=True, eq=False)
class KernelFamily:
    """Evaluator for K_v(x, y_1..y_m) plus regularity metadata.

    ``evaluator(v, x, Y)`` takes ``v`` as a scalar or length-N array,
    ``x`` of shape (n,) or (N, n), and ``Y`` of shape (N, m, n); it returns
    the N kernel values.  ``factor``/``prefactor`` expose product structure
    (``K_v = prefactor(x, Y) * prod_j factor(v, x - y_j)``) so the operators
    can pick fast evaluation paths; either may be absent.
    """

    m: int
    n: int
    label: str
    evaluator: object
    factor: object = None
    prefactor: object = None
    size_constant: float | None = None
    gamma: float = 1.0
    B: float = 2.0
    epsilon: float = 1.0

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise DomainError("kernel needs m >= 1 and n >= 1")
        if not (0.0 < self.gamma <= 1.0):
            raise DomainError("gamma must lie in (0, 1]")
        if not (self.B > 1.0):
            raise DomainError("B must exceed 1")

    def eval(self, v, x, Y) -> np.ndarray:
        """Kernel values; v scalar or (N,), x (n,) or (N,n), Y (N,m,n)."""
        Y = np.asarray(Y, dtype=float)
        if Y.ndim == 2:
            Y = Y[None]
        return np.asarray(self.evaluator(v, np.asarray(x, dtype=float), Y))

    @property
    def separable(self) -> bool:
        return self.factor is not None and self.prefactor is None


def _odd_gaussian(u: np.ndarray) -> np.ndarray:
    # u has shape (..., n); scalarized as (sum of coordinates) * gaussian
    return u.sum(axis=-1) * np.exp(-np.square(u).sum(axis=-1))


def _dilated_profile(v, R: np.ndarray, n: int) -> np.ndarray:
    """v^{-n} psi(r / v) for displacement rows R of shape (N, n)."""
    v = np.asarray(v, dtype=float)
    if v.ndim == 0:
        return v ** (-n) * _odd_gaussian(R / v)
    return v ** (-n) * _odd_gaussian(R / v[:, None])


def smooth_family(m: int, n: int = 1) -> KernelFamily:
    """Product of dilated odd-Gaussian profiles, one per input slot."""

    def factor(v, R):
        return _dilated_profile(v, np.asarray(R, dtype=float), n)

    def evaluator(v, x, Y):
        x = np.asarray(x, dtype=float)
        R = (x[..., None, :] if x.ndim == 2 else x) - Y  # (N, m, n)
        out = factor(v, R[:, 0, :])
        for j in range(1, m):
            out = out * factor(v, R[:, j, :])
        return out

    return KernelFamily(m=m, n=n, label="smooth", evaluator=evaluator, factor=factor)


def broken_family(m: int, n: int = 1) -> KernelFamily:
    """Smooth family damped by (sum_j |x-y_j|)^{1/2}: size decay too slow."""
    base = smooth_family(m, n)

    def prefactor(x, Y):
        x = np.asarray(x, dtype=float)
        R = (x[..., None, :] if x.ndim == 2 else x) - np.asarray(Y, dtype=float)
        sep = np.sqrt(np.square(R).sum(axis=-1)).sum(axis=-1)
        return np.sqrt(sep)

    def evaluator(v, x, Y):
        return prefactor(x, Y) * base.evaluator(v, x, Y)

    return KernelFamily(
        m=m, n=n, label="broken", evaluator=evaluator,
        factor=base.factor, prefactor=prefactor,
    )


def make_kernel_family(label: str, m: int, n: int = 1) -> KernelFamily:
    """Resolve a built-in family label.

    ``nonsmooth`` resolves to the smooth base family: the operator itself
    always integrates against K_v, and the heat-identity pairing only enters
    through :func:`nonsmooth_composed` and the assumption auditors.
    """
    if label == "smooth":
        return smooth_family(m, n)
    if label == "broken":
        return broken_family(m, n)
    if label == "nonsmooth":
        return replace(smooth_family(m, n), label="nonsmooth")
    raise DomainError(f"unknown kernel family '{label}'")


# ---------------------------------------------------------------------------
# approximation to the identity


@dataclass(frozen=True, eq=False)
class ApproxIdentity:
    """Integral-operator kernels a_t(x, y) = t^{-n/s} h(|x-y| / t^{1/s})."""

    s: float
    eta: float
    n: int
    profile: object
    label: str = "identity"

    def __post_init__(self):
        if self.s <= 0 or self.eta <= 0:
            raise DomainError("s and eta must be positive")

    def scale(self, t: float) -> float:
        return t ** (1.0 / self.s)

    def kernel(self, t: float, x, Z) -> np.ndarray:
        """a_t(x, z) for rows Z of shape (N, n); x may be (n,) or (N, n)."""
        x = np.asarray(x, dtype=float)
        Z = np.asarray(Z, dtype=float)
        r = np.sqrt(np.square(x - Z).sum(axis=-1))
        return t ** (-self.n / self.s) * self.profile(r / self.scale(t))

    def measured_decay_constant(self, eta_prime: float, t_values, r_values) -> float:
        """max over samples of a_t(x,y) / [t^{-n/s} (1 + t^{-1/s} r)^{-n-eta'}]."""
        best = 0.0
        for t in t_values:
            r = np.asarray(r_values, dtype=float)
            lhs = t ** (-self.n / self.s) * self.profile(r / self.scale(t))
            rhs = t ** (-self.n / self.s) * (1.0 + r / self.scale(t)) ** (-self.n - eta_prime)
            best = max(best, float(np.max(lhs / rhs)))
        return best


def heat_identity(n: int = 1) -> ApproxIdentity:
    """Heat-profile identity: h(r) = (4 pi)^{-n/2} exp(-r^2/4), s = 2."""
    c = (4.0 * math.pi) ** (-n / 2.0)

    def profile(r):
        return c * np.exp(-np.square(r) / 4.0)

    return ApproxIdentity(s=2.0, eta=1.0, n=n, profile=profile, label="heat")


def standard_bump(u) -> np.ndarray:
    """Continuous bump supported in [-1, 1]: max(0, 1 - |u|)."""
    return np.maximum(0.0, 1.0 - np.abs(np.asarray(u, dtype=float)))


# ---------------------------------------------------------------------------
# composed kernels


@dataclass(frozen=True)
class ZQuadConfig:
    """Quadrature for the convolution defining a composed kernel."""

    r_cut: float = 12.0  # integration ball radius in units of t^{1/s}
    nodes: int = 128  # midpoint nodes per axis before refinement
    tol: float = 1e-3  # relative drift allowed between nz and 2 nz


@dataclass(frozen=True)
class ComposedValue:
    value: float
    tail_bound: float


@dataclass(frozen=True, eq=False)
class ComposedKernel:
    """A base family composed with an identity in one slot.

    Slot 0 convolves the x-argument: K^{(0)}_{t,v}(x, y..) =
    integral of K_v(z, y..) a_t(x, z) dz.  Slot i >= 1 convolves the i-th
    input argument instead.  ``epsilon`` is the exponent the composed kernel
    is audited against.
    """

    base: KernelFamily
    identity: ApproxIdentity
    slot: int = 0
    bump: object = standard_bump
    epsilon: float = 1.0
    quad: ZQuadConfig = field(default_factory=ZQuadConfig)

    def __post_init__(self):
        if not (0 <= self.slot <= self.base.m):
            raise DomainError(f"slot must lie in 0..{self.base.m}")
        if self.base.n != self.identity.n:
            raise DomainError("base kernel and identity dimension mismatch")

    def _z_nodes(self, t: float, center: np.ndarray, nodes: int):
        n = self.base.n
        radius = self.quad.r_cut * self.identity.scale(t)
        axes = [
            center[d] - radius + (2 * np.arange(nodes) + 1) * radius / nodes
            for d in range(n)
        ]
        if n == 1:
            Z = axes[0][:, None]
        else:
            mesh = np.meshgrid(*axes, indexing="ij")
            Z = np.stack([m.ravel() for m in mesh], axis=-1)
            Z = Z[np.square(Z - center).sum(axis=-1) <= radius**2]
        dz = (2 * radius / nodes) ** n
        return Z, dz

    def _convolve(self, t, v_arr, x, Y, nodes):
        x = np.asarray(x, dtype=float)
        Y = np.asarray(Y, dtype=float)
        nv = len(v_arr)
        center = x if self.slot == 0 else Y[self.slot - 1]
        Z, dz = self._z_nodes(t, center, nodes)
        nz = Z.shape[0]
        a = self.identity.kernel(t, center, Z) * dz
        # one batched kernel call over the (z, v) product
        v_big = np.tile(v_arr, nz)
        if self.slot == 0:
            X_big = np.repeat(Z, nv, axis=0)
            Y_big = np.broadcast_to(Y, (nz * nv,) + Y.shape)
        else:
            X_big = np.broadcast_to(x, (nz * nv, x.shape[-1]))
            Y_big = np.tile(Y, (nz * nv, 1, 1))
            Y_big[:, self.slot - 1, :] = np.repeat(Z, nv, axis=0)
        K = self.base.eval(v_big, X_big, Y_big).reshape(nz, nv)
        values = a @ K
        mass_out = max(0.0, 1.0 - float(a.sum()))
        k_edge = float(np.max(np.abs(K[[0, -1], :]))) if nz else 0.0
        return values, mass_out * k_edge

    def eval_refined(self, t: float, v_arr, x, Y):
        """Coarse and refined composed-kernel values -> (coarse, fine, tail)."""
        if t <= 0:
            raise DomainError("t must be positive")
        v_arr = np.atleast_1d(np.asarray(v_arr, dtype=float))
        coarse, _ = self._convolve(t, v_arr, x, Y, self.quad.nodes)
        fine, tail = self._convolve(t, v_arr, x, Y, 2 * self.quad.nodes)
        return coarse, fine, tail

    def eval_many(self, t: float, v_arr, x, Y, validate: bool = True):
        """Composed kernel over an array of v at one geometry -> (values, tail)."""
        coarse, fine, tail = self.eval_refined(t, v_arr, x, Y)
        if validate:
            scale = float(np.max(np.abs(fine))) if fine.size else 0.0
            if scale > 0.0:
                drift = np.abs(fine - coarse) / np.maximum(np.abs(fine), 1e-3 * scale)
                bad = drift > self.quad.tol
                if np.any(bad & (np.abs(fine - coarse) > 1e-12 * scale)):
                    raise AccuracyError(
                        f"composed-kernel quadrature drift {float(drift.max()):.2e} "
                        f"exceeds {self.quad.tol} at t={t}"
                    )
        return fine, tail


def eval_composed_kernel(ck: ComposedKernel, t: float, v: float, x, ys,
                         quad: ZQuadConfig | None = None) -> ComposedValue:
    """Single composed-kernel value with its reported quadrature tail bound."""
    if quad is not None:
        ck = replace(ck, quad=quad)
    Y = np.asarray(ys, dtype=float).reshape(ck.base.m, ck.base.n)
    values, tail = ck.eval_many(t, [float(v)], np.asarray(x, dtype=float), Y)
    return ComposedValue(value=float(values[0]), tail_bound=float(tail))


def nonsmooth_composed(m: int, n: int = 1, slot: int = 0) -> ComposedKernel:
    """The built-in nonsmooth pairing: smooth base + heat identity."""
    return ComposedKernel(base=smooth_family(m, n), identity=heat_identity(n), slot=slot)


# ---------------------------------------------------------------------------
# condition reports


@dataclass
class ConditionReport:
    """Outcome of auditing one kernel condition on sampled configurations."""

    condition: str
    sample_count: int
    measured_constant: float
    fitted_exponent: float
    nominal_exponent: float
    stability: float
    verdict: str
    decile_ratios: list
    details: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "condition": self.condition,
            "sample_count": self.sample_count,
            "measured_constant": self.measured_constant,
            "fitted_exponent": self.fitted_exponent,
            "nominal_exponent": self.nominal_exponent,
            "stability": self.stability,
            "verdict": self.verdict,
            "decile_ratios": list(self.decile_ratios),
            "details": {k: v for k, v in self.details.items()},
        }


@dataclass
class CZConditionAudit:
    """Joint audit of the size bound and both smoothness bounds."""

    size: ConditionReport
    smooth_x: ConditionReport
    smooth_y: ConditionReport
    verdict: str

    def reports(self):
        return [self.size, self.smooth_x, self.smooth_y]


# ---------------------------------------------------------------------------
# sampling configurations


@dataclass(frozen=True)
class KernelSampleConfig:
    """Sampling plan for the size/smoothness audits.

    The first half of the samples draws separations from [r_min, r_max];
    the second half extends the range to 2 r_max, which is what the
    stability factor is measured against.
    """

    count: int = 96
    r_min: float = 0.05
    r_max: float = 4.0
    offsets_per_sample: int = 5
    seed: int = 0
    v_min: float = 1e-6
    v_max: float = 1e6
    points_per_decade: int = 32


@dataclass(frozen=True)
class HSampleConfig:
    """Sampling plan for the composed-kernel assumption audits."""

    count: int = 200
    r_min: float = 0.3
    r_max: float = 3.0
    seed: int = 0
    t_low: float = 0.02  # admissible t spans [t_low, t_high] x the cap
    t_high: float = 0.95
    v_min: float = 1e-5
    v_max: float = 1e5
    points_per_decade: int = 24
    slope_geometries: int = 4
    slope_points: int = 6


@dataclass(frozen=True)
class HSample:
    """One admissible configuration for an assumption audit."""

    x: np.ndarray
    Y: np.ndarray
    t: float
    x_prime: np.ndarray | None = None
    slot: int = 1


# ---------------------------------------------------------------------------
# audit: size and smoothness conditions


def _sample_rng(seed: int, stream: int, i: int):
    return np.random.default_rng(np.random.SeedSequence([seed, stream, i]))


def _unit_vectors(rng, count: int, n: int) -> np.ndarray:
    v = rng.standard_normal((count, n))
    norm = np.sqrt(np.square(v).sum(axis=-1, keepdims=True))
    return v / np.maximum(norm, 1e-300)


def _geometry(rng, m: int, n: int, rho: float):
    """Random configuration with slot separations within [0.4, 1] x rho.

    The y-points are kept pairwise separated by at least 0.3 rho so that the
    composed-kernel quadrature never has to resolve a near-coincident pair.
    """
    x = rng.uniform(-1.0, 1.0, size=n)
    for _ in range(64):
        dirs = _unit_vectors(rng, m, n)
        radii = rho * rng.uniform(0.4, 1.0, size=m)
        Y = x[None, :] - radii[:, None] * dirs
        if m == 1:
            return x, Y
        gaps = [
            float(np.sqrt(np.square(Y[i] - Y[j]).sum()))
            for i in range(m)
            for j in range(i + 1, m)
        ]
        if min(gaps) >= 0.3 * rho:
            return x, Y
    return x, Y


def _sqrt_dv_norm(values: np.ndarray, w: np.ndarray) -> float:
    return float(math.sqrt(max(0.0, float(np.dot(w, np.square(values))))))


def _separation(x, Y) -> float:
    return float(np.sqrt(np.square(x[None, :] - Y).sum(axis=-1)).sum())


def audit_cz_conditions(kernel: KernelFamily, samples: KernelSampleConfig) -> CZConditionAudit:
    """Measure the size and smoothness constants of a kernel family.

    For each sampled configuration the auditor computes
    S = (integral |K_v|^2 dv/v)^{1/2} and the two difference quotients, fits
    log-log exponents, and reports the max normalized ratio as the measured
    constant.  PASS requires the fitted exponent within 0.1 of nominal and a
    stability factor at most 2 under the built-in range doubling.
    """
    m, n = kernel.m, kernel.n
    v_arr, w = log_scale_nodes(samples.v_min, samples.v_max, samples.points_per_decade)
    nv = len(v_arr)
    half = samples.count // 2

    seps, s_values = [], []
    sm_x = {"sep": [], "delta": [], "q": [], "ratio": [], "slopes": []}
    sm_y = {"sep": [], "delta": [], "q": [], "ratio": [], "slopes": []}

    def kernel_at(x, Y):
        if np.min(np.sqrt(np.square(x[None, :] - Y).sum(-1))) <= 0.0:
            raise DomainError("kernel sampled on the diagonal")
        YB = np.broadcast_to(Y, (nv,) + Y.shape)
        return kernel.eval(v_arr, x, YB)

    for i in range(samples.count):
        rng = _sample_rng(samples.seed, 11, i)
        r_hi = samples.r_max if i < half else 2.0 * samples.r_max
        rho = math.exp(rng.uniform(math.log(samples.r_min), math.log(r_hi)))
        x, Y = _geometry(rng, m, n, rho)
        base_vals = kernel_at(x, Y)
        s = _sqrt_dv_norm(base_vals, w)
        sep = _separation(x, Y)
        seps.append(sep)
        s_values.append(s)

        # small offsets isolate the Hoelder exponent; the full admissible
        # range [0, cap] feeds the measured constant
        cap = float(np.max(np.sqrt(np.square(x[None, :] - Y).sum(-1)))) / kernel.B
        fit_deltas = np.exp(
            np.linspace(math.log(cap * 1e-3), math.log(cap * 3e-2), samples.offsets_per_sample)
        )
        full_deltas = np.exp(
            np.linspace(math.log(cap * 1e-2), math.log(cap * 0.99), samples.offsets_per_sample)
        )
        deltas = np.concatenate([fit_deltas, full_deltas])
        n_fit = len(fit_deltas)

        dx = _unit_vectors(rng, 1, n)[0]
        qx = []
        for d in deltas:
            z = x + d * dx
            qx.append(_sqrt_dv_norm(kernel_at(z, Y) - base_vals, w))
        qx = np.array(qx)
        sm_x["slopes"].append(loglog_slope(deltas[:n_fit], qx[:n_fit]))
        sm_x["sep"].extend([sep] * len(deltas))
        sm_x["delta"].extend(deltas.tolist())
        sm_x["q"].extend(qx.tolist())
        sm_x["ratio"].extend(
            (qx * sep ** (m * n + kernel.gamma) / deltas**kernel.gamma).tolist()
        )

        slot = int(rng.integers(m))
        dy = _unit_vectors(rng, 1, n)[0]
        qy = []
        for d in deltas:
            Y2 = Y.copy()
            Y2[slot] = Y[slot] + d * dy
            qy.append(_sqrt_dv_norm(kernel_at(x, Y2) - base_vals, w))
        qy = np.array(qy)
        sm_y["slopes"].append(loglog_slope(deltas[:n_fit], qy[:n_fit]))
        sm_y["sep"].extend([sep] * len(deltas))
        sm_y["delta"].extend(deltas.tolist())
        sm_y["q"].extend(qy.tolist())
        sm_y["ratio"].extend(
            (qy * sep ** (m * n + kernel.gamma) / deltas**kernel.gamma).tolist()
        )

    seps = np.array(seps)
    s_values = np.array(s_values)
    size_ratios = s_values * seps ** (m * n)
    size_slope = loglog_slope(seps, s_values)
    c_size, stab_size = fit_constant(size_ratios)
    size_pass = (
        math.isfinite(c_size)
        and abs(size_slope - (-(m * n))) <= 0.1
        and stab_size <= 2.0
    )
    size_report = ConditionReport(
        condition="cz-size",
        sample_count=samples.count,
        measured_constant=c_size,
        fitted_exponent=size_slope,
        nominal_exponent=-(m * n),
        stability=stab_size,
        verdict="PASS" if size_pass else "FAIL",
        decile_ratios=decile_table(seps, size_ratios),
        details={"kernel": kernel.label},
    )

    def smooth_report(data, name):
        slopes = [s for s in data["slopes"] if math.isfinite(s)]
        fitted = float(np.median(slopes)) if slopes else math.nan
        c, stab = fit_constant(data["ratio"])
        ok = math.isfinite(c) and abs(fitted - kernel.gamma) <= 0.1 and stab <= 2.0
        return ConditionReport(
            condition=name,
            sample_count=samples.count,
            measured_constant=c,
            fitted_exponent=fitted,
            nominal_exponent=kernel.gamma,
            stability=stab,
            verdict="PASS" if ok else "FAIL",
            decile_ratios=decile_table(data["sep"], data["ratio"]),
            details={"kernel": kernel.label},
        )

    sx = smooth_report(sm_x, "cz-smooth-x")
    sy = smooth_report(sm_y, "cz-smooth-y")
    verdict = "PASS" if all(r.verdict == "PASS" for r in (size_report, sx, sy)) else "FAIL"
    return CZConditionAudit(size=size_report, smooth_x=sx, smooth_y=sy, verdict=verdict)


# ---------------------------------------------------------------------------
# audit: composed-kernel assumptions


_H_CONDITIONS = ("h1", "h2-size", "h2-smooth", "h3")


def _admissibility_violation(ck: ComposedKernel, which: str, s: HSample) -> str | None:
    dist = np.sqrt(np.square(s.x[None, :] - s.Y).sum(axis=-1))
    scale = ck.identity.scale(s.t)
    if which == "h1":
        if not (scale <= dist[s.slot - 1] / 2.0):
            return f"t^(1/s)={scale:.3g} exceeds |x-y_i|/2={dist[s.slot-1]/2:.3g}"
    elif which == "h2-size":
        if not (2.0 * scale <= dist.min()):
            return f"2 t^(1/s)={2*scale:.3g} exceeds min separation {dist.min():.3g}"
    elif which == "h2-smooth":
        if not (2.0 * scale <= dist.max()):
            return f"2 t^(1/s)={2*scale:.3g} exceeds max separation {dist.max():.3g}"
    elif which == "h3":
        if not (2.0 * scale <= dist.min()):
            return f"2 t^(1/s)={2*scale:.3g} exceeds min separation {dist.min():.3g}"
        if s.x_prime is None:
            return "h3 sample is missing x_prime"
        step = float(np.sqrt(np.square(s.x - s.x_prime).sum()))
        if not (2.0 * step <= scale):
            return f"2 |x-x'|={2*step:.3g} exceeds t^(1/s)={scale:.3g}"
    else:
        raise DomainError(f"unknown assumption '{which}'")
    return None


def _h_samples(ck: ComposedKernel, which: str, cfg: HSampleConfig) -> list[HSample]:
    m, n = ck.base.m, ck.base.n
    s_exp = ck.identity.s
    half = cfg.count // 2
    out = []
    for i in range(cfg.count):
        rng = _sample_rng(cfg.seed, 23, i)
        r_hi = cfg.r_max if i < half else 2.0 * cfg.r_max
        rho = math.exp(rng.uniform(math.log(cfg.r_min), math.log(r_hi)))
        x, Y = _geometry(rng, m, n, rho)
        dist = np.sqrt(np.square(x[None, :] - Y).sum(axis=-1))
        slot = int(rng.integers(m)) + 1
        if which == "h1":
            cap = dist[slot - 1] / 2.0
        elif which == "h2-smooth":
            cap = dist.max() / 2.0
        else:
            cap = dist.min() / 2.0
        frac = math.exp(rng.uniform(math.log(cfg.t_low), math.log(cfg.t_high)))
        t = (frac * cap) ** s_exp
        x_prime = None
        if which == "h3":
            step = 0.5 * ck.identity.scale(t) * rng.uniform(0.1, 0.999)
            x_prime = x + step * _unit_vectors(rng, 1, n)[0]
        out.append(HSample(x=x, Y=Y, t=t, x_prime=x_prime, slot=slot))
    return out


def audit_nonsmooth_assumption(ck: ComposedKernel, which: str,
                               samples, explicit_samples=None) -> ConditionReport:
    """Audit one composed-kernel assumption on admissible samples.

    ``which`` is one of ``h1``, ``h2-size``, ``h2-smooth``, ``h3``.  All
    samples are validated against the stated admissibility constraint before
    any kernel evaluation; a violating sample raises PreconditionError.  The
    report's ratio list divides the left side by the right side evaluated
    with unit constant, so the measured constant is the certified A.
    """
    which = which.lower()
    if which not in _H_CONDITIONS:
        raise DomainError(f"unknown assumption '{which}'")
    cfg = samples
    items = list(explicit_samples) if explicit_samples is not None else _h_samples(ck, which, cfg)

    for s in items:  # validation pass happens before any evaluation
        msg = _admissibility_violation(ck, which, s)
        if msg is not None:
            raise PreconditionError(f"{which} sample violates admissibility: {msg}")

    m, n = ck.base.m, ck.base.n
    v_arr, w = log_scale_nodes(cfg.v_min, cfg.v_max, cfg.points_per_decade)
    nv = len(v_arr)
    eps, s_exp = ck.epsilon, ck.identity.s

    def base_at(x, Y):
        YB = np.broadcast_to(Y, (nv,) + Y.shape)
        return ck.base.eval(v_arr, x, YB)

    def norm_checked(coarse_vals, fine_vals, t):
        # converged at the level the audit consumes: the dv/v norm
        nc = _sqrt_dv_norm(coarse_vals, w)
        nf = _sqrt_dv_norm(fine_vals, w)
        if nf > 0 and abs(nf - nc) / nf > ck.quad.tol:
            raise AccuracyError(
                f"dv/v-norm quadrature drift {abs(nf - nc) / nf:.2e} "
                f"exceeds {ck.quad.tol} at t={t}"
            )
        return nf

    def lhs_rhs(s: HSample):
        dist = np.sqrt(np.square(s.x[None, :] - s.Y).sum(axis=-1))
        sep = float(dist.sum())
        scale = ck.identity.scale(s.t)
        eps_term = s.t ** (eps / s_exp) / sep ** (m * n + eps)
        if which == "h2-size":
            coarse, fine, _ = ck.eval_refined(s.t, v_arr, s.x, s.Y)
            lhs = norm_checked(coarse, fine, s.t)
            return lhs, 1.0 / sep ** (m * n), 0.0, eps_term
        if which == "h2-smooth":
            base = base_at(s.x, s.Y)
            coarse, fine, _ = ck.eval_refined(s.t, v_arr, s.x, s.Y)
            lhs = norm_checked(base - coarse, base - fine, s.t)
            j_star = int(np.argmax(dist))
            others = [k for k in range(m) if k != j_star]
            phi_sum = float(np.sum(ck.bump(dist[others] / scale))) if others else 0.0
            phi_term = phi_sum / sep ** (m * n)
            return lhs, phi_term + eps_term, phi_term, eps_term
        if which == "h3":
            c0, f0, _ = ck.eval_refined(s.t, v_arr, s.x, s.Y)
            c1, f1, _ = ck.eval_refined(s.t, v_arr, s.x_prime, s.Y)
            lhs = norm_checked(c0 - c1, f0 - f1, s.t)
            return lhs, eps_term, 0.0, eps_term
        # h1: composed in input slot s.slot
        ck_slot = replace(ck, slot=s.slot)
        base = base_at(s.x, s.Y)
        coarse, fine, _ = ck_slot.eval_refined(s.t, v_arr, s.x, s.Y)
        lhs = norm_checked(base - coarse, base - fine, s.t)
        yi = s.Y[s.slot - 1]
        others = [k for k in range(m) if k != s.slot - 1]
        gaps = np.sqrt(np.square(s.Y[others] - yi[None, :]).sum(axis=-1)) if others else np.array([])
        phi_sum = float(np.sum(ck.bump(gaps / scale))) if others else 0.0
        phi_term = phi_sum / sep ** (m * n)
        return lhs, phi_term + eps_term, phi_term, eps_term

    seps, ratios, phis, epss, lhss, ts = [], [], [], [], [], []
    for s in items:
        lhs, rhs, phi_term, eps_term = lhs_rhs(s)
        seps.append(_separation(s.x, s.Y))
        lhss.append(lhs)
        ratios.append(lhs / rhs)
        phis.append(phi_term)
        epss.append(eps_term)
        ts.append(s.t)

    c, stab = fit_constant(ratios)

    # t-slope diagnostic on a few frozen geometries (difference conditions)
    fitted = math.nan
    nominal = eps / s_exp
    if which in ("h2-smooth", "h3", "h1"):
        slopes = []
        for g in range(min(cfg.slope_geometries, len(items))):
            s0 = items[g]
            dist = np.sqrt(np.square(s0.x[None, :] - s0.Y).sum(axis=-1))
            if which == "h2-smooth":
                cap = dist.max() / 2.0
            elif which == "h1":
                cap = dist[s0.slot - 1] / 2.0
            else:
                cap = dist.min() / 2.0
            t_vals = (np.exp(np.linspace(math.log(0.01), math.log(0.5), cfg.slope_points)) * cap) ** s_exp
            curve = []
            for t in t_vals:
                probe = HSample(x=s0.x, Y=s0.Y, t=float(t), slot=s0.slot,
                                x_prime=None if which != "h3" else
                                s0.x + 0.25 * ck.identity.scale(float(t)) * (s0.x_prime - s0.x)
                                / max(1e-300, float(np.sqrt(np.square(s0.x_prime - s0.x).sum()))))
                lhs, _, _, _ = lhs_rhs(probe)
                curve.append(lhs)
            slopes.append(loglog_slope(t_vals, np.array(curve)))
        finite = [sl for sl in slopes if math.isfinite(sl)]
        fitted = float(np.median(finite)) if finite else math.nan
    else:
        fitted = loglog_slope(seps, lhss)
        nominal = -(m * n)

    ok = math.isfinite(c) and stab <= 2.0
    if which == "h2-smooth" and not (fitted > 0):
        ok = False
    return ConditionReport(
        condition=which,
        sample_count=len(items),
        measured_constant=c,
        fitted_exponent=fitted,
        nominal_exponent=nominal,
        stability=stab,
        verdict="PASS" if ok else "FAIL",
        decile_ratios=decile_table(seps, ratios),
        details={
            "kernel": ck.base.label,
            "phi_terms": phis,
            "eps_terms": epss,
            "t_values": ts,
        },
    )
