"""The inequality harness: generate suites, measure both sides, judge.

Every check turns a boundedness statement into a measurement: evaluate the
left and right sides on a deterministic test family, record the ratio per
test, fit the implied constant as the max over the first (baseline) half,
and report the stability factor, the max over the whole suite divided by
the baseline constant.  The second half of each suite is deliberately
harder (more concentrated, wider, or farther-spread inputs), so a constant
that is genuinely finite stays within the stability limit while a failing
hypothesis shows up as growth.  Negative controls are wired the same way:
a broken kernel or a weight outside the Muckenhoupt class runs through the
identical protocol and must come out FAIL.

The ``tamper`` field supports the harness's self-tests on checks whose
statement no admissible input can falsify (the cube-family bounds and the
oscillation-control inequality); a tampered run is marked as such in the
report and exists only to demonstrate the FAIL direction.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from ._stats import fit_constant
from .errors import AccuracyError, DomainError, EvaluationError, SpecError
from .grid import Box, Field
from .kernels import heat_identity, make_kernel_family, nonsmooth_composed
from .maximal import (
    CubeFamilySummary,
    hl_maximal_field,
    j_function_field,
    marcinkiewicz_field,
    sharp_maximal_field,
)
from .operators import (
    SquareFunctionConfig,
    TruncationGeometry,
    maximal_square_function_field,
    square_function_field,
    truncated_square_function,
)
from .weights import Weight, make_weight, unit_weight, weighted_norm

__all__ = [
    "CHECK_IDS",
    "CheckSpec",
    "VerificationReport",
    "TestSuite",
    "generate_test_suite",
    "generate_cube_families",
    "fit_constant",
    "validate_check_spec",
    "run_check",
    "report_to_json",
]

CHECK_IDS = (
    "endpoint_weak_type",
    "weighted_strong",
    "weighted_weak",
    "sharp_maximal_pointwise",
    "far_field",
    "cotlar",
    "tstar_strong",
    "tstar_weak",
    "marcinkiewicz_integral",
    "j_norm",
    "fefferman_stein",
    "hl_weighted_strong",
    "hl_weighted_weak",
)

_NEEDS_KERNEL = {
    "endpoint_weak_type", "weighted_strong", "weighted_weak",
    "sharp_maximal_pointwise", "far_field", "cotlar", "tstar_strong", "tstar_weak",
}
_NEEDS_WEIGHT = {
    "weighted_strong", "weighted_weak", "tstar_strong", "tstar_weak",
    "fefferman_stein", "hl_weighted_strong", "hl_weighted_weak",
}

_DEFAULTS = {
    "endpoint_weak_type": dict(count=16, resolution=128),
    "weighted_strong": dict(count=16, resolution=128),
    "weighted_weak": dict(count=16, resolution=128),
    "sharp_maximal_pointwise": dict(count=8, resolution=128),
    "far_field": dict(count=8, resolution=256),
    "cotlar": dict(count=8, resolution=128),
    "tstar_strong": dict(count=12, resolution=128),
    "tstar_weak": dict(count=12, resolution=128),
    "marcinkiewicz_integral": dict(count=20, resolution=512),
    "j_norm": dict(count=20, resolution=512),
    "fefferman_stein": dict(count=30, resolution=256),
    "hl_weighted_strong": dict(count=30, resolution=256),
    "hl_weighted_weak": dict(count=30, resolution=256),
}

_POINTWISE_FLOOR = 1e-12
_POINTWISE_NULL = 1e-10


@dataclass(frozen=True)
class CheckSpec:
    """One check: which statement, on which kernel/weight, how hard."""

    check_id: str
    kernel: str | None = None
    m: int = 2
    n: int = 1
    resolution: int | None = None
    half_width: float = 2.0
    count: int | None = None
    seed: int = 0
    p: float | None = None
    p_list: tuple | None = None
    delta: float | None = None
    eta: float | None = None
    epsilon: float | None = None
    weight: str | None = None
    v_min: float = 1e-4
    v_max: float = 1e4
    points_per_decade: int = 32
    stability_limit: float = 2.0
    tamper: str | None = None
    name: str | None = None


@dataclass
class VerificationReport:
    check_id: str
    kernel: str | None
    weight: str | None
    ratios: list
    constant: float
    stability: float
    verdict: str
    argmax_point: list | None
    wall_seconds: float
    sample_count: int
    details: dict = field(default_factory=dict)
    error: str | None = None

    def csv_row(self) -> str:
        return ",".join([
            self.check_id,
            self.kernel or "-",
            self.verdict,
            f"{self.constant:.6g}",
            f"{self.stability:.6g}",
            f"{self.wall_seconds:.2f}",
        ])


def report_to_json(report: VerificationReport) -> str:
    payload = {
        "check_id": report.check_id,
        "kernel": report.kernel,
        "weight": report.weight,
        "ratios": [float(r) for r in report.ratios],
        "constant": report.constant,
        "stability": report.stability,
        "verdict": report.verdict,
        "argmax_point": report.argmax_point,
        "wall_seconds": report.wall_seconds,
        "sample_count": report.sample_count,
        "details": report.details,
        "error": report.error,
    }
    return json.dumps(payload, indent=2)


# ---------------------------------------------------------------------------
# spec validation


def _resolved(spec: CheckSpec) -> CheckSpec:
    if spec.check_id not in CHECK_IDS:
        raise SpecError(f"unknown check id '{spec.check_id}'")
    d = _DEFAULTS[spec.check_id]
    updates = {}
    if spec.count is None:
        updates["count"] = d["count"]
    if spec.resolution is None:
        updates["resolution"] = d["resolution"]
    if spec.weight is None and spec.check_id in _NEEDS_WEIGHT:
        updates["weight"] = "one"
    if spec.kernel is None and spec.check_id in _NEEDS_KERNEL:
        updates["kernel"] = "smooth"
    if spec.delta is None:
        updates["delta"] = 1.0 / (2 * spec.m)
    if spec.eta is None:
        updates["eta"] = 1.0 / (2 * spec.m)
    if spec.epsilon is None:
        updates["epsilon"] = 1.0
    return replace(spec, **updates)


def validate_check_spec(spec: CheckSpec) -> CheckSpec:
    """Fill defaults and enforce the hypotheses of the checked statement."""
    spec = _resolved(spec)
    cid = spec.check_id
    errs = []
    if spec.m < 1 or spec.n < 1:
        errs.append("m and n must be positive")
    if spec.n * spec.m > 4:
        errs.append("integration dimension exceeds 4")
    if spec.count < 2:
        errs.append("count must be at least 2")
    if cid in ("weighted_strong", "weighted_weak", "tstar_strong", "tstar_weak"):
        plist = spec.p_list
        if plist is None or len(plist) != spec.m:
            errs.append(f"{cid} needs p_list with one exponent per input")
        else:
            if any(pi < 1 or not math.isfinite(pi) for pi in plist):
                errs.append("input exponents must lie in [1, inf)")
            if cid in ("weighted_strong", "tstar_strong") and any(pi == 1 for pi in plist):
                errs.append(f"{cid} requires every exponent above 1")
            if cid == "weighted_weak" and all(pi > 1 for pi in plist):
                errs.append("weighted_weak requires some exponent equal to 1")
    if cid == "sharp_maximal_pointwise" and not (0 < spec.delta < 1.0 / spec.m):
        errs.append(f"sharp-maximal power must lie in (0, 1/m); got {spec.delta}")
    if cid == "cotlar" and not (0 < spec.eta < 1.0 / spec.m):
        errs.append(f"cotlar power must lie in (0, 1/m); got {spec.eta}")
    if cid == "fefferman_stein":
        p = spec.p if spec.p is not None else 2.0
        if not (0 < p < math.inf and 0 < spec.delta < math.inf):
            errs.append("fefferman_stein needs finite positive p and delta")
    if cid == "hl_weighted_strong":
        p = spec.p if spec.p is not None else 2.0
        if not (p > 1):
            errs.append("hl_weighted_strong needs p > 1")
    if cid == "hl_weighted_weak":
        p = spec.p if spec.p is not None else 1.0
        if not (p >= 1):
            errs.append("hl_weighted_weak needs p >= 1")
    if cid == "j_norm" and spec.tamper != "p_below_range":
        lower = spec.n / (spec.n + spec.epsilon)
        for p in _j_norm_exponents(spec):
            if not (p > lower):
                errs.append(f"j_norm exponent {p} not above n/(n+eps) = {lower:.4g}")
    if spec.tamper is not None:
        allowed = {
            "marcinkiewicz_integral": {"dilate_zero"},
            "j_norm": {"p_below_range"},
            "fefferman_stein": {"near_constant"},
        }
        if spec.tamper not in allowed.get(cid, set()):
            errs.append(f"tamper '{spec.tamper}' is not defined for {cid}")
    if errs:
        raise SpecError("; ".join(errs))
    return spec


def _j_norm_exponents(spec: CheckSpec):
    lower = spec.n / (spec.n + spec.epsilon)
    if spec.tamper == "p_below_range":
        return [0.8 * lower]
    if spec.p is not None:
        return [spec.p]
    return [2.0, 1.2 * lower]


def _hoelder_p(p_list) -> float:
    return 1.0 / sum(1.0 / pi for pi in p_list)


# ---------------------------------------------------------------------------
# test-family generation


@dataclass(frozen=True)
class TestSuite:
    items: list  # tuples of Fields
    meta: dict


def _blank(spec: CheckSpec) -> Field:
    return Field.zeros(Box.cube(0.0, spec.half_width, spec.n), spec.resolution)


def _item_rng(seed: int, i: int):
    return np.random.default_rng(np.random.SeedSequence([seed, 1009, i]))


def _mask_half_box(blank: Field, values: np.ndarray) -> np.ndarray:
    X = blank.coords()
    inside = np.all(np.abs(X) <= blank.box.half_width / 2.0, axis=1)
    return np.where(inside, values, 0.0).reshape(blank.samples.shape)


def _gaussian(rng, blank, scale_lo, scale_hi, spread):
    sigma = math.exp(rng.uniform(math.log(scale_lo), math.log(scale_hi)))
    center = rng.uniform(-spread, spread, size=blank.n)
    amp = rng.uniform(0.5, 2.0) * (1 if rng.random() < 0.5 else -1)
    X = blank.coords()
    vals = amp * np.exp(-np.square(X - center[None, :]).sum(axis=1) / (2 * sigma**2))
    return blank.with_samples(_mask_half_box(blank, vals))


def _indicator_sum(rng, blank, scale_lo, scale_hi, spread):
    X = blank.coords()
    vals = np.zeros(X.shape[0])
    for _ in range(int(rng.integers(1, 4))):
        width = rng.uniform(scale_lo, scale_hi)
        center = rng.uniform(-spread, spread, size=blank.n)
        amp = rng.uniform(0.5, 2.0) * (1 if rng.random() < 0.5 else -1)
        inside = np.all(np.abs(X - center[None, :]) <= width / 2, axis=1)
        vals += amp * inside
    return blank.with_samples(_mask_half_box(blank, vals))


def _wavelet(rng, blank, scale_lo, scale_hi, spread):
    """Haar-type step supported on a grid-aligned block: exact zero mean."""
    res = blank.resolution
    h = blank.spacing
    cells = max(2, 2 * int(rng.uniform(scale_lo, scale_hi) / (2 * h)))
    start_max = res - cells
    lo_target = (-spread - blank.box.lo[0]) / h
    hi_target = (spread - blank.box.lo[0]) / h - cells
    start = int(np.clip(rng.integers(int(lo_target), max(int(lo_target) + 1, int(hi_target))),
                        0, start_max))
    amp = rng.uniform(0.5, 2.0)
    vals = np.zeros((res,) * blank.n)
    half = cells // 2
    sl_plus = (slice(start, start + half),) + (slice(None),) * (blank.n - 1)
    sl_minus = (slice(start + half, start + cells),) + (slice(None),) * (blank.n - 1)
    if blank.n == 1:
        vals[sl_plus] = amp
        vals[sl_minus] = -amp
    else:
        profile = np.exp(
            -np.square(blank.axis_nodes(1)) / (2 * (spread / 2) ** 2)
        )
        vals[sl_plus] = amp * profile[None, :]
        vals[sl_minus] = -amp * profile[None, :]
    return blank.with_samples(vals)


def _spike(rng, blank, width_cells, spread):
    """L^1-normalized block of the requested cell width."""
    res = blank.resolution
    h = blank.spacing
    wc = max(1, int(width_cells))
    center = rng.uniform(-spread, spread)
    i0 = int(round((center - blank.box.lo[0]) / h - wc / 2))
    i0 = int(np.clip(i0, 0, res - wc))
    vals = np.zeros((res,) * blank.n)
    if blank.n != 1:
        raise DomainError("spike families are one-dimensional")
    vals[i0 : i0 + wc] = 1.0 / (wc * h)
    return blank.with_samples(vals)


def generate_test_suite(spec: CheckSpec) -> TestSuite:
    """Deterministic input family for one check; second half is hardened."""
    spec = _resolved(spec)
    blank = _blank(spec)
    hw = spec.half_width
    count = spec.count
    items = []
    meta = {}
    cid = spec.check_id

    if cid == "endpoint_weak_type":
        # spike supports shrink 16x across the suite at unit L^1 norm; the
        # hardened half also widens the evaluation window (up to 8x), the
        # scale axis a slow-decay kernel hides its size failure on
        base_cells = 16
        half = count // 2
        for i in range(count):
            rng = _item_rng(spec.seed, i)
            if i < half:
                # supports shrink 16x at unit L^1 norm on the fixed grid
                frac = i / max(1, half - 1)
                wc = max(1, int(round(base_cells * (1.0 / 16.0) ** frac)))
                grid_i = blank
            else:
                wc = 1 + (i % 2)
                mult = 2.0 ** (1 + (3 * (i - half)) // max(1, count - half))
                grid_i = Field.zeros(Box.cube(0.0, hw * mult, spec.n), spec.resolution)
            items.append(tuple(_spike(rng, grid_i, wc, 0.1 * hw) for _ in range(spec.m)))
        meta["family"] = "spikes"

    elif cid in ("weighted_strong", "weighted_weak", "tstar_strong", "tstar_weak"):
        # baseline: moderate shapes; hardened: inputs concentrated flush
        # beside the origin (the singular point of the power weights) with
        # shrinking scale, interleaved with wide spread shapes
        shapes = (_gaussian, _indicator_sum, _wavelet)
        h = blank.spacing
        for i in range(count):
            rng = _item_rng(spec.seed, i)
            hard = i >= count // 2
            fs = []
            for j in range(spec.m):
                if not hard:
                    shape = shapes[(i + j) % len(shapes)]
                    fs.append(shape(rng, blank, 0.05 * hw, 0.15 * hw, 0.3 * hw))
                elif (i + j) % 2 == 0:
                    frac = (i - count // 2) / max(1, count - 1 - count // 2)
                    sigma = 0.04 * hw * (0.25) ** frac  # shrinks 4x across the half
                    side = 1.0 if rng.random() < 0.5 else -1.0
                    center = side * (2.5 * sigma + 4 * h)
                    X = blank.coords()
                    vals = rng.uniform(0.5, 2.0) * np.exp(
                        -np.square(X - center).sum(axis=1) / (2 * sigma**2)
                    )
                    fs.append(blank.with_samples(_mask_half_box(blank, vals)))
                else:
                    fs.append(_gaussian(rng, blank, 0.2 * hw, 0.45 * hw, 0.45 * hw))
            items.append(tuple(fs))
        meta["family"] = "mixed"

    elif cid in ("sharp_maximal_pointwise", "cotlar"):
        shapes = (_gaussian, _wavelet)
        for i in range(count):
            rng = _item_rng(spec.seed, i)
            hard = i >= count // 2
            lo, hi = (0.04 * hw, 0.12 * hw) if not hard else (0.02 * hw, 0.3 * hw)
            spread = 0.2 * hw if not hard else 0.45 * hw
            fs = [shapes[(i + j) % 2](rng, blank, lo, hi, spread) for j in range(spec.m)]
            items.append(tuple(fs))
        meta["family"] = "pointwise"

    elif cid == "far_field":
        R = 0.2 * hw
        for i in range(count):
            rng = _item_rng(spec.seed, i)
            hard = i >= count // 2
            lo, hi = (R / 10, R / 4) if not hard else (R / 20, R / 3)
            fs = []
            for _ in range(spec.m):
                g = _gaussian(rng, blank, lo, hi, R / 2)
                X = blank.coords()
                inside = np.sqrt(np.square(X).sum(axis=1)) <= R
                fs.append(blank.with_samples(
                    np.where(inside, g.samples.ravel(), 0.0).reshape(g.samples.shape)
                ))
            items.append(tuple(fs))
        meta["family"] = "ball-supported"
        meta["support_radius"] = R

    elif cid in ("fefferman_stein", "hl_weighted_strong", "hl_weighted_weak"):
        for i in range(count):
            rng = _item_rng(spec.seed, i)
            hard = i >= count // 2
            if cid == "fefferman_stein" and spec.tamper == "near_constant":
                w = _wavelet(rng, blank, 0.05 * hw, 0.2 * hw, 0.4 * hw)
                eps = 2.0 ** (-i)
                items.append((blank.with_samples(1.0 + eps * w.samples),))
            elif cid == "fefferman_stein":
                lo, hi = (0.05 * hw, 0.2 * hw) if not hard else (0.02 * hw, 0.4 * hw)
                items.append((_wavelet(rng, blank, lo, hi, 0.45 * hw),))
            else:
                # baseline: narrow shapes near the origin; hardened: wide
                # slabs pushed out across the half-box (the regime that
                # drives weighted maximal-function ratios)
                shapes = (_gaussian, _indicator_sum, _wavelet)
                if not hard:
                    items.append((shapes[i % 3](rng, blank, 0.02 * hw, 0.05 * hw, 0.1 * hw),))
                elif i % 3 == 0:
                    a = rng.uniform(0.1, 0.25) * hw
                    s = rng.uniform(0.25, 0.45) * hw
                    side = 1.0 if rng.random() < 0.5 else -1.0
                    X = blank.coords()
                    inside = np.all(
                        (side * X >= a) & (side * X <= a + s), axis=1
                    )
                    vals = rng.uniform(0.5, 2.0) * inside
                    items.append((blank.with_samples(_mask_half_box(blank, vals)),))
                else:
                    items.append((shapes[i % 3](rng, blank, 0.2 * hw, 0.45 * hw, 0.45 * hw),))
        meta["family"] = "scalar-fields"

    else:
        raise SpecError(f"no field family defined for '{cid}'")

    return TestSuite(items=items, meta=meta)


def generate_cube_families(spec: CheckSpec) -> list:
    """Random cube families for the cube-sum checks; hardened second half."""
    spec = _resolved(spec)
    blank = _blank(spec)
    hw, h = spec.half_width, blank.spacing
    fams = []
    for i in range(spec.count):
        rng = _item_rng(spec.seed, i)
        hard = i >= spec.count // 2
        if spec.tamper in ("dilate_zero",):
            side_lo, side_hi = (8 * h, 0.05 * hw) if not hard else (0.1 * hw, 0.4 * hw)
        elif spec.tamper == "p_below_range":
            side_lo, side_hi = (0.1 * hw, 0.3 * hw) if not hard else (4 * h, 8 * h)
        else:
            side_lo, side_hi = (8 * h, 0.1 * hw) if not hard else (4 * h, 0.2 * hw)
        n_cubes = int(rng.integers(1, 7)) if not hard else int(rng.integers(4, 13))
        cubes = []
        for _ in range(n_cubes):
            side = math.exp(rng.uniform(math.log(side_lo), math.log(max(side_lo * 1.01, side_hi))))
            center = rng.uniform(-hw / 2, hw / 2, size=spec.n)
            cubes.append(Box(center, side / 2, spec.n))
        fams.append(CubeFamilySummary(cubes=cubes, m=spec.m, epsilon=spec.epsilon))
    return fams


# ---------------------------------------------------------------------------
# runners


class _CheckEvalError(Exception):
    def __init__(self, index, cause):
        super().__init__(f"test {index}: {cause}")
        self.index = index
        self.cause = cause


def _operator_cfg(spec: CheckSpec) -> SquareFunctionConfig:
    return SquareFunctionConfig(
        v_min=spec.v_min, v_max=spec.v_max, points_per_decade=spec.points_per_decade
    )


def _kernel(spec: CheckSpec):
    return make_kernel_family(spec.kernel, spec.m, spec.n)


def _weight(spec: CheckSpec, blank: Field) -> Weight:
    return make_weight(spec.weight, blank.box, blank.resolution, seed=spec.seed)


def _pointwise_max(lhs: np.ndarray, rhs: np.ndarray, coords: np.ndarray):
    """Max ratio with the small-denominator floor; returns (ratio, argmax)."""
    lhs = lhs.ravel()
    rhs = rhs.ravel()
    valid = rhs >= _POINTWISE_FLOOR
    null_bad = (~valid) & (np.abs(lhs) >= _POINTWISE_NULL)
    if np.any(null_bad):
        i = int(np.argmax(np.where(null_bad, np.abs(lhs), -np.inf)))
        return math.inf, coords[i].tolist()
    if not np.any(valid):
        return 0.0, None
    ratios = np.where(valid, lhs / np.maximum(rhs, _POINTWISE_FLOOR), -np.inf)
    i = int(np.argmax(ratios))
    return float(ratios[i]), coords[i].tolist()


def _guarded(items, fn):
    out = []
    for i, item in enumerate(items):
        try:
            out.append(fn(i, item))
        except (AccuracyError, EvaluationError) as exc:
            raise _CheckEvalError(i, exc)
    return out


def _run_endpoint(spec):
    kernel = _kernel(spec)
    cfg = _operator_cfg(spec)
    suite = generate_test_suite(spec)
    blank = _blank(spec)
    one = unit_weight(blank.box, blank.resolution)

    def one_test(i, fs):
        tf = square_function_field(kernel, list(fs), cfg)
        num = weighted_norm(tf, one, 1.0 / spec.m, "weak")
        den = 1.0
        for f in fs:
            den *= float(np.sum(np.abs(f.samples)) * f.node_weight)
        return num / den

    ratios = _guarded(suite.items, one_test)
    return ratios, None, {"family": suite.meta["family"]}


def _run_weighted(spec, kind):
    kernel = _kernel(spec)
    cfg = _operator_cfg(spec)
    suite = generate_test_suite(spec)
    blank = _blank(spec)
    w = _weight(spec, blank)
    p = _hoelder_p(spec.p_list)

    def one_test(i, fs):
        tf = square_function_field(kernel, list(fs), cfg)
        num = weighted_norm(tf, w, p, kind)
        den = 1.0
        for f, pj in zip(fs, spec.p_list):
            den *= weighted_norm(f, w, pj, "strong")
        return num / den

    ratios = _guarded(suite.items, one_test)
    return ratios, None, {"p": p, "weight": w.label}


def _run_tstar(spec, kind):
    kernel = _kernel(spec)
    cfg = _operator_cfg(spec)
    suite = generate_test_suite(spec)
    blank = _blank(spec)
    w = _weight(spec, blank)
    p = _hoelder_p(spec.p_list)

    def one_test(i, fs):
        star = maximal_square_function_field(kernel, list(fs), "star", cfg)
        num = weighted_norm(star, w, p, kind)
        den = 1.0
        for f, pj in zip(fs, spec.p_list):
            den *= weighted_norm(f, w, pj, "strong")
        return num / den

    ratios = _guarded(suite.items, one_test)
    return ratios, None, {"p": p, "weight": w.label}


def _run_far_field(spec):
    kernel = _kernel(spec)
    cfg = _operator_cfg(spec)
    suite = generate_test_suite(spec)
    blank = _blank(spec)
    R = suite.meta["support_radius"]
    X = blank.coords()
    far = np.sqrt(np.square(X).sum(axis=1)) > 2.0 * R

    best = {"ratio": -1.0, "point": None}

    def one_test(i, fs):
        tf = square_function_field(kernel, list(fs), cfg)
        rhs = np.ones(X.shape[0])
        for f in fs:
            rhs *= hl_maximal_field(f, 1.0).samples.ravel()
        ratio, point = _pointwise_max(
            np.where(far, tf.samples.ravel(), 0.0),
            np.where(far, rhs, math.inf),
            X,
        )
        if ratio > best["ratio"]:
            best.update(ratio=ratio, point=point)
        return ratio

    ratios = _guarded(suite.items, one_test)
    return ratios, best["point"], {"support_radius": R}


def _run_sharp(spec):
    kernel = _kernel(spec)
    cfg = _operator_cfg(spec)
    suite = generate_test_suite(spec)
    blank = _blank(spec)
    X = blank.coords()
    best = {"ratio": -1.0, "point": None}

    def one_test(i, fs):
        tf = square_function_field(kernel, list(fs), cfg)
        lhs = sharp_maximal_field(tf, spec.delta).samples
        rhs = np.ones(X.shape[0])
        for f in fs:
            rhs *= hl_maximal_field(f, 1.0).samples.ravel()
        ratio, point = _pointwise_max(lhs, rhs, X)
        if ratio > best["ratio"]:
            best.update(ratio=ratio, point=point)
        return ratio

    ratios = _guarded(suite.items, one_test)
    return ratios, best["point"], {"delta": spec.delta}


def _cotlar_comparison_diagnostic(spec, kernel, fs, cfg) -> dict:
    """Compare the local comparison operator against the direct truncation.

    The comparison operator integrates the identity-composed kernel at
    t = (delta/4)^s over the far region; it exists purely as a diagnostic,
    evaluated at coarse settings on a few nodes.
    """
    blank = fs[0]
    delta = 8 * blank.spacing
    ck = nonsmooth_composed(spec.m, spec.n)
    t = (delta / 4.0) ** ck.identity.s
    coarse = SquareFunctionConfig(v_min=1e-3, v_max=1e3, points_per_decade=8)

    def composed_eval(v, x, Y):
        Z, dz = ck._z_nodes(t, np.asarray(x, dtype=float), 48)
        a = ck.identity.kernel(t, np.asarray(x, dtype=float), Z) * dz
        out = np.zeros(Y.shape[0])
        for zk, ak in zip(Z, a):
            out += ak * kernel.eval(v, zk, Y)
        return out

    proxy = type(kernel)(m=spec.m, n=spec.n, label="composed", evaluator=composed_eval)
    gaps = []
    nodes = blank.axis_nodes()[blank.resolution // 4 :: blank.resolution // 3]
    for x0 in nodes[:3]:
        geom = TruncationGeometry("far_field", delta, np.array([x0]))
        direct = truncated_square_function(kernel, fs, [x0], geom, coarse)
        smoothed = truncated_square_function(proxy, fs, [x0], geom, coarse)
        denom = max(direct, smoothed, 1e-300)
        gaps.append(abs(direct - smoothed) / denom)
    return {"t": t, "delta": delta, "max_relative_gap": float(max(gaps))}


def _run_cotlar(spec):
    kernel = _kernel(spec)
    cfg = _operator_cfg(spec)
    suite = generate_test_suite(spec)
    blank = _blank(spec)
    X = blank.coords()
    best = {"ratio": -1.0, "point": None}
    ss_le_star = True

    def one_test(i, fs):
        nonlocal ss_le_star
        tf = square_function_field(kernel, list(fs), cfg)
        m_eta = hl_maximal_field(tf, spec.eta).samples.ravel()
        star_f, ss_f = maximal_square_function_field(kernel, list(fs), "both", cfg)
        ss_le_star = ss_le_star and bool(np.all(ss_f.samples <= star_f.samples))
        rhs = np.ones(X.shape[0])
        for f in fs:
            rhs *= hl_maximal_field(f, 1.0).samples.ravel()
        ratio, point = _pointwise_max(star_f.samples, m_eta + rhs, X)
        if ratio > best["ratio"]:
            best.update(ratio=ratio, point=point)
        return ratio

    ratios = _guarded(suite.items, one_test)
    details = {"eta": spec.eta, "starstar_le_star": ss_le_star}
    try:
        details["comparison_diagnostic"] = _cotlar_comparison_diagnostic(
            spec, kernel, list(suite.items[0]), cfg
        )
    except (AccuracyError, EvaluationError) as exc:  # diagnostic only
        details["comparison_diagnostic"] = {"error": str(exc)}
    return ratios, best["point"], details


def _run_marcinkiewicz(spec):
    fams = generate_cube_families(spec)
    blank = _blank(spec)
    dilate = 0.0 if spec.tamper == "dilate_zero" else None

    def one_test(i, fam):
        mf = marcinkiewicz_field(fam, blank, spec.m, spec.epsilon, dilate=dilate)
        return mf.total() / fam.total_measure

    ratios = _guarded(fams, one_test)
    return ratios, None, {"tamper": spec.tamper}


def _run_j_norm(spec):
    fams = generate_cube_families(spec)
    blank = _blank(spec)
    one = unit_weight(blank.box, blank.resolution)
    p_set = _j_norm_exponents(spec)

    def one_test(i, fam):
        jf = j_function_field(fam, blank, spec.epsilon)
        return [
            weighted_norm(jf, one, p, "strong") / fam.total_measure ** (1.0 / p)
            for p in p_set
        ]

    nested = _guarded(fams, one_test)
    ratios = [r for row in nested for r in row]
    return ratios, None, {"exponents": p_set, "tamper": spec.tamper}


def _run_fefferman_stein(spec):
    suite = generate_test_suite(spec)
    blank = _blank(spec)
    w = _weight(spec, blank)
    p = spec.p if spec.p is not None else 2.0
    wv = w.field.samples.ravel() * blank.node_weight

    def one_test(i, fs):
        f = fs[0]
        lhs = np.sum(hl_maximal_field(f, spec.delta).samples.ravel() ** p * wv)
        rhs = np.sum(sharp_maximal_field(f, spec.delta).samples.ravel() ** p * wv)
        if rhs <= 0:
            return math.inf
        return float(lhs / rhs)

    ratios = _guarded(suite.items, one_test)
    return ratios, None, {"p": p, "delta": spec.delta, "weight": w.label,
                          "tamper": spec.tamper}


def _run_hl_weighted(spec, kind):
    suite = generate_test_suite(spec)
    blank = _blank(spec)
    w = _weight(spec, blank)
    p = spec.p if spec.p is not None else (2.0 if kind == "strong" else 1.0)

    def one_test(i, fs):
        f = fs[0]
        mf = hl_maximal_field(f, 1.0)
        den = weighted_norm(f, w, p, kind)
        if den == 0:
            return 0.0
        return weighted_norm(mf, w, p, kind) / den

    ratios = _guarded(suite.items, one_test)
    return ratios, None, {"p": p, "weight": w.label}


_RUNNERS = {
    "endpoint_weak_type": _run_endpoint,
    "weighted_strong": lambda s: _run_weighted(s, "strong"),
    "weighted_weak": lambda s: _run_weighted(s, "weak"),
    "sharp_maximal_pointwise": _run_sharp,
    "far_field": _run_far_field,
    "cotlar": _run_cotlar,
    "tstar_strong": lambda s: _run_tstar(s, "strong"),
    "tstar_weak": lambda s: _run_tstar(s, "weak"),
    "marcinkiewicz_integral": _run_marcinkiewicz,
    "j_norm": _run_j_norm,
    "fefferman_stein": _run_fefferman_stein,
    "hl_weighted_strong": lambda s: _run_hl_weighted(s, "strong"),
    "hl_weighted_weak": lambda s: _run_hl_weighted(s, "weak"),
}


def run_check(spec: CheckSpec) -> VerificationReport:
    """Validate the spec, run the measurement, and judge the constant."""
    spec = validate_check_spec(spec)
    t0 = time.perf_counter()
    try:
        ratios, argmax, details = _RUNNERS[spec.check_id](spec)
    except _CheckEvalError as exc:
        return VerificationReport(
            check_id=spec.check_id,
            kernel=spec.kernel,
            weight=spec.weight,
            ratios=[],
            constant=math.nan,
            stability=math.nan,
            verdict="ERROR",
            argmax_point=None,
            wall_seconds=time.perf_counter() - t0,
            sample_count=0,
            details={"failing_test": exc.index},
            error=str(exc.cause),
        )
    constant, stability = fit_constant(ratios)
    finite = all(math.isfinite(r) for r in ratios)
    ok = finite and math.isfinite(constant) and stability <= spec.stability_limit
    if spec.tamper is not None:
        details = dict(details)
        details["tamper"] = spec.tamper
    return VerificationReport(
        check_id=spec.check_id,
        kernel=spec.kernel,
        weight=spec.weight,
        ratios=[float(r) for r in ratios],
        constant=constant,
        stability=stability,
        verdict="PASS" if ok else "FAIL",
        argmax_point=argmax,
        wall_seconds=time.perf_counter() - t0,
        sample_count=len(ratios),
        details=details,
    )
