"""Dyadic stopping-time decomposition with verifiable constants.

The splitting f = g + sum_k b_k selects maximal dyadic cubes whose average
of |f| strictly exceeds the level.  Strict inequality makes the degenerate
case (level at or above the sup) produce the empty decomposition
deterministically.  Because grids are cell-centered with power-of-two
resolution, cube averages are exact sample means and the bookkeeping
constants hold in exact arithmetic:

* good part bounded by 2^n x level,
* each atom has zero grid sum and L^1 norm at most 2 x 2^n x level x |Q|,
* the selected cubes' total measure is at most ||f||_1 / level.

Descent is capped at the tree depth; a deepest-generation cube whose
average still exceeds the level is selected regardless (grid atomicity).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AdmissibilityError, DomainError
from .grid import Box, DyadicTree, Field

__all__ = ["CZDecomposition", "CZValidationReport", "cz_decompose", "czd_validate", "czd_to_json"]


@dataclass(frozen=True, eq=False)
class CZDecomposition:
    """Level, selected cubes, good part, and localized mean-zero atoms."""

    input: Field
    level: float
    cubes: list
    good: Field
    bad: list  # (Box, Field) pairs, each supported in its cube
    constants: dict


@dataclass
class CZValidationReport:
    ok: bool
    violations: list
    measured: dict

    def __bool__(self):
        return self.ok


def _aligned_window(f: Field, region: Box):
    """Slices of region in f's grid; the region must be grid-aligned."""
    sl = f.window(region)
    h = f.spacing
    for d in range(f.n):
        offset = (region.lo[d] - f.box.lo[d]) / h
        width = region.side / h
        if abs(offset - round(offset)) > 1e-9 or abs(width - round(width)) > 1e-9:
            raise DomainError("region is not aligned to the sample grid")
    return sl


def cz_decompose(f: Field, level: float, tree: DyadicTree) -> CZDecomposition:
    """Stopping-time decomposition of f at the given level over tree.root."""
    if level <= 0:
        raise AdmissibilityError("level must be positive")
    root_sl = _aligned_window(f, tree.root)
    outside = np.ones(f.samples.shape, dtype=bool)
    outside[root_sl] = False
    if np.any(f.samples[outside] != 0.0):
        raise DomainError("input is not supported in the tree root")

    abs_root_avg = float(np.mean(np.abs(f.samples[root_sl])))
    if level <= abs_root_avg:
        raise AdmissibilityError(
            f"level {level} must exceed the root average {abs_root_avg}"
        )

    cells_per_axis = round(tree.root.side / f.spacing)
    atomic_depth = int(round(math.log2(cells_per_axis))) if cells_per_axis > 1 else 0
    max_depth = min(tree.max_depth, atomic_depth)

    selected: list[tuple[Box, tuple]] = []

    def descend(cube: Box, depth: int):
        sl = _aligned_window(f, cube)
        avg = float(np.mean(np.abs(f.samples[sl])))
        if avg > level:
            selected.append((cube, sl))
            return
        if depth >= max_depth:
            return
        for child in cube.children():
            descend(child, depth + 1)

    # the root is admissible by the level check; scan its children
    if max_depth == 0:
        pass
    else:
        for child in tree.root.children():
            descend(child, 1)

    good = np.array(f.samples)
    atoms = []
    for cube, sl in selected:
        avg = float(np.mean(f.samples[sl]))
        atom = np.zeros(f.samples.shape)
        atom[sl] = f.samples[sl] - avg
        good[sl] = avg
        atoms.append((cube, f.with_samples(atom)))

    n = f.n
    measured = {
        "good_sup_over_level": float(np.max(np.abs(good))) / level,
        "atom_l1_over_level_measure": max(
            (float(np.sum(np.abs(a.samples)) * f.node_weight) / (level * q.volume)
             for q, a in atoms),
            default=0.0,
        ),
        "measure_sum_times_level_over_l1": (
            sum(q.volume for q, _ in atoms) * level
            / max(float(np.sum(np.abs(f.samples)) * f.node_weight), 1e-300)
        ),
    }
    return CZDecomposition(
        input=f,
        level=level,
        cubes=[q for q, _ in selected],
        good=f.with_samples(good),
        bad=atoms,
        constants=measured,
    )


def czd_validate(d: CZDecomposition) -> CZValidationReport:
    """Recheck every decomposition property; names each violated one."""
    f = d.input
    n = f.n
    level = d.level
    tol = 1e-12
    violations = []

    recon = np.array(d.good.samples)
    for _, atom in d.bad:
        recon = recon + atom.samples
    recon_err = float(np.max(np.abs(recon - f.samples)))
    scale = max(1.0, float(np.max(np.abs(f.samples))))
    if recon_err > tol * scale:
        violations.append(f"reconstruction: max error {recon_err:.3e}")

    good_bound = (2.0**n) * level
    good_sup = float(np.max(np.abs(d.good.samples)))
    if good_sup > good_bound * (1.0 + tol):
        violations.append(f"good-bound: sup {good_sup:.6g} exceeds {good_bound:.6g}")

    windows = []
    for idx, (cube, atom) in enumerate(d.bad):
        sl = _aligned_window(f, cube)
        windows.append(sl)
        support = np.zeros(f.samples.shape, dtype=bool)
        support[sl] = True
        if np.any(atom.samples[~support] != 0.0):
            violations.append(f"atom-support: atom {idx} leaks outside its cube")
        l1 = float(np.sum(np.abs(atom.samples)) * f.node_weight)
        cap = 2.0 * (2.0**n) * level * cube.volume
        if l1 > cap * (1.0 + tol):
            violations.append(f"atom-l1: atom {idx} norm {l1:.6g} exceeds {cap:.6g}")
        mean = abs(float(np.sum(atom.samples) * f.node_weight))
        if l1 > 0 and mean > tol * l1:
            violations.append(f"zero-mean: atom {idx} mean {mean:.3e} vs L1 {l1:.3e}")

    covered = np.zeros(f.samples.shape, dtype=int)
    for sl in windows:
        covered[sl] += 1
    if np.any(covered > 1):
        violations.append("disjointness: selected cubes overlap")

    l1_total = float(np.sum(np.abs(f.samples)) * f.node_weight)
    measure = sum(cube.volume for cube, _ in d.bad)
    if measure * level > l1_total * (1.0 + tol):
        violations.append(
            f"measure-bound: {measure:.6g} exceeds ||f||_1/level = {l1_total/level:.6g}"
        )

    measured = {
        "reconstruction_error": recon_err,
        "good_sup": good_sup,
        "cube_measure": measure,
        "l1": l1_total,
    }
    return CZValidationReport(ok=not violations, violations=violations, measured=measured)


def czd_to_json(d: CZDecomposition, good_csv=None, bad_csvs=None) -> str:
    """JSON summary: level, cube list, references to the part CSV files."""
    payload = {
        "level": d.level,
        "cubes": [
            {"center": list(map(float, q.center)), "side": q.side} for q in d.cubes
        ],
        "constants": d.constants,
        "good_csv": str(good_csv) if good_csv else None,
        "bad_csvs": [str(p) for p in bad_csvs] if bad_csvs else None,
    }
    return json.dumps(payload, indent=2)
