import math

import numpy as np
import pytest

from sqflab.errors import DomainError
from sqflab.grid import Box, Field, log_scale_nodes
from sqflab.kernels import KernelFamily, heat_identity, smooth_family, broken_family
from sqflab.operators import (
    SquareFunctionConfig,
    TruncationGeometry,
    apply_approx_identity,
    build_delta_grid,
    maximal_square_function,
    maximal_square_function_field,
    maximal_square_function_pair,
    square_function,
    square_function_field,
    truncated_square_function,
    write_operator_csv,
)

CFG = SquareFunctionConfig()


def gaussian_field(box, res, center, sigma, amp=1.0):
    return Field.from_function(
        box, res, lambda X: amp * np.exp(-np.square(X[:, 0] - center) / (2 * sigma**2))
    )


def strip_structure(kernel):
    """Same kernel values, but through the generic evaluation path."""
    return KernelFamily(m=kernel.m, n=kernel.n, label=kernel.label + "-generic",
                        evaluator=kernel.evaluator)


class TestApplyApproxIdentity:
    BOX = Box.cube(0.0, 4.0)

    def test_zero_field_maps_to_zero(self):
        aid = heat_identity(1)
        f = Field.zeros(self.BOX, 128)
        out = apply_approx_identity(aid, 0.5, f)
        assert np.all(out.samples == 0.0)

    def test_gaussian_variance_grows_by_2t(self):
        # oracle: heat profile at time t convolves a gaussian of variance
        # sigma^2 into one of variance sigma^2 + 2t (closed form)
        aid = heat_identity(1)
        sigma2, t = 0.04, 0.03
        f = gaussian_field(self.BOX, 512, 0.2, math.sqrt(sigma2))
        out = apply_approx_identity(aid, t, f)
        s2 = sigma2 + 2 * t
        expected = math.sqrt(sigma2 / s2) * np.exp(
            -np.square(f.axis_nodes() - 0.2) / (2 * s2)
        )
        assert np.max(np.abs(out.samples - expected)) <= 1e-3

    def test_mass_conservation(self):
        aid = heat_identity(1)
        f = gaussian_field(self.BOX, 512, -0.3, 0.15)
        out = apply_approx_identity(aid, 0.05, f)
        assert out.meta["mass_ratio"] == pytest.approx(1.0, abs=1e-4)

    def test_identity_limit(self):
        aid = heat_identity(1)
        f = gaussian_field(self.BOX, 256, 0.0, 0.5)
        t = f.spacing**2  # scale = one grid spacing
        out = apply_approx_identity(aid, t, f)
        err = np.max(np.abs(out.samples - f.samples))
        assert err <= 0.05 * np.max(np.abs(f.samples))

    def test_resolution_warning(self):
        aid = heat_identity(1)
        f = gaussian_field(self.BOX, 64, 0.0, 0.5)
        out = apply_approx_identity(aid, (f.spacing / 8) ** 2, f)
        assert "resolution_warning" in out.meta


class TestSquareFunction:
    BOX = Box.cube(0.0, 4.0)

    def test_zero_input_gives_zero(self):
        k = smooth_family(2, 1)
        f = gaussian_field(self.BOX, 64, 0.0, 0.3)
        z = Field.zeros(self.BOX, 64)
        assert square_function(k, [f, z], [0.1], CFG) == 0.0

    def test_scaling_multilinearity(self):
        k = smooth_family(2, 1)
        f1 = gaussian_field(self.BOX, 64, -0.4, 0.25)
        f2 = gaussian_field(self.BOX, 64, 0.5, 0.35)
        base = square_function(k, [f1, f2], [0.2], CFG)
        scaled = square_function(k, [f1.with_samples(-3.0 * f1.samples), f2], [0.2], CFG)
        assert scaled == pytest.approx(3.0 * base, rel=1e-12)

    def test_translation_covariance(self):
        k = smooth_family(2, 1)
        res = 256
        shift = 16 * (2 * 4.0 / res)
        f1 = gaussian_field(self.BOX, res, -0.3, 0.2)
        f2 = gaussian_field(self.BOX, res, 0.4, 0.25)
        g1 = gaussian_field(self.BOX, res, -0.3 + shift, 0.2)
        g2 = gaussian_field(self.BOX, res, 0.4 + shift, 0.25)
        a = square_function(k, [f1, f2], [0.1], CFG)
        b = square_function(k, [g1, g2], [0.1 + shift], CFG)
        assert b == pytest.approx(a, rel=1e-9)

    def test_m1_gaussian_against_dense_two_level_oracle(self):
        # oracle: two-level quadrature, 8192 log-spaced v nodes x 8192 y nodes
        box = Box.cube(0.0, 8.0)
        center, x0 = 0.7, 0.0
        f = gaussian_field(box, 1024, center, 1.0)
        k = smooth_family(1, 1)

        y = np.linspace(-8.0, 8.0, 8192)
        fy = np.exp(-np.square(y - center) / 2.0)
        u = np.linspace(math.log(1e-6), math.log(1e6), 8192)
        v = np.exp(u)
        inner = np.empty_like(v)
        for i, vi in enumerate(v):
            uu = (x0 - y) / vi
            inner[i] = np.trapezoid(uu * np.exp(-uu * uu) / vi * fy, y)
        oracle = math.sqrt(np.trapezoid(inner * inner, u))

        got = square_function(k, [f], [x0], CFG)
        assert got == pytest.approx(oracle, rel=1e-3)

    def test_separable_path_matches_generic_path(self):
        k = smooth_family(2, 1)
        g = strip_structure(k)
        f1 = gaussian_field(self.BOX, 64, -0.4, 0.3)
        f2 = gaussian_field(self.BOX, 64, 0.3, 0.2)
        for x in ([0.0], [0.7], [-1.3]):
            a = square_function(k, [f1, f2], x, CFG)
            b = square_function(g, [f1, f2], x, CFG)
            assert b == pytest.approx(a, rel=1e-12)

    def test_field_matches_pointwise(self):
        k = smooth_family(2, 1)
        f1 = gaussian_field(self.BOX, 64, -0.4, 0.3)
        f2 = gaussian_field(self.BOX, 64, 0.3, 0.2)
        field = square_function_field(k, [f1, f2], CFG)
        nodes = f1.axis_nodes()
        for i in [0, 17, 40, 63]:
            assert field.samples[i] == pytest.approx(
                square_function(k, [f1, f2], [nodes[i]], CFG), rel=1e-10
            )
        assert "boundary_loss" in field.meta

    def test_broken_kernel_field_runs(self):
        k = broken_family(2, 1)
        f1 = gaussian_field(self.BOX, 64, -0.4, 0.3)
        f2 = gaussian_field(self.BOX, 64, 0.3, 0.2)
        field = square_function_field(k, [f1, f2], CFG)
        assert np.all(np.isfinite(field.samples))
        x = [f1.axis_nodes()[20]]
        assert field.samples[20] == pytest.approx(
            square_function(k, [f1, f2], x, CFG), rel=1e-10
        )

    def test_grid_mismatch_rejected(self):
        k = smooth_family(2, 1)
        f1 = gaussian_field(self.BOX, 64, 0.0, 0.3)
        f2 = gaussian_field(Box.cube(0.0, 2.0), 64, 0.0, 0.3)
        with pytest.raises(DomainError):
            square_function(k, [f1, f2], [0.0], CFG)


class TestTruncated:
    BOX = Box.cube(0.0, 4.0)

    def setup_method(self):
        self.k = smooth_family(2, 1)
        self.f1 = gaussian_field(self.BOX, 64, -0.4, 0.3)
        self.f2 = gaussian_field(self.BOX, 64, 0.5, 0.25)

    def test_huge_delta_empties_outside_ball(self):
        geom = TruncationGeometry("outside_ball", 100.0, np.array([0.0]))
        assert truncated_square_function(self.k, [self.f1, self.f2], [0.0], geom, CFG) == 0.0

    def test_tiny_delta_recovers_full_integral(self):
        geom = TruncationGeometry("outside_ball", 1e-9, np.array([0.013]))
        full = square_function(self.k, [self.f1, self.f2], [0.013], CFG)
        trunc = truncated_square_function(self.k, [self.f1, self.f2], [0.013], geom, CFG)
        assert trunc == pytest.approx(full, rel=1e-6)

    def test_regions_partition_product_space(self):
        rng = np.random.default_rng(1)
        n1 = 64
        d = np.abs(rng.standard_normal(n1 * 4))
        dist_sq = (d[: 2 * n1] ** 2).reshape(2, n1).sum(axis=0)
        min_d = np.minimum(d[: n1], d[n1 : 2 * n1])
        for delta in [0.1, 0.5, 2.0]:
            masks = [
                TruncationGeometry(kind, delta, np.zeros(1)).mask(dist_sq, min_d)
                for kind in ("outside_ball", "far_field", "annulus")
            ]
            inside_ball = dist_sq < delta**2
            union = masks[0] | masks[1] | masks[2] | inside_ball
            assert np.all(union)
            assert not np.any(masks[1] & inside_ball)
            assert not np.any(masks[2] & inside_ball)
            assert not np.any(masks[1] & masks[2])

    def test_region_shrinks_as_delta_grows(self):
        geoms = [TruncationGeometry("far_field", d, np.zeros(1)) for d in (0.2, 0.4, 0.8)]
        dist_sq = np.linspace(0, 4, 100)
        min_d = np.sqrt(dist_sq / 2)
        masks = [g.mask(dist_sq, min_d) for g in geoms]
        assert np.all(masks[1] <= masks[0])
        assert np.all(masks[2] <= masks[1])
        balls = [TruncationGeometry("outside_ball", d, np.zeros(1)).mask(dist_sq, min_d) for d in (0.2, 0.4)]
        assert np.all(balls[1] <= balls[0])


class TestMaximal:
    BOX = Box.cube(0.0, 4.0)

    def setup_method(self):
        self.k = smooth_family(2, 1)
        self.f1 = gaussian_field(self.BOX, 64, -0.4, 0.3)
        self.f2 = gaussian_field(self.BOX, 64, 0.5, 0.25)

    def test_single_delta_degenerates_to_truncation(self):
        delta = 0.37
        geom = TruncationGeometry("outside_ball", delta, np.array([0.1]))
        trunc = truncated_square_function(self.k, [self.f1, self.f2], [0.1], geom, CFG)
        star = maximal_square_function(self.k, [self.f1, self.f2], [0.1], "star", CFG, [delta])
        ss = maximal_square_function(self.k, [self.f1, self.f2], [0.1], "starstar", CFG, [delta])
        assert star == pytest.approx(trunc, rel=1e-12)
        assert ss == pytest.approx(trunc, rel=1e-12)

    def test_starstar_below_star_everywhere(self):
        star_f, ss_f = maximal_square_function_field(self.k, [self.f1, self.f2], "both", CFG)
        assert np.all(ss_f.samples <= star_f.samples)

    def test_delta_grid_growth_is_monotone(self):
        grid_small = [0.1, 0.4]
        grid_big = [0.05, 0.1, 0.4, 1.6]
        for variant in ("star", "starstar"):
            a = maximal_square_function(self.k, [self.f1, self.f2], [0.3], variant, CFG, grid_small)
            b = maximal_square_function(self.k, [self.f1, self.f2], [0.3], variant, CFG, grid_big)
            assert b >= a - 1e-15

    def test_refinement_oracle_64_point_grid(self):
        # oracle: doubling a 64-point geometric truncation grid moves the
        # value by at most 1 percent
        f = self.f1
        grid64 = np.geomspace(f.spacing, f.box.diameter, 64)
        grid128 = np.geomspace(f.spacing, f.box.diameter, 127)
        a = maximal_square_function(self.k, [self.f1, self.f2], [0.0], "star", CFG, grid64)
        b = maximal_square_function(self.k, [self.f1, self.f2], [0.0], "star", CFG, grid128)
        assert abs(a - b) <= 0.01 * max(a, b)

    def test_default_delta_grid_spans_box(self):
        grid = build_delta_grid(self.f1, CFG)
        assert grid[0] == self.f1.spacing
        assert grid[-1] <= self.f1.box.diameter
        assert np.all(np.diff(grid) > 0)

    def test_empty_delta_grid_rejected(self):
        with pytest.raises(DomainError):
            maximal_square_function(self.k, [self.f1, self.f2], [0.0], "star", CFG, [])


def test_operator_csv_stream(tmp_path):
    rows = [((0.5,), "square_function", 1.25, 1e-4), ((1.0,), "star", 0.5, 2e-4)]
    path = tmp_path / "ops.csv"
    write_operator_csv(path, rows, n=1)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "x1,operator_id,value,quadrature_error_estimate"
    assert len(lines) == 3
    assert lines[1].startswith("0.5,square_function,")
