import math

import numpy as np
import pytest
import scipy.integrate
from hypothesis import given, settings
from hypothesis import strategies as st

from sqflab.errors import DomainError, EvaluationError
from sqflab.grid import (
    Box,
    DyadicTree,
    Field,
    enumerate_dyadic_cubes,
    integrate_field,
    log_scale_integral,
    read_field_csv,
    write_field_csv,
)


def unit_interval_field(fn, res=256, half_width=1.0):
    box = Box.cube(0.0, half_width)
    return Field.from_function(box, res, lambda X: fn(X[:, 0]))


class TestIntegrateField:
    def test_constant_one_over_unit_box(self):
        f = unit_interval_field(lambda x: np.ones_like(x))
        assert integrate_field(f, f.box) == pytest.approx(2.0, abs=1e-14)

    def test_zero_integrand(self):
        f = unit_interval_field(lambda x: np.zeros_like(x))
        assert integrate_field(f, f.box) == 0.0

    def test_x_squared_against_antiderivative_oracle(self):
        # oracle: antiderivative x^3/3 over [-1, 1] -> 2/3, cross-checked by quad
        oracle = scipy.integrate.quad(lambda x: x * x, -1.0, 1.0)[0]
        assert oracle == pytest.approx(2.0 / 3.0, abs=1e-12)
        f = unit_interval_field(lambda x: x * x)
        # composite midpoint error ~ h^2/6 for this integrand
        assert integrate_field(f, f.box) == pytest.approx(2.0 / 3.0, abs=2e-5)

    def test_region_outside_box_raises(self):
        f = unit_interval_field(lambda x: np.ones_like(x))
        with pytest.raises(DomainError):
            integrate_field(f, Box.cube(1.5, 1.0))

    def test_additivity_over_disjoint_halves(self):
        rng = np.random.default_rng(3)
        f = unit_interval_field(lambda x: np.sin(3 * x) + 0.1)
        left = Box.cube(-0.5, 0.5)
        right = Box.cube(0.5, 0.5)
        total = integrate_field(f, left) + integrate_field(f, right)
        assert total == pytest.approx(integrate_field(f, f.box), abs=1e-13)

    def test_additivity_2d(self):
        box = Box.cube([0.0, 0.0], 1.0)
        f = Field.from_function(box, 32, lambda X: X[:, 0] + 2 * X[:, 1] ** 2)
        quads = [c for c in box.children()]
        total = sum(integrate_field(f, q) for q in quads)
        assert total == pytest.approx(integrate_field(f, box), abs=1e-13)


class TestLogScaleIntegral:
    def test_indicator_of_unit_log_interval(self):
        # endpoints chosen on the interval boundary: trapezoid is exact
        val = log_scale_integral(lambda v: 1.0, 1.0, math.e, 64)
        assert val == pytest.approx(1.0, abs=1e-12)

    def test_linear_integrand(self):
        val = log_scale_integral(lambda v: v, 1.0, 2.0, 512)
        assert val == pytest.approx(1.0, abs=1e-5)

    def test_gamma_two_oracle(self):
        # oracle: integral of v e^{-v} dv/v = Gamma(1) = 1, via scipy.quad
        oracle = scipy.integrate.quad(lambda v: math.exp(-v), 0, np.inf)[0]
        assert oracle == pytest.approx(1.0, abs=1e-10)
        val = log_scale_integral(lambda v: v * math.exp(-v), 1e-6, 40.0, 32)
        assert val == pytest.approx(1.0, abs=1e-4)

    def test_scale_reparametrization_invariance(self):
        F = lambda v: math.exp(-((math.log(v)) ** 2))
        c = 3.7
        Fc = lambda v: F(v / c)
        a = log_scale_integral(F, 1e-4, 1e4, 64)
        b = log_scale_integral(Fc, 1e-4 * c, 1e4 * c, 64)
        assert b == pytest.approx(a, rel=1e-10)

    def test_nonfinite_value_reports_offending_v(self):
        def F(v):
            return math.inf if v > 1.0 else 1.0

        with pytest.raises(EvaluationError) as err:
            log_scale_integral(F, 0.1, 10.0, 16)
        assert err.value.v is not None and err.value.v > 1.0

    def test_invalid_range_and_ppd(self):
        with pytest.raises(DomainError):
            log_scale_integral(lambda v: 1.0, 2.0, 1.0, 16)
        with pytest.raises(DomainError):
            log_scale_integral(lambda v: 1.0, 0.1, 1.0, 3)


class TestDyadicCubes:
    def test_depth_zero_is_root(self):
        tree = DyadicTree(Box.cube(0.0, 2.0), 4)
        cubes = enumerate_dyadic_cubes(tree, 0)
        assert len(cubes) == 1
        assert np.allclose(cubes[0].center, tree.root.center)
        assert cubes[0].half_width == tree.root.half_width

    def test_bisection_of_interval(self):
        tree = DyadicTree(Box.cube(2.0, 2.0), 4)  # [0, 4)
        cubes = enumerate_dyadic_cubes(tree, 1)
        los = sorted(c.lo[0] for c in cubes)
        his = sorted(c.hi[0] for c in cubes)
        assert los == pytest.approx([0.0, 2.0])
        assert his == pytest.approx([2.0, 4.0])

    def test_2d_depth2_count_and_volume_oracle(self):
        # oracle: count 2^(n*depth) and exact volume bookkeeping
        tree = DyadicTree(Box.cube([0.0, 0.0], 1.0), 3)
        cubes = enumerate_dyadic_cubes(tree, 2)
        assert len(cubes) == 16
        assert sum(c.volume for c in cubes) == pytest.approx(tree.root.volume, rel=1e-14)

    def test_depth_beyond_max_raises(self):
        tree = DyadicTree(Box.cube(0.0, 1.0), 2)
        with pytest.raises(DomainError):
            enumerate_dyadic_cubes(tree, 3)

    @given(depth=st.integers(min_value=1, max_value=3))
    @settings(max_examples=10, deadline=None)
    def test_refinement_nests_in_parent_generation(self, depth):
        tree = DyadicTree(Box.cube([0.25, -0.5], 1.5), 4)
        parents = enumerate_dyadic_cubes(tree, depth - 1)
        children = enumerate_dyadic_cubes(tree, depth)
        for ch in children:
            owners = [p for p in parents if p.contains_box(ch)]
            assert len(owners) == 1


class TestFieldBasics:
    def test_resolution_must_be_power_of_two(self):
        with pytest.raises(DomainError):
            Field.zeros(Box.cube(0.0, 1.0), 3)

    def test_node_weight_invariant(self):
        f = Field.zeros(Box.cube(0.0, 1.5), 64)
        assert f.node_weight == pytest.approx((2 * 1.5 / 64) ** 1)
        assert f.samples.size == 64

    def test_samples_are_immutable(self):
        f = Field.zeros(Box.cube(0.0, 1.0), 8)
        with pytest.raises(ValueError):
            f.samples[0] = 1.0

    @given(seed=st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=15, deadline=None)
    def test_csv_round_trip_bit_faithful(self, seed, tmp_path_factory):
        rng = np.random.default_rng(seed)
        box = Box.cube(rng.uniform(-2, 2), rng.uniform(0.5, 3.0))
        f = Field(box, 16, rng.standard_normal(16) * 10.0 ** rng.integers(-8, 8))
        path = tmp_path_factory.mktemp("csv") / "f.csv"
        write_field_csv(f, path)
        g = read_field_csv(path)
        assert g.resolution == f.resolution
        assert np.array_equal(g.samples, f.samples)  # bit-faithful values
        assert np.allclose(g.box.center, f.box.center, atol=1e-12)

    def test_csv_round_trip_2d(self, tmp_path):
        box = Box.cube([0.5, -0.25], 1.0)
        rng = np.random.default_rng(0)
        f = Field(box, 8, rng.standard_normal((8, 8)))
        write_field_csv(f, tmp_path / "f2.csv")
        g = read_field_csv(tmp_path / "f2.csv")
        assert np.array_equal(g.samples, f.samples)
        assert g.n == 2
