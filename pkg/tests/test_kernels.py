import math

import numpy as np
import pytest
import scipy.integrate

from sqflab.errors import DomainError, PreconditionError
from sqflab.grid import log_scale_nodes
from sqflab.kernels import (
    ComposedKernel,
    HSample,
    HSampleConfig,
    KernelSampleConfig,
    ZQuadConfig,
    audit_cz_conditions,
    audit_nonsmooth_assumption,
    broken_family,
    eval_composed_kernel,
    heat_identity,
    make_kernel_family,
    nonsmooth_composed,
    smooth_family,
    standard_bump,
)


def dv_norm(kernel, x, Y, v_min=1e-6, v_max=1e6, ppd=32):
    v, w = log_scale_nodes(v_min, v_max, ppd)
    Y = np.asarray(Y, dtype=float)
    vals = kernel.eval(v, np.asarray(x, dtype=float), np.broadcast_to(Y, (len(v),) + Y.shape))
    return math.sqrt(float(np.dot(w, np.square(vals))))


class TestSmoothFamilyOracle:
    def test_m1_size_profile_matches_substitution_oracle(self):
        # oracle: substituting u = r/v turns the dv/v integral into
        # r^{-2} * int_0^inf u psi(u)^2 du with psi(u) = u exp(-u^2)
        moment = scipy.integrate.quad(lambda u: u * (u * math.exp(-(u**2))) ** 2, 0, np.inf)[0]
        assert moment == pytest.approx(1.0 / 8.0, rel=1e-10)
        c = math.sqrt(moment)
        k = smooth_family(1, 1)
        for r in [0.05, 0.3, 1.7, 8.0]:
            s = dv_norm(k, [0.0], [[r]])
            assert s == pytest.approx(c / r, rel=1e-3)

    def test_shift_invariance_exact_on_dyadic_shifts(self):
        k = smooth_family(2, 1)
        x = np.array([0.25])
        Y = np.array([[-0.5], [1.75]])
        a = k.eval(1.3, x, Y[None])
        b = k.eval(1.3, x + 0.5, (Y + 0.5)[None])
        assert np.array_equal(a, b)

    def test_shift_invariance_generic(self):
        k = smooth_family(2, 1)
        x = np.array([0.1])
        Y = np.array([[-0.37], [0.9]])
        a = k.eval(0.7, x, Y[None])
        b = k.eval(0.7, x + 0.123, (Y + 0.123)[None])
        assert np.allclose(a, b, rtol=1e-12)

    def test_separable_flags(self):
        assert smooth_family(2, 1).separable
        assert not broken_family(2, 1).separable
        with pytest.raises(DomainError):
            make_kernel_family("mystery", 1, 1)


class TestCZAudit:
    def test_smooth_m1_exponents(self):
        k = smooth_family(1, 1)
        audit = audit_cz_conditions(k, KernelSampleConfig(count=48, seed=5))
        assert audit.size.fitted_exponent == pytest.approx(-1.0, abs=0.05)
        assert abs(audit.smooth_x.fitted_exponent - 1.0) <= 0.1
        assert abs(audit.smooth_y.fitted_exponent - 1.0) <= 0.1
        assert audit.verdict == "PASS"

    def test_smooth_m2_exponents(self):
        k = smooth_family(2, 1)
        audit = audit_cz_conditions(k, KernelSampleConfig(count=48, seed=5))
        assert audit.size.fitted_exponent == pytest.approx(-2.0, abs=0.1)
        assert audit.verdict == "PASS"

    def test_broken_family_fails_size_audit(self):
        k = broken_family(2, 1)
        audit = audit_cz_conditions(k, KernelSampleConfig(count=48, seed=5))
        assert audit.size.verdict == "FAIL"
        assert audit.size.fitted_exponent == pytest.approx(-1.5, abs=0.1)
        # measured constant grows with the separation range
        table = [t for t in audit.size.decile_ratios if math.isfinite(t)]
        assert table[-1] > 2.0 * table[0]

    def test_monotone_in_sample_count(self):
        k = smooth_family(1, 1)
        small = audit_cz_conditions(k, KernelSampleConfig(count=24, seed=9))
        big = audit_cz_conditions(k, KernelSampleConfig(count=48, seed=9))
        # same seed: the first 12 baseline samples of `small` reappear in `big`
        assert big.size.measured_constant >= 0.99 * small.size.measured_constant

    def test_report_serializes(self):
        k = smooth_family(1, 1)
        audit = audit_cz_conditions(k, KernelSampleConfig(count=16, seed=1))
        d = audit.size.to_json_dict()
        assert d["condition"] == "cz-size"
        assert len(d["decile_ratios"]) == 10


class TestApproxIdentity:
    def test_heat_mass_normalization(self):
        aid = heat_identity(1)
        for t in [1e-4, 1e-2, 1.0, 100.0]:
            w = aid.scale(t)
            z = np.linspace(-25 * w, 25 * w, 20001)[:, None]
            mass = np.trapezoid(aid.kernel(t, np.zeros(1), z), z[:, 0])
            assert mass == pytest.approx(1.0, abs=1e-6)

    def test_profile_is_positive_bounded_decreasing(self):
        aid = heat_identity(1)
        r = np.linspace(0.0, 40.0, 500)
        h = aid.profile(r)
        assert np.all(h > 0)
        assert np.all(np.diff(h) <= 0)
        assert h[0] == pytest.approx((4 * math.pi) ** -0.5)

    def test_measured_decay_constant_finite(self):
        aid = heat_identity(1)
        c = aid.measured_decay_constant(1.0, [1e-3, 0.1, 10.0], np.linspace(0.0, 50.0, 300))
        assert 0 < c < math.inf

    def test_bump_support(self):
        u = np.array([-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0])
        assert np.allclose(standard_bump(u), [0, 0, 0.5, 1.0, 0.5, 0, 0])


class TestComposedKernel:
    def test_identity_limit_reproduces_kernel(self):
        ck = nonsmooth_composed(2, 1)
        x = np.array([0.3])
        ys = np.array([[-0.4], [0.9]])
        for v in [0.4, 1.0, 3.0]:
            direct = float(ck.base.eval(v, x, ys[None])[0])
            got = eval_composed_kernel(ck, 1e-8, v, x, ys, quad=ZQuadConfig(nodes=192))
            assert got.value == pytest.approx(direct, rel=1e-2)

    def test_zero_kernel_composes_to_zero(self):
        zero = smooth_family(2, 1)
        zero = type(zero)(m=2, n=1, label="zero", evaluator=lambda v, x, Y: np.zeros(len(Y)))
        ck = ComposedKernel(base=zero, identity=heat_identity(1))
        out = eval_composed_kernel(ck, 0.5, 1.0, [0.0], [[0.5], [-0.5]])
        assert out.value == 0.0

    def test_m2_matches_dense_convolution_oracle(self):
        # oracle: brute-force trapezoid convolution on a dense 4096-node line
        ck = nonsmooth_composed(2, 1)
        t, v = 0.25, 1.0
        x = np.array([0.3])
        ys = np.array([[-0.4], [0.9]])
        z = np.linspace(x[0] - 10.0, x[0] + 10.0, 4096)
        kv = ck.base.eval(v, z[:, None], np.broadcast_to(ys, (len(z), 2, 1)))
        at = ck.identity.kernel(t, x, z[:, None])
        oracle = np.trapezoid(kv * at, z)
        got = eval_composed_kernel(ck, t, v, x, ys)
        assert got.value == pytest.approx(float(oracle), rel=1e-3)
        assert got.tail_bound < 1e-12

    def test_m1_matches_gaussian_moment_oracle(self):
        # oracle: closed-form Gaussian-moment integral for the m=1 profile
        ck = nonsmooth_composed(1, 1)
        t, v = 0.04, 0.8
        x, y = 0.7, -0.2
        mu = x - y
        a = 1.0 / v**2 + 1.0 / (4 * t)
        b = mu / (4 * t)
        c = mu**2 / (4 * t)
        oracle = (
            (1.0 / v**2)
            * (4 * math.pi * t) ** -0.5
            * (b / a)
            * math.sqrt(math.pi / a)
            * math.exp(b * b / a - c)
        )
        got = eval_composed_kernel(ck, t, v, [x], [[y]])
        assert got.value == pytest.approx(oracle, rel=1e-3)

    def test_slot_one_composition_differs_from_slot_zero(self):
        ck0 = nonsmooth_composed(2, 1, slot=0)
        ck1 = nonsmooth_composed(2, 1, slot=1)
        args = (0.04, 1.0, [0.3], [[-0.4], [0.9]])
        v0 = eval_composed_kernel(ck0, *args).value
        v1 = eval_composed_kernel(ck1, *args).value
        assert v0 != pytest.approx(v1, rel=1e-6)


class TestAssumptionAudits:
    CFG = HSampleConfig(count=24, seed=3, points_per_decade=16)

    def test_h2_size_passes_on_nonsmooth_family(self):
        ck = nonsmooth_composed(2, 1)
        rep = audit_nonsmooth_assumption(ck, "h2-size", self.CFG)
        assert rep.verdict == "PASS"
        assert math.isfinite(rep.measured_constant)
        assert rep.stability <= 2.0

    def test_h2_smooth_slope_positive(self):
        ck = nonsmooth_composed(2, 1)
        rep = audit_nonsmooth_assumption(ck, "h2-smooth", self.CFG)
        assert rep.fitted_exponent > 0
        assert rep.verdict == "PASS"
        assert len(rep.details["phi_terms"]) == rep.sample_count

    def test_h3_passes(self):
        ck = nonsmooth_composed(2, 1)
        rep = audit_nonsmooth_assumption(ck, "h3", self.CFG)
        assert rep.verdict == "PASS"

    def test_h3_with_identical_points_gives_zero_left_side(self):
        ck = nonsmooth_composed(2, 1)
        x = np.array([0.1])
        sample = HSample(x=x, Y=np.array([[-0.9], [1.3]]), t=0.01, x_prime=x.copy())
        rep = audit_nonsmooth_assumption(ck, "h3", self.CFG, explicit_samples=[sample])
        assert rep.measured_constant == 0.0
        assert rep.verdict == "PASS"

    def test_h1_runs(self):
        ck = nonsmooth_composed(2, 1)
        rep = audit_nonsmooth_assumption(ck, "h1", self.CFG)
        assert math.isfinite(rep.measured_constant)

    def test_violating_sample_rejected_before_any_evaluation(self):
        def bomb(v, x, Y):
            raise AssertionError("kernel must not be evaluated")

        base = smooth_family(2, 1)
        armed = type(base)(m=2, n=1, label="armed", evaluator=bomb)
        ck = ComposedKernel(base=armed, identity=heat_identity(1))
        bad = HSample(x=np.zeros(1), Y=np.array([[0.05], [1.0]]), t=4.0)  # t^(1/2)=2 too large
        with pytest.raises(PreconditionError):
            audit_nonsmooth_assumption(ck, "h2-size", self.CFG, explicit_samples=[bad])

    def test_unknown_assumption_rejected(self):
        ck = nonsmooth_composed(2, 1)
        with pytest.raises(DomainError):
            audit_nonsmooth_assumption(ck, "h9", self.CFG)
