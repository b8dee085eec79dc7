import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epps_pulley.errors import ContractViolation
from epps_pulley.kernels import (
    TuningBeta,
    as_beta,
    iterated_trace,
    kernel_k,
    kernel_k0,
    nystrom_matrix,
    phi,
    weight_density,
)
from epps_pulley.quadrature import gauss_hermite_rule

from conftest import BETAS

coords = st.floats(-8, 8, allow_nan=False)


class TestTuningBeta:
    @pytest.mark.parametrize("bad", [0, -1.0, math.inf, math.nan, "1", None, True])
    def test_rejects_invalid(self, bad):
        with pytest.raises(ContractViolation):
            TuningBeta(bad)

    def test_coerces_to_float(self):
        b = TuningBeta(2)
        assert b.value == 2.0 and isinstance(b.value, float)
        assert float(b) == 2.0

    def test_as_beta_passthrough(self):
        b = TuningBeta(0.5)
        assert as_beta(b) is b
        assert as_beta(0.5) == b

    def test_immutable(self):
        with pytest.raises(AttributeError):
            TuningBeta(1.0).value = 2.0


class TestWeightDensity:
    @pytest.mark.parametrize("beta", BETAS)
    def test_normal_density(self, beta):
        t = np.linspace(-3, 3, 13)
        expected = np.exp(-t * t / (2 * beta**2)) / (beta * math.sqrt(2 * math.pi))
        np.testing.assert_allclose(weight_density(t, beta), expected, rtol=1e-15)


class TestKernelK0:
    def test_examples(self):
        assert kernel_k0(0.0, 0.0) == 1.0
        assert kernel_k0(1.0, -1.0) == pytest.approx(0.1353352832, abs=1e-10)

    @given(coords, coords)
    def test_symmetric_and_bounded(self, s, t):
        v = kernel_k0(s, t)
        assert v == kernel_k0(t, s)
        assert 0.0 <= v <= 1.0
        assert kernel_k0(s, s) == 1.0


class TestKernelK:
    def test_origin(self):
        assert kernel_k(0.0, 0.0) == 0.0

    def test_one_one(self):
        assert kernel_k(1.0, 1.0) == pytest.approx(1 - 2.5 * math.exp(-1), abs=1e-15)
        assert kernel_k(1.0, 1.0) == pytest.approx(0.0803013971, abs=1e-10)

    @given(coords, coords)
    def test_symmetric(self, s, t):
        assert kernel_k(s, t) == kernel_k(t, s)

    @given(coords, coords)
    def test_rank_three_split(self, s, t):
        split = kernel_k0(s, t) - sum(phi(j, s) * phi(j, t) for j in (1, 2, 3))
        assert kernel_k(s, t) == pytest.approx(split, abs=1e-14)

    def test_diagonal_nonnegative(self):
        s = np.linspace(-8, 8, 1601)
        assert np.all(kernel_k(s, s) >= -1e-14)

    def test_small_argument_keeps_relative_accuracy(self):
        # exp(u) - 1 - u - u**2/2 ~ u**3/6 with u = st
        s, t = 1e-3, 2e-3
        u = s * t
        expected = math.exp(-(s * s + t * t) / 2) * (u**3 / 6 + u**4 / 24)
        assert kernel_k(s, t) == pytest.approx(expected, rel=1e-13)

    def test_broadcasts(self):
        s = np.linspace(-2, 2, 5)
        out = kernel_k(s[:, None], s[None, :])
        assert out.shape == (5, 5)
        np.testing.assert_array_equal(out, out.T)


class TestPhi:
    def test_values(self):
        assert phi(3, 0.0) == 1.0
        assert phi(1, 0.0) == 0.0 and phi(2, 0.0) == 0.0
        assert phi(1, 2.0) == pytest.approx(4 * math.exp(-2) / math.sqrt(2))

    @pytest.mark.parametrize("j", [0, 4, -1])
    def test_bad_index(self, j):
        with pytest.raises(ContractViolation):
            phi(j, 1.0)


class TestIteratedTrace:
    def test_first_trace_beta1(self):
        rule = gauss_hermite_rule(300, 1.0)
        assert iterated_trace(1, 1.0, rule) == pytest.approx(1 - math.sqrt(3) / 2, abs=1e-10)

    def test_second_trace_beta1_exact_expression(self):
        # sum lambda**2 at beta=1 in closed form
        exact = 1 / math.sqrt(5) + 5 / 12 - 155 / (128 * math.sqrt(2))
        rule = gauss_hermite_rule(300, 1.0)
        assert iterated_trace(2, 1.0, rule) == pytest.approx(exact, abs=1e-12)

    def test_fourth_trace_beta1(self):
        rule = gauss_hermite_rule(300, 1.0)
        assert iterated_trace(4, 1.0, rule) == pytest.approx(0.00003447197917, abs=1e-10)

    @pytest.mark.parametrize("beta", BETAS)
    def test_decreasing_in_m(self, beta):
        rule = gauss_hermite_rule(200, beta)
        values = [iterated_trace(m, beta, rule) for m in range(1, 6)]
        assert all(a > b > 0 for a, b in zip(values, values[1:]))

    def test_rule_mismatch(self):
        with pytest.raises(ContractViolation):
            iterated_trace(1, 2.0, gauss_hermite_rule(50, 1.0))

    @pytest.mark.parametrize("m", [0, -1, 1.5, True])
    def test_bad_power(self, m):
        with pytest.raises(ContractViolation):
            iterated_trace(m, 1.0, gauss_hermite_rule(20, 1.0))

    def test_nystrom_matrix_symmetric_finite(self):
        b = nystrom_matrix(gauss_hermite_rule(300, 3.0))
        assert np.all(np.isfinite(b))
        np.testing.assert_array_equal(b, b.T)
