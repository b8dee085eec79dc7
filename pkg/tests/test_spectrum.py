import math
import warnings

import numpy as np
import pytest

from epps_pulley.cumulants import kappa1_closed
from epps_pulley.errors import ConsistencyError, ContractViolation
from epps_pulley.kernels import iterated_trace
from epps_pulley.mercer import mercer_basis
from epps_pulley.quadrature import gauss_hermite_rule
from epps_pulley.spectrum import (
    ConvergenceWarning,
    coefficients,
    find_spectrum,
    nystrom_spectrum,
    secular_even,
    secular_odd,
)
from epps_pulley.spectrum import _count_above, _sector
from epps_pulley.verify import parity_zero_error, parseval_errors

from conftest import BETAS, MAIN_BETAS, nystrom, spectrum


@pytest.fixture(scope="module")
def beta1():
    basis = mercer_basis(1.0, 150)
    return basis, coefficients(basis)


class TestCoefficients:
    def test_parity_zeros_exact(self, beta1):
        _, table = beta1
        assert table.a[1, 0] == 0.0
        assert table.a[0, 1] == 0.0
        assert np.all(table.a[1::2, [0, 2]] == 0.0)
        assert np.all(table.a[0::2, 1] == 0.0)

    @pytest.mark.parametrize("beta", BETAS)
    def test_quadrature_agrees_with_closed_form(self, beta):
        basis = mercer_basis(beta, 80)
        closed = coefficients(basis).a
        quad = coefficients(basis, gauss_hermite_rule(100, 1.0)).a
        np.testing.assert_allclose(quad, closed, rtol=1e-10, atol=1e-15)

    @pytest.mark.parametrize("beta", BETAS)
    def test_quadrature_parity_zeros(self, beta):
        assert parity_zero_error(beta) < 1e-13

    @pytest.mark.parametrize("beta", BETAS)
    def test_parseval(self, beta):
        assert parseval_errors(beta).max() < 1e-10

    def test_rule_too_small(self):
        with pytest.raises(ContractViolation):
            coefficients(mercer_basis(1.0, 100), gauss_hermite_rule(40, 1.0))

    def test_read_only(self, beta1):
        with pytest.raises(ValueError):
            beta1[1].a[0, 0] = 1.0


class TestSecular:
    def test_limits(self, beta1):
        basis, table = beta1
        assert secular_odd(1e12, table, basis) == pytest.approx(1.0, abs=1e-11)
        assert secular_even(1e12, table, basis) == pytest.approx(1.0, abs=1e-11)

    def test_sign_flip_across_odd_pole(self, beta1):
        basis, table = beta1
        pole = basis.eigenvalues[1]
        lo = secular_odd(pole - 1e-6, table, basis)
        hi = secular_odd(pole + 1e-6, table, basis)
        assert lo * hi < 0

    def test_roots_beta1(self, beta1):
        basis, table = beta1
        assert secular_odd(0.0742748 * (1 - 1e-5), table, basis) * secular_odd(0.0742748 * (1 + 1e-5), table, basis) < 0
        assert secular_even(0.0448104 * (1 - 1e-5), table, basis) * secular_even(0.0448104 * (1 + 1e-5), table, basis) < 0

    def test_odd_decreasing_between_poles(self, beta1):
        basis, table = beta1
        rho = np.geomspace(basis.eigenvalues[3] * 1.0001, basis.eigenvalues[1] * 0.9999, 200)
        assert np.all(np.diff(secular_odd(rho, table, basis)) < 0)

    def test_even_double_pole_cancels(self, beta1):
        basis, table = beta1
        pole = basis.eigenvalues[2]
        scaled = [h * h * abs(secular_even(pole + h, table, basis)) for h in (1e-4, 1e-6, 1e-8)]
        assert max(scaled) < 10 * scaled[0] + 1e-12

    def test_pole_raises(self, beta1):
        basis, table = beta1
        with pytest.raises(ContractViolation):
            secular_odd(basis.eigenvalues[1], table, basis)
        with pytest.raises(ContractViolation):
            secular_even(basis.eigenvalues[0], table, basis)


class TestFindSpectrum:
    def test_beta1_leading(self):
        ev = spectrum(1.0).eigenvalues
        np.testing.assert_allclose(ev[:4], [7.42748e-02, 4.48104e-02, 8.41907e-03, 4.58684e-03], rtol=5e-6)

    def test_beta_half_leading(self):
        assert spectrum(0.5).eigenvalues[0] == pytest.approx(1.01443e-02, rel=5e-6)

    def test_beta2_partial_sum(self):
        assert math.fsum(spectrum(2.0).eigenvalues) == pytest.approx(4.19722e-01, rel=5e-5)

    def test_largest_is_odd(self):
        assert spectrum(1.0).parity[0] == "odd"

    @pytest.mark.parametrize("beta", BETAS)
    def test_invariants(self, beta):
        res = spectrum(beta)
        ev = res.eigenvalues
        assert len(res) == 20 and len(res.parity) == 20
        assert np.all(ev > 0) and np.all(ev < 1)
        assert np.all(np.diff(ev) < 0)
        assert math.fsum(ev) <= kappa1_closed(beta) + 1e-9
        poles = mercer_basis(beta, 150).eigenvalues
        assert np.min(np.abs(ev[:, None] / poles[None, :] - 1.0)) > 1e-12
        assert np.all(res.residuals <= 1e-6)
        lo, hi = res.brackets[:, 0], res.brackets[:, 1]
        assert np.all((lo <= ev) & (ev <= hi))

    @pytest.mark.parametrize("beta", MAIN_BETAS)
    def test_parity_split(self, beta):
        # a root of one sector is never a root of the other: the other
        # sector's eigenvalue count is constant across a tight window
        res = spectrum(beta)
        basis = mercer_basis(beta, 150)
        table = coefficients(basis)
        for v, p in zip(res.eigenvalues, res.parity):
            poles, u = _sector(table, basis, "even" if p == "odd" else "odd")
            below, above = _count_above(np.array([v * (1 - 1e-8), v * (1 + 1e-8)]), poles, u)
            assert below == above

    @pytest.mark.parametrize("beta", MAIN_BETAS)
    def test_truncation_stability(self, beta):
        a = find_spectrum(beta, 20, J=100).eigenvalues
        b = find_spectrum(beta, 20, J=200).eigenvalues
        np.testing.assert_allclose(a, b, rtol=1e-10)

    @pytest.mark.parametrize("beta", [1.0, 2.0, 3.0])
    def test_power_sums_match_traces(self, beta):
        res = find_spectrum(beta, 90)
        rule = gauss_hermite_rule(300, beta)
        ev = res.eigenvalues
        tail = float((ev[-1] + ev[-2]) * (ev[-1] / ev[-3]) / (1 - ev[-1] / ev[-3]))
        assert math.fsum(ev) + tail == pytest.approx(iterated_trace(1, beta, rule), rel=1e-6)
        for m in (2, 3, 4):
            assert math.fsum(ev**m) == pytest.approx(iterated_trace(m, beta, rule), rel=1e-6)

    def test_count_zero(self):
        res = find_spectrum(1.0, 0)
        assert len(res) == 0

    def test_count_too_large(self):
        with pytest.raises(ContractViolation):
            find_spectrum(1.0, 101, J=150)

    def test_no_warnings_on_grid(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error", ConvergenceWarning)
            find_spectrum(3.0, 10)


class TestNystrom:
    @pytest.mark.parametrize("beta", MAIN_BETAS)
    def test_agrees_with_secular(self, beta):
        np.testing.assert_allclose(nystrom(beta), spectrum(beta).eigenvalues[:10], rtol=1e-6)

    def test_beta1_tight(self):
        np.testing.assert_allclose(nystrom(1.0), spectrum(1.0).eigenvalues[:10], rtol=1e-7)

    def test_beta3_leading(self):
        assert nystrom(3.0)[0] == pytest.approx(1.59960e-01, rel=5e-5)

    def test_trace(self):
        rule = gauss_hermite_rule(300, 1.0)
        # eigenvalues past the 75th are below 1e-16 at beta = 1
        ev = nystrom_spectrum(1.0, rule, count=75)
        assert math.fsum(ev[ev > 0]) == pytest.approx(kappa1_closed(1.0), abs=1e-9)

    def test_order_too_small(self):
        with pytest.raises(ContractViolation):
            nystrom_spectrum(1.0, gauss_hermite_rule(30, 1.0), count=10)

    def test_beta_mismatch(self):
        with pytest.raises(ContractViolation):
            nystrom_spectrum(1.0, gauss_hermite_rule(100, 2.0), count=10)
