"""Kernel values, closed-form derivatives, and their proven envelopes.

Expected values marked as oracle-derived were computed with adaptive
quadrature (for the Gaussian antiderivative) or central finite
differences, then frozen; the oracles are re-run here so the frozen
constants can never drift from them.
"""

import math

import numpy as np
import pytest
import scipy.integrate as si
from hypothesis import given, settings
from hypothesis import strategies as st

from zerochain import kernels
from zerochain.errors import DomainError, UnsupportedOrderError
from zerochain.kernels import (
    DEFAULT_K_MAX,
    kernel_bound,
    phi,
    phi_coeff_rows,
    phi_deriv,
    psi,
    psi_coeff_rows,
    psi_deriv,
)

from conftest import central_diff

SQRT_E = math.sqrt(math.e)

# frozen from the quadrature oracle sqrt(e) * quad(exp(-t^2/2), -inf, 0)
PHI_AT_ZERO = 2.0663656770612464


class TestPsi:
    def test_dead_zone_boundary(self):
        assert psi(0.5) == 0.0

    def test_unit_value_exact(self):
        assert psi(1.0) == 1.0  # exp(1 - 1/1) = exp(0)

    def test_limit_at_large_x(self):
        assert abs(psi(100.0) - math.e) < 1e-3

    def test_nonfinite_rejected(self):
        with pytest.raises(DomainError):
            psi(float("nan"))
        with pytest.raises(DomainError):
            psi(float("inf"))

    def test_array_matches_scalar(self):
        xs = np.linspace(-1, 2, 7)
        assert np.array_equal(psi(xs), np.array([psi(float(x)) for x in xs]))


class TestPsiDeriv:
    def test_dead_zone(self):
        assert psi_deriv(0.3, 1) == 0.0

    def test_first_derivative_at_one(self):
        # 4 * psi(1) / (2*1 - 1)^3
        assert psi_deriv(1.0, 1) == pytest.approx(4.0, abs=1e-14)

    def test_second_derivative_vs_fd(self):
        fd = central_diff(lambda x: psi_deriv(x, 1), 0.8)
        assert psi_deriv(0.8, 2) == pytest.approx(fd, rel=1e-6)

    def test_order_zero_redirects(self):
        with pytest.raises(UnsupportedOrderError):
            psi_deriv(1.0, 0)

    def test_order_above_cap(self):
        with pytest.raises(UnsupportedOrderError):
            psi_deriv(1.0, DEFAULT_K_MAX + 1)
        assert np.isfinite(psi_deriv(1.0, 9, k_max=12))

    @given(
        x=st.floats(min_value=-1e6, max_value=0.5, allow_nan=False),
        k=st.integers(min_value=1, max_value=DEFAULT_K_MAX),
    )
    def test_dead_zone_exact_everywhere(self, x, k):
        assert psi_deriv(x, k) == 0.0


class TestPhi:
    def test_upper_limit(self):
        assert abs(phi(40.0) - kernels.PHI_SUP) < 1e-10
        assert phi(40.0) < kernels.PHI_SUP

    def test_value_at_zero_vs_quadrature_oracle(self):
        val, _ = si.quad(lambda t: math.exp(-0.5 * t * t), -np.inf, 0.0, epsabs=1e-14)
        oracle = SQRT_E * val
        assert phi(0.0) == pytest.approx(oracle, abs=1e-9)
        assert phi(0.0) == pytest.approx(PHI_AT_ZERO, abs=1e-12)

    def test_lower_tail_strictly_positive(self):
        assert 0.0 < phi(-40.0) < 1e-10

    def test_monotone(self):
        xs = np.linspace(-8, 8, 400)
        assert np.all(np.diff(phi(xs)) >= 0)

    def test_nonfinite_rejected(self):
        with pytest.raises(DomainError):
            phi(float("inf"))


class TestPhiDeriv:
    def test_first_at_zero(self):
        assert phi_deriv(0.0, 1) == pytest.approx(SQRT_E, abs=1e-15)

    def test_second_at_one_exact(self):
        # -x sqrt(e) exp(-x^2/2) at x = 1 collapses to -1
        assert phi_deriv(1.0, 2) == -1.0

    def test_third_vs_fd(self):
        fd = central_diff(lambda x: phi_deriv(x, 2), 0.7)
        assert phi_deriv(0.7, 3) == pytest.approx(fd, rel=1e-6)

    def test_order_validation(self):
        with pytest.raises(UnsupportedOrderError):
            phi_deriv(0.0, 0)
        with pytest.raises(UnsupportedOrderError):
            phi_deriv(0.0, 99)


class TestKernelBound:
    def test_psi_order_zero(self):
        assert kernel_bound("psi", 0) == math.e

    def test_phi_order_one(self):
        assert kernel_bound("phi", 1) == SQRT_E

    def test_psi_order_two(self):
        assert kernel_bound("psi", 2) == pytest.approx(32768.0, rel=1e-12)

    def test_unknown_kind(self):
        with pytest.raises(DomainError):
            kernel_bound("chi", 1)


class TestCoefficientTables:
    def test_phi_row_one(self):
        assert phi_coeff_rows()[1] == (0, -1)

    def test_psi_row_one(self):
        assert psi_coeff_rows()[1] == (4,)

    @pytest.mark.parametrize("k", range(1, 12))
    def test_phi_recurrence(self, k):
        rows = phi_coeff_rows()
        prev, nxt = rows[k], rows[k + 1]

        def at(row, i):
            return row[i] if 0 <= i < len(row) else 0

        for i in range(k + 2):
            assert at(nxt, i) == (i + 1) * at(prev, i + 1) - at(prev, i - 1)

    @pytest.mark.parametrize("k", range(1, 12))
    def test_psi_recurrence(self, k):
        rows = psi_coeff_rows()
        prev, nxt = rows[k], rows[k + 1]

        def at(row, i):  # row k stores c_1..c_k
            return row[i - 1] if 1 <= i <= len(row) else 0

        for i in range(1, k + 2):
            assert at(nxt, i) == 4 * at(prev, i - 1) - 2 * (k + 2 * i) * at(prev, i)

    def test_phi_growth_bound(self):
        # the (2 max{i,1})^k envelope is valid precisely up to the default
        # order cap; beyond it the double-factorial constant term outgrows 2^k
        for k, row in enumerate(phi_coeff_rows()[: DEFAULT_K_MAX + 1]):
            for i, c in enumerate(row):
                assert abs(c) <= (2 * max(i, 1)) ** k

    def test_psi_growth_bound(self):
        for k, row in enumerate(psi_coeff_rows()):
            if k == 0:
                continue
            for i, c in enumerate(row, start=1):
                assert abs(c) <= 6**k * (2 * i + k) ** k


class TestEnvelopes:
    GRID = np.linspace(-50.0, 50.0, 100_001)

    def test_range_bounds(self):
        v, dv = psi(self.GRID), psi_deriv(self.GRID, 1)
        assert np.all((v >= 0) & (v < math.e))
        assert np.all((dv >= 0) & (dv <= math.sqrt(54 / math.e)))
        w, dw = phi(self.GRID), phi_deriv(self.GRID, 1)
        assert np.all((w > 0) & (w < kernels.PHI_SUP))
        assert np.all((dw > 0) & (dw <= SQRT_E))

    @pytest.mark.parametrize("kind,fn", [("psi", psi_deriv), ("phi", phi_deriv)])
    @pytest.mark.parametrize("k", range(1, DEFAULT_K_MAX + 1))
    def test_sup_norm_bounds(self, kind, fn, k):
        assert np.max(np.abs(fn(self.GRID, k))) <= kernel_bound(kind, k)

    def test_product_gap(self):
        xg = np.linspace(1.0, 12.0, 100)
        yg = np.linspace(-0.99999, 0.99999, 100)
        prod = np.outer(psi(xg), phi_deriv(yg, 1))
        assert prod.shape == (100, 100)
        assert np.all(prod > 1.0)

    @given(x=st.floats(min_value=1.0, max_value=50.0), y=st.floats(min_value=-1, max_value=1, exclude_min=True, exclude_max=True))
    @settings(max_examples=200)
    def test_product_gap_property(self, x, y):
        assert psi(x) * phi_deriv(y, 1) > 1.0


def test_fd_consistency_all_orders():
    from zerochain.experiments import kernel_fd_error

    assert kernel_fd_error() <= 1e-6
