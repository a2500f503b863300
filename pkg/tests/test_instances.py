"""Chain function, soft projection, bump, scaled instances, and scaling math."""

import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zerochain.errors import DegenerateBudgetError, DomainError, VacuousBoundError
from zerochain.instances import (
    DistanceInstance,
    PlainInstance,
    RotatedInstance,
    bump_grad,
    bump_value,
    default_radius,
    fbar_grad,
    fbar_hess,
    fbar_support,
    fbar_value,
    instance_from_string,
    instance_to_string,
    large_gradient_witness,
    load_instance,
    save_instance,
    scaling_for,
    smoothness_constant,
    soft_project,
)
from zerochain.randmat import SeededRng, sample_orthogonal

from conftest import central_grad

SQRT_E = math.sqrt(math.e)
FBAR_AT_ZERO = -2.0663656770612464  # -psi(1)*phi(0), frozen from the quadrature oracle


class TestFbarValue:
    def test_single_coordinate_origin(self):
        assert fbar_value(1, [0.0]) == pytest.approx(FBAR_AT_ZERO, abs=1e-12)

    def test_tail_terms_vanish_at_origin(self):
        assert fbar_value(5, np.zeros(5)) == pytest.approx(FBAR_AT_ZERO, abs=1e-12)

    def test_value_floor(self, rng):
        T = 10
        for _ in range(200):
            x = 3.0 * rng.standard_normal(T)
            assert fbar_value(T, x) > -12.0 * T

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            fbar_value(3, np.zeros(4))


class TestFbarGrad:
    def test_origin(self):
        g = fbar_grad(4, np.zeros(4))
        assert g[0] == pytest.approx(-SQRT_E, abs=1e-15)
        assert np.all(g[1:] == 0.0)

    @given(a=st.floats(min_value=-5, max_value=5, allow_nan=False))
    @settings(max_examples=100)
    def test_support_one_active_coordinate(self, a):
        g = fbar_grad(6, np.array([a, 0, 0, 0, 0, 0.0]))
        assert np.all(g[2:] == 0.0)

    def test_matches_fd(self, rng):
        T = 8
        for _ in range(20):
            x = rng.standard_normal(T) * 1.5
            fd = central_grad(lambda v: fbar_value(T, v), x)
            g = fbar_grad(T, x)
            assert np.allclose(g, fd, rtol=1e-6, atol=1e-8)

    def test_last_coordinate_consistent_with_value(self, rng):
        # pair terms beyond position T must not leak into the gradient
        T = 4
        x = np.array([1.2, 1.1, -0.9, 2.0])
        fd = central_grad(lambda v: fbar_value(T, v), x)
        assert fbar_grad(T, x)[-1] == pytest.approx(fd[-1], rel=1e-6)

    def test_norm_cap(self, rng):
        T = 12
        for _ in range(200):
            x = rng.standard_normal(T) * 2.0
            assert np.linalg.norm(fbar_grad(T, x)) <= 23.0 * math.sqrt(T)


class TestFbarHess:
    def test_origin_entry(self):
        H = fbar_hess(3, np.zeros(3))
        assert H[0, 0] == 0.0  # phi''(0) = 0

    def test_matches_fd_of_grad(self, rng):
        T = 6
        for _ in range(10):
            x = rng.standard_normal(T) * 1.5
            H = fbar_hess(T, x)
            fd = np.column_stack(
                [central_grad(lambda v, i=i: fbar_grad(T, v)[i], x) for i in range(T)]
            )
            assert np.allclose(H, fd, rtol=1e-5, atol=1e-5)

    def test_exactly_tridiagonal(self, rng):
        T = 9
        x = rng.standard_normal(T) * 3.0
        H = fbar_hess(T, x)
        for i in range(T):
            for j in range(T):
                if abs(i - j) > 1:
                    assert H[i, j] == 0.0

    def test_inactive_block_zero(self):
        # coordinates beyond the active frontier have identically zero rows
        T = 6
        x = np.array([1.0, 0.9, 0.2, 0.0, 0.0, 0.0])
        H = fbar_hess(T, x)
        assert np.all(H[4:, :] == 0.0)
        assert np.all(H[:, 4:] == 0.0)


class TestZeroChainStructure:
    @given(
        data=st.data(),
        i=st.integers(min_value=1, max_value=7),
    )
    @settings(max_examples=100)
    def test_support_propagation(self, data, i):
        T = 8
        x = np.zeros(T)
        for j in range(i - 1):
            x[j] = data.draw(st.floats(min_value=-4, max_value=4, allow_nan=False))
        # derivatives at a point supported on 1..i-1 live on 1..i
        assert fbar_support(T, x) <= set(range(1, i + 1))
        grad_nonzeros = {int(j) + 1 for j in np.flatnonzero(fbar_grad(T, x))}
        assert grad_nonzeros <= set(range(1, i + 1))

    def test_support_examples(self):
        assert fbar_support(3, np.zeros(3)) == {1}
        assert fbar_support(3, np.array([1.0, 0, 0])) == {1, 2}

    def test_support_covers_active_prefix(self):
        T = 6
        x = np.array([1.5, -2.0, 1.1, 0.0, 0.0, 0.0])
        assert fbar_support(T, x) >= {1, 2, 3}

    def test_robust_locking_bitwise(self, rng):
        # perturbing a locked coordinate must not change the value at all
        T = 5
        x = np.array([1.0, 0.8, 0.3, 0.2, 0.0])
        base = fbar_value(T, x)
        for delta in np.linspace(-0.19, 0.19, 21):
            y = x.copy()
            y[3] += delta  # |x_3|, |x_4| < 1/2 keeps the tail locked
            assert fbar_value(T, y) == base

    def test_large_gradient(self, rng):
        T = 7
        for _ in range(10_000 // 10):
            x = rng.standard_normal(T) * 2.0
            if np.all(np.abs(x) >= 1.0):
                continue
            assert np.linalg.norm(fbar_grad(T, x)) > 1.0

    def test_witness_examples(self):
        assert large_gradient_witness(3, np.zeros(3)) == 1
        assert abs(fbar_grad(3, np.zeros(3))[0]) == pytest.approx(SQRT_E, abs=1e-15)
        assert large_gradient_witness(3, np.ones(3)) is None
        assert large_gradient_witness(3, np.array([1.0, 0.5, 1.0])) == 2

    def test_witness_partial_exceeds_one(self, rng):
        T = 6
        for _ in range(500):
            x = rng.standard_normal(T) * 1.5
            j = large_gradient_witness(T, x)
            if j is not None:
                assert abs(fbar_grad(T, x)[j - 1]) > 1.0


class TestSmoothnessSpotCheck:
    @pytest.mark.parametrize("p", [1, 2])
    def test_directional_derivative_lipschitz(self, p, rng):
        T = 6
        ell = smoothness_constant(p)
        for _ in range(50):
            x = rng.standard_normal(T)
            v = rng.standard_normal(T)
            v /= np.linalg.norm(v)
            t1, t2 = rng.uniform(-1, 1, size=2)

            def proj_deriv(t):
                if p == 1:
                    return float(v @ fbar_grad(T, x + t * v))
                return float(v @ fbar_hess(T, x + t * v) @ v)

            if abs(t1 - t2) > 1e-9:
                slope = abs(proj_deriv(t1) - proj_deriv(t2)) / abs(t1 - t2)
                assert slope <= ell


class TestSoftProjection:
    def test_at_origin(self):
        rho, jac = soft_project(np.zeros(4), 5.0)
        assert np.all(rho == 0.0)
        assert np.allclose(jac.as_matrix(), np.eye(4))

    def test_on_the_radius(self):
        R = 3.0
        x = np.array([R, 0.0])
        rho, _ = soft_project(x, R)
        assert np.linalg.norm(rho) == pytest.approx(R / math.sqrt(2), rel=1e-14)

    def test_asymptote(self):
        R = 2.0
        x = np.array([1e6 * R, 0.0, 0.0])
        rho, _ = soft_project(x, R)
        assert abs(np.linalg.norm(rho) - R) < 1e-6 * R

    def test_strictly_inside(self, rng):
        R = 7.0
        for _ in range(100):
            x = rng.standard_normal(5) * rng.uniform(0, 100)
            rho, _ = soft_project(x, R)
            assert np.linalg.norm(rho) < R

    def test_jacobian_matches_fd(self, rng):
        R = 4.0
        x = rng.standard_normal(4) * 3
        _, jac = soft_project(x, R)
        for i in range(4):
            fd = central_grad(lambda v, i=i: soft_project(v, R)[0][i], x)
            assert np.allclose(jac.as_matrix()[i], fd, rtol=1e-6, atol=1e-9)


class TestRotatedInstance:
    def _haar(self, d, T, seed=0):
        return sample_orthogonal(d, T, SeededRng(seed))

    def test_value_at_origin(self):
        inst = RotatedInstance(T=4, U=self._haar(20, 4))
        assert inst.value(np.zeros(20)) == pytest.approx(FBAR_AT_ZERO, abs=1e-12)

    def test_identity_embedding_matches_plain(self, rng):
        T, d = 3, 8
        U = np.zeros((d, T))
        U[:T, :T] = np.eye(T)
        inst = RotatedInstance(T=T, U=U)
        x = np.zeros(d)
        x[:T] = rng.standard_normal(T)
        rho, _ = soft_project(x, inst.R)
        expected = fbar_value(T, rho[:T]) + 0.1 * float(x @ x)
        assert inst.value(x) == pytest.approx(expected, rel=1e-12)

    def test_orthogonal_invariance(self, rng):
        T, d = 4, 12
        U = self._haar(d, T, seed=3)
        Q = sample_orthogonal(d, d, SeededRng(4))
        inst = RotatedInstance(T=T, U=U)
        inst_rot = RotatedInstance(T=T, U=Q @ U)
        for _ in range(10):
            x = rng.standard_normal(d)
            assert inst_rot.value(Q @ x) == pytest.approx(inst.value(x), abs=1e-9)

    def test_grad_at_origin(self):
        T, d = 5, 30
        U = self._haar(d, T, seed=5)
        inst = RotatedInstance(T=T, U=U)
        assert np.allclose(inst.grad(np.zeros(d)), -SQRT_E * U[:, 0], atol=1e-12)

    def test_grad_matches_fd(self, rng):
        T, d = 5, 50
        inst = RotatedInstance(T=T, U=self._haar(d, T, seed=6))
        for _ in range(5):
            x = rng.standard_normal(d) * 2
            fd = central_grad(inst.value, x)
            assert np.allclose(inst.grad(x), fd, rtol=1e-6, atol=1e-7)

    def test_large_norm_gradient_floor(self, rng):
        T, d = 4, 16
        inst = RotatedInstance(T=T, U=self._haar(d, T, seed=7))
        for _ in range(20):
            x = rng.standard_normal(d)
            x *= (inst.R / 2) * rng.uniform(1.0, 3.0) / np.linalg.norm(x)
            assert np.linalg.norm(inst.grad(x)) > math.sqrt(T)

    def test_rejects_non_orthogonal(self):
        with pytest.raises(DomainError):
            RotatedInstance(T=2, U=np.ones((5, 2)))


class TestBump:
    def test_peak_value_exact(self):
        T = 6
        x = np.zeros(T)
        x[-1] = 0.8
        assert bump_value(T, x) == 1.0

    def test_zero_outside_unit_ball(self, rng):
        T = 4
        for _ in range(100):
            x = rng.standard_normal(T)
            x *= rng.uniform(1.0, 5.0) / np.linalg.norm(x)
            assert bump_value(T, x) == 0.0

    def test_zero_when_last_coordinate_small(self, rng):
        T = 4
        for _ in range(100):
            x = rng.standard_normal(T) * 0.4
            x[-1] = rng.uniform(-1, 0.6)
            assert bump_value(T, x) == 0.0

    def test_range(self, rng):
        T = 3
        for _ in range(300):
            x = rng.standard_normal(T) * 0.5
            assert 0.0 <= bump_value(T, x) <= 1.0

    def test_grad_matches_fd(self, rng):
        # sample inside the bump but away from its support edge, where the
        # cutoff's higher derivatives blow up relative to the value and
        # central differences lose accuracy
        T = 5
        peak = np.zeros(T)
        peak[-1] = 0.8
        for _ in range(30):
            offset = rng.standard_normal(T)
            offset *= rng.uniform(0.0, 0.1) / np.linalg.norm(offset)
            x = peak + offset
            fd = central_grad(lambda v: bump_value(T, v), x)
            assert np.allclose(bump_grad(T, x), fd, rtol=1e-6, atol=1e-9)


class TestDistanceInstance:
    def _instance(self, seed=0):
        scaling = scaling_for("distance", 1, 2.0, smoothness_constant(1) * math.exp(5), 0.05)
        d = 6 * scaling.T
        U = sample_orthogonal(d, scaling.T, SeededRng(seed))
        return scaling, scaling.distance_instance(U, seed=seed)

    def test_peak_below_paper_display(self):
        scaling, inst = self._instance()
        peak = 0.8 * inst.D * inst.U[:, -1]
        bound = (
            -(117.0 / 125.0) * inst.bump_multiplier
            + inst.multiplier * fbar_value(inst.T, np.zeros(inst.T))
        )
        assert inst.value(peak) < bound

    def test_bump_free_floor(self, rng):
        scaling, inst = self._instance()
        floor = inst.multiplier * (fbar_value(inst.T, np.zeros(inst.T)) - 12.0 * inst.T)
        for _ in range(200):
            x = rng.standard_normal(inst.dim) * 2.0
            if bump_value(inst.T, inst.U.T @ x / inst.D) == 0.0:
                assert inst.value(x) >= floor

    def test_grad_matches_fd(self, rng):
        _, inst = self._instance()
        peak = 0.8 * inst.D * inst.U[:, -1]
        for k in range(20):
            x = peak + 0.05 * inst.D * rng.standard_normal(inst.dim)
            fd = central_grad(inst.value, x)
            assert np.allclose(inst.grad(x), fd, rtol=1e-5, atol=1e-6)

    def test_sigma_gt_distance_rejected(self):
        U = sample_orthogonal(8, 2, SeededRng(1))
        with pytest.raises(DomainError):
            DistanceInstance(T=2, U=U, D=1.0, sigma=2.0, p=1, multiplier=1.0)


class TestScaling:
    def test_deterministic_example(self):
        ell = smoothness_constant(1)
        s = scaling_for("deterministic", 1, 24.0, ell, 1.0)
        assert s.sigma == pytest.approx(1.0)
        assert s.T == 2
        assert s.multiplier == pytest.approx(1.0)

    def test_degenerate_budget(self):
        with pytest.raises(DegenerateBudgetError):
            scaling_for("deterministic", 1, 1e-9, smoothness_constant(1), 1.0)

    def test_randomized_uses_48_and_doubled_sigma(self):
        ell = smoothness_constant(1) * math.exp(5)
        s = scaling_for("randomized", 1, 96.0, ell, 1.0, ell=ell)
        assert s.sigma == pytest.approx(2.0)
        assert s.T == 2

    def test_distance_chain_length(self):
        ell = smoothness_constant(1) * math.exp(5)
        s = scaling_for("distance", 1, 2.0, ell, 0.05, ell=ell)
        assert s.sigma == pytest.approx(0.1)
        assert s.T == math.floor((2.0 / 0.1) ** 2 / 13.0)

    def test_distance_vacuous(self):
        ell = smoothness_constant(1) * math.exp(5)
        with pytest.raises(VacuousBoundError):
            scaling_for("distance", 1, 0.5, ell, 1.0, ell=ell)

    def test_instance_gradient_floor(self):
        # scaled instance keeps gradient > eps while the last coordinate is 0
        s = scaling_for("deterministic", 1, 120.0, 3.0 * smoothness_constant(1), 0.5)
        inst = s.plain_instance()
        rng = np.random.default_rng(0)
        for _ in range(100):
            x = rng.standard_normal(inst.T) * s.sigma
            x[-1] = 0.0
            assert np.linalg.norm(inst.grad(x)) > s.eps

    def test_scaled_budget_respected(self, rng):
        s = scaling_for("deterministic", 2, 50.0, smoothness_constant(2), 0.3)
        inst = s.plain_instance()
        # 12T bound transfers through the scaling to the requested budget
        assert 12.0 * s.T * s.multiplier <= 50.0 + 1e-9


class TestSerialization:
    def test_plain_roundtrip(self):
        inst = PlainInstance(T=7, sigma=0.3, multiplier=2.5, p=1)
        text = instance_to_string(inst)
        back = instance_from_string(text)
        assert back == inst

    def test_rotated_roundtrip_bitwise(self, rng, tmp_path):
        U = sample_orthogonal(12, 3, SeededRng(9))
        inst = RotatedInstance(T=3, U=U, sigma=1.25, multiplier=0.75, seed=9)
        path = tmp_path / "inst.txt"
        save_instance(inst, str(path))
        back = load_instance(str(path))
        assert np.array_equal(back.U, inst.U)
        x = rng.standard_normal(12)
        assert back.value(x) == inst.value(x)
        assert np.array_equal(back.grad(x), inst.grad(x))

    def test_distance_roundtrip(self, rng):
        ell = smoothness_constant(1) * math.exp(5)
        s = scaling_for("distance", 1, 2.0, ell, 0.05, ell=ell)
        U = sample_orthogonal(4 * s.T, s.T, SeededRng(2))
        inst = s.distance_instance(U, seed=2)
        back = instance_from_string(instance_to_string(inst))
        x = rng.standard_normal(inst.dim)
        assert back.value(x) == inst.value(x)


def test_witness_and_norm_relation():
    # the Theorem-1 chain: scaled instance built at p=1 stays above eps while short
    s = scaling_for("deterministic", 1, 120.0, smoothness_constant(1), 1.0)
    assert s.T == 10
    assert s.gradient_floor() == pytest.approx(1.0)
