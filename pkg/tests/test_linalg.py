import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ocm.linalg import (IndefiniteSystemError, NumericalFailure, householder_reduce,
                        machine_eps, min_norm_least_squares, scale_columns,
                        spd_small_solve, svd_upper_triangular, working_dtype)


def rng(seed=0):
    return np.random.default_rng(seed)


class TestScaleColumns:
    def test_three_four_five(self):
        scaled, scales = scale_columns(np.array([[3.0], [4.0]]))
        np.testing.assert_allclose(scaled[:, 0], [0.6, 0.8])
        assert scales[0] == 5

    def test_zero_column_keeps_unit_scale(self):
        M = np.array([[0.0, 1.0], [0.0, 1.0]])
        scaled, scales = scale_columns(M)
        assert scales[0] == 1
        assert np.all(scaled[:, 0] == 0)

    def test_random_columns_have_unit_norm(self):
        M = rng().standard_normal((20, 4))
        scaled, scales = scale_columns(M)
        assert np.all(np.abs(np.linalg.norm(scaled, axis=0) - 1) <= 1e-14)
        np.testing.assert_allclose(scaled * scales, M, rtol=1e-15)

    def test_complex_scales_are_real(self):
        M = rng(1).standard_normal((6, 3)) + 1j * rng(2).standard_normal((6, 3))
        _, scales = scale_columns(M)
        assert scales.dtype == np.float64


class TestHouseholder:
    def test_triangular_input(self):
        M = np.triu(rng().uniform(1, 2, (4, 4)))
        _, R = householder_reduce(M)
        np.testing.assert_allclose(np.abs(R), np.abs(M), atol=1e-14)

    def test_single_column(self):
        col = np.array([[1.0], [2.0], [2.0]])
        _, R = householder_reduce(col)
        assert R.shape == (1, 1)
        assert abs(abs(R[0, 0]) - 3) < 1e-15

    @pytest.mark.parametrize("shape", [(30, 5), (60, 40), (40, 40)])
    def test_reconstruction(self, shape):
        M = rng(shape[1]).standard_normal(shape)
        refl, R = householder_reduce(M)
        stacked = np.zeros_like(M)
        stacked[:shape[1]] = R
        err = np.linalg.norm(refl.apply(M) - stacked)
        assert err <= 1e-12 * np.linalg.norm(M)

    def test_reflectors_are_orthogonal(self):
        M = rng(3).standard_normal((12, 4))
        refl, _ = householder_reduce(M)
        b = rng(4).standard_normal(12)
        z = refl.apply(b)
        assert abs(np.linalg.norm(z) - np.linalg.norm(b)) < 1e-13
        np.testing.assert_allclose(refl.apply_adjoint(z), b, atol=1e-13)

    def test_complex(self):
        g = rng(5)
        M = g.standard_normal((15, 4)) + 1j * g.standard_normal((15, 4))
        refl, R = householder_reduce(M)
        stacked = np.zeros_like(M)
        stacked[:4] = R
        assert np.linalg.norm(refl.apply(M) - stacked) <= 1e-12 * np.linalg.norm(M)

    def test_zero_column_is_skipped(self):
        M = np.zeros((5, 2))
        M[:, 1] = 1
        refl, R = householder_reduce(M)
        assert R[0, 0] == 0
        stacked = np.zeros_like(M)
        stacked[:2] = R
        np.testing.assert_allclose(refl.apply(M), stacked, atol=1e-15)

    def test_requires_tall(self):
        with pytest.raises(ValueError):
            householder_reduce(np.ones((2, 3)))

    def test_reduced_precision_keeps_dtype(self):
        M = rng().standard_normal((10, 3)).astype(np.float32)
        refl, R = householder_reduce(M)
        assert R.dtype == np.float32 and refl.vectors.dtype == np.float32


class TestSvd:
    def test_identity(self):
        _, s, _ = svd_upper_triangular(np.eye(3))
        np.testing.assert_allclose(s, [1, 1, 1])

    def test_diag(self):
        _, s, _ = svd_upper_triangular(np.diag([2.0, 1.0]))
        np.testing.assert_allclose(s, [2, 1])

    @pytest.mark.parametrize("t", [1, 6, 20, 40])
    def test_reconstruction(self, t):
        R = np.triu(rng(t).standard_normal((t, t)))
        U, s, W = svd_upper_triangular(R)
        assert np.all(np.diff(s) <= 0) and np.all(s >= 0)
        assert np.linalg.norm(U @ np.diag(s) @ W.T - R) <= 1e-12 * np.linalg.norm(R)
        assert np.linalg.norm(U.T @ U - np.eye(t)) <= 1e-12
        assert np.linalg.norm(W.T @ W - np.eye(t)) <= 1e-12

    def test_non_finite_reported(self):
        R = np.array([[1.0, np.nan], [0.0, 1.0]])
        with pytest.raises(NumericalFailure) as info:
            svd_upper_triangular(R)
        assert info.value.matrix is not None


def normal_equations_oracle(M, b):
    return np.linalg.solve(M.T @ M, M.T @ b)


class TestMinNormLeastSquares:
    def test_identity(self):
        sol = min_norm_least_squares(np.eye(2), np.array([1.0, 2.0]))
        np.testing.assert_allclose(sol.coefficients, [1, 2])
        assert sol.numerical_rank == 2
        assert sol.residual_norm < 1e-15

    def test_duplicate_columns_split_evenly(self):
        col = np.array([0.6, 0.8, 0.0])
        M = np.column_stack([col, col])
        sol = min_norm_least_squares(M, col)
        np.testing.assert_allclose(sol.coefficients, [0.5, 0.5], atol=1e-14)
        assert sol.numerical_rank == 1

    def test_rank_zero(self):
        sol = min_norm_least_squares(np.zeros((4, 2)), np.ones(4))
        assert sol.numerical_rank == 0
        assert np.all(sol.coefficients == 0)
        assert sol.residual_norm == pytest.approx(2.0)

    def test_matches_normal_equations(self):
        g = rng(11)
        M = g.standard_normal((30, 8))
        b = g.standard_normal(30)
        c = min_norm_least_squares(M, b).coefficients
        ref = normal_equations_oracle(M, b)
        assert np.linalg.norm(c - ref) <= 1e-8 * np.linalg.norm(ref)

    def test_singular_values_sorted(self):
        sol = min_norm_least_squares(rng().standard_normal((9, 4)), np.ones(9))
        assert np.all(np.diff(sol.singular_values) <= 0)
        assert sol.column_scales.shape == (4,)

    def test_local_optimality_sampling(self):
        g = rng(12)
        M = g.standard_normal((25, 6))
        M[:, 5] = M[:, 0] + M[:, 1]  # rank deficient on purpose
        b = g.standard_normal(25)
        sol = min_norm_least_squares(M, b)
        for _ in range(100):
            other = sol.coefficients + 1e-3 * g.standard_normal(6)
            assert sol.residual_norm <= np.linalg.norm(b - M @ other) + 1e-10 * np.linalg.norm(b)

    def test_scaling_invariance(self):
        g = rng(13)
        M = g.standard_normal((20, 5))
        b = g.standard_normal(20)
        D = np.array([1e-3, 1.0, 1e4, 7.0, 1e-6])
        a = min_norm_least_squares(M, b)
        s = min_norm_least_squares(M / D, b)
        assert abs(a.residual_norm - s.residual_norm) <= 1e-12 * a.residual_norm
        np.testing.assert_allclose(s.coefficients / D, a.coefficients, rtol=1e-8)

    def test_complex_matches_lstsq(self):
        g = rng(14)
        M = g.standard_normal((15, 4)) + 1j * g.standard_normal((15, 4))
        b = g.standard_normal(15) + 1j * g.standard_normal(15)
        c = min_norm_least_squares(M, b).coefficients
        ref = np.linalg.lstsq(M, b, rcond=None)[0]
        np.testing.assert_allclose(c, ref, rtol=1e-10)

    def test_reduced_precision(self):
        g = rng(15)
        M = g.standard_normal((30, 4)).astype(np.float32)
        b = g.standard_normal(30).astype(np.float32)
        sol = min_norm_least_squares(M, b)
        assert sol.coefficients.dtype == np.float32
        ref = normal_equations_oracle(M.astype(float), b.astype(float))
        assert np.linalg.norm(sol.coefficients - ref) <= 1e-4 * np.linalg.norm(ref)

    def test_wide_system(self):
        sol = min_norm_least_squares(np.array([[0.0, 8.0]]), np.array([4.0]))
        np.testing.assert_allclose(sol.coefficients, [0, 0.5])
        assert sol.numerical_rank == 1 and sol.residual_norm == 0

    def test_rank_tol_validated(self):
        with pytest.raises(ValueError):
            min_norm_least_squares(np.eye(2), np.ones(2), rank_tol=1.0)

    def test_rank_tol_truncates(self):
        # nearly parallel columns survive scaling as a tiny singular value
        M = np.array([[1.0, 1.0], [0.0, 1e-6], [0.0, 0.0]])
        sol = min_norm_least_squares(M, np.array([1.0, 0.0, 0.0]), rank_tol=1e-3)
        assert sol.numerical_rank == 1
        np.testing.assert_allclose(sol.coefficients, [0.5, 0.5], atol=1e-6)
        assert min_norm_least_squares(M, np.ones(3)).numerical_rank == 2

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 4), st.integers(0, 2**31 - 1))
    def test_no_better_direction(self, t, extra, seed):
        g = np.random.default_rng(seed)
        M = g.standard_normal((t + extra, t))
        b = g.standard_normal(t + extra)
        sol = min_norm_least_squares(M, b)
        # residual orthogonal to the column space
        assert np.linalg.norm(M.T @ (b - M @ sol.coefficients)) <= 1e-9 * (
            np.linalg.norm(M) * np.linalg.norm(b) + 1)


class TestSpdSmallSolve:
    def test_identity(self):
        g = np.array([1.0, -2.0, 3.0])
        np.testing.assert_allclose(spd_small_solve(np.eye(3), g), g)

    def test_rank_deficient(self):
        c = spd_small_solve(np.diag([2.0, 0.0]), np.array([4.0, 0.0]))
        np.testing.assert_allclose(c, [2, 0])

    def test_random_spd(self):
        g = rng(21)
        B = g.standard_normal((5, 5))
        G = B @ B.T + 5 * np.eye(5)
        rhs = g.standard_normal(5)
        np.testing.assert_allclose(spd_small_solve(G, rhs), np.linalg.solve(G, rhs),
                                   atol=1e-10)

    def test_indefinite_flagged(self):
        with pytest.raises(IndefiniteSystemError):
            spd_small_solve(np.diag([1.0, -1.0]), np.ones(2))

    def test_full_output_rank(self):
        _, rank = spd_small_solve(np.diag([3.0, 0.0, 1.0]), np.ones(3), full_output=True)
        assert rank == 2


def test_working_dtypes():
    assert working_dtype("reduced") == np.float32
    assert working_dtype("extended", complex_=True) == np.complex128
    assert machine_eps(np.float32) > machine_eps(np.float64)
    with pytest.raises(ValueError):
        working_dtype("quad")
