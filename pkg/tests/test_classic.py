import numpy as np
import pytest

from ocm.classic import cg_direction_comparison, chebyshev_step_coefficients, chebyshev_t
from ocm.operators import dense_problem, diag_squares_problem


def chebyshev_cos(n, x):
    # closed form valid for |x| <= 1
    return np.cos(n * np.arccos(x))


class TestChebyshev:
    def test_recurrence_values(self):
        assert chebyshev_t(0, 3) == 1
        assert chebyshev_t(1, 3) == 3
        assert chebyshev_t(2, 3) == 17
        assert chebyshev_t(3, 3) == 99

    @pytest.mark.parametrize("n", range(8))
    def test_matches_cosine_form(self, n):
        xs = np.linspace(-1, 1, 11)
        np.testing.assert_allclose(chebyshev_t(n, xs), chebyshev_cos(n, xs), atol=1e-12)

    def test_negative_degree(self):
        with pytest.raises(ValueError):
            chebyshev_t(-1, 0.5)

    def test_first_step(self):
        assert chebyshev_step_coefficients(2.0, 1.0, 0) == (0.5, 1.0)

    def test_ratio_three(self):
        c = 0.7
        alpha, beta = chebyshev_step_coefficients(3 * c, c, 1)
        assert alpha == pytest.approx(6 / (17 * c), rel=1e-15)
        assert beta == pytest.approx(3 * c * alpha, rel=1e-15)

    @pytest.mark.parametrize("n", [1, 2, 5, 9])
    def test_beta_is_d_alpha(self, n):
        alpha, beta = chebyshev_step_coefficients(1.7, 0.9, n)
        assert beta == pytest.approx(1.7 * alpha, rel=1e-15)

    def test_errors(self):
        with pytest.raises(ZeroDivisionError):
            chebyshev_step_coefficients(1.0, 0.0, 2)
        # T_3(0) = 0
        with pytest.raises(ZeroDivisionError, match="T_3"):
            chebyshev_step_coefficients(0.0, 1.0, 2)

    def test_chebyshev_iteration_converges(self):
        # eigenvalues in [1, 3]: d = 2, c = 1
        lam = np.linspace(1, 3, 40)
        A = np.diag(lam)
        y = np.ones(40)
        x_prev = np.zeros(40)
        alpha, _ = chebyshev_step_coefficients(2.0, 1.0, 0)
        x = x_prev + alpha * (y - A @ x_prev)
        for n in range(1, 30):
            alpha, beta = chebyshev_step_coefficients(2.0, 1.0, n)
            x, x_prev = alpha * (y - A @ x) + beta * x + (1 - beta) * x_prev, x
        assert np.linalg.norm(y - A @ x) <= 1e-10 * np.linalg.norm(y)


class TestCgComparison:
    def test_first_direction_agrees(self):
        cmp = cg_direction_comparison(diag_squares_problem(100), 1)
        assert cmp.deviations[0] <= 100 * np.finfo(np.float32).eps

    def test_instability_growth(self):
        cmp = cg_direction_comparison(diag_squares_problem(100), 60)
        base = max(cmp.deviations[0], np.finfo(np.float32).eps)
        assert cmp.deviations.max() >= 1e4 * base

    def test_extended_run_lower_from_mid_run(self):
        cmp = cg_direction_comparison(diag_squares_problem(100), 100)
        assert np.all(cmp.extended_errors[50:] < cmp.reduced_errors[50:])
        assert cmp.extended_errors.min() <= 1e-6
        assert (cmp.reduced_dtype, cmp.extended_dtype) == ("float32", "float64")

    def test_windowed_envelope_nondecreasing(self):
        dev = cg_direction_comparison(diag_squares_problem(100), 60).deviations
        envelope = np.maximum.accumulate(dev)
        assert np.all(np.diff(envelope) >= 0)
        assert envelope[-1] > envelope[5]

    def test_rejects_nonsymmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            cg_direction_comparison(dense_problem(np.array([[1.0, 1.0], [0.0, 1.0]]),
                                                  np.ones(2)), 2)

    def test_rejects_indefinite(self):
        with pytest.raises(ValueError, match="positive definite"):
            cg_direction_comparison(dense_problem(np.diag([1.0, -1.0]), np.ones(2)), 2)
