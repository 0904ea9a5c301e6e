"""Classic prescriptions kept for comparison: Chebyshev coefficients and
direction-vector conjugate gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import ProblemInstance, materialize_dense


def chebyshev_t(n: int, x):
    """Chebyshev polynomial of the first kind by the three-term recurrence."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    t_prev, t = 1.0, x
    if n == 0:
        return t_prev
    for _ in range(n - 1):
        t_prev, t = t, 2 * x * t - t_prev
    return t


def chebyshev_step_coefficients(d: float, c: float, n: int):
    """``(alpha_n, beta_n)`` of the Chebyshev iteration
    ``x_{n+1} = alpha_n r_n + beta_n x_n + (1 - beta_n) x_{n-1}``
    for the ellipse with foci ``d +- c``.
    """
    if n == 0:
        return 1.0 / d, 1.0
    if c == 0:
        raise ZeroDivisionError("c must be nonzero")
    ratio = d / c
    tn = chebyshev_t(n, ratio)
    tn1 = chebyshev_t(n + 1, ratio)
    if tn1 == 0:
        raise ZeroDivisionError(f"T_{n + 1}(d/c) vanishes")
    alpha = 2 * tn / (c * tn1)
    return alpha, d * alpha


@dataclass
class CGTrace:
    directions: list
    anorm_errors: list
    x: np.ndarray


def _cg_trace(A, y, x_star, steps, dtype, reorthogonalize):
    """Direction-vector CG with explicit residuals ``r = y - A x``.

    With ``reorthogonalize`` each new direction is A-conjugated against all
    previous ones instead of just the last.
    """
    A = A.astype(dtype)
    y = y.astype(dtype)
    x = np.zeros_like(y)
    xs = x_star.astype(np.float64)
    star_a = np.sqrt(xs @ (A.astype(np.float64) @ xs))
    ps, Aps = [], []
    dirs, errs = [], []
    for _ in range(steps):
        r = y - A @ x
        p = r.copy()
        if ps:
            pairs = zip(ps, Aps) if reorthogonalize else [(ps[-1], Aps[-1])]
            for q, Aq in pairs:
                p = p - (Aq @ r) / (q @ Aq) * q
        Ap = A @ p
        denom = p @ Ap
        if denom == 0:
            break
        x = x + (p @ r) / denom * p
        ps.append(p)
        Aps.append(Ap)
        dirs.append(p)
        e = xs - x.astype(np.float64)
        errs.append(float(np.sqrt(max(e @ (A.astype(np.float64) @ e), 0.0)) / star_a))
    return CGTrace(dirs, errs, x)


@dataclass
class CGComparison:
    deviations: np.ndarray
    reduced_errors: np.ndarray
    extended_errors: np.ndarray
    reduced_dtype: str
    extended_dtype: str


def cg_direction_comparison(problem: ProblemInstance, steps: int,
                            reduced=np.float32, extended=np.float64) -> CGComparison:
    """Run direction-vector CG twice and compare the direction vectors.

    One run uses ``reduced`` precision and the usual one-term recurrence for
    the directions; the other uses ``extended`` precision with full
    A-conjugation against every earlier direction. Entry ``n`` of the result
    refers to direction ``p_n`` and to the iterate ``x_{n+1}`` it produces.
    """
    A = materialize_dense(problem.operator)
    Ad = A.astype(np.float64)
    if not np.allclose(Ad, Ad.T, rtol=0, atol=1e-12 * np.abs(Ad).max()):
        raise ValueError("cg_direction_comparison needs a symmetric operator")
    if np.linalg.eigvalsh(Ad)[0] <= 0:
        raise ValueError("cg_direction_comparison needs a positive definite operator")
    y = np.asarray(problem.rhs, dtype=np.float64)
    x_star = problem.exact_solution
    if x_star is None:
        x_star = np.linalg.solve(Ad, y)
    low = _cg_trace(A, y, x_star, steps, reduced, reorthogonalize=False)
    high = _cg_trace(A, y, x_star, steps, extended, reorthogonalize=True)
    count = min(len(low.directions), len(high.directions))
    dev = np.array([
        np.linalg.norm(low.directions[i].astype(np.float64) - high.directions[i])
        / np.linalg.norm(high.directions[i]) for i in range(count)])
    return CGComparison(dev, np.array(low.anorm_errors[:count]),
                        np.array(high.anorm_errors[:count]),
                        np.dtype(reduced).name, np.dtype(extended).name)
