"""Small dense kernels behind every least-squares step.

The pipeline in :func:`min_norm_least_squares` is column scaling, a
Householder reduction of the tall ``N x t`` matrix to a ``t x t`` upper
triangle, an SVD of that triangle only, and a truncated pseudoinverse.
All routines keep the dtype of their input, so ``float32`` arrays give a
reduced-precision solve and ``float64``/``complex128`` the extended one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NumericalFailure(RuntimeError):
    """A dense kernel did not converge or produced non-finite values."""

    def __init__(self, message, matrix=None):
        super().__init__(message)
        self.matrix = matrix


class IndefiniteSystemError(ValueError):
    """A small Hermitian system expected to be semidefinite is not."""


PRECISIONS = {"reduced": np.float32, "extended": np.float64}


def working_dtype(precision="extended", complex_=False):
    """Map a precision name to a numpy dtype."""
    try:
        base = np.dtype(PRECISIONS[precision])
    except KeyError:
        raise ValueError(f"unknown precision {precision!r}") from None
    if complex_:
        return np.result_type(base, np.complex64)
    return base


def machine_eps(dtype) -> float:
    return float(np.finfo(np.dtype(dtype)).eps)


def _as_float_array(M):
    M = np.asarray(M)
    if not np.issubdtype(M.dtype, np.inexact):
        M = M.astype(np.float64)
    return M


def scale_columns(M):
    """Scale each column of ``M`` to unit 2-norm.

    Returns ``(scaled, scales)`` with ``scaled[:, j] == M[:, j] / scales[j]``.
    Zero columns keep scale 1 and stay zero.
    """
    M = _as_float_array(M)
    if M.ndim != 2:
        raise ValueError("expected a 2-D column set")
    scales = np.linalg.norm(M, axis=0)
    real = np.finfo(M.dtype).dtype
    scales = np.where(scales > 0, scales, 1).astype(real)
    return M / scales, scales


@dataclass(frozen=True)
class Reflectors:
    """Compact Householder form: ``Q^H = H_{t-1} ... H_0``.

    ``vectors[:, j]`` is the unit vector of ``H_j = I - 2 v v^H``; it is zero
    above row ``j``. A zero column means that reflector was skipped.
    """

    vectors: np.ndarray

    def apply(self, b):
        """Return ``Q^H b`` for a vector or a matrix of columns."""
        b = np.array(b, dtype=np.result_type(self.vectors, b), copy=True)
        for j in range(self.vectors.shape[1]):
            v = self.vectors[j:, j]
            if b.ndim == 1:
                b[j:] -= 2 * v * np.vdot(v, b[j:])
            else:
                b[j:] -= 2 * np.outer(v, v.conj() @ b[j:])
        return b

    def apply_adjoint(self, b):
        """Return ``Q b`` (reflectors in reverse order)."""
        b = np.array(b, dtype=np.result_type(self.vectors, b), copy=True)
        for j in reversed(range(self.vectors.shape[1])):
            v = self.vectors[j:, j]
            if b.ndim == 1:
                b[j:] -= 2 * v * np.vdot(v, b[j:])
            else:
                b[j:] -= 2 * np.outer(v, v.conj() @ b[j:])
        return b


def householder_reduce(M):
    """Reduce the ``N x t`` matrix ``M`` (``N >= t``) to upper triangular form.

    Returns ``(reflectors, R)`` with ``reflectors.apply(M) == [R; 0]``.
    """
    A = np.array(_as_float_array(M), copy=True)
    n, t = A.shape
    if n < t:
        raise ValueError(f"householder_reduce needs N >= t, got {n} x {t}")
    V = np.zeros_like(A)
    for j in range(t):
        x = A[j:, j]
        alpha = np.linalg.norm(x)
        if alpha == 0:
            continue
        x0 = x[0]
        phase = x0 / abs(x0) if x0 != 0 else 1
        v = x.copy()
        v[0] += phase * alpha
        vnorm = np.linalg.norm(v)
        if vnorm == 0:
            continue
        v /= vnorm
        V[j:, j] = v
        A[j:, j:] -= 2 * np.outer(v, v.conj() @ A[j:, j:])
        A[j + 1:, j] = 0
    return Reflectors(V), np.triu(A[:t, :t])


def svd_upper_triangular(R):
    """SVD ``R = U diag(s) W^H`` of a small square triangular factor.

    Singular values come back nonincreasing. LAPACK's failure to converge is
    reported as :class:`NumericalFailure` carrying the offending matrix.
    """
    R = _as_float_array(R)
    if R.ndim != 2 or R.shape[0] != R.shape[1] or R.shape[0] < 1:
        raise ValueError("expected a nonempty square matrix")
    if not np.all(np.isfinite(R)):
        raise NumericalFailure("non-finite entries in triangular factor", R)
    try:
        U, s, Wh = np.linalg.svd(R)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD did not converge: {exc}", R) from exc
    return U, s, Wh.conj().T


@dataclass(frozen=True)
class LsSolution:
    coefficients: np.ndarray
    numerical_rank: int
    residual_norm: float
    singular_values: np.ndarray
    column_scales: np.ndarray


def min_norm_least_squares(M, b, rank_tol=None) -> LsSolution:
    """Minimum-norm solution of ``min ||b - M c||_2`` via scale/QR/SVD.

    Singular values of the column-scaled problem below
    ``rank_tol * sigma_max`` are discarded; ``rank_tol`` defaults to
    ``max(N, t)`` times the machine epsilon of the working precision, the
    usual LAPACK convention. Exact dependencies among computed columns
    typically leave singular values a few epsilons above zero, which a bare
    epsilon threshold would keep. The returned coefficients are unscaled, so
    they are minimum-norm for the scaled problem only.
    """
    M = _as_float_array(M)
    b = np.asarray(b)
    dtype = np.result_type(M, b)
    M = M.astype(dtype, copy=False)
    b = b.astype(dtype, copy=False)
    n, t = M.shape
    if rank_tol is None:
        rank_tol = max(n, t) * machine_eps(dtype)
    if not 0 <= rank_tol < 1:
        raise ValueError("rank_tol must lie in [0, 1)")

    scaled, scales = scale_columns(M)
    if n < t:
        # zero rows leave the problem unchanged and make it tall enough
        scaled = np.vstack([scaled, np.zeros((t - n, t), dtype=dtype)])
        bb = np.concatenate([b, np.zeros(t - n, dtype=dtype)])
    else:
        bb = b
    reflectors, R = householder_reduce(scaled)
    z = reflectors.apply(bb)[:t]
    U, s, W = svd_upper_triangular(R)

    rank = 0
    if s.size and s[0] > 0:
        keep = s >= rank_tol * s[0]
        keep &= s > 0
        rank = int(np.count_nonzero(keep))
    if rank == 0:
        c = np.zeros(t, dtype=dtype)
    else:
        proj = (U[:, :rank].conj().T @ z) / s[:rank]
        c = (W[:, :rank] @ proj) / scales
    residual = float(np.linalg.norm(b - M @ c))
    return LsSolution(c, rank, residual, s, scales)


def spd_small_solve(G, g, rank_tol=None, indefinite_tol=None, full_output=False):
    """Minimum-norm solution of ``G c = g`` for a small Hermitian PSD ``G``.

    Uses an eigendecomposition with the same relative truncation policy as
    :func:`min_norm_least_squares`. Eigenvalues below
    ``-indefinite_tol * max|eig|`` raise :class:`IndefiniteSystemError`.
    With ``full_output`` the numerical rank is returned as well.
    """
    G = _as_float_array(G)
    g = np.asarray(g)
    dtype = np.result_type(G, g)
    G = 0.5 * (G + G.conj().T).astype(dtype)
    eps = machine_eps(dtype)
    if rank_tol is None:
        rank_tol = eps
    if indefinite_tol is None:
        indefinite_tol = np.sqrt(eps)
    w, Q = np.linalg.eigh(G)
    top = np.max(np.abs(w)) if w.size else 0.0
    if top == 0:
        c = np.zeros(G.shape[0], dtype=dtype)
        return (c, 0) if full_output else c
    if w[0] < -indefinite_tol * top:
        raise IndefiniteSystemError(
            f"Hermitian system is indefinite: eigenvalue {w[0]:.3e} vs max {top:.3e}")
    keep = w > rank_tol * top
    coef = (Q[:, keep].conj().T @ g) / w[keep]
    c = (Q[:, keep] @ coef).astype(dtype)
    return (c, int(np.count_nonzero(keep))) if full_output else c
