"""Constant-coefficient oc(k, m) iterations and their convergence analysis.

A tableau ``c`` has shape ``(k + 1, m)``: row 0 multiplies the old iterates
``x_{n-j}``, row ``i >= 1`` multiplies ``A^{i-1} r_{n-j}``. Column ``j`` gives
the operator coefficient ``P_j(X) = c[0, j] - sum_i c[i, j] X^i`` of the
residual recurrence, and the rate at an eigenvalue ``lam`` is the largest
root magnitude of ``X^m - sum_j P_j(lam) X^(m-j)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from .operators import ProblemInstance
from .solver import ConvergenceReport, StepRecord, observed_rate

ZERO_COEFFICIENT = 1e-300
HOMOGENEITY_TOL = 1e-12


@dataclass(frozen=True)
class CoefficientTableau:
    c: np.ndarray
    label: str = ""

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.c))
        if not np.issubdtype(c.dtype, np.inexact):
            c = c.astype(np.float64)
        if c.ndim != 2 or c.shape[0] < 2 or c.shape[1] < 1:
            raise ValueError("tableau must have shape (k + 1, m) with k, m >= 1")
        if not np.all(np.isfinite(c)):
            raise ValueError("tableau entries must be finite")
        object.__setattr__(self, "c", c)

    @property
    def k(self) -> int:
        return self.c.shape[0] - 1

    @property
    def m(self) -> int:
        return self.c.shape[1]

    @property
    def x_coefficient_sum(self):
        return math.fsum(self.c[0].real) + 1j * math.fsum(self.c[0].imag) \
            if np.iscomplexobj(self.c) else math.fsum(self.c[0])

    def is_homogeneous(self, tol: float = HOMOGENEITY_TOL) -> bool:
        return abs(self.x_coefficient_sum - 1) <= tol

    def column_polynomial_coefficients(self):
        """Ascending power coefficients of each ``P_j``, shape ``(m, k + 1)``."""
        p = -self.c.T.copy()
        p[:, 0] = self.c[0]
        return p

    def to_list(self):
        return self.c.tolist()


def richardson_tableau(alpha) -> CoefficientTableau:
    """``x_{n+1} = x_n + alpha r_n``; converges inside the circle through 0
    around ``1/alpha``."""
    return CoefficientTableau([[1.0], [alpha]], f"richardson({alpha})")


def second_order_tableau(alpha, beta) -> CoefficientTableau:
    """Stationary 2nd order method ``x_{n+1} = alpha r_n + beta x_n + (1 - beta) x_{n-1}``."""
    return CoefficientTableau([[beta, 1 - beta], [alpha, 0.0]],
                              f"second_order({alpha}, {beta})")


TABLE4 = {
    "a": [[0.8, 0.2], [1.0, 0.0], [0.0, 0.0]],
    "b": [[0.8, 0.2], [1.0, -0.3], [0.0, 0.0]],
    "c": [[0.8, 0.2], [1.0, -0.7], [0.0, 0.0]],
    "d": [[1.0, 0.0], [1.0, 0.0], [-0.5, 0.0]],
    "e": [[0.8, 0.2], [1.0, 0.0], [-0.5, 0.0]],
    "f": [[0.5, 0.5], [1.0, 0.2], [-0.5, 0.2]],
}

# Nearly constant regime of a residual-minimizing oc(2, 2) run on the order
# 201 banded Toeplitz system with an all-ones right-hand side.
TOEPLITZ_OC22 = [[1.421, -0.421], [0.261, -0.172], [-0.130, 0.102]]


def named_tableau(name: str) -> CoefficientTableau:
    """Look up ``table4_a`` .. ``table4_f``, ``toeplitz_oc22``,
    ``richardson:ALPHA`` or ``second_order:ALPHA,BETA``."""
    key = name.strip().lower()
    if key.startswith("table4_") and key[7:] in TABLE4:
        return CoefficientTableau(TABLE4[key[7:]], key)
    if key == "toeplitz_oc22":
        return CoefficientTableau(TOEPLITZ_OC22, "toeplitz_oc22")
    if key.startswith("richardson:"):
        return richardson_tableau(float(key.split(":", 1)[1]))
    if key.startswith("second_order:"):
        a, b = (float(v) for v in key.split(":", 1)[1].split(","))
        return second_order_tableau(a, b)
    raise ValueError(f"unknown tableau {name!r}")


def column_polynomials(tab: CoefficientTableau, lam):
    """``P_j(lam)`` for ``j = 1..m`` by Horner's scheme; ``lam`` may be an array
    (result then has a trailing axis of length ``m``)."""
    lam = np.asarray(lam)
    c = tab.c
    acc = np.zeros(lam.shape + (tab.m,), dtype=np.result_type(lam, c, np.complex128))
    for i in range(tab.k, 0, -1):
        acc = (acc + c[i]) * lam[..., None]
    return c[0] - acc


def _roots_from_coefficients(P):
    """Roots of ``X^m - P_1 X^{m-1} - ... - P_m`` after dropping vanishing
    trailing coefficients (they only contribute zero roots)."""
    P = np.asarray(P, dtype=np.complex128)
    m = P.shape[-1]
    while m > 0 and abs(P[m - 1]) < ZERO_COEFFICIENT:
        m -= 1
    if m == 0:
        return np.zeros(0, dtype=np.complex128)
    if m == 1:
        return P[:1].copy()
    companion = np.zeros((m, m), dtype=np.complex128)
    companion[0, :] = P[:m]
    companion[np.arange(1, m), np.arange(m - 1)] = 1
    return np.linalg.eigvals(companion)


def _rate_from_coefficients(P):
    roots = _roots_from_coefficients(P)
    return float(np.max(np.abs(roots))) if roots.size else 0.0


def eigen_roots(tab: CoefficientTableau, lam) -> np.ndarray:
    """Roots of the characteristic polynomial ``P(lam, X)`` at one point."""
    return _roots_from_coefficients(column_polynomials(tab, complex(lam)))


def eigen_rate(tab: CoefficientTableau, lam) -> float:
    """Eigenvalue-specific convergence rate ``r(lam)`` via companion-matrix roots."""
    return _rate_from_coefficients(column_polynomials(tab, complex(lam)))


def eigen_rate_quadratic(tab: CoefficientTableau, lam) -> float:
    """``r(lam)`` for ``m = 2`` from the quadratic formula."""
    if tab.m != 2:
        raise ValueError("quadratic formula applies to order m = 2 only")
    p1, p2 = column_polynomials(tab, complex(lam))
    disc = np.sqrt(p1 * p1 + 4 * p2 + 0j)
    return float(max(abs((p1 + disc) / 2), abs((p1 - disc) / 2)))


def eigen_rates(tab: CoefficientTableau, lams) -> np.ndarray:
    """Vectorized ``r(lam)`` over an array of points.

    Trailing zero coefficients only add zero roots, so the batched companion
    matrices keep the full order.
    """
    lams = np.asarray(lams, dtype=np.complex128)
    P = column_polynomials(tab, lams)
    m = tab.m
    if m == 1:
        return np.abs(P[..., 0])
    flat = P.reshape(-1, m)
    comp = np.zeros((flat.shape[0], m, m), dtype=np.complex128)
    comp[:, 0, :] = flat
    comp[:, np.arange(1, m), np.arange(m - 1)] = 1
    roots = np.linalg.eigvals(comp)
    return np.max(np.abs(roots), axis=-1).reshape(lams.shape)


@dataclass(frozen=True)
class RateReport:
    per_eigenvalue: list
    R: float

    @property
    def convergent(self) -> bool:
        return self.R < 1


def method_rate(tab: CoefficientTableau, eigenvalues: Sequence[complex]) -> RateReport:
    eigenvalues = list(np.atleast_1d(np.asarray(eigenvalues)))
    if not eigenvalues:
        raise ValueError("need at least one eigenvalue")
    pairs = [(complex(lam), eigen_rate(tab, lam)) for lam in eigenvalues]
    return RateReport(pairs, max(r for _, r in pairs))


@dataclass(frozen=True)
class DomainGrid:
    """Raster of ``r(lam)``; ``values[i, j]`` is at ``re[j] + 1j * im[i]``
    (rows follow the imaginary axis, row-major)."""

    rectangle: tuple
    resolution: tuple
    values: np.ndarray
    tableau: CoefficientTableau

    @property
    def re(self):
        return np.linspace(self.rectangle[0], self.rectangle[1], self.resolution[0])

    @property
    def im(self):
        return np.linspace(self.rectangle[2], self.rectangle[3], self.resolution[1])

    @property
    def points(self):
        return self.re[None, :] + 1j * self.im[:, None]

    @property
    def cell(self):
        (a, b, c, d), (nr, ni) = self.rectangle, self.resolution
        return (b - a) / (nr - 1), (d - c) / (ni - 1)


def convergence_domain(tab: CoefficientTableau, rectangle=(-1.0, 3.0, -2.0, 2.0),
                       resolution=(201, 201), chunk: int = 65536) -> DomainGrid:
    """Rasterize ``r(lam)`` over ``rectangle = (re_min, re_max, im_min, im_max)``."""
    nr, ni = (int(v) for v in resolution)
    if nr < 2 or ni < 2:
        raise ValueError("resolution must be at least 2 x 2")
    rectangle = tuple(float(v) for v in rectangle)
    re = np.linspace(rectangle[0], rectangle[1], nr)
    im = np.linspace(rectangle[2], rectangle[3], ni)
    pts = (re[None, :] + 1j * im[:, None]).ravel()
    out = np.empty(pts.size)
    for s in range(0, pts.size, chunk):
        out[s:s + chunk] = eigen_rates(tab, pts[s:s + chunk])
    return DomainGrid(rectangle, (nr, ni), out.reshape(ni, nr), tab)


def level_crossings(grid: DomainGrid, level: float = 1.0, flat_tol: float = 1e-6):
    """Grid points on the ``level`` contour: points whose value differs in sign
    (relative to ``level``) from a 4-neighbour, or lies within ``flat_tol``."""
    d = grid.values - level
    s = np.sign(d)
    mask = np.abs(d) <= flat_tol
    mask[:, :-1] |= s[:, :-1] * s[:, 1:] < 0
    mask[:, 1:] |= s[:, :-1] * s[:, 1:] < 0
    mask[:-1, :] |= s[:-1, :] * s[1:, :] < 0
    mask[1:, :] |= s[:-1, :] * s[1:, :] < 0
    return grid.points[mask]


def stationary_2nd_order_foci(alpha: float, beta: float):
    """Foci ``beta/alpha +- 2 sqrt(beta - 1)/alpha`` of the convergence ellipse."""
    if alpha == 0:
        raise ZeroDivisionError("alpha must be nonzero")
    root = np.sqrt(complex(beta - 1))
    return complex(beta / alpha + 2 * root / alpha), complex(beta / alpha - 2 * root / alpha)


def stationary_iterate(problem: ProblemInstance, tab: CoefficientTableau,
                       steps: int, rhs: Optional[np.ndarray] = None) -> ConvergenceReport:
    """Run the fixed-tableau recurrence for ``steps`` steps.

    Residuals are recomputed explicitly as ``y - A x`` after every step. When
    fewer than ``m`` initial guesses are given, the missing older ones repeat
    the oldest guess supplied. Each step costs ``k`` operator applications.
    """
    if not tab.is_homogeneous():
        raise ValueError("constant-coefficient iterations must be homogeneous "
                         f"(x-coefficients sum to {tab.x_coefficient_sum!r}, not 1)")
    guesses = list(problem.initial_guesses)
    if not guesses:
        raise ValueError("need at least one initial guess")
    if len(guesses) > tab.m:
        raise ValueError("more initial guesses than the tableau order")
    guesses += [guesses[-1]] * (tab.m - len(guesses))
    op = problem.operator
    y = problem.rhs if rhs is None else np.asarray(rhs)
    dtype = np.result_type(y, tab.c, op.dtype, np.float64)
    y = y.astype(dtype)
    c = tab.c.astype(dtype)
    ynorm = float(np.linalg.norm(y))

    matvecs = 0
    xs, chains = [], []
    for g in guesses:
        x = np.asarray(g).astype(dtype)
        r = y - np.asarray(op.apply(x))
        chain = [r]
        for _ in range(tab.k - 1):
            chain.append(np.asarray(op.apply(chain[-1])))
        matvecs += tab.k
        xs.append(x)
        chains.append(chain)

    relres = [float(np.linalg.norm(chains[0][0])) / ynorm]
    records = []
    for n in range(1, steps + 1):
        x = sum(c[0, j] * xs[j] for j in range(tab.m))
        for j in range(tab.m):
            for i in range(1, tab.k + 1):
                if c[i, j] != 0:
                    x = x + c[i, j] * chains[j][i - 1]
        r = y - np.asarray(op.apply(x))
        chain = [r]
        for _ in range(tab.k - 1):
            chain.append(np.asarray(op.apply(chain[-1])))
        matvecs += tab.k
        xs = [x] + xs[:-1]
        chains = [chain] + chains[:-1]
        rnorm = float(np.linalg.norm(r))
        if not np.isfinite(rnorm):
            raise FloatingPointError(f"non-finite residual at step {n}")
        err = None
        if problem.exact_solution is not None and rhs is None:
            err = float(np.linalg.norm(problem.exact_solution - x))
        xsum = tab.x_coefficient_sum
        records.append(StepRecord(n, c.copy(), xsum, 1 - xsum, rnorm, rnorm / ynorm,
                                  None, tab.k, refreshed=True, error_norm=err))
        relres.append(rnorm / ynorm)
    rate = observed_rate(relres) if len(relres) >= 4 else None
    config = {"name": "stationary", "k": tab.k, "m": tab.m,
              "tableau": tab.to_list(), "label": tab.label, "steps": steps}
    return ConvergenceReport(records, relres, False, rate, config, problem.rng_seed,
                             matvecs, {"name": problem.name, "params": problem.params,
                                       "label": op.label}, xs[0])


def residual_polynomials(tab: CoefficientTableau, n: int, degree_cap: int = 400):
    """Ascending coefficients of ``P_{n,j}`` for ``j = 1..m`` with
    ``r_n = sum_j P_{n,j}(A) r_{1-j}`` in a homogeneous constant-tableau run.

    Built from ``P_{n,j} = sum_l P_l P_{n-l,j}`` with ``P_{1-j,j} = 1``.
    """
    if not tab.is_homogeneous():
        raise ValueError("residual polynomials need a homogeneous tableau")
    m = tab.m
    if n < 1 - m:
        raise ValueError(f"n must be at least {1 - m}")
    if tab.k * max(n, 0) > degree_cap:
        raise ValueError(f"degree {tab.k * n} exceeds cap {degree_cap}")
    coeffs = tab.column_polynomial_coefficients()
    # history[s] holds [P_{s,1}, ..., P_{s,m}] for s = 1-m .. current
    history = {}
    for s in range(1 - m, 1):
        history[s] = [np.array([1.0 if s == 1 - j else 0.0]) for j in range(1, m + 1)]
    for s in range(1, n + 1):
        row = []
        for j in range(m):
            acc = np.zeros(1)
            for l in range(1, m + 1):
                acc = npoly.polyadd(acc, npoly.polymul(coeffs[l - 1], history[s - l][j]))
            row.append(acc)
        history[s] = row
        history.pop(s - m - 1, None)
    return [npoly.polytrim(p) if np.any(p) else np.zeros(1) for p in history[n]]


def apply_polynomial(op, coeffs, v):
    """``p(A) v`` for ascending coefficients by Horner's scheme."""
    coeffs = np.asarray(coeffs)
    out = coeffs[-1] * np.asarray(v)
    for a in coeffs[-2::-1]:
        out = np.asarray(op.apply(out)) + a * v
    return out


@dataclass(frozen=True)
class Theorem1Bound:
    poly_coeffs: tuple
    h_min_abs_eig: float
    p_norm: float
    rho: Optional[float]
    definite: bool


def theorem1_bound(A, poly: Sequence[float]) -> Theorem1Bound:
    """Per-step residual contraction available in ``x + span{r, ..., A^{k-1} r}``.

    ``poly`` holds ``c_1..c_k`` of ``P(X) = c_1 X + ... + c_k X^k``. When the
    Hermitian part ``H`` of ``P(A)`` is definite the factor is
    ``sqrt(1 - (min |eig H| / ||P(A)||_2)^2)``; otherwise ``rho`` is None.
    """
    A = np.asarray(A)
    poly = tuple(poly)
    if not poly:
        raise ValueError("polynomial needs at least one coefficient")
    n = A.shape[0]
    PA = np.zeros_like(A, dtype=np.result_type(A, np.asarray(poly), np.float64))
    power = np.eye(n)
    for c in poly:
        power = power @ A
        PA = PA + c * power
    H = 0.5 * (PA + PA.conj().T)
    w = np.linalg.eigvalsh(H)
    hnorm = np.max(np.abs(w))
    tol = 1e-12 * hnorm
    definite = bool(np.all(w > tol) or np.all(w < -tol))
    hmin = float(np.min(np.abs(w)))
    pnorm = float(np.linalg.norm(PA, 2))
    rho = None
    if definite and pnorm > 0:
        rho = float(np.sqrt(max(0.0, 1 - (hmin / pnorm) ** 2)))
    return Theorem1Bound(poly, hmin, pnorm, rho, definite)
