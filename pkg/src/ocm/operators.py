"""Matrix-free operators and the desk-scale test problems."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DENSE_CAP = 1200


def make_rng(seed: int) -> np.random.Generator:
    """Portable seeded generator (Philox counter-based bit generator)."""
    return np.random.Generator(np.random.Philox(int(seed)))


def uniform_rhs(n: int, seed: int) -> np.ndarray:
    """Entries uniform in [-1, 1], reproducible from ``seed``."""
    return make_rng(seed).uniform(-1.0, 1.0, size=n)


@dataclass(frozen=True)
class LinearOperator:
    """``apply`` maps a length-``dimension`` vector to another.

    This is the only access a solver has to the matrix.
    """

    dimension: int
    apply: Callable[[np.ndarray], np.ndarray]
    label: str = "operator"
    dtype: np.dtype = field(default=np.dtype(np.float64))

    def __call__(self, v):
        return self.apply(v)

    def __matmul__(self, v):
        return self.apply(v)

    @classmethod
    def from_matrix(cls, A, label="matrix"):
        """Wrap a dense array or scipy sparse matrix."""
        if sp.issparse(A):
            A = sp.csr_matrix(A)
        else:
            A = np.asarray(A)
        n, n2 = A.shape
        if n != n2:
            raise ValueError("operator must be square")
        return cls(n, lambda v: A @ v, label, np.dtype(A.dtype))


class CountingOperator(LinearOperator):
    """Wraps an operator and counts its applications."""

    def __init__(self, op: LinearOperator):
        object.__setattr__(self, "inner", op)
        object.__setattr__(self, "count", 0)
        super().__init__(op.dimension, self._counted, op.label, op.dtype)

    def _counted(self, v):
        object.__setattr__(self, "count", self.count + 1)
        return self.inner.apply(v)

    def reset(self):
        object.__setattr__(self, "count", 0)


@dataclass
class ProblemInstance:
    operator: LinearOperator
    rhs: np.ndarray
    initial_guesses: list = None
    known_eigenvalues: Optional[np.ndarray] = None
    rng_seed: Optional[int] = None
    exact_solution: Optional[np.ndarray] = None
    name: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.operator.dimension
        self.rhs = np.asarray(self.rhs)
        if self.rhs.shape != (n,):
            raise ValueError(f"rhs has shape {self.rhs.shape}, expected ({n},)")
        if self.initial_guesses is None:
            self.initial_guesses = [np.zeros(n, dtype=self.rhs.dtype)]
        self.initial_guesses = [np.asarray(g) for g in self.initial_guesses]
        for g in self.initial_guesses:
            if g.shape != (n,):
                raise ValueError(f"initial guess has shape {g.shape}, expected ({n},)")

    @property
    def dimension(self):
        return self.operator.dimension

    def with_rhs(self, rhs, seed=None):
        """Same operator, different right-hand side (exact solution dropped)."""
        return ProblemInstance(self.operator, rhs, list(self.initial_guesses),
                               self.known_eigenvalues, seed, None, self.name,
                               dict(self.params))


def materialize_dense(op: LinearOperator, cap: int = DENSE_CAP) -> np.ndarray:
    """Dense matrix whose column ``j`` is ``op.apply(e_j)``."""
    n = op.dimension
    if n > cap:
        raise ValueError(f"refusing to materialize order {n} operator (cap {cap})")
    cols = []
    for j in range(n):
        e = np.zeros(n, dtype=op.dtype)
        e[j] = 1
        cols.append(np.asarray(op.apply(e)))
    return np.column_stack(cols)


def identity_problem(n: int = 10, seed: int = 0) -> ProblemInstance:
    op = LinearOperator(n, lambda v: np.array(v, copy=True), f"identity({n})")
    y = uniform_rhs(n, seed)
    return ProblemInstance(op, y, known_eigenvalues=np.ones(n), rng_seed=seed,
                           exact_solution=y.copy(), name="identity",
                           params={"n": n})


def diag_squares_problem(n: int = 100) -> ProblemInstance:
    """``diag(1^2, ..., n^2)`` with an all-ones right-hand side."""
    if n < 1:
        raise ValueError("n must be positive")
    d = np.arange(1, n + 1, dtype=np.float64) ** 2
    op = LinearOperator(n, lambda v: d * v if np.ndim(v) == 1 else d[:, None] * v,
                        f"diag_squares({n})")
    y = np.ones(n)
    return ProblemInstance(op, y, known_eigenvalues=d.copy(), exact_solution=y / d,
                           name="diag_squares", params={"n": n})


def convection_diffusion_matrix(grid: int, alpha: float, beta: float,
                                gamma: float) -> sp.csr_matrix:
    """Interior-point matrix for ``-Lap u + alpha u_x + beta u_y - gamma u``.

    ``grid`` counts grid points per side including the boundary, so the
    unknowns form a ``(grid-2)^2`` array (x index fastest). Second derivatives
    use the 5-point stencil, first derivatives centered differences, with
    zero Dirichlet data.
    """
    if grid < 3:
        raise ValueError("grid must be at least 3")
    m = grid - 2
    h = 1.0 / (grid - 1)
    I = sp.identity(m, format="csr")
    second = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(m, m)) / h**2
    first = sp.diags([-1.0, 1.0], [-1, 1], shape=(m, m)) / (2 * h)
    Dx = sp.kron(I, first)
    Dy = sp.kron(first, I)
    lap = sp.kron(I, second) + sp.kron(second, I)
    A = lap + alpha * Dx + beta * Dy - gamma * sp.identity(m * m)
    return sp.csr_matrix(A)


def convection_diffusion_problem(grid: int = 33, alpha: float = 50.0,
                                 beta: float = 100.0, gamma: float = 250.0,
                                 preconditioned: bool = True,
                                 seed: int = 0) -> ProblemInstance:
    """Convection-diffusion system, optionally preconditioned by the Laplacian.

    With ``preconditioned`` the operator is ``A2^{-1} A1`` where ``A2`` is the
    zero-parameter operator, applied through a sparse LU factorization.
    """
    A1 = convection_diffusion_matrix(grid, alpha, beta, gamma)
    n = A1.shape[0]
    label = f"convection_diffusion({grid}, {alpha}, {beta}, {gamma})"
    if preconditioned:
        A2 = convection_diffusion_matrix(grid, 0.0, 0.0, 0.0)
        lu = spla.splu(sp.csc_matrix(A2))
        assert np.all(np.abs(lu.U.diagonal()) > 0), "A2 is singular"

        def apply(v):
            return lu.solve(np.asarray(A1 @ v))

        op = LinearOperator(n, apply, "preconditioned " + label)
    else:
        op = LinearOperator.from_matrix(A1, label)
    params = dict(grid=grid, alpha=alpha, beta=beta, gamma=gamma,
                  preconditioned=preconditioned)
    return ProblemInstance(op, uniform_rhs(n, seed), rng_seed=seed,
                           name="convection_diffusion", params=params)


def toeplitz_banded_matrix(order: int) -> sp.csr_matrix:
    """-1 on the first superdiagonal, 1 on the diagonal and 3 subdiagonals."""
    return sp.csr_matrix(sp.diags([1.0, 1.0, 1.0, 1.0, -1.0], [-3, -2, -1, 0, 1],
                                  shape=(order, order)))


def toeplitz_banded_problem(order: int = 201, rhs="ones") -> ProblemInstance:
    """Banded Toeplitz system; ``rhs`` is ``"ones"`` or an integer seed."""
    if order < 5:
        raise ValueError("order must be at least 5")
    A = toeplitz_banded_matrix(order)
    op = LinearOperator.from_matrix(A, f"toeplitz_banded({order})")
    if isinstance(rhs, str):
        if rhs != "ones":
            raise ValueError(f"unknown rhs selector {rhs!r}")
        y, seed = np.ones(order), None
    else:
        seed = int(rhs)
        y = uniform_rhs(order, seed)
    return ProblemInstance(op, y, rng_seed=seed, name="toeplitz_banded",
                           params={"order": order, "rhs": rhs})


def dense_problem(A, y, name="dense", seed=None,
                  initial_guesses: Sequence[np.ndarray] = None) -> ProblemInstance:
    """Problem from an explicit matrix; small instances get their eigenvalues."""
    A = np.asarray(A)
    op = LinearOperator.from_matrix(A, name)
    eig = np.linalg.eigvals(A) if A.shape[0] <= DENSE_CAP else None
    return ProblemInstance(op, y, initial_guesses, eig, seed, name=name)


GENERATORS = {
    "identity": identity_problem,
    "diag_squares": diag_squares_problem,
    "convection_diffusion": convection_diffusion_problem,
    "toeplitz_banded": toeplitz_banded_problem,
}


def build_problem(generator: str, params: dict = None, seed: int = None) -> ProblemInstance:
    """Construct a problem from its generator name, e.g. from a JSON config."""
    try:
        fn = GENERATORS[generator]
    except KeyError:
        raise ValueError(f"unknown problem generator {generator!r}; "
                         f"choose from {sorted(GENERATORS)}") from None
    kwargs = dict(params or {})
    if seed is not None:
        if generator == "toeplitz_banded":
            kwargs.setdefault("rhs", seed)
        elif generator != "diag_squares":
            kwargs["seed"] = seed
    return fn(**kwargs)
