"""Operator coefficient methods oc(k, m) on the natural tableau basis.

Each step picks the next iterate from the span of the last ``m`` iterates and
the first ``k`` Krylov vectors ``r, A r, ..., A^{k-1} r`` of each of their
residuals. Tableau position ``(0, j)`` is ``x_{n-j}`` and position ``(i, j)``
with ``i >= 1`` is ``A^{i-1} r_{n-j}``, for ``j = 1..m``.

Only ``k`` new operator applications are needed per step: the images of all
other basis vectors were computed at earlier steps and are kept in a ring
buffer. ``A x_n`` is assembled from those images. Errors in an assembled
``A x`` propagate through later assemblies and can grow, so each stored
iterate carries a bound on its error; ``A x_n`` is recomputed with one extra
application when the bound exceeds ``drift_tol * ||y||`` and at least every
``refresh_period`` steps.
"""

from __future__ import annotations

import math
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Union

import numpy as np

from .linalg import (NumericalFailure, machine_eps, min_norm_least_squares,
                     spd_small_solve)
from .operators import ProblemInstance

OBJECTIVES = ("residual_2norm", "error_Anorm")
RESIDUAL_MODES = ("assembled", "explicit_matvec")
KRYLOV_BASES = ("monomial", "arnoldi")
ROUNDING_SAFETY = 1

Position = tuple


def tableau_positions(k: int, m: int):
    """All ``(i, j)`` positions, grouped by column ``j`` then row ``i``."""
    return [(i, j) for j in range(1, m + 1) for i in range(0, k + 1)]


@dataclass
class SolverConfig:
    k: int = 1
    m: int = 1
    homogeneous: bool = False
    objective: str = "residual_2norm"
    column_subset: Optional[Union[Callable, Iterable]] = None
    residual_mode: str = "assembled"
    krylov_basis: str = "monomial"
    refresh_period: int = 50
    drift_tol: Optional[float] = 1e-12
    rank_tol: Optional[float] = None
    relres_tol: float = 1e-10
    max_steps: int = 100
    name: str = ""

    def __post_init__(self):
        if self.k < 1 or self.m < 1:
            raise ValueError("degree k and order m must be at least 1")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")
        if self.residual_mode not in RESIDUAL_MODES:
            raise ValueError(f"residual_mode must be one of {RESIDUAL_MODES}")
        if self.krylov_basis not in KRYLOV_BASES:
            raise ValueError(f"krylov_basis must be one of {KRYLOV_BASES}")
        if self.refresh_period < 1:
            raise ValueError("refresh_period must be at least 1")
        if self.drift_tol is not None and not self.drift_tol > 0:
            raise ValueError("drift_tol must be positive or None")
        if not self.relres_tol > 0:
            raise ValueError("relres_tol must be positive")
        full = tableau_positions(self.k, self.m)
        subset = self.column_subset
        if subset is None:
            subset = frozenset(full)
        elif callable(subset):
            subset = frozenset(p for p in full if subset(*p))
        else:
            subset = frozenset(tuple(p) for p in subset)
            extra = subset - set(full)
            if extra:
                raise ValueError(f"positions outside the tableau: {sorted(extra)}")
        if not subset:
            raise ValueError("column_subset selects no tableau positions")
        self.column_subset = subset

    @property
    def is_full_tableau(self):
        return len(self.column_subset) == (self.k + 1) * self.m

    def to_dict(self):
        return {
            "name": self.name, "k": self.k, "m": self.m,
            "homogeneous": self.homogeneous, "objective": self.objective,
            "column_subset": sorted([list(p) for p in self.column_subset]),
            "residual_mode": self.residual_mode, "krylov_basis": self.krylov_basis,
            "refresh_period": self.refresh_period, "drift_tol": self.drift_tol,
            "rank_tol": self.rank_tol,
            "relres_tol": self.relres_tol, "max_steps": self.max_steps,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "column_subset" in d and d["column_subset"] is not None:
            d["column_subset"] = [tuple(p) for p in d["column_subset"]]
        return cls(**d)


_PRESET_RE = re.compile(r"^\s*([a-z_]+)\s*(?:\(\s*([0-9\s,]*)\))?\s*$")


def preset_config(name: str, **overrides) -> SolverConfig:
    """Configuration for a named method.

    Recognized names: ``cg``, ``cr``, ``un_cg``, ``un_cr``, ``orthomin(m)``,
    ``un_orthomin(m)``, ``gcr_gmres(k)``, ``un_gcr_gmres(k)`` and ``oc(k,m)``.
    ``gcr_gmres(k)`` is gcr(k-1)/gmres(k); ``orthomin(m)`` keeps ``m + 1``
    iterates. Keyword overrides are passed through to :class:`SolverConfig`.
    """
    match = _PRESET_RE.match(name)
    if not match:
        raise ValueError(f"cannot parse preset {name!r}")
    base, args = match.group(1), match.group(2)
    params = [int(a) for a in args.split(",")] if args and args.strip() else []
    homogeneous = not base.startswith("un_")
    core = base[3:] if base.startswith("un_") else base

    def want(count):
        if len(params) != count:
            raise ValueError(f"preset {core!r} takes {count} integer parameter(s)")

    if core in ("cg", "cr"):
        want(0)
        kw = dict(k=1, m=2, column_subset={(0, 1), (0, 2), (1, 1)},
                  objective="error_Anorm" if core == "cg" else "residual_2norm")
    elif core == "orthomin":
        want(1)
        (mm,) = params
        if mm < 0:
            raise ValueError("orthomin order must be nonnegative")
        order = mm + 1
        kw = dict(k=1, m=order,
                  column_subset={(0, j) for j in range(1, order + 1)} | {(1, 1)})
    elif core == "gcr_gmres":
        want(1)
        kw = dict(k=params[0], m=1)
    elif core == "oc" and not base.startswith("un_"):
        want(2)
        kw = dict(k=params[0], m=params[1])
        homogeneous = False
    else:
        raise ValueError(f"unknown preset {name!r}")
    if min([kw["k"], kw["m"]]) < 1:
        raise ValueError("preset parameters must be positive")
    kw["homogeneous"] = homogeneous
    kw["name"] = name.replace(" ", "")
    kw.update(overrides)
    return SolverConfig(**kw)


@dataclass
class Group:
    """Data of one stored iterate.

    ``basis`` holds ``k`` vectors spanning ``span{r, A r, ..., A^{k-1} r}`` and
    ``images`` their products with ``A``. With the monomial basis these are
    ``A^i r`` for i=0..k-1 and i=1..k. ``dx`` is the step ``x - x_older``
    from the next older iterate and ``Adx`` its image; homogeneous methods
    build iterate differences from these instead of subtracting nearly
    equal iterates. ``drift`` and ``ddrift`` bound the errors of the
    assembled ``Ax`` and ``Adx``.
    """

    x: np.ndarray
    Ax: np.ndarray
    r: np.ndarray
    basis: list
    images: list
    dx: Optional[np.ndarray] = None
    Adx: Optional[np.ndarray] = None
    drift: float = 0.0
    ddrift: float = 0.0

    @property
    def krylov(self):
        """``[r, A r, ..., A^k r]``; meaningful for the monomial basis only."""
        return [self.r] + list(self.images)


@dataclass
class BasisInventory:
    groups: deque
    step_index: int = 0
    since_refresh: int = 0
    matvecs: int = 0

    def group(self, j):
        """Group holding ``x_{n-j}`` (``j`` is 1-based)."""
        return self.groups[j - 1]

    def offset(self, j):
        """``(x_{n-j} - x_{n-1}, A(...), error bound)`` summed from stored steps."""
        g1 = self.groups[0]
        dx, Adx, err = np.zeros_like(g1.x), np.zeros_like(g1.Ax), 0.0
        for l in range(1, j):
            g = self.group(l)
            dx = dx - g.dx
            Adx = Adx - g.Adx
            err += g.ddrift
        return dx, Adx, err


def _krylov_chain(op, r, k, kind="monomial"):
    """``(basis, images)`` for the degree-``k`` Krylov columns of ``r``.

    ``arnoldi`` orthonormalizes each new vector against the previous ones
    (modified Gram-Schmidt, two passes). Both variants cost ``k`` operator
    applications and span the same space.
    """
    if kind == "monomial":
        chain = [r]
        for _ in range(k):
            chain.append(np.asarray(op.apply(chain[-1])))
        return chain[:-1], chain[1:]
    basis, images = [], []
    nrm = np.linalg.norm(r)
    w = r / nrm if nrm > 0 else np.zeros_like(r)
    for _ in range(k):
        basis.append(w)
        Aw = np.asarray(op.apply(w))
        images.append(Aw)
        w = Aw.copy()
        for _ in range(2):
            for q in basis:
                w = w - np.vdot(q, w) * q
        nrm = np.linalg.norm(w)
        if nrm > 1e3 * np.finfo(float).eps * np.linalg.norm(Aw):
            w = w / nrm
        else:
            # invariant subspace reached, further columns add nothing
            w = np.zeros_like(w)
    return basis, images


def _working_dtype(problem):
    return np.result_type(problem.rhs, problem.operator.dtype, np.float64)


def init_state(problem: ProblemInstance, config: SolverConfig) -> BasisInventory:
    """Build one group per initial guess, newest (``x_0``) first."""
    guesses = problem.initial_guesses
    if len(guesses) > config.m:
        raise ValueError(f"{len(guesses)} initial guesses exceed order m={config.m}")
    n = problem.dimension
    dtype = _working_dtype(problem)
    y = problem.rhs.astype(dtype)
    op = problem.operator
    groups = deque(maxlen=config.m)
    matvecs = 0
    for g in guesses:
        if g.shape != (n,):
            raise ValueError(f"initial guess length {g.shape} != {n}")
        x = g.astype(dtype)
        Ax = np.asarray(op.apply(x)).astype(dtype)
        r = y - Ax
        basis, images = _krylov_chain(op, r, config.k, config.krylov_basis)
        matvecs += 1 + config.k
        groups.append(Group(x, Ax, r, basis, images))
    eps = machine_eps(dtype)
    for newer, older in zip(list(groups), list(groups)[1:]):
        newer.dx = newer.x - older.x
        newer.Adx = newer.Ax - older.Ax
        newer.ddrift = eps * (np.linalg.norm(newer.Ax) + np.linalg.norm(older.Ax))
    return BasisInventory(groups, 0, 0, matvecs)


@dataclass
class SelectionBasis:
    V: np.ndarray
    AV: np.ndarray
    positions: list
    base_position: Optional[Position]
    base_x: np.ndarray
    base_Ax: np.ndarray
    base_r: np.ndarray
    column_drift: np.ndarray
    base_drift: float = 0.0


def assemble_selection_basis(state: BasisInventory, config: SolverConfig) -> SelectionBasis:
    """Columns of ``V`` and ``A V`` for the current step, without new matvecs.

    In the homogeneous case the affine base is the newest selected iterate and
    the other selected iterates enter as differences against it, so any
    choice of coefficients keeps the x-coefficients summing to one. The
    differences are sums of stored steps, which avoids cancellation when
    iterates stagnate.
    """
    if not state.groups:
        raise ValueError("state has no groups")
    ng = len(state.groups)
    subset = config.column_subset
    present = [(i, j) for (i, j) in tableau_positions(config.k, config.m)
               if j <= ng and (i, j) in subset]
    cols, images, positions, drifts = [], [], [], []
    base = None
    sample = state.groups[0].x
    base_x = np.zeros_like(sample)
    base_Ax = np.zeros_like(sample)
    base_drift = 0.0
    if config.homogeneous:
        xs = [j for (i, j) in present if i == 0]
        if not xs:
            raise ValueError("homogeneous method needs at least one iterate column")
        base = (0, xs[0])
        g0 = state.group(xs[0])
        base_x, base_Ax, base_drift = g0.x, g0.Ax, g0.drift
        base_dx, base_Adx, base_err = state.offset(xs[0])
    for (i, j) in present:
        g = state.group(j)
        if i == 0:
            if base is not None and (i, j) == base:
                continue
            if base is not None:
                dx, Adx, err = state.offset(j)
                cols.append(dx - base_dx)
                images.append(Adx - base_Adx)
                drifts.append(err + base_err)
            else:
                cols.append(g.x)
                images.append(g.Ax)
                drifts.append(g.drift)
        else:
            cols.append(g.basis[i - 1])
            images.append(g.images[i - 1])
            drifts.append(0.0)
        positions.append((i, j))
    if not cols:
        raise ValueError("selection basis is empty after applying column_subset")
    base_r = state.group(base[1]).r if base is not None else None
    return SelectionBasis(np.column_stack(cols), np.column_stack(images), positions,
                          base, base_x, base_Ax, base_r, np.array(drifts), base_drift)


@dataclass
class StepRecord:
    """One step's ``(k+1) x m`` coefficient tableau and residual data.

    Row 0 holds the iterate coefficients. Rows ``i >= 1`` are coefficients of
    ``A^{i-1} r_{n-j}`` with the monomial basis and of the ``i``-th Arnoldi
    vector otherwise.
    """

    step: int
    coefficients: np.ndarray
    x_coefficient_sum: float
    forcing_coefficient: float
    residual_norm: float
    relres: float
    numerical_rank: int
    matvecs: int
    refreshed: bool = False
    error_norm: Optional[float] = None
    error_anorm: Optional[float] = None

    def to_dict(self):
        c = self.coefficients
        return {
            "step": self.step,
            "coefficients": _jsonable(c),
            "x_coeff_sum": _jsonable(self.x_coefficient_sum),
            "forcing_coefficient": _jsonable(self.forcing_coefficient),
            "residual_norm": self.residual_norm, "relres": self.relres,
            "rank": self.numerical_rank, "matvecs": self.matvecs,
            "refreshed": self.refreshed,
            "error_norm": self.error_norm, "error_anorm": self.error_anorm,
        }


def _jsonable(v):
    v = np.asarray(v)
    if np.iscomplexobj(v):
        return {"re": v.real.tolist(), "im": v.imag.tolist()}
    return v.tolist()


def _fsum(values):
    values = np.asarray(values)
    if np.iscomplexobj(values):
        return complex(math.fsum(values.real), math.fsum(values.imag))
    return math.fsum(values)


@dataclass
class ConvergenceReport:
    records: list
    relative_residuals: list
    converged: bool
    observed_rate: Optional[float]
    config: dict
    seed: Optional[int]
    matvecs: int = 0
    problem: dict = field(default_factory=dict)
    x: Optional[np.ndarray] = None

    @property
    def steps(self):
        return len(self.records)


def _error_norms(problem, x, r):
    xs = problem.exact_solution
    if xs is None:
        return None, None
    e = xs - x
    # A e = r, so the A-norm needs no extra operator application.
    anorm2 = np.real(np.vdot(e, r))
    return float(np.linalg.norm(e)), float(np.sqrt(max(anorm2, 0.0)))


def step(state: BasisInventory, problem: ProblemInstance, config: SolverConfig,
         rhs_norm: Optional[float] = None) -> StepRecord:
    """Advance the state by one oc(k, m) step and return its record."""
    op = problem.operator
    basis = assemble_selection_basis(state, config)
    dtype = basis.V.dtype
    y = problem.rhs.astype(dtype)
    b = basis.base_r if config.homogeneous else y

    if config.objective == "residual_2norm":
        ls = min_norm_least_squares(basis.AV, b, config.rank_tol)
        c, rank = ls.coefficients, ls.numerical_rank
    else:
        G = basis.V.conj().T @ basis.AV
        g = basis.V.conj().T @ b
        d = np.sqrt(np.abs(np.real(np.diag(G))))
        d = np.where(d > 0, d, 1.0)
        cs, rank = spd_small_solve(G / np.outer(d, d), g / d, config.rank_tol,
                                   full_output=True)
        c = cs / d

    coeffs = np.zeros((config.k + 1, config.m), dtype=np.result_type(c, np.float64))
    for ci, (i, j) in zip(c, basis.positions):
        coeffs[i, j - 1] += ci
        if i == 0 and basis.base_position is not None:
            coeffs[0, basis.base_position[1] - 1] -= ci
    if basis.base_position is not None:
        coeffs[0, basis.base_position[1] - 1] += 1
    xsum = _fsum(coeffs[0])

    Vc, AVc = basis.V @ c, basis.AV @ c
    x_new = basis.base_x + Vc
    matvecs = 0
    state.since_refresh += 1
    # error of the assembled A x_new: inherited from the stored images it is
    # built from, plus rounding of the assembly itself
    rounding = ROUNDING_SAFETY * machine_eps(dtype) * (
        np.linalg.norm(basis.base_Ax) + np.abs(c) @ np.linalg.norm(basis.AV, axis=0))
    carried = float(np.abs(c) @ basis.column_drift) + rounding
    drift = basis.base_drift + carried
    refresh = bool(config.residual_mode == "explicit_matvec"
                   or state.since_refresh >= config.refresh_period
                   or (config.drift_tol is not None
                       and drift > config.drift_tol * np.linalg.norm(y)))
    if refresh:
        Ax_new = np.asarray(op.apply(x_new)).astype(dtype)
        matvecs += 1
        state.since_refresh = 0
        drift = 0.0
    else:
        Ax_new = basis.base_Ax + AVc
    r_new = y - Ax_new
    kbasis, kimages = _krylov_chain(op, r_new, config.k, config.krylov_basis)
    matvecs += config.k

    g1 = state.group(1)
    if basis.base_position is not None:
        # x_new - x_{n-1} = (base_x - x_{n-1}) + V c, without subtracting iterates
        off, Aoff, off_err = state.offset(basis.base_position[1])
        dx_new, Adx_new, ddrift = off + Vc, Aoff + AVc, off_err + carried
    else:
        dx_new, Adx_new = x_new - g1.x, Ax_new - g1.Ax
        ddrift = drift + g1.drift + rounding

    state.groups.appendleft(Group(x_new, Ax_new, r_new, kbasis, kimages, dx_new, Adx_new, drift, ddrift))
    state.step_index += 1
    state.matvecs += matvecs

    rnorm = float(np.linalg.norm(r_new))
    if not (np.isfinite(rnorm) and np.all(np.isfinite(c))):
        raise NumericalFailure(
            f"non-finite values at step {state.step_index} ({config.name or 'oc'})")
    if rhs_norm is None:
        rhs_norm = float(np.linalg.norm(y))
    err, err_a = _error_norms(problem, x_new, r_new)
    return StepRecord(state.step_index, coeffs, xsum, 1 - xsum, rnorm,
                      rnorm / rhs_norm if rhs_norm > 0 else rnorm, rank,
                      matvecs, refresh, err, err_a)


def current_iterate(state: BasisInventory) -> np.ndarray:
    return state.groups[0].x


def solve(problem: ProblemInstance, config: SolverConfig, callback=None) -> ConvergenceReport:
    """Iterate until the relative residual reaches ``relres_tol`` or ``max_steps``.

    Stagnating steps are recorded, not treated as errors. ``callback`` gets
    ``(state, record)`` after each step.
    """
    state = init_state(problem, config)
    y = problem.rhs
    ynorm = float(np.linalg.norm(y))
    r0 = float(np.linalg.norm(state.groups[0].r))
    if not np.isfinite(r0):
        raise NumericalFailure("non-finite initial residual")
    relres = [r0 / ynorm if ynorm > 0 else r0]
    records = []
    while relres[-1] > config.relres_tol and len(records) < config.max_steps:
        rec = step(state, problem, config, ynorm)
        records.append(rec)
        relres.append(rec.relres)
        if callback is not None:
            callback(state, rec)
    converged = relres[-1] <= config.relres_tol
    rate = observed_rate(relres) if len(relres) >= 4 else None
    return ConvergenceReport(records, relres, converged, rate, config.to_dict(),
                             problem.rng_seed, state.matvecs,
                             {"name": problem.name, "params": problem.params,
                              "label": problem.operator.label},
                             current_iterate(state))


def observed_rate(report_or_relres) -> float:
    """Per-step rate ``10**slope`` of a least-squares line through the last half
    of ``log10(relres)``.

    An exact zero residual yields rate 0.
    """
    if isinstance(report_or_relres, ConvergenceReport):
        relres = report_or_relres.relative_residuals
    else:
        relres = report_or_relres
    relres = np.asarray(relres, dtype=float)
    if relres.size < 4:
        raise ValueError("need at least 4 residuals to fit a rate")
    if np.any(relres == 0):
        return 0.0
    if np.any(relres < 0) or not np.all(np.isfinite(relres)):
        raise ValueError("residuals must be positive and finite")
    start = relres.size // 2
    n = np.arange(start, relres.size, dtype=float)
    slope = np.polyfit(n, np.log10(relres[start:]), 1)[0]
    return float(10.0 ** slope)


def termination_step(relres) -> Optional[int]:
    """Index of the first exactly-zero residual, if any."""
    hits = np.flatnonzero(np.asarray(relres) == 0)
    return int(hits[0]) if hits.size else None
