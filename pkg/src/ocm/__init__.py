"""Operator coefficient iterative methods oc(k, m) for ``A x = y``.

The solver picks each iterate from the last ``m`` iterates and the first
``k`` Krylov vectors of their residuals by a least-squares minimization;
the ``stationary`` module analyses fixed coefficient tableaux.
"""

from .linalg import (IndefiniteSystemError, LsSolution, NumericalFailure,
                     householder_reduce, min_norm_least_squares, scale_columns,
                     spd_small_solve, svd_upper_triangular)
from .operators import (CountingOperator, LinearOperator, ProblemInstance,
                        build_problem, convection_diffusion_problem,
                        dense_problem, diag_squares_problem, identity_problem,
                        materialize_dense, toeplitz_banded_problem)
from .solver import (BasisInventory, ConvergenceReport, SolverConfig, StepRecord,
                     assemble_selection_basis, init_state, observed_rate,
                     preset_config, solve, step)
from .classic import cg_direction_comparison, chebyshev_step_coefficients
from .stationary import (CoefficientTableau, DomainGrid, RateReport, Theorem1Bound,
                         column_polynomials, convergence_domain, eigen_rate, eigen_roots,
                         method_rate, named_tableau, residual_polynomials,
                         stationary_2nd_order_foci, stationary_iterate,
                         theorem1_bound)

__version__ = "0.1.0"
