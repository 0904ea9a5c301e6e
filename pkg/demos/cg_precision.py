"""Conjugate gradients in single precision drift away from exact arithmetic.

The same CG run in float32 and in float64 with full reorthogonalization start
out with matching search directions. Rounding destroys conjugacy in the
cheaper run, the directions separate, and its error stalls while the
reference keeps converging.
"""

import numpy as np

from ocm import cg_direction_comparison, diag_squares_problem

cmp = cg_direction_comparison(diag_squares_problem(100), 100)
print(f"{'step':>4} {'direction gap':>14} {'err float32':>12} {'err float64':>12}")
for n in (0, 5, 10, 20, 30, 40, 60, 80, 99):
    print(f"{n + 1:>4} {cmp.deviations[n]:14.3e} {cmp.reduced_errors[n]:12.3e} "
          f"{cmp.extended_errors[n]:12.3e}")
print(f"\nbest A-norm error: float32 {np.min(cmp.reduced_errors):.2e}, "
      f"reorthogonalized float64 {np.min(cmp.extended_errors):.2e}")
