"""Where a fixed coefficient tableau converges.

For a constant tableau each eigenvalue lam gets a rate r(lam), the largest
root of a polynomial in X whose coefficients are polynomials in lam. The run
converges when the whole spectrum sits where r < 1. Below, a coarse text
raster for a few tableaux: '#' marks r < 1, '+' marks r < 0.8.
"""

import numpy as np

from ocm import convergence_domain, method_rate, named_tableau, stationary_iterate
from ocm.operators import dense_problem


def show(name, rect=(-1.0, 3.0, -1.5, 1.5)):
    grid = convergence_domain(named_tableau(name), rect, (61, 21))
    print(f"{name}  re {rect[0]}..{rect[1]}, im {rect[2]}..{rect[3]}")
    for row in grid.values[::-1]:
        print("  " + "".join("+" if v < 0.8 else "#" if v < 1 else "." for v in row))
    print()


for name in ("richardson:1", "second_order:0.5,1.5", "table4_a", "table4_f"):
    show(name)

# A spectrum inside the table4_a domain; the run converges at close to the
# predicted worst-eigenvalue rate.
tab = named_tableau("table4_a")
grid = convergence_domain(tab, resolution=(81, 81))
inside = grid.points[(grid.values > 0.7) & (grid.values < 0.9)]
lams = np.random.default_rng(0).choice(inside, 6, replace=False)
lams = np.concatenate([lams, lams.conj()])
rep = stationary_iterate(dense_problem(np.diag(lams), np.ones(lams.size, dtype=complex)), tab, 80)
print(f"predicted R = {method_rate(tab, lams).R:.4f}, observed {rep.observed_rate:.4f}")
