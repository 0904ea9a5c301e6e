"""Degree versus order on the preconditioned convection-diffusion system.

Each oc(k, m) step costs k operator applications. Raising the order m reuses
stored Krylov images for free, so a method with half the degree and a larger
order can match a high-degree one at half the cost per step.
"""

import numpy as np

from ocm import convection_diffusion_problem, preset_config, solve

problem = convection_diffusion_problem(33, seed=0)
ks, ms = range(1, 7), range(1, 6)

rates = np.ones((len(ks), len(ms)))
for a, k in enumerate(ks):
    for b, m in enumerate(ms):
        rep = solve(problem, preset_config(f"oc({k},{m})", max_steps=60, relres_tol=1e-300))
        rates[a, b] = rep.observed_rate

print("observed rate per step (rows k, columns m)")
print("k\\m " + "".join(f"{m:>8}" for m in ms))
for a, k in enumerate(ks):
    print(f"{k:>3} " + "".join(f"{r:8.3f}" for r in rates[a]))

print("\ndigits gained per operator application")
print("k\\m " + "".join(f"{m:>8}" for m in ms))
for a, k in enumerate(ks):
    print(f"{k:>3} " + "".join(f"{-np.log10(r) / k:8.4f}" for r in rates[a]))
