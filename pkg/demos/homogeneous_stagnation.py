"""Dropping the sum-to-one constraint on the iterate coefficients.

gcr(4)/gmres(5) keeps only the newest iterate with weight one. The
inhomogeneous variant lets that weight float, which on this system turns a
stagnating run into a converging one for the same cost per step.
"""

from ocm import convection_diffusion_problem, preset_config, solve

problem = convection_diffusion_problem(33, seed=0)
runs = {name: solve(problem, preset_config(name, max_steps=40))
        for name in ("gcr_gmres(5)", "un_gcr_gmres(5)")}

print(f"{'step':>4}" + "".join(f"{name:>18}" for name in runs))
for n in range(0, 41, 5):
    print(f"{n:>4}" + "".join(f"{rep.relative_residuals[n]:18.3e}" for rep in runs.values()))

un = runs["un_gcr_gmres(5)"]
print("\nx-coefficient sums of the inhomogeneous run, last 5 steps:")
print("  " + "  ".join(f"{rec.x_coefficient_sum:.4f}" for rec in un.records[-5:]))
