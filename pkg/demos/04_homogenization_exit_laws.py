"""Quantitative homogenization and the Brownian exit law.

The solution with boundary data F(x/R) approaches F(x/R) itself when F
is annihilated by the effective operator sum_i Sigma_ii d_ii; the gap
shrinks as R grows.  Exit laws of the walk approach those of the
Sigma-Brownian motion, simulated exactly by walk-on-spheres.
"""

import numpy as np

from rwre import (
    HemisphereCap,
    LatticeBox,
    SpherePartition,
    bm_exit_probability,
    exit_law_discrepancy,
    homogenization_error,
    make_law,
    sample_environment,
    sigma_harmonic_polynomial,
    symmetry_exact_sigma,
)

axis = make_law("axis-choice", d=2)
sigma = symmetry_exact_sigma(axis)
print("symmetry-exact Sigma for axis-choice:", sigma)

F = sigma_harmonic_polynomial(sigma, "quad")
print("\nreference polynomial: x^2/Sigma_11 - y^2/Sigma_22, Delta2 =", F.delta2)
for R in (8, 16, 32, 64):
    errs = [
        homogenization_error(
            sample_environment(axis, LatticeBox.centered(R + 2, 2), s), F, R
        ).error
        for s in range(5)
    ]
    print(f"   R={R:3d}: median max|F_R - G| = {np.median(errs):.4f}")

p, se = bm_exit_probability(sigma, HemisphereCap((1.0, 0.0)), (0.0, 0.0), samples=40_000, seed=1)
print(f"\nWoS hemisphere probability from the center: {p:.4f} +- {3 * se:.4f}")

env = sample_environment(axis, LatticeBox.centered(34, 2), seed=3)
res = exit_law_discrepancy(
    env, 32, r=0.0, targets=SpherePartition.with_mesh(2, 0.5),
    sigma=sigma, wos_samples=20_000, seed=4,
)
print(f"\nexit-law discrepancy at R=32 over {res.cells} cells:",
      round(res.max_discrepancy, 4))
print("quenched cell masses sum to", float(res.quenched_row_sums[0]))
