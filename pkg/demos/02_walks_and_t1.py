"""Quenched walks, the rescaled clock, and diffusivity estimates.

T_1 is the first time every coordinate has moved; between consecutive
T_k the walk genuinely explores all of Z^d even when single sites are
non-elliptic.  For srw in d = 2 the tail P(T_1 > n) is exactly
(1/2)^(n-1); for the axis-choice law T_1 depends on the environment
and can even be infinite on degenerate (all-horizontal) regions.
"""

import numpy as np

from rwre import (
    LatticeBox,
    constant_environment,
    estimate_sigma,
    exact_walk_distribution,
    make_law,
    rescaled_times,
    run_walk,
    sample_environment,
    t1_statistics,
)

srw = make_law("srw", d=2)
env = sample_environment(srw, LatticeBox.centered(40, 2), seed=0)

traj = run_walk(env, (0, 0), ("steps", 12), rng_seed=1)
rt = rescaled_times(traj)
print("first 12 moves (signed axis):", traj.steps.tolist())
print("rescaled times:", rt.times, "(complete block)" if rt.completed else "")

dist = exact_walk_distribution(env, (0, 0), 4)
print("\nexact 4-step law has", len(dist), "sites, total mass", sum(dist.values()))

stats = t1_statistics(env, [(0, 0)], samples=30_000, seed=3, horizon=24)
print("\nT_1 tail vs (1/2)^(n-1):")
for n in (2, 4, 6, 8):
    i = n - 1
    print(f"   n={n}: {stats.tail[i]:.4f}  vs  {0.5 ** (n - 1):.4f}")

horizontal = constant_environment((0.5, 0.0), LatticeBox.centered(40, 2))
h = t1_statistics(horizontal, [(0, 0)], samples=200, seed=0, horizon=30)
print("\nall-horizontal environment: censored fraction", h.censored_frac,
      "suspects:", h.infinite_t1_suspects)

axis = make_law("axis-choice", d=2)
sig = estimate_sigma(axis, run_length=150_000, burn_in=5_000, seed=9)
print("\naxis-choice diffusivity estimate (exact value is 1/2 per axis):")
print("   sigma_hat =", np.round(sig.sigma, 4), "+-", np.round(3 * sig.stderr, 4))
