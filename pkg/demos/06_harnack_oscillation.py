"""Empirical Harnack constants and the oscillation/coupling duality.

Sweeping point masses over the boundary of the 2R-ball measures the
worst sup/inf ratio over the R-ball; as R grows it trends toward the
classical ball constant ((1+1/2)/(1-1/2))^d = 9 in d = 2.  The
oscillation constant equals the worst total-variation distance between
exit laws, which the maximal coupling realizes as a failure rate.
"""

import warnings

import numpy as np

from rwre import (
    LatticeBox,
    basic_coupling,
    classical_harnack_constant,
    harnack_ratio,
    make_law,
    oscillation_constant,
    sample_environment,
)

axis = make_law("axis-choice", d=2)
print("classical reference constant (d=2, rho=1/2):", classical_harnack_constant(2, 0.5))

print("\nempirical Harnack ratios (median of 5 seeds):")
for R in (8, 16, 32):
    vals = []
    zero_frac = []
    for seed in range(5):
        env = sample_environment(axis, LatticeBox.centered(2 * R + 2, 2), seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            m = harnack_ratio(env, R)
        vals.append(m.ratio)
        zero_frac.append(m.zero_infimum_frac)
    print(f"   R={R:3d}: ratio {np.median(vals):8.2f}   "
          f"unreachable point masses: {np.mean(zero_frac):.1%}")

srw = make_law("srw", d=2)
env = sample_environment(srw, LatticeBox.centered(18, 2), 0)
osc = oscillation_constant(env, R=8, psi=2.0)
print("\nsrw oscillation constant at R=8, Psi=2:", round(osc.upsilon, 4))
y, z = osc.argmax_pair
res = basic_coupling(env, (0, 0), 8, y, z, M=2, seed=1, replicates=20_000,
                     trajectory_samples=2)
print("worst pair", (y, z), "coupling success:", res.success_frequency,
      " (1 - TV =", round(1 - res.tv, 4), ")")
run = res.runs[0]
print("sample coupled run: exits", run.exit_y, run.exit_z,
      "->", "met" if run.success else "missed")
