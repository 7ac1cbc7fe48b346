"""Directed percolation: sinks, stairs, tadpoles and rectangular holes.

Edges follow positive weights, so a site may reach a neighbor that
cannot reach back; the in-box terminal strong components are the
sinks.  In d = 2 the ES/EN stair construction certifies eastward
connectivity and the complement of the sink decomposes into exact
rectangles.
"""

import numpy as np

from rwre import (
    LatticeBox,
    build_digraph,
    distance_tail,
    es_stair,
    find_sinks,
    holes_are_rectangles,
    make_law,
    sample_environment,
    sink_stats,
    tadpole,
)

axis = make_law("axis-choice", d=2)

stats = sink_stats(axis, [8, 16, 32, 64], num_seeds=10, seed0=0)
print("P(A(n) = 1) over concentric boxes (10 seeds):")
for n in stats.sizes:
    p, lo, hi = stats.p_unique[n]
    print(f"   n={n:3d}: {p:.2f}  CI [{lo:.2f}, {hi:.2f}]")
print("minimum sink density seen:", round(stats.min_density, 3))

env = sample_environment(axis, LatticeBox.centered(120, 2), seed=11)
st = es_stair(env)
print("\nES stair: V0 =", st.v0_es, " east runs", st.h_es,
      " length", st.l_es, "=", 2 * st.v0_es + sum(st.h_es))
print("E-path is the", "EN" if st.e_is_en else "ES", "side, bubble size", len(st.bubble))

tp = tadpole(env, 16)
print("tadpole to x=16:", tp.size, "sites in", tp.m_n, "concatenations;",
      "reachability within the tadpole:", "ok" if tp.connectivity_ok else "BROKEN")

rep = holes_are_rectangles(sample_environment(axis, LatticeBox((0, 0), (63, 63)), 5), seed=5)
print("\n64x64 sample:", rep.n_interior_holes, "interior holes, all rectangles:",
      rep.all_rectangles, " largest:", rep.max_hole_area, "sites")

dt = distance_tail(axis, [8, 16], [1.0, 4.0], num_seeds=8, seed0=0)
print("\ndirected-distance tail within the sink:")
for b, c, p, lo, hi in dt.table:
    print(f"   |x-y|_1={b:2d}, C={c}: P(d > C|x-y|) = {p:.3f}")
