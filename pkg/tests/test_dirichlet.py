import math

import numpy as np
import pytest

from rwre.dirichlet import (
    apply_generator,
    box_sites,
    check_max_principle,
    discrete_ball,
    domain_from_sites,
    exposed_points,
    harmonic_measure,
    rescaled_generator,
    solve_dirichlet,
    widened_boundary,
)
from rwre.env import LatticeBox, make_law, sample_environment
from rwre.errors import DomainError
from rwre.walk import _choose_moves


def test_ball_d1():
    dom = discrete_ball(2.5, d=1)
    assert sorted(dom.interior.ravel().tolist()) == [-1, 0, 1]
    assert sorted(dom.boundary.ravel().tolist()) == [-2, 2]


def test_ball_interior_neighbors_inside():
    dom = discrete_ball(6, d=2)
    all_set = {tuple(s) for s in dom.all_sites()}
    for s in dom.interior:
        for i in range(2):
            for sg in (1, -1):
                nb = (s[0] + sg * (1 - i), s[1] + sg * i)
                assert nb in all_set


def test_ball_matches_comprehension_oracle():
    R = 3
    ball = {
        (x, y)
        for x in range(-4, 5)
        for y in range(-4, 5)
        if x * x + y * y <= R * R
    }
    interior = {
        s
        for s in ball
        if all(
            (s[0] + dx, s[1] + dy) in ball
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1))
        )
    }
    dom = discrete_ball(R, d=2)
    assert {tuple(s) for s in dom.interior} == interior
    assert {tuple(s) for s in dom.boundary} == ball - interior


def test_generator_kills_linear(axis2_env):
    a = np.array([2.0, -3.0])
    u = lambda s: float(a @ np.asarray(s))
    for site in [(0, 0), (3, -2), (-5, 7)]:
        assert apply_generator(axis2_env, u, site) == 0.0


def test_generator_quadratic_srw(srw2_env):
    u = lambda s: float(s[0] ** 2 + s[1] ** 2)
    assert apply_generator(srw2_env, u, (2, -1)) == pytest.approx(1.0)


def test_generator_matches_direct_sum(axis2_env):
    rng = np.random.default_rng(0)
    vals = {}
    for x in range(-1, 2):
        for y in range(-1, 2):
            vals[(x, y)] = float(rng.normal())
    got = apply_generator(axis2_env, vals, (0, 0))
    w = axis2_env.weight_at((0, 0))
    expected = (
        w[0] * (vals[(1, 0)] - vals[(0, 0)])
        + w[0] * (vals[(-1, 0)] - vals[(0, 0)])
        + w[1] * (vals[(0, 1)] - vals[(0, 0)])
        + w[1] * (vals[(0, -1)] - vals[(0, 0)])
    )
    assert got == pytest.approx(expected, abs=1e-15)


def test_generator_missing_neighbor(axis2_env):
    with pytest.raises(DomainError):
        apply_generator(axis2_env, {(0, 0): 1.0}, (0, 0))


def test_solve_constant(axis2_env):
    dom = discrete_ball(5, d=2)
    sol = solve_dirichlet(axis2_env, dom, lambda s: 3.25)
    assert np.allclose(sol.u_interior, 3.25, atol=1e-12)


def test_solve_linear_exact(axis2_env):
    dom = discrete_ball(8, d=2)
    a = np.array([1.5, -0.25])
    sol = solve_dirichlet(axis2_env, dom, lambda s: float(a @ np.asarray(s)), tol=1e-12)
    assert np.max(np.abs(sol.u_interior - dom.interior @ a)) <= 1e-9


def test_solve_gambler_d1(srw1):
    env = sample_environment(srw1, LatticeBox((-5,), (5,)), 0)
    dom = discrete_ball(2.5, d=1)
    sol = solve_dirichlet(env, dom, {(-2,): 0.0, (2,): 4.0})
    got = {int(s[0]): v for s, v in zip(dom.interior, sol.u_interior)}
    assert got[-1] == pytest.approx(1.0)
    assert got[0] == pytest.approx(2.0)
    assert got[1] == pytest.approx(3.0)


def test_solve_max_principle(axis2_env):
    rng = np.random.default_rng(5)
    dom = discrete_ball(7, d=2)
    g = rng.uniform(-1, 3, size=dom.num_boundary)
    sol = solve_dirichlet(axis2_env, dom, g)
    assert sol.u_interior.min() >= g.min() - 1e-10
    assert sol.u_interior.max() <= g.max() + 1e-10


def test_solve_linearity(axis2_env):
    rng = np.random.default_rng(6)
    dom = discrete_ball(6, d=2)
    g1 = rng.normal(size=dom.num_boundary)
    g2 = rng.normal(size=dom.num_boundary)
    a, b = 1.7, -0.4
    ua = solve_dirichlet(axis2_env, dom, g1).u_interior
    ub = solve_dirichlet(axis2_env, dom, g2).u_interior
    uab = solve_dirichlet(axis2_env, dom, a * g1 + b * g2).u_interior
    assert np.max(np.abs(uab - (a * ua + b * ub))) <= 1e-9


def test_solve_monotonicity(axis2_env):
    rng = np.random.default_rng(7)
    dom = discrete_ball(6, d=2)
    g1 = rng.uniform(0, 1, size=dom.num_boundary)
    g2 = g1 + rng.uniform(0, 1, size=dom.num_boundary)
    u1 = solve_dirichlet(axis2_env, dom, g1).u_interior
    u2 = solve_dirichlet(axis2_env, dom, g2).u_interior
    assert np.all(u1 <= u2 + 1e-9)


def test_harmonic_measure_gambler(srw1):
    env = sample_environment(srw1, LatticeBox((-5,), (5,)), 0)
    dom = discrete_ball(2.5, d=1)
    hm = harmonic_measure(env, dom, [(0,)])
    assert np.allclose(hm.matrix, [[0.5, 0.5]])


def test_harmonic_measure_dihedral_symmetry(srw2_env):
    dom = discrete_ball(6, d=2)
    hm = harmonic_measure(srw2_env, dom, [(0, 0)])
    probs = {tuple(lbl): p for lbl, p in zip(hm.labels, hm.matrix[0])}
    for (x, y), p in probs.items():
        for sym in [(-x, y), (x, -y), (y, x), (-y, -x)]:
            assert probs[sym] == pytest.approx(p, abs=1e-10)


def test_harmonic_measure_rows_sum(axis2_env):
    dom = discrete_ball(6, d=2)
    srcs = dom.interior[:: max(1, len(dom.interior) // 7)]
    hm = harmonic_measure(axis2_env, dom, srcs)
    assert np.allclose(hm.row_sums(), 1.0, atol=1e-10)


def test_measure_duality(axis2_env):
    # solve(g) equals ExitDistribution . g
    rng = np.random.default_rng(8)
    dom = discrete_ball(6, d=2)
    g = rng.normal(size=dom.num_boundary)
    srcs = dom.interior
    hm = harmonic_measure(axis2_env, dom, srcs)
    direct = solve_dirichlet(axis2_env, dom, g).u_interior
    assert np.max(np.abs(hm.matrix @ g - direct)) <= 1e-9


# ---------------------------------------------------------------------------
# Exposed points and the rescaled generator.
# ---------------------------------------------------------------------------


def grid_exposed_oracle(h, Q, collar, betas):
    """Sufficient check: a dense grid of candidate touching slopes."""
    pts = np.vstack([Q, collar]).astype(float)
    hvals = np.array([h(tuple(int(c) for c in p)) for p in pts])
    out = np.zeros(len(Q), dtype=bool)
    for j, z in enumerate(Q):
        hz = h(tuple(int(c) for c in z))
        diff = pts - z.astype(float)
        for beta in betas:
            if np.all(hvals <= hz + diff @ beta + 1e-9):
                out[j] = True
                break
    return out


def test_exposed_linear_and_concave():
    Q = box_sites((-3, -3), (3, 3))
    lin = exposed_points(lambda s: 1.2 * s[0] - 0.7 * s[1], Q, k=2)
    assert lin.exposed.all()
    conc = exposed_points(lambda s: -(s[0] ** 2) - s[1] ** 2, Q, k=2)
    assert conc.exposed.all()
    # witnesses actually touch from above
    collar = widened_boundary(Q, 2)
    pts = np.vstack([Q, collar])
    for z, beta in conc.witnesses.items():
        hz = -(z[0] ** 2) - z[1] ** 2
        vals = -(pts[:, 0] ** 2) - pts[:, 1] ** 2
        assert np.all(vals <= hz + (pts - np.array(z)) @ beta + 1e-6)


def test_exposed_convex_matches_grid_oracle():
    h = lambda s: float(s[0] ** 2 + s[1] ** 2)
    Q = box_sites((-3, -3), (3, 3))
    collar = widened_boundary(Q, 2)
    ex = exposed_points(h, Q, k=2)
    grid = [
        np.array([bx, by])
        for bx in np.linspace(-12, 12, 25)
        for by in np.linspace(-12, 12, 25)
    ]
    oracle = grid_exposed_oracle(h, Q, collar, grid)
    # grid feasibility is sufficient, LP is exact: grid => LP
    assert np.all(ex.exposed >= oracle)
    # for the convex paraboloid no interior box point is exposed
    assert ex.count == 0 and not oracle.any()


def test_rescaled_generator_linear_zero(axis2_env):
    a = np.array([1.0, 2.0])
    h = lambda s: float(a @ np.asarray(s))
    g = rescaled_generator(axis2_env, h, (0, 0), k=6)
    assert abs(g) <= 1e-12


def test_rescaled_generator_d1(srw1):
    env = sample_environment(srw1, LatticeBox((-6,), (6,)), 0)
    h = lambda s: float(math.sin(s[0]))
    expected = h((0,)) - 0.5 * (h((1,)) + h((-1,)))
    assert rescaled_generator(env, h, (0,), k=3) == pytest.approx(expected)


def test_rescaled_generator_vs_mc(srw2_env):
    h = lambda s: float(s[0] ** 2 + s[1] ** 2)
    k = 5
    exact = rescaled_generator(srw2_env, h, (0, 0), k)
    # MC oracle: simulate the walk to min(T_1, k)
    rng = np.random.default_rng(42)
    n = 40_000
    total = 0.0
    sq = 0.0
    for _ in range(n):
        pos = np.zeros(2, dtype=np.int64)
        moved = [False, False]
        for t in range(k):
            w = srw2_env.weight_at(tuple(pos))
            axis, sign = _choose_moves(w[None, :], rng.random(1))
            pos[axis[0]] += sign[0]
            moved[axis[0]] = True
            if all(moved):
                break
        v = h(tuple(pos))
        total += v
        sq += v * v
    mean = total / n
    se = math.sqrt(max(sq / n - mean * mean, 0) / n)
    assert abs((h((0, 0)) - mean) - exact) <= 3 * se


def test_max_principle_linear(axis2_env):
    h = lambda s: float(1.5 * s[0] - 2.0 * s[1])
    Q = box_sites((-4, -4), (4, 4))
    chk = check_max_principle(axis2_env, h, Q, k=3, seed=0)
    assert chk.lhs <= 0 <= chk.rhs
    assert chk.holds


def test_max_principle_concave_quadratic(srw2_env):
    gamma = 0.3
    h = lambda s: float(-gamma * (s[0] ** 2 + s[1] ** 2))
    Q = box_sites((-5, -5), (5, 5))
    chk = check_max_principle(srw2_env, h, Q, k=4, seed=1)
    assert chk.holds
    assert chk.exposed_count == len(Q)  # concave: all points exposed
    # direct evaluation of both sides
    collar = widened_boundary(Q, 4)
    lhs = max(h(tuple(s)) for s in Q) - max(h(tuple(s)) for s in collar)
    assert chk.lhs == pytest.approx(lhs)


def test_max_principle_not_applicable_horizontal(horizontal_env):
    h = lambda s: float(s[0] ** 2 - s[1] ** 2)
    Q = box_sites((-3, -3), (3, 3))
    chk = check_max_principle(horizontal_env, h, Q, k=3, t1_samples=50, seed=2)
    assert not chk.applicable


def test_ball_radius_argument():
    with pytest.raises(ValueError):
        discrete_ball(0.5, d=2)


def test_three_dimensional_solve_and_ball():
    from rwre.env import LatticeBox, make_law, sample_environment

    law = make_law("axis-choice", d=3)
    env = sample_environment(law, LatticeBox.centered(8, 3), 0)
    dom = discrete_ball(6, d=3)
    a = np.array([1.0, -0.5, 0.25])
    sol = solve_dirichlet(env, dom, lambda s: float(a @ np.asarray(s)), tol=1e-12)
    assert np.max(np.abs(sol.u_interior - dom.interior @ a)) <= 1e-9


def test_interior_k_distances():
    dom = discrete_ball(6, d=2)
    inner = dom.interior_k(2)
    # every retained site is more than 2 away from every boundary site
    for s in inner:
        d = np.sqrt(((dom.boundary - s) ** 2).sum(axis=1)).min()
        assert d > 2
    assert 0 < len(inner) < dom.num_interior


def test_ball_with_collar():
    dom, collar = discrete_ball(3, d=2, k=2)
    ball = {tuple(s) for s in dom.all_sites()}
    for z in map(tuple, collar):
        assert z not in ball
        assert min(max(abs(z[0] - x), abs(z[1] - y)) for x, y in ball) <= 2


def test_rescaled_generator_box_escape():
    from rwre.env import LatticeBox, make_law, sample_environment
    from rwre.errors import BoxEscapeError

    env = sample_environment(make_law("srw", d=2), LatticeBox.centered(2, 2), 0)
    with pytest.raises(BoxEscapeError):
        rescaled_generator(env, lambda s: 0.0, (0, 0), k=5)


def test_iterative_solver_matches_direct(axis2_env):
    rng = np.random.default_rng(12)
    dom = discrete_ball(6, d=2)
    g = rng.normal(size=dom.num_boundary)
    direct = solve_dirichlet(axis2_env, dom, g, method="direct")
    iterative = solve_dirichlet(axis2_env, dom, g, method="iterative")
    assert np.max(np.abs(direct.u_interior - iterative.u_interior)) <= 1e-8
