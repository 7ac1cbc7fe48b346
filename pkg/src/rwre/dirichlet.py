"""Discrete domains, the operator L_w, Dirichlet solves and harmonic measure.

The discrete ball of radius R is the set of lattice sites with
||z - center||_2 <= R; its interior consists of the sites whose 2d
neighbors all stay inside, the rest form the boundary.  A function u is
w-harmonic when L_w u(x) = sum_e w(x,e)[u(x+e) - u(x)] vanishes on the
interior.  Solves assemble the sparse nonsymmetric system (I - P) u = b
and use a direct sparse LU with iterative refinement; degenerate rows
(sites with a single positive axis) are kept as-is, no regularization.

Also houses the upper-contact machinery for the ABP-type maximum
principle: per-site LP feasibility for the touching hyperplane, the
truncated rescaled generator h(z) - E^z[h(X at min(T_1, k))] via exact
dynamic programming, and the two-sided inequality check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog
from scipy.sparse.linalg import splu

from .errors import BoxEscapeError, DomainError, SolverError
from .walk import t1_statistics

_DIRECT_CAP = 20_000
LP_SLACK = 1e-9


@dataclass
class LatticeDomain:
    """Interior/boundary split of a finite site set, with O(1) index maps."""

    interior: np.ndarray  # (m, d) int
    boundary: np.ndarray  # (b, d) int
    grid_lo: np.ndarray
    role: np.ndarray  # dense grid: -1 outside, [0,m) interior, [m,m+b) boundary
    radius: float | None = None
    center: tuple | None = None

    @property
    def d(self):
        return self.interior.shape[1]

    @property
    def num_interior(self):
        return len(self.interior)

    @property
    def num_boundary(self):
        return len(self.boundary)

    def site_index(self, sites):
        """Combined index (interior first, then boundary); -1 if outside."""
        sites = np.atleast_2d(np.asarray(sites, dtype=np.int64))
        rel = sites - self.grid_lo
        inside = np.all((rel >= 0) & (rel < np.array(self.role.shape)), axis=1)
        out = np.full(len(sites), -1, dtype=np.int64)
        if inside.any():
            idx = tuple(rel[inside].T)
            out[inside] = self.role[idx]
        return out

    def contains(self, site):
        return self.site_index(np.asarray(site))[0] >= 0

    def all_sites(self):
        return np.vstack([self.interior, self.boundary])

    def interior_k(self, k):
        """I_k: interior sites at distance more than k from the boundary."""
        diffs = self.interior[:, None, :] - self.boundary[None, :, :]
        dist = np.sqrt((diffs.astype(np.float64) ** 2).sum(axis=2)).min(axis=1)
        return self.interior[dist > k]


def domain_from_sites(sites, radius=None, center=None):
    """Split a site set into interior (all neighbors inside) and boundary."""
    sites = np.unique(np.asarray(sites, dtype=np.int64), axis=0)
    d = sites.shape[1]
    lo = sites.min(axis=0) - 1
    hi = sites.max(axis=0) + 1
    shape = tuple(hi - lo + 1)
    mask = np.zeros(shape, dtype=bool)
    mask[tuple((sites - lo).T)] = True
    inner = mask.copy()
    for i in range(d):
        inner &= np.roll(mask, 1, axis=i) & np.roll(mask, -1, axis=i)
        # roll wraps, but the 1-site padding keeps wrapped cells False
    interior_mask = mask & inner
    interior = np.argwhere(interior_mask) + lo
    boundary = np.argwhere(mask & ~interior_mask) + lo
    role = np.full(shape, -1, dtype=np.int64)
    role[tuple((interior - lo).T)] = np.arange(len(interior))
    role[tuple((boundary - lo).T)] = len(interior) + np.arange(len(boundary))
    return LatticeDomain(
        interior=interior,
        boundary=boundary,
        grid_lo=lo,
        role=role,
        radius=radius,
        center=tuple(center) if center is not None else None,
    )


def discrete_ball(R, center=None, d=None, k=None):
    """Discrete ball domain: sites with ||z - center||_2 <= R.

    Returns a LatticeDomain; with k given, also the widened boundary
    (the l-infinity k-collar outside the ball) as a second value.
    """
    if R < 1:
        raise ValueError(f"radius must be >= 1, got {R}")
    if center is None:
        if d is None:
            raise ValueError("need center or d")
        center = (0,) * d
    center = tuple(int(c) for c in center)
    d = len(center)
    r = int(math.floor(R))
    axes = [np.arange(c - r, c + r + 1) for c in center]
    grid = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grid], axis=-1)
    rad2 = ((pts - np.array(center)) ** 2).sum(axis=1)
    sites = pts[rad2 <= R * R]
    dom = domain_from_sites(sites, radius=float(R), center=center)
    if k is None:
        return dom
    return dom, widened_boundary(dom.all_sites(), k)


def box_sites(lo, hi):
    """All sites of the box [lo, hi] (inclusive) as an (n, d) array."""
    axes = [np.arange(l, h + 1) for l, h in zip(lo, hi)]
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=-1)


def widened_boundary(Q, k):
    """The l-infinity collar: sites outside Q within distance k of it."""
    Q = np.asarray(Q, dtype=np.int64)
    d = Q.shape[1]
    offs = box_sites((-k,) * d, (k,) * d)
    fat = (Q[:, None, :] + offs[None, :, :]).reshape(-1, d)
    fat = np.unique(fat, axis=0)
    qset = set(map(tuple, Q))
    return np.array([s for s in fat if tuple(s) not in qset], dtype=np.int64)


def apply_generator(env, u, x):
    """L_w u(x) = sum_e w(x,e) [u(x+e) - u(x)] for a site function u."""
    x = tuple(int(c) for c in x)
    w = env.weight_at(x)
    d = env.d

    def value(site):
        if callable(u):
            return u(site)
        try:
            return u[site]
        except KeyError:
            raise DomainError(f"u has no value at {site}") from None

    ux = value(x)
    total = 0.0
    for i in range(d):
        for s in (1, -1):
            nbr = tuple(x[j] + (s if j == i else 0) for j in range(d))
            total += w[i] * (value(nbr) - ux)
    return total


def _boundary_values(domain, boundary_data):
    if callable(boundary_data):
        return np.asarray(
            [boundary_data(tuple(s)) for s in domain.boundary], dtype=np.float64
        )
    if isinstance(boundary_data, dict):
        try:
            return np.asarray(
                [boundary_data[tuple(s)] for s in domain.boundary], dtype=np.float64
            )
        except KeyError as e:
            raise DomainError(f"boundary data missing at {e.args[0]}") from None
    g = np.asarray(boundary_data, dtype=np.float64)
    if g.shape != (domain.num_boundary,):
        raise DomainError(
            f"boundary data has shape {g.shape}, expected ({domain.num_boundary},)"
        )
    return g


def assemble_system(env, domain):
    """Sparse (I - P_II) and interior-to-boundary coupling P_IB."""
    interior = domain.interior
    m, d = interior.shape
    if not np.all(env.box.contains_all(domain.all_sites())):
        raise DomainError("environment box does not cover the domain")
    w = env.weights_at(interior)
    rows = [np.arange(m)]
    cols = [np.arange(m)]
    vals = [np.ones(m)]
    rowsB, colsB, valsB = [], [], []
    for i in range(d):
        for s in (1, -1):
            nbr = interior.copy()
            nbr[:, i] += s
            idx = domain.site_index(nbr)
            if np.any(idx < 0):
                raise DomainError("interior site has a neighbor outside the domain")
            wi = w[:, i]
            nz = wi > 0
            to_int = nz & (idx < m)
            to_bnd = nz & (idx >= m)
            rows.append(np.arange(m)[to_int])
            cols.append(idx[to_int])
            vals.append(-wi[to_int])
            rowsB.append(np.arange(m)[to_bnd])
            colsB.append(idx[to_bnd] - m)
            valsB.append(wi[to_bnd])
    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(m, m),
    ).tocsc()
    B = sp.coo_matrix(
        (np.concatenate(valsB), (np.concatenate(rowsB), np.concatenate(colsB))),
        shape=(m, domain.num_boundary),
    ).tocsr()
    return A, B


class _Factorization:
    """LU of (I - P_II) with iterative refinement, reusable across RHS."""

    def __init__(self, env, domain):
        self.A, self.B = assemble_system(env, domain)
        try:
            self.lu = splu(self.A)
        except RuntimeError as e:
            raise SolverError(f"sparse LU failed: {e}") from None

    def solve(self, rhs, tol, max_refine=10):
        u = self.lu.solve(rhs)
        res = rhs - self.A @ u
        it = 0
        while np.max(np.abs(res)) > tol and it < max_refine:
            u = u + self.lu.solve(res)
            res = rhs - self.A @ u
            it += 1
        return u, float(np.max(np.abs(res))) if res.size else 0.0, it


@dataclass
class HarmonicSolution:
    """Values of a discrete-harmonic function on interior plus boundary."""

    domain: LatticeDomain
    u_interior: np.ndarray
    g_boundary: np.ndarray
    residual: float
    method: str
    iterations: int = 0

    def values_at(self, sites):
        idx = self.domain.site_index(sites)
        if np.any(idx < 0):
            raise DomainError("site outside the domain")
        combined = np.concatenate([self.u_interior, self.g_boundary])
        return combined[idx]

    def value(self, site):
        return float(self.values_at(np.asarray(site)[None, :])[0])

    def interior_range(self):
        return float(self.u_interior.min()), float(self.u_interior.max())


def solve_dirichlet(env, domain, boundary_data, tol=1e-10, method="auto"):
    """Solve L_w u = 0 on the interior with u = boundary_data on the boundary.

    Direct sparse LU with iterative refinement for systems up to
    20k unknowns (the default path at desk scale); "iterative" uses
    BiCGStab and falls back to the direct path when it stalls.  Raises
    SolverError with the achieved residual when tol cannot be met.
    """
    g = _boundary_values(domain, boundary_data)
    m = domain.num_interior
    if m == 0:
        return HarmonicSolution(domain, np.zeros(0), g, 0.0, "empty")
    if method == "auto":
        method = "direct" if m <= _DIRECT_CAP else "iterative"
    if method == "direct" and m > _DIRECT_CAP:
        raise SolverError(f"{m} unknowns exceed the direct-solve cap {_DIRECT_CAP}")

    fact = _Factorization(env, domain)
    rhs = fact.B @ g
    if method == "iterative":
        from scipy.sparse.linalg import bicgstab

        u, info = bicgstab(fact.A, rhs, rtol=1e-12, atol=tol / 10, maxiter=50 * m)
        res = float(np.max(np.abs(rhs - fact.A @ u)))
        if info != 0 or res > tol:
            if m <= _DIRECT_CAP:
                u, res, it = fact.solve(rhs, tol)
                if res > tol:
                    raise SolverError("direct fallback stalled", residual=res)
                return HarmonicSolution(domain, u, g, res, "direct-fallback", it)
            raise SolverError("iterative solver stalled", residual=res)
        return HarmonicSolution(domain, u, g, res, "iterative")
    u, res, it = fact.solve(rhs, tol)
    if res > tol:
        raise SolverError("refinement stalled above tol", residual=res)
    return HarmonicSolution(domain, u, g, res, "direct", it)


@dataclass
class ExitDistribution:
    """Row-stochastic exit laws: rows are sources, columns target groups."""

    matrix: np.ndarray
    sources: np.ndarray
    labels: list

    def row_sums(self):
        return self.matrix.sum(axis=1)

    def dump_csv(self, path):
        """Rows (source, target_label, probability)."""
        with open(path, "w", newline="") as f:
            f.write("source,target_label,probability\n")
            for i, src in enumerate(self.sources):
                s = " ".join(str(int(c)) for c in src)
                for j, lbl in enumerate(self.labels):
                    t = " ".join(str(int(c)) for c in lbl) if isinstance(lbl, tuple) else str(lbl)
                    f.write(f"{s},{t},{float(self.matrix[i, j])!r}\n")


def dump_solution_csv(sol, path):
    """Rows (site coords..., value) over interior then boundary, sorted."""
    rows = []
    for s, v in zip(sol.domain.interior, sol.u_interior):
        rows.append((tuple(int(c) for c in s), float(v)))
    for s, v in zip(sol.domain.boundary, sol.g_boundary):
        rows.append((tuple(int(c) for c in s), float(v)))
    rows.sort()
    d = sol.domain.d
    with open(path, "w", newline="") as f:
        f.write(",".join(f"x{i}" for i in range(d)) + ",value\n")
        for site, v in rows:
            f.write(",".join(str(c) for c in site) + f",{v!r}\n")


def harmonic_measure(env, domain, sources, targets="sites", tol=1e-10):
    """Quenched exit law from each source onto boundary sites or cells.

    targets: "sites" for one column per boundary site, or a list of
    groups, each an iterable of boundary sites (a partition cell).  One
    Dirichlet solve per column against a shared LU factorization.
    Rows sum to 1 within 1e-10.
    """
    sources = np.atleast_2d(np.asarray(sources, dtype=np.int64))
    src_idx = domain.site_index(sources)
    if np.any(src_idx < 0) or np.any(src_idx >= domain.num_interior):
        raise DomainError("sources must be interior sites of the domain")
    if isinstance(targets, str) and targets == "sites":
        groups = [[tuple(s)] for s in domain.boundary]
        labels = [tuple(s) for s in domain.boundary]
    else:
        groups = [list(map(tuple, grp)) for grp in targets]
        labels = list(range(len(groups)))
    m = domain.num_interior
    G = np.zeros((domain.num_boundary, len(groups)))
    bidx = {tuple(s): j for j, s in enumerate(domain.boundary)}
    for c, grp in enumerate(groups):
        for site in grp:
            if site not in bidx:
                raise DomainError(f"target site {site} is not a boundary site")
            G[bidx[site], c] = 1.0
    fact = _Factorization(env, domain)
    rhs = fact.B @ G
    U = fact.lu.solve(rhs)
    for _ in range(10):
        res = rhs - fact.A @ U
        if np.max(np.abs(res)) <= tol:
            break
        U = U + fact.lu.solve(res)
    mat = U[src_idx]
    sums = mat.sum(axis=1)
    # only a full partition of the boundary must sum to one
    covered = len({s for grp in groups for s in grp}) == domain.num_boundary
    if covered and np.max(np.abs(sums - 1.0)) > 1e-10:
        raise SolverError(
            "exit-law rows failed to normalize", residual=float(np.max(np.abs(sums - 1)))
        )
    return ExitDistribution(matrix=mat, sources=sources, labels=labels)


# ---------------------------------------------------------------------------
# Upper contact set and maximum-principle inequality.
# ---------------------------------------------------------------------------


@dataclass
class ExposedSet:
    """Per-site feasibility of a touching hyperplane from above."""

    sites: np.ndarray
    exposed: np.ndarray  # bool per site
    witnesses: dict  # site tuple -> beta
    slack: float = LP_SLACK

    @property
    def count(self):
        return int(self.exposed.sum())


def exposed_points(h, Q, k, slack=LP_SLACK, constraint_sites=None):
    """Sites z of Q where some beta has h(x) <= h(z) + <beta, x-z> on Q and its k-collar.

    Decided per site by LP feasibility in beta with constraint slack
    1e-9 (the exact touching condition is strict; floating point forces
    a tolerance).  Witness beta is recorded when feasible.
    """
    Q = np.asarray(Q, dtype=np.int64)
    d = Q.shape[1]
    if constraint_sites is None:
        collar = widened_boundary(Q, k)
        constraint_sites = np.vstack([Q, collar]) if len(collar) else Q
    X = np.asarray(constraint_sites, dtype=np.float64)
    hX = np.asarray([h(tuple(int(c) for c in x)) for x in constraint_sites])
    exposed = np.zeros(len(Q), dtype=bool)
    witnesses = {}
    c = np.zeros(d)
    for j, z in enumerate(Q):
        zf = z.astype(np.float64)
        hz = h(tuple(int(v) for v in z))
        A_ub = -(X - zf)
        b_ub = hz - hX + slack
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * d, method="highs")
        if res.status == 0:
            exposed[j] = True
            witnesses[tuple(int(v) for v in z)] = res.x
    return ExposedSet(sites=Q, exposed=exposed, witnesses=witnesses, slack=slack)


def rescaled_generator(env, h, z, k):
    """h(z) - E^z[h(X at min(T_1, k))], exact via (position, moved-set) DP.

    T_1 is the first time every coordinate has changed.  Exact
    enumeration over at most k steps; raises BoxEscapeError when the
    support would leave the environment box.
    """
    z = tuple(int(c) for c in z)
    d = env.d
    full_mask = (1 << d) - 1
    states = {(z, 0): 1.0}
    expect = 0.0
    for _ in range(k):
        nxt = {}
        for (site, mask), p in states.items():
            w = env.weight_at(site)
            for i in range(d):
                if w[i] <= 0:
                    continue
                for s in (1, -1):
                    nb = tuple(site[j] + (s if j == i else 0) for j in range(d))
                    if not env.box.contains(nb):
                        raise BoxEscapeError(f"DP support left the box at {nb}")
                    nm = mask | (1 << i)
                    q = p * w[i]
                    if nm == full_mask:
                        expect += q * h(nb)
                    else:
                        key = (nb, nm)
                        nxt[key] = nxt.get(key, 0.0) + q
        states = nxt
        if not states:
            break
    for (site, _), p in states.items():
        expect += p * h(site)
    return h(z) - expect


@dataclass
class MaxPrincipleCheck:
    """Both sides of the ABP-type inequality plus its empirical preconditions."""

    lhs: float
    rhs: float
    holds: bool
    applicable: bool
    N: int
    k: int
    kappa: float
    exposed_count: int
    conditions: dict = field(default_factory=dict)


def check_max_principle(
    env,
    h,
    Q,
    N=None,
    k=4,
    kappa=2.0,
    t1_samples=300,
    seed=0,
    slack=LP_SLACK,
):
    """Evaluate max_Q h - max_collar h against 6N (sum over exposed z of
    |h(z) - E^z[h(X at min(T_1,k))]|^d)^(1/d).

    `holds` compares the two sides; `applicable` reports whether the
    empirical analogues of the walk-regularity preconditions hold at
    every site of Q: P(T_1 > (log N)^kappa) < exp(-(log N)^2),
    E[T_1; T_1 > k] < exp(-(log N)^2) and P(T_1 > k) < exp(-(log N)^3).
    The exponent kappa is not pinned down by the source statement; it
    is a user parameter defaulting to 2 and flagged as a guess.
    """
    Q = np.asarray(Q, dtype=np.int64)
    d = env.d
    if N is None:
        N = int(np.max(Q.max(axis=0) - Q.min(axis=0)))
    collar = widened_boundary(Q, k)
    constraint_sites = np.vstack([Q, collar])
    ex = exposed_points(h, Q, k, slack=slack, constraint_sites=constraint_sites)
    gen = np.zeros(len(Q))
    for j, z in enumerate(Q):
        if ex.exposed[j]:
            gen[j] = rescaled_generator(env, h, tuple(z), k)
    lhs = max(h(tuple(s)) for s in Q) - max(h(tuple(s)) for s in collar)
    rhs = 6.0 * N * float(np.sum(ex.exposed * np.abs(gen) ** d) ** (1.0 / d))
    logN = math.log(N)
    thr_a = math.exp(-(logN**2))
    thr_c = math.exp(-(logN**3))
    horizon = max(int(math.ceil(logN**kappa)) + 1, k + 1, 8)
    stats = t1_statistics(env, Q, t1_samples, seed, horizon)
    p_logk = stats.prob_exceeds(logN**kappa)
    tail_mean = stats.truncated_mean_above(k)
    p_k = stats.prob_exceeds(k)
    conditions = {
        "p_t1_gt_logN_kappa": (float(p_logk.max()), thr_a, bool(np.all(p_logk < thr_a))),
        "e_t1_above_k": (float(tail_mean.max()), thr_a, bool(np.all(tail_mean < thr_a))),
        "p_t1_gt_k": (float(p_k.max()), thr_c, bool(np.all(p_k < thr_c))),
        "kappa_is_a_guess": kappa,
    }
    applicable = all(v[2] for key, v in conditions.items() if key != "kappa_is_a_guess")
    return MaxPrincipleCheck(
        lhs=float(lhs),
        rhs=float(rhs),
        holds=bool(lhs <= rhs),
        applicable=applicable,
        N=N,
        k=k,
        kappa=kappa,
        exposed_count=ex.count,
        conditions=conditions,
    )
