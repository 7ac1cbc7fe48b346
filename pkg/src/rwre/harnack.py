"""Empirical Harnack ratios, oscillation constants, and maximal coupling.

The Harnack ratio of an environment at scale R is the largest
sup/inf over the discrete R-ball of a nonnegative discrete-harmonic
function on the 2R-ball.  Point masses on boundary sites are the
extremal boundary data (every nonnegative datum is a positive
combination of them), so sweeping them measures the constant.  The
oscillation constant is the largest total-variation distance between
exit laws of two sources, which by maximal-coupling duality equals the
best achievable failure probability of coupling the two walks to exit
together.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .dirichlet import discrete_ball, harmonic_measure
from .errors import ZeroInfimumWarning
from .walk import Trajectory, _choose_moves


def classical_harnack_constant(d, rho):
    """Poisson-kernel bound ((1+rho)/(1-rho))^d for sup/inf over B_rho
    of positive harmonic functions on the unit ball."""
    if not 0 < rho < 1:
        raise ValueError("rho must be in (0, 1)")
    return ((1.0 + rho) / (1.0 - rho)) ** d


@dataclass
class HarnackMeasurement:
    R: float
    law_name: str
    seed: int
    ratio: float
    sup_value: float
    inf_value: float
    sup_site: tuple
    inf_site: tuple
    datum: tuple  # boundary site of the extremal point mass
    boundary_family: str
    classical_reference: float
    zero_infimum_count: int
    zero_infimum_frac: float
    data_swept: int


def harnack_ratio(env, R, boundary_family="point-masses", tol=1e-10, center=None):
    """Largest sup/inf over the R-ball across nonnegative harmonic data.

    Sweeps point masses over every boundary site of the 2R-ball (one
    solve per datum against a shared factorization).  Data whose
    infimum over the R-ball vanishes within tol are excluded from the
    ratio, counted, and reported through a ZeroInfimumWarning: in
    non-elliptic environments a boundary site can be unreachable from
    the inner ball.
    """
    d = env.d
    if center is None:
        center = (0,) * d
    dom = discrete_ball(2 * R, center=center)
    inner = discrete_ball(R, center=center)
    sources = inner.all_sites()
    if boundary_family == "point-masses":
        hm = harmonic_measure(env, dom, sources, targets="sites", tol=tol)
        M = hm.matrix  # (inner sites, boundary sites)
        labels = hm.labels
    else:
        # custom list of nonnegative boundary data (callables or arrays)
        from .dirichlet import solve_dirichlet

        cols = []
        for g in boundary_family:
            sol = solve_dirichlet(env, dom, g, tol=tol)
            vals = sol.values_at(sources)
            if np.any(vals < -tol):
                raise ValueError("boundary data must be nonnegative")
            cols.append(vals)
        M = np.stack(cols, axis=1)
        labels = list(range(M.shape[1]))
        boundary_family = f"custom[{M.shape[1]}]"
    sup = M.max(axis=0)
    inf = M.min(axis=0)
    degenerate = inf <= tol
    n_zero = int(degenerate.sum())
    if n_zero:
        warnings.warn(
            f"{n_zero}/{M.shape[1]} point masses have zero infimum on the R-ball",
            ZeroInfimumWarning,
            stacklevel=2,
        )
    usable = ~degenerate
    if not usable.any():
        raise ValueError("every point mass vanishes on the inner ball")
    ratios = np.where(usable, sup / np.maximum(inf, 1e-300), -np.inf)
    j = int(np.argmax(ratios))
    i_sup = int(np.argmax(M[:, j]))
    i_inf = int(np.argmin(M[:, j]))
    return HarnackMeasurement(
        R=float(R),
        law_name=env.law_name,
        seed=env.seed,
        ratio=float(ratios[j]),
        sup_value=float(M[i_sup, j]),
        inf_value=float(M[i_inf, j]),
        sup_site=tuple(int(v) for v in sources[i_sup]),
        inf_site=tuple(int(v) for v in sources[i_inf]),
        datum=labels[j],
        boundary_family=str(boundary_family),
        classical_reference=classical_harnack_constant(d, 0.5),
        zero_infimum_count=n_zero,
        zero_infimum_frac=n_zero / M.shape[1],
        data_swept=M.shape[1],
    )


@dataclass
class OscillationMeasurement:
    R: float
    psi: float
    upsilon: float
    argmax_pair: tuple
    law_name: str
    seed: int
    n_sources: int
    subsampled: bool
    exit_matrix: np.ndarray | None = None
    sources: np.ndarray | None = None


def oscillation_constant(env, R, psi=2.0, sources=None, tol=1e-10, center=None):
    """v_hat: max over source pairs in the R-ball of the TV distance
    between their exit laws from the psi*R-ball.

    Equals the worst-case ratio osc_{B_R} f / osc_{B_psi*R} f over
    harmonic f (maximal-coupling duality), computed from exact solved
    measures rather than simulated couplings.
    """
    d = env.d
    if center is None:
        center = (0,) * d
    dom = discrete_ball(psi * R, center=center)
    subsampled = sources is not None
    if sources is None:
        sources = discrete_ball(R, center=center).all_sites()
    sources = np.atleast_2d(np.asarray(sources, dtype=np.int64))
    hm = harmonic_measure(env, dom, sources, targets="sites", tol=tol)
    M = hm.matrix
    tv = 0.5 * cdist(M, M, metric="cityblock")
    i, j = np.unravel_index(np.argmax(tv), tv.shape)
    return OscillationMeasurement(
        R=float(R),
        psi=float(psi),
        upsilon=float(tv[i, j]),
        argmax_pair=(
            tuple(int(v) for v in sources[i]),
            tuple(int(v) for v in sources[j]),
        ),
        law_name=env.law_name,
        seed=env.seed,
        n_sources=len(sources),
        subsampled=subsampled,
        exit_matrix=M,
        sources=sources,
    )


# ---------------------------------------------------------------------------
# Basic maximal coupling of two quenched walks.
# ---------------------------------------------------------------------------


@dataclass
class CoupledRun:
    traj_y: Trajectory
    traj_z: Trajectory
    exit_y: tuple
    exit_z: tuple
    label_y: int
    label_z: int
    success: bool


@dataclass
class BasicCouplingResult:
    success_frequency: float
    tv: float
    replicates: int
    labels_y: np.ndarray
    labels_z: np.ndarray
    n_labels: int
    runs: list = field(default_factory=list)

    def marginal_counts(self, which="y"):
        lab = self.labels_y if which == "y" else self.labels_z
        return np.bincount(lab, minlength=self.n_labels)


def _maximal_coupling_sample(p, q, replicates, rng):
    """Sample label pairs whose joint law is the maximal coupling of p, q."""
    m = np.minimum(p, q)
    w = m.sum()
    same = rng.random(replicates) < w
    ly = np.empty(replicates, dtype=np.int64)
    lz = np.empty(replicates, dtype=np.int64)
    n_same = int(same.sum())
    if n_same and w > 0:
        ly[same] = lz[same] = rng.choice(len(p), size=n_same, p=m / w)
    n_diff = replicates - n_same
    if n_diff:
        rp = np.maximum(p - m, 0)
        rq = np.maximum(q - m, 0)
        ly[~same] = rng.choice(len(p), size=n_diff, p=rp / rp.sum())
        lz[~same] = rng.choice(len(q), size=n_diff, p=rq / rq.sum())
    return ly, lz, same


def basic_coupling(
    env,
    center,
    R,
    y,
    z,
    partition=None,
    M=8,
    seed=0,
    replicates=10_000,
    trajectory_samples=0,
    tol=1e-10,
):
    """Couple walks from y and z to exit the M*R-ball together.

    The expansion factor defaults to M = 8 with partitions meshed at
    1/M^2; pass M = Psi to cross-check an oscillation measurement.

    Exit distributions are computed exactly by harmonic measure; the
    joint label law is their maximal (shared-mass) coupling, so the
    success frequency estimates 1 - TV.  With a partition, cells of
    the sphere scaled to the M*R boundary are coupled and exit sites
    are then drawn from each conditional marginal; without one, exit
    sites themselves are coupled.  trajectory_samples full coupled
    walks are realized by h-transform (each marginal is an exact
    quenched walk conditioned on its exit site).
    """
    center = tuple(int(c) for c in center)
    dom = discrete_ball(M * R, center=center)
    y = tuple(int(c) for c in y)
    z = tuple(int(c) for c in z)
    hm = harmonic_measure(env, dom, [y, z], targets="sites", tol=tol)
    psite, qsite = hm.matrix[0], hm.matrix[1]
    if partition is None:
        group_idx = [[i] for i in range(dom.num_boundary)]
    else:
        ctr = np.asarray(center, dtype=np.float64)
        dirs = dom.boundary - ctr
        dirs = dirs / np.linalg.norm(dirs, axis=1)[:, None]
        cells = partition.cell_of(dirs)
        group_idx = [
            list(np.nonzero(cells == c)[0])
            for c in range(partition.num_cells)
            if np.any(cells == c)
        ]
    p = np.array([psite[g].sum() for g in group_idx])
    q = np.array([qsite[g].sum() for g in group_idx])
    tv = 0.5 * float(np.abs(p - q).sum())
    rng = np.random.default_rng(seed)
    ly, lz, same = _maximal_coupling_sample(p, q, replicates, rng)
    runs = []
    if trajectory_samples:
        full = harmonic_measure(env, dom, dom.interior, targets="sites", tol=tol)

        def draw_site(marg, label):
            g = group_idx[label]
            wts = marg[g]
            if wts.sum() <= 0 or len(g) == 1:
                return g[0]
            return g[int(rng.choice(len(g), p=wts / wts.sum()))]

        for t in range(min(trajectory_samples, replicates)):
            by = draw_site(psite, ly[t])
            bz = by if (same[t] and partition is None) else draw_site(qsite, lz[t])
            ty = _h_transform_walk(env, dom, full.matrix[:, by], by, y, rng)
            tz = _h_transform_walk(env, dom, full.matrix[:, bz], bz, z, rng)
            runs.append(
                CoupledRun(
                    traj_y=ty,
                    traj_z=tz,
                    exit_y=tuple(int(v) for v in dom.boundary[by]),
                    exit_z=tuple(int(v) for v in dom.boundary[bz]),
                    label_y=int(ly[t]),
                    label_z=int(lz[t]),
                    success=bool(same[t]),
                )
            )
    return BasicCouplingResult(
        success_frequency=float(same.mean()),
        tv=tv,
        replicates=replicates,
        labels_y=ly,
        labels_z=lz,
        n_labels=len(group_idx),
        runs=runs,
    )


def walk_exit_labels(env, dom, start, group_idx, samples, seed):
    """Direct simulation: exit-group frequencies of quenched walks from start.

    Independent cross-check for the coupling marginals; steps batches
    of walkers until each leaves the interior.
    """
    rng = np.random.default_rng(seed)
    pos = np.tile(np.asarray(start, dtype=np.int64), (samples, 1))
    alive = np.ones(samples, dtype=bool)
    exit_idx = np.full(samples, -1, dtype=np.int64)
    rows = np.arange(samples)
    guard = 0
    while alive.any():
        idx = rows[alive]
        w = env.weights_at(pos[idx])
        axis, sign = _choose_moves(w, rng.random(len(idx)))
        pos[idx, axis] += sign
        role = dom.site_index(pos[idx])
        out = role >= dom.num_interior
        done = idx[out]
        exit_idx[done] = role[out] - dom.num_interior
        alive[done] = False
        guard += 1
        if guard > 10_000_000:
            raise RuntimeError("exit simulation did not terminate")
    site_to_group = {}
    for gl, g in enumerate(group_idx):
        for s in g:
            site_to_group[s] = gl
    labels = np.array([site_to_group[i] for i in exit_idx])
    counts = np.bincount(labels, minlength=len(group_idx))
    return counts / samples


def _h_transform_walk(env, dom, h_int, exit_idx, start, rng):
    """Quenched walk conditioned to exit at one boundary site (Doob h)."""
    exit_site = tuple(int(v) for v in dom.boundary[exit_idx])

    def h_of(site):
        k = dom.site_index(np.asarray(site)[None, :])[0]
        if k < 0:
            return 0.0
        if k < dom.num_interior:
            return h_int[k]
        return 1.0 if tuple(site) == exit_site else 0.0

    pos = np.array(start, dtype=np.int64)
    steps = []
    d = env.d
    guard = 0
    while dom.site_index(pos[None, :])[0] < dom.num_interior:
        w = env.weight_at(tuple(pos))
        moves = []
        probs = []
        for i in range(d):
            if w[i] <= 0:
                continue
            for s in (1, -1):
                nb = pos.copy()
                nb[i] += s
                hv = h_of(nb)
                if hv > 0:
                    moves.append((i, s))
                    probs.append(w[i] * hv)
        probs = np.array(probs)
        k = int(rng.choice(len(moves), p=probs / probs.sum()))
        i, s = moves[k]
        pos[i] += s
        steps.append(s * (i + 1))
        guard += 1
        if guard > 10_000_000:
            raise RuntimeError("conditioned walk did not terminate")
    return Trajectory(start=tuple(start), steps=np.array(steps, dtype=np.int8))
