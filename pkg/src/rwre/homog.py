"""Homogenization reference functions and the continuum exit law.

The quenched Dirichlet solution on a large discrete ball is compared to
a polynomial F satisfying sum_ij Sigma_ij d_ij F = 0 (the continuum
side is then exact, so the measured error is attributable entirely to
the discrete side), and quenched exit laws are compared to those of a
Brownian motion with diagonal covariance Sigma, simulated by
walk-on-spheres in isotropized coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement, permutations

import numpy as np

from .dirichlet import discrete_ball, harmonic_measure, solve_dirichlet
from .errors import NotSigmaHarmonicError, WosTimeoutError

TRACE_TOL = 1e-12


@dataclass(frozen=True)
class SigmaHarmonicFunction:
    """Polynomial of degree <= 3 in d variables with vanishing Sigma-trace.

    coeffs maps exponent multi-indices (tuples of length d) to
    coefficients.  delta2/delta3 bound the second/third partials over
    the closed unit ball.
    """

    d: int
    coeffs: dict
    sigma: np.ndarray
    kind: str = "custom"

    def __call__(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        out = np.zeros(len(pts))
        for mono, c in self.coeffs.items():
            term = np.full(len(pts), c)
            for i, k in enumerate(mono):
                if k:
                    term = term * pts[:, i] ** k
            out += term
        return out if np.ndim(points) > 1 else float(out[0])

    def partial(self, axes):
        """Coefficients of the partial derivative along the given axes."""
        out = dict(self.coeffs)
        for ax in axes:
            new = {}
            for mono, c in out.items():
                if mono[ax] == 0:
                    continue
                m = list(mono)
                m[ax] -= 1
                new[tuple(m)] = new.get(tuple(m), 0.0) + c * mono[ax]
            out = new
        return out

    @property
    def delta2(self):
        return self._derivative_bound(2)

    @property
    def delta3(self):
        return self._derivative_bound(3)

    def _derivative_bound(self, order):
        """Sup over the unit ball of |partials| of the given order.

        Degree <= 3 makes these partials affine: sup of |a + <b, x>|
        over the ball is |a| + ||b||_2.
        """
        best = 0.0
        for axes in combinations_with_replacement(range(self.d), order):
            p = self.partial(axes)
            a = p.get((0,) * self.d, 0.0)
            b = np.zeros(self.d)
            for mono, c in p.items():
                if sum(mono) == 1:
                    b[mono.index(1)] = c
                elif sum(mono) > 1:
                    raise AssertionError("degree > 3 polynomial")
            best = max(best, abs(a) + float(np.linalg.norm(b)))
        return best

    def sigma_trace(self):
        """Coefficients of sum_i Sigma_ii d_ii F (should be identically 0)."""
        total = {}
        for i in range(self.d):
            p = self.partial((i, i))
            for mono, c in p.items():
                total[mono] = total.get(mono, 0.0) + self.sigma[i] * c
        return total


def sigma_harmonic_polynomial(sigma, kind="quad", axes=(0, 1), a=None, coeffs=None):
    """Build a polynomial annihilated by sum_i Sigma_ii d_ii.

    kind "linear": F = <a, x> (any a; second and third partials vanish).
    kind "quad": F = x_i^2 / Sigma_ii - x_j^2 / Sigma_jj for (i, j) = axes.
    kind "custom": explicit coeffs, checked against the trace identity.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    d = len(sigma)
    if np.any(sigma <= 0):
        raise ValueError("Sigma must be diagonal positive")
    if kind == "linear":
        if a is None:
            raise ValueError("linear kind needs the coefficient vector a")
        cs = {}
        for i, ai in enumerate(np.asarray(a, dtype=np.float64)):
            mono = tuple(1 if j == i else 0 for j in range(d))
            cs[mono] = float(ai)
        return SigmaHarmonicFunction(d=d, coeffs=cs, sigma=sigma, kind="linear")
    if kind == "quad":
        i, j = axes
        if i == j:
            raise ValueError("quad kind needs two distinct axes")
        mi = tuple(2 if k == i else 0 for k in range(d))
        mj = tuple(2 if k == j else 0 for k in range(d))
        cs = {mi: 1.0 / sigma[i], mj: -1.0 / sigma[j]}
        return SigmaHarmonicFunction(d=d, coeffs=cs, sigma=sigma, kind="quad")
    if kind == "custom":
        if coeffs is None:
            raise ValueError("custom kind needs coeffs")
        cs = {tuple(m): float(c) for m, c in coeffs.items()}
        if any(sum(m) > 3 for m in cs):
            raise ValueError("only degree <= 3 polynomials are supported")
        f = SigmaHarmonicFunction(d=d, coeffs=cs, sigma=sigma, kind="custom")
        tr = f.sigma_trace()
        worst = max((abs(c) for c in tr.values()), default=0.0)
        if worst > TRACE_TOL:
            raise NotSigmaHarmonicError(f"Sigma-trace residual coefficient {worst}")
        return f
    raise ValueError(f"unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# Sphere partitions and caps.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpherePartition:
    """Covering of the unit sphere by closed cells of diameter <= mesh.

    d = 1: the two points {+1}, {-1}.  d = 2: arcs of equal angle.
    Points on a shared cell boundary go to the lowest-index cell.
    """

    d: int
    mesh: float
    k: int

    @staticmethod
    def with_mesh(d, mesh):
        if d == 1:
            return SpherePartition(d=1, mesh=2.0, k=2)
        if d == 2:
            k = max(3, int(math.ceil(math.pi / math.asin(min(mesh, 2.0) / 2.0))))
            return SpherePartition(d=2, mesh=mesh, k=k)
        raise ValueError("partitions implemented for d in {1, 2}")

    @property
    def num_cells(self):
        return self.k

    def cell_of(self, vectors):
        """Cell index per unit vector; ties broken toward the lower index."""
        v = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
        if self.d == 1:
            return np.where(v[:, 0] > 0, 0, 1)
        theta = np.mod(np.arctan2(v[:, 1], v[:, 0]), 2 * math.pi)
        t = theta * self.k / (2 * math.pi)
        j = np.floor(t).astype(np.int64)
        exact = (t == j) & (j >= 1)
        j = np.where(exact, j - 1, j)
        return np.clip(j, 0, self.k - 1)

    def cell_diameter(self):
        if self.d == 1:
            return 0.0
        return 2 * math.sin(math.pi / self.k)


@dataclass(frozen=True)
class HemisphereCap:
    """Open half-sphere {v : <v, direction> > 0}."""

    direction: tuple

    def contains(self, vectors):
        v = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
        return v @ np.asarray(self.direction, dtype=np.float64) > 0


@dataclass(frozen=True)
class CapPartition:
    """Two-cell view of a single target set: cell 0 inside, cell 1 out."""

    cap: object

    @property
    def num_cells(self):
        return 2

    def cell_of(self, vectors):
        return np.where(self.cap.contains(vectors), 0, 1)


@dataclass(frozen=True)
class ArcCap:
    """Open arc on the circle: angles within half_width of center_angle."""

    center_angle: float
    half_width: float

    def contains(self, vectors):
        v = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
        theta = np.arctan2(v[:, 1], v[:, 0])
        diff = np.mod(theta - self.center_angle + math.pi, 2 * math.pi) - math.pi
        return np.abs(diff) < self.half_width


# ---------------------------------------------------------------------------
# Walk-on-spheres exit law for Brownian motion with diagonal covariance.
# ---------------------------------------------------------------------------


def _wos_exit_points(sigma, start, shell_eps, samples, seed, step_cap):
    """Exit points on the unit sphere for Sigma-BM from start, via WoS.

    Transform y = Sigma^{-1/2} x maps the BM to a standard one on the
    ellipsoid ||Sigma^{1/2} y|| <= 1; inscribed-sphere radii have the
    closed-form lower bound (1 - ||x||)/sqrt(max Sigma), which keeps
    every jump inside the domain and the sampling exact.  Terminates in
    the shell 1 - ||x|| <= shell_eps and projects to the sphere.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    d = len(sigma)
    s = np.sqrt(sigma)
    smax = float(s.max())
    rng = np.random.default_rng(seed)
    y = np.tile(np.asarray(start, dtype=np.float64) / s, (samples, 1))
    out = np.empty((samples, d))
    alive = np.ones(samples, dtype=bool)
    for _ in range(step_cap):
        x = y * s
        norm = np.linalg.norm(x, axis=1)
        finished = alive & (1.0 - norm <= shell_eps)
        if finished.any():
            out[finished] = x[finished] / norm[finished, None]
            alive &= ~finished
        if not alive.any():
            return out
        idx = np.nonzero(alive)[0]
        r = (1.0 - norm[idx]) / smax
        g = rng.standard_normal((len(idx), d))
        g /= np.linalg.norm(g, axis=1)[:, None]
        y[idx] += r[:, None] * g
    raise WosTimeoutError(f"{int(alive.sum())} walkers never reached the shell")


def bm_exit_probability(
    sigma, target, start, shell_eps=1e-4, samples=20_000, seed=0, step_cap=100_000
):
    """P(Sigma-BM from start exits the unit ball through the target set).

    target: a cap (object with .contains on unit vectors) or a
    (partition, cell_index) pair.  Returns (probability, stderr).
    d = 1 is handled in closed form.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    start = np.asarray(start, dtype=np.float64)
    if np.linalg.norm(start) >= 1.0:
        raise ValueError("start must lie strictly inside the unit ball")
    if len(sigma) == 1:
        p_right = (1.0 + float(start[0])) / 2.0
        if isinstance(target, tuple):
            part, cell = target
            p = p_right if cell == 0 else 1.0 - p_right
        else:
            inside = target.contains(np.array([[1.0], [-1.0]]))
            p = p_right * inside[0] + (1 - p_right) * inside[1]
        return float(p), 0.0
    pts = _wos_exit_points(sigma, start, shell_eps, samples, seed, step_cap)
    if isinstance(target, tuple):
        part, cell = target
        hits = part.cell_of(pts) == cell
    else:
        hits = target.contains(pts)
    p = float(np.mean(hits))
    return p, math.sqrt(max(p * (1 - p), 1e-300) / samples)


def bm_exit_distribution(
    sigma, partition, start, shell_eps=1e-4, samples=20_000, seed=0, step_cap=100_000
):
    """Exit-cell distribution of the Sigma-BM over a whole partition."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if len(sigma) == 1:
        p_right = (1.0 + float(start[0])) / 2.0
        cells = partition.cell_of(np.array([[1.0], [-1.0]]))
        probs = np.zeros(partition.num_cells)
        probs[cells[0]] += p_right
        probs[cells[1]] += 1.0 - p_right
        return probs, np.zeros(partition.num_cells)
    pts = _wos_exit_points(sigma, start, shell_eps, samples, seed, step_cap)
    cells = partition.cell_of(pts)
    probs = np.bincount(cells, minlength=partition.num_cells) / samples
    se = np.sqrt(np.maximum(probs * (1 - probs), 1e-300) / samples)
    return probs, se


# ---------------------------------------------------------------------------
# Experiments.
# ---------------------------------------------------------------------------


def symmetry_exact_sigma(law):
    """Sigma = I/d when the law's axes are exchangeable, else None.

    The trace is always 1 (balance), and full axis exchangeability
    forces equal diagonal entries.
    """
    mats = law.atom_matrix()
    qs = law.atom_probs()
    atom_set = {(tuple(np.round(p, 15)), round(float(q), 15)) for p, q in zip(mats, qs)}
    for perm in _axis_permutations(law.d):
        permuted = {
            (tuple(np.round(p[list(perm)], 15)), round(float(q), 15))
            for p, q in zip(mats, qs)
        }
        if permuted != atom_set:
            return None
    return np.full(law.d, 1.0 / law.d)


def _axis_permutations(d):
    return list(permutations(range(d)))[1:]


@dataclass
class HomogenizationResult:
    R: float
    law_name: str
    seed: int
    error: float
    residual: float
    sigma: np.ndarray
    f_kind: str
    interior_sites: int = 0


def homogenization_error(env, F, R, tol=1e-10, center=None):
    """max over the ball interior of |F(x/R) - G(x)| for the quenched
    solution G with boundary data F(x/R)."""
    d = env.d
    if center is None:
        center = (0,) * d
    dom = discrete_ball(R, center=center)
    ctr = np.asarray(center, dtype=np.float64)

    def g(site):
        return F((np.asarray(site, dtype=np.float64) - ctr) / R)

    sol = solve_dirichlet(env, dom, g, tol=tol)
    fr = F((dom.interior - ctr) / R)
    err = float(np.max(np.abs(fr - sol.u_interior))) if dom.num_interior else 0.0
    return HomogenizationResult(
        R=float(R),
        law_name=env.law_name,
        seed=env.seed,
        error=err,
        residual=sol.residual,
        sigma=np.asarray(F.sigma),
        f_kind=F.kind,
        interior_sites=dom.num_interior,
    )


@dataclass
class ExitLawResult:
    R: float
    r: float
    max_discrepancy: float
    argmax_source: tuple
    table: list  # (cell, quenched, continuum, stderr, abs_diff) at argmax source
    quenched_row_sums: np.ndarray
    cells: int


def exit_law_discrepancy(
    env,
    R,
    r=0.0,
    targets=None,
    sigma=None,
    wos_eps=1e-4,
    wos_samples=20_000,
    seed=0,
    center=None,
):
    """Quenched vs continuum exit law through scaled sphere cells.

    Boundary sites x of the discrete R-ball are bucketed by x/|x|_2
    into the partition's cells; the quenched side is one harmonic
    measure per source in the discrete rR-ball, the continuum side is
    the Sigma-BM cell law from source/R.  Returns the max per-cell
    absolute difference over sources and the per-cell table at the
    worst source.
    """
    d = env.d
    if center is None:
        center = (0,) * d
    if targets is None:
        targets = SpherePartition.with_mesh(d, 0.5)
    elif hasattr(targets, "contains"):
        # a single target set: compare it and its complement
        targets = CapPartition(targets)
    if sigma is None:
        raise ValueError("pass sigma explicitly (e.g. symmetry_exact_sigma(law))")
    dom = discrete_ball(R, center=center)
    ctr = np.asarray(center, dtype=np.float64)
    dirs = dom.boundary - ctr
    dirs = dirs / np.linalg.norm(dirs, axis=1)[:, None]
    cells = targets.cell_of(dirs)
    groups = [
        [tuple(s) for s in dom.boundary[cells == c]] for c in range(targets.num_cells)
    ]
    nonempty = [i for i, g in enumerate(groups) if g]
    if r <= 0:
        sources = np.array([center], dtype=np.int64)
    else:
        inner = discrete_ball(max(1.0, r * R), center=center)
        sources = inner.all_sites()
    hm = harmonic_measure(env, dom, sources, targets=[groups[i] for i in nonempty])
    quenched = np.zeros((len(sources), targets.num_cells))
    quenched[:, nonempty] = hm.matrix
    worst = -1.0
    argmax = 0
    best_table = None
    best_cont = None
    for i, src in enumerate(sources):
        cont, se = bm_exit_distribution(
            sigma,
            targets,
            (np.asarray(src, dtype=np.float64) - ctr) / R,
            shell_eps=wos_eps,
            samples=wos_samples,
            seed=seed + 31 * i,
        )
        diff = np.abs(quenched[i] - cont)
        m = float(diff.max())
        if m > worst:
            worst = m
            argmax = i
            best_cont = (cont, se)
            best_table = diff
    cont, se = best_cont
    table = [
        (c, float(quenched[argmax, c]), float(cont[c]), float(se[c]), float(best_table[c]))
        for c in range(targets.num_cells)
    ]
    return ExitLawResult(
        R=float(R),
        r=float(r),
        max_discrepancy=worst,
        argmax_source=tuple(int(v) for v in sources[argmax]),
        table=table,
        quenched_row_sums=quenched.sum(axis=1),
        cells=targets.num_cells,
    )
