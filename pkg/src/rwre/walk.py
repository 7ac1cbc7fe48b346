"""Quenched walk simulation and small-horizon exact distributions.

Covers trajectory sampling under the site weights, the rescaled-walk
stopping times T_k (T_{k+1} is the first time after T_k by which every
coordinate has moved), exact n-step laws by dynamic programming,
covariance estimates Q_hat(x, n), the diffusion matrix estimate
Sigma_hat from the environment seen from the particle, and censored
T_1 statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .env import Environment, LatticeBox
from .errors import BoxEscapeError

DEFAULT_MAX_STEPS = 10_000_000


@dataclass
class Trajectory:
    """A nearest-neighbor path: start site plus signed axis moves.

    steps[n] encodes the (n+1)-th move as sign * (axis + 1); positions
    and the coordinate-change sequence are derived.  timed_out marks a
    walk stopped by max_steps rather than its stop rule.
    """

    start: tuple
    steps: np.ndarray  # int8, values in {±1, ..., ±d}
    timed_out: bool = False

    def __len__(self):
        return len(self.steps)

    def axes(self):
        """0-based axis index changed at each step."""
        return np.abs(self.steps).astype(np.int64) - 1

    def signs(self):
        return np.sign(self.steps).astype(np.int64)

    def positions(self):
        """All visited sites, shape (len+1, d)."""
        d = len(self.start)
        out = np.zeros((len(self.steps) + 1, d), dtype=np.int64)
        out[0] = self.start
        if len(self.steps):
            moves = np.zeros((len(self.steps), d), dtype=np.int64)
            moves[np.arange(len(self.steps)), self.axes()] = self.signs()
            out[1:] = self.start + np.cumsum(moves, axis=0)
        return out

    @property
    def end(self):
        return tuple(self.positions()[-1])


def _choose_moves(weights, u):
    """Vectorized move choice: weights (n, d), u (n,) -> (axis, sign)."""
    probs = np.repeat(weights, 2, axis=1)
    cum = np.cumsum(probs, axis=1)
    cum[:, -1] = 1.0
    choice = (u[:, None] < cum).argmax(axis=1)
    return choice >> 1, 1 - 2 * (choice & 1)


def run_walk(env, start, stop, rng_seed, max_steps=DEFAULT_MAX_STEPS):
    """Simulate one quenched walk.

    stop is ("steps", n) or ("exit", domain) where domain is any
    container of site tuples; an exit walk ends at its first site
    outside the domain.  Raises BoxEscapeError if the walk needs a site
    outside the environment box before the stop rule fires; a walk cut
    off at max_steps is returned with timed_out=True, never silently.
    """
    start = tuple(int(c) for c in start)
    if not env.box.contains(start):
        raise BoxEscapeError(f"start {start} outside environment box")
    kind, arg = stop
    if kind == "steps":
        budget = int(arg)
        domain = None
    elif kind == "exit":
        budget = max_steps
        domain = arg
        if start not in domain:
            return Trajectory(start=start, steps=np.zeros(0, dtype=np.int8))
    else:
        raise ValueError(f"unknown stop rule {kind!r}")
    rng = np.random.default_rng(rng_seed)
    pos = np.array(start, dtype=np.int64)
    steps = []
    timed_out = False
    n = 0
    while True:
        if kind == "steps" and n >= budget:
            break
        if n >= max_steps:
            timed_out = True
            break
        w = env.weight_at(tuple(pos))
        axis, sign = _choose_moves(w[None, :], rng.random(1))
        pos[axis[0]] += sign[0]
        if not env.box.contains(tuple(pos)):
            raise BoxEscapeError(
                f"walk reached box edge at {tuple(pos)} before its stop rule"
            )
        steps.append(int(sign[0]) * (int(axis[0]) + 1))
        n += 1
        if domain is not None and tuple(pos) not in domain:
            break
    return Trajectory(start=start, steps=np.array(steps, dtype=np.int8), timed_out=timed_out)


@dataclass
class RescaledTimes:
    """Stopping times of the rescaled walk: strictly increasing, T_0 = 0.

    Between consecutive times every coordinate changes at least once.
    completed is False when the trajectory ended mid-block.
    """

    times: list
    completed: bool


def rescaled_times(traj, d=None):
    """Extract T_0 < T_1 < ... from a trajectory."""
    if d is None:
        d = len(traj.start)
    times = [0]
    seen = set()
    axes = traj.axes()
    for t, a in enumerate(axes, start=1):
        seen.add(int(a))
        if len(seen) == d:
            times.append(t)
            seen.clear()
    return RescaledTimes(times=times, completed=len(seen) == 0)


def exact_walk_distribution(env, start, n):
    """Exact law of X_n started at `start`: dict site -> probability.

    Dynamic programming over the l1 ball of radius n (clipped to the
    environment box); any probability mass that would leave the box
    raises BoxEscapeError.  Masses sum to 1 within 1e-12.
    """
    start = tuple(int(c) for c in start)
    d = env.d
    if not env.box.contains(start):
        raise BoxEscapeError(f"start {start} outside environment box")
    lo = tuple(max(start[i] - n, env.box.lo[i]) for i in range(d))
    hi = tuple(min(start[i] + n, env.box.hi[i]) for i in range(d))
    shape = tuple(h - l + 1 for l, h in zip(lo, hi))
    sl = tuple(
        slice(l - env.box.lo[i], h - env.box.lo[i] + 1)
        for i, (l, h) in enumerate(zip(lo, hi))
    )
    W = env.weights[sl]
    cur = np.zeros(shape)
    cur[tuple(s - l for s, l in zip(start, lo))] = 1.0
    full = (slice(None),) * d

    def shifted(i, offset):
        s = list(full)
        s[i] = slice(1, None) if offset == 1 else slice(0, -1)
        return tuple(s)

    for _ in range(n):
        nxt = np.zeros(shape)
        for i in range(d):
            flow = cur * W[..., i]
            top = list(full)
            top[i] = -1
            bot = list(full)
            bot[i] = 0
            if hi[i] == env.box.hi[i] and np.any(flow[tuple(top)] > 0):
                raise BoxEscapeError(f"support exits box along +e_{i}")
            if lo[i] == env.box.lo[i] and np.any(flow[tuple(bot)] > 0):
                raise BoxEscapeError(f"support exits box along -e_{i}")
            nxt[shifted(i, 1)] += flow[shifted(i, -1)]  # +e_i
            nxt[shifted(i, -1)] += flow[shifted(i, 1)]  # -e_i
        cur = nxt
    total = cur.sum()
    assert abs(total - 1.0) <= 1e-12, f"mass leak: {total}"
    out = {}
    for idx in np.argwhere(cur > 0):
        out[tuple(int(c + l) for c, l in zip(idx, lo))] = float(cur[tuple(idx)])
    return out


@dataclass
class CovarianceEstimate:
    """Q_hat(x, n): E^x[(X_n(i)-x_i)(X_n(j)-x_j)] / n."""

    matrix: np.ndarray
    horizon: int
    method: str
    samples: int = 0
    stderr: np.ndarray | None = None


def covariance_estimate(env, x, n, method="exact", samples=100_000, seed=0):
    """Estimate the n-step covariance matrix at site x.

    "exact" convolves one-step kernels (machine precision, small n);
    "monte-carlo" averages displacement outer products with per-entry
    standard errors.
    """
    x = tuple(int(c) for c in x)
    d = env.d
    if method == "exact":
        dist = exact_walk_distribution(env, x, n)
        Q = np.zeros((d, d))
        for site, p in dist.items():
            v = np.array(site) - np.array(x)
            Q += p * np.outer(v, v)
        return CovarianceEstimate(matrix=Q / n, horizon=n, method="exact")
    if method == "monte-carlo":
        ends = walk_endpoints(env, x, n, samples, seed)
        disp = ends - np.array(x)
        outer = disp[:, :, None] * disp[:, None, :]
        Q = outer.mean(axis=0) / n
        se = outer.std(axis=0, ddof=1) / math.sqrt(samples) / n
        return CovarianceEstimate(
            matrix=Q, horizon=n, method="monte-carlo", samples=samples, stderr=se
        )
    raise ValueError(f"unknown method {method!r}")


def walk_endpoints(env, start, n, samples, seed):
    """Positions after n steps for `samples` independent walks, (samples, d)."""
    rng = np.random.default_rng(seed)
    pos = np.tile(np.asarray(start, dtype=np.int64), (samples, 1))
    rows = np.arange(samples)
    for _ in range(n):
        w = env.weights_at(pos)
        axis, sign = _choose_moves(w, rng.random(samples))
        pos[rows, axis] += sign
        if not np.all(env.box.contains_all(pos)):
            raise BoxEscapeError("a walk reached the box edge; enlarge the box")
    return pos


@dataclass
class SigmaEstimate:
    """Diagonal of the limiting covariance, Sigma_ii = 2 E_Q[w(0, e_i)].

    Estimated as twice the time-average of the walk's current site
    weights.  wrap records whether the box was made periodic.
    """

    sigma: np.ndarray
    stderr: np.ndarray
    run_length: int
    burn_in: int
    wrap: bool


def estimate_sigma(
    env_or_law,
    run_length,
    burn_in,
    seed,
    wrap=False,
    start=None,
    box_radius=64,
    batches=30,
):
    """Time-average estimate of the diffusion matrix diagonal.

    Accepts an Environment, or an EnvironmentLaw (a box of half-size
    box_radius is then sampled with `seed` and wrap defaults to True).
    With wrap=True the walk reads weights periodically and cannot
    escape; otherwise escaping the box raises BoxEscapeError.
    """
    from .env import sample_environment

    if isinstance(env_or_law, Environment):
        env = env_or_law
    else:
        env = sample_environment(
            env_or_law, LatticeBox.centered(box_radius, env_or_law.d), seed
        )
        wrap = True
    if burn_in >= run_length:
        raise ValueError("run_length must exceed burn_in")
    d = env.d
    rng = np.random.default_rng(seed)
    lo = np.asarray(env.box.lo)
    shape = np.asarray(env.box.shape)
    if start is None:
        start = tuple((l + h) // 2 for l, h in zip(env.box.lo, env.box.hi))
    pos = np.array(start, dtype=np.int64)
    kept = np.empty((run_length - burn_in, d))
    u = rng.random(run_length)
    for k in range(run_length):
        idx = tuple((pos - lo) % shape) if wrap else tuple(pos - lo)
        w = env.weights[idx]
        if k >= burn_in:
            kept[k - burn_in] = w
        axis, sign = _choose_moves(w[None, :], u[k : k + 1])
        pos[axis[0]] += sign[0]
        if not wrap and not env.box.contains(tuple(pos)):
            raise BoxEscapeError(
                "sigma walk escaped the box; enlarge it or pass wrap=True"
            )
    sigma = 2.0 * kept.mean(axis=0)
    nb = min(batches, len(kept))
    bm = np.array_split(kept, nb)
    means = np.array([2.0 * b.mean(axis=0) for b in bm])
    se = means.std(axis=0, ddof=1) / math.sqrt(nb)
    return SigmaEstimate(
        sigma=sigma, stderr=se, run_length=run_length, burn_in=burn_in, wrap=wrap
    )


def sample_t1(env, site, samples, seed, horizon):
    """T_1 samples from one site, censored at the horizon.

    Returns an int array where horizon+1 stands for a censored sample
    (T_1 > horizon).  Vectorized over replicates.
    """
    rng = np.random.default_rng(seed)
    d = env.d
    pos = np.tile(np.asarray(site, dtype=np.int64), (samples, 1))
    moved = np.zeros((samples, d), dtype=bool)
    t1 = np.full(samples, horizon + 1, dtype=np.int64)
    alive = np.ones(samples, dtype=bool)
    rows = np.arange(samples)
    for step in range(1, horizon + 1):
        if not alive.any():
            break
        idx = rows[alive]
        w = env.weights_at(pos[idx])
        axis, sign = _choose_moves(w, rng.random(len(idx)))
        pos[idx, axis] += sign
        if not np.all(env.box.contains_all(pos[idx])):
            raise BoxEscapeError("T_1 sampling reached the box edge")
        moved[idx, axis] = True
        done = idx[moved[idx].all(axis=1)]
        t1[done] = step
        alive[done] = False
    return t1


@dataclass
class T1Statistics:
    """Censored T_1 statistics over a list of sites.

    The tail curve pools all samples; censored samples are kept (they
    still witness T_1 > n for n <= horizon) and reported, never
    dropped.  Per-site means use min(T_1, horizon) and are therefore
    lower bounds at censored sites.
    """

    horizon: int
    ns: np.ndarray
    tail: np.ndarray
    tail_stderr: np.ndarray
    censored_frac: float
    sites: list
    site_means: np.ndarray
    site_censored_frac: np.ndarray
    infinite_t1_suspects: list = field(default_factory=list)
    samples_per_site: int = 0
    raw: np.ndarray | None = None  # (num_sites, samples) censored samples

    def lp_average(self, p):
        """Empirical average over sites of (E^x[T_1])^p (truncated means)."""
        return float(np.mean(self.site_means**p))

    def prob_exceeds(self, threshold):
        """Per-site P_hat(T_1 > threshold); exact for threshold < horizon."""
        return np.mean(self.raw > threshold, axis=1)

    def truncated_mean_above(self, k):
        """Per-site E_hat[min(T_1, horizon) ; T_1 > k]."""
        vals = np.minimum(self.raw, self.horizon)
        return np.mean(np.where(self.raw > k, vals, 0), axis=1)


def t1_statistics(env, sites, samples, seed, horizon, keep_raw=True):
    """Sample T_1 at each site and aggregate tail and moment statistics."""
    sites = [tuple(int(c) for c in s) for s in sites]
    raw = np.empty((len(sites), samples), dtype=np.int64)
    for j, s in enumerate(sites):
        raw[j] = sample_t1(env, s, samples, seed + 7919 * j, horizon)
    pooled = raw.reshape(-1)
    total = pooled.size
    ns = np.arange(1, horizon + 1)
    tail = np.array([(pooled > n).mean() for n in ns])
    se = np.sqrt(np.maximum(tail * (1 - tail), 1e-300) / total)
    censored = raw > horizon
    suspects = [sites[j] for j in range(len(sites)) if censored[j].all()]
    means = np.minimum(raw, horizon).mean(axis=1)
    return T1Statistics(
        horizon=horizon,
        ns=ns,
        tail=tail,
        tail_stderr=se,
        censored_frac=float(censored.mean()),
        sites=sites,
        site_means=means,
        site_censored_frac=censored.mean(axis=1),
        infinite_t1_suspects=suspects,
        samples_per_site=samples,
        raw=raw if keep_raw else None,
    )
