"""Balanced i.i.d. environments on finite lattice boxes.

An environment assigns every lattice site z a vector of axis weights
p(z) in [0,1]^d with sum_i 2*p_i(z) = 1; the walk jumps from z to z+e_i
or z-e_i with probability p_i(z).  Only the d axis weights are stored,
so the balance symmetry w(z,e) = w(z,-e) cannot be violated by
construction.  Site weights are drawn i.i.d. from a finitely supported
single-site law, with per-site randomness derived from a counter-based
hash of (seed, site coordinates): the sampled weights do not depend on
traversal order, worker count, or the enclosing box.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BalanceError,
    CapacityError,
    DegenerateLawError,
    FormatError,
    ProbabilityError,
)

BALANCE_TOL = 1e-12

# ~2 GiB of float64 payload
_CAPACITY_BYTES = 2 << 30

_MAGIC = "RWRE-ENV v1"


@dataclass(frozen=True)
class LatticeBox:
    """Axis-aligned box of lattice sites, corners inclusive."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(int(v) for v in self.lo)
        hi = tuple(int(v) for v in self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(lo) != len(hi):
            raise ValueError("corner dimensions differ")
        if any(l > h for l, h in zip(lo, hi)):
            raise ValueError(f"empty box {lo}:{hi}")

    @property
    def d(self):
        return len(self.lo)

    @property
    def shape(self):
        return tuple(h - l + 1 for l, h in zip(self.lo, self.hi))

    @property
    def num_sites(self):
        n = 1
        for s in self.shape:
            n *= s
        return n

    def contains(self, site):
        return all(l <= c <= h for c, l, h in zip(site, self.lo, self.hi))

    def contains_all(self, sites):
        """Vectorized membership for an (n, d) integer array."""
        sites = np.asarray(sites)
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return np.all((sites >= lo) & (sites <= hi), axis=-1)

    def offset(self, site):
        """Index of `site` into an array of this box's shape."""
        return tuple(int(c) - l for c, l in zip(site, self.lo))

    def all_sites(self):
        """All sites as an (num_sites, d) int array in row-major order."""
        axes = [np.arange(l, h + 1) for l, h in zip(self.lo, self.hi)]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=-1)

    @staticmethod
    def centered(radius, d, center=None):
        """The box [center-radius, center+radius]^d."""
        if center is None:
            center = (0,) * d
        r = int(radius)
        return LatticeBox(
            tuple(c - r for c in center), tuple(c + r for c in center)
        )


@dataclass(frozen=True)
class EnvironmentLaw:
    """Finitely supported single-site law over balanced axis-weight vectors.

    Each atom is a pair (p, q): the weight vector p in [0,1]^d with
    sum_i 2*p_i = 1, drawn with probability q.
    """

    d: int
    atoms: tuple  # tuple of (np.ndarray p, float q)
    name: str

    def atom_matrix(self):
        """Atom weight vectors stacked into a (num_atoms, d) array."""
        return np.array([p for p, _ in self.atoms], dtype=np.float64)

    def atom_probs(self):
        return np.array([q for _, q in self.atoms], dtype=np.float64)

    def mean_weights(self):
        """E_nu[p], the annealed per-axis weight."""
        return self.atom_probs() @ self.atom_matrix()


def _validate_law(d, atoms, name):
    if d < 1:
        raise ValueError("dimension must be positive")
    if not atoms:
        raise ProbabilityError("law has no atoms")
    cleaned = []
    qs = []
    for p, q in atoms:
        p = np.asarray(p, dtype=np.float64)
        if p.shape != (d,):
            raise ValueError(f"atom weight vector has shape {p.shape}, expected ({d},)")
        if np.any(p < 0):
            raise BalanceError(f"negative axis weight in atom {p}")
        s = 2.0 * float(p.sum())
        if abs(s - 1.0) > BALANCE_TOL:
            raise BalanceError(f"atom {p} has sum(2*p) = {s}, not 1")
        if q < 0:
            raise ProbabilityError(f"negative atom probability {q}")
        cleaned.append((p.copy(), float(q)))
        qs.append(float(q))
    if abs(sum(qs) - 1.0) > BALANCE_TOL:
        raise ProbabilityError(f"atom probabilities sum to {sum(qs)}, not 1")
    for i in range(d):
        if not any(p[i] > 0 and q > 0 for p, q in cleaned):
            raise DegenerateLawError(f"no atom with positive weight on axis {i}")
    for p, _ in cleaned:
        p.flags.writeable = False
    return EnvironmentLaw(d=d, atoms=tuple(cleaned), name=name)


def make_law(spec, d=None, atoms=None, name=None):
    """Build an EnvironmentLaw from a builtin name or explicit atoms.

    Builtins: "srw" (the single atom p = (1/2d, ..., 1/2d)) and
    "axis-choice" (picks one axis uniformly and puts weight 1/2 on it).
    Pass spec="custom" with `atoms` for an explicit list of (p, q) pairs.
    """
    if spec == "srw":
        if d is None:
            raise ValueError("builtin laws need the dimension d")
        p = np.full(d, 1.0 / (2 * d))
        return _validate_law(d, [(p, 1.0)], name or f"srw{d}d")
    if spec == "axis-choice":
        if d is None:
            raise ValueError("builtin laws need the dimension d")
        atom_list = []
        for i in range(d):
            p = np.zeros(d)
            p[i] = 0.5
            atom_list.append((p, 1.0 / d))
        return _validate_law(d, atom_list, name or f"axis-choice{d}d")
    if spec == "custom":
        if atoms is None:
            raise ValueError("custom law needs explicit atoms")
        if d is None:
            d = len(np.asarray(atoms[0][0]))
        return _validate_law(d, atoms, name or "custom")
    raise ValueError(f"unknown law spec {spec!r}")


# ---------------------------------------------------------------------------
# Counter-based per-site randomness (splitmix64 finalizer chain).
# ---------------------------------------------------------------------------

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(x):
    x = (x ^ (x >> np.uint64(30))) * _M1
    x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def site_uniforms(seed, coords):
    """Uniform [0,1) variates keyed by (seed, site), order-independent.

    coords: integer array of shape (..., d).  Returns an array of the
    leading shape.  Pure function: the variate at a site depends only on
    the master seed and the site's absolute coordinates.
    """
    coords = np.asarray(coords, dtype=np.int64)
    with np.errstate(over="ignore"):
        h = np.full(coords.shape[:-1], np.uint64(seed) ^ _GAMMA, dtype=np.uint64)
        h = _mix(h)
        for j in range(coords.shape[-1]):
            c = coords[..., j].astype(np.uint64)
            h = _mix(h ^ _mix(c + np.uint64(j + 1) * _GAMMA))
        return (h >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


@dataclass(frozen=True)
class Environment:
    """A sampled (or hand-built) environment on a finite box.

    weights has shape box.shape + (d,), row-major over the box.
    Immutable after construction; safe to share across workers.
    """

    box: LatticeBox
    weights: np.ndarray
    law_name: str = "adhoc"
    seed: int = 0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        expected = self.box.shape + (self.box.d,)
        if w.shape != expected:
            raise ValueError(f"weights shape {w.shape}, expected {expected}")
        w = w.copy()
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def d(self):
        return self.box.d

    def weight_at(self, site):
        """Axis-weight vector p(site)."""
        return self.weights[self.box.offset(site)]

    def weights_at(self, sites):
        """Axis weights for an (n, d) array of sites, shape (n, d)."""
        sites = np.asarray(sites, dtype=np.int64)
        idx = tuple((sites[..., j] - self.box.lo[j]) for j in range(self.d))
        return self.weights[idx]

    def __eq__(self, other):
        if not isinstance(other, Environment):
            return NotImplemented
        return (
            self.box == other.box
            and self.law_name == other.law_name
            and self.seed == other.seed
            and np.array_equal(self.weights, other.weights)
        )


def sample_environment(law, box, seed):
    """Draw per-site weights i.i.d. from the law's atoms.

    Per-site randomness comes from a counter-based hash of
    (seed, coordinates): bit-identical results for identical
    (law, box, seed) regardless of traversal order or worker count,
    and consistent across nested boxes sharing a seed.
    """
    if box.d != law.d:
        raise ValueError(f"box dimension {box.d} != law dimension {law.d}")
    if box.num_sites * law.d * 8 > _CAPACITY_BYTES:
        raise CapacityError(
            f"box with {box.num_sites} sites exceeds the {_CAPACITY_BYTES >> 30} GiB cap"
        )
    u = site_uniforms(seed, box.all_sites())
    cum = np.cumsum(law.atom_probs())
    cum[-1] = 1.0
    idx = np.searchsorted(cum, u, side="right")
    weights = law.atom_matrix()[idx].reshape(box.shape + (law.d,))
    return Environment(box=box, weights=weights, law_name=law.name, seed=int(seed))


def constant_environment(p, box, name="constant"):
    """Environment with the same weight vector at every site.

    Balance is enforced; genuine d-dimensionality is NOT (degenerate
    constructions such as all-horizontal rows are valid test fixtures,
    and validate_environment will flag the missing axes).
    """
    p = np.asarray(p, dtype=np.float64)
    if abs(2.0 * p.sum() - 1.0) > BALANCE_TOL or np.any(p < 0):
        raise BalanceError(f"constant weight vector {p} is not balanced")
    w = np.broadcast_to(p, box.shape + (box.d,))
    return Environment(box=box, weights=np.array(w), law_name=name, seed=0)


@dataclass
class ValidationReport:
    """Outcome of in-box environment checks.

    Reports on the sampled box only; it cannot certify the almost-sure
    law-level property on the infinite lattice.
    """

    balance_ok: bool
    balance_violations: list = field(default_factory=list)  # (site, sum)
    axis_present: list = field(default_factory=list)  # bool per axis
    missing_axes: list = field(default_factory=list)

    @property
    def ok(self):
        return self.balance_ok and not self.missing_axes


def validate_environment(env):
    """Check balance at every site and per-axis in-box positivity."""
    w = env.weights.reshape(-1, env.d)
    sums = 2.0 * w.sum(axis=1)
    bad = np.nonzero(np.abs(sums - 1.0) > BALANCE_TOL)[0]
    sites = env.box.all_sites()
    violations = [(tuple(sites[i]), float(sums[i])) for i in bad]
    axis_present = [bool(np.any(w[:, i] > 0)) for i in range(env.d)]
    missing = [i for i, ok in enumerate(axis_present) if not ok]
    return ValidationReport(
        balance_ok=len(violations) == 0,
        balance_violations=violations,
        axis_present=axis_present,
        missing_axes=missing,
    )


# ---------------------------------------------------------------------------
# File format: textual header, then little-endian float64 payload,
# d values per site, sites in row-major order of the box.
# ---------------------------------------------------------------------------


def save_environment(env, path):
    header = (
        f"{_MAGIC}\n"
        f"d={env.d}\n"
        f"box={','.join(map(str, env.box.lo))}:{','.join(map(str, env.box.hi))}\n"
        f"law={env.law_name}\n"
        f"seed={env.seed}\n"
    )
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        f.write(env.weights.astype("<f8").tobytes(order="C"))


def _header_line(f, offset, expected_key=None):
    line = f.readline()
    if not line.endswith(b"\n"):
        raise FormatError("truncated header", offset)
    text = line[:-1].decode("ascii", errors="replace")
    if expected_key is not None:
        if not text.startswith(expected_key + "="):
            raise FormatError(f"expected '{expected_key}=' line, got {text!r}", offset)
        text = text[len(expected_key) + 1 :]
    return text, offset + len(line)


def load_environment(path):
    with open(path, "rb") as f:
        offset = 0
        magic, offset = _header_line(f, offset)
        if magic != _MAGIC:
            raise FormatError(f"bad magic {magic!r}", 0)
        dtext, offset = _header_line(f, offset, "d")
        try:
            d = int(dtext)
        except ValueError:
            raise FormatError(f"unparseable dimension {dtext!r}", offset) from None
        boxtext, offset = _header_line(f, offset, "box")
        try:
            lo_s, hi_s = boxtext.split(":")
            lo = tuple(int(v) for v in lo_s.split(","))
            hi = tuple(int(v) for v in hi_s.split(","))
            box = LatticeBox(lo, hi)
        except ValueError as e:
            raise FormatError(f"unparseable box {boxtext!r}: {e}", offset) from None
        if box.d != d:
            raise FormatError(
                f"declared d={d} disagrees with box dimension {box.d}", offset
            )
        law_name, offset = _header_line(f, offset, "law")
        seedtext, offset = _header_line(f, offset, "seed")
        try:
            seed = int(seedtext)
        except ValueError:
            raise FormatError(f"unparseable seed {seedtext!r}", offset) from None
        payload = f.read()
        expected = box.num_sites * d * 8
        if len(payload) != expected:
            raise FormatError(
                f"payload is {len(payload)} bytes, declared box needs {expected}",
                offset + min(len(payload), expected),
            )
        weights = np.frombuffer(payload, dtype="<f8").reshape(box.shape + (d,))
        return Environment(box=box, weights=weights, law_name=law_name, seed=seed)
