"""Directed percolation structure of an environment.

The directed graph puts an edge x -> y between lattice neighbors
whenever w(x, y-x) > 0 (exact zero test, no thresholding).  Balance
makes edges come in +/- pairs, so strongly connected components with no
out-edges ("sinks" within the box) capture where the walk ultimately
lives.  This module also builds the two-dimensional ES/EN stairs,
E-bubbles and tadpoles used to certify directed connectivity, and the
hole geometry of the sink complement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.ndimage import label as ndi_label
from scipy.sparse.csgraph import connected_components, dijkstra

from .env import Environment, LatticeBox, sample_environment
from .errors import BoxEscapeError, SampleSizeError

_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


def wilson_ci(successes, trials, z=1.96):
    """Wilson score interval for a binomial proportion."""
    if trials == 0:
        return (0.0, 1.0)
    p = successes / trials
    denom = 1 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass
class DirectedLatticeGraph:
    """Adjacency of the in-box directed percolation graph."""

    box: LatticeBox
    sites: np.ndarray  # (n, d)
    adjacency: sp.csr_matrix
    grid_lo: np.ndarray
    node_grid: np.ndarray  # site -> node id, -1 outside

    @property
    def num_nodes(self):
        return len(self.sites)

    def node_of(self, site):
        rel = tuple(int(c) - int(l) for c, l in zip(site, self.grid_lo))
        if any(r < 0 or r >= s for r, s in zip(rel, self.node_grid.shape)):
            return -1
        return int(self.node_grid[rel])

    def nodes_of(self, sites):
        sites = np.atleast_2d(np.asarray(sites, dtype=np.int64))
        rel = sites - self.grid_lo
        ok = np.all((rel >= 0) & (rel < np.array(self.node_grid.shape)), axis=1)
        out = np.full(len(sites), -1, dtype=np.int64)
        if ok.any():
            out[ok] = self.node_grid[tuple(rel[ok].T)]
        return out


def build_digraph(env, box=None):
    """Directed graph on the box: edge x -> x +/- e_i iff w_i(x) > 0."""
    if box is None:
        box = env.box
    if not (env.box.contains(box.lo) and env.box.contains(box.hi)):
        raise ValueError("box must lie inside the environment")
    sites = box.all_sites()
    n = len(sites)
    d = box.d
    shape = box.shape
    node_grid = np.arange(n, dtype=np.int64).reshape(shape)
    w = env.weights_at(sites).reshape(shape + (d,))
    rows, cols = [], []
    ids = node_grid
    for i in range(d):
        open_i = w[..., i] > 0
        tgt_fwd = np.roll(ids, -1, axis=i)
        tgt_bwd = np.roll(ids, 1, axis=i)
        edge = open_i.copy()
        last = [slice(None)] * d
        last[i] = -1
        edge_fwd = edge.copy()
        edge_fwd[tuple(last)] = False
        first = [slice(None)] * d
        first[i] = 0
        edge_bwd = edge.copy()
        edge_bwd[tuple(first)] = False
        rows.append(ids[edge_fwd])
        cols.append(tgt_fwd[edge_fwd])
        rows.append(ids[edge_bwd])
        cols.append(tgt_bwd[edge_bwd])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    adj = sp.csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))
    return DirectedLatticeGraph(
        box=box,
        sites=sites,
        adjacency=adj,
        grid_lo=np.asarray(box.lo),
        node_grid=node_grid,
    )


@dataclass
class SinkDecomposition:
    """Strong components with in-box terminality flags.

    Edges leaving the box are ignored when deciding terminality, so the
    count A(n) is an in-box proxy for the lattice notion (recorded by
    the in_box flag).
    """

    graph: DirectedLatticeGraph
    labels: np.ndarray  # SCC id per node
    n_components: int
    terminal: np.ndarray  # bool per SCC
    in_box: bool = True

    @property
    def sink_count(self):
        return int(self.terminal.sum())

    def sink_mask(self):
        """Bool per node: member of some terminal SCC."""
        return self.terminal[self.labels]

    def sink_sites(self):
        return self.graph.sites[self.sink_mask()]

    def largest_sink_nodes(self):
        term_ids = np.nonzero(self.terminal)[0]
        if len(term_ids) == 0:
            return np.zeros(0, dtype=np.int64)
        sizes = [(self.labels == t).sum() for t in term_ids]
        best = term_ids[int(np.argmax(sizes))]
        return np.nonzero(self.labels == best)[0]


def find_sinks(graph):
    """SCC decomposition with terminal flags (linear-time, in-box)."""
    n_comp, labels = connected_components(
        graph.adjacency, directed=True, connection="strong"
    )
    terminal = np.ones(n_comp, dtype=bool)
    coo = graph.adjacency.tocoo()
    cross = labels[coo.row] != labels[coo.col]
    for c in np.unique(labels[coo.row[cross]]):
        terminal[c] = False
    return SinkDecomposition(
        graph=graph, labels=labels, n_components=n_comp, terminal=terminal
    )


def directed_distance(graph, x, y):
    """Length of a shortest directed path x -> y, or math.inf."""
    ix = graph.node_of(x)
    iy = graph.node_of(y)
    if ix < 0 or iy < 0:
        raise ValueError("sites outside the graph box")
    dist = dijkstra(graph.adjacency, indices=ix, unweighted=True, min_only=False)
    return float(dist[iy])


def distances_from(graph, x):
    """BFS distances from x to every node (inf where unreachable)."""
    ix = graph.node_of(x)
    if ix < 0:
        raise ValueError("site outside the graph box")
    return dijkstra(graph.adjacency, indices=ix, unweighted=True)


def reachable_from(graph, x):
    """Bool per node: reachable from x by a directed path."""
    return np.isfinite(distances_from(graph, x))


# ---------------------------------------------------------------------------
# Sink statistics over seeds (nested-box protocol).
# ---------------------------------------------------------------------------


@dataclass
class SinkStatistics:
    sizes: list
    rows: list  # (seed, n, A_n, density, subcube_frac)
    p_unique: dict  # n -> (p_hat, ci_lo, ci_hi)
    min_density: float


def sink_stats(law, sizes, num_seeds, seed0=0, subcube_k=10):
    """A(n) over concentric boxes [-n, n]^d sharing one environment per seed.

    Reports the empirical frequency of A(n) = 1 with a binomial CI, the
    sink density per box, and the fraction of n/k-subcubes the largest
    sink intersects.
    """
    sizes = sorted(int(n) for n in sizes)
    nmax = sizes[-1]
    rows = []
    uniques = {n: 0 for n in sizes}
    min_density = 1.0
    for s in range(num_seeds):
        seed = seed0 + s
        env = sample_environment(law, LatticeBox.centered(nmax, law.d), seed)
        for n in sizes:
            g = build_digraph(env, LatticeBox.centered(n, law.d))
            dec = find_sinks(g)
            a = dec.sink_count
            density = float(dec.sink_mask().mean())
            frac = _subcube_hit_fraction(dec, n, subcube_k)
            rows.append((seed, n, a, density, frac))
            if a == 1:
                uniques[n] += 1
            min_density = min(min_density, density)
    p_unique = {}
    for n in sizes:
        lo, hi = wilson_ci(uniques[n], num_seeds)
        p_unique[n] = (uniques[n] / num_seeds, lo, hi)
    return SinkStatistics(
        sizes=sizes, rows=rows, p_unique=p_unique, min_density=min_density
    )


def _subcube_hit_fraction(dec, n, k):
    nodes = dec.largest_sink_nodes()
    if len(nodes) == 0:
        return 0.0
    side = max(1, (2 * n + 1) // k)
    sites = dec.graph.sites[nodes]
    cells = (sites - dec.graph.grid_lo) // side
    hit = len(np.unique(cells, axis=0))
    total = 1
    for s in dec.graph.box.shape:
        total *= math.ceil(s / side)
    return hit / total


# ---------------------------------------------------------------------------
# Distance tail within the sink.
# ---------------------------------------------------------------------------


@dataclass
class DistanceTail:
    buckets: list
    c_values: list
    counts: dict  # (bucket, C) -> (exceed, total)
    table: list  # (bucket, C, p_hat, ci_lo, ci_hi)
    monotone_decay: dict  # C -> bool


def distance_tail_counts(
    law, buckets, c_values, seed, sources_per_seed=6, max_pairs=80
):
    """Exceedance/total counts of d_w(x, y) > C * |x-y|_1 for one seed."""
    buckets = sorted(int(b) for b in buckets)
    half = 2 * buckets[-1]
    counts = {(b, c): [0, 0] for b in buckets for c in c_values}
    rng = np.random.default_rng(seed + 987)
    env = sample_environment(law, LatticeBox.centered(half, law.d), seed)
    g = build_digraph(env)
    dec = find_sinks(g)
    sink = dec.sink_mask()
    sink_nodes = np.nonzero(sink)[0]
    if len(sink_nodes) == 0:
        return counts
    # prefer sources near the center so distance-D targets stay in-box
    center_dist = np.abs(g.sites[sink_nodes]).max(axis=1)
    near = sink_nodes[center_dist <= half // 2]
    if len(near) == 0:
        near = sink_nodes
    chosen = rng.choice(near, size=min(sources_per_seed, len(near)), replace=False)
    for node in chosen:
        dists = dijkstra(g.adjacency, indices=int(node), unweighted=True)
        l1 = np.abs(g.sites - g.sites[node]).sum(axis=1)
        for b in buckets:
            targets = np.nonzero(sink & (l1 == b))[0]
            if len(targets) > max_pairs:
                targets = rng.choice(targets, size=max_pairs, replace=False)
            for t in targets:
                dw = dists[t]
                for c in c_values:
                    counts[(b, c)][1] += 1
                    if not np.isfinite(dw) or dw > c * b:
                        counts[(b, c)][0] += 1
    return counts


def aggregate_distance_tail(buckets, c_values, count_list):
    """Merge per-seed counts into the tail table with Wilson CIs."""
    buckets = sorted(int(b) for b in buckets)
    counts = {(b, c): [0, 0] for b in buckets for c in c_values}
    for cs in count_list:
        for key, (e, t) in cs.items():
            counts[key][0] += e
            counts[key][1] += t
    table = []
    for b in buckets:
        for c in c_values:
            exceed, total = counts[(b, c)]
            if total == 0:
                raise SampleSizeError(f"no sink pairs at distance {b}")
            lo, hi = wilson_ci(exceed, total)
            table.append((b, c, exceed / total, lo, hi))
    monotone = {}
    for c in c_values:
        ps = [counts[(b, c)][0] / counts[(b, c)][1] for b in buckets]
        cis = [wilson_ci(*counts[(b, c)]) for b in buckets]
        ok = all(
            ps[i + 1] <= ps[i] + (cis[i][1] - ps[i]) + (ps[i + 1] - cis[i + 1][0])
            for i in range(len(ps) - 1)
        )
        monotone[c] = ok
    return DistanceTail(
        buckets=buckets,
        c_values=list(c_values),
        counts={k: tuple(v) for k, v in counts.items()},
        table=table,
        monotone_decay=monotone,
    )


def distance_tail(law, buckets, c_values, num_seeds, seed0=0, **kw):
    """Empirical P[d_w(x, y) > C * |x-y|_1 ; x, y in sink] per distance bucket."""
    count_list = [
        distance_tail_counts(law, buckets, c_values, seed0 + s, **kw)
        for s in range(num_seeds)
    ]
    return aggregate_distance_tail(buckets, c_values, count_list)


# ---------------------------------------------------------------------------
# 2D stairs, bubbles and tadpoles.
# ---------------------------------------------------------------------------


@dataclass
class StairStructure:
    """ES/EN stairs from an anchor site (d = 2 only).

    The ES stair climbs north while the east direction is closed, then
    moves east at every east-open site and drops south at east-closed
    sites until it returns to the anchor's horizontal line; the east-run
    lengths H_j satisfy L_es = 2 V0 + sum_j H_j exactly.  The EN stair
    is its mirror below the line.  The E-path is the shorter of the two
    (EN on ties); when the anchor itself is east-open both stairs
    degenerate and the E-path is the single east edge.  The E-bubble is
    the region enclosed between the two stairs.
    """

    origin: tuple
    v0_es: int
    h_es: list
    es_path: list
    v0_en: int
    h_en: list
    en_path: list
    l_es: int
    l_en: int
    l_e: int
    e_path: list
    e_is_en: bool
    endpoint: tuple
    bubble: set


def _east_open(env, site):
    if not env.box.contains(site):
        raise BoxEscapeError(f"stair left the box at {site}")
    return env.weight_at(site)[0] > 0


def _stair_trace(env, origin, up):
    """One stair: climb `up` while east-closed, then east/descend legs.

    Stops when the stair returns to the anchor's horizontal line; the
    east-run lengths hs satisfy len(path) - 1 = 2*v0 + sum(hs).
    """
    x0, y0 = int(origin[0]), int(origin[1])
    v0 = 0
    path = [(x0, y0)]
    z = (x0, y0)
    while not _east_open(env, z):
        z = (z[0], z[1] + up)
        v0 += 1
        path.append(z)
    hs = []
    height = v0
    while height > 0:
        run = 0
        while _east_open(env, z):
            z = (z[0] + 1, z[1])
            run += 1
            path.append(z)
        z = (z[0], z[1] - up)
        height -= 1
        path.append(z)
        hs.append(run)
    return v0, hs, path


def _stair_sites(env, origin, up):
    """The infinite stair as a site generator (column is nondecreasing)."""
    z = tuple(origin)
    yield z
    while not _east_open(env, z):
        z = (z[0], z[1] + up)
        yield z
    while True:
        while _east_open(env, z):
            z = (z[0] + 1, z[1])
            yield z
        z = (z[0], z[1] - up)
        yield z


def _crossing_bubble(env, origin, max_sites=100_000):
    """Sites on or below the ES stair and on or above the EN stair.

    Both infinite stairs are traced until their column profiles cross;
    the enclosed region is returned.  A degenerate anchor (east open,
    both stairs flat) yields the single east edge.
    """
    if _east_open(env, origin):
        return {tuple(origin), (origin[0] + 1, origin[1])}
    es = _stair_sites(env, origin, up=1)
    en = _stair_sites(env, origin, up=-1)
    top = {origin[0]: next(es)[1]}
    bot = {origin[0]: next(en)[1]}
    col_es = col_en = origin[0]
    n = 0
    while True:
        if col_es <= col_en:
            x, y = next(es)
            top[x] = max(top.get(x, y), y)
            col_es = x
        else:
            x, y = next(en)
            bot[x] = min(bot.get(x, y), y)
            col_en = x
        n += 1
        if n > max_sites:
            raise BoxEscapeError("stair crossing not found within the site cap")
        # profiles at column x are final once both stairs moved past x
        settled = min(col_es, col_en) - 1
        if settled >= origin[0] and top.get(settled, 1) < bot.get(settled, 0):
            break
    sites = set()
    for x in range(origin[0], settled + 1):
        if top[x] >= bot[x]:
            for y in range(bot[x], top[x] + 1):
                sites.add((x, y))
        else:
            break
    return sites


def es_stair(env, origin=(0, 0), with_bubble=True):
    """Construct the ES and EN stairs, the E-path and the E-bubble."""
    if env.d != 2:
        raise ValueError("stairs are defined in d = 2 only")
    v0_es, h_es, es_path = _stair_trace(env, origin, up=1)
    v0_en, h_en, en_path = _stair_trace(env, origin, up=-1)
    l_es = 2 * v0_es + sum(h_es)
    l_en = 2 * v0_en + sum(h_en)
    if v0_es == 0:
        # anchor is east-open: single east edge, zero-length stairs
        e_path = [tuple(origin), (origin[0] + 1, origin[1])]
        e_is_en = True
        l_e = 0
    elif l_en <= l_es:
        e_path = en_path
        e_is_en = True
        l_e = l_en
    else:
        e_path = es_path
        e_is_en = False
        l_e = l_es
    endpoint = e_path[-1]
    bubble = _crossing_bubble(env, tuple(origin)) if with_bubble else set()
    return StairStructure(
        origin=tuple(origin),
        v0_es=v0_es,
        h_es=h_es,
        es_path=es_path,
        v0_en=v0_en,
        h_en=h_en,
        en_path=en_path,
        l_es=l_es,
        l_en=l_en,
        l_e=l_e,
        e_path=e_path,
        e_is_en=e_is_en,
        endpoint=endpoint,
        bubble=bubble,
    )


@dataclass
class Tadpole:
    direction: str
    n: int
    sites: set
    size: int
    m_n: int
    anchors: list
    connectivity_ok: bool
    unreachable_in_tadpole: list = field(default_factory=list)


def _transpose_env(env):
    w = np.transpose(env.weights, (1, 0, 2))[..., ::-1]
    box = LatticeBox((env.box.lo[1], env.box.lo[0]), (env.box.hi[1], env.box.hi[0]))
    return Environment(box=box, weights=np.ascontiguousarray(w), law_name=env.law_name, seed=env.seed)


def tadpole(env, n, direction="E", origin=(0, 0), check_connectivity=True):
    """East (or north) tadpole: M(n)-1 concatenated E-paths plus the final E-bubble.

    M(n) is the first concatenation whose endpoint passes coordinate n.
    The reachability property (every tadpole site reachable from the
    origin at all is reachable within the tadpole) is verified by a
    BFS restricted to the tadpole's sites.
    """
    if direction == "N":
        t = tadpole(
            _transpose_env(env), n, "E", (origin[1], origin[0]), check_connectivity
        )
        return Tadpole(
            direction="N",
            n=n,
            sites={(y, x) for x, y in t.sites},
            size=t.size,
            m_n=t.m_n,
            anchors=[(y, x) for x, y in t.anchors],
            connectivity_ok=t.connectivity_ok,
            unreachable_in_tadpole=[(y, x) for x, y in t.unreachable_in_tadpole],
        )
    target = origin[0] + n
    anchors = [tuple(origin)]
    stairs = []
    while True:
        st = es_stair(env, anchors[-1], with_bubble=False)
        stairs.append(st)
        anchors.append(st.endpoint)
        if st.endpoint[0] >= target:
            break
    m_n = len(stairs)
    sites = set()
    for st in stairs[: m_n - 1]:
        sites.update(st.e_path)
    sites.update(_crossing_bubble(env, stairs[m_n - 1].origin))
    sites.add(tuple(origin))
    ok = True
    missing = []
    if check_connectivity:
        ok, missing = _check_tadpole_reach(env, tuple(origin), sites)
    return Tadpole(
        direction="E",
        n=n,
        sites=sites,
        size=len(sites),
        m_n=m_n,
        anchors=anchors[:-1],
        connectivity_ok=ok,
        unreachable_in_tadpole=missing,
    )


def _bfs_in(env, origin, allowed):
    """Directed BFS from origin restricted to the `allowed` site set."""
    seen = {origin}
    stack = [origin]
    while stack:
        site = stack.pop()
        w = env.weight_at(site)
        for i in range(env.d):
            if w[i] <= 0:
                continue
            for s in (1, -1):
                nb = tuple(site[j] + (s if j == i else 0) for j in range(env.d))
                if nb in allowed and nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
    return seen


def _check_tadpole_reach(env, origin, sites):
    g = build_digraph(env)
    reach = reachable_from(g, origin)
    site_arr = np.array(sorted(sites), dtype=np.int64)
    nodes = g.nodes_of(site_arr)
    should = {tuple(s) for s, n in zip(site_arr, nodes) if n >= 0 and reach[n]}
    reach_restricted = _bfs_in(env, origin, sites)
    missing = sorted(should - reach_restricted)
    return len(missing) == 0, missing


# ---------------------------------------------------------------------------
# Hole geometry of the sink complement (d = 2).
# ---------------------------------------------------------------------------


@dataclass
class HoleReport:
    seed: int
    box_shape: tuple
    n_interior_holes: int
    all_rectangles: bool
    counterexamples: list
    max_hole_area: int


def holes_are_rectangles(env, box=None, seed=None):
    """Compare each interior hole of the sink complement to its bounding box.

    Holes are 4-connected components of box minus the sink (union of
    terminal SCCs); components touching the box edge are truncation
    artifacts and excluded.
    """
    g = build_digraph(env, box)
    dec = find_sinks(g)
    shape = g.box.shape
    sink = dec.sink_mask().reshape(shape)
    comp, n_comp = ndi_label(~sink, structure=_CROSS)
    counterexamples = []
    interior_holes = 0
    max_area = 0
    for cid in range(1, n_comp + 1):
        cells = np.argwhere(comp == cid)
        touches_edge = (
            np.any(cells == 0)
            or np.any(cells[:, 0] == shape[0] - 1)
            or np.any(cells[:, 1] == shape[1] - 1)
        )
        if touches_edge:
            continue
        interior_holes += 1
        lo = cells.min(axis=0)
        hi = cells.max(axis=0)
        area = int(np.prod(hi - lo + 1))
        max_area = max(max_area, len(cells))
        if len(cells) != area:
            counterexamples.append(
                {"bbox": (tuple(lo + g.grid_lo), tuple(hi + g.grid_lo)), "size": len(cells)}
            )
    return HoleReport(
        seed=seed if seed is not None else env.seed,
        box_shape=shape,
        n_interior_holes=interior_holes,
        all_rectangles=len(counterexamples) == 0,
        counterexamples=counterexamples,
        max_hole_area=max_area,
    )


@dataclass
class ReachOutsideTail:
    ks: list
    table: list  # (k, p_hat, ci_lo, ci_hi)
    decaying: bool


def reach_outside_sink_tail(law, ks, num_seeds, seed0=0):
    """Frequency of: some site at l-infinity distance k is reachable from
    the origin yet outside the sink."""
    ks = sorted(int(k) for k in ks)
    half = 2 * ks[-1]
    hits = {k: 0 for k in ks}
    for s in range(num_seeds):
        env = sample_environment(law, LatticeBox.centered(half, law.d), seed0 + s)
        g = build_digraph(env)
        dec = find_sinks(g)
        reach = reachable_from(g, (0,) * law.d)
        outside = reach & ~dec.sink_mask()
        if not outside.any():
            continue
        linf = np.abs(g.sites[outside]).max(axis=1)
        for k in ks:
            if np.any(linf == k):
                hits[k] += 1
    table = []
    for k in ks:
        lo, hi = wilson_ci(hits[k], num_seeds)
        table.append((k, hits[k] / num_seeds, lo, hi))
    ps = [r[1] for r in table]
    cis = [(r[2], r[3]) for r in table]
    decaying = all(
        ps[i + 1] <= ps[i] + (cis[i][1] - ps[i]) + (ps[i + 1] - cis[i + 1][0])
        for i in range(len(ps) - 1)
    )
    return ReachOutsideTail(ks=ks, table=table, decaying=decaying)
