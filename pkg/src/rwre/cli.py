"""Experiment orchestration: configs, seeds, CSV outputs, manifest.

A run is a set of independent (seed, size) tasks dispatched to the
library modules; per-task seeds are assigned up front, results are
collected in task order, and a single writer emits each output file,
so reruns with an identical config are byte-identical at any --jobs
width (manifest timing fields excepted).  Exit code 0 on success,
2 on partial task failure, 1 on configuration errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import env as env_mod
from . import harnack as harnack_mod
from . import homog as homog_mod
from . import perc as perc_mod
from . import walk as walk_mod
from .errors import ConfigError

__version__ = "0.1.0"

KINDS = (
    "gen-env",
    "t1",
    "sigma",
    "dirichlet",
    "homog",
    "exit-law",
    "sinks",
    "stairs",
    "holes",
    "dist-tail",
    "harnack",
    "osc",
    "abp-check",
)

_DEFAULTS = {
    "law": "axis-choice",
    "d": 2,
    "sizes": "16,32",
    "radii": "8,16",
    "seeds": 5,
    "seed0": 0,
    "samples": 10000,
    "horizon": 32,
    "jobs": 1,
    "tol": 1e-10,
    "psi": 2.0,
    "m_factor": 8,
    "mesh": 0.015625,  # 1/M^2 for M = 8
    "r_frac": 0.0,
    "run_length": 200000,
    "burn_in": 5000,
    "c_values": "1,4",
    "buckets": "8,16,32",
    "k": 4,
    "kappa": 2.0,
    "n": 64,
    "f_kind": "quad",
    "radius": 32,
    "wos_samples": 20000,
    "dump_sites": 0,
    "linear_a": "1.0,0.0",
}


@dataclass
class ExperimentConfig:
    kind: str
    out: str
    raw: dict = field(default_factory=dict)

    def law(self):
        return env_mod.make_law(self.raw["law"], d=int(self.raw["d"]))

    def int_list(self, key):
        v = self.raw[key]
        if isinstance(v, (list, tuple)):
            return [int(x) for x in v]
        return [int(x) for x in str(v).split(",") if str(x).strip()]

    def float_list(self, key):
        v = self.raw[key]
        if isinstance(v, (list, tuple)):
            return [float(x) for x in v]
        return [float(x) for x in str(v).split(",") if str(x).strip()]

    def __getitem__(self, key):
        return self.raw[key]


def parse_config_file(path):
    """Flat key=value lines; '#' starts a comment."""
    out = {}
    with open(path) as f:
        for ln, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError("config", f"line {ln} is not key=value: {line!r}")
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def build_config(kind, out, raw):
    if kind not in KINDS:
        raise ConfigError("kind", f"unknown experiment {kind!r}")
    merged = dict(_DEFAULTS)
    merged.update(raw)
    cfg = ExperimentConfig(kind=kind, out=out, raw=merged)
    if int(merged["seeds"]) < 1:
        raise ConfigError("seeds", "need at least one seed")
    for key in ("sizes", "radii", "buckets"):
        try:
            vals = cfg.int_list(key)
        except ValueError:
            raise ConfigError(key, f"unparseable list {merged[key]!r}") from None
        if any(v <= 0 for v in vals):
            raise ConfigError(key, "entries must be positive")
    if merged["law"] not in ("srw", "axis-choice"):
        raise ConfigError("law", f"unknown law {merged['law']!r}")
    if int(merged["d"]) < 1:
        raise ConfigError("d", "dimension must be positive")
    if int(merged["jobs"]) < 1:
        raise ConfigError("jobs", "need at least one worker")
    try:
        os.makedirs(out, exist_ok=True)
        probe = os.path.join(out, ".writable")
        with open(probe, "w") as f:
            f.write("")
        os.remove(probe)
    except OSError as e:
        raise ConfigError("out", f"not writable: {e}") from None
    return cfg


# ---------------------------------------------------------------------------
# Formatting helpers (deterministic CSV bytes).
# ---------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (np.floating, float)):
        return repr(float(v))
    if isinstance(v, (np.integer, int)):
        return str(int(v))
    if isinstance(v, (np.bool_, bool)):
        return "1" if v else "0"
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# Per-kind task functions.  Each returns (rows, extra_files) where rows
# feed the kind's main CSV.  Must be picklable (top level).
# ---------------------------------------------------------------------------


def _law_of(params):
    return env_mod.make_law(params["law"], d=params["d"])


def _task_gen_env(params):
    law = _law_of(params)
    e = env_mod.sample_environment(
        law, env_mod.LatticeBox.centered(params["radius"], law.d), params["seed"]
    )
    path = os.path.join(params["out"], f"env_{params['seed']}.env")
    env_mod.save_environment(e, path)
    return [(params["seed"], path)], []


def _task_t1(params):
    law = _law_of(params)
    horizon = params["horizon"]
    e = env_mod.sample_environment(
        law, env_mod.LatticeBox.centered(horizon + 2, law.d), params["seed"]
    )
    stats = walk_mod.t1_statistics(
        e, [(0,) * law.d], params["samples"], params["seed"], horizon, keep_raw=False
    )
    exceed = np.round(stats.tail * stats.samples_per_site).astype(np.int64)
    return [
        (int(n), int(exceed[i]), stats.samples_per_site, stats.censored_frac)
        for i, n in enumerate(stats.ns)
    ], []


def _task_sigma(params):
    law = _law_of(params)
    est = walk_mod.estimate_sigma(
        law,
        params["run_length"],
        params["burn_in"],
        params["seed"],
        box_radius=params["radius"],
    )
    return [
        (axis, float(est.sigma[axis]), float(est.stderr[axis]), est.wrap)
        for axis in range(law.d)
    ], []


def _task_dirichlet(params):
    from .dirichlet import discrete_ball, harmonic_measure, solve_dirichlet

    law = _law_of(params)
    R = params["R"]
    e = env_mod.sample_environment(
        law, env_mod.LatticeBox.centered(R + 2, law.d), params["seed"]
    )
    dom = discrete_ball(R, d=law.d)
    a = np.asarray(params["linear_a"], dtype=np.float64)
    sol = solve_dirichlet(e, dom, lambda s: float(a @ np.asarray(s)), tol=params["tol"])
    rows = []
    for s, v in zip(dom.interior, sol.u_interior):
        rows.append(tuple(int(c) for c in s) + (float(v),))
    for s, v in zip(dom.boundary, sol.g_boundary):
        rows.append(tuple(int(c) for c in s) + (float(v),))
    rows.sort()
    hm = harmonic_measure(e, dom, [(0,) * law.d], tol=params["tol"])
    path = os.path.join(params["out"], "exit_distribution.csv")
    hm.dump_csv(path)
    return rows, [path]


def _task_homog(params):
    law = _law_of(params)
    R = params["R"]
    e = env_mod.sample_environment(
        law, env_mod.LatticeBox.centered(R + 2, law.d), params["seed"]
    )
    sigma = homog_mod.symmetry_exact_sigma(law)
    if params["f_kind"] == "linear":
        F = homog_mod.sigma_harmonic_polynomial(
            sigma, "linear", a=params["linear_a"]
        )
    else:
        F = homog_mod.sigma_harmonic_polynomial(sigma, "quad")
    res = homog_mod.homogenization_error(e, F, R, tol=params["tol"])
    return [
        (law.name, params["seed"], R, F.kind, res.error, res.residual)
    ], []


def _task_exit_law(params):
    law = _law_of(params)
    R = params["R"]
    e = env_mod.sample_environment(
        law, env_mod.LatticeBox.centered(R + 2, law.d), params["seed"]
    )
    sigma = homog_mod.symmetry_exact_sigma(law)
    part = homog_mod.SpherePartition.with_mesh(law.d, params["mesh"])
    res = homog_mod.exit_law_discrepancy(
        e,
        R,
        r=params["r_frac"],
        targets=part,
        sigma=sigma,
        wos_samples=params["wos_samples"],
        seed=params["seed"],
    )
    return [
        (cell, quenched, continuum, absdiff, stderr)
        for cell, quenched, continuum, stderr, absdiff in res.table
    ], []


def _task_sinks(params):
    law = _law_of(params)
    sizes = params["sizes"]
    nmax = max(sizes)
    e = env_mod.sample_environment(
        law, env_mod.LatticeBox.centered(nmax, law.d), params["seed"]
    )
    rows = []
    extra = []
    for n in sizes:
        g = perc_mod.build_digraph(e, env_mod.LatticeBox.centered(n, law.d))
        dec = perc_mod.find_sinks(g)
        density = float(dec.sink_mask().mean())
        frac = perc_mod._subcube_hit_fraction(dec, n, 10)
        rows.append((params["seed"], n, dec.sink_count, density, frac))
        if params["dump_sites"] and params["task_index"] == 0 and n == sizes[-1]:
            path = os.path.join(params["out"], "sink_sites.csv")
            site_rows = []
            mask = dec.sink_mask()
            for s, m, lab in zip(g.sites, mask, dec.labels):
                site_rows.append(tuple(int(c) for c in s) + (int(lab), int(m)))
            write_csv(
                path,
                [f"x{i}" for i in range(law.d)] + ["scc", "sink"],
                site_rows,
            )
            extra.append(path)
    return rows, extra


def _task_stairs(params):
    law = _law_of(params)
    if law.d != 2:
        raise ConfigError("d", "stairs need d = 2")
    e = env_mod.sample_environment(
        law, env_mod.LatticeBox.centered(160, 2), params["seed"]
    )
    st = perc_mod.es_stair(e)
    identity = (st.l_es == 2 * st.v0_es + sum(st.h_es)) and (
        st.l_es == len(st.es_path) - 1
    )
    extra = []
    if params["task_index"] == 0:
        path = os.path.join(params["out"], "stair_path.csv")
        rows = [("ES", x, y) for x, y in st.es_path]
        rows += [("EN", x, y) for x, y in st.en_path]
        rows += [("BUBBLE", x, y) for x, y in sorted(st.bubble)]
        write_csv(path, ["path", "x", "y"], rows)
        extra.append(path)
    return [
        (
            params["seed"],
            st.v0_es,
            st.l_es,
            st.l_en,
            st.l_e,
            int(st.e_is_en),
            len(st.bubble),
            int(identity),
        )
    ], extra


def _task_holes(params):
    law = _law_of(params)
    n = params["n"]
    e = env_mod.sample_environment(
        law, env_mod.LatticeBox((0,) * law.d, (n - 1,) * law.d), params["seed"]
    )
    rep = perc_mod.holes_are_rectangles(e, seed=params["seed"])
    rects = rep.n_interior_holes - len(rep.counterexamples)
    return [
        (params["seed"], n, rep.n_interior_holes, rects, rep.max_hole_area)
    ], []


def _task_dist_tail(params):
    law = _law_of(params)
    counts = perc_mod.distance_tail_counts(
        law, params["buckets"], tuple(params["c_values"]), params["seed"]
    )
    return [
        (b, c, e, t) for (b, c), (e, t) in sorted(counts.items())
    ], []


def _task_harnack(params):
    import warnings

    law = _law_of(params)
    R = params["R"]
    e = env_mod.sample_environment(
        law, env_mod.LatticeBox.centered(2 * R + 2, law.d), params["seed"]
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        meas = harnack_mod.harnack_ratio(e, R, tol=params["tol"])
    return [
        (
            law.name,
            params["seed"],
            R,
            meas.ratio,
            meas.classical_reference,
            meas.zero_infimum_frac,
        )
    ], []


def _task_osc(params):
    law = _law_of(params)
    R = params["R"]
    psi = params["psi"]
    e = env_mod.sample_environment(
        law, env_mod.LatticeBox.centered(int(psi * R) + 2, law.d), params["seed"]
    )
    meas = harnack_mod.oscillation_constant(e, R, psi=psi, tol=params["tol"])
    return [(law.name, params["seed"], R, psi, meas.upsilon)], []


def _task_abp(params):
    from .dirichlet import box_sites, check_max_principle

    law = _law_of(params)
    n = params["n"]
    half = n // 2
    k = params["k"]
    e = env_mod.sample_environment(
        law, env_mod.LatticeBox.centered(half + k + params["horizon"] + 2, law.d), params["seed"]
    )
    rng = np.random.default_rng(params["seed"] + 131)
    A = rng.uniform(-1, 1, size=(law.d, law.d))
    A = (A + A.T) / 2
    b = rng.uniform(-1, 1, size=law.d)

    def h(site):
        x = np.asarray(site, dtype=np.float64)
        return float(x @ A @ x + b @ x)

    Q = box_sites((-half,) * law.d, (half,) * law.d)
    chk = check_max_principle(
        e, h, Q, k=k, kappa=params["kappa"], seed=params["seed"]
    )
    return [
        (
            params["seed"],
            chk.N,
            chk.k,
            chk.kappa,
            chk.lhs,
            chk.rhs,
            int(chk.holds),
            int(chk.applicable),
        )
    ], []


_TASKS = {
    "gen-env": (_task_gen_env, ["seed", "path"], "env_files.csv"),
    "t1": (_task_t1, ["n", "p_hat", "stderr", "censored_frac"], "t1_tail.csv"),
    "sigma": (_task_sigma, ["axis", "sigma_hat", "stderr", "wrap"], "sigma.csv"),
    "dirichlet": (_task_dirichlet, None, "solution.csv"),
    "homog": (
        _task_homog,
        ["law", "seed", "R", "F_kind", "err", "residual"],
        "homog_error.csv",
    ),
    "exit-law": (
        _task_exit_law,
        ["cell_index", "quenched", "continuum", "abs_diff", "stderr"],
        "exit_law.csv",
    ),
    "sinks": (
        _task_sinks,
        ["seed", "n", "A_n", "sink_density", "subcube_hit_frac"],
        "sinks.csv",
    ),
    "stairs": (
        _task_stairs,
        ["seed", "V0", "L_es", "L_en", "L_e", "e_is_en", "bubble_size", "identity_ok"],
        "stairs.csv",
    ),
    "holes": (
        _task_holes,
        ["seed", "n", "holes", "rectangles", "max_hole_area"],
        "holes.csv",
    ),
    "dist-tail": (
        _task_dist_tail,
        ["bucket", "C", "p_hat", "ci_lo", "ci_hi"],
        "dist_tail.csv",
    ),
    "harnack": (
        _task_harnack,
        ["law", "seed", "R", "ratio", "classical_ref", "zero_inf_frac"],
        "harnack.csv",
    ),
    "osc": (_task_osc, ["law", "seed", "R", "psi", "upsilon_hat"], "osc.csv"),
    "abp-check": (
        _task_abp,
        ["seed", "N", "k", "kappa", "lhs", "rhs", "holds", "applicable"],
        "abp.csv",
    ),
}


def _make_tasks(cfg):
    """Pre-assigned (task_index, params) pairs; seeds fixed up front."""
    kind = cfg.kind
    n_seeds = int(cfg["seeds"])
    seed0 = int(cfg["seed0"])
    base = {
        "law": cfg.raw["law"],
        "d": int(cfg.raw["d"]),
        "out": cfg.out,
        "tol": float(cfg.raw["tol"]),
        "samples": int(cfg.raw["samples"]),
        "horizon": int(cfg.raw["horizon"]),
        "radius": int(cfg.raw["radius"]),
        "run_length": int(cfg.raw["run_length"]),
        "burn_in": int(cfg.raw["burn_in"]),
        "psi": float(cfg.raw["psi"]),
        "mesh": float(cfg.raw["mesh"]),
        "r_frac": float(cfg.raw["r_frac"]),
        "wos_samples": int(cfg.raw["wos_samples"]),
        "k": int(cfg.raw["k"]),
        "kappa": float(cfg.raw["kappa"]),
        "n": int(cfg.raw["n"]),
        "f_kind": str(cfg.raw["f_kind"]),
        "dump_sites": int(cfg.raw["dump_sites"]),
        "linear_a": cfg.float_list("linear_a"),
        "sizes": cfg.int_list("sizes"),
        "buckets": cfg.int_list("buckets"),
        "c_values": cfg.float_list("c_values"),
    }
    tasks = []
    if kind in ("homog", "exit-law", "harnack", "osc"):
        radii = cfg.int_list("radii")
        for s in range(n_seeds):
            for R in radii:
                params = dict(base, seed=seed0 + s, R=R, task_index=len(tasks))
                tasks.append(params)
    elif kind == "dirichlet":
        params = dict(base, seed=seed0, R=cfg.int_list("radii")[0], task_index=0)
        tasks.append(params)
    else:
        for s in range(n_seeds):
            params = dict(base, seed=seed0 + s, task_index=len(tasks))
            tasks.append(params)
    return tasks


def _call_task(kind, params):
    fn = _TASKS[kind][0]
    return fn(params)


def _aggregate_t1(results):
    """Pool per-seed exceedance counts into one tail curve."""
    import collections

    by_n = collections.defaultdict(lambda: [0, 0, 0.0, 0])
    for rows, _ in results:
        for n, exceed, total, cens in rows:
            acc = by_n[n]
            acc[0] += exceed
            acc[1] += total
            acc[2] += cens * total
            acc[3] += total
    out = []
    for n in sorted(by_n):
        exceed, total, cw, tw = by_n[n]
        p = exceed / total
        se = (max(p * (1 - p), 1e-300) / total) ** 0.5
        out.append((n, p, se, cw / tw))
    return out


def _aggregate_sigma(results):
    import collections

    by_axis = collections.defaultdict(list)
    wrap = 1
    for rows, _ in results:
        for axis, s, se, w in rows:
            by_axis[axis].append(s)
            wrap = w
    out = []
    for axis in sorted(by_axis):
        vals = np.array(by_axis[axis])
        se = vals.std(ddof=1) / len(vals) ** 0.5 if len(vals) > 1 else 0.0
        out.append((axis, float(vals.mean()), float(se), wrap))
    return out


def _aggregate_dist_tail(results, cfg):
    buckets = cfg.int_list("buckets")
    c_values = tuple(cfg.float_list("c_values"))
    counts = {(b, c): [0, 0] for b in buckets for c in c_values}
    for rows, _ in results:
        for b, c, e, t in rows:
            counts[(b, c)][0] += e
            counts[(b, c)][1] += t
    out = []
    for b in buckets:
        for c in c_values:
            e, t = counts[(b, c)]
            if t == 0:
                continue
            lo, hi = perc_mod.wilson_ci(e, t)
            out.append((b, c, e / t, lo, hi))
    return out


def run_experiment(cfg):
    """Dispatch tasks, write the kind's CSV outputs and manifest.json."""
    kind = cfg.kind
    fn, header, csv_name = _TASKS[kind]
    tasks = _make_tasks(cfg)
    t0 = time.time()
    results = [None] * len(tasks)
    errors = [None] * len(tasks)
    jobs = int(cfg.raw["jobs"])
    if jobs <= 1 or len(tasks) == 1:
        for i, params in enumerate(tasks):
            try:
                results[i] = _call_task(kind, params)
            except Exception as e:  # per-task failures become partial status
                errors[i] = f"{type(e).__name__}: {e}"
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            futs = {ex.submit(_call_task, kind, p): i for i, p in enumerate(tasks)}
            for fut, i in futs.items():
                try:
                    results[i] = fut.result()
                except Exception as e:
                    errors[i] = f"{type(e).__name__}: {e}"
    ok_results = [r for r in results if r is not None]
    outputs = []
    if ok_results:
        if kind == "t1":
            rows = _aggregate_t1(ok_results)
        elif kind == "sigma":
            rows = _aggregate_sigma(ok_results)
        elif kind == "dist-tail":
            rows = _aggregate_dist_tail(ok_results, cfg)
        else:
            rows = [row for r in ok_results for row in r[0]]
        if kind == "dirichlet":
            header = [f"x{i}" for i in range(int(cfg.raw["d"]))] + ["value"]
        if kind == "exit-law" and len(ok_results) > 1:
            # one file per (seed, R) task keeps the documented schema
            for params, r in zip(tasks, results):
                if r is None:
                    continue
                path = os.path.join(
                    cfg.out, f"exit_law_{params['seed']}_{params['R']}.csv"
                )
                write_csv(path, header, r[0])
                outputs.append(path)
        else:
            path = os.path.join(cfg.out, csv_name)
            write_csv(path, header, rows)
            outputs.append(path)
        for r in ok_results:
            outputs.extend(r[1])
    n_failed = sum(e is not None for e in errors)
    manifest = {
        "config": {k: str(v) for k, v in sorted(cfg.raw.items())},
        "kind": kind,
        "version": __version__,
        "tasks": [
            {
                "index": i,
                "seed": tasks[i]["seed"],
                "status": "failed" if errors[i] else "ok",
                **({"error": errors[i]} if errors[i] else {}),
            }
            for i in range(len(tasks))
        ],
        "outputs": sorted(os.path.basename(p) for p in outputs),
        "timing": {"wall_seconds": time.time() - t0},
    }
    with open(os.path.join(cfg.out, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return outputs, (2 if n_failed else 0)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="rwre", description="Balanced-environment random walk experiments"
    )
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--config", default=None, help="flat key=value config file")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="master seed (seed0)")
    parser.add_argument("--jobs", type=int, default=None, help="parallel workers")
    args, extra = parser.parse_known_args(argv)
    try:
        raw = parse_config_file(args.config) if args.config else {}
        # --key value overrides
        i = 0
        while i < len(extra):
            tok = extra[i]
            if not tok.startswith("--") or i + 1 >= len(extra):
                raise ConfigError("args", f"expected --key value pairs, got {extra!r}")
            raw[tok[2:].replace("-", "_")] = extra[i + 1]
            i += 2
        if args.seed is not None:
            raw["seed0"] = args.seed
        if args.jobs is not None:
            raw["jobs"] = args.jobs
        cfg = build_config(args.kind, args.out, raw)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    outputs, code = run_experiment(cfg)
    for p in outputs:
        print(p)
    return code


if __name__ == "__main__":
    sys.exit(main())
