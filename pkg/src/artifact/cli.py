"""Command-line entry point: ``python -m artifact <subcommand>``.

Every subcommand writes CSV/JSON files under ``--out-dir`` and prints a short
summary. Exit codes: 0 success, 1 computation error, 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import cocycle, maps, preimage_stats, tms
from .billiard import geometry, orbits
from .errors import ArtifactError, ConfigError, HypothesisViolated
from .io import emit_plot_data, load_toml, split_config, write_csv, write_report

EXPERIMENT_KEYS = {
    "experiment": {"x", "v", "direction_angle", "s", "chi_bar", "N_list", "start"},
}
ORBIT_KEYS = {"orbits": {"max_gap", "max_period"}}


# ---------------------------------------------------------------- config helpers

def _load_map(path):
    cfg = load_toml(path)
    sec, params = split_config(cfg, "map", EXPERIMENT_KEYS)
    return maps.map_from_config(sec), sec, params


def _load_table(path):
    cfg = load_toml(path)
    sec, params = split_config(cfg, "table", ORBIT_KEYS)
    return geometry.table_from_config(sec), sec, params


def _pick(flag, params, key, default):
    if flag is not None:
        return flag
    return params.get(key, default)


def _positive(name, value):
    if value is None or value <= 0:
        raise ConfigError(f"{name} must be positive")
    return value


def _vector(v, name):
    a = np.asarray(v, dtype=float)
    if a.shape != (2,) or not np.all(np.isfinite(a)):
        raise ConfigError(f"{name} must be a pair of finite numbers")
    return a


# ---------------------------------------------------------------- subcommands

def cmd_lyapunov(args, out):
    if (args.map is None) == (args.table is None):
        raise ConfigError("give exactly one of --map or --table")
    rng = np.random.default_rng(args.seed)
    steps = _positive("--steps", args.steps)
    if args.map:
        system, sec, params = _load_map(args.map)
        default = (0.1, 0.3) if isinstance(system, maps.VianaMap) else (0.1234, 0.5678)
        start = tuple(_vector(_pick(None, params, "start", default), "start"))
        cfg = {"map": sec, "start": start, "steps": steps}
    else:
        system, sec, params = _load_table(args.table)
        start = geometry.random_state(system, rng)
        cfg = {"table": sec, "steps": steps}
    est = cocycle.lyapunov_qr(system, start, steps, rng)
    write_csv(out / "exponents.csv", ["index", "exponent", "ci_halfwidth"],
              [(i, e, h) for i, (e, h) in enumerate(zip(est.exponents, est.ci_halfwidths))])
    res = {"exponents": est.exponents, "ci_halfwidths": est.ci_halfwidths, "sum": float(est.exponents.sum())}
    return cfg, res, [], f"exponents {np.array2string(est.exponents, precision=6)} +- {est.ci_halfwidth:.2g}"


def cmd_preimage_condition(args, out):
    m, sec, params = _load_map(args.map)
    N, grid, nd = args.N, args.grid, args.directions
    if N < 0 or grid < 1 or nd < 1:
        raise ConfigError("--N must be >= 0, --grid and --directions >= 1")
    xs, vs = preimage_stats.unit_grid(grid), preimage_stats.direction_fan(nd)
    rows = []
    if N > 0:
        for x in xs:
            vals = preimage_stats.tree_functional(preimage_stats.preimage_tree(m, x, N), vs)
            rows.extend((x[0], x[1], math.atan2(v[1], v[0]), N, I) for v, I in zip(vs, vals))
    est = preimage_stats.c_lower_estimate(m, xs, vs, N)
    write_csv(out / "condition.csv", ["x", "y", "v_angle", "N", "I"], rows)
    res = {"c_sample_inf": est.value, "argmin_x": est.argmin_x, "argmin_v": est.argmin_v, "N": N,
           "note": "minimum over a finite sample; an estimate, not a certified bound"}
    cfg = {"map": sec, "N": N, "grid": grid, "directions": nd}
    return cfg, res, [], f"C(f) sample inf at N={N}: {est.value:.6f}"


def cmd_angle_tail(args, out):
    m, sec, params = _load_map(args.map)
    x = _vector(_pick(None, params, "x", (0.1, 0.7)), "x")
    ang = float(_pick(args.direction_angle, params, "direction_angle", 2.0))
    E = np.array([math.cos(ang), math.sin(ang)])
    M, depth = args.samples, args.depth
    eta = np.geomspace(1e-4, math.pi / 2, args.n_eta)
    fit = preimage_stats.angle_tail_experiment(m, x, E, M, depth, eta, seed=args.seed, workers=args.workers)
    write_csv(out / "angle_tail.csv", ["eta", "cdf"], zip(fit.eta_grid, fit.empirical_cdf))
    emit_plot_data(out / "angle_tail_loglog.txt", ["log_eta", "log_cdf"], fit.plot_rows())
    res = {"beta_hat": fit.beta_hat, "A_hat": fit.A_hat, "beta_ci95": fit.ci, "samples": M}
    cfg = {"map": sec, "x": x, "direction_angle": ang, "samples": M, "depth": depth, "n_eta": args.n_eta}
    return cfg, res, [], f"beta_hat {fit.beta_hat:.4f}, 95% CI ({fit.ci[0]:.4f}, {fit.ci[1]:.4f})"


def _moment_params(args, params):
    x = _vector(_pick(None, params, "x", (0.1, 0.7)), "x")
    v = _vector(_pick(None, params, "v", (1.0, 0.0)), "v")
    s = float(_pick(args.s, params, "s", 0.25))
    return x, v, s


def cmd_moment_check(args, out):
    m, sec, params = _load_map(args.map)
    x, v, s = _moment_params(args, params)
    Ns = [int(n) for n in (args.N_list.split(",") if args.N_list else params.get("N_list", [2, 3, 4, 5, 6]))]
    tab = preimage_stats.moment_bound_check(m, x, v, s, Ns)
    write_csv(out / "moments.csv", ["N", "moment"], zip(tab.N, tab.moments))
    res = {"chi_hat": tab.chi_hat, "monotone": tab.monotone, "moments": tab.moments}
    cfg = {"map": sec, "x": x, "v": v, "s": s, "N_list": Ns}
    return cfg, res, [], f"chi_hat {tab.chi_hat:.5f}, monotone {tab.monotone}"


def cmd_hyperbolic_times(args, out):
    m, sec, params = _load_map(args.map)
    x, v, s = _moment_params(args, params)
    chi_bar = _pick(args.chi_bar, params, "chi_bar", None)
    warn = []
    if chi_bar is None:
        chi_hat = preimage_stats.moment_bound_check(m, x, v, s, [2, 3, 4, 5, 6]).chi_hat
        chi_bar = chi_hat / 2
        warn.append(f"chi_bar not given; using half the fitted moment rate {chi_hat:.6g}")
    ht = preimage_stats.hyperbolic_time_stats(m, x, v, float(chi_bar), s, args.samples, args.depth,
                                              seed=args.seed, workers=args.workers)
    write_csv(out / "n0_histogram.csv", ["n0", "count"], zip(range(1, args.depth + 2), ht.histogram))
    emit_plot_data(out / "n0_tail.txt", ["n", "P(n0>n)"], zip(range(args.depth + 1), ht.tail_frequency))
    if ht.censored:
        warn.append(f"{ht.censored} samples censored at depth {args.depth}")
    res = {"chi_bar": chi_bar, "censored": ht.censored, "tail_slope": ht.tail_slope,
           "tail_slope_ci95": ht.tail_slope_ci, "median_n0": float(np.median(ht.n0)),
           "size_proxy_quantiles": np.quantile(ht.size_proxy, [0.05, 0.5, 0.95]),
           "note": "size proxy exp(-chi_bar n0) is a surrogate for the unstable manifold size"}
    cfg = {"map": sec, "x": x, "v": v, "s": s, "samples": args.samples, "depth": args.depth}
    return cfg, res, warn, f"median n0 {np.median(ht.n0):.0f}, censored {ht.censored}"


def cmd_billiard_run(args, out):
    table, sec, _ = _load_table(args.table)
    rng = np.random.default_rng(args.seed)
    traj = geometry.trajectory(table, geometry.random_state(table, rng), args.steps)
    tau = np.append(traj.tau, np.nan)
    write_csv(out / "trajectory.csv", ["step", "disc", "r", "phi", "tau"],
              ((k, traj.disc[k], traj.r[k], traj.phi[k], tau[k]) for k in range(args.steps)))
    gaps = geometry.angle_gaps(traj)
    logd = np.abs(np.log(np.maximum(gaps, 1e-300)))
    res = {"Lambda": geometry.min_expansion_Lambda(table), "tau_min_observed": traj.tau.min(),
           "tau_max_observed": traj.tau.max(), "mean_abs_log_singularity_proxy": logd.mean(),
           "min_angle_gap": gaps.min()}
    cfg = {"table": sec, "steps": args.steps}
    return cfg, res, [], f"{args.steps} collisions, tau in [{traj.tau.min():.4g}, {traj.tau.max():.4g}]"


def _orbit_rows(db):
    for o in db.orbits:
        pts = ";".join(f"{p.disc}:{p.r!r}:{p.phi!r}" for p in o.points)
        yield str(o.itinerary), o.period, pts, o.expansion_rate, o.min_angle_gap


def _enumerate(args):
    table, sec, params = _load_table(args.table)
    P = int(_pick(args.max_period, params, "max_period", 6))
    gap = _pick(args.max_gap, params, "max_gap", None)
    if P < 2 or P > 8:
        raise ConfigError("--max-period must lie in 2..8")
    db = orbits.enumerate_orbits(table, P, gap)
    return table, sec, P, gap, db


def cmd_billiard_orbits(args, out):
    table, sec, P, gap, db = _enumerate(args)
    header = ["itinerary", "p", "points", "expansion_rate", "min_angle_gap"]
    write_csv(out / "orbits.csv", header, _orbit_rows(db))
    write_csv(out / "failures.csv", ["itinerary", "reason"], sorted(db.failures.items()))
    res = {"n_orbits": len(db.orbits), "n_failures": len(db.failures),
           "by_period": {p: len(v) for p, v in sorted(db.by_period().items())}}
    return {"table": sec, "max_period": P, "max_gap": gap}, res, [], f"{len(db.orbits)} orbits"


def cmd_mme_report(args, out):
    table, sec, P, gap, db = _enumerate(args)
    rep = orbits.mme_criterion_report(table, P, gap, db=db)
    write_csv(out / "orbits.csv", ["itinerary", "p", "expansion_rate", "min_angle_gap"], rep.rows)
    res = {k: v for k, v in rep.__dict__.items() if k != "rows"}
    res["entropy_proxy_note"] = "sup_p (1/p) log #orbits(period <= p): a lower-bound proxy, not h_top"
    return ({"table": sec, "max_period": P, "max_gap": gap}, res, [],
            f"{len(rep.rows)} orbits, spread {rep.spread:.3g}: {rep.verdict}")


def cmd_pressure_check(args, out):
    table, sec, _ = _load_table(args.table)
    pc = orbits.pressure_zero_check(table, args.steps, np.random.default_rng(args.seed), args.direction)
    res = dict(pc.__dict__)
    return {"table": sec, "steps": args.steps, "direction": args.direction}, res, [], f"residual {pc.residual:.3g}"


def cmd_pliss(args, out):
    try:
        seq = np.loadtxt(args.input, ndmin=1)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read sequence: {exc}") from None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", HypothesisViolated)
        try:
            res = cocycle.pliss_times(seq, args.alpha1, args.alpha2, args.epsilon)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    warn = [str(w.message) for w in caught if issubclass(w.category, HypothesisViolated)]
    write_csv(out / "pliss_times.csv", ["index"], ((t,) for t in res.times))
    body = {"count": len(res.times), "length": len(seq), "density": res.density, "delta_bound": res.delta_bound,
            "hypothesis_holds": res.hypothesis_holds}
    cfg = {"input": str(args.input), "alpha1": args.alpha1, "alpha2": args.alpha2, "epsilon": args.epsilon}
    return cfg, body, warn, f"{len(res.times)} Pliss times, density {res.density:.4f} (bound {res.delta_bound:.4f})"


def _ladder_graphs(spec: str):
    kind, _, n = spec.partition(":")
    try:
        n = int(n)
    except ValueError:
        raise ConfigError(f"bad ladder spec {spec!r}") from None
    if kind == "renewal":
        return [tms.renewal_graph(L) for L in range(1, n + 1)]
    if kind == "full":
        return [tms.full_shift(k) for k in range(1, n + 1)]
    raise ConfigError(f"unknown ladder family {kind!r}")


def cmd_tms(args, out):
    if (args.graph is None) == (args.ladder is None):
        raise ConfigError("give exactly one of --graph or --ladder")
    if args.ladder:
        hs = tms.entropy_ladder(_ladder_graphs(args.ladder))
        emit_plot_data(out / "ladder.txt", ["level", "entropy"], enumerate(hs, start=1))
        return {"ladder": args.ladder}, {"entropies": hs}, [], f"ladder top entropy {hs[-1]:.10f}"
    g = tms.MarkovGraph.read(args.graph)
    comps = []
    for c in tms.irreducible_components(g):
        per = tms.period(g, c)
        pm = tms.parry_mme(g, c)
        comps.append({"vertices": list(c), "period": per.period, "cyclic_classes": per.classes,
                      "entropy": tms.gurevich_entropy(g, c), "loop_entropy": tms.loop_entropy(g, c),
                      "parry_stationary": pm.stationary, "parry_transitions": pm.transitions,
                      "parry_entropy": pm.entropy})
    write_csv(out / "components.csv", ["component", "size", "period", "entropy"],
              ((i, len(c["vertices"]), c["period"], c["entropy"]) for i, c in enumerate(comps)))
    top = max((c["entropy"] for c in comps), default=0.0)
    return ({"graph": str(args.graph), "n_vertices": g.n_vertices, "n_edges": len(g.edges)},
            {"components": comps}, [], f"{len(comps)} components, top entropy {top:.10f}")


def cmd_validate_acs(args, out):
    if (args.map is None) == (args.matrix is None):
        raise ConfigError("give exactly one of --map or --matrix")
    if args.map:
        sec = split_config(load_toml(args.map), "map", EXPERIMENT_KEYS)[0]
        if "E" not in sec:
            raise ConfigError("map config has no integer matrix E")
        E = sec["E"]
    else:
        try:
            a, b, c, d = (int(t) for t in args.matrix.split(","))
        except ValueError:
            raise ConfigError("--matrix expects four integers 'e11,e12,e21,e22'") from None
        E = [[a, b], [c, d]]
    rep = maps.validate_acs_matrix(E)
    res = dict(rep.__dict__)
    res["all_pass"] = rep.all_pass
    return {"E": E}, res, [], f"all conditions pass: {rep.all_pass}"


COMMANDS = {
    "lyapunov": cmd_lyapunov,
    "preimage-condition": cmd_preimage_condition,
    "angle-tail": cmd_angle_tail,
    "moment-check": cmd_moment_check,
    "hyperbolic-times": cmd_hyperbolic_times,
    "billiard-run": cmd_billiard_run,
    "billiard-orbits": cmd_billiard_orbits,
    "mme-report": cmd_mme_report,
    "pressure-check": cmd_pressure_check,
    "pliss": cmd_pliss,
    "tms": cmd_tms,
    "validate-acs": cmd_validate_acs,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="artifact", description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out-dir", type=Path, default=Path("out"))
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lyapunov")
    p.add_argument("--map")
    p.add_argument("--table")
    p.add_argument("--steps", type=int, default=100_000)

    p = sub.add_parser("preimage-condition")
    p.add_argument("--map", required=True)
    p.add_argument("--N", type=int, default=4)
    p.add_argument("--grid", type=int, default=20)
    p.add_argument("--directions", type=int, default=16)

    p = sub.add_parser("angle-tail")
    p.add_argument("--map", required=True)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--depth", type=int, default=30)
    p.add_argument("--direction-angle", type=float)
    p.add_argument("--n-eta", type=int, default=40)

    for name in ("moment-check", "hyperbolic-times"):
        p = sub.add_parser(name)
        p.add_argument("--map", required=True)
        p.add_argument("--s", type=float)
        if name == "moment-check":
            p.add_argument("--N-list", dest="N_list")
        else:
            p.add_argument("--chi-bar", type=float)
            p.add_argument("--samples", type=int, default=10_000)
            p.add_argument("--depth", type=int, default=30)

    p = sub.add_parser("billiard-run")
    p.add_argument("--table", required=True)
    p.add_argument("--steps", type=int, default=100_000)

    for name in ("billiard-orbits", "mme-report"):
        p = sub.add_parser(name)
        p.add_argument("--table", required=True)
        p.add_argument("--max-period", type=int)
        p.add_argument("--max-gap", type=float)

    p = sub.add_parser("pressure-check")
    p.add_argument("--table", required=True)
    p.add_argument("--steps", type=int, default=1_000_000)
    p.add_argument("--direction", choices=("unstable", "stable"), default="unstable")

    p = sub.add_parser("pliss")
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--alpha1", type=float, required=True)
    p.add_argument("--alpha2", type=float, required=True)
    p.add_argument("--epsilon", type=float, required=True)

    p = sub.add_parser("tms")
    p.add_argument("--graph", type=Path)
    p.add_argument("--ladder", help="'renewal:L' or 'full:K'")

    p = sub.add_parser("validate-acs")
    p.add_argument("--map")
    p.add_argument("--matrix", help="e11,e12,e21,e22")
    return ap


def dispatch(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    out = args.out_dir / args.command
    t0 = time.perf_counter()
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        cfg, result, warns, summary = COMMANDS[args.command](args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ArtifactError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    write_report(out / "report.json", args.command, cfg, args.seed, result, warns)
    (out / "timing.json").write_text(json.dumps({"wall_seconds": time.perf_counter() - t0,
                                                 "workers": args.workers}) + "\n")
    print(f"[{args.command}] {summary}")
    for w in warns:
        print(f"  warning: {w}")
    print(f"  outputs in {out}")
    return 0


def main(argv=None) -> int:
    return dispatch(argv)
