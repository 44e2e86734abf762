"""Command-line experiment runner.

Every subcommand prints one row per summary statistic (CSV by default,
JSON lines with ``--format jsonl``).  Rows echo the tool version, the master
seed and all parameters, and contain no timing data, so reruns with the same
seed are byte-identical.  Parameters may also come from a JSON document
(``--config``); explicit flags take precedence.

Exit status: 0 ok, 2 bad configuration, 3 output failure, 4 a verdict failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from typing import Any, Callable

import numpy as np

from . import __version__, bounds, lines, measure, roads
from .montecarlo import (
    ExperimentResult,
    ks_two_sample,
    proportion_estimate,
    replica_rng,
    two_sample_threshold,
)
from .tree import parse_vertex

log = logging.getLogger("treelines")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_VERDICT = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, dict[str, Any]] = {
    "measure": {"target": "@:1", "samples": 10**6, "sigmas": 4.0},
    "percolation": {"alpha": 2.0, "R": 8, "reps": 10**5, "engine": "lines", "grid": None, "tol": 0.05},
    "greedy": {"beta": 3.0, "N": 100, "reps": 10**4, "mode": "fast", "R": 12, "explosion": False},
    "ball": {"beta": 3.0, "t": None, "reps": 10**4, "R": 8, "R_max": 16, "per_replica": False},
    "bddp": {"n": 4, "t": 0.5, "beta": 2.5, "reps": 10**6},
    "bounds": {"beta": 4.0, "n": "3", "t": "1"},
    "mecke": {"beta": 2.0, "c": 1.0, "reps": 10**4},
}
COMMON = {"seed": 0, "format": "csv", "out": None}


def _require(ok: bool, msg: str) -> None:
    if not ok:
        raise ConfigError(msg)


def _int_list(v) -> list[int]:
    if isinstance(v, (list, tuple)):
        return [int(x) for x in v]
    return [int(x) for x in str(v).split(",") if x.strip()]


def _float_list(v) -> list[float]:
    if isinstance(v, (list, tuple)):
        return [float(x) for x in v]
    return [float(x) for x in str(v).split(",") if x.strip()]


def _verdict(ok: bool | None) -> str | None:
    return None if ok is None else ("pass" if ok else "fail")


# subcommands: each takes the merged parameter dict and returns rows


def run_measure(p: dict) -> list[dict]:
    try:
        xs, ys = str(p["target"]).split(":")
        x, y = parse_vertex(xs), parse_vertex(ys)
    except ValueError as exc:
        raise ConfigError(f"bad target {p['target']!r}: expected 'x:y' labels") from exc
    _require(x != y, "target vertices must differ")
    _require(int(p["samples"]) >= 2, "samples must be at least 2")
    est = measure.estimate_mu_unnormalized((x, y), int(p["samples"]), int(p["seed"]))
    oracle = measure.boundary_oracle(x, y)
    res = ExperimentResult(
        "mu_unnormalized",
        est.value,
        est.stderr,
        float(oracle),
        params={"target": p["target"], "samples": int(p["samples"])},
        extra={"normalized": est.value * 9 / 8, "mu_pair": float(measure.mu_pair(x, y))},
        sigmas=float(p["sigmas"]),
    )
    return [res.row()]


def run_percolation(p: dict) -> list[dict]:
    R, reps = int(p["R"]), int(p["reps"])
    _require(R >= 1 and reps >= 1, "R and reps must be positive")
    _require(p["engine"] in lines.ENGINES, f"engine must be one of {sorted(lines.ENGINES)}")
    if p["grid"] is not None:
        grid = _float_list(p["grid"])
        _require(len(grid) >= 2 and min(grid) > 0, "grid needs at least two positive intensities")
        try:
            br = lines.estimate_critical_alpha(R, reps, grid, int(p["seed"]), float(p["tol"]), engine=p["engine"])
        except lines.NoCrossingError as exc:
            raise ConfigError(str(exc)) from exc
        base = {"R": R, "reps": reps, "engine": p["engine"], "grid": ",".join(map(repr, grid))}
        rows = [
            {"statistic": "grid_point", **base, "alpha": a, "estimate": v, "stderr": s, "oracle": br.reference}
            for a, v, s in br.evaluations
        ]
        rows.append(
            {
                "statistic": "critical_bracket",
                **base,
                "low": br.low,
                "high": br.high,
                "width": br.width,
                "oracle": lines.ALPHA_CRITICAL,
                "low_confidence": br.low_confidence,
                "verdict": _verdict(br.contains(lines.ALPHA_CRITICAL)),
            }
        )
        return rows
    alpha = float(p["alpha"])
    _require(alpha > 0, "alpha must be positive")
    return [r.row() for r in lines.percolation_experiment(alpha, R, reps, int(p["seed"]), engine=p["engine"])]


def run_greedy(p: dict) -> list[dict]:
    beta, N, reps, seed = float(p["beta"]), int(p["N"]), int(p["reps"]), int(p["seed"])
    _require(beta > 1, "beta must exceed 1")
    _require(N >= 1 and reps >= 2, "need N >= 1 and reps >= 2")
    base = {"beta": beta, "N": N, "reps": reps}
    if p["explosion"]:
        rep = roads.explosion_diagnostic(beta, N, reps, seed)
        return [r.row() for r in rep.results]
    if p["mode"] == "geometric":
        R = int(p["R"])
        _require(1 <= R <= 20, "R must be in 1..20")
        geo = np.array(
            [roads.greedy_geometric(roads.edge_speeds_layered(beta, R, replica_rng(seed, 8, i)), 1).increments[0] for i in range(reps)]
        )
        fast = np.array([roads.greedy_fast(beta, 1, replica_rng(seed, 4, i)).increments[0] for i in range(reps)])
        d = ks_two_sample(geo, fast)
        thr = two_sample_threshold(reps, reps)
        return [{"statistic": "ks_first_increment", **base, "R": R, "estimate": d, "threshold": thr, "verdict": _verdict(d < thr)}]
    _require(p["mode"] == "fast", "mode must be fast or geometric")
    traces = roads.greedy_fast_batch(beta, N, reps, seed)
    ns = [n for n in (1, 10, 100) if n <= N]
    stats = roads.y_statistics(traces, ns)
    rows = []
    for n, s in stats.items():
        rows.append({"statistic": f"ks_Y{n}", **base, "estimate": s.ks_exact, "threshold": s.dkw, "verdict": _verdict(s.ks_exact < s.dkw)})
        r = ExperimentResult(f"mean_Y{n}", s.mean, s.stderr, s.reference_mean, params=base)
        rows.append(r.row())
    if N >= 100:
        # Y_100 from an independent batch: Y_10 and Y_100 of one trace share W_1..W_10
        other = roads.y_statistics(roads.greedy_fast_batch(beta, 100, reps, seed, stage=11), [100])[100]
        d = ks_two_sample(stats[10].samples, other.samples)
        thr = two_sample_threshold(reps, reps)
        rows.append({"statistic": "ks_Y10_vs_Y100", **base, "estimate": d, "threshold": thr, "verdict": _verdict(d < thr)})
    w = roads.sample_w(beta, reps, replica_rng(seed, 10, 0))
    est = proportion_estimate(int((w > 1).sum()), reps)
    rows.append(ExperimentResult("P(W>1)", est.value, est.stderr, math.exp(-0.25), params=base).row())
    return rows


def run_ball(p: dict) -> list[dict]:
    beta = float(p["beta"])
    _require(beta > 1, "beta must exceed 1")
    t = p["t"]
    if t is None:
        _require(beta > 2, "give -t explicitly when beta <= 2")
        t = bounds.nonexplosion_threshold(beta)
    t, reps, R, R_max = float(t), int(p["reps"]), int(p["R"]), int(p["R_max"])
    _require(t > 0 and reps >= 2, "need t > 0 and reps >= 2")
    _require(1 <= R <= R_max <= 24, "need 1 <= R <= R_max <= 24")
    res, per = roads.distance_ball_experiment(beta, t, reps, int(p["seed"]), R, R_max)
    rows = []
    if p["per_replica"]:
        rows = [
            {"statistic": "ball_size", "replica": i, "beta": beta, "t": t, "estimate": size, "radius": rad, "censored": int(cen)}
            for i, (size, rad, cen) in enumerate(per)
        ]
    return rows + [res.row()]


def run_bddp(p: dict) -> list[dict]:
    n, t, beta, reps = int(p["n"]), float(p["t"]), float(p["beta"]), int(p["reps"])
    _require(n >= 1 and t > 0 and beta > 1 and reps >= 2, "need n >= 1, t > 0, beta > 1, reps >= 2")
    return [roads.bddp_monte_carlo(n, t, beta, reps, int(p["seed"])).row()]


def run_bounds(p: dict) -> list[dict]:
    beta = float(p["beta"])
    try:
        ns, ts = _int_list(p["n"]), _float_list(p["t"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _require(beta > 1 and ns and ts, "need beta > 1 and at least one n and t")
    _require(min(ns) >= 1 and min(ts) > 0, "need n >= 1 and t > 0")
    rows = [{"statistic": "bddp_bounds", **bounds.bddp_bounds(n, t, beta).row()} for n in ns for t in ts]
    if beta > 2:
        rows.append({"statistic": "nonexplosion_threshold", "beta": beta, "estimate": bounds.nonexplosion_threshold(beta)})
    return rows


def run_mecke(p: dict) -> list[dict]:
    beta, c, reps = float(p["beta"]), float(p["c"]), int(p["reps"])
    _require(beta > 1 and c > 0 and reps >= 2, "need beta > 1, c > 0, reps >= 2")
    return [roads.mecke_identity_check(beta, c, reps, int(p["seed"])).row()]


RUNNERS: dict[str, Callable[[dict], list[dict]]] = {
    "measure": run_measure,
    "percolation": run_percolation,
    "greedy": run_greedy,
    "ball": run_ball,
    "bddp": run_bddp,
    "bounds": run_bounds,
    "mecke": run_mecke,
}


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=S, help="master seed (default 0)")
    common.add_argument("--out", default=S, help="output file (default stdout)")
    common.add_argument("--format", choices=["csv", "jsonl"], default=S)
    common.add_argument("--config", help="JSON file of parameters; flags override it")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="treelines", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"treelines {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    m = sub.add_parser("measure", parents=[common], help="boundary estimator against the exact pair measure")
    m.add_argument("--target", default=S, help="pair of labels 'x:y', root is '@'")
    m.add_argument("--samples", type=int, default=S)
    m.add_argument("--sigmas", type=float, default=S)

    pc = sub.add_parser("percolation", parents=[common], help="vacant-set survival or critical bracket")
    pc.add_argument("--alpha", type=float, default=S)
    pc.add_argument("-R", type=int, default=S)
    pc.add_argument("--reps", type=int, default=S)
    pc.add_argument("--engine", choices=sorted(lines.ENGINES), default=S)
    pc.add_argument("--grid", default=S, help="comma-separated intensities; switches to bracket search")
    pc.add_argument("--tol", type=float, default=S)

    g = sub.add_parser("greedy", parents=[common], help="greedy-process laws and explosion signatures")
    g.add_argument("--beta", type=float, default=S)
    g.add_argument("-N", type=int, default=S)
    g.add_argument("--reps", type=int, default=S)
    g.add_argument("--mode", choices=["fast", "geometric"], default=S)
    g.add_argument("-R", type=int, default=S, help="field radius for --mode geometric")
    g.add_argument("--explosion", action="store_true", default=S)

    b = sub.add_parser("ball", parents=[common], help="mean size of driving-distance balls")
    b.add_argument("--beta", type=float, default=S)
    b.add_argument("-t", type=float, default=S, help="default: non-explosion threshold")
    b.add_argument("--reps", type=int, default=S)
    b.add_argument("-R", type=int, default=S)
    b.add_argument("--R-max", dest="R_max", type=int, default=S)
    b.add_argument("--per-replica", dest="per_replica", action="store_true", default=S)

    d = sub.add_parser("bddp", parents=[common], help="P(T(root, 1_n) <= t) against its bounds")
    d.add_argument("-n", type=int, default=S)
    d.add_argument("-t", type=float, default=S)
    d.add_argument("--beta", type=float, default=S)
    d.add_argument("--reps", type=int, default=S)

    bd = sub.add_parser("bounds", parents=[common], help="tables of the analytic bounds")
    bd.add_argument("--beta", type=float, default=S)
    bd.add_argument("-n", default=S, help="path length(s), comma-separated")
    bd.add_argument("-t", default=S, help="time budget(s), comma-separated")

    mk = sub.add_parser("mecke", parents=[common], help="law of the fastest road through the root")
    mk.add_argument("--beta", type=float, default=S)
    mk.add_argument("-c", type=float, default=S)
    mk.add_argument("--reps", type=int, default=S)
    return ap


def resolve(args: argparse.Namespace) -> dict:
    """Defaults, then the JSON config, then explicit flags."""
    given = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    params = {**COMMON, **DEFAULTS[args.command]}
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(cfg) - set(params)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        params.update(cfg)
    params.update(given)
    if params["format"] not in ("csv", "jsonl"):
        raise ConfigError("format must be csv or jsonl")
    return params


def stamp(rows: list[dict], command: str, params: dict) -> list[dict]:
    head = {"tool_version": __version__, "command": command, "seed": int(params["seed"])}
    out = []
    for r in rows:
        row = dict(head)
        for k, v in params.items():
            if k not in COMMON and k not in r:
                row[k] = v
        row.update(r)
        out.append(row)
    return out


def render(rows: list[dict], fmt: str) -> str:
    if fmt == "jsonl":
        return "".join(json.dumps(r) + "\n" for r in rows)
    header: list[str] = []
    for r in rows:
        header.extend(k for k in r if k not in header)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=header, restval="", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if v is None else v) for k, v in r.items()})
    return buf.getvalue()


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        params = resolve(args)
        start = time.perf_counter()
        rows = stamp(RUNNERS[args.command](params), args.command, params)
    except ConfigError as exc:
        print(f"treelines: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("%s finished in %.2fs", args.command, time.perf_counter() - start)
    text = render(rows, params["format"])
    try:
        if params["out"] is None:
            sys.stdout.write(text)
        else:
            with open(params["out"], "w", newline="") as fh:
                fh.write(text)
    except OSError as exc:
        print(f"treelines: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    if any(r.get("verdict") == "fail" for r in rows):
        return EXIT_VERDICT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
