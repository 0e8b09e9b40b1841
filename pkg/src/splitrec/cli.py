"""Command-line front end: ``splitrec <command> [flags]``.

Every command is a pure function of its flags and seed. Outputs embed the
resolved configuration: JSON payloads under ``"config"``, CSV tables as a
leading ``# config: {...}`` comment line, tree files in their header.

Exit codes: 0 on success, 2 for invalid flags, 1 for runtime failures.
"""
from __future__ import annotations

import argparse
import contextlib
import importlib
import io
import json
import math
import os
import sys
from typing import Any, Optional

import numpy as np

from . import constants as K
from .models import Custom, SplitParams, parse_model
from .records import simulate_cuts_edges, simulate_cuts_vertices
from .stable import LimitDistribution
from .stats import ExperimentConfig, TARGETS, depth_clt_check, run_experiment
from .streams import stream
from .tree import generate_tree, write_tree

DEFAULTS: dict[str, Any] = {
    "model": "bst",
    "s": None,
    "s0": None,
    "s1": None,
    "n": 1000,
    "grid": None,
    "reps": 100,
    "seed": None,
    "out": "-",
    "format": "json",
    "threads": None,
    "tol": 1e-9,
    "variant": "both",
    "method": None,
    "emit": "cdf",
    "range": None,
    "points": 201,
    "targets": "records_v",
    "trace": False,
}


class UsageError(Exception):
    pass


# ----------------------------------------------------------------------------
# parsing


def _common(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--model", default=S, help="bst | mary:<m> | trie:<p1,...> | symmetric:<b>")
    p.add_argument("--s", type=int, default=S, help="node capacity (overrides the family default)")
    p.add_argument("--s0", type=int, default=S)
    p.add_argument("--s1", type=int, default=S)
    p.add_argument("--seed", type=int, default=S, help="master seed (env SPLITREC_SEED, else 0)")
    p.add_argument("--out", default=S, help="output path, '-' for stdout")
    p.add_argument("--format", choices=("json", "csv"), default=S)
    p.add_argument("--threads", type=int, default=S, help="worker threads (env SPLITREC_THREADS)")
    p.add_argument("--config", default=S, help="JSON file of flag values; explicit flags win")
    p.add_argument("--tol", type=float, default=S, help="numerical tolerance")


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    ap = argparse.ArgumentParser(prog="splitrec", description="Split trees, records, cuttings and their 1-stable limit.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write one random split tree")
    _common(g)
    g.add_argument("--n", type=int, default=S)

    for name, helptext in (("records", "record counts on random trees"), ("cuts", "cut counts on random trees")):
        c = sub.add_parser(name, help=helptext)
        _common(c)
        c.add_argument("--n", type=int, default=S)
        c.add_argument("--reps", type=int, default=S)
        c.add_argument("--variant", choices=("vertex", "edge", "both"), default=S)
        if name == "cuts":
            c.add_argument("--trace", action="store_true", default=S, help="CSV trace of one cutting run")

    c = sub.add_parser("constants", help="mu, sigma^2, alpha, varsigma, zeta and C")
    _common(c)
    c.add_argument("--grid", default=S, help="comma-separated ball counts for estimated constants")
    c.add_argument("--reps", type=int, default=S)

    c = sub.add_parser("renewal", help="table of U(t), e^-t U(t) and W(t)")
    _common(c)
    c.add_argument("--range", default=S, help="t range a:b")
    c.add_argument("--points", type=int, default=S)
    c.add_argument("--method", choices=("series_analytic", "series_mc"), default=S)
    c.add_argument("--reps", type=int, default=S)

    c = sub.add_parser("limit", help="CDF/PDF table or draws of the limit law W")
    _common(c)
    c.add_argument("--emit", choices=("cdf", "pdf", "sample"), default=S)
    c.add_argument("--range", default=S, help="x range a:b")
    c.add_argument("--points", type=int, default=S)
    c.add_argument("--n", type=int, default=S, help="number of draws for --emit sample")

    c = sub.add_parser("compare", help="full experiment: samples, statistics, KS vs the limit law")
    _common(c)
    c.add_argument("--grid", default=S)
    c.add_argument("--reps", type=int, default=S)
    c.add_argument("--targets", default=S, help="comma-separated subset of " + ",".join(TARGETS))

    c = sub.add_parser("depths", help="last-ball depth diagnostics")
    _common(c)
    c.add_argument("--n", type=int, default=S)
    c.add_argument("--reps", type=int, default=S)
    c.add_argument("--method", choices=("spine", "full"), default=S)
    return ap


def resolve(ns: argparse.Namespace) -> dict:
    """Merge defaults < environment < config file < explicit flags."""
    cfg = dict(DEFAULTS)
    env_seed = os.environ.get("SPLITREC_SEED")
    env_threads = os.environ.get("SPLITREC_THREADS")
    try:
        cfg["seed"] = int(env_seed) if env_seed else 0
        cfg["threads"] = int(env_threads) if env_threads else None
    except ValueError as exc:
        raise UsageError(f"bad environment override: {exc}") from None
    flags = vars(ns)
    if "config" in flags:
        try:
            with open(flags["config"]) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read --config: {exc}") from None
        unknown = set(file_cfg) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    cfg.update({k: v for k, v in flags.items() if k != "config"})
    return cfg


def _load_custom(spec: dict) -> SplitParams:
    # {"kind": "custom", "sampler": "module:function", "branch": b, "lattice": false, "s": .., "s0": .., "s1": ..}
    mod, _, fn = spec["sampler"].partition(":")
    sampler = getattr(importlib.import_module(mod), fn)
    moments = None
    if "moments" in spec:
        m, _, f = spec["moments"].partition(":")
        moments = getattr(importlib.import_module(m), f)
    model = Custom(
        branch=int(spec["branch"]), sampler=sampler, moments=moments,
        is_lattice=bool(spec.get("lattice", False)), label=spec.get("label", spec["sampler"]),
    )
    return SplitParams(model, int(spec.get("s", 1)), int(spec.get("s0", 1)), int(spec.get("s1", 0)))


def make_params(cfg: dict) -> SplitParams:
    m = cfg["model"]
    try:
        base = _load_custom(m) if isinstance(m, dict) else parse_model(str(m))
        s = base.s if cfg["s"] is None else cfg["s"]
        s0 = base.s0 if cfg["s0"] is None else cfg["s0"]
        s1 = base.s1 if cfg["s1"] is None else cfg["s1"]
        return SplitParams(base.model, s, s0, s1)
    except (ValueError, KeyError, ImportError, AttributeError) as exc:
        raise UsageError(f"invalid model/params: {exc}") from None


def _grid(text) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(x) for x in text)
    try:
        return tuple(int(x) for x in str(text).split(","))
    except ValueError:
        raise UsageError(f"bad --grid {text!r}") from None


def _range(text) -> tuple[float, float]:
    try:
        a, b = (float(x) for x in str(text).split(":"))
    except ValueError:
        raise UsageError(f"bad --range {text!r}, expected a:b") from None
    if not b > a:
        raise UsageError("--range needs a < b")
    return a, b


def validate_cfg(cfg: dict) -> None:
    for key in ("n", "reps", "points"):
        if cfg[key] is not None and int(cfg[key]) < 1:
            raise UsageError(f"--{key} must be >= 1")
    if cfg["threads"] is not None and cfg["threads"] < 1:
        raise UsageError("--threads must be >= 1")
    if not cfg["tol"] > 0:
        raise UsageError("--tol must be positive")


# ----------------------------------------------------------------------------
# output helpers


def _public(cfg: dict, params: SplitParams, command: str) -> dict:
    out = {"command": command, **params.as_dict()}
    keep = {
        "generate": ("n", "seed"),
        "records": ("n", "reps", "seed", "variant"),
        "cuts": ("n", "reps", "seed", "variant", "trace"),
        "constants": ("grid", "reps", "seed"),
        "renewal": ("range", "points", "method", "tol", "reps", "seed"),
        "limit": ("emit", "range", "points", "n", "tol", "seed"),
        "compare": ("grid", "reps", "seed", "targets"),
        "depths": ("n", "reps", "method", "seed"),
    }[command]
    out.update({k: cfg[k] for k in keep})
    return out


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


@contextlib.contextmanager
def _open_out(path: str):
    if path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _emit_json(cfg: dict, payload: dict) -> None:
    with _open_out(cfg["out"]) as fh:
        fh.write(json.dumps(payload, indent=2, default=_json_default) + "\n")


def _emit_csv(cfg: dict, config: dict, header: list[str], rows) -> None:
    with _open_out(cfg["out"]) as fh:
        fh.write("# config: " + json.dumps(config, default=_json_default, sort_keys=True) + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(x)) if isinstance(x, (float, np.floating)) else str(x) for x in row) + "\n")


# ----------------------------------------------------------------------------
# commands


def cmd_generate(cfg, params):
    tree = generate_tree(params, cfg["n"], cfg["seed"])
    with _open_out(cfg["out"]) as fh:
        write_tree(tree, fh)


def _sample_command(cfg, params, command, v_target, e_target):
    targets = {"vertex": (v_target,), "edge": (e_target,), "both": (v_target, e_target)}[cfg["variant"]]
    conf = _public(cfg, params, command)
    if command == "cuts" and cfg["trace"]:
        rng = stream(cfg["seed"], cfg["n"], 0)
        tree = generate_tree(params, cfg["n"], rng)
        with _open_out(cfg["out"]) as fh:
            fh.write("# config: " + json.dumps(conf, sort_keys=True) + "\n")
            for i, t in enumerate(targets):
                trace = (simulate_cuts_vertices if t == "cuts_v" else simulate_cuts_edges)(tree, rng)
                trace.write_csv(fh, header=i == 0)
        return
    rep = run_experiment(ExperimentConfig(params, (cfg["n"],), cfg["reps"], cfg["seed"], targets, threads=cfg["threads"]))
    _report_out(cfg, conf, rep, timing=False)


def _report_out(cfg, conf, rep, timing):
    if cfg["format"] == "csv":
        buf = io.StringIO()
        rep.write_samples_csv(buf)
        lines = buf.getvalue().splitlines()
        _emit_csv(cfg, conf, lines[0].split(","), (line.split(",") for line in lines[1:]))
        return
    d = rep.to_dict(include_timing=timing)
    d["config"] = {**conf, **d["config"]}
    d["samples"] = {f"{n}:{t}": arr for (n, t), arr in sorted(rep.samples.items())}
    _emit_json(cfg, d)


def cmd_records(cfg, params):
    _sample_command(cfg, params, "records", "records_v", "records_e")


def cmd_cuts(cfg, params):
    _sample_command(cfg, params, "cuts", "cuts_v", "cuts_e")


def cmd_constants(cfg, params):
    grid = _grid(cfg["grid"]) if cfg["grid"] is not None else (1000, 2000, 4000)
    c = K.compute_constants(params, grid, max(cfg["reps"], 2), cfg["seed"])
    conf = _public({**cfg, "grid": list(grid)}, params, "constants")
    payload = json.loads(c.to_json())
    if cfg["format"] == "csv":
        keys = [k for k in payload if k != "provenance"]
        _emit_csv(cfg, conf, keys, [[payload[k] for k in keys]])
    else:
        _emit_json(cfg, {"config": conf, **payload})


def cmd_renewal(cfg, params):
    a, b = _range(cfg["range"] or "0:10")
    if a < 0:
        raise UsageError("renewal range must start at t >= 0")
    model = params.model
    method = cfg["method"] or ("series_analytic" if _has_analytic_law(model) else "series_mc")
    mu = K.best_mu_sigma(model).mu
    ts = np.linspace(a, b, cfg["points"])
    rows = []
    for i, t in enumerate(ts):
        rng = stream(cfg["seed"], i)
        u = K.renewal_U(model, float(t), cfg["tol"], method, reps=cfg["reps"] * 100, rng=rng)
        w = K.renewal_W(model, float(t), cfg["tol"], method, mu=mu, reps=cfg["reps"] * 100, rng=rng)
        rows.append([float(t), u.U, u.U * math.exp(-t), u.K, u.tail_bound, w.W])
    conf = _public({**cfg, "range": f"{a}:{b}", "method": method}, params, "renewal")
    header = ["t", "U", "exp_neg_t_U", "K", "tail_bound", "W"]
    if cfg["format"] == "csv":
        _emit_csv(cfg, conf, header, rows)
    else:
        _emit_json(cfg, {"config": conf, "mu_inv": 1 / mu, "table": [dict(zip(header, r)) for r in rows]})


def _has_analytic_law(model) -> bool:
    from .models import BinarySearchTree, PermutedFixed, Symmetric

    return isinstance(model, (BinarySearchTree, PermutedFixed, Symmetric))


def cmd_limit(cfg, params):
    try:
        dist = LimitDistribution.for_model(params.model)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    conf = _public(cfg, params, "limit")
    conf["distribution"] = dist.to_dict()
    if cfg["emit"] == "sample":
        draws = dist.sample(stream(cfg["seed"], 0), cfg["n"])
        if cfg["format"] == "csv":
            _emit_csv(cfg, conf, ["value"], ([x] for x in draws))
        else:
            _emit_json(cfg, {"config": conf, "values": draws})
        return
    a, b = _range(cfg["range"] or "-20:60")
    xs = np.linspace(a, b, cfg["points"])
    f = dist.cdf if cfg["emit"] == "cdf" else dist.pdf
    vals = np.array([f(float(x), cfg["tol"]) for x in xs])
    if cfg["emit"] == "cdf":
        # quadrature noise is below tol; a running maximum keeps the column monotone
        vals = np.maximum.accumulate(vals)
    if cfg["format"] == "csv":
        _emit_csv(cfg, conf, ["x", cfg["emit"]], zip(xs, vals))
    else:
        _emit_json(cfg, {"config": conf, "x": xs, cfg["emit"]: vals})


def cmd_compare(cfg, params):
    grid = _grid(cfg["grid"]) if cfg["grid"] is not None else (cfg["n"],)
    targets = tuple(t.strip() for t in cfg["targets"].split(",")) if isinstance(cfg["targets"], str) else tuple(cfg["targets"])
    try:
        ec = ExperimentConfig(params, grid, cfg["reps"], cfg["seed"], targets, threads=cfg["threads"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    conf = _public({**cfg, "grid": list(grid), "targets": list(targets)}, params, "compare")
    _report_out(cfg, conf, run_experiment(ec), timing=True)


def cmd_depths(cfg, params):
    method = cfg["method"] or "spine"
    ms = K.best_mu_sigma(params.model)
    conf = _public({**cfg, "method": method}, params, "depths")
    chk = depth_clt_check(params, cfg["n"], cfg["reps"], ms.mu, ms.sigma2, cfg["seed"], method)
    if cfg["format"] == "csv":
        _emit_csv(cfg, conf, ["replicate", "depth"], enumerate(chk.depths.astype(int)))
        return
    L = math.log(cfg["n"])
    _emit_json(cfg, {
        "config": conf,
        "mu": ms.mu,
        "sigma2": ms.sigma2,
        "mean": chk.mean,
        "mean_se": chk.mean_se,
        "mean_over_log_n": chk.mean / L,
        "var_over_log_n": chk.var_over_log,
        "var_target": ms.sigma2 / ms.mu**3,
        "ks_vs_normal": chk.ks,
    })


COMMANDS = {
    "generate": cmd_generate,
    "records": cmd_records,
    "cuts": cmd_cuts,
    "constants": cmd_constants,
    "renewal": cmd_renewal,
    "limit": cmd_limit,
    "compare": cmd_compare,
    "depths": cmd_depths,
}


def _join_ranges(argv: list[str]) -> list[str]:
    # "--range -20:60" would otherwise read -20:60 as an option
    out, i = [], 0
    while i < len(argv):
        if argv[i] == "--range" and i + 1 < len(argv):
            out.append("--range=" + argv[i + 1])
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv: Optional[list[str]] = None) -> int:
    ap = build_parser()
    argv = _join_ranges(list(sys.argv[1:] if argv is None else argv))
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve(ns)
        cfg["command"] = ns.command
        validate_cfg(cfg)
        params = make_params(cfg)
    except UsageError as exc:
        print(f"splitrec {ns.command}: error: {exc}", file=sys.stderr)
        return 2
    try:
        COMMANDS[ns.command](cfg, params)
    except UsageError as exc:
        print(f"splitrec {ns.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"splitrec {ns.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
