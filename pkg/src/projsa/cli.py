"""Batch runner: ``projsa {run,diagnose,prox-selftest,ode-compare}``.

Exit codes: 0 success, 1 self-test failure, 2 validation error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .diagnostics import STATISTICS, CoverageError, diagnostic_sweep
from .engine import ALGORITHMS, NonFiniteDriftError, policy_from_dict, run
from .odeflow import compare_sa_ode, dist_to_stationary, stationarity_residual
from .problems import build_problem, problem_ids
from .schedules import noise_from_dict, schedule_from_dict
from .selftest import run_selftest
from .traces import TraceFormatError, read_trace, write_trace

log = logging.getLogger("projsa")

EXIT_OK, EXIT_SELFTEST, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2, 3


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass
class ExperimentConfig:
    raw: dict
    seeds: list
    diagnostics: Optional[dict]

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def config_hash(doc: dict) -> str:
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _check(field: str, fn):
    try:
        return fn()
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(field, str(exc)) from None


def validate_diagnostics(block) -> dict:
    if not isinstance(block, dict):
        raise ConfigError("diagnostics", "must be an object")
    out = {}
    N_list = block.get("N_list")
    if not isinstance(N_list, list) or not N_list or not all(isinstance(n, int) and n >= 1 for n in N_list):
        raise ConfigError("diagnostics.N_list", "must be a nonempty list of integers >= 1")
    out["N_list"] = N_list
    T = block.get("T")
    if not isinstance(T, (int, float)) or not T > 0:
        raise ConfigError("diagnostics.T", "must be a positive number")
    out["T"] = float(T)
    deltas = block.get("delta_list", [])
    if not isinstance(deltas, list) or not all(isinstance(d, (int, float)) and d > 0 for d in deltas):
        raise ConfigError("diagnostics.delta_list", "must be a list of positive numbers")
    out["delta_list"] = [float(d) for d in deltas]
    if "h_ode" in block:
        h = block["h_ode"]
        if not isinstance(h, (int, float)) or not 0 < h <= out["T"]:
            raise ConfigError("diagnostics.h_ode", "must be a positive number not exceeding T")
        out["h_ode"] = float(h)
    stats = block.get("statistics", list(STATISTICS))
    unknown = [s for s in stats if s not in STATISTICS]
    if unknown:
        raise ConfigError("diagnostics.statistics", f"unknown statistics {unknown}; known: {list(STATISTICS)}")
    out["statistics"] = list(stats)
    return out


def validate_config(doc) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    prob = doc.get("problem")
    if not isinstance(prob, dict) or prob.get("id") not in problem_ids():
        raise ConfigError("problem.id", f"must be one of {problem_ids()}")
    _check("problem.params", lambda: build_problem(prob))
    if doc.get("algorithm") not in ALGORITHMS:
        raise ConfigError("algorithm", f"must be one of {list(ALGORITHMS)}")
    if not isinstance(doc.get("schedule"), dict):
        raise ConfigError("schedule", "missing schedule block")
    _check("schedule", lambda: schedule_from_dict(doc["schedule"]))
    _check("noise", lambda: noise_from_dict(doc.get("noise")))
    n = doc.get("n_steps")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ConfigError("n_steps", "must be an integer >= 1")
    seeds = doc.get("seeds", 1)
    if isinstance(seeds, int) and not isinstance(seeds, bool):
        if seeds < 1:
            raise ConfigError("seeds", "count must be >= 1")
        seeds = list(range(seeds))
    elif not (isinstance(seeds, list) and seeds and all(isinstance(s, int) and s >= 0 for s in seeds)):
        raise ConfigError("seeds", "must be a positive count or a nonempty list of nonnegative integers")
    _check("record_policy", lambda: policy_from_dict(doc.get("record_policy")))
    if "x0" in doc:
        _check("x0", lambda: np.broadcast_to(np.asarray(doc["x0"], dtype=float), (build_problem(prob).dim,)))
    diag = validate_diagnostics(doc["diagnostics"]) if "diagnostics" in doc else None
    return ExperimentConfig(raw=doc, seeds=list(seeds), diagnostics=diag)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"{path} is not valid JSON ({exc})") from None
    return validate_config(doc)


# ---------------------------------------------------------------------------
# replicas (top-level so they pickle for the process pool)
# ---------------------------------------------------------------------------


def _simulate(doc: dict, seed: int):
    problem = build_problem(doc["problem"])
    traj = run(
        problem,
        doc["algorithm"],
        schedule_from_dict(doc["schedule"]),
        noise_from_dict(doc.get("noise")),
        doc["n_steps"],
        seed,
        record_policy=policy_from_dict(doc.get("record_policy")),
        x0=doc.get("x0"),
    )
    return problem, traj


def _sweep_summary(traj, diag: dict) -> dict:
    rep = diagnostic_sweep(traj, diag["N_list"], diag["T"], diag["delta_list"] or [0.01])
    keep = set(diag["statistics"]) | {"N", "delta"}
    rows = [{k: v for k, v in row.items() if k in keep} for row in rep.rows]
    return {"rows": rows, "flags": rep.flags, "T": rep.T}


def run_replica(doc: dict, seed: int, out_dir: str, diag: Optional[dict]) -> dict:
    problem, traj = _simulate(doc, seed)
    trace = Path(out_dir) / f"trace_seed{seed}.csv"
    write_trace(traj, trace)
    x = traj.final_state
    entry = {
        "seed": seed,
        "trace": trace.name,
        "x_final": x.tolist(),
        "dist_to_stationary": dist_to_stationary(problem, x),
        "stationarity_residual": stationarity_residual(problem, x),
        "projected_steps": traj.aggregates["projected_steps"],
    }
    if diag is not None:
        entry["diagnostics"] = _sweep_summary(traj, diag)
    return entry


def ode_replica(doc: dict, seed: int, diag: dict) -> dict:
    problem, traj = _simulate(doc, seed)
    dists = {str(N): compare_sa_ode(traj, N, diag["T"], diag["h_ode"], problem=problem) for N in diag["N_list"]}
    return {"seed": seed, "sup_distance": dists}


def _map(fn, args_list, jobs: int) -> list:
    if jobs <= 1 or len(args_list) <= 1:
        return [fn(*a) for a in args_list]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, *zip(*args_list)))


def _write_summary(out_dir: Path, name: str, doc: dict) -> Path:
    path = out_dir / name
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_run(config_path, out_dir, jobs: int = 1, seed_offset: int = 0) -> int:
    cfg = load_config(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = [s + seed_offset for s in cfg.seeds]
    entries = _map(run_replica, [(cfg.raw, s, str(out), cfg.diagnostics) for s in seeds], jobs)
    summary = {"command": "run", "config_hash": cfg.hash, "version": __version__,
               "seeds": seeds, "replicas": entries}
    if cfg.diagnostics is not None:
        summary["statistics"] = cfg.diagnostics["statistics"]
    _write_summary(out, "summary.json", summary)
    log.info("wrote %d traces to %s", len(entries), out)
    return EXIT_OK


def cmd_diagnose(trace_path, diag_block: dict, out_dir) -> int:
    diag = validate_diagnostics(diag_block)
    try:
        traj = read_trace(trace_path)
    except OSError as exc:
        raise ConfigError("--trace", f"cannot read {trace_path}: {exc.strerror}") from None
    summary = {"command": "diagnose", "config_hash": config_hash(diag_block), "version": __version__,
               "trace": str(trace_path), "seed": traj.metadata.get("seed"),
               "statistics": diag["statistics"], **_sweep_summary(traj, diag)}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_summary(out, f"diagnose_{Path(trace_path).stem}.json", summary)
    return EXIT_OK


def cmd_prox_selftest(n_instances: int = 10_000, seed: int = 0, corrupt_lambda: bool = False) -> int:
    res = run_selftest(n_instances=n_instances, seed=seed, corrupt_lambda=corrupt_lambda)
    for r in res.results:
        print(f"{r.variant:5s} box={'yes' if r.boxed else 'no ':3s} n={r.n} max_error={r.max_error:.3e}")
    w = res.worst_case()
    print(f"worst: {w.variant} box={w.boxed} error={w.max_error:.3e} instance={json.dumps(w.worst)}")
    print(f"{'PASS' if res.passed else 'FAIL'} (tolerance {res.tolerance:g}, {res.seconds:.1f}s)")
    return EXIT_OK if res.passed else EXIT_SELFTEST


def cmd_ode_compare(config_path, out_dir, jobs: int = 1, seed_offset: int = 0) -> int:
    cfg = load_config(config_path)
    if cfg.diagnostics is None or "h_ode" not in cfg.diagnostics:
        raise ConfigError("diagnostics.h_ode", "ode-compare needs N_list, T and h_ode")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = [s + seed_offset for s in cfg.seeds]
    rows = _map(ode_replica, [(cfg.raw, s, cfg.diagnostics) for s in seeds], jobs)
    _write_summary(out, "ode_compare.json", {
        "command": "ode-compare", "config_hash": cfg.hash, "version": __version__,
        "T": cfg.diagnostics["T"], "h_ode": cfg.diagnostics["h_ode"], "N_list": cfg.diagnostics["N_list"],
        "replicas": rows,
    })
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="projsa", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def batch(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, metavar="PATH")
        sp.add_argument("--out", default="out", metavar="DIR")
        sp.add_argument("--jobs", type=int, default=1, metavar="N")
        sp.add_argument("--seed-offset", type=int, default=0, metavar="N")
        return sp

    batch("run", "run every seed of an experiment and write traces plus a summary")
    batch("ode-compare", "compare SA interpolants with projected Euler over N_list")
    d = sub.add_parser("diagnose", help="diagnostic sweep over a recorded trace")
    d.add_argument("--trace", required=True, metavar="PATH")
    d.add_argument("--config", required=True, metavar="PATH",
                   help="JSON with a 'diagnostics' block (or the block itself)")
    d.add_argument("--out", default="out", metavar="DIR")
    s = sub.add_parser("prox-selftest", help="check the proximal maps against a grid oracle")
    s.add_argument("--instances", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--corrupt-lambda", action="store_true", help=argparse.SUPPRESS)
    return p


def _diag_block(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"{path} is not valid JSON ({exc})") from None
    return doc.get("diagnostics", doc) if isinstance(doc, dict) else doc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs: must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        if args.command == "run":
            return cmd_run(args.config, args.out, args.jobs, args.seed_offset)
        if args.command == "ode-compare":
            return cmd_ode_compare(args.config, args.out, args.jobs, args.seed_offset)
        if args.command == "diagnose":
            return cmd_diagnose(args.trace, _diag_block(args.config), args.out)
        return cmd_prox_selftest(args.instances, args.seed, args.corrupt_lambda)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (CoverageError, TraceFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NonFiniteDriftError, FloatingPointError, OSError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
