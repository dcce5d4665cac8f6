"""Experiment orchestration: manifests, run directories, aggregation, reports.

A run directory (``<out>/seed-<S>/``) holds:

* ``config.json``: the manifest, resolved solver settings and manifest hash;
* ``scenario.toml``: the scenario that was solved;
* ``front.csv`` and ``archive.csv``: ``profit, neg_emission, neg_sl_inequality, solution_id``;
* ``history.csv``: one row per generation or exchange round;
* ``summary.json``: indicator values of the emitted front and wall time;
* ``trace.csv``: the demand trace replayed for the operational logs;
* ``logs/solution-<id>.csv``: per-period simulator log of each front solution;
* ``policies/solution-<id>.pol``: policy snapshots (policy-search runs only).

Seeds drive everything.  NSGA-II evaluates against the traces
:func:`echelon.policy.evaluation_traces` derives from the seed, the same ones
policy search scores candidates on.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import tomli

from . import env, nsga2, policy
from .demand import DemandTrace, write_trace_csv
from .metrics import (
    Front,
    bounds_from_points,
    das_dennis,
    estimate_true_front,
    indicator_record,
    pareto_filter,
)
from .scenario import ScenarioConfig, dumps_scenario, resolve_scenario

log = logging.getLogger(__name__)

__all__ = [
    "ALGORITHMS",
    "OBJECTIVE_COLUMNS",
    "ManifestError",
    "OutputCollision",
    "ReportError",
    "ExperimentManifest",
    "RunRecord",
    "load_manifest",
    "run_experiment",
    "aggregate",
    "operational_report",
    "write_front_csv",
    "read_front_csv",
    "write_history_csv",
    "read_history_csv",
    "front_summary",
    "demand_loss_from_log",
]

ALGORITHMS = ("nsga2", "scalarised", "morld")
OBJECTIVE_COLUMNS = ("profit", "neg_emission", "neg_sl_inequality")
EUM_PARTITIONS = 12


class ManifestError(ValueError):
    pass


class OutputCollision(RuntimeError):
    pass


class ReportError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# CSV helpers (reals are written with repr so they read back exactly)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_front_csv(path: str | Path, front: Front) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*OBJECTIVE_COLUMNS, "solution_id"])
        for i, row in zip(front.ids, front.points):
            w.writerow([*(_fmt(x) for x in row), i])


def read_front_csv(path: str | Path) -> Front:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    pts = np.array([[float(r[c]) for c in OBJECTIVE_COLUMNS] for r in rows]).reshape(-1, 3)
    ids = [int(r["solution_id"]) for r in rows]
    return Front(pts, ids)


def write_history_csv(path: str | Path, history: list[dict]) -> None:
    cols: list[str] = []
    for rec in history:
        cols.extend(k for k in rec if k not in cols)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for rec in history:
            w.writerow([_fmt(rec[c]) if c in rec else "" for c in cols])


def read_history_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        rec = {}
        for k, v in r.items():
            if v == "":
                continue
            rec[k] = int(v) if v.lstrip("-").isdigit() else float(v)
        out.append(rec)
    return out


def front_summary(front: Front, reference) -> dict:
    """Indicators of ``front`` alone (bounds from the front itself)."""
    rec = indicator_record(front, reference, weights=das_dennis(3, EUM_PARTITIONS))
    return {k: rec[k] for k in ("n_points", "hypervolume", "eum", "sparsity")}


def _json_safe(v):
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return None if math.isnan(v) else v
    if isinstance(v, np.ndarray):
        return _json_safe(v.tolist())
    return v


# --------------------------------------------------------------------------
# manifest


@dataclass
class ExperimentManifest:
    """What to run: one scenario, one solver, a list of seeds.

    ``budget`` is the number of generations for NSGA-II and the number of
    candidate evaluations per subproblem (per weight for the baseline) for
    policy search; ``None`` keeps the solver default.  ``overrides`` sets
    :class:`~echelon.nsga2.Nsga2Config` or :class:`~echelon.policy.SearchConfig`
    fields by name.
    """

    scenario: str
    algorithm: str
    seeds: list[int]
    out: str
    budget: int | None = None
    overrides: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=lambda: {"operational_logs": True, "policy_snapshots": True})

    def __post_init__(self):
        self.seeds = [int(s) for s in self.seeds]
        self.out = str(self.out)

    def validate(self) -> ScenarioConfig:
        if self.algorithm not in ALGORITHMS:
            raise ManifestError(f"algorithm must be one of {', '.join(ALGORITHMS)}, got {self.algorithm!r}")
        if not self.seeds:
            raise ManifestError("seeds must not be empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ManifestError("seeds must be distinct")
        if self.budget is not None and self.budget < 1:
            raise ManifestError("budget must be positive")
        cfg = resolve_scenario(self.scenario)
        try:
            self.solver_config(0)
        except (TypeError, ValueError) as exc:
            raise ManifestError(f"bad overrides: {exc}") from exc
        out = Path(self.out)
        parent = out if out.exists() else out.parent
        while not parent.exists() and parent != parent.parent:
            parent = parent.parent
        if not os.access(parent, os.W_OK):
            raise ManifestError(f"output directory {self.out} is not writable")
        return cfg

    def solver_config(self, seed: int):
        if self.algorithm == "nsga2":
            known = {f.name for f in fields(nsga2.Nsga2Config)}
            base = {"generations": self.budget} if self.budget else {}
            cls = nsga2.Nsga2Config
        else:
            known = {f.name for f in fields(policy.SearchConfig)}
            base = {}
            if self.budget:
                es_pop = int(self.overrides.get("es_population", policy.SearchConfig.es_population))
                base["iterations"] = max(1, math.ceil(self.budget / es_pop))
            cls = policy.SearchConfig
        unknown = set(self.overrides) - known
        if unknown:
            raise ManifestError(f"unknown {self.algorithm} settings: {', '.join(sorted(unknown))}")
        return cls(**{**base, **self.overrides, "seed": seed})

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def hash(self) -> str:
        cfg = resolve_scenario(self.scenario)
        body = {k: v for k, v in self.to_dict().items() if k != "out"}
        body["scenario_fingerprint"] = cfg.fingerprint
        blob = json.dumps(_json_safe(body), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def load_manifest(path: str | Path) -> ExperimentManifest:
    """Read a TOML manifest (top-level keys match :class:`ExperimentManifest`)."""
    try:
        data = tomli.loads(Path(path).read_text())
    except (OSError, tomli.TOMLDecodeError) as exc:
        raise ManifestError(f"{path}: {exc}") from exc
    allowed = {f.name for f in fields(ExperimentManifest)}
    unknown = set(data) - allowed
    if unknown:
        raise ManifestError(f"{path}: unknown keys {', '.join(sorted(unknown))}")
    try:
        return ExperimentManifest(**data)
    except TypeError as exc:
        raise ManifestError(f"{path}: {exc}") from exc


@dataclass
class RunRecord:
    manifest_hash: str
    seed: int
    wall_time: float
    front: Front
    history: list[dict]
    log_paths: list[str]
    run_dir: str


# --------------------------------------------------------------------------
# running


def _run_dir(manifest: ExperimentManifest, seed: int) -> Path:
    return Path(manifest.out) / f"seed-{seed}"


def _solve(cfg: ScenarioConfig, manifest: ExperimentManifest, seed: int):
    """Run the solver; returns (front, archive front, history, solutions, trace)."""
    sc = manifest.solver_config(seed)
    if manifest.algorithm == "nsga2":
        demand = policy.evaluation_traces(cfg, seed, sc.replications)
        res = nsga2.run(cfg, sc, demand)
        front = Front(res.archive.points, [int(k) for k in res.archive.payloads])
        sols = {int(i): ("dv", res.solutions[int(i)]) for i in front.ids}
        return front, front, res.history, sols, demand[0]
    demand = policy.evaluation_traces(cfg, seed, sc.eval_episodes)
    if manifest.algorithm == "scalarised":
        front, results = policy.run_scalarised_baseline(cfg, sc)
        sols = {int(i): ("policy", results[int(i)]["policy"]) for i in front.ids}
        everything = Front(np.array([r["objectives"] for r in results]), list(range(len(results))))
        history = [
            {
                "weight_index": i,
                "w_profit": r["weight"][0],
                "w_emission": r["weight"][1],
                "w_sl": r["weight"][2],
                "profit": r["objectives"][0],
                "neg_emission": r["objectives"][1],
                "neg_sl_inequality": r["objectives"][2],
                "fitness": r["fitness"],
                "feasible": r["feasible"],
            }
            for i, r in enumerate(results)
        ]
        return front, everything, history, sols, demand[0]
    res = policy.run_morld(cfg, sc)
    arch = res.archive
    front = Front(arch.points, list(range(len(arch))))
    sols = {i: ("policy", res.template.with_params(arch.payloads[i][1])) for i in range(len(arch))}
    return front, front, res.history, sols, demand[0]


def _replay(cfg: ScenarioConfig, kind: str, sol, demand: np.ndarray):
    if kind == "dv":
        acts = np.asarray(sol).reshape(cfg.horizon, cfg.action_dim)
        return env.rollout(cfg, demand, lambda obs, t: acts[t]).log
    return env.rollout(cfg, demand, lambda obs, t: policy.act(sol, obs)).log


def run_one(manifest: ExperimentManifest, seed: int, force: bool = False) -> RunRecord:
    """Execute one (algorithm, seed) combination and write its run directory."""
    cfg = manifest.validate()
    rd = _run_dir(manifest, seed)
    if rd.exists() and any(rd.iterdir()) and not force:
        raise OutputCollision(f"{rd} already exists; pass --force to overwrite")
    rd.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    front, archive, history, sols, demand = _solve(cfg, manifest, seed)
    wall = time.perf_counter() - start

    write_front_csv(rd / "front.csv", front)
    write_front_csv(rd / "archive.csv", archive)
    write_history_csv(rd / "history.csv", history)
    (rd / "scenario.toml").write_text(dumps_scenario(cfg))
    mhash = manifest.hash
    config = {
        "manifest": manifest.to_dict(),
        "manifest_hash": mhash,
        "seed": seed,
        "solver": manifest.solver_config(seed).to_dict(),
        "scenario_fingerprint": cfg.fingerprint,
    }
    (rd / "config.json").write_text(json.dumps(_json_safe(config), indent=2, sort_keys=True))

    trace = DemandTrace(tuple(cfg.echelons.markets), np.asarray(demand, dtype=np.int64), seed)
    write_trace_csv(trace, rd / "trace.csv")
    log_paths = []
    if manifest.metrics.get("operational_logs", True):
        (rd / "logs").mkdir(exist_ok=True)
        for i in front.ids:
            kind, sol = sols[int(i)]
            p = rd / "logs" / f"solution-{i}.csv"
            env.write_episode_log(cfg, _replay(cfg, kind, sol, demand), p)
            log_paths.append(str(p))
    if manifest.metrics.get("policy_snapshots", True) and manifest.algorithm != "nsga2":
        (rd / "policies").mkdir(exist_ok=True)
        for i in front.ids:
            policy.save_policy(sols[int(i)][1], rd / "policies" / f"solution-{i}.pol")

    # indicators are computed from the front as it reads back from disk
    summary = {
        "algorithm": manifest.algorithm,
        "scenario": manifest.scenario,
        "seed": seed,
        "manifest_hash": mhash,
        "wall_time": wall,
        "reference_point": list(cfg.reference_point),
        **front_summary(read_front_csv(rd / "front.csv"), cfg.reference_point),
    }
    (rd / "summary.json").write_text(json.dumps(_json_safe(summary), indent=2, sort_keys=True))
    log.info("%s seed %d: %d front points in %.1fs", manifest.algorithm, seed, len(front), wall)
    return RunRecord(mhash, seed, wall, front, history, log_paths, str(rd))


def _run_one_star(args):
    return run_one(*args)


def run_experiment(manifest: ExperimentManifest, jobs: int = 1, force: bool = False) -> list[RunRecord]:
    """Run every seed of ``manifest``; records come back in seed order."""
    manifest.validate()
    if not force:
        taken = [str(_run_dir(manifest, s)) for s in manifest.seeds if _run_dir(manifest, s).exists()]
        if taken:
            raise OutputCollision(f"output exists: {', '.join(taken)}; pass --force to overwrite")
    Path(manifest.out).mkdir(parents=True, exist_ok=True)
    args = [(manifest, s, force) for s in manifest.seeds]
    if jobs <= 1 or len(args) == 1:
        return [run_one(*a) for a in args]
    with ProcessPoolExecutor(max_workers=min(jobs, len(args))) as pool:
        return list(pool.map(_run_one_star, args))


# --------------------------------------------------------------------------
# aggregation


def _find_runs(paths) -> list[Path]:
    runs = []
    for p in map(Path, paths):
        if (p / "front.csv").is_file():
            runs.append(p)
        elif p.is_dir():
            runs.extend(sorted(q.parent for q in p.rglob("front.csv")))
    seen, out = set(), []
    for r in runs:
        if r.resolve() not in seen:
            seen.add(r.resolve())
            out.append(r)
    return out


def aggregate(paths, out: str | Path | None = None) -> list[dict]:
    """Score every run against the merged front of all runs.

    Returns one row per run (``run, algorithm, seed, hv, eum, sparsity, gd,
    igd, ahd, n_points``).  When ``out`` is given, writes ``report.csv``,
    ``truth.csv`` and long-format indicator-vs-budget series under
    ``plotdata/``.
    """
    runs = _find_runs(paths)
    if not runs:
        raise ReportError("no fronts found")
    fronts, meta = [], []
    for r in runs:
        fronts.append(read_front_csv(r / "front.csv"))
        summ = json.loads((r / "summary.json").read_text()) if (r / "summary.json").is_file() else {}
        meta.append(summ)
    refs = {tuple(m["reference_point"]) for m in meta if "reference_point" in m}
    if len(refs) > 1:
        raise ReportError("runs come from scenarios with different reference points")
    reference = np.array(refs.pop()) if refs else np.zeros(3)
    truth = estimate_true_front([f.points for f in fronts])
    bounds = bounds_from_points(truth.points) if len(truth) else None
    weights = das_dennis(3, EUM_PARTITIONS)

    rows = []
    for r, f, m in zip(runs, fronts, meta):
        rec = indicator_record(f, reference, truth=truth, weights=weights, bounds=bounds)
        rows.append(
            {
                "run": str(r),
                "algorithm": m.get("algorithm", ""),
                "seed": m.get("seed", ""),
                "hv": rec["hypervolume"],
                "eum": rec["eum"],
                "sparsity": rec["sparsity"],
                "gd": rec["gd"],
                "igd": rec["igd"],
                "ahd": rec["ahd"],
                "n_points": rec["n_points"],
            }
        )
    if out is not None:
        out = Path(out)
        (out / "plotdata").mkdir(parents=True, exist_ok=True)
        with open(out / "report.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(rows[0]))
            for row in rows:
                w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row.values()])
        write_front_csv(out / "truth.csv", truth)
        series = {}
        for r, m in zip(runs, meta):
            hist_path = r / "history.csv"
            if not hist_path.is_file():
                continue
            for rec in read_history_csv(hist_path):
                if "evaluations" not in rec:
                    continue
                for ind in ("hypervolume", "eum", "sparsity"):
                    if ind in rec:
                        series.setdefault(ind, []).append(
                            [str(r), m.get("algorithm", ""), m.get("seed", ""), rec["evaluations"], rec[ind]]
                        )
        for ind, data in series.items():
            with open(out / "plotdata" / f"{ind}.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["run", "algorithm", "seed", "evaluations", ind])
                for row in data:
                    w.writerow([*row[:4], _fmt(row[4])])
    return rows


# --------------------------------------------------------------------------
# operational report


def operational_report(run_dir: str | Path, out: str | Path | None = None) -> dict[int, dict[str, Path]]:
    """Per-solution production, inventory and demand-loss series.

    Reads ``logs/solution-<id>.csv`` and writes three CSVs per solution into
    ``out`` (default ``<run_dir>/operational``).
    """
    run_dir = Path(run_dir)
    logs = sorted((run_dir / "logs").glob("solution-*.csv")) if (run_dir / "logs").is_dir() else []
    if not logs:
        raise ReportError(f"{run_dir}: no operational logs")
    out = Path(out) if out is not None else run_dir / "operational"
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    for p in logs:
        sid = int(p.stem.split("-", 1)[1])
        data = env.read_episode_log(p)
        t = data["t"].astype(int)
        groups = {
            "manufacturing": [c for c in data if c.startswith("prod_")],
            "inventory": [c for c in data if c.startswith("inv_")],
            "demand_loss": [c for c in data if c.startswith("demand_loss_")],
        }
        paths = {}
        for name, cols in groups.items():
            dest = out / f"solution-{sid}-{name}.csv"
            with open(dest, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["t", *cols])
                for k in range(len(t)):
                    w.writerow([int(t[k]), *(_fmt(data[c][k]) for c in cols)])
            paths[name] = dest
        written[sid] = paths
    return written


def demand_loss_from_log(data: dict[str, np.ndarray]) -> np.ndarray:
    """``(T, M)`` demand minus absorbed sales recomputed from a log."""
    markets = [c[len("demand_") :] for c in data if c.startswith("demand_") and not c.startswith("demand_loss_")]
    return np.stack([data[f"demand_{m}"] - data[f"absorbed_{m}"] for m in markets], axis=1)
