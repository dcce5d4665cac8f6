"""Command-line entry point ``echelon``.

Exit codes: 0 success, 1 usage error, 2 validation error (scenario or
manifest), 3 runtime error (output collision, missing inputs).
``ECHELON_JOBS`` overrides ``--jobs``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import experiment
from .demand import sample_trace, write_trace_csv
from .experiment import ExperimentManifest, ManifestError, OutputCollision, ReportError
from .metrics import das_dennis, indicator_record
from .scenario import ScenarioError, dumps_scenario, resolve_scenario, validate_scenario

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _floats(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if len(vals) != 3:
        raise argparse.ArgumentTypeError("expected three values")
    return vals


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _override(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="echelon", description="Multi-objective supply-chain experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sc = sub.add_parser("scenario", help="inspect scenarios").add_subparsers(
        dest="action", required=True, parser_class=_Parser
    )
    v = sc.add_parser("validate", help="check a scenario file or builtin name")
    v.add_argument("scenario")
    s = sc.add_parser("show", help="print a scenario as TOML")
    s.add_argument("scenario")

    dm = sub.add_parser("demand", help="demand traces").add_subparsers(dest="action", required=True, parser_class=_Parser)
    d = dm.add_parser("sample", help="write one demand trace as CSV")
    d.add_argument("scenario", nargs="?", help="builtin name or TOML path")
    d.add_argument("--scenario", dest="scenario_opt", help="same as the positional argument")
    d.add_argument("--seed", type=int, required=True)
    d.add_argument("--out", help="output CSV (default stdout)")

    run = sub.add_parser("run", help="run a solver over one or more seeds")
    run.add_argument("algorithm", choices=experiment.ALGORITHMS)
    run.add_argument("--scenario", help="builtin name or TOML path")
    run.add_argument("--seed", type=int, action="append", dest="seed_list", help="repeatable")
    run.add_argument("--seeds", type=_ints, help="comma-separated seeds")
    run.add_argument("--budget", type=int, help="generations (nsga2) or candidate evaluations per subproblem")
    run.add_argument("--generations", type=int, dest="budget", help="alias of --budget for nsga2")
    run.add_argument("--out", help="output directory; runs go to <out>/seed-<S>/")
    run.add_argument("--psa", action="store_true", help="enable PSA weight adaptation (morld)")
    run.add_argument("--shared-pool", action="store_true", help="enable the shared candidate pool (morld)")
    run.add_argument("--set", type=_override, action="append", default=[], metavar="KEY=VALUE", help="solver setting")
    run.add_argument("--manifest", help="TOML manifest; command-line options override it")
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--force", action="store_true", help="overwrite existing run directories")
    run.add_argument("--no-logs", action="store_true", help="skip operational logs and policy snapshots")

    mt = sub.add_parser("metrics", help="front indicators").add_subparsers(
        dest="action", required=True, parser_class=_Parser
    )
    m = mt.add_parser("compute", help="indicators of a front.csv as JSON")
    m.add_argument("--front", required=True)
    m.add_argument("--scenario", help="take the hypervolume reference point from this scenario")
    m.add_argument("--ref", "--reference", dest="reference", type=_floats, help="reference point a,b,c")
    m.add_argument("--truth", help="reference front CSV for GD/IGD/AHD")

    ag = sub.add_parser("aggregate", help="score runs against their merged front")
    ag.add_argument("runs", nargs="+", help="run directories or parents of them")
    ag.add_argument("--out", required=True)

    rp = sub.add_parser("report", help="reports").add_subparsers(dest="action", required=True, parser_class=_Parser)
    o = rp.add_parser("operational", help="production, inventory and demand-loss series per solution")
    o.add_argument("run_dir")
    o.add_argument("--out")
    return p


def _jobs(cli_value: int) -> int:
    env_value = os.environ.get("ECHELON_JOBS")
    if env_value:
        try:
            return max(1, int(env_value))
        except ValueError:
            raise _UsageError(f"ECHELON_JOBS must be an integer, got {env_value!r}")
    return max(1, cli_value)


def _manifest_from_args(a) -> ExperimentManifest:
    if a.manifest:
        man = experiment.load_manifest(a.manifest)
        if man.algorithm != a.algorithm:
            raise _UsageError(f"manifest algorithm {man.algorithm!r} does not match {a.algorithm!r}")
    else:
        man = None
    seeds = list(a.seed_list or []) + list(a.seeds or [])
    overrides = dict(man.overrides) if man else {}
    overrides.update(dict(a.set))
    if a.psa:
        overrides["psa_enabled"] = True
    if a.shared_pool:
        overrides["shared_pool_enabled"] = True
    scenario = a.scenario or (man.scenario if man else None)
    out = a.out or (man.out if man else None)
    if not scenario or not out:
        raise _UsageError("--scenario and --out are required (directly or via --manifest)")
    if not seeds and man:
        seeds = man.seeds
    if not seeds:
        raise _UsageError("at least one --seed is required")
    metrics = dict(man.metrics) if man else {"operational_logs": True, "policy_snapshots": True}
    if a.no_logs:
        metrics = {"operational_logs": False, "policy_snapshots": False}
    budget = a.budget if a.budget is not None else (man.budget if man else None)
    return ExperimentManifest(scenario, a.algorithm, seeds, out, budget, overrides, metrics)


def _cmd_scenario(a) -> int:
    cfg = resolve_scenario(a.scenario)
    if a.action == "validate":
        issues = validate_scenario(cfg)
        for issue in issues:
            print(issue)
        if issues:
            return EXIT_VALIDATION
        print(f"ok: {cfg.name} (action dim {cfg.action_dim}, {len(cfg.routes)} routes)")
    else:
        sys.stdout.write(dumps_scenario(cfg))
    return EXIT_OK


def _cmd_demand(a) -> int:
    name = a.scenario or a.scenario_opt
    if not name:
        raise _UsageError("demand sample needs a scenario")
    cfg = resolve_scenario(name)
    trace = sample_trace(cfg, a.seed)
    if a.out:
        write_trace_csv(trace, a.out)
    else:
        print("t,market_id,demand")
        for t in range(trace.horizon):
            for j, m in enumerate(trace.markets):
                print(f"{t},{m},{int(trace.demand[t, j])}")
    return EXIT_OK


def _cmd_run(a) -> int:
    man = _manifest_from_args(a)
    records = experiment.run_experiment(man, jobs=_jobs(a.jobs), force=a.force)
    for r in records:
        summary = json.loads((Path(r.run_dir) / "summary.json").read_text())
        print(f"seed {r.seed}: {summary['n_points']} points, hypervolume {summary['hypervolume']:.6g} -> {r.run_dir}")
    return EXIT_OK


def _cmd_metrics(a) -> int:
    front = experiment.read_front_csv(a.front)
    if a.reference is not None:
        ref = np.array(a.reference)
    elif a.scenario:
        ref = np.array(resolve_scenario(a.scenario).reference_point)
    else:
        summ = Path(a.front).with_name("summary.json")
        if not summ.is_file():
            raise _UsageError("pass --reference or --scenario (no summary.json next to the front)")
        ref = np.array(json.loads(summ.read_text())["reference_point"])
    truth = experiment.read_front_csv(a.truth) if a.truth else None
    rec = indicator_record(front, ref, truth=truth, weights=das_dennis(3, experiment.EUM_PARTITIONS))
    print(json.dumps(experiment._json_safe(rec), indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_aggregate(a) -> int:
    rows = experiment.aggregate(a.runs, a.out)
    print(f"{len(rows)} runs scored -> {Path(a.out) / 'report.csv'}")
    return EXIT_OK


def _cmd_report(a) -> int:
    written = experiment.operational_report(a.run_dir, a.out)
    print(f"{len(written)} solutions reported")
    return EXIT_OK


_COMMANDS = {
    "scenario": _cmd_scenario,
    "demand": _cmd_demand,
    "run": _cmd_run,
    "metrics": _cmd_metrics,
    "aggregate": _cmd_aggregate,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _COMMANDS[a.command](a)
    except _UsageError as exc:
        print(f"echelon: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ScenarioError, ManifestError) as exc:
        print(f"echelon: {exc}", file=sys.stderr)
        for issue in getattr(exc, "issues", None) or []:
            print(f"  {issue}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OutputCollision, ReportError, OSError) as exc:
        print(f"echelon: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
