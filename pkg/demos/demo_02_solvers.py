"""
Comparing the three solvers
===========================

Short runs of NSGA-II, the fixed-weight policy-search baseline and MORL/D on
the simple network, scored against their merged front.  Budgets are tiny so
the script finishes in about a minute; the acceptance suite uses the full
defaults.
"""

# %%
import tempfile
from pathlib import Path

from echelon import experiment

out = Path(tempfile.mkdtemp(prefix="echelon-demo-"))
small = {"es_population": 8, "eval_episodes": 2, "exchange_interval": 5}
runs = {
    "nsga2": experiment.ExperimentManifest("simple", "nsga2", [0], out / "nsga2", budget=200),
    "scalarised": experiment.ExperimentManifest("simple", "scalarised", [0], out / "scalarised", 200, small),
    "morld": experiment.ExperimentManifest(
        "simple", "morld", [0], out / "morld", 400, {**small, "psa_enabled": True, "shared_pool_enabled": True}
    ),
}

# %%
# Each run writes a directory with its front, history, logs and snapshots.
for name, man in runs.items():
    (rec,) = experiment.run_experiment(man)
    print(f"{name:>10}: {len(rec.front):4d} front points in {rec.wall_time:5.1f}s -> {rec.run_dir}")

# %%
# Aggregation merges every front into a reference set and scores each run
# against it.  Lower GD/IGD is closer to the merged front.
rows = experiment.aggregate([out], out / "report")
print(f"{'algorithm':>10} {'points':>6} {'hypervolume':>12} {'igd':>8}")
for r in rows:
    print(f"{r['algorithm']:>10} {r['n_points']:6d} {r['hv']:12.4g} {r['igd']:8.4f}")

# %%
# Per-solution production, inventory and lost-sales series for plotting.
written = experiment.operational_report(out / "morld" / "seed-0")
print(len(written), "MORL/D solutions reported under", out / "morld" / "seed-0" / "operational")
