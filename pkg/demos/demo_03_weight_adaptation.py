"""
Adapting weights and sharing candidates
=======================================

MORL/D splits the problem into weighted subproblems.  Two optional
mechanisms couple them: PSA nudges each weight toward the objectives where
its incumbent already beats its nearest archive neighbour, and the shared
pool lets a subproblem adopt any neighbour's candidate that scores better
under its own weight.
"""

# %%
import dataclasses

import numpy as np

from echelon import policy
from echelon.metrics import ParetoArchive
from echelon.scenario import builtin_scenario

# %%
# One PSA step by hand: the incumbent is ahead of its neighbour on the first
# objective only, so that weight grows by a factor of delta and the others
# shrink by the same factor before renormalisation.
arch = ParetoArchive(3)
arch.insert(np.array([[1.0, 5.0, 5.0], [5.0, 1.0, 1.0]]))
sub = policy.SubProblem(np.full(3, 1 / 3), objective=np.array([1.0, 5.0, 5.0]))
print("adapted weight:", np.round(policy.psa_adapt(sub, arch, 1.05), 4))

# %%
# The four combinations on a short budget.  ``pool_gain_i`` in the history is
# how much subproblem i's incumbent improved by adoption in that round.
cfg = builtin_scenario("simple")
base = policy.SearchConfig(iterations=40, es_population=8, eval_episodes=2, exchange_interval=5, seed=1)
bounds = policy.compute_bounds(cfg, base.seed, base)
for psa in (False, True):
    for pool in (False, True):
        conf = dataclasses.replace(base, psa_enabled=psa, shared_pool_enabled=pool)
        res = policy.run_morld(cfg, conf, bounds=bounds)
        last = res.history[-1]
        gain = sum(h.get(f"pool_gain_{i}", 0.0) for h in res.history for i in range(conf.population_size))
        weights = " ".join(str(np.round(s.weight, 2)) for s in res.subproblems[:2])
        print(f"psa={psa!s:5} pool={pool!s:5} HV={last['hypervolume']:.4g} archive={last['archive_size']:3d} "
              f"first weights {weights} pool gain {gain:.3g}")
