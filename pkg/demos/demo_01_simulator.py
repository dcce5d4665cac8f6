"""
Walking through the simulator
=============================

Load the smallest builtin network, look at its shape, and push a few
hand-written plans through the environment.
"""

# %%
# A scenario is plain data: echelons, node and route parameters, demand
# distributions and market prices.
import numpy as np

from echelon import env, horizon
from echelon.demand import sample_trace
from echelon.scenario import builtin_scenario

cfg = builtin_scenario("simple")
print(cfg.name, "action dim", cfg.action_dim, "routes", len(cfg.routes))
print("initial stock", env.reset(cfg).inventory_map(cfg))

# %%
# Doing nothing for a whole episode: with no demand the stock just sits there
# and every period costs the same holding charge.
quiet = np.zeros((cfg.horizon, len(cfg.echelons.markets)), dtype=np.int64)
idle = env.rollout(cfg, quiet, lambda obs, t: np.zeros(cfg.action_dim))
print("idle, no demand   (profit, -emission, -SL spread):", idle.totals)

# %%
# With real demand the retailers sell down their stock and then lose sales.
trace = sample_trace(cfg, seed=0)
idle = env.rollout(cfg, trace, lambda obs, t: np.zeros(cfg.action_dim))
lost = sum(int(i["demand_loss"].sum()) for i in idle.log)
print("idle, sampled demand:", idle.totals, "units lost:", lost)

# %%
# A steady plan: produce and ship 60 units on every route each period.
steady = np.full(cfg.action_dim, 60.0)
run = env.rollout(cfg, trace, lambda obs, t: steady)
print("steady plan:", run.totals, "inventory shortfall:", run.shortfall)

# %%
# The same plan written as one long decision vector scores identically
# under the open-loop evaluator used by NSGA-II.
dv = np.tile(steady, cfg.horizon)
print("open-loop evaluation:", horizon.evaluate(dv, cfg, trace).objectives)
