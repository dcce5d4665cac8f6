"""Whole-horizon evaluation of flat decision vectors.

A decision vector holds every period's action back to back (period-major,
manufacturers first, then routes in scenario order), which is the chromosome
searched by :mod:`echelon.nsga2`.  Evaluation replays it through the
simulator and reports the undiscounted objective totals together with the
inventory shortfall, i.e. the total number of units by which inventories went
negative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import env
from .demand import DemandTrace
from .scenario import ScenarioConfig

__all__ = ["EvalResult", "gene_bounds", "repair_bounds", "evaluate", "evaluate_batch", "objectives_from_flows"]


@dataclass(frozen=True)
class EvalResult:
    objectives: np.ndarray
    violation: float

    @property
    def feasible(self) -> bool:
        return self.violation == 0


def gene_bounds(cfg: ScenarioConfig) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper bound of every gene.

    Production genes are bounded by ``|suppliers| * Cap``, the most a
    manufacturer can receive in a period; they only scale sampling since
    production is overridden by supplier arrivals anyway.
    """
    low, high = env.action_bounds(cfg)
    return np.tile(low, cfg.horizon), np.tile(high, cfg.horizon)


def repair_bounds(dv: np.ndarray, cfg: ScenarioConfig) -> np.ndarray:
    low, high = gene_bounds(cfg)
    return np.clip(np.asarray(dv, dtype=float), low, high)


def _traces(cfg: ScenarioConfig, trace) -> np.ndarray:
    """Demand array of shape (r, T, M) for one trace or a list of replications."""
    if isinstance(trace, DemandTrace):
        return env._demand_array(cfg, trace)[None]
    if isinstance(trace, (list, tuple)):
        return np.stack([env._demand_array(cfg, tr) for tr in trace])
    d = np.asarray(trace)
    return d[None] if d.ndim == 2 else d


def evaluate_batch(dvs: np.ndarray, cfg: ScenarioConfig, trace) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate ``n`` decision vectors at once.

    Args:
        dvs: array ``(n, T * action_dim)``.
        trace: a :class:`DemandTrace`, a list of them (replications), or a
            demand array ``(T, M)`` / ``(r, T, M)``.

    Returns:
        ``(objectives (n, 3), violations (n,))``, each averaged over the
        demand replications.
    """
    dvs = np.atleast_2d(np.asarray(dvs, dtype=float))
    n = dvs.shape[0]
    if dvs.shape[1] != cfg.decision_dim:
        raise ValueError(f"decision vector length {dvs.shape[1]} != {cfg.decision_dim}")
    demand = _traces(cfg, trace)
    reps = demand.shape[0]
    actions = dvs.reshape(n, 1, cfg.horizon, cfg.action_dim)
    res = env.rollout(
        cfg,
        demand,
        lambda obs, t: actions[:, :, t, :],
        batch_shape=(n, reps),
        keep_log=False,
    )
    return res.totals.mean(axis=1), res.shortfall.mean(axis=1)


def evaluate(dv: np.ndarray, cfg: ScenarioConfig, trace) -> EvalResult:
    """Objectives and shortfall for one decision vector."""
    dv = np.asarray(dv, dtype=float)
    if dv.ndim != 1 or dv.size != cfg.decision_dim:
        raise ValueError(f"decision vector length {dv.size} != {cfg.decision_dim}")
    objs, viol = evaluate_batch(dv[None], cfg, trace)
    return EvalResult(objs[0], float(viol[0]))


def objectives_from_flows(
    cfg: ScenarioConfig,
    shipments: np.ndarray,
    inventories: np.ndarray,
    demand: np.ndarray,
) -> np.ndarray:
    """Objective totals computed straight from the horizon-wide quantities.

    This is the closed-form path: revenue from deliveries dispatched ``L``
    periods earlier, production equal to supplier deliveries arriving, costs
    and emissions summed over periods, and SL inequality summed from the
    per-period service levels.  It shares no code with the simulator.

    Args:
        shipments: ``(T, R)`` executed shipments per route.
        inventories: ``(T, N)`` end-of-period inventories (destination nodes).
        demand: ``(T, M)`` realised demand.
    """
    ech = cfg.echelons
    T, L = cfg.horizon, cfg.lead_time
    routes = cfg.route_keys
    shipments = np.asarray(shipments, dtype=float)
    arrived = np.zeros_like(shipments)
    if T > L:
        arrived[L:] = shipments[: T - L]

    nodes = cfg.destination_nodes
    held = np.maximum(np.asarray(inventories, dtype=float), 0.0)
    hold_c = np.array([cfg.nodes[n].holding_cost for n in nodes])
    hold_e = np.array([cfg.nodes[n].holding_emission for n in nodes])

    revenue = np.zeros(T)
    production_cost = np.zeros(T)
    production_emission = np.zeros(T)
    delivered = np.zeros((T, len(ech.retailers)))
    for r, (a, b) in enumerate(routes):
        if b in ech.retailers:
            j = ech.retailers.index(b)
            revenue += arrived[:, r] * cfg.prices[b]
            delivered[:, j] += arrived[:, r]
        if a in ech.suppliers:
            p = cfg.nodes[b]
            production_cost += arrived[:, r] * p.production_cost / p.yield_ratio
            production_emission += arrived[:, r] * p.production_emission
    c_tau = np.array([r.transport_cost for r in cfg.routes])
    e_tau = np.array([r.transport_emission for r in cfg.routes])
    transport_cost = (shipments * c_tau).sum(axis=1) * L
    transport_emission = (shipments * e_tau).sum(axis=1) * L

    profit = revenue - production_cost - transport_cost - (held * hold_c).sum(axis=1)
    emission = (held * hold_e).sum(axis=1) + production_emission + transport_emission

    demand = np.asarray(demand, dtype=float)
    sl = np.ones_like(delivered)
    pos = demand > 0
    sl[pos] = np.minimum(delivered[pos] / demand[pos], 1.0)
    m = sl.shape[1]
    gap = np.zeros(T)
    for j in range(m):
        for k in range(m):
            if j != k:
                gap += 0.5 * np.abs(sl[:, j] - sl[:, k])
    return np.array([profit.sum(), -emission.sum(), -gap.sum()])
