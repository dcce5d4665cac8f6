"""Multi-objective sequential supply-chain simulator.

The simulator advances one period per :func:`step`:

1. shipments dispatched ``L`` periods ago arrive;
2. manufacturers convert every unit received from suppliers into product
   (the production entry of the action is recorded but never executed);
3. inventories move by inflow minus requested outflow, and may go negative;
4. each retailer sells ``min(max(I, 0), d)`` units to its market;
5. the new shipments enter the pipeline;
6. the reward vector ``(profit, -emission, -SL inequality)`` is computed;
7. negative inventory yields the penalty ``sum(min(I, 0)) * big_m``, added to
   the profit and emission components of the penalised reward;
8. cumulative emission and the running mean SL inequality are updated.

Quantities are whole units: shipments are clipped into ``[0, Cap]`` and
rounded to the nearest integer before they are executed.

Every array in :class:`SimState` may carry leading batch dimensions, so one
call to :func:`step` or :func:`rollout` can advance many independent
episodes (population members, demand replications) at once.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .demand import DemandTrace
from .scenario import ScenarioConfig

__all__ = [
    "Network",
    "network",
    "SimState",
    "ActionVector",
    "StepOutcome",
    "RolloutResult",
    "EpisodeOver",
    "reset",
    "step",
    "rollout",
    "observe",
    "observation_bounds",
    "observation_dim",
    "action_bounds",
    "write_episode_log",
    "read_episode_log",
]

OBJECTIVES = ("profit", "neg_emission", "neg_sl_inequality")


class EpisodeOver(RuntimeError):
    """Raised when stepping a state whose clock already reached the horizon."""


@dataclass(frozen=True)
class Network:
    """Index arrays and parameter vectors compiled from a scenario.

    Nodes are indexed in :attr:`ScenarioConfig.destination_nodes` order
    (manufacturers first, retailers last); routes in scenario order.
    """

    nodes: tuple[int, ...]
    routes: tuple[tuple[int, int], ...]
    markets: tuple[int, ...]
    manufacturers: tuple[int, ...]
    retailers: tuple[int, ...]
    into_node: np.ndarray  # (R, N) route arrival incidence
    out_of_node: np.ndarray  # (R, N) route departure incidence, supplier routes all-zero
    into_mfg: np.ndarray  # (R, K) supplier routes into each manufacturer
    into_retailer: np.ndarray  # (R, M)
    retailer_idx: np.ndarray  # (M,) node indices of retailers, market order
    holding_cost: np.ndarray
    holding_emission: np.ndarray
    unit_production_cost: np.ndarray  # c / v per manufacturer
    production_emission: np.ndarray
    transport_cost: np.ndarray
    transport_emission: np.ndarray
    price: np.ndarray  # per market (= per paired retailer)
    initial_inventory: np.ndarray
    in_degree: np.ndarray
    horizon: int
    lead_time: int
    capacity: float
    big_m: float
    n_suppliers: int

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_routes(self) -> int:
        return len(self.routes)

    @property
    def n_mfg(self) -> int:
        return len(self.manufacturers)

    @property
    def n_markets(self) -> int:
        return len(self.markets)

    @property
    def action_dim(self) -> int:
        return self.n_mfg + self.n_routes

    @property
    def production_upper(self) -> float:
        """Largest production any manufacturer can receive in one period."""
        return self.n_suppliers * self.capacity


def _compile(cfg: ScenarioConfig) -> Network:
    ech = cfg.echelons
    nodes = cfg.destination_nodes
    nidx = {n: i for i, n in enumerate(nodes)}
    routes = cfg.route_keys
    R, N, K, M = len(routes), len(nodes), len(ech.manufacturers), len(ech.markets)
    suppliers = set(ech.suppliers)
    into_node = np.zeros((R, N), dtype=np.int64)
    out_of_node = np.zeros((R, N), dtype=np.int64)
    into_mfg = np.zeros((R, K), dtype=np.int64)
    into_retailer = np.zeros((R, M), dtype=np.int64)
    midx = {m: i for i, m in enumerate(ech.manufacturers)}
    ridx = {r: i for i, r in enumerate(ech.retailers)}
    for r, (a, b) in enumerate(routes):
        into_node[r, nidx[b]] = 1
        if a in suppliers:
            into_mfg[r, midx[b]] = 1
        else:
            out_of_node[r, nidx[a]] = 1
        if b in ridx:
            into_retailer[r, ridx[b]] = 1
    p = [cfg.nodes[n] for n in nodes]
    mp = [cfg.nodes[k] for k in ech.manufacturers]
    rp = cfg.routes
    return Network(
        nodes=nodes,
        routes=routes,
        markets=tuple(ech.markets),
        manufacturers=tuple(ech.manufacturers),
        retailers=tuple(ech.retailers),
        into_node=into_node,
        out_of_node=out_of_node,
        into_mfg=into_mfg,
        into_retailer=into_retailer,
        retailer_idx=np.array([nidx[r] for r in ech.retailers], dtype=np.int64),
        holding_cost=np.array([x.holding_cost for x in p]),
        holding_emission=np.array([x.holding_emission for x in p]),
        unit_production_cost=np.array([x.production_cost / x.yield_ratio for x in mp]),
        production_emission=np.array([x.production_emission for x in mp]),
        transport_cost=np.array([x.transport_cost for x in rp]),
        transport_emission=np.array([x.transport_emission for x in rp]),
        price=np.array([cfg.prices[r] for r in ech.retailers]),
        initial_inventory=np.array([x.initial_inventory for x in p], dtype=np.int64),
        in_degree=into_node.sum(axis=0),
        horizon=cfg.horizon,
        lead_time=cfg.lead_time,
        capacity=float(cfg.capacity),
        big_m=float(cfg.big_m),
        n_suppliers=len(ech.suppliers),
    )


def network(cfg: ScenarioConfig) -> Network:
    """Compiled arrays for ``cfg`` (cached on the config object)."""
    net = cfg._cache.get("network")
    if net is None:
        net = cfg._cache["network"] = _compile(cfg)
    return net


# --------------------------------------------------------------------------
# state, action, outcome


@dataclass(frozen=True)
class SimState:
    """Dynamic state.  All arrays share the same leading batch shape.

    ``pipeline[..., r, k]`` holds units on route ``r`` that arrive in ``k + 1``
    periods; slot 0 arrives at the next step.
    """

    inventories: np.ndarray  # (..., N) int64, signed
    pipeline: np.ndarray  # (..., R, L) int64
    cumulative_emission: np.ndarray  # (...,)
    avg_sl_inequality: np.ndarray  # (...,)
    clock: int
    sl_numerators: np.ndarray  # (..., M) cumulative units arrived at retailers
    sl_denominators: np.ndarray  # (..., M) cumulative demand
    last_demand: np.ndarray  # (..., M) demand of the previous period

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.inventories.shape[:-1]

    def inventory_map(self, cfg: ScenarioConfig) -> dict[int, int]:
        return {n: int(v) for n, v in zip(cfg.destination_nodes, self.inventories)}

    def pipeline_map(self, cfg: ScenarioConfig) -> dict[tuple[int, int], list[int]]:
        return {k: self.pipeline[r].tolist() for r, k in enumerate(cfg.route_keys)}


@dataclass(frozen=True)
class ActionVector:
    """Per-period decision: production per manufacturer, shipment per route."""

    production: np.ndarray
    shipments: np.ndarray

    @classmethod
    def from_flat(cls, flat, cfg: ScenarioConfig) -> ActionVector:
        flat = np.asarray(flat, dtype=float)
        k = len(cfg.echelons.manufacturers)
        return cls(flat[..., :k], flat[..., k:])

    @classmethod
    def from_maps(
        cls, cfg: ScenarioConfig, production: Mapping[int, float] | None = None, shipments: Mapping | None = None
    ) -> ActionVector:
        production = production or {}
        shipments = shipments or {}
        return cls(
            np.array([float(production.get(k, 0.0)) for k in cfg.echelons.manufacturers]),
            np.array([float(shipments.get(key, 0.0)) for key in cfg.route_keys]),
        )

    @property
    def flat(self) -> np.ndarray:
        return np.concatenate([self.production, self.shipments], axis=-1)


@dataclass
class StepOutcome:
    reward: np.ndarray  # (..., 3) penalised
    raw_reward: np.ndarray  # (..., 3)
    penalty: np.ndarray  # (...,)
    observation: np.ndarray
    info: dict[str, np.ndarray] = field(default_factory=dict)


def reset(cfg: ScenarioConfig, trace: DemandTrace | np.ndarray | None = None, batch_shape: tuple[int, ...] = ()) -> SimState:
    """Initial state: configured initial inventories, empty pipeline, zero accumulators."""
    net = network(cfg)
    if trace is not None:
        _demand_array(cfg, trace)
    z = np.zeros(batch_shape)
    zm = np.zeros(batch_shape + (net.n_markets,), dtype=np.int64)
    return SimState(
        inventories=np.broadcast_to(net.initial_inventory, batch_shape + (net.n_nodes,)).copy(),
        pipeline=np.zeros(batch_shape + (net.n_routes, net.lead_time), dtype=np.int64),
        cumulative_emission=z.copy(),
        avg_sl_inequality=z.copy(),
        clock=0,
        sl_numerators=zm.copy(),
        sl_denominators=zm.copy(),
        last_demand=zm.copy(),
    )


def _demand_array(cfg: ScenarioConfig, trace) -> np.ndarray:
    if isinstance(trace, DemandTrace):
        if tuple(trace.markets) != tuple(cfg.echelons.markets):
            raise ValueError(f"trace markets {trace.markets} do not match scenario markets {cfg.echelons.markets}")
        d = trace.demand
    else:
        d = np.asarray(trace)
    if d.shape[-2:] != (cfg.horizon, len(cfg.echelons.markets)):
        raise ValueError(
            f"trace shape {d.shape[-2:]} does not match horizon {cfg.horizon} x {len(cfg.echelons.markets)} markets"
        )
    return d


def _pairwise_gap(sl: np.ndarray) -> np.ndarray:
    """Half the sum over ordered pairs of |SL_j - SL_j'| (= sum over unordered pairs)."""
    m = sl.shape[-1]
    iu, ju = np.triu_indices(m, k=1)
    return np.abs(sl[..., iu] - sl[..., ju]).sum(axis=-1)


def step(
    state: SimState,
    action,
    cfg: ScenarioConfig,
    trace,
    *,
    want_observation: bool = True,
) -> tuple[SimState, StepOutcome]:
    """Advance every episode in ``state`` by one period.

    ``action`` is an :class:`ActionVector` or a flat array laid out as
    ``[production per manufacturer, shipment per route]``.  Shipments outside
    ``[0, Cap]`` are clipped and flagged in ``info["clipped"]``.
    """
    net = network(cfg)
    t = state.clock
    if t >= net.horizon:
        raise EpisodeOver(f"episode already terminal at t={t}")
    demand = _demand_array(cfg, trace)
    flat = action.flat if isinstance(action, ActionVector) else np.asarray(action, dtype=float)
    flat = np.broadcast_to(flat, state.batch_shape + flat.shape[-1:])
    requested_prod = flat[..., : net.n_mfg]
    requested_ship = flat[..., net.n_mfg :]
    clipped = np.any((requested_ship < 0) | (requested_ship > net.capacity), axis=-1)
    ship = np.rint(np.clip(requested_ship, 0.0, net.capacity)).astype(np.int64)

    arrivals = state.pipeline[..., 0]
    production = arrivals @ net.into_mfg
    inflow = arrivals @ net.into_node
    outflow = ship @ net.out_of_node
    inv = state.inventories + inflow - outflow

    d = demand[..., t, :]
    ret_inv = inv[..., net.retailer_idx]
    absorbed = np.minimum(np.maximum(ret_inv, 0), d)
    inv[..., net.retailer_idx] = ret_inv - absorbed

    pipeline = np.concatenate([state.pipeline[..., 1:], ship[..., None]], axis=-1)

    ret_arrivals = arrivals @ net.into_retailer
    revenue = ret_arrivals @ net.price
    pc = production @ net.unit_production_cost
    tc = (ship @ net.transport_cost) * net.lead_time
    held = np.maximum(inv, 0)
    ic = held @ net.holding_cost
    emission = held @ net.holding_emission + production @ net.production_emission
    emission = emission + (ship @ net.transport_emission) * net.lead_time
    with np.errstate(divide="ignore", invalid="ignore"):
        sl = np.where(d > 0, np.minimum(ret_arrivals / np.where(d > 0, d, 1), 1.0), 1.0)
    gap = _pairwise_gap(sl)
    profit = revenue - (pc + tc + ic)

    shortfall = np.minimum(inv, 0).sum(axis=-1)
    penalty = shortfall * net.big_m
    raw = np.stack([profit, -emission, -gap], axis=-1)
    reward = raw.copy()
    reward[..., 0] += penalty
    reward[..., 1] += penalty

    new = SimState(
        inventories=inv,
        pipeline=pipeline,
        cumulative_emission=state.cumulative_emission + emission,
        avg_sl_inequality=(state.avg_sl_inequality * t + gap) / (t + 1),
        clock=t + 1,
        sl_numerators=state.sl_numerators + ret_arrivals,
        sl_denominators=state.sl_denominators + d,
        last_demand=np.broadcast_to(d, state.last_demand.shape).copy(),
    )
    info = {
        "t": t,
        "requested_production": requested_prod,
        "production": production,
        "shipments": ship,
        "arrivals": arrivals,
        "inflow": inflow,
        "outflow": outflow,
        "inventories": inv,
        "revenue": revenue,
        "PC": pc,
        "TC": tc,
        "IC": ic,
        "E": emission,
        "F": gap,
        "SL": sl,
        "penalty": penalty,
        "shortfall": -shortfall,
        "demand": np.broadcast_to(d, absorbed.shape),
        "absorbed": absorbed,
        "demand_loss": d - absorbed,
        "clipped": clipped,
    }
    obs = observe(new, cfg) if want_observation else None
    return new, StepOutcome(reward, raw, penalty, obs, info)


# --------------------------------------------------------------------------
# observation


def observation_dim(cfg: ScenarioConfig) -> int:
    net = network(cfg)
    return net.n_nodes + net.n_routes * net.lead_time + 2 + net.n_markets


def observation_bounds(cfg: ScenarioConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-component (low, high) used to map the raw state into [0, 1].

    Layout and bounds:

    * inventory of each node: ``[0, I0 + L * Cap * in_degree]``;
    * each pipeline slot: ``[0, Cap]``;
    * cumulative emission: ``[0, |reference emission|]``;
    * mean SL inequality: ``[0, floor(M/2) * ceil(M/2)]`` (its maximum);
    * previous-period demand per market: ``[0, (1 + a) * (mean + 3 sd)]``.
    """
    cached = cfg._cache.get("obs_bounds")
    if cached is not None:
        return cached
    net = network(cfg)
    inv_hi = net.initial_inventory + net.lead_time * net.capacity * net.in_degree
    pipe_hi = np.full(net.n_routes * net.lead_time, net.capacity)
    ce_hi = max(abs(cfg.reference_point[1]), 1.0)
    m = net.n_markets
    af_hi = max((m // 2) * (m - m // 2), 1)
    dem_hi = []
    for mk in net.markets:
        spec = cfg.demands[mk]
        dem_hi.append(max((1.0 + spec.seasonal_amplitude) * (spec.base_mean + 3.0 * spec.base_std), 1.0))
    high = np.concatenate([np.maximum(inv_hi, 1.0), pipe_hi, [ce_hi, af_hi], dem_hi]).astype(float)
    low = np.zeros_like(high)
    cfg._cache["obs_bounds"] = (low, high)
    return low, high


def observe(state: SimState, cfg: ScenarioConfig) -> np.ndarray:
    """Normalised observation ``[inventories, pipeline, CE, AF, last demand]``."""
    low, high = observation_bounds(cfg)
    bs = state.batch_shape
    raw = np.concatenate(
        [
            state.inventories,
            state.pipeline.reshape(bs + (-1,)),
            state.cumulative_emission[..., None],
            state.avg_sl_inequality[..., None],
            state.last_demand,
        ],
        axis=-1,
    )
    return np.clip((raw - low) / (high - low), 0.0, 1.0)


def action_bounds(cfg: ScenarioConfig) -> tuple[np.ndarray, np.ndarray]:
    """(low, high) per flat action component: production then routes."""
    net = network(cfg)
    high = np.concatenate([np.full(net.n_mfg, net.production_upper), np.full(net.n_routes, net.capacity)])
    return np.zeros_like(high), high


# --------------------------------------------------------------------------
# rollout


@dataclass
class RolloutResult:
    totals: np.ndarray  # (..., 3) undiscounted raw sums
    discounted: np.ndarray  # (..., 3) discounted penalised sums
    shortfall: np.ndarray  # (...,) sum over periods and nodes of max(0, -I)
    log: list[dict] | None = None


def rollout(
    cfg: ScenarioConfig,
    trace,
    policy: Callable[[np.ndarray, int], np.ndarray],
    discount: float = 1.0,
    *,
    batch_shape: tuple[int, ...] | None = None,
    keep_log: bool = True,
) -> RolloutResult:
    """Run a full episode.

    ``policy(observation, t)`` returns flat actions (batched like the
    observation).  ``trace`` may be a :class:`DemandTrace` or a demand array
    whose leading dimensions broadcast against ``batch_shape``.
    """
    if not 0 < discount <= 1:
        raise ValueError("discount must lie in (0, 1]")
    demand = _demand_array(cfg, trace)
    if batch_shape is None:
        batch_shape = demand.shape[:-2]
    state = reset(cfg, demand, batch_shape)
    totals = np.zeros(batch_shape + (3,))
    disc = np.zeros(batch_shape + (3,))
    short = np.zeros(batch_shape)
    obs = observe(state, cfg)
    log = [] if keep_log else None
    g = 1.0
    for t in range(cfg.horizon):
        action = policy(obs, t)
        state, out = step(state, action, cfg, demand)
        obs = out.observation
        totals += out.raw_reward
        disc += g * out.reward
        short += out.info["shortfall"]
        g *= discount
        if log is not None:
            log.append(out.info)
    return RolloutResult(totals, disc, short, log)


# --------------------------------------------------------------------------
# episode log CSV


def _log_columns(cfg: ScenarioConfig) -> list[str]:
    net = network(cfg)
    cols = ["t"]
    cols += [f"inv_{n}" for n in net.nodes]
    cols += [f"inflow_{n}" for n in net.nodes]
    cols += [f"outflow_{n}" for n in net.nodes]
    cols += [f"ship_{a}_{b}" for a, b in net.routes]
    cols += [f"prod_{k}" for k in net.manufacturers]
    cols += [f"req_prod_{k}" for k in net.manufacturers]
    cols += ["revenue", "PC", "TC", "IC", "E", "F", "penalty"]
    for key in ("SL", "demand", "absorbed", "demand_loss"):
        cols += [f"{key}_{m}" for m in net.markets]
    return cols


def _log_row(info: dict) -> list:
    row = [int(info["t"])]
    for key in ("inventories", "inflow", "outflow", "shipments", "production"):
        row += [int(v) for v in np.ravel(info[key])]
    row += [repr(float(v)) for v in np.ravel(info["requested_production"])]
    for key in ("revenue", "PC", "TC", "IC", "E", "F", "penalty"):
        row.append(repr(float(info[key])))
    row += [repr(float(v)) for v in np.ravel(info["SL"])]
    for key in ("demand", "absorbed", "demand_loss"):
        row += [int(v) for v in np.ravel(info[key])]
    return row


def write_episode_log(cfg: ScenarioConfig, log: list[dict], path: str | Path) -> None:
    """One row per period for an unbatched episode."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_log_columns(cfg))
        for info in log:
            w.writerow(_log_row(info))


def read_episode_log(path: str | Path) -> dict[str, np.ndarray]:
    """Columns of an episode log as arrays keyed by header name."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [list(map(float, r)) for r in reader]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {h: data[:, i] for i, h in enumerate(header)}
