"""Policy search over the sequential simulator.

Two multi-policy solvers share one improvement operator:

* :func:`run_scalarised_baseline` improves one policy per fixed weight
  vector (Das-Dennis lattice by default) and keeps the non-dominated results;
* :func:`run_morld` improves a population of weighted subproblems in rounds,
  optionally letting neighbouring subproblems adopt each other's candidates
  (shared candidate pool) and nudging weights with Pareto simulated annealing
  (PSA) between rounds.  Every feasible candidate is offered to an external
  Pareto archive.

Policies are small deterministic tanh networks.  Improvement uses a greedy
(1, lambda) evolution strategy: each iteration perturbs the incumbent
parameters with Gaussian noise, scores every perturbation by its scalarised,
discounted, penalised return averaged over a fixed set of demand traces, and
keeps the best one if it beats the incumbent.

Randomness: ``SeedSequence(seed).spawn(3)`` gives the evaluation-trace
stream, the bound-estimation stream and the subproblem parent stream; the
parent is spawned once more per subproblem (or per weight in the baseline),
so subproblem ``i`` draws the same numbers whatever the population size.
"""

from __future__ import annotations

import struct
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import env
from .demand import sample_traces
from .metrics import (
    Front,
    NormalisationBounds,
    ParetoArchive,
    das_dennis,
    eum,
    hypervolume,
    pareto_filter,
    sparsity,
)
from .scenario import ScenarioConfig

__all__ = [
    "Policy",
    "SearchConfig",
    "SubProblem",
    "ESRun",
    "act",
    "scalarise",
    "compute_bounds",
    "bound_search_points",
    "es_improve",
    "evaluation_traces",
    "initial_weights",
    "run_scalarised_baseline",
    "psa_adapt",
    "run_morld",
    "save_policy",
    "load_policy",
]


@dataclass
class SearchConfig:
    discount: float = 0.99
    es_population: int = 16
    es_step: float = 0.1
    es_step_decay: float = 0.999
    iterations: int = 125  # 2000 candidate evaluations at es_population 16
    eval_episodes: int = 5
    psa_enabled: bool = False
    psa_delta: float = 1.05
    shared_pool_enabled: bool = False
    exchange_interval: int = 10
    population_size: int = 6
    neighbourhood_size: int = 1
    update_passes: int = 10  # accepted for config compatibility; the ES has no update passes
    hidden: tuple[int, ...] = (32,)
    init_scale: float = 0.1
    bounds_iterations: int = 10
    seed: int = 0

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if not self.psa_delta > 1:
            raise ValueError("psa_delta must exceed 1")
        if not self.es_step > 0:
            raise ValueError("es_step must be positive")
        if not 0 < self.discount <= 1:
            raise ValueError("discount must lie in (0, 1]")
        if self.es_population < 1 or self.eval_episodes < 1:
            raise ValueError("es_population and eval_episodes must be >= 1")
        if self.exchange_interval < 1 or self.population_size < 1:
            raise ValueError("exchange_interval and population_size must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


# --------------------------------------------------------------------------
# policy network


def _layer_sizes(obs_dim: int, hidden: tuple[int, ...], act_dim: int) -> list[tuple[int, int]]:
    dims = [obs_dim, *hidden, act_dim]
    return list(zip(dims[:-1], dims[1:]))


def n_params(obs_dim: int, hidden: tuple[int, ...], act_dim: int) -> int:
    return sum(i * o + o for i, o in _layer_sizes(obs_dim, hidden, act_dim))


def _unpack(params: np.ndarray, obs_dim: int, hidden: tuple[int, ...], act_dim: int):
    lead = params.shape[:-1]
    layers, k = [], 0
    for i, o in _layer_sizes(obs_dim, hidden, act_dim):
        w = params[..., k : k + i * o].reshape(lead + (o, i))
        k += i * o
        b = params[..., k : k + o]
        k += o
        layers.append((w, b))
    return layers


def _forward(layers, obs: np.ndarray) -> np.ndarray:
    h = obs
    for w, b in layers:
        h = np.tanh(np.matmul(w, h[..., None])[..., 0] + b)
    return h


@dataclass(frozen=True)
class Policy:
    """Deterministic tanh MLP mapping observations to actions in [-1, 1].

    :func:`act` rescales the output affinely onto the action bounds.
    """

    params: np.ndarray
    obs_dim: int
    hidden: tuple[int, ...]
    act_dim: int
    action_low: np.ndarray
    action_high: np.ndarray

    @classmethod
    def for_scenario(cls, cfg: ScenarioConfig, hidden=(32,), params: np.ndarray | None = None) -> Policy:
        obs_dim, act_dim = env.observation_dim(cfg), cfg.action_dim
        hidden = tuple(hidden)
        if params is None:
            params = np.zeros(n_params(obs_dim, hidden, act_dim))
        lo, hi = env.action_bounds(cfg)
        return cls(np.asarray(params, dtype=float), obs_dim, hidden, act_dim, lo, hi)

    @property
    def n_params(self) -> int:
        return n_params(self.obs_dim, self.hidden, self.act_dim)

    def with_params(self, params: np.ndarray) -> Policy:
        return replace(self, params=np.asarray(params, dtype=float))

    def squashed(self, observation: np.ndarray, params: np.ndarray | None = None) -> np.ndarray:
        p = self.params if params is None else params
        return _forward(_unpack(p, self.obs_dim, self.hidden, self.act_dim), observation)


def _to_action(out: np.ndarray, low: np.ndarray, high: np.ndarray) -> np.ndarray:
    return low + (out + 1.0) * 0.5 * (high - low)


def act(policy: Policy, observation: np.ndarray) -> np.ndarray:
    """Flat action for ``observation`` (batched observations give batched actions)."""
    return _to_action(policy.squashed(observation), policy.action_low, policy.action_high)


# --------------------------------------------------------------------------
# scalarisation and evaluation


def scalarise(r, w, bounds: NormalisationBounds | None = None) -> np.ndarray | float:
    """Weighted sum of bounds-normalised objectives (vectorised over ``r``)."""
    r = np.asarray(r, dtype=float)
    v = r if bounds is None else bounds.normalise(r)
    out = v @ np.asarray(w, dtype=float)
    return float(out) if np.ndim(out) == 0 else out


def evaluation_traces(cfg: ScenarioConfig, seed: int, n: int) -> np.ndarray:
    """The fixed demand traces (``(n, T, M)``) used to score candidates."""
    ss = np.random.SeedSequence(seed).spawn(3)[0]
    seeds = np.random.default_rng(ss).integers(0, 2**31 - 1, size=n)
    return sample_traces(cfg, seeds.tolist())


class _Evaluator:
    """Batched rollout of many parameter vectors over the same traces."""

    def __init__(self, cfg: ScenarioConfig, template: Policy, traces: np.ndarray, discount: float):
        self.cfg = cfg
        self.template = template
        self.traces = np.asarray(traces)
        self.discount = discount

    def __call__(self, params: np.ndarray):
        params = np.atleast_2d(params)
        n, e = len(params), len(self.traces)
        tp = self.template
        layers = _unpack(params[:, None, :], tp.obs_dim, tp.hidden, tp.act_dim)

        def pol(obs, t):
            return _to_action(_forward(layers, obs), tp.action_low, tp.action_high)

        res = env.rollout(self.cfg, self.traces, pol, self.discount, batch_shape=(n, e), keep_log=False)
        feasible = np.all(res.shortfall == 0, axis=1)
        return res.discounted.mean(axis=1), res.totals.mean(axis=1), feasible


class ESRun:
    """Resumable greedy evolution-strategy improvement of one policy."""

    def __init__(
        self,
        params: np.ndarray,
        weight: np.ndarray,
        bounds: NormalisationBounds | None,
        evaluator: Callable,
        search: SearchConfig,
        rng: np.random.Generator,
    ):
        self.params = np.asarray(params, dtype=float)
        self.weight = np.asarray(weight, dtype=float)
        self.bounds = bounds
        self.evaluate = evaluator
        self.search = search
        self.rng = rng
        self.sigma = search.es_step
        fvec, raw, feas = evaluator(self.params[None])
        self.fitness_vector, self.objective, self.feasible = fvec[0], raw[0], bool(feas[0])
        self.fitness = scalarise(self.fitness_vector, self.weight, bounds)
        self.fitness_history = [self.fitness]
        self.iterations = 0

    def step(self):
        """One iteration; returns ``(candidates, fitness vectors, raw totals, feasible)``."""
        eps = self.rng.standard_normal((self.search.es_population, self.params.size))
        cands = self.params + self.sigma * eps
        fvec, raw, feas = self.evaluate(cands)
        fit = scalarise(fvec, self.weight, self.bounds)
        b = int(np.argmax(fit))
        if fit[b] > self.fitness:
            self.adopt(cands[b], fvec[b], raw[b], bool(feas[b]), float(fit[b]))
        self.sigma *= self.search.es_step_decay
        self.iterations += 1
        self.fitness_history.append(self.fitness)
        return cands, fvec, raw, feas

    def adopt(self, params, fitness_vector, objective, feasible, fitness=None):
        self.params = np.asarray(params, dtype=float).copy()
        self.fitness_vector = np.asarray(fitness_vector, dtype=float)
        self.objective = np.asarray(objective, dtype=float)
        self.feasible = feasible
        self.fitness = scalarise(self.fitness_vector, self.weight, self.bounds) if fitness is None else fitness

    def reweight(self, weight: np.ndarray) -> None:
        self.weight = np.asarray(weight, dtype=float)
        self.fitness = scalarise(self.fitness_vector, self.weight, self.bounds)


def _initial_params(template: Policy, rng: np.random.Generator, scale: float) -> np.ndarray:
    return rng.normal(0.0, scale, size=template.n_params)


def es_improve(
    policy: Policy,
    weight,
    cfg: ScenarioConfig,
    traces,
    search: SearchConfig,
    budget: int,
    bounds: NormalisationBounds | None = None,
    rng: np.random.Generator | None = None,
) -> Policy:
    """Improve ``policy`` for ``budget`` ES iterations under ``weight``.

    ``traces`` is a demand array ``(E, T, M)`` or a callable returning one.
    """
    if budget <= 0:
        return policy
    if callable(traces):
        traces = traces(search.eval_episodes)
    rng = rng if rng is not None else np.random.default_rng(search.seed)
    run = ESRun(policy.params, weight, bounds, _Evaluator(cfg, policy, traces, search.discount), search, rng)
    for _ in range(budget):
        run.step()
    return policy.with_params(run.params)


def bound_search_points(cfg: ScenarioConfig, seed: int, search: SearchConfig | None = None) -> list[np.ndarray]:
    """Raw objective totals seen by the three single-objective searches.

    Entry ``b`` stacks every candidate evaluated while improving a policy
    with the unit weight on objective ``b``.
    """
    search = search or SearchConfig(seed=seed)
    traces = evaluation_traces(cfg, seed, search.eval_episodes)
    template = Policy.for_scenario(cfg, search.hidden)
    evaluator = _Evaluator(cfg, template, traces, search.discount)
    streams = np.random.SeedSequence(seed).spawn(3)[1].spawn(3)
    out = []
    for b in range(3):
        rng = np.random.default_rng(streams[b])
        run = ESRun(_initial_params(template, rng, search.init_scale), np.eye(3)[b], None, evaluator, search, rng)
        seen = [run.objective[None]]
        for _ in range(search.bounds_iterations):
            seen.append(run.step()[2])
        out.append(np.vstack(seen))
    return out


def compute_bounds(cfg: ScenarioConfig, seed: int, search: SearchConfig | None = None) -> NormalisationBounds:
    """Objective ranges from short single-objective searches.

    The bounds are the min and max of every objective over all candidate
    evaluations of the three searches in :func:`bound_search_points`,
    widened by 5% of the range on both sides.
    """
    pts = np.vstack(bound_search_points(cfg, seed, search))
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = np.where(hi > lo, hi - lo, np.maximum(np.abs(hi), 1.0))
    return NormalisationBounds(lo - 0.05 * span, hi + 0.05 * span)


def initial_weights(n: int, objectives: int = 3) -> np.ndarray:
    """``n`` weights from the coarsest Das-Dennis lattice holding at least ``n``."""
    h = 1
    while len(das_dennis(objectives, h)) < n:
        h += 1
    lattice = das_dennis(objectives, h)
    idx = np.round(np.linspace(0, len(lattice) - 1, n)).astype(int)
    return lattice[idx]


# --------------------------------------------------------------------------
# scalarised baseline


def run_scalarised_baseline(
    cfg: ScenarioConfig,
    search: SearchConfig,
    weights=None,
    bounds: NormalisationBounds | None = None,
) -> tuple[Front, list[dict]]:
    """Independent ES per weight; the front is the non-dominated feasible results.

    Returns the front (ids index into ``results``) and one record per weight
    with the final policy, its mean raw objective totals and feasibility.
    """
    weights = das_dennis(3, 5) if weights is None else np.atleast_2d(np.asarray(weights, dtype=float))
    traces = evaluation_traces(cfg, search.seed, search.eval_episodes)
    if bounds is None:
        bounds = compute_bounds(cfg, search.seed, search)
    template = Policy.for_scenario(cfg, search.hidden)
    evaluator = _Evaluator(cfg, template, traces, search.discount)
    streams = np.random.SeedSequence(search.seed).spawn(3)[2].spawn(len(weights))
    results = []
    for i, w in enumerate(weights):
        rng = np.random.default_rng(streams[i])
        run = ESRun(_initial_params(template, rng, search.init_scale), w, bounds, evaluator, search, rng)
        for _ in range(search.iterations):
            run.step()
        results.append(
            {
                "weight": w,
                "policy": template.with_params(run.params),
                "objectives": run.objective,
                "fitness": run.fitness,
                "feasible": run.feasible,
                "fitness_history": run.fitness_history,
            }
        )
    ok = [i for i, r in enumerate(results) if r["feasible"]]
    pts = np.array([results[i]["objectives"] for i in ok]).reshape(-1, 3)
    return pareto_filter(pts, ok), results


# --------------------------------------------------------------------------
# decomposition with PSA and shared candidate pool


@dataclass
class SubProblem:
    weight: np.ndarray
    policy: Policy | None = None
    neighbourhood: tuple[int, ...] = ()
    best_scalarised: float = -np.inf
    objective: np.ndarray | None = None  # mean raw totals of the incumbent
    run: ESRun | None = field(default=None, repr=False)


def psa_adapt(
    sub: SubProblem,
    archive: ParetoArchive,
    delta: float,
    bounds: NormalisationBounds | None = None,
) -> np.ndarray:
    """Pareto simulated annealing weight update.

    Finds the archive point nearest to the subproblem's objective vector
    (Euclidean, on normalised values, excluding the point itself).  For each
    objective where the subproblem is no better than that neighbour the weight
    is multiplied by ``delta``, otherwise divided by it; the result is
    renormalised onto the simplex.
    """
    lam = np.asarray(sub.weight, dtype=float)
    f = np.asarray(sub.objective, dtype=float)
    pts = archive.points
    if len(pts) == 0:
        return lam.copy()
    others = pts[~np.all(pts == f, axis=1)]
    if len(others) == 0:
        return lam.copy()
    fn = f if bounds is None else bounds.normalise(f)
    on = others if bounds is None else bounds.normalise(others)
    nearest = others[int(np.argmin(((on - fn) ** 2).sum(axis=1)))]
    new = np.where(f <= nearest, lam * delta, lam / delta)
    return new / new.sum()


@dataclass
class MorldResult:
    archive: ParetoArchive
    history: list[dict]
    subproblems: list[SubProblem]
    bounds: NormalisationBounds
    template: Policy

    def front(self) -> Front:
        return self.archive.front()


def _neighbourhoods(weights: np.ndarray, k: int) -> list[tuple[int, ...]]:
    n = len(weights)
    out = []
    for i in range(n):
        d = ((weights - weights[i]) ** 2).sum(axis=1)
        d[i] = np.inf
        order = np.argsort(d, kind="stable")
        out.append(tuple(int(j) for j in order[: min(k, n - 1)]))
    return out


def run_morld(
    cfg: ScenarioConfig,
    search: SearchConfig,
    weights=None,
    bounds: NormalisationBounds | None = None,
    eum_weights=None,
    callback=None,
) -> MorldResult:
    """Decomposition-based multi-policy search.

    The iteration budget is spent in rounds of ``exchange_interval`` ES
    iterations per subproblem.  At each exchange point, in subproblem order:
    candidates from the round are offered to neighbouring subproblems (when
    the shared pool is enabled; sharing is symmetric, so i and j exchange if
    either lists the other as a neighbour), feasible candidates enter the archive, and
    PSA rescales the weights (when enabled).  ``history`` records the archive
    hypervolume, EUM and sparsity after every round, each subproblem's
    incumbent fitness and how much the pool raised it (``pool_gain_i``,
    measured before any PSA reweighting).
    """
    if weights is None:
        weights = initial_weights(search.population_size)
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    traces = evaluation_traces(cfg, search.seed, search.eval_episodes)
    if bounds is None:
        bounds = compute_bounds(cfg, search.seed, search)
    eum_weights = das_dennis(3, 12) if eum_weights is None else eum_weights
    template = Policy.for_scenario(cfg, search.hidden)
    evaluator = _Evaluator(cfg, template, traces, search.discount)
    streams = np.random.SeedSequence(search.seed).spawn(3)[2].spawn(len(weights))
    nbrs = _neighbourhoods(weights, search.neighbourhood_size)
    ref = np.asarray(cfg.reference_point, dtype=float)

    subs: list[SubProblem] = []
    for i, w in enumerate(weights):
        rng = np.random.default_rng(streams[i])
        run = ESRun(_initial_params(template, rng, search.init_scale), w, bounds, evaluator, search, rng)
        subs.append(SubProblem(w.copy(), template.with_params(run.params), nbrs[i], run.fitness, run.objective, run))

    archive = ParetoArchive(3)
    for i, s in enumerate(subs):
        if s.run.feasible:
            archive.insert(s.run.objective[None], [(i, s.run.params.copy())])

    history: list[dict] = []

    def record(rnd: int, done: int, gains=None):
        rec = {
            "round": rnd,
            "iterations": done,
            "evaluations": len(subs) * (1 + done * search.es_population),
            "hypervolume": hypervolume(archive.points, ref),
            "eum": eum(archive.points, eum_weights, bounds) if len(archive) else np.nan,
            "sparsity": sparsity(archive.points, bounds),
            "archive_size": len(archive),
        }
        for i, s in enumerate(subs):
            rec[f"best_scalarised_{i}"] = s.best_scalarised
        for i in range(len(subs)):
            rec[f"pool_gain_{i}"] = 0.0 if gains is None else gains[i]
        history.append(rec)
        if callback is not None:
            callback(rec)

    record(0, 0)
    done, rnd = 0, 0
    while done < search.iterations:
        chunk = min(search.exchange_interval, search.iterations - done)
        pooled = []
        for s in subs:
            batches = [s.run.step() for _ in range(chunk)]
            pooled.append(tuple(np.concatenate(parts) for parts in zip(*batches)))
        done += chunk
        rnd += 1

        before = [s.run.fitness for s in subs]
        if search.shared_pool_enabled and len(subs) > 1:
            for i, s in enumerate(subs):
                donors = [j for j in range(len(subs)) if j != i and (i in nbrs[j] or j in nbrs[i])]
                if not donors:
                    continue
                cands = np.concatenate([pooled[j][0] for j in donors])
                fvec = np.concatenate([pooled[j][1] for j in donors])
                raw = np.concatenate([pooled[j][2] for j in donors])
                feas = np.concatenate([pooled[j][3] for j in donors])
                fit = scalarise(fvec, s.run.weight, bounds)
                b = int(np.argmax(fit))
                if fit[b] > s.run.fitness:
                    s.run.adopt(cands[b], fvec[b], raw[b], bool(feas[b]), float(fit[b]))

        gains = [s.run.fitness - b for s, b in zip(subs, before)]
        for i, (cands, _, raw, feas) in enumerate(pooled):
            if feas.any():
                idx = np.flatnonzero(feas)
                archive.insert(raw[idx], [(i, cands[k].copy()) for k in idx])

        for s in subs:
            s.objective = s.run.objective
            if search.psa_enabled:
                s.run.reweight(psa_adapt(s, archive, search.psa_delta, bounds))
            s.weight = s.run.weight.copy()
            s.best_scalarised = s.run.fitness
            s.policy = template.with_params(s.run.params)
        record(rnd, done, gains)

    return MorldResult(archive, history, subs, bounds, template)


# --------------------------------------------------------------------------
# snapshots

_MAGIC = b"ECHPOL"
_VERSION = 1


def save_policy(policy: Policy, path: str | Path) -> None:
    """Binary snapshot: magic, version, dims, then float64 parameters and action bounds."""
    dims = [policy.obs_dim, policy.act_dim, len(policy.hidden), *policy.hidden]
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<H", _VERSION))
        fh.write(struct.pack(f"<{len(dims)}I", *dims))
        fh.write(struct.pack("<Q", policy.params.size))
        fh.write(np.asarray(policy.params, dtype="<f8").tobytes())
        fh.write(np.asarray(policy.action_low, dtype="<f8").tobytes())
        fh.write(np.asarray(policy.action_high, dtype="<f8").tobytes())


def load_policy(path: str | Path) -> Policy:
    data = Path(path).read_bytes()
    if data[:6] != _MAGIC:
        raise ValueError(f"{path}: not a policy snapshot")
    (version,) = struct.unpack_from("<H", data, 6)
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    off = 8
    obs_dim, act_dim, nh = struct.unpack_from("<3I", data, off)
    off += 12
    hidden = struct.unpack_from(f"<{nh}I", data, off)
    off += 4 * nh
    (n,) = struct.unpack_from("<Q", data, off)
    off += 8
    params = np.frombuffer(data, dtype="<f8", count=n, offset=off).astype(float)
    off += 8 * n
    low = np.frombuffer(data, dtype="<f8", count=act_dim, offset=off).astype(float)
    off += 8 * act_dim
    high = np.frombuffer(data, dtype="<f8", count=act_dim, offset=off).astype(float)
    return Policy(params, obs_dim, tuple(hidden), act_dim, low, high)
