"""Constrained NSGA-II over whole-horizon decision vectors.

Selection follows Deb's constrained domination: a feasible solution beats an
infeasible one, two infeasible solutions compare by total inventory
shortfall, and two feasible solutions compare by Pareto dominance.  The loop
is (mu + lambda) elitist: offspring are merged with the parents, sorted into
fronts and truncated back to the population size by rank and crowding
distance.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import horizon
from .metrics import Front, ParetoArchive, hypervolume, pareto_filter, sparsity
from .scenario import ScenarioConfig

__all__ = [
    "Nsga2Config",
    "Nsga2Result",
    "constrained_dominance_matrix",
    "nondominated_sort",
    "crowding_distance",
    "sbx_crossover",
    "polynomial_mutation",
    "run",
]


@dataclass
class Nsga2Config:
    population_size: int = 300
    offspring_per_generation: int = 30
    crossover_probability: float = 0.9
    crossover_eta: float = 15.0
    mutation_eta: float = 20.0
    mutation_probability: float | None = None  # None -> 1 / n_genes
    generations: int = 200
    seed: int = 0
    replications: int = 1

    def __post_init__(self):
        if self.population_size < 4:
            raise ValueError("population_size must be >= 4")
        if self.offspring_per_generation < 2:
            raise ValueError("offspring_per_generation must be >= 2")
        for name in ("crossover_probability", "mutation_probability"):
            v = getattr(self, name)
            if v is not None and not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.crossover_eta <= 0 or self.mutation_eta <= 0:
            raise ValueError("distribution indices must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def constrained_dominance_matrix(objectives: np.ndarray, violations: np.ndarray) -> np.ndarray:
    """``D[i, j]`` is True when individual ``i`` constrained-dominates ``j``."""
    f = np.asarray(objectives, dtype=float)
    v = np.asarray(violations, dtype=float)
    feas = v <= 0
    ge = np.all(f[:, None, :] >= f[None, :, :], axis=2)
    gt = np.any(f[:, None, :] > f[None, :, :], axis=2)
    pareto = ge & gt
    both_feas = feas[:, None] & feas[None, :]
    both_inf = ~feas[:, None] & ~feas[None, :]
    return (
        (feas[:, None] & ~feas[None, :])
        | (both_inf & (v[:, None] < v[None, :]))
        | (both_feas & pareto)
    )


def nondominated_sort(objectives: np.ndarray, violations: np.ndarray | None = None) -> list[np.ndarray]:
    """Partition individuals into fronts of increasing rank."""
    f = np.atleast_2d(np.asarray(objectives, dtype=float))
    n = len(f)
    if violations is None:
        violations = np.zeros(n)
    dom = constrained_dominance_matrix(f, violations)
    count = dom.sum(axis=0)
    remaining = np.ones(n, dtype=bool)
    fronts = []
    while remaining.any():
        current = np.flatnonzero(remaining & (count == 0))
        fronts.append(current)
        remaining[current] = False
        count = count - dom[current].sum(axis=0)
    return fronts


def crowding_distance(values: np.ndarray) -> np.ndarray:
    """Crowding distance of each point within one front.

    Boundary points of every objective get ``inf``; interior points sum the
    normalised gap between their neighbours.  Objectives with zero range add
    nothing to the interior.
    """
    f = np.asarray(values, dtype=float)
    if f.ndim == 1:
        f = f[:, None]
    n, m = f.shape
    dist = np.zeros(n)
    if n <= 2:
        dist[:] = np.inf
        return dist
    for k in range(m):
        order = np.argsort(f[:, k], kind="stable")
        col = f[order, k]
        dist[order[0]] = dist[order[-1]] = np.inf
        span = col[-1] - col[0]
        if span > 0:
            dist[order[1:-1]] += (col[2:] - col[:-2]) / span
    return dist


def sbx_crossover(p1, p2, eta: float, prob: float, rng: np.random.Generator, lower, upper):
    """Simulated binary crossover; each gene crosses with probability 1/2.

    With probability ``1 - prob`` both children are copies of the parents.
    Children are clipped into ``[lower, upper]``.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if rng.random() >= prob:
        return p1.copy(), p2.copy()
    n = p1.size
    u = rng.random(n)
    beta = np.where(u <= 0.5, (2.0 * u) ** (1.0 / (eta + 1.0)), (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (eta + 1.0)))
    cross = rng.random(n) < 0.5
    swap = rng.random(n) < 0.5
    c1 = 0.5 * ((1.0 + beta) * p1 + (1.0 - beta) * p2)
    c2 = 0.5 * ((1.0 - beta) * p1 + (1.0 + beta) * p2)
    c1, c2 = np.where(swap, c2, c1), np.where(swap, c1, c2)
    c1 = np.where(cross, c1, p1)
    c2 = np.where(cross, c2, p2)
    return np.clip(c1, lower, upper), np.clip(c2, lower, upper)


def polynomial_mutation(dv, eta: float, prob: float, rng: np.random.Generator, lower, upper) -> np.ndarray:
    """Bounded polynomial mutation (Deb and Goyal), gene-wise with probability ``prob``."""
    x = np.asarray(dv, dtype=float).copy()
    lower = np.broadcast_to(np.asarray(lower, dtype=float), x.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), x.shape)
    mask = rng.random(x.size) < prob
    u = rng.random(x.size)
    if not mask.any():
        return x
    span = upper - lower
    safe = np.where(span > 0, span, 1.0)
    dl = (x - lower) / safe
    dr = (upper - x) / safe
    e1 = eta + 1.0
    down = u < 0.5
    val_d = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - dl) ** e1
    val_u = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - dr) ** e1
    with np.errstate(invalid="ignore"):
        dq = np.where(down, val_d ** (1.0 / e1) - 1.0, 1.0 - val_u ** (1.0 / e1))
    step = np.where(mask & (span > 0), dq * span, 0.0)
    return np.clip(x + step, lower, upper)


@dataclass
class Nsga2Result:
    front: Front  # non-dominated feasible members of the final population
    archive: ParetoArchive  # every feasible objective vector ever evaluated, filtered
    history: list[dict] = field(default_factory=list)
    population: np.ndarray | None = None
    objectives: np.ndarray | None = None
    violations: np.ndarray | None = None
    solutions: dict = field(default_factory=dict)  # front id -> decision vector


def _select(population_idx_rank: np.ndarray, crowd: np.ndarray, rng: np.random.Generator, k: int) -> np.ndarray:
    n = len(population_idx_rank)
    a = rng.integers(0, n, size=k)
    b = rng.integers(0, n, size=k)
    better_a = (population_idx_rank[a] < population_idx_rank[b]) | (
        (population_idx_rank[a] == population_idx_rank[b]) & (crowd[a] >= crowd[b])
    )
    return np.where(better_a, a, b)


def _rank_and_crowd(obj: np.ndarray, viol: np.ndarray) -> tuple[list[np.ndarray], np.ndarray, np.ndarray]:
    fronts = nondominated_sort(obj, viol)
    rank = np.empty(len(obj), dtype=int)
    crowd = np.empty(len(obj))
    for r, fr in enumerate(fronts):
        rank[fr] = r
        crowd[fr] = crowding_distance(obj[fr])
    return fronts, rank, crowd


def _truncate(fronts: list[np.ndarray], crowd: np.ndarray, size: int) -> np.ndarray:
    keep: list[int] = []
    for fr in fronts:
        if len(keep) + len(fr) <= size:
            keep.extend(fr.tolist())
            continue
        order = fr[np.argsort(-crowd[fr], kind="stable")]
        keep.extend(order[: size - len(keep)].tolist())
        break
    return np.array(keep, dtype=int)


def run(cfg: ScenarioConfig, nsga: Nsga2Config, trace, callback=None) -> Nsga2Result:
    """Optimise decision vectors for ``cfg`` against a fixed demand trace.

    ``history`` holds one record per generation (generation 0 is the initial
    population) with the archive hypervolume and sparsity, the number of
    feasible population members and the best (smallest) violation.
    """
    rng = np.random.default_rng(nsga.seed)
    low, high = horizon.gene_bounds(cfg)
    n_genes = low.size
    pm = nsga.mutation_probability if nsga.mutation_probability is not None else 1.0 / n_genes
    ref = np.asarray(cfg.reference_point, dtype=float)

    pop = rng.uniform(low, high, size=(nsga.population_size, n_genes))
    obj, viol = horizon.evaluate_batch(pop, cfg, trace)
    archive = ParetoArchive(obj.shape[1])
    serial = 0
    ids = np.arange(len(pop))
    serial = len(pop)
    dv_store: dict[int, np.ndarray] = {}

    def absorb(o, v, dvs, idx):
        feas = v <= 0
        if feas.any():
            for i in np.flatnonzero(feas):
                dv_store[int(idx[i])] = dvs[i]
            archive.insert(o[feas], [int(i) for i in idx[feas]])
            live = set(archive.payloads)
            for key in list(dv_store):
                if key not in live:
                    del dv_store[key]

    absorb(obj, viol, pop, ids)
    history = []

    def record(gen: int):
        rec = {
            "generation": gen,
            "evaluations": nsga.population_size + gen * nsga.offspring_per_generation,
            "hypervolume": hypervolume(archive.points, ref),
            "sparsity": sparsity(archive.points) if len(archive) else math.nan,
            "archive_size": len(archive),
            "n_feasible": int((viol <= 0).sum()),
            "best_violation": float(viol.min()),
        }
        history.append(rec)
        if callback is not None:
            callback(rec)

    record(0)
    fronts, rank, crowd = _rank_and_crowd(obj, viol)
    n_off = nsga.offspring_per_generation
    for gen in range(1, nsga.generations + 1):
        parents = _select(rank, crowd, rng, n_off + (n_off % 2))
        children = []
        for k in range(0, len(parents), 2):
            c1, c2 = sbx_crossover(
                pop[parents[k]], pop[parents[k + 1]], nsga.crossover_eta, nsga.crossover_probability, rng, low, high
            )
            children.append(polynomial_mutation(c1, nsga.mutation_eta, pm, rng, low, high))
            children.append(polynomial_mutation(c2, nsga.mutation_eta, pm, rng, low, high))
        kids = np.array(children[:n_off])
        k_obj, k_viol = horizon.evaluate_batch(kids, cfg, trace)
        k_ids = np.arange(serial, serial + len(kids))
        serial += len(kids)
        absorb(k_obj, k_viol, kids, k_ids)

        pop = np.vstack([pop, kids])
        obj = np.vstack([obj, k_obj])
        viol = np.concatenate([viol, k_viol])
        ids = np.concatenate([ids, k_ids])
        fronts, rank, crowd = _rank_and_crowd(obj, viol)
        keep = _truncate(fronts, crowd, nsga.population_size)
        pop, obj, viol, ids = pop[keep], obj[keep], viol[keep], ids[keep]
        fronts, rank, crowd = _rank_and_crowd(obj, viol)
        record(gen)

    feas = viol <= 0
    front = pareto_filter(obj[feas], [int(i) for i in ids[feas]])
    solutions = {int(i): pop[j] for j, i in enumerate(ids) if int(i) in set(front.ids)}
    solutions.update({k: v for k, v in dv_store.items()})
    return Nsga2Result(front, archive, history, pop, obj, viol, solutions)
