import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from echelon import horizon, nsga2
from echelon.demand import sample_trace
from echelon.metrics import pareto_filter
from oracles import constrained_fronts


def test_config_validation():
    with pytest.raises(ValueError):
        nsga2.Nsga2Config(population_size=3)
    with pytest.raises(ValueError):
        nsga2.Nsga2Config(crossover_probability=1.5)
    with pytest.raises(ValueError):
        nsga2.Nsga2Config(mutation_eta=0)


def test_sort_examples():
    assert [f.tolist() for f in nsga2.nondominated_sort([[1, 1, 1]])] == [[0]]
    fronts = nsga2.nondominated_sort([[9, 9, 9], [1, 1, 1]], [5.0, 0.0])
    assert [f.tolist() for f in fronts] == [[1], [0]]


@given(st.integers(0, 10_000))
def test_sort_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    obj = rng.integers(0, 6, size=(50, 3)).astype(float)
    viol = np.where(rng.random(50) < 0.4, rng.integers(1, 4, 50), 0).astype(float)
    got = [sorted(f.tolist()) for f in nsga2.nondominated_sort(obj, viol)]
    assert got == constrained_fronts(obj.tolist(), viol.tolist())


def test_crowding_distance():
    assert np.isinf(nsga2.crowding_distance([[1.0], [2.0]])).all()
    assert nsga2.crowding_distance([[1.0], [2.0], [3.0]])[1] == 1.0
    d = nsga2.crowding_distance(np.ones((4, 2)))
    assert np.isinf(d).sum() == 2 and (d[np.isfinite(d)] == 0).all()


def test_sbx_edge_cases(rng):
    lo, hi = np.zeros(10), np.full(10, 200.0)
    p1, p2 = rng.uniform(0, 200, 10), rng.uniform(0, 200, 10)
    c1, c2 = nsga2.sbx_crossover(p1, p2, 15, 0.0, rng, lo, hi)
    assert np.array_equal(c1, p1) and np.array_equal(c2, p2)
    c1, c2 = nsga2.sbx_crossover(p1, p1, 15, 1.0, rng, lo, hi)
    assert np.allclose(c1, p1) and np.allclose(c2, p1)


@given(st.integers(0, 10_000))
def test_operators_respect_bounds(seed):
    rng = np.random.default_rng(seed)
    lo, hi = np.zeros(40), np.full(40, 200.0)
    p1, p2 = rng.uniform(lo, hi), rng.uniform(lo, hi)
    p1[:5], p2[:5] = 0.0, 200.0
    c1, c2 = nsga2.sbx_crossover(p1, p2, 15, 1.0, rng, lo, hi)
    m = nsga2.polynomial_mutation(c1, 20, 0.5, rng, lo, hi)
    for x in (c1, c2, m):
        assert ((x >= lo) & (x <= hi)).all()


def test_mutation_edge_cases(rng):
    lo, hi = np.zeros(1000), np.full(1000, 200.0)
    x = rng.uniform(lo, hi)
    assert np.array_equal(nsga2.polynomial_mutation(x, 20, 0.0, rng, lo, hi), x)
    at_low = nsga2.polynomial_mutation(lo.copy(), 20, 1.0, rng, lo, hi)
    assert (at_low >= 0).all() and (at_low > 0).any()


def test_mutation_spread_shrinks_with_eta():
    lo, hi = np.zeros(10_000), np.ones(10_000)
    x = np.full(10_000, 0.5)
    wide = nsga2.polynomial_mutation(x, 2, 1.0, np.random.default_rng(0), lo, hi)
    narrow = nsga2.polynomial_mutation(x, 20, 1.0, np.random.default_rng(0), lo, hi)
    assert np.abs(narrow - x).mean() < np.abs(wide - x).mean()


@pytest.fixture(scope="module")
def short_run():
    import dataclasses

    from echelon.scenario import builtin_scenario

    # deep initial stock makes most random vectors feasible
    base = builtin_scenario("simple")
    nodes = {k: dataclasses.replace(v, initial_inventory=50_000) for k, v in base.nodes.items()}
    cfg = dataclasses.replace(base, nodes=nodes)
    tr = sample_trace(cfg, 3)
    conf = nsga2.Nsga2Config(population_size=40, offspring_per_generation=10, generations=30, seed=4)
    return cfg, tr, conf, nsga2.run(cfg, conf, tr)


def test_run_invariants(short_run):
    cfg, tr, conf, res = short_run
    lo, hi = horizon.gene_bounds(cfg)
    assert res.population.shape == (40, cfg.decision_dim)
    assert ((res.population >= lo) & (res.population <= hi)).all()
    assert len(res.history) == 31
    hv = [h["hypervolume"] for h in res.history]
    assert all(b >= a for a, b in zip(hv, hv[1:]))
    assert [h["evaluations"] for h in res.history][-1] == 40 + 30 * 10


def test_run_is_deterministic(short_run):
    cfg, tr, conf, res = short_run
    again = nsga2.run(cfg, conf, tr)
    assert again.history == res.history
    assert np.array_equal(again.population, res.population)


def test_zero_generations_returns_initial_front(simple):
    tr = sample_trace(simple, 0)
    conf = nsga2.Nsga2Config(population_size=20, generations=0, seed=1)
    res = nsga2.run(simple, conf, tr)
    obj, viol = horizon.evaluate_batch(res.population, simple, tr)
    expect = pareto_filter(obj[viol == 0])
    assert np.array_equal(res.front.points, expect.points)
    assert len(res.history) == 1


def test_archive_members_keep_decision_vectors(short_run):
    cfg, tr, conf, res = short_run
    assert len(res.archive) > 0
    for pt, key in zip(res.archive.points, res.archive.payloads):
        r = horizon.evaluate(res.solutions[key], cfg, tr)
        assert r.feasible
        assert np.allclose(r.objectives, pt, rtol=1e-12)
