import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from echelon import env, horizon
from echelon.demand import sample_trace
from echelon.scenario import builtin_scenario
from oracles import episode_totals, simulate


def _random_dv(cfg, rng, scale=1.0):
    lo, hi = horizon.gene_bounds(cfg)
    return rng.uniform(lo, hi * scale)


def test_zero_vector(simple):
    zero = np.zeros((simple.horizon, 2), dtype=np.int64)
    r = horizon.evaluate(np.zeros(simple.decision_dim), simple, zero)
    assert r.objectives[0] == pytest.approx(-14730.0, rel=1e-12)
    assert r.violation == 0 and r.feasible


def test_overshipping_is_clipped_then_violates(simple):
    dv = np.zeros(simple.decision_dim)
    k = len(simple.echelons.manufacturers)
    for key in ((2, 4), (2, 5)):
        dv[k + simple.route_keys.index(key)] = 1000.0
    r = horizon.evaluate(dv, simple, sample_trace(simple, 0))
    # both period-0 genes clip to 200: 400 units leave a node holding 380,
    # which then sits at -20 for the rest of the horizon
    assert r.violation == 20 * simple.horizon
    assert not r.feasible
    assert horizon.repair_bounds(dv, simple)[k + simple.route_keys.index((2, 4))] == 200


def test_repair_bounds(simple):
    lo, hi = horizon.gene_bounds(simple)
    dv = np.full(simple.decision_dim, 50.0)
    assert np.array_equal(horizon.repair_bounds(dv, simple), dv)
    dv[0], dv[5] = -3.0, 250.0
    fixed = horizon.repair_bounds(dv, simple)
    assert fixed[0] == 0 and fixed[5] == 200
    assert hi[0] == len(simple.echelons.suppliers) * simple.capacity


def test_length_mismatch(simple):
    with pytest.raises(ValueError):
        horizon.evaluate(np.zeros(simple.decision_dim - 1), simple, sample_trace(simple, 0))


@given(st.integers(0, 10_000), st.floats(0.01, 1.0))
def test_matches_rollout_and_reference(seed, scale):
    cfg = builtin_scenario("simple")
    rng = np.random.default_rng(seed)
    tr = sample_trace(cfg, seed)
    dv = _random_dv(cfg, rng, scale)
    r = horizon.evaluate(dv, cfg, tr)
    acts = dv.reshape(cfg.horizon, cfg.action_dim)
    ro = env.rollout(cfg, tr, lambda obs, t: acts[t])
    assert np.allclose(r.objectives, ro.totals, rtol=1e-9)
    assert r.violation == ro.shortfall
    periods, _ = simulate(cfg, tr.demand.tolist(), acts)
    assert np.allclose(r.objectives, episode_totals(periods), rtol=1e-9)


@pytest.mark.parametrize("name", ["moderate", "complex"])
def test_closed_form_path(name, rng):
    cfg = builtin_scenario(name)
    tr = sample_trace(cfg, 8)
    dv = _random_dv(cfg, rng, 0.3)
    acts = dv.reshape(cfg.horizon, cfg.action_dim)
    ro = env.rollout(cfg, tr, lambda obs, t: acts[t])
    ship = np.array([i["shipments"] for i in ro.log])
    inv = np.array([i["inventories"] for i in ro.log])
    closed = horizon.objectives_from_flows(cfg, ship, inv, tr.demand)
    assert np.allclose(closed, ro.totals, rtol=1e-9)
    assert np.allclose(horizon.evaluate(dv, cfg, tr).objectives, closed, rtol=1e-9)


def test_replications_average(simple, rng):
    dv = _random_dv(simple, rng, 0.1)
    traces = [sample_trace(simple, s) for s in (1, 2)]
    both = horizon.evaluate(dv, simple, traces)
    each = [horizon.evaluate(dv, simple, t) for t in traces]
    assert np.allclose(both.objectives, (each[0].objectives + each[1].objectives) / 2, rtol=1e-12)
    assert both.violation == pytest.approx((each[0].violation + each[1].violation) / 2)


def test_batch_matches_single(moderate, rng):
    tr = sample_trace(moderate, 5)
    dvs = np.stack([_random_dv(moderate, rng, 0.2) for _ in range(5)])
    objs, viol = horizon.evaluate_batch(dvs, moderate, tr)
    for i in range(5):
        r = horizon.evaluate(dvs[i], moderate, tr)
        assert np.allclose(objs[i], r.objectives, rtol=1e-12)
        assert viol[i] == r.violation
