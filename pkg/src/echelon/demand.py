"""Seeded, non-stationary market demand.

Each market draws from its own random stream, keyed by ``(seed, market_id)``
through :class:`numpy.random.SeedSequence` and fed to the counter-based
Philox bit generator.  Changing one market's distribution therefore never
shifts the draws of another market, and traces are identical across
platforms and thread counts.

Per period ``t`` (0-based) the realised demand is::

    d_t = max(0, round(max(0, base_t) * (1 + a * sin(2 * pi * t / P))))

where ``base_t`` is a normal or Poisson draw, ``a`` the seasonal amplitude
and ``P`` the seasonal period.  Normal draws are rounded to the nearest
integer (half to even, as :func:`numpy.rint`).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .scenario import ScenarioConfig

__all__ = ["DemandTrace", "sample_trace", "sample_traces", "expected_demand", "seasonal_factor", "write_trace_csv", "read_trace_csv"]


@dataclass(frozen=True)
class DemandTrace:
    """Realised demand for every market over the horizon.

    ``demand`` has shape ``(T, n_markets)`` with markets in echelon order.
    """

    markets: tuple[int, ...]
    demand: np.ndarray
    seed: int | None = None

    @property
    def horizon(self) -> int:
        return self.demand.shape[0]

    @property
    def per_market(self) -> dict[int, list[int]]:
        return {m: self.demand[:, i].tolist() for i, m in enumerate(self.markets)}

    def __eq__(self, other):
        if not isinstance(other, DemandTrace):
            return NotImplemented
        return self.markets == other.markets and np.array_equal(self.demand, other.demand)


def seasonal_factor(cfg: ScenarioConfig, market: int, t) -> np.ndarray:
    spec = cfg.demands[market]
    return 1.0 + spec.seasonal_amplitude * np.sin(2.0 * np.pi * np.asarray(t, dtype=float) / cfg.period_of(market))


def _market_stream(seed: int, market: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(market)])))


def _base_draws(cfg: ScenarioConfig, market: int, seed: int) -> np.ndarray:
    spec = cfg.demands[market]
    rng = _market_stream(seed, market)
    if spec.kind == "normal":
        return rng.normal(spec.mean, spec.std_dev, size=cfg.horizon)
    if spec.kind == "poisson":
        return rng.poisson(spec.rate, size=cfg.horizon).astype(float)
    raise ValueError(f"unknown demand kind {spec.kind!r}")


def sample_trace(cfg: ScenarioConfig, seed: int) -> DemandTrace:
    """Draw one demand trace for every market of ``cfg``."""
    markets = cfg.echelons.markets
    t = np.arange(cfg.horizon)
    cols = []
    for m in markets:
        base = _base_draws(cfg, m, seed)
        if cfg.demands[m].kind == "normal":
            base = np.rint(base)
        d = np.rint(np.maximum(base, 0.0) * seasonal_factor(cfg, m, t))
        cols.append(np.maximum(d, 0.0).astype(np.int64))
    demand = np.stack(cols, axis=1) if cols else np.zeros((cfg.horizon, 0), dtype=np.int64)
    return DemandTrace(tuple(markets), demand, int(seed))


def sample_traces(cfg: ScenarioConfig, seeds: Iterable[int]) -> np.ndarray:
    """Stack traces for several seeds into an array ``(n, T, n_markets)``."""
    return np.stack([sample_trace(cfg, s).demand for s in seeds])


def expected_demand(cfg: ScenarioConfig, market: int, t: int) -> float:
    """Mean of the base distribution times the seasonal factor, floored at 0."""
    if market not in cfg.demands:
        raise KeyError(f"unknown market {market}")
    if not 0 <= t < cfg.horizon:
        raise ValueError(f"period {t} outside horizon {cfg.horizon}")
    return max(0.0, cfg.demands[market].base_mean * float(seasonal_factor(cfg, market, t)))


def write_trace_csv(trace: DemandTrace, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "market_id", "demand"])
        for t in range(trace.horizon):
            for i, m in enumerate(trace.markets):
                w.writerow([t, m, int(trace.demand[t, i])])


def read_trace_csv(path: str | Path, seed: int | None = None) -> DemandTrace:
    rows: dict[int, dict[int, int]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.setdefault(int(row["market_id"]), {})[int(row["t"])] = int(row["demand"])
    markets = tuple(rows)
    horizon = 1 + max(max(v) for v in rows.values())
    demand = np.zeros((horizon, len(markets)), dtype=np.int64)
    for i, m in enumerate(markets):
        for t, d in rows[m].items():
            demand[t, i] = d
    return DemandTrace(markets, demand, seed)
