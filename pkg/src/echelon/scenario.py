"""Static supply-chain network descriptions.

A scenario fixes the echelon sets, per-node and per-route cost/emission
parameters, market demand distributions, prices and the simulation constants.
Three built-in networks (``simple``, ``moderate``, ``complex``) are provided;
any other network can be described in a TOML scenario file and loaded with
:func:`load_scenario`.

Node parameters are attached to the *destination* nodes (manufacturers,
warehouses, distribution centres and retailers).  Suppliers have unlimited
stock and markets only carry demand, so neither has a parameter row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable

import tomli

__all__ = [
    "EchelonSets",
    "NodeParams",
    "RouteParams",
    "DemandSpec",
    "ScenarioConfig",
    "Issue",
    "ScenarioError",
    "BUILTIN_NAMES",
    "builtin_scenario",
    "validate_scenario",
    "load_scenario",
    "save_scenario",
    "dumps_scenario",
    "resolve_scenario",
]

BUILTIN_NAMES = ("simple", "moderate", "complex")


class ScenarioError(ValueError):
    """Raised when a scenario file cannot be parsed or fails validation."""

    def __init__(self, message: str, issues: list[Issue] | None = None):
        super().__init__(message)
        self.issues = list(issues or [])


@dataclass(frozen=True)
class Issue:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


@dataclass(frozen=True)
class EchelonSets:
    suppliers: tuple[int, ...]
    manufacturers: tuple[int, ...]
    warehouses_by_level: tuple[tuple[int, ...], ...]
    distribution_centres: tuple[int, ...]
    retailers: tuple[int, ...]
    markets: tuple[int, ...]

    def layers(self) -> list[tuple[int, ...]]:
        """Shipping layers from suppliers down to retailers (markets excluded)."""
        out = [self.suppliers, self.manufacturers]
        out.extend(self.warehouses_by_level)
        if self.distribution_centres:
            out.append(self.distribution_centres)
        out.append(self.retailers)
        return out

    def destination_nodes(self) -> tuple[int, ...]:
        """Nodes that hold inventory, in echelon order."""
        return tuple(n for layer in self.layers()[1:] for n in layer)

    def all_nodes(self) -> list[int]:
        return [n for layer in self.layers() for n in layer] + list(self.markets)


@dataclass(frozen=True)
class NodeParams:
    initial_inventory: int
    holding_cost: float
    holding_emission: float
    production_cost: float | None = None
    yield_ratio: float | None = None
    production_emission: float | None = None

    @property
    def is_producer(self) -> bool:
        return self.production_cost is not None


@dataclass(frozen=True)
class RouteParams:
    source: int
    target: int
    transport_cost: float
    transport_emission: float

    @property
    def key(self) -> tuple[int, int]:
        return (self.source, self.target)


@dataclass(frozen=True)
class DemandSpec:
    """Market demand: a base distribution scaled by a sinusoidal season.

    ``kind`` is ``"normal"`` (uses ``mean`` and ``std_dev``) or ``"poisson"``
    (uses ``rate``).  ``seasonal_period`` of ``None`` means one full cycle over
    the scenario horizon.
    """

    kind: str
    mean: float = 0.0
    std_dev: float = 0.0
    rate: float = 0.0
    seasonal_amplitude: float = 0.5
    seasonal_period: float | None = None

    @property
    def base_mean(self) -> float:
        return self.mean if self.kind == "normal" else self.rate

    @property
    def base_std(self) -> float:
        return self.std_dev if self.kind == "normal" else math.sqrt(self.rate)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    echelons: EchelonSets
    nodes: dict[int, NodeParams]
    routes: tuple[RouteParams, ...]
    demands: dict[int, DemandSpec]
    prices: dict[int, float]
    horizon: int = 100
    lead_time: int = 2
    capacity: float = 200.0
    big_m: float = 1e6
    reference_point: tuple[float, float, float] = (0.0, -2e5, -100.0)
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @property
    def destination_nodes(self) -> tuple[int, ...]:
        return self.echelons.destination_nodes()

    @property
    def route_keys(self) -> tuple[tuple[int, int], ...]:
        return tuple(r.key for r in self.routes)

    @property
    def action_dim(self) -> int:
        return len(self.echelons.manufacturers) + len(self.routes)

    @property
    def decision_dim(self) -> int:
        return self.horizon * self.action_dim

    @property
    def market_of_retailer(self) -> dict[int, int]:
        return dict(zip(self.echelons.retailers, self.echelons.markets))

    def period_of(self, market: int) -> float:
        spec = self.demands[market]
        return float(self.horizon if spec.seasonal_period is None else spec.seasonal_period)

    @cached_property
    def fingerprint(self) -> str:
        return dumps_scenario(self)


# --------------------------------------------------------------------------
# validation


def _expected_routes(ech: EchelonSets) -> list[tuple[int, int]]:
    layers = ech.layers()
    return [(a, b) for up, down in zip(layers, layers[1:]) for a in up for b in down]


def validate_scenario(cfg: ScenarioConfig) -> list[Issue]:
    """Check every structural and parameter invariant of a scenario.

    Returns an empty list when the scenario is valid, otherwise one
    :class:`Issue` per violation.
    """
    issues: list[Issue] = []
    add = lambda path, msg: issues.append(Issue(path, msg))  # noqa: E731
    ech = cfg.echelons

    for name in ("suppliers", "manufacturers", "retailers", "markets"):
        if not getattr(ech, name):
            add(f"echelons.{name}", "must be non-empty")
    for lvl, level in enumerate(ech.warehouses_by_level):
        if not level:
            add(f"echelons.warehouses[{lvl}]", "declared warehouse level is empty")
    if len(ech.retailers) != len(ech.markets):
        add("echelons.markets", f"{len(ech.markets)} markets for {len(ech.retailers)} retailers")

    seen: set[int] = set()
    for nid in ech.all_nodes():
        if nid in seen:
            add("echelons", f"node id {nid} appears more than once")
        seen.add(nid)

    dest = set(ech.destination_nodes())
    producers = set(ech.manufacturers)
    for nid in sorted(dest - set(cfg.nodes)):
        add(f"node[{nid}]", "missing parameters for inventory-holding node")
    for nid in sorted(set(cfg.nodes) - dest):
        add(f"node[{nid}]", "parameters given for a node that holds no inventory")
    for nid, p in cfg.nodes.items():
        base = f"node[{nid}]"
        if p.initial_inventory < 0:
            add(f"{base}.initial_inventory", "must be >= 0")
        for attr in ("holding_cost", "holding_emission"):
            if not getattr(p, attr) >= 0:
                add(f"{base}.{attr}", "must be >= 0")
        prod_fields = (p.production_cost, p.yield_ratio, p.production_emission)
        if nid in producers:
            if any(v is None for v in prod_fields):
                add(base, "manufacturer requires production_cost, yield_ratio, production_emission")
            else:
                if not p.production_cost >= 0:
                    add(f"{base}.production_cost", "must be >= 0")
                if not p.production_emission >= 0:
                    add(f"{base}.production_emission", "must be >= 0")
                if not 0 < p.yield_ratio <= 1:
                    add(f"{base}.yield_ratio", "must be in (0, 1]")
        elif any(v is not None for v in prod_fields):
            add(base, "production parameters are only allowed on manufacturers")

    layer_of = {n: i for i, layer in enumerate(ech.layers()) for n in layer}
    keys = [r.key for r in cfg.routes]
    for r in cfg.routes:
        base = f"route[{r.source}->{r.target}]"
        ls, lt = layer_of.get(r.source), layer_of.get(r.target)
        if ls is None or lt is None:
            add(base, "endpoint is not a shipping node")
        elif lt != ls + 1:
            add(base, "target is not in the echelon immediately downstream of source")
        if not r.transport_cost >= 0:
            add(f"{base}.transport_cost", "must be >= 0")
        if not r.transport_emission >= 0:
            add(f"{base}.transport_emission", "must be >= 0")
        if keys.count(r.key) > 1:
            add(base, "duplicate route")
    missing = [k for k in _expected_routes(ech) if k not in keys]
    if missing:
        pairs = ", ".join(f"({a},{b})" for a, b in missing)
        add("route", f"missing routes of the fully-connected topology: {pairs}")

    for m in ech.markets:
        if m not in cfg.demands:
            add(f"demand[{m}]", "no demand specification for market")
    for m, d in cfg.demands.items():
        base = f"demand[{m}]"
        if m not in ech.markets:
            add(base, "demand given for an unknown market")
        if d.kind not in ("normal", "poisson"):
            add(f"{base}.kind", f"unknown distribution {d.kind!r}")
        if not d.std_dev >= 0:
            add(f"{base}.std_dev", "must be >= 0")
        if not d.rate >= 0:
            add(f"{base}.rate", "must be >= 0")
        if not d.seasonal_amplitude >= 0:
            add(f"{base}.seasonal_amplitude", "must be >= 0")
        if d.seasonal_period is not None and not d.seasonal_period > 0:
            add(f"{base}.seasonal_period", "must be > 0")

    for r in ech.retailers:
        if r not in cfg.prices:
            add(f"economics.prices[{r}]", "no price for retailer")
        elif not cfg.prices[r] >= 0:
            add(f"economics.prices[{r}]", "must be >= 0")

    if cfg.horizon < 1:
        add("horizon", "must be >= 1")
    if cfg.lead_time < 1:
        add("lead_time", "must be >= 1")
    if not cfg.capacity > 0:
        add("capacity", "must be > 0")
    if not cfg.big_m > 0:
        add("big_m", "must be > 0")
    if len(cfg.reference_point) != 3 or not all(math.isfinite(v) for v in cfg.reference_point):
        add("reference_point", "must be three finite numbers")
    return issues


# --------------------------------------------------------------------------
# builtin networks

_S = 0.0002  # holding emission, identical for every node in all three networks


def _nodes(ids: Iterable[int], rows: list[tuple]) -> dict[int, NodeParams]:
    ids = list(ids)
    assert len(ids) == len(rows)
    out = {}
    for nid, row in zip(ids, rows):
        if len(row) == 3:
            out[nid] = NodeParams(row[0], row[1], row[2])
        else:
            out[nid] = NodeParams(*row)
    return out


def _routes(rows: list[tuple[int, int, float, float]]) -> tuple[RouteParams, ...]:
    return tuple(RouteParams(a, b, c, e) for a, b, c, e in rows)


def _simple() -> ScenarioConfig:
    ech = EchelonSets((1,), (2, 3), (), (), (4, 5), (6, 7))
    nodes = _nodes(
        ech.destination_nodes(),
        [
            (380, 0.11, _S, 2.0, 1.0, 5.0126),
            (350, 0.13, _S, 2.2, 1.0, 4.5754),
            (400, 0.12, _S),
            (80, 0.15, _S),
        ],
    )
    routes = _routes(
        [
            (1, 2, 0.22, 0.1258),
            (1, 3, 0.69, 0.3947),
            (2, 4, 1.055, 0.6035),
            (2, 5, 0.43, 0.2460),
            (3, 4, 0.485, 0.2774),
            (3, 5, 0.75, 0.4290),
        ]
    )
    demands = {6: DemandSpec("normal", mean=150.0, std_dev=60.0), 7: DemandSpec("normal", mean=100.0, std_dev=40.0)}
    return ScenarioConfig(
        "simple", ech, nodes, routes, demands, {4: 20.0, 5: 20.0}, reference_point=(0.0, -2e5, -100.0)
    )


def _moderate() -> ScenarioConfig:
    ech = EchelonSets((1, 2), (3, 4, 5), ((6, 7),), (), (8, 9, 10), (11, 12, 13))
    nodes = _nodes(
        ech.destination_nodes(),
        [
            (380, 0.11, _S, 2.0, 1.0, 5.0126),
            (350, 0.13, _S, 2.2, 1.0, 4.5754),
            (400, 0.12, _S, 2.3, 1.0, 5.4491),
            (80, 0.15, _S),
            (110, 0.20, _S),
            (100, 0.25, _S),
            (80, 0.30, _S),
            (120, 0.20, _S),
        ],
    )
    routes = _routes(
        [
            (1, 3, 0.22, 0.1258),
            (1, 4, 0.69, 0.3947),
            (1, 5, 0.565, 0.3232),
            (2, 3, 1.055, 0.6035),
            (2, 4, 0.65, 0.3718),
            (2, 5, 0.63, 0.3604),
            (3, 6, 0.075, 0.0429),
            (3, 7, 0.43, 0.2460),
            (4, 6, 0.63, 0.3604),
            (4, 7, 0.23, 0.1316),
            (5, 6, 0.495, 0.2831),
            (5, 7, 0.075, 0.0429),
            (6, 8, 1.095, 0.6263),
            (6, 9, 0.625, 0.3575),
            (6, 10, 0.95, 0.5434),
            (7, 8, 1.64, 0.9381),
            (7, 9, 1.16, 0.6635),
            (7, 10, 0.58, 0.3318),
        ]
    )
    demands = {
        11: DemandSpec("normal", mean=150.0, std_dev=60.0),
        12: DemandSpec("normal", mean=100.0, std_dev=40.0),
        13: DemandSpec("poisson", rate=200.0),
    }
    prices = {8: 20.0, 9: 21.0, 10: 20.5}
    return ScenarioConfig("moderate", ech, nodes, routes, demands, prices, reference_point=(0.0, -4e5, -200.0))


def _complex() -> ScenarioConfig:
    ech = EchelonSets(
        (1, 2, 3), (4, 5, 6, 7, 8), ((9, 10, 11),), (12, 13, 14), (15, 16, 17, 18, 19), (20, 21, 22, 23, 24)
    )
    nodes = _nodes(
        ech.destination_nodes(),
        [
            (155, 0.23, _S, 2.0, 1.0, 5.0126),
            (267, 0.35, _S, 2.2, 1.0, 4.5754),
            (342, 0.22, _S, 2.1, 1.0, 5.4491),
            (211, 0.11, _S, 2.0, 1.0, 6.1232),
            (162, 0.29, _S, 2.3, 1.0, 5.5157),
            (195, 0.37, _S),
            (333, 0.11, _S),
            (96, 0.36, _S),
            (285, 0.33, _S),
            (68, 0.26, _S),
            (379, 0.30, _S),
            (344, 0.17, _S),
            (66, 0.29, _S),
            (356, 0.27, _S),
            (382, 0.23, _S),
            (362, 0.37, _S),
        ],
    )
    # The published rows for warehouses 10 and 11 target nodes (8, 9, 10),
    # which are not downstream of them. The stage is fully connected, so they
    # are mapped onto distribution centres (12, 13, 14) in row order.
    routes = _routes(
        [
            (1, 4, 0.535, 0.3060),
            (1, 5, 0.265, 0.1516),
            (1, 6, 1.845, 1.0553),
            (1, 7, 1.6, 0.9152),
            (1, 8, 1.44, 0.8237),
            (2, 4, 0.36, 0.2059),
            (2, 5, 0.295, 0.1687),
            (2, 6, 1.235, 0.7064),
            (2, 7, 0.625, 0.3575),
            (2, 8, 1.855, 1.0611),
            (3, 4, 0.6, 0.3432),
            (3, 5, 0.175, 0.1001),
            (3, 6, 0.745, 0.4261),
            (3, 7, 1.33, 0.7608),
            (3, 8, 0.17, 0.0972),
            (4, 9, 1.99, 1.1383),
            (4, 10, 0.34, 0.1945),
            (4, 11, 0.81, 0.4633),
            (5, 9, 1.515, 0.8666),
            (5, 10, 0.66, 0.3775),
            (5, 11, 0.645, 0.3689),
            (6, 9, 1.695, 0.9695),
            (6, 10, 1.58, 0.9038),
            (6, 11, 0.815, 0.4662),
            (7, 9, 1.615, 0.9238),
            (7, 10, 1.26, 0.7207),
            (7, 11, 0.675, 0.3861),
            (8, 9, 1.03, 0.5892),
            (8, 10, 1.09, 0.6235),
            (8, 11, 1.63, 0.9324),
            (9, 12, 1.965, 1.1240),
            (9, 13, 1.925, 1.1011),
            (9, 14, 1.62, 0.9266),
            (10, 12, 1.49, 0.8523),
            (10, 13, 1.96, 1.1211),
            (10, 14, 0.635, 0.3632),
            (11, 12, 1.87, 1.0696),
            (11, 13, 0.2, 0.1144),
            (11, 14, 1.855, 1.0611),
            (12, 15, 1.945, 1.1125),
            (12, 16, 0.965, 0.5520),
            (12, 17, 1.905, 1.0897),
            (12, 18, 0.9, 0.5148),
            (12, 19, 0.69, 0.3947),
            (13, 15, 0.805, 0.4605),
            (13, 16, 1.065, 0.6092),
            (13, 17, 1.84, 1.0525),
            (13, 18, 0.83, 0.4748),
            (13, 19, 1.885, 1.0782),
            (14, 15, 1.66, 0.9495),
            (14, 16, 1.51, 0.8637),
            (14, 17, 0.59, 0.3375),
            (14, 18, 0.4, 0.2288),
            (14, 19, 1.395, 0.7979),
        ]
    )
    demands = {
        20: DemandSpec("normal", mean=150.0, std_dev=60.0),
        21: DemandSpec("normal", mean=100.0, std_dev=40.0),
        22: DemandSpec("poisson", rate=200.0),
        23: DemandSpec("poisson", rate=100.0),
        24: DemandSpec("poisson", rate=150.0),
    }
    prices = {15: 100.0, 16: 101.0, 17: 105.0, 18: 103.0, 19: 104.0}
    return ScenarioConfig("complex", ech, nodes, routes, demands, prices, reference_point=(0.0, -1e6, -500.0))


_BUILDERS = {"simple": _simple, "moderate": _moderate, "complex": _complex}


def builtin_scenario(name: str) -> ScenarioConfig:
    """Return one of the three reference networks by name."""
    try:
        return _BUILDERS[name]()
    except KeyError:
        raise ValueError(f"unknown builtin scenario {name!r}; choose from {BUILTIN_NAMES}") from None


def resolve_scenario(name_or_path: str | Path) -> ScenarioConfig:
    """Builtin name, or path to a scenario file."""
    if str(name_or_path) in _BUILDERS:
        return builtin_scenario(str(name_or_path))
    if not Path(name_or_path).is_file():
        raise ScenarioError(f"{name_or_path!s} is neither a builtin scenario ({', '.join(BUILTIN_NAMES)}) nor a file")
    return load_scenario(name_or_path)


# --------------------------------------------------------------------------
# TOML serialisation


def _num(v: float | int) -> str:
    if isinstance(v, int) and not isinstance(v, bool):
        return str(v)
    v = float(v)
    if not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    return repr(v)


def _ints(vals: Iterable[int]) -> str:
    return "[" + ", ".join(str(v) for v in vals) + "]"


def dumps_scenario(cfg: ScenarioConfig) -> str:
    """Render a scenario as TOML text with unit comments."""
    ech = cfg.echelons
    lines = [
        f"# Supply-chain scenario {cfg.name!r}",
        f"name = \"{cfg.name}\"",
        "",
        "[echelons]",
        f"suppliers = {_ints(ech.suppliers)}",
        f"manufacturers = {_ints(ech.manufacturers)}",
        "# one list per warehouse level, upstream level first",
        "warehouses = [" + ", ".join(_ints(lv) for lv in ech.warehouses_by_level) + "]",
        f"distribution_centres = {_ints(ech.distribution_centres)}",
        f"retailers = {_ints(ech.retailers)}",
        "# markets pair with retailers by position",
        f"markets = {_ints(ech.markets)}",
        "",
        "[simulation]",
        f"horizon = {cfg.horizon}  # periods",
        f"lead_time = {cfg.lead_time}  # periods",
        f"capacity = {_num(cfg.capacity)}  # units per route per period",
        f"big_m = {_num(cfg.big_m)}  # penalty per unit of negative inventory",
        "",
        "[economics]",
        "# selling price per unit, one per retailer in echelon order",
        "prices = [" + ", ".join(_num(cfg.prices[r]) for r in ech.retailers) + "]",
        "# hypervolume reference: (profit, -emission, -SL inequality)",
        "reference_point = [" + ", ".join(_num(v) for v in cfg.reference_point) + "]",
    ]
    for nid in ech.destination_nodes():
        if nid not in cfg.nodes:
            continue
        p = cfg.nodes[nid]
        lines += [
            "",
            "[[node]]",
            f"id = {nid}",
            f"initial_inventory = {p.initial_inventory}  # units",
            f"holding_cost = {_num(p.holding_cost)}  # currency/unit/period",
            f"holding_emission = {_num(p.holding_emission)}  # emission/unit/period",
        ]
        if p.is_producer:
            lines += [
                f"production_cost = {_num(p.production_cost)}  # currency/unit",
                f"yield_ratio = {_num(p.yield_ratio)}  # output/input",
                f"production_emission = {_num(p.production_emission)}  # emission/unit",
            ]
    for r in cfg.routes:
        lines += [
            "",
            "[[route]]",
            f"from = {r.source}",
            f"to = {r.target}",
            f"transport_cost = {_num(r.transport_cost)}  # currency/unit/day",
            f"transport_emission = {_num(r.transport_emission)}  # emission/unit/day",
        ]
    for m in ech.markets:
        if m not in cfg.demands:
            continue
        d = cfg.demands[m]
        lines += ["", "[[demand]]", f"market = {m}", f"kind = \"{d.kind}\""]
        if d.kind == "normal":
            lines += [f"mean = {_num(d.mean)}  # units/period", f"std_dev = {_num(d.std_dev)}"]
        else:
            lines += [f"rate = {_num(d.rate)}  # units/period"]
        lines.append(f"seasonal_amplitude = {_num(d.seasonal_amplitude)}  # relative")
        if d.seasonal_period is not None:
            lines.append(f"seasonal_period = {_num(d.seasonal_period)}  # periods")
    return "\n".join(lines) + "\n"


def save_scenario(cfg: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(dumps_scenario(cfg))


def _get(table: dict, key: str, path: str, kind=float, default=...):
    if key not in table:
        if default is ...:
            raise ScenarioError(f"{path}.{key}: missing key", [Issue(f"{path}.{key}", "missing key")])
        return default
    value = table[key]
    try:
        if kind is int:
            if isinstance(value, float) and not value.is_integer():
                raise TypeError
            return int(value)
        if kind is float:
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        return kind(value)
    except (TypeError, ValueError):
        raise ScenarioError(
            f"{path}.{key}: expected {kind.__name__}, got {value!r}", [Issue(f"{path}.{key}", "bad type")]
        ) from None


def _id_tuple(table: dict, key: str) -> tuple[int, ...]:
    vals = table.get(key, [])
    if not isinstance(vals, list) or not all(isinstance(v, int) for v in vals):
        raise ScenarioError(f"echelons.{key}: expected a list of integer node ids", [Issue(f"echelons.{key}", "bad type")])
    return tuple(vals)


def loads_scenario(text: str) -> ScenarioConfig:
    """Parse TOML text into a validated scenario."""
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ScenarioError(f"malformed scenario file: {exc}") from exc

    ech_t = doc.get("echelons")
    if not isinstance(ech_t, dict):
        raise ScenarioError("echelons: missing section", [Issue("echelons", "missing section")])
    levels = ech_t.get("warehouses", [])
    if not isinstance(levels, list) or not all(isinstance(lv, list) for lv in levels):
        raise ScenarioError("echelons.warehouses: expected a list of lists", [Issue("echelons.warehouses", "bad type")])
    ech = EchelonSets(
        _id_tuple(ech_t, "suppliers"),
        _id_tuple(ech_t, "manufacturers"),
        tuple(tuple(int(v) for v in lv) for lv in levels),
        _id_tuple(ech_t, "distribution_centres"),
        _id_tuple(ech_t, "retailers"),
        _id_tuple(ech_t, "markets"),
    )

    nodes: dict[int, NodeParams] = {}
    for i, row in enumerate(doc.get("node", [])):
        path = f"node[{i}]"
        nid = _get(row, "id", path, int)
        nodes[nid] = NodeParams(
            _get(row, "initial_inventory", path, int),
            _get(row, "holding_cost", path),
            _get(row, "holding_emission", path),
            _get(row, "production_cost", path, default=None),
            _get(row, "yield_ratio", path, default=None),
            _get(row, "production_emission", path, default=None),
        )

    routes = []
    for i, row in enumerate(doc.get("route", [])):
        path = f"route[{i}]"
        routes.append(
            RouteParams(
                _get(row, "from", path, int),
                _get(row, "to", path, int),
                _get(row, "transport_cost", path),
                _get(row, "transport_emission", path),
            )
        )

    demands: dict[int, DemandSpec] = {}
    for i, row in enumerate(doc.get("demand", [])):
        path = f"demand[{i}]"
        demands[_get(row, "market", path, int)] = DemandSpec(
            _get(row, "kind", path, str),
            mean=_get(row, "mean", path, default=0.0),
            std_dev=_get(row, "std_dev", path, default=0.0),
            rate=_get(row, "rate", path, default=0.0),
            seasonal_amplitude=_get(row, "seasonal_amplitude", path, default=0.5),
            seasonal_period=_get(row, "seasonal_period", path, default=None),
        )

    sim = doc.get("simulation", {})
    eco = doc.get("economics", {})
    price_list = eco.get("prices", [])
    if not isinstance(price_list, list) or len(price_list) != len(ech.retailers):
        raise ScenarioError(
            "economics.prices: expected one price per retailer",
            [Issue("economics.prices", "expected one price per retailer")],
        )
    ref = eco.get("reference_point", [0.0, 0.0, 0.0])
    if not isinstance(ref, list) or len(ref) != 3:
        raise ScenarioError("economics.reference_point: expected three numbers", [Issue("reference_point", "bad shape")])

    cfg = ScenarioConfig(
        name=str(doc.get("name", "custom")),
        echelons=ech,
        nodes=nodes,
        routes=tuple(routes),
        demands=demands,
        prices={r: float(p) for r, p in zip(ech.retailers, price_list)},
        horizon=_get(sim, "horizon", "simulation", int, 100),
        lead_time=_get(sim, "lead_time", "simulation", int, 2),
        capacity=_get(sim, "capacity", "simulation", float, 200.0),
        big_m=_get(sim, "big_m", "simulation", float, 1e6),
        reference_point=tuple(float(v) for v in ref),
    )
    issues = validate_scenario(cfg)
    if issues:
        raise ScenarioError("invalid scenario:\n  " + "\n  ".join(map(str, issues)), issues)
    return cfg


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Read and validate a TOML scenario file.

    Raises:
        ScenarioError: the file is malformed or breaks an invariant.  The
            message and ``issues`` attribute name the offending keys.
    """
    return loads_scenario(Path(path).read_text())


def with_routes(cfg: ScenarioConfig, routes: Iterable[RouteParams]) -> ScenarioConfig:
    return replace(cfg, routes=tuple(routes))
