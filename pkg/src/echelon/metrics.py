"""Pareto dominance, archives and front-quality indicators.

All objectives are maximised.  Hypervolume works on raw objective values
against a reference point; EUM, sparsity and the distance indicators work on
values rescaled by :class:`NormalisationBounds` so that objectives of very
different magnitude contribute comparably.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

__all__ = [
    "Front",
    "NormalisationBounds",
    "ParetoArchive",
    "dominates",
    "nondominated_mask",
    "pareto_filter",
    "hypervolume",
    "eum",
    "sparsity",
    "generational_distance",
    "inverted_generational_distance",
    "ahd",
    "das_dennis",
    "estimate_true_front",
    "bounds_from_points",
    "indicator_record",
]

log = logging.getLogger(__name__)


@dataclass
class Front:
    """Objective vectors with an opaque handle per point."""

    points: np.ndarray
    ids: list = field(default_factory=list)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(1, -1) if pts.size else pts.reshape(0, 3)
        self.points = pts
        if not self.ids:
            self.ids = list(range(len(self.points)))

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class NormalisationBounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or np.any(~(lo < hi)):
            raise ValueError("normalisation bounds need lower < upper for every objective")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def normalise(self, values) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.lower) / (self.upper - self.lower)

    @classmethod
    def unit(cls, m: int = 3) -> NormalisationBounds:
        return cls(np.zeros(m), np.ones(m))


def bounds_from_points(points, widen: float = 0.0) -> NormalisationBounds:
    """Per-objective min/max of ``points``, widened by a fraction of the range.

    A zero-width objective is expanded to ``[v - 0.5, v + 0.5]``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = hi - lo
    lo, hi = lo - widen * span, hi + widen * span
    flat = ~(lo < hi)
    lo = np.where(flat, lo - 0.5, lo)
    hi = np.where(flat, hi + 0.5, hi)
    return NormalisationBounds(lo, hi)


def _as_points(front) -> np.ndarray:
    if isinstance(front, Front):
        return front.points
    pts = np.asarray(front, dtype=float)
    if pts.size == 0:
        return pts.reshape(0, pts.shape[-1] if pts.ndim > 1 else 0)
    return np.atleast_2d(pts)


def _normalised(points: np.ndarray, bounds: NormalisationBounds | None) -> np.ndarray:
    return points if bounds is None else bounds.normalise(points)


# --------------------------------------------------------------------------
# dominance


def dominates(a, b) -> bool:
    """True iff ``a`` is at least as good everywhere and better somewhere."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return bool(np.all(a >= b) and np.any(a > b))


def nondominated_mask(points, chunk: int = 1024) -> np.ndarray:
    """Boolean mask of points no other point dominates (duplicates all kept)."""
    pts = _as_points(points)
    n = len(pts)
    keep = np.ones(n, dtype=bool)
    for s in range(0, n, chunk):
        block = pts[s : s + chunk]
        ge = np.all(pts[None, :, :] >= block[:, None, :], axis=2)
        gt = np.any(pts[None, :, :] > block[:, None, :], axis=2)
        keep[s : s + chunk] = ~np.any(ge & gt, axis=1)
    return keep


def pareto_filter(points, ids: Sequence | None = None) -> Front:
    """Non-dominated subset in order of first occurrence, one copy per duplicate."""
    pts = _as_points(points)
    if isinstance(points, Front) and ids is None:
        ids = points.ids
    if ids is None:
        ids = list(range(len(pts)))
    if len(pts) == 0:
        return Front(pts.reshape(0, pts.shape[1] if pts.ndim == 2 else 3), [])
    keep = nondominated_mask(pts)
    seen = set()
    sel = []
    for i in np.flatnonzero(keep):
        key = pts[i].tobytes()
        if key not in seen:
            seen.add(key)
            sel.append(i)
    return Front(pts[sel], [ids[i] for i in sel])


def estimate_true_front(all_runs: Iterable) -> Front:
    """Non-dominated set of the union of several fronts."""
    pts, ids = [], []
    for k, f in enumerate(all_runs):
        p = _as_points(f)
        if len(p) == 0:
            continue
        pts.append(p)
        fid = f.ids if isinstance(f, Front) else list(range(len(p)))
        ids.extend((k, i) for i in fid)
    if not pts:
        return Front(np.zeros((0, 3)), [])
    return pareto_filter(np.vstack(pts), ids)


class ParetoArchive:
    """Growing non-dominated set with a payload per point."""

    def __init__(self, n_objectives: int = 3):
        self.points = np.zeros((0, n_objectives))
        self.payloads: list[Any] = []

    def __len__(self) -> int:
        return len(self.points)

    def insert(self, points, payloads: Sequence | None = None) -> None:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.size == 0:
            return
        if payloads is None:
            payloads = [None] * len(pts)
        allp = np.vstack([self.points, pts])
        allpl = self.payloads + list(payloads)
        f = pareto_filter(allp, list(range(len(allp))))
        self.points = f.points
        self.payloads = [allpl[i] for i in f.ids]

    def front(self) -> Front:
        return Front(self.points.copy(), list(range(len(self.points))))


# --------------------------------------------------------------------------
# hypervolume


def _hv_positive(x: np.ndarray) -> float:
    """Volume of the union of boxes [0, x_i] for strictly positive rows."""
    n, d = x.shape
    if n == 0:
        return 0.0
    if d == 1:
        return float(x[:, 0].max())
    if d == 2:
        order = np.argsort(-x[:, 0], kind="stable")
        xs, ys = x[order, 0], np.maximum.accumulate(x[order, 1])
        widths = xs - np.append(xs[1:], 0.0)
        return float(np.dot(widths, ys))
    # slice along the last objective, from the top down
    order = np.argsort(-x[:, -1], kind="stable")
    xs = x[order]
    heights = xs[:, -1] - np.append(xs[1:, -1], 0.0)
    total = 0.0
    for k in range(n):
        if heights[k] > 0:
            sub = xs[: k + 1, :-1]
            if sub.shape[1] > 2:
                sub = sub[nondominated_mask(sub)]
            total += heights[k] * _hv_positive(sub)
    return total


def hypervolume(front, reference) -> float:
    """Exact dominated hypervolume (maximisation) relative to ``reference``.

    Points not strictly better than the reference in every objective enclose
    no volume; they are dropped and a debug message reports how many.
    """
    pts = _as_points(front)
    ref = np.asarray(reference, dtype=float)
    if len(pts) == 0:
        return 0.0
    if pts.shape[1] != ref.shape[0]:
        raise ValueError(f"dimension mismatch: points have {pts.shape[1]} objectives, reference {ref.shape[0]}")
    x = pts - ref
    ok = np.all(x > 0, axis=1)
    if not ok.all():
        log.debug("hypervolume: %d point(s) do not dominate the reference", int((~ok).sum()))
    x = x[ok]
    if len(x) == 0:
        return 0.0
    x = x[nondominated_mask(x)]
    x = np.unique(x, axis=0)
    return _hv_positive(x)


# --------------------------------------------------------------------------
# utility / spacing / distance indicators


def eum(front, weights, bounds: NormalisationBounds | None = None) -> float:
    """Mean over weight vectors of the best linear utility on the front."""
    pts = _as_points(front)
    if len(pts) == 0:
        raise ValueError("EUM of an empty front is undefined")
    w = np.atleast_2d(np.asarray(weights, dtype=float))
    if len(w) == 0:
        raise ValueError("EUM needs at least one weight vector")
    u = w @ _normalised(pts, bounds).T
    return float(u.max(axis=1).mean())


def sparsity(front, bounds: NormalisationBounds | None = None) -> float:
    """Mean squared gap between neighbouring points, per objective.

    Returns ``nan`` for fronts with fewer than two points.
    """
    pts = _as_points(front)
    n = len(pts)
    if n < 2:
        return math.nan
    v = np.sort(_normalised(pts, bounds), axis=0, kind="stable")
    return float((np.diff(v, axis=0) ** 2).sum() / (n - 1))


def _min_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))
    return d.min(axis=1)


def generational_distance(front, truth, p: float = 2.0, bounds: NormalisationBounds | None = None) -> float:
    """``(mean_i dist(x_i, truth)^p)^(1/p)`` over the points of ``front``."""
    a, b = _as_points(front), _as_points(truth)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("distance indicators need non-empty fronts")
    d = _min_dists(_normalised(a, bounds), _normalised(b, bounds))
    return float(np.mean(d**p) ** (1.0 / p))


def inverted_generational_distance(front, truth, p: float = 2.0, bounds: NormalisationBounds | None = None) -> float:
    return generational_distance(truth, front, p, bounds)


def ahd(front, truth, p: float = 2.0, bounds: NormalisationBounds | None = None) -> float:
    """Averaged Hausdorff distance: max of GD_p and IGD_p."""
    return max(
        generational_distance(front, truth, p, bounds),
        inverted_generational_distance(front, truth, p, bounds),
    )


# --------------------------------------------------------------------------
# weights


def das_dennis(objectives: int, partitions: int) -> np.ndarray:
    """Simplex-lattice weights with step ``1/partitions``, in lexicographic order."""
    if objectives < 1 or partitions < 1:
        raise ValueError("need objectives >= 1 and partitions >= 1")
    rows = []
    # stars and bars: choose positions of (objectives - 1) bars
    for bars in itertools.combinations(range(partitions + objectives - 1), objectives - 1):
        edges = (-1,) + bars + (partitions + objectives - 1,)
        rows.append([edges[i + 1] - edges[i] - 1 for i in range(objectives)])
    rows.sort()
    return np.array(rows, dtype=float) / partitions


def indicator_record(
    front,
    reference,
    truth=None,
    weights=None,
    bounds: NormalisationBounds | None = None,
    p: float = 2.0,
) -> dict:
    """All indicators for one front as a flat dict.

    When ``bounds`` is not given they are taken from the truth front (or the
    front itself) via :func:`bounds_from_points`.  ``weights`` defaults to
    ``das_dennis(m, 12)``.
    """
    pts = _as_points(front)
    ref_pts = _as_points(truth) if truth is not None else pts
    m = pts.shape[1] if pts.ndim == 2 and pts.shape[1] else len(reference)
    if weights is None:
        weights = das_dennis(m, 12)
    if bounds is None and len(ref_pts):
        bounds = bounds_from_points(ref_pts)
    rec = {"n_points": int(len(pts)), "hypervolume": hypervolume(pts, reference)}
    if len(pts):
        rec["eum"] = eum(pts, weights, bounds)
        rec["sparsity"] = sparsity(pts, bounds)
    else:
        rec["eum"] = math.nan
        rec["sparsity"] = math.nan
    if len(pts) and len(ref_pts):
        rec["gd"] = generational_distance(pts, ref_pts, p, bounds)
        rec["igd"] = inverted_generational_distance(pts, ref_pts, p, bounds)
        rec["ahd"] = max(rec["gd"], rec["igd"])
    else:
        rec["gd"] = rec["igd"] = rec["ahd"] = math.nan
    return rec
