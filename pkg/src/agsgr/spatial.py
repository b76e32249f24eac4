"""Aggregate nearest-neighbor search over topic-filtered POIs.

Distances are Euclidean on an equirectangular projection (meters).  The
aggregate distance of a location to a group is the largest distance to
any member.  The center of the members' minimum enclosing circle
minimizes that aggregate, and every subtree whose MBR lies at least
``best + min_i |u_i, center|`` from the center can be skipped (triangle
inequality).
"""

from __future__ import annotations

import bisect
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .exceptions import EmptyGroup

EARTH_RADIUS_M = 6_371_000.0
DEFAULT_FANOUT = 16


@dataclass(frozen=True)
class PlanarPoint:
    x: float
    y: float

    def __iter__(self):
        yield self.x
        yield self.y


@dataclass(frozen=True)
class Circle:
    center: PlanarPoint
    radius: float

    def contains(self, p, tol: float = 1e-9) -> bool:
        return math.hypot(p[0] - self.center.x, p[1] - self.center.y) <= self.radius + tol * max(1.0, self.radius)


def project(lat: float, lon: float, origin: tuple[float, float]) -> PlanarPoint:
    """Equirectangular projection about ``origin = (lat0, lon0)``, in meters."""
    lat0, lon0 = origin
    rad = math.pi / 180.0
    x = EARTH_RADIUS_M * (lon - lon0) * rad * math.cos(lat0 * rad)
    y = EARTH_RADIUS_M * (lat - lat0) * rad
    return PlanarPoint(x, y)


def adist(location, group_locs: Sequence) -> float:
    """Largest Euclidean distance from ``location`` to any group member."""
    if len(group_locs) == 0:
        raise EmptyGroup("aggregate distance needs at least one group member")
    lx, ly = location
    return max(math.hypot(lx - x, ly - y) for x, y in group_locs)


# --- minimum enclosing circle ---------------------------------------------------


def _circle_two(a, b) -> Circle:
    cx, cy = (a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0
    return Circle(PlanarPoint(cx, cy), math.hypot(a[0] - cx, a[1] - cy))


def _circle_three(a, b, c) -> Circle:
    ax, ay = a
    bx, by = b[0] - ax, b[1] - ay
    cx, cy = c[0] - ax, c[1] - ay
    d = 2.0 * (bx * cy - by * cx)
    scale = max(abs(bx), abs(by), abs(cx), abs(cy), 1e-300)
    if abs(d) <= 1e-12 * scale * scale:
        # collinear: the farthest pair spans the others
        pairs = [(a, b), (a, c), (b, c)]
        return max((_circle_two(p, q) for p, q in pairs), key=lambda k: k.radius)
    b2, c2 = bx * bx + by * by, cx * cx + cy * cy
    ux = (cy * b2 - by * c2) / d
    uy = (bx * c2 - cx * b2) / d
    return Circle(PlanarPoint(ax + ux, ay + uy), math.hypot(ux, uy))


def minimum_enclosing_circle(points: Iterable, seed: int | None = 0) -> Circle:
    """Smallest circle containing every point (randomized incremental, expected O(n)).

    Points are shuffled with ``random.Random(seed)`` so results are
    reproducible.
    """
    pts = [(float(p[0]), float(p[1])) for p in points]
    if not pts:
        raise EmptyGroup("minimum enclosing circle of no points")
    random.Random(seed).shuffle(pts)
    circ = Circle(PlanarPoint(*pts[0]), 0.0)
    for i in range(1, len(pts)):
        p = pts[i]
        if circ.contains(p):
            continue
        circ = Circle(PlanarPoint(*p), 0.0)
        for j in range(i):
            q = pts[j]
            if circ.contains(q):
                continue
            circ = _circle_two(p, q)
            for m in range(j):
                r = pts[m]
                if not circ.contains(r):
                    circ = _circle_three(p, q, r)
    return circ


# --- STR-packed R-tree -------------------------------------------------------------


class _Node:
    __slots__ = ("mbr", "children", "lo", "hi")

    def __init__(self, mbr, children, lo, hi):
        self.mbr = mbr
        self.children = children  # None for leaves
        self.lo = lo
        self.hi = hi

    @property
    def is_leaf(self):
        return self.children is None


def mindist(mbr, p) -> float:
    """Distance from ``p`` to the rectangle ``(xmin, ymin, xmax, ymax)``; 0 inside."""
    xmin, ymin, xmax, ymax = mbr
    dx = max(xmin - p[0], 0.0, p[0] - xmax)
    dy = max(ymin - p[1], 0.0, p[1] - ymax)
    return math.hypot(dx, dy)


def _str_groups(cx: np.ndarray, cy: np.ndarray, fanout: int) -> list[np.ndarray]:
    """Sort-tile-recursive partition of items into runs of at most ``fanout``."""
    n = len(cx)
    n_groups = math.ceil(n / fanout)
    n_slices = math.ceil(math.sqrt(n_groups))
    per_slice = n_slices * fanout
    order = np.lexsort((cy, cx))
    out = []
    for s in range(0, n, per_slice):
        sl = order[s : s + per_slice]
        sl = sl[np.lexsort((cx[sl], cy[sl]))]
        out.extend(sl[i : i + fanout] for i in range(0, len(sl), fanout))
    return out


@dataclass
class SpatialIndex:
    """Static R-tree bulk loaded with sort-tile-recursive packing.

    Entries are stored in leaf order, so every node covers the contiguous
    entry slice ``[lo, hi)``.
    """

    ids: np.ndarray
    xy: np.ndarray
    topics: np.ndarray
    root: _Node | None
    fanout: int = DEFAULT_FANOUT
    height: int = 0

    def __len__(self):
        return len(self.ids)

    @classmethod
    def build(cls, ids: Sequence, xy, topics: Sequence | None = None, fanout: int = DEFAULT_FANOUT):
        if fanout < 2:
            raise ValueError("fanout must be >= 2")
        ids = np.asarray(list(ids), dtype=str)
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        if topics is None:
            topics = np.full(len(ids), "", dtype=str)
        topics = np.asarray(list(topics), dtype=str)
        if not (len(ids) == len(xy) == len(topics)):
            raise ValueError("ids, coordinates and topics differ in length")
        if len(ids) == 0:
            return cls(ids, xy, topics, None, fanout, 0)

        # id tiebreak keeps the packing deterministic under duplicate coordinates
        base = np.lexsort((ids, xy[:, 1], xy[:, 0]))
        ids, xy, topics = ids[base], xy[base], topics[base]
        runs = _str_groups(xy[:, 0], xy[:, 1], fanout)
        perm = np.concatenate(runs)
        ids, xy, topics = ids[perm], xy[perm], topics[perm]

        level = []
        lo = 0
        for run in runs:
            hi = lo + len(run)
            pts = xy[lo:hi]
            mbr = (pts[:, 0].min(), pts[:, 1].min(), pts[:, 0].max(), pts[:, 1].max())
            level.append(_Node(tuple(float(v) for v in mbr), None, lo, hi))
            lo = hi
        height = 1
        while len(level) > 1:
            cx = np.array([(n.mbr[0] + n.mbr[2]) / 2 for n in level])
            cy = np.array([(n.mbr[1] + n.mbr[3]) / 2 for n in level])
            parents = []
            for run in _str_groups(cx, cy, fanout):
                kids = [level[i] for i in run]
                mbr = (
                    min(k.mbr[0] for k in kids),
                    min(k.mbr[1] for k in kids),
                    max(k.mbr[2] for k in kids),
                    max(k.mbr[3] for k in kids),
                )
                parents.append(_Node(mbr, kids, 0, 0))
            level = parents
            height += 1
        root = level[0]

        # renumber so every subtree owns a contiguous entry slice
        perm = []

        def assign(node):
            if node.is_leaf:
                start = len(perm)
                perm.extend(range(node.lo, node.hi))
                node.lo, node.hi = start, len(perm)
                return
            for ch in node.children:
                assign(ch)
            node.lo, node.hi = node.children[0].lo, node.children[-1].hi

        assign(root)
        perm = np.asarray(perm, dtype=np.int64)
        ids, xy, topics = ids[perm], xy[perm], topics[perm]
        return cls(ids, xy, topics, root, fanout, height)

    def nodes(self):
        """Yield every node depth-first."""
        if self.root is None:
            return
        stack = [self.root]
        while stack:
            n = stack.pop()
            yield n
            if not n.is_leaf:
                stack.extend(n.children)

    def leaves(self):
        return (n for n in self.nodes() if n.is_leaf)


def build_index(pois, origin: tuple[float, float], fanout: int = DEFAULT_FANOUT) -> SpatialIndex:
    """Index POIs (objects with ``id``, ``lat``, ``lon``, ``topic``) after projection."""
    pois = list(pois)
    xy = [tuple(project(p.lat, p.lon, origin)) for p in pois]
    return SpatialIndex.build([p.id for p in pois], xy, [p.topic for p in pois], fanout)


# --- search --------------------------------------------------------------------------


@dataclass
class AnnResult:
    ranked: list[tuple[str, float]] = field(default_factory=list)

    def __len__(self):
        return len(self.ranked)

    @property
    def ids(self) -> list[str]:
        return [i for i, _ in self.ranked]

    def to_csv(self) -> str:
        lines = ["rank,poi_id,adist_meters"]
        lines += [f"{r},{pid},{d:.3f}" for r, (pid, d) in enumerate(self.ranked, 1)]
        return "\n".join(lines) + "\n"


@dataclass
class SearchTrace:
    """Optional instrumentation filled in by :func:`spa_df`."""

    pruned: list = field(default_factory=list)
    entries_scanned: int = 0
    nodes_visited: int = 0


def _group_array(group_locs) -> np.ndarray:
    arr = np.asarray([tuple(p) for p in group_locs], dtype=float).reshape(-1, 2)
    if len(arr) == 0:
        raise EmptyGroup("aggregate search needs at least one group member")
    return arr


def _leaf_adist(xy: np.ndarray, group: np.ndarray) -> np.ndarray:
    d = np.hypot(xy[:, None, 0] - group[None, :, 0], xy[:, None, 1] - group[None, :, 1])
    return d.max(axis=1)


def spa_df(
    index: SpatialIndex,
    group_locs,
    K: int = 1,
    trace: SearchTrace | None = None,
    _slack: float = 0.0,
) -> AnnResult:
    """Top-``K`` POIs by aggregate distance, depth-first with centroid pruning.

    Children are visited by increasing mindist to the enclosing-circle
    center ``c``.  With ``best`` the current K-th best aggregate distance
    and ``r = min_i |u_i, c|``, a child is skipped (together with every
    later sibling) once ``mindist(child, c) - r`` exceeds ``best``.  Ties on
    aggregate distance are ranked by POI id.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    group = _group_array(group_locs)
    if index.root is None:
        return AnnResult()
    cen = minimum_enclosing_circle(group).center
    cen = (cen.x, cen.y)
    r_min = float(np.hypot(group[:, 0] - cen[0], group[:, 1] - cen[1]).min())
    best: list[tuple[float, str]] = []
    ids, xy = index.ids, index.xy

    def kth():
        return best[-1][0] if len(best) >= K else math.inf

    def visit(node):
        if trace is not None:
            trace.nodes_visited += 1
        if node.is_leaf:
            dists = _leaf_adist(xy[node.lo : node.hi], group)
            if trace is not None:
                trace.entries_scanned += node.hi - node.lo
            for off in np.argsort(dists, kind="stable"):
                item = (float(dists[off]), str(ids[node.lo + off]))
                if len(best) < K or item < best[-1]:
                    bisect.insort(best, item)
                    if len(best) > K:
                        best.pop()
            return
        order = sorted(
            ((mindist(ch.mbr, cen), i, ch) for i, ch in enumerate(node.children)),
            key=lambda t: (t[0], t[1]),
        )
        for pos, (md, _, ch) in enumerate(order):
            if md - r_min > kth() - _slack:
                if trace is not None:
                    trace.pruned.extend(o[2] for o in order[pos:])
                break
            visit(ch)

    visit(index.root)
    return AnnResult([(pid, d) for d, pid in best])


def brute_force_ann(ids: Sequence, xy, group_locs, K: int = 1) -> AnnResult:
    """Linear scan: aggregate distance of every POI, sorted, first ``K``."""
    group = _group_array(group_locs)
    ids = np.asarray(list(ids), dtype=str)
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    if len(ids) == 0:
        return AnnResult()
    d = _leaf_adist(xy, group)
    order = np.lexsort((ids, d))[:K]
    return AnnResult([(str(ids[i]), float(d[i])) for i in order])
