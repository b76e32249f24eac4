"""Brute-force reference implementations and randomized equivalence suites.

Each oracle is written independently of the optimized code it checks:
dense adjacency matrices instead of the graph class, exhaustive subset
enumeration instead of guided search, and all pair/triple circles instead
of incremental construction.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable

import numpy as np

from .graph import GeoSocialNetwork, core_decomposition
from .groups import Query, candidate_pool_for
from .exceptions import EmptyResult
from .spatial import SearchTrace, SpatialIndex, brute_force_ann, minimum_enclosing_circle, spa_df

FAULT_SLACK_M = math.inf  # prunes every subtree once K results exist


# --- oracles -------------------------------------------------------------------------


def adjacency_matrix(g: GeoSocialNetwork) -> tuple[list, np.ndarray]:
    users = list(g.users)
    index = {u: i for i, u in enumerate(users)}
    A = np.zeros((len(users), len(users)), dtype=bool)
    for u, v in g.edges():
        A[index[u], index[v]] = A[index[v], index[u]] = True
    return users, A


def core_numbers_bruteforce(g: GeoSocialNetwork) -> dict:
    """Core numbers by repeatedly deleting users of degree < k, for every k."""
    users, A = adjacency_matrix(g)
    core = np.zeros(len(users), dtype=int)
    alive = np.ones(len(users), dtype=bool)
    k = 0
    while alive.any():
        k += 1
        changed = True
        while changed:
            deg = (A & alive[None, :]).sum(axis=1)
            drop = alive & (deg < k)
            changed = bool(drop.any())
            alive &= ~drop
        core[alive] = k
    return {u: int(c) for u, c in zip(users, core)}


def _connected(A: np.ndarray) -> bool:
    n = len(A)
    reach = np.zeros(n, dtype=bool)
    reach[0] = True
    for _ in range(n):
        nxt = reach | A[reach].any(axis=0)
        if (nxt == reach).all():
            break
        reach = nxt
    return bool(reach.all())


def valid_groups_bruteforce(g: GeoSocialNetwork, target, k: int, h: int, require_friendship: bool = True) -> set:
    """Every ``h``-subset containing ``target`` that is connected with min degree ``k``."""
    users, A = adjacency_matrix(g)
    t = users.index(target)
    if require_friendship:
        pool = [i for i in range(len(users)) if A[t, i]]
    else:
        pool = [i for i in range(len(users)) if i != t]
    out = set()
    for rest in combinations(pool, h - 1):
        idx = [t, *rest]
        sub = A[np.ix_(idx, idx)]
        if sub.sum(axis=1).min() >= k and _connected(sub):
            out.add(frozenset(users[i] for i in idx))
    return out


def mec_radius_bruteforce(points) -> float:
    """Smallest enclosing radius over all pair-diameter and triple circles, O(n^4)."""
    P = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(P)
    if n == 1:
        return 0.0
    scale = max(1.0, float(np.abs(P).max()))
    tol = 1e-9 * scale
    centers, radii = [], []
    i, j = np.triu_indices(n, 1)
    centers.append((P[i] + P[j]) / 2)
    radii.append(np.hypot(*(P[i] - P[j]).T) / 2)
    if n >= 3:
        tri = np.array(list(combinations(range(n), 3)))
        a, b, c = P[tri[:, 0]], P[tri[:, 1]], P[tri[:, 2]]
        bx, by = (b - a).T
        cx, cy = (c - a).T
        d = 2 * (bx * cy - by * cx)
        ok = np.abs(d) > 1e-12 * scale * scale
        b2, c2 = bx**2 + by**2, cx**2 + cy**2
        ux = (cy * b2 - by * c2)[ok] / d[ok]
        uy = (bx * c2 - cx * b2)[ok] / d[ok]
        centers.append(a[ok] + np.c_[ux, uy])
        radii.append(np.hypot(ux, uy))
    C = np.concatenate(centers)
    R = np.concatenate(radii)
    best = math.inf
    for s in range(0, len(C), 4096):
        cc, rr = C[s : s + 4096], R[s : s + 4096]
        dist = np.hypot(cc[:, None, 0] - P[None, :, 0], cc[:, None, 1] - P[None, :, 1])
        enclosing = (dist <= rr[:, None] + tol).all(axis=1)
        if enclosing.any():
            best = min(best, float(rr[enclosing].min()))
    return best


# --- random instances ----------------------------------------------------------------


def random_graph(rng: np.random.Generator, n_max: int = 30, p_range=(0.1, 0.5)) -> GeoSocialNetwork:
    n = int(rng.integers(1, n_max + 1))
    p = float(rng.uniform(*p_range))
    i, j = np.triu_indices(n, 1)
    keep = rng.random(len(i)) < p
    return GeoSocialNetwork.from_edges(zip(i[keep].tolist(), j[keep].tolist()), users=range(n))


def random_points(rng: np.random.Generator, n: int, extent: float = 10_000.0) -> np.ndarray:
    """Uniform points, sometimes snapped to a coarse grid to create exact ties."""
    xy = rng.uniform(0, extent, size=(n, 2))
    if rng.random() < 0.3:
        xy = np.round(xy / (extent / 20)) * (extent / 20)
    return xy


def random_ann_instance(rng: np.random.Generator, max_pois: int = 5000, max_group: int = 10, max_k: int = 20) -> dict:
    n = int(rng.integers(1, max_pois + 1))
    xy = random_points(rng, n)
    ids = [f"p{v}" for v in rng.permutation(n)]
    group = rng.uniform(0, 10_000, size=(int(rng.integers(1, max_group + 1)), 2))
    return {
        "ids": ids,
        "xy": xy.tolist(),
        "group": group.tolist(),
        "K": int(rng.integers(1, max_k + 1)),
        "fanout": int(rng.choice([4, 8, 16])),
    }


# --- suites ------------------------------------------------------------------------------


def _graph_dict(g: GeoSocialNetwork) -> dict:
    return {"users": list(g.users), "edges": [list(e) for e in g.edges()]}


def check_kcore(rng) -> dict | None:
    g = random_graph(rng)
    got, want = core_decomposition(g), core_numbers_bruteforce(g)
    if got != want:
        return {"graph": _graph_dict(g), "got": got, "want": want}
    return None


def check_groups(rng) -> dict | None:
    g = random_graph(rng, n_max=12)
    for k in (1, 2, 3):
        for h in range(k + 1, 7):
            for u in g.users:
                want = valid_groups_bruteforce(g, u, k, h)
                try:
                    got = candidate_pool_for(g, Query(u, h, k), cap=None).member_sets()
                except EmptyResult:
                    got = set()
                if got != want:
                    return {
                        "graph": _graph_dict(g),
                        "target": u,
                        "k": k,
                        "h": h,
                        "got": sorted(sorted(s) for s in got),
                        "want": sorted(sorted(s) for s in want),
                    }
    return None


def check_mec(rng) -> dict | None:
    n = int(rng.integers(1, 61))
    pts = random_points(rng, n, extent=float(rng.choice([1.0, 100.0, 10_000.0])))
    got = minimum_enclosing_circle(pts).radius
    want = mec_radius_bruteforce(pts)
    if abs(got - want) > 1e-6:
        return {"points": pts.tolist(), "got": got, "want": want}
    return None


def ann_mismatch(inst: dict, slack: float = 0.0) -> dict | None:
    """Compare search against a linear scan; also audit every pruned subtree."""
    index = SpatialIndex.build(inst["ids"], inst["xy"], fanout=inst["fanout"])
    trace = SearchTrace()
    got = spa_df(index, inst["group"], inst["K"], trace=trace, _slack=slack)
    want = brute_force_ann(inst["ids"], inst["xy"], inst["group"], inst["K"])
    if got.ids != want.ids or any(abs(a - b) > 1e-6 for (_, a), (_, b) in zip(got.ranked, want.ranked)):
        return {"reason": "result mismatch", "got": got.ranked, "want": want.ranked}
    kth = got.ranked[-1][1] if got.ranked else math.inf
    grp = np.asarray(inst["group"], dtype=float)
    for node in trace.pruned:
        pts = index.xy[node.lo : node.hi]
        d = np.hypot(pts[:, None, 0] - grp[None, :, 0], pts[:, None, 1] - grp[None, :, 1]).max(axis=1)
        if d.min() < kth:
            return {"reason": "unsafe prune", "kth": kth, "pruned_min": float(d.min())}
    return None


def make_ann_check(slack: float = 0.0) -> Callable:
    def check_ann(rng) -> dict | None:
        inst = random_ann_instance(rng)
        bad = ann_mismatch(inst, slack)
        return None if bad is None else {"instance": inst, **bad}

    return check_ann


SUITE_TRIALS = {"kcore": 1000, "groups": 200, "mec": 200, "ann": 500}


@dataclass
class SuiteResult:
    name: str
    trials: int
    failures: int = 0
    seconds: float = 0.0
    first_failure: dict | None = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.trials - self.failures}/{self.trials} agree ({self.seconds:.2f} s)"


def run_suite(name: str, check: Callable, trials: int, seed: int) -> SuiteResult:
    res = SuiteResult(name, trials)
    t0 = time.perf_counter()
    for trial in range(trials):
        rng = np.random.default_rng([seed, trial])
        bad = check(rng)
        if bad is not None:
            res.failures += 1
            if res.first_failure is None:
                res.first_failure = {"suite": name, "seed": seed, "trial": trial, **bad}
    res.seconds = time.perf_counter() - t0
    return res


def run_oracle_checks(trials: int | None = None, seed: int = 0, inject_fault: bool = False) -> list[SuiteResult]:
    """Run every suite; ``trials`` overrides the per-suite default counts."""
    suites = {
        "kcore": check_kcore,
        "groups": check_groups,
        "mec": check_mec,
        "ann": make_ann_check(FAULT_SLACK_M if inject_fault else 0.0),
    }
    return [
        run_suite(name, fn, SUITE_TRIALS[name] if trials is None else trials, seed)
        for name, fn in suites.items()
    ]
