"""Group and location accuracy metrics and the experiment runner.

Discounted gain uses ``rel_1 + sum_{i>=2} rel_i / log2(i)``, so the
second position is not discounted at all (the more common convention
divides by ``log2(i + 1)``).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .exceptions import AGSGRError, ConfigError, EmptyResult
from .ingest import GroupEvent
from .validation import check_int

logger = logging.getLogger(__name__)

METRICS = ("pre_at_h", "pre_at_k", "ndcg_at_k")


def _mean_or_none(values: list[float]) -> float | None:
    return float(np.mean(values)) if values else None


def precision_at_h(recommended: Sequence, truth: Sequence, h: int | None = None) -> float | None:
    """Mean ``|rec & truth| / |rec|`` over targets that have a truth group.

    ``recommended[i]`` may be ``None`` (no group found), which scores 0.
    Targets whose truth is ``None`` are skipped; ``None`` is returned when
    none remain.
    """
    if len(recommended) != len(truth):
        raise ValueError("recommended and truth lists differ in length")
    scores = []
    for rec, tru in zip(recommended, truth):
        if tru is None:
            continue
        if not rec:
            scores.append(0.0)
            continue
        rec = set(rec)
        if h is not None and len(rec) != h:
            raise ValueError(f"recommended group has size {len(rec)}, expected {h}")
        scores.append(len(rec & set(tru)) / len(rec))
    return _mean_or_none(scores)


def precision_at_k(recommended: Sequence, truth: Sequence, K: int | None = None) -> float | None:
    """Mean ``|L_rec & L_true| / |L_rec|`` with lists cut to ``K``; empty lists score 0."""
    if len(recommended) != len(truth):
        raise ValueError("recommended and truth lists differ in length")
    scores = []
    for rec, tru in zip(recommended, truth):
        if tru is None:
            continue
        rec = list(rec or [])[:K] if K is not None else list(rec or [])
        if not rec:
            scores.append(0.0)
            continue
        tru = set(tru)
        scores.append(sum(1 for x in rec if x in tru) / len(rec))
    return _mean_or_none(scores)


def dcg(rels: Iterable[float]) -> float:
    total = 0.0
    for i, r in enumerate(rels, 1):
        total += r if i == 1 else r / math.log2(i)
    return total


def ndcg_at_k(rels: Sequence[float], K: int | None = None) -> float:
    """DCG of the list over DCG of its ideal reordering; 0 when nothing is relevant."""
    rels = list(rels)[:K] if K is not None else list(rels)
    ideal = dcg(sorted(rels, reverse=True))
    return dcg(rels) / ideal if ideal > 0 else 0.0


# --- report ------------------------------------------------------------------------


@dataclass
class MetricRow:
    k: int
    h: int
    K: int
    metric: str
    value: float | None
    n: int


@dataclass
class MetricReport:
    rows: list[MetricRow] = field(default_factory=list)
    n_targets: int = 0
    seed: int = 0
    n_failed: int = 0

    def values(self, metric: str) -> dict[tuple[int, int, int], float | None]:
        return {(r.k, r.h, r.K): r.value for r in self.rows if r.metric == metric}

    @property
    def pre_at_h(self):
        return self.values("pre_at_h")

    @property
    def pre_at_k(self):
        return self.values("pre_at_k")

    @property
    def ndcg_at_k(self):
        return self.values("ndcg_at_k")

    def to_csv(self) -> str:
        lines = ["k,h,K,metric,value,n"]
        for r in self.rows:
            v = "" if r.value is None else f"{r.value:.6f}"
            lines.append(f"{r.k},{r.h},{r.K},{r.metric},{v},{r.n}")
        return "\n".join(lines) + "\n"

    def report(self) -> str:
        out = [f"targets sampled: {self.n_targets}  seed: {self.seed}  failed: {self.n_failed}"]
        out.append(f"{'k':>3} {'h':>3} {'K':>3}  {'Pre@h':>8} {'Pre@K':>8} {'nDCG@K':>8}")
        cells: dict = {}
        for r in self.rows:
            cells.setdefault((r.k, r.h, r.K), {})[r.metric] = r.value
        for (k, h, K), m in cells.items():
            fmt = ["       -" if m.get(x) is None else f"{m[x]:8.4f}" for x in METRICS]
            out.append(f"{k:>3} {h:>3} {K:>3}  {' '.join(fmt)}")
        return "\n".join(out) + "\n"


# --- experiment ----------------------------------------------------------------------


def truth_for(target, test_events: Sequence[GroupEvent]) -> tuple[tuple | None, set]:
    """Earliest test event with the target as its truth group, plus all its test POIs."""
    mine = sorted((e for e in test_events if target in e.members), key=lambda e: e.sort_key)
    if not mine:
        return None, set()
    return mine[0].members, {e.poi for e in mine}


def sample_targets(test_events: Sequence[GroupEvent], n: int, seed: int, known=None) -> list:
    users = sorted({u for e in test_events for u in e.members})
    if known is not None:
        users = [u for u in users if u in known]
    if n > len(users):
        logger.info("only %d targets available, %d requested", len(users), n)
        n = len(users)
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(users), size=n, replace=False) if n else []
    return [users[i] for i in sorted(picked)]


def _grid(k_range, h_range):
    return [(k, h) for k in k_range for h in h_range if h >= k + 1]


def run_experiment(
    recommender,
    test_events: Sequence[GroupEvent],
    n_targets: int = 100,
    seed: int = 0,
    k_range: Sequence[int] = range(1, 6),
    h_range: Sequence[int] = range(2, 11),
    K_range: Sequence[int] = (10,),
    threads: int = 1,
) -> MetricReport:
    """Average the metrics over sampled targets for every ``(k, h, K)`` cell.

    ``recommender`` must be fitted.  Cells with ``h <= k`` are skipped.
    Targets with no valid group score 0; targets raising any other
    pipeline error are dropped from every cell and counted.
    """
    check_int("eval.n_targets", n_targets, 1)
    K_range = sorted(set(K_range))
    if not K_range or min(K_range) < 1:
        raise ConfigError("eval.K_range needs values >= 1")
    grid = _grid(k_range, h_range)
    if not grid:
        raise ConfigError("evaluation grid is empty (need some h >= k + 1)")
    K_max = max(K_range)
    targets = sample_targets(test_events, n_targets, seed, recommender.network_)

    def evaluate(target):
        true_group, true_pois = truth_for(target, test_events)
        out = {}
        try:
            for k, h in grid:
                try:
                    rec = recommender.recommend(target, core=k, group_size=h, top_k=K_max)
                    out[(k, h)] = (rec.members, rec.location_ids)
                except EmptyResult:
                    out[(k, h)] = (None, [])
        except AGSGRError as exc:
            logger.warning("target %s excluded: %s", target, exc)
            return None
        return true_group, true_pois, out

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(evaluate, targets))
    else:
        results = [evaluate(t) for t in targets]
    ok = [r for r in results if r is not None]

    report = MetricReport(n_targets=len(targets), seed=seed, n_failed=len(results) - len(ok))
    for k, h in grid:
        groups = [r[2][(k, h)][0] for r in ok]
        tgroups = [r[0] for r in ok]
        n = sum(t is not None for t in tgroups)
        pre_h = precision_at_h(groups, tgroups)
        for K in K_range:
            locs = [r[2][(k, h)][1][:K] for r in ok]
            tlocs = [r[1] if r[0] is not None else None for r in ok]
            nd = [ndcg_at_k([1 if x in t else 0 for x in l], K) for l, t in zip(locs, tlocs) if t is not None]
            report.rows.append(MetricRow(k, h, K, "pre_at_h", pre_h, n))
            report.rows.append(MetricRow(k, h, K, "pre_at_k", precision_at_k(locs, tlocs, K), n))
            report.rows.append(MetricRow(k, h, K, "ndcg_at_k", _mean_or_none(nd), n))
    return report
