"""Candidate group enumeration and the social group-category query.

Groups are grown breadth-first from ``{target}``.  A partial group
carries the members already expanded and a set of *blocked* users:
neighbors of an expanded member that were offered but not taken.  A
blocked user can never join later, so every connected group has exactly
one growth path (pick the highest-degree unexpanded member, add exactly
its neighbors that belong to the final group).  This makes the
enumeration complete without duplicates, and it makes the degree filter
exact: once a member is expanded its in-group degree is final.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterator, NamedTuple

from .exceptions import EmptyResult, UnknownUser
from .graph import (
    GeoSocialNetwork,
    UserId,
    connected_components,
    core_decomposition,
    is_valid_group,
    k_core_subgraph,
)

DEFAULT_CAP = 10_000


@dataclass(frozen=True)
class Query:
    target: UserId
    h: int
    k: int
    K: int = 10

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"core constraint k must be >= 1, got {self.k}")
        if self.h < self.k + 1:
            raise ValueError(f"group size h={self.h} must be >= k + 1 = {self.k + 1}")
        if self.K < 1:
            raise ValueError(f"location list size K must be >= 1, got {self.K}")


@dataclass(frozen=True)
class CandidateGroup:
    members: tuple[UserId, ...]
    component_id: int = 0

    def __len__(self):
        return len(self.members)

    def __contains__(self, u):
        return u in self.members


@dataclass
class CandidatePool:
    groups: list[CandidateGroup] = field(default_factory=list)
    cap: int | None = DEFAULT_CAP
    truncated: bool = False

    def __len__(self):
        return len(self.groups)

    def __iter__(self):
        return iter(self.groups)

    def member_sets(self) -> set[frozenset]:
        return {frozenset(g.members) for g in self.groups}


class PartialGroup(NamedTuple):
    members: frozenset
    expanded: frozenset = frozenset()
    blocked: frozenset = frozenset()


def _pick_member(g: GeoSocialNetwork, partial: PartialGroup) -> UserId | None:
    pending = partial.members - partial.expanded
    if not pending:
        return None
    return min(pending, key=lambda u: (-g.degree(u), u))


def iter_successors(
    g: GeoSocialNetwork, partial: PartialGroup, q: Query, allowed=None
) -> Iterator[PartialGroup]:
    members = partial.members
    if len(members) >= q.h:
        return
    while True:
        u = _pick_member(g, partial)
        if u is None:
            return
        cand = sorted(
            v
            for v in g.neighbors(u)
            if v not in members and v not in partial.blocked and (allowed is None or v in allowed)
        )
        have = g.induced_degree(u, members)
        if cand:
            break
        if have < q.k:
            return
        # nothing to add around u: move on to the next member
        partial = partial._replace(expanded=partial.expanded | {u})
    lo = max(0, q.k - have)
    hi = min(q.h - len(members), len(cand))
    expanded = partial.expanded | {u}
    for r in range(lo, hi + 1):
        for vp in combinations(cand, r):
            chosen = frozenset(vp)
            yield PartialGroup(
                members | chosen,
                expanded,
                partial.blocked | frozenset(v for v in cand if v not in chosen),
            )


def expand_group(
    g: GeoSocialNetwork, partial, q: Query, allowed=None
) -> list[PartialGroup]:
    """All successors of a partial group.

    The highest-degree unexpanded member ``u`` (ties: smallest id) is
    extended by every subset ``Vp`` of its free neighbors such that the
    group stays within ``q.h`` users and ``u`` reaches in-group degree
    ``q.k``.  Members with no free neighbors are passed over (or end the
    branch if they are below ``q.k``).  A plain set is accepted and treated as a fresh partial group
    with nothing expanded or blocked.
    """
    if not isinstance(partial, PartialGroup):
        partial = PartialGroup(frozenset(partial))
    return list(iter_successors(g, partial, q, allowed))


def get_candidate_groups(
    g: GeoSocialNetwork,
    component,
    q: Query,
    cap: int | None = DEFAULT_CAP,
    require_friendship: bool = True,
) -> CandidatePool:
    """Enumerate valid ``h``-groups containing ``q.target`` inside ``component``.

    Parameters
    ----------
    g : GeoSocialNetwork
        Graph the component was taken from (typically the k-core subgraph).
    component : set of user ids
        Connected component that contains the target.
    cap : int or None
        Stop after this many groups; ``None`` means unlimited.
    require_friendship : bool
        If False, members need not be friends of the target (the relaxed
        baseline variant).
    """
    pool = CandidatePool(cap=cap)
    component = frozenset(component)
    if q.target not in component or len(component) < q.h:
        return pool
    if require_friendship:
        allowed = component & (g.neighbor_set(q.target) | {q.target})
    else:
        allowed = component
    if len(allowed) < q.h:
        return pool

    emitted: set[frozenset] = set()
    frontier: deque[Iterator[PartialGroup]] = deque(
        [iter([PartialGroup(frozenset([q.target]))])]
    )
    while frontier:
        try:
            state = next(frontier[0])
        except StopIteration:
            frontier.popleft()
            continue
        if len(state.members) < q.h:
            frontier.append(iter_successors(g, state, q, allowed))
            continue
        if state.members in emitted:
            continue
        if is_valid_group(g, state.members, q.k, q.h, q.target, require_friendship):
            emitted.add(state.members)
            pool.groups.append(CandidateGroup(tuple(sorted(state.members))))
            if cap is not None and len(pool.groups) >= cap:
                pool.truncated = bool(frontier)
                break
    return pool


@dataclass
class GroupTopicResult:
    group: CandidateGroup
    topic: str
    group_index: int
    pool: CandidatePool
    weights: object


class CoreIndex:
    """Core numbers and per-k component lookups for one network."""

    def __init__(self, g: GeoSocialNetwork):
        self.graph = g
        self.core = core_decomposition(g)
        self._by_k: dict[int, tuple[GeoSocialNetwork, list[frozenset]]] = {}
        self._lock = threading.Lock()

    def component_of(self, u: UserId, k: int):
        with self._lock:
            if k not in self._by_k:
                sub = k_core_subgraph(self.graph, k, self.core)
                self._by_k[k] = (sub, connected_components(sub))
            sub, comps = self._by_k[k]
        for i, comp in enumerate(comps):
            if u in comp:
                return sub, comp, i
        return sub, None, -1


def candidate_pool_for(
    g: GeoSocialNetwork,
    q: Query,
    cap: int | None = DEFAULT_CAP,
    require_friendship: bool = True,
    cores: CoreIndex | None = None,
) -> CandidatePool:
    """Pool of candidate groups for a query, or raise :class:`EmptyResult`."""
    if q.target not in g:
        raise UnknownUser(q.target)
    if g.degree(q.target) < q.k:
        raise EmptyResult(f"user {q.target} has degree {g.degree(q.target)} < k={q.k}")
    cores = cores or CoreIndex(g)
    if cores.core[q.target] < q.k:
        raise EmptyResult(f"user {q.target} is not in the {q.k}-core")
    sub, comp, cid = cores.component_of(q.target, q.k)
    pool = get_candidate_groups(sub, comp, q, cap, require_friendship)
    if not pool.groups:
        raise EmptyResult(f"no valid group of size {q.h} around user {q.target}")
    pool.groups = [CandidateGroup(grp.members, cid) for grp in pool.groups]
    return pool


def social_group_category_query(
    g: GeoSocialNetwork,
    q: Query,
    model,
    prefs,
    cap: int | None = DEFAULT_CAP,
    require_friendship: bool = True,
    cores: CoreIndex | None = None,
    vocabulary=None,
) -> GroupTopicResult:
    """Pick the group that maximizes the target's attention score, then its topic.

    Raises
    ------
    UnknownUser
        The target is not in the network.
    EmptyResult
        No valid ``h``-group exists around the target.
    """
    from .attention import attention_scores, select_group, select_topic

    pool = candidate_pool_for(g, q, cap, require_friendship, cores)
    weights = attention_scores(pool, q.target, model, prefs)
    j = select_group(weights)
    vocab = model.topics_ if vocabulary is None else vocabulary
    topic = select_topic(q.target, model, weights, vocab, group_index=j)
    return GroupTopicResult(pool.groups[j], topic, j, pool, weights)
