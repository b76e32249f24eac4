"""Geo-social network data model, core decomposition and connectivity.

The social layer is stored as compressed adjacency: one sorted tuple of
neighbor ids per user.  A frozenset per user backs O(1) edge lookups.
Once built, a :class:`GeoSocialNetwork` is never mutated, so it can be
shared freely between threads.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

UserId = int
PoiId = str
TopicId = str


@dataclass(frozen=True)
class Poi:
    id: PoiId
    lat: float
    lon: float
    topic: TopicId

    def __post_init__(self):
        object.__setattr__(self, "lat", float(self.lat))
        object.__setattr__(self, "lon", float(self.lon))
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")


@dataclass(frozen=True)
class CheckIn:
    user: UserId
    poi: PoiId
    time: int

    def __post_init__(self):
        object.__setattr__(self, "user", int(self.user))
        object.__setattr__(self, "time", int(self.time))
        if self.time < 0:
            raise ValueError(f"negative check-in time: {self.time}")


class GeoSocialNetwork:
    """Users, POIs, undirected friendships and check-in records.

    Parameters
    ----------
    adjacency : mapping of user id to iterable of neighbor ids
        Must already be symmetric and free of self-loops; use
        :func:`build_social_graph` or :meth:`from_edges` to normalize raw
        edge lists.
    pois : mapping of POI id to :class:`Poi`, optional
    checkins : sequence of :class:`CheckIn`, optional
    poi_links : iterable of (PoiId, PoiId), optional
        POI association edges.  Stored for completeness; no algorithm in
        this package consumes them.
    """

    def __init__(
        self,
        adjacency: Mapping[UserId, Iterable[UserId]],
        pois: Mapping[PoiId, Poi] | None = None,
        checkins: Sequence[CheckIn] | None = None,
        poi_links: Iterable[tuple[PoiId, PoiId]] = (),
    ):
        adj = {int(u): tuple(sorted(set(int(v) for v in nbrs))) for u, nbrs in adjacency.items()}
        for u, nbrs in adj.items():
            for v in nbrs:
                if v == u:
                    raise ValueError(f"self-loop on user {u}")
                if v not in adj or u not in adj[v]:
                    raise ValueError(f"asymmetric or dangling edge ({u}, {v})")
        self._adj = adj
        self._nbr_sets = {u: frozenset(n) for u, n in adj.items()}
        self.pois: dict[PoiId, Poi] = dict(pois or {})
        self.checkins: tuple[CheckIn, ...] = tuple(checkins or ())
        for c in self.checkins:
            if c.user not in adj:
                raise ValueError(f"check-in by unregistered user {c.user}")
            if c.poi not in self.pois:
                raise ValueError(f"check-in at unregistered POI {c.poi!r}")
        self.poi_links: tuple[tuple[PoiId, PoiId], ...] = tuple(poi_links)
        self.users: tuple[UserId, ...] = tuple(sorted(adj))

    @classmethod
    def from_edges(
        cls,
        edges: Iterable[tuple[UserId, UserId]],
        users: Iterable[UserId] = (),
        pois: Mapping[PoiId, Poi] | None = None,
        checkins: Sequence[CheckIn] | None = None,
        poi_links: Iterable[tuple[PoiId, PoiId]] = (),
    ) -> "GeoSocialNetwork":
        """Normalize raw edges and register every user seen anywhere."""
        adj: dict[UserId, set[UserId]] = {int(u): set() for u in users}
        for c in checkins or ():
            adj.setdefault(c.user, set())
        for u, v in edges:
            u, v = int(u), int(v)
            adj.setdefault(u, set())
            adj.setdefault(v, set())
            if u != v:
                adj[u].add(v)
                adj[v].add(u)
        return cls(adj, pois=pois, checkins=checkins, poi_links=poi_links)

    # social layer

    def __contains__(self, u) -> bool:
        return u in self._adj

    def __len__(self) -> int:
        return len(self._adj)

    def neighbors(self, u: UserId) -> tuple[UserId, ...]:
        return self._adj[u]

    def neighbor_set(self, u: UserId) -> frozenset:
        return self._nbr_sets[u]

    def degree(self, u: UserId) -> int:
        return len(self._adj[u])

    def has_edge(self, u: UserId, v: UserId) -> bool:
        return v in self._nbr_sets.get(u, ())

    @property
    def adjacency(self) -> dict[UserId, tuple[UserId, ...]]:
        return dict(self._adj)

    @property
    def n_edges(self) -> int:
        return sum(len(n) for n in self._adj.values()) // 2

    def edges(self) -> list[tuple[UserId, UserId]]:
        return [(u, v) for u in self.users for v in self._adj[u] if u < v]

    def induced_degree(self, u: UserId, members) -> int:
        return sum(1 for v in self._adj[u] if v in members)

    def subgraph(self, nodes: Iterable[UserId]) -> "GeoSocialNetwork":
        """Induced social subgraph; POIs and check-ins are not carried over."""
        keep = set(nodes)
        return GeoSocialNetwork({u: [v for v in self._adj[u] if v in keep] for u in keep})

    # geo layer

    @property
    def topics(self) -> tuple[TopicId, ...]:
        return tuple(sorted({p.topic for p in self.pois.values()}))

    def __repr__(self):
        return (
            f"GeoSocialNetwork(users={len(self._adj)}, edges={self.n_edges}, "
            f"pois={len(self.pois)}, checkins={len(self.checkins)})"
        )


def build_social_graph(edges: Iterable[tuple[UserId, UserId]]) -> GeoSocialNetwork:
    """Symmetric social graph from a raw edge list.

    Duplicate edges and self-loops are dropped; a user that only appears
    in a self-loop is still registered (with no neighbors).
    """
    return GeoSocialNetwork.from_edges(edges)


def core_decomposition(g: GeoSocialNetwork) -> dict[UserId, int]:
    """Core number of every user by bucket peeling, O(|U| + |E|).

    Users are kept in an array ordered by current degree, with ``bin``
    holding the start offset of each degree block.  Processing a vertex
    moves each higher-degree neighbor one block down by swapping it with
    the first vertex of its block.
    """
    users = g.users
    n = len(users)
    if n == 0:
        return {}
    index = {u: i for i, u in enumerate(users)}
    nbrs = [[index[v] for v in g.neighbors(u)] for u in users]
    deg = [len(a) for a in nbrs]
    max_deg = max(deg)

    bin_start = [0] * (max_deg + 1)
    for d in deg:
        bin_start[d] += 1
    start = 0
    for d in range(max_deg + 1):
        count = bin_start[d]
        bin_start[d] = start
        start += count

    pos = [0] * n
    vert = [0] * n
    fill = list(bin_start)
    for v in range(n):
        pos[v] = fill[deg[v]]
        vert[pos[v]] = v
        fill[deg[v]] += 1

    for i in range(n):
        v = vert[i]
        for u in nbrs[v]:
            if deg[u] > deg[v]:
                du = deg[u]
                pu = pos[u]
                pw = bin_start[du]
                w = vert[pw]
                if u != w:
                    pos[u], pos[w] = pw, pu
                    vert[pu], vert[pw] = w, u
                bin_start[du] += 1
                deg[u] -= 1
    return {users[i]: deg[i] for i in range(n)}


def k_core_subgraph(
    g: GeoSocialNetwork, k: int, core: Mapping[UserId, int] | None = None
) -> GeoSocialNetwork:
    """Subgraph induced on users with core number >= k (possibly empty)."""
    if k < 0:
        raise ValueError("k must be non-negative")
    if core is None:
        core = core_decomposition(g)
    return g.subgraph(u for u, c in core.items() if c >= k)


def connected_components(g: GeoSocialNetwork) -> list[frozenset]:
    """Components as frozensets, ordered by their smallest user id."""
    seen: set[UserId] = set()
    out = []
    for s in g.users:
        if s in seen:
            continue
        comp = {s}
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in g.neighbors(u):
                if v not in comp:
                    comp.add(v)
                    queue.append(v)
        seen |= comp
        out.append(frozenset(comp))
    return out


def is_connected(g: GeoSocialNetwork, members) -> bool:
    members = set(members)
    if not members:
        return False
    start = next(iter(members))
    reached = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for v in g.neighbors(u):
            if v in members and v not in reached:
                reached.add(v)
                stack.append(v)
    return len(reached) == len(members)


def is_valid_group(
    g: GeoSocialNetwork,
    members,
    k: int,
    h: int,
    target: UserId,
    require_friendship: bool = True,
) -> bool:
    """Whether ``members`` is an admissible recommended group for ``target``.

    Checks size ``h``, membership of the target, connectivity, minimum
    induced degree ``k`` and (unless ``require_friendship`` is False)
    that every other member is a direct friend of the target.
    """
    members = frozenset(members)
    if len(members) != h or target not in members:
        return False
    if any(u not in g for u in members):
        return False
    if require_friendship:
        friends = g.neighbor_set(target)
        if any(u != target and u not in friends for u in members):
            return False
    if any(g.induced_degree(u, members) < k for u in members):
        return False
    return is_connected(g, members)
