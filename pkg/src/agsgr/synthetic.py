"""Synthetic geo-social datasets with a planted group, topic and venue."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import CheckIn, GeoSocialNetwork, Poi
from .ingest import GroupEvent, extract_implicit_groups

_M_PER_DEG = 6_371_000.0 * math.pi / 180.0


@dataclass
class PlantedDataset:
    network: GeoSocialNetwork
    events: list[GroupEvent]
    target: int
    group: tuple[int, ...]
    topic: str
    poi: str


def _offset(lat0, lon0, dx, dy):
    return lat0 + dy / _M_PER_DEG, lon0 + dx / (_M_PER_DEG * math.cos(math.radians(lat0)))


def make_planted_dataset(
    seed: int = 0,
    n_users: int = 200,
    n_topics: int = 8,
    n_pois: int = 400,
    group_size: int = 5,
    n_decoys: int = 6,
    edge_prob: float = 0.02,
    n_background_events: int = 150,
    n_planted_events: int = 8,
    extent_m: float = 10_000.0,
    center: tuple[float, float] = (40.0, -74.0),
) -> PlantedDataset:
    """Random geo-social network around a planted clique.

    The target and ``group_size - 1`` friends form a clique whose members
    mostly visit one topic, repeatedly check in together, and currently
    sit within 300 m of one venue of that topic.  No other venue of the
    topic lies within 1.5 km of it.  ``n_decoys`` further friends of the
    target form their own clique around other topics so the target has
    competing valid groups.
    """
    rng = np.random.default_rng(seed)
    topics = [f"cat{i}" for i in range(n_topics)]
    users = rng.permutation(np.arange(1, n_users + 1)).tolist()
    target = users[0]
    planted = sorted(users[1:group_size])
    decoys = users[group_size : group_size + n_decoys]
    topic = topics[int(rng.integers(n_topics))]
    others = [t for t in topics if t != topic]

    lat0, lon0 = center
    half = extent_m / 2
    poi_topic = rng.choice(topics, size=n_pois)
    poi_xy = rng.uniform(-half, half, size=(n_pois, 2))
    hub = rng.uniform(-half / 2, half / 2, size=2)
    far = np.hypot(*(poi_xy - hub).T) >= 1500.0
    poi_topic = np.where((poi_topic == topic) & ~far, rng.choice(others, size=n_pois), poi_topic)
    pois: dict[str, Poi] = {}
    by_topic: dict[str, list[str]] = {t: [] for t in topics}
    for i in range(n_pois):
        pid = f"p{i:05d}"
        lat, lon = _offset(lat0, lon0, *poi_xy[i])
        pois[pid] = Poi(pid, lat, lon, str(poi_topic[i]))
        by_topic[str(poi_topic[i])].append(pid)
    hub_id = "hub"
    pois[hub_id] = Poi(hub_id, *_offset(lat0, lon0, *hub), topic)
    by_topic[topic].append(hub_id)
    nearby = []
    for i, u in enumerate(planted):
        ang = rng.uniform(0, 2 * math.pi)
        r = rng.uniform(100, 300)
        pid = f"near{i}"
        pois[pid] = Poi(pid, *_offset(lat0, lon0, hub[0] + r * math.cos(ang), hub[1] + r * math.sin(ang)), str(rng.choice(others)))
        nearby.append(pid)

    edges = set()
    iu = np.triu_indices(n_users, 1)
    mask = rng.random(len(iu[0])) < edge_prob
    for a, b in zip(iu[0][mask], iu[1][mask]):
        edges.add((users[a], users[b]))
    clique = [target] + planted
    for grp in (clique, [target] + decoys):
        for i, a in enumerate(grp):
            for b in grp[i + 1 :]:
                edges.add((a, b))

    dominant = {u: str(rng.choice(topics)) for u in users}
    for u in planted:
        dominant[u] = topic
    for u in decoys:
        dominant[u] = str(rng.choice(others))
    dominant[target] = topic

    t0 = 1_600_000_000
    span = 60 * 86400
    checkins: list[CheckIn] = []

    def visit(u, t, pid):
        checkins.append(CheckIn(u, pid, int(t)))

    for u in users:
        n = 30
        for _ in range(n):
            if u == target or rng.random() < 0.85:
                tp = dominant[u]
            else:
                tp = str(rng.choice(topics))
            visit(u, t0 + rng.integers(span), rng.choice(by_topic[tp]))

    for _ in range(n_planted_events):
        pid = hub_id if rng.random() < 0.5 else str(rng.choice(by_topic[topic]))
        t = t0 + rng.integers(span)
        visit(target, t, pid)
        for u in planted:
            visit(u, t + 1 + rng.integers(600), pid)

    edge_list = sorted(e for e in edges if target not in e)
    for _ in range(n_background_events):
        a, b = edge_list[int(rng.integers(len(edge_list)))]
        pid = str(rng.choice(by_topic[dominant[a]]))
        t = t0 + rng.integers(span)
        visit(a, t, pid)
        visit(b, t + 1 + rng.integers(600), pid)

    # current locations: the target at the venue, the rest of the group around it
    t_end = t0 + span + 3600
    visit(target, t_end, hub_id)
    for u, pid in zip(planted, nearby):
        visit(u, t_end, pid)

    g = GeoSocialNetwork.from_edges(sorted(edges), users=users, pois=pois, checkins=checkins)
    events = extract_implicit_groups(checkins, g)
    return PlantedDataset(g, events, target, tuple(sorted(clique)), topic, hub_id)
