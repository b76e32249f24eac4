"""Dataset parsing, implicit group extraction and train/test splitting.

Input formats
-------------
check-ins   ``user_id,poi_id,timestamp,lat,lon,category`` (epoch seconds)
edges       ``u,v`` integer ids
groups      ``event_id,user_id,poi_id,timestamp`` explicit (EBSN-style) groups
group events (output) ``poi_id,time,member_1|member_2|...``

A header line is detected by a non-numeric user id column.  Malformed rows
are skipped and counted; more than half malformed raises
:class:`FormatError`.
"""

from __future__ import annotations

import csv
import logging
import math
from bisect import bisect_left, bisect_right
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

from .exceptions import FormatError
from .graph import CheckIn, GeoSocialNetwork, Poi, PoiId, UserId

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 1800
MAX_MALFORMED_FRACTION = 0.5


@dataclass(frozen=True, order=True)
class GroupEvent:
    time: int
    poi: PoiId
    members: tuple[UserId, ...]

    def __post_init__(self):
        if len(self.members) < 2:
            raise ValueError("a group event needs at least two members")
        if len(set(self.members)) != len(self.members):
            raise ValueError("group members must be distinct")
        object.__setattr__(self, "members", tuple(sorted(self.members)))

    @property
    def sort_key(self):
        return (self.time, self.poi, self.members[0], self.members)


class ParsedCheckins(NamedTuple):
    checkins: list[CheckIn]
    pois: dict[PoiId, Poi]
    n_malformed: int


class ParsedEdges(NamedTuple):
    edges: list[tuple[UserId, UserId]]
    n_malformed: int


def _is_int_token(tok: str) -> bool:
    try:
        int(tok.strip())
        return True
    except ValueError:
        return False


def _rows(path, id_col: int = 0):
    """Non-blank CSV rows of ``path``, header dropped if present."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if rows and (len(rows[0]) <= id_col or not _is_int_token(rows[0][id_col])):
        rows = rows[1:]
    return rows


def _check_malformed(path, n_bad: int, n_total: int) -> None:
    if n_bad:
        logger.warning("%s: skipped %d of %d malformed rows", path, n_bad, n_total)
    if n_total and n_bad / n_total > MAX_MALFORMED_FRACTION:
        raise FormatError(f"{path}: {n_bad} of {n_total} rows malformed")


def _parse_time(tok: str) -> int:
    t = float(tok)
    if not math.isfinite(t) or t < 0:
        raise ValueError(tok)
    return int(t)


def parse_checkins(path) -> ParsedCheckins:
    """Read a check-in CSV; the first row seen for a POI defines it."""
    rows = _rows(path)
    checkins: list[CheckIn] = []
    pois: dict[PoiId, Poi] = {}
    bad = 0
    for row in rows:
        try:
            user, poi, ts, lat, lon, cat = (c.strip() for c in row[:6])
            if not poi or not cat:
                raise ValueError(row)
            c = CheckIn(int(user), poi, _parse_time(ts))
            p = Poi(poi, float(lat), float(lon), cat)
        except ValueError:
            bad += 1
            continue
        pois.setdefault(poi, p)
        checkins.append(c)
    _check_malformed(path, bad, len(rows))
    return ParsedCheckins(checkins, pois, bad)


def parse_edges(path) -> ParsedEdges:
    rows = _rows(path)
    edges = []
    bad = 0
    for row in rows:
        try:
            if len(row) < 2:
                raise ValueError(row)
            edges.append((int(row[0]), int(row[1])))
        except ValueError:
            bad += 1
    _check_malformed(path, bad, len(rows))
    return ParsedEdges(edges, bad)


def parse_groups(path) -> list[GroupEvent]:
    """Explicit groups: rows sharing an ``event_id`` form one event.

    The event's POI is taken from its first row and its time is the
    earliest timestamp; events with fewer than two distinct users are
    dropped.
    """
    rows = _rows(path, id_col=1)
    by_event: dict[str, list] = {}
    bad = 0
    for row in rows:
        try:
            ev, user, poi, ts = (c.strip() for c in row[:4])
            by_event.setdefault(ev, []).append((int(user), poi, _parse_time(ts)))
        except ValueError:
            bad += 1
    _check_malformed(path, bad, len(rows))
    events = []
    for recs in by_event.values():
        members = sorted({u for u, _, _ in recs})
        if len(members) >= 2:
            events.append(GroupEvent(min(t for _, _, t in recs), recs[0][1], tuple(members)))
    return sorted(events, key=lambda e: e.sort_key)


def load_network(checkins_path, edges_path) -> GeoSocialNetwork:
    parsed = parse_checkins(checkins_path)
    edges = parse_edges(edges_path)
    return GeoSocialNetwork.from_edges(
        edges.edges, pois=parsed.pois, checkins=parsed.checkins
    )


# --- implicit groups -------------------------------------------------------------


def extract_implicit_groups(
    checkins: Iterable[CheckIn],
    g: GeoSocialNetwork,
    window: int = DEFAULT_WINDOW,
) -> list[GroupEvent]:
    """Co-check-in groups: an anchor and those friends who checked in at the
    same POI less than ``window`` seconds from the anchor.

    Every check-in acts as an anchor.  Groups are deduplicated by
    (member set, POI), keeping the earliest time; the event time is the
    earliest qualifying check-in.  Output is sorted, so it does not depend
    on the input row order.
    """
    by_poi: dict[PoiId, dict[UserId, list[int]]] = defaultdict(lambda: defaultdict(list))
    for c in checkins:
        by_poi[c.poi][c.user].append(c.time)
    for users in by_poi.values():
        for times in users.values():
            times.sort()

    found: dict[tuple[tuple, PoiId], int] = {}
    for poi, users in by_poi.items():
        for anchor, times in users.items():
            friends = [v for v in g.neighbors(anchor) if v in users] if anchor in g else []
            if not friends:
                continue
            for t in times:
                members = [anchor]
                earliest = t
                for f in friends:
                    ft = users[f]
                    # strictly inside (t - window, t + window)
                    lo = bisect_right(ft, t - window)
                    hi = bisect_left(ft, t + window)
                    if lo < hi:
                        members.append(f)
                        earliest = min(earliest, ft[lo])
                if len(members) < 2:
                    continue
                key = (tuple(sorted(members)), poi)
                if key not in found or earliest < found[key]:
                    found[key] = earliest
    events = [GroupEvent(t, poi, m) for (m, poi), t in found.items()]
    return sorted(events, key=lambda e: e.sort_key)


def check_group_event(event: GroupEvent, checkins: Iterable[CheckIn], g: GeoSocialNetwork, window: int) -> bool:
    """Independent predicate: some member anchors all others (friends, in window)."""
    times = defaultdict(list)
    for c in checkins:
        if c.poi == event.poi and c.user in event.members:
            times[c.user].append(c.time)
    for a in event.members:
        for t in times[a]:
            if all(
                f == a or (g.has_edge(a, f) and any(abs(t - s) < window for s in times[f]))
                for f in event.members
            ):
                return True
    return False


def event_initiators(events: Sequence[GroupEvent], checkins: Iterable[CheckIn]) -> list[tuple[UserId, ...]]:
    """Member(s) whose check-in at the event's POI opens the event.

    The initiator checked in at the event time (the earliest member
    check-in); the smallest such id wins.  Events without a matching
    check-in fall back to all members.
    """
    at = defaultdict(set)
    for c in checkins:
        at[(c.poi, c.time)].add(c.user)
    out = []
    for e in events:
        hit = sorted(at.get((e.poi, e.time), set()) & set(e.members))
        out.append((hit[0],) if hit else e.members)
    return out


# --- splits and stats ----------------------------------------------------------------


@dataclass
class DatasetSplit:
    train_events: list[GroupEvent]
    test_events: list[GroupEvent]
    policy: str = "by-time-80/20"

    @property
    def cutoff(self) -> int | None:
        """Time of the first test event (``None`` without test events)."""
        return self.test_events[0].time if self.test_events else None


def split(events: Sequence[GroupEvent], train_fraction: float = 0.8) -> DatasetSplit:
    """Chronological split; the test share is ``floor((1 - f) * n)``."""
    if not 0.0 < train_fraction <= 1.0:
        raise ValueError("train_fraction must lie in (0, 1]")
    ordered = sorted(events, key=lambda e: e.sort_key)
    n_test = int(math.floor(round((1.0 - train_fraction) * len(ordered), 9)))
    n_train = len(ordered) - n_test
    pct = round(100 * train_fraction)
    return DatasetSplit(ordered[:n_train], ordered[n_train:], f"by-time-{pct}/{100 - pct}")


@dataclass
class DatasetStats:
    n_users: int = 0
    n_group_events: int = 0
    n_items: int = 0
    avg_group_size: float = 0.0
    avg_friends: float = 0.0
    avg_records_per_user: float = 0.0
    extra: dict = field(default_factory=dict)

    def report(self) -> str:
        rows = [
            ("# Users", f"{self.n_users}"),
            ("# Group Events", f"{self.n_group_events}"),
            ("# Items", f"{self.n_items}"),
            ("Avg. Group Size", f"{self.avg_group_size:.3f}"),
            ("Avg. #Friends for a User", f"{self.avg_friends:.3f}"),
            ("Avg. #Records for a User", f"{self.avg_records_per_user:.3f}"),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows) + "\n"


def dataset_stats(g: GeoSocialNetwork, events: Sequence[GroupEvent]) -> DatasetStats:
    n_users = len(g)
    if n_users == 0 and not events:
        return DatasetStats()
    return DatasetStats(
        n_users=n_users,
        n_group_events=len(events),
        n_items=len({e.poi for e in events}),
        avg_group_size=(sum(len(e.members) for e in events) / len(events)) if events else 0.0,
        avg_friends=(2 * g.n_edges / n_users) if n_users else 0.0,
        avg_records_per_user=(len(g.checkins) / n_users) if n_users else 0.0,
    )


def current_locations(g: GeoSocialNetwork, checkins: Iterable[CheckIn] | None = None) -> dict[UserId, tuple[float, float]]:
    """(lat, lon) of each user's latest check-in; later rows win time ties."""
    latest: dict[UserId, tuple[int, int, PoiId]] = {}
    for i, c in enumerate(g.checkins if checkins is None else checkins):
        key = (c.time, i, c.poi)
        if c.user not in latest or key > latest[c.user]:
            latest[c.user] = key
    return {u: (g.pois[p].lat, g.pois[p].lon) for u, (_, _, p) in latest.items()}


# --- group-event CSV -------------------------------------------------------------------


def write_group_events(events: Iterable[GroupEvent], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("poi_id,time,members\n")
        for e in events:
            fh.write(f"{e.poi},{e.time},{'|'.join(str(u) for u in e.members)}\n")


def read_group_events(path) -> list[GroupEvent]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0] == "poi_id":
                continue
            out.append(GroupEvent(int(row[1]), row[0], tuple(int(u) for u in row[2].split("|"))))
    return out


def write_checkins(g: GeoSocialNetwork, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "poi_id", "timestamp", "lat", "lon", "category"])
        for c in g.checkins:
            p = g.pois[c.poi]
            w.writerow([c.user, c.poi, c.time, repr(p.lat), repr(p.lon), p.topic])


def write_edges(g: GeoSocialNetwork, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for u, v in g.edges():
            fh.write(f"{u},{v}\n")


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
