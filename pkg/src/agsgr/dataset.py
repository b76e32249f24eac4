"""Binary persistence of an ingested dataset.

The archive is an ``.npz`` readable with ``numpy.load`` (no pickled
objects).  Members are written with a fixed timestamp and in a fixed
order, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import io
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import CheckIn, GeoSocialNetwork, Poi
from .ingest import DatasetSplit, GroupEvent

_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)
FORMAT_VERSION = 1


@dataclass
class IngestedDataset:
    network: GeoSocialNetwork
    split: DatasetSplit

    @property
    def events(self) -> list[GroupEvent]:
        return self.split.train_events + self.split.test_events

    def train_checkins(self) -> list[CheckIn]:
        """Check-ins before the first test event (all of them without a test set)."""
        cut = self.split.cutoff
        cks = self.network.checkins
        return list(cks) if cut is None else [c for c in cks if c.time < cut]


def _write_npz(path, arrays: dict[str, np.ndarray]) -> None:
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        for name, arr in arrays.items():
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(arr), allow_pickle=False)
            info = zipfile.ZipInfo(name + ".npy", date_time=_ZIP_EPOCH)
            info.compress_type = zipfile.ZIP_DEFLATED
            info.external_attr = 0o644 << 16
            zf.writestr(info, buf.getvalue())


def save_dataset(path, network: GeoSocialNetwork, split: DatasetSplit) -> None:
    poi_ids = sorted(network.pois)
    pidx = {p: i for i, p in enumerate(poi_ids)}
    events = split.train_events + split.test_events
    members = [u for e in events for u in e.members]
    offsets = np.cumsum([0] + [len(e.members) for e in events])
    edges = np.asarray(network.edges(), dtype="<i8").reshape(-1, 2)
    _write_npz(
        path,
        {
            "version": np.asarray([FORMAT_VERSION], dtype="<i8"),
            "users": np.asarray(network.users, dtype="<i8"),
            "edges": edges,
            "poi_id": np.asarray(poi_ids, dtype=str),
            "poi_lat": np.asarray([network.pois[p].lat for p in poi_ids], dtype="<f8"),
            "poi_lon": np.asarray([network.pois[p].lon for p in poi_ids], dtype="<f8"),
            "poi_topic": np.asarray([network.pois[p].topic for p in poi_ids], dtype=str),
            "checkin_user": np.asarray([c.user for c in network.checkins], dtype="<i8"),
            "checkin_poi": np.asarray([pidx[c.poi] for c in network.checkins], dtype="<i8"),
            "checkin_time": np.asarray([c.time for c in network.checkins], dtype="<i8"),
            "event_time": np.asarray([e.time for e in events], dtype="<i8"),
            "event_poi": np.asarray([pidx[e.poi] for e in events], dtype="<i8"),
            "event_offsets": np.asarray(offsets, dtype="<i8"),
            "event_members": np.asarray(members, dtype="<i8"),
            "n_train": np.asarray([len(split.train_events)], dtype="<i8"),
            "policy": np.asarray([split.policy], dtype=str),
        },
    )


def load_dataset(path) -> IngestedDataset:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no ingested dataset at {path}")
    with np.load(path, allow_pickle=False) as z:
        a = {k: z[k] for k in z.files}
    if int(a["version"][0]) != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported dataset version {int(a['version'][0])}")
    poi_ids = [str(p) for p in a["poi_id"]]
    pois = {
        p: Poi(p, float(lat), float(lon), str(t))
        for p, lat, lon, t in zip(poi_ids, a["poi_lat"], a["poi_lon"], a["poi_topic"])
    }
    checkins = [
        CheckIn(int(u), poi_ids[int(p)], int(t))
        for u, p, t in zip(a["checkin_user"], a["checkin_poi"], a["checkin_time"])
    ]
    network = GeoSocialNetwork.from_edges(
        a["edges"].tolist(), users=a["users"].tolist(), pois=pois, checkins=checkins
    )
    off = a["event_offsets"]
    mem = a["event_members"]
    events = [
        GroupEvent(int(t), poi_ids[int(p)], tuple(mem[off[i] : off[i + 1]].tolist()))
        for i, (t, p) in enumerate(zip(a["event_time"], a["event_poi"]))
    ]
    n_train = int(a["n_train"][0])
    return IngestedDataset(network, DatasetSplit(events[:n_train], events[n_train:], str(a["policy"][0])))
