"""End-to-end geo-social group recommender with a scikit-learn style API."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .attention import (
    AttentiveBPR,
    make_training_data,
    topic_preferences,
    visited_topics,
)
from .exceptions import EmptyResult, UnknownUser
from .graph import GeoSocialNetwork, UserId
from .groups import DEFAULT_CAP, CoreIndex, Query, social_group_category_query
from .ingest import current_locations, event_initiators
from .spatial import DEFAULT_FANOUT, AnnResult, SpatialIndex, build_index, project, spa_df
from .validation import check_query_params, derive_seed


@dataclass
class Recommendation:
    target: UserId
    members: tuple[UserId, ...]
    topic: str
    locations: AnnResult = field(default_factory=AnnResult)
    group_score: float = float("nan")
    n_candidates: int = 0

    @property
    def location_ids(self) -> list[str]:
        return self.locations.ids

    def to_text(self) -> str:
        return (
            f"target: {self.target}\n"
            f"members: {' '.join(str(u) for u in self.members)}\n"
            f"topic: {self.topic}\n"
            + self.locations.to_csv()
        )


def dataset_origin(g: GeoSocialNetwork) -> tuple[float, float]:
    """Mean POI (lat, lon); the projection origin for a dataset."""
    if not g.pois:
        return (0.0, 0.0)
    lat = np.mean([p.lat for p in g.pois.values()])
    lon = np.mean([p.lon for p in g.pois.values()])
    return (float(lat), float(lon))


class GeoSocialGroupRecommender(BaseEstimator):
    """Recommend a friend group, an activity topic and top-K venues.

    Parameters
    ----------
    core : int
        Minimum in-group degree ``k``.
    group_size : int
        Group size ``h`` (target included).
    top_k : int
        Number of venues returned.
    cap : int or None
        Maximum number of enumerated candidate groups per query.
    require_friendship : bool
        Require every member to be a friend of the target.
    dim, learning_rate, epochs, l2 : topic ranker hyperparameters
    neg_ratio : int
        Negative topics sampled per positive topic.
    n_alt_groups : int
        Unobserved friend groups sampled per observed group into each
        training pool.
    train_targets : {"initiator", "all"}
        Which members of a training event act as the target user: the
        one whose check-in opened the event, or every member.
    fanout : int
        R-tree node capacity.
    random_state : int
        Root seed; sampling and initialization seeds derive from it.
    """

    def __init__(
        self,
        core=3,
        group_size=5,
        top_k=10,
        cap=DEFAULT_CAP,
        require_friendship=True,
        dim=32,
        learning_rate=1e-2,
        epochs=200,
        l2=1e-3,
        neg_ratio=4,
        n_alt_groups=4,
        train_targets="initiator",
        fanout=DEFAULT_FANOUT,
        random_state=0,
    ):
        self.core = core
        self.group_size = group_size
        self.top_k = top_k
        self.cap = cap
        self.require_friendship = require_friendship
        self.dim = dim
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.l2 = l2
        self.neg_ratio = neg_ratio
        self.n_alt_groups = n_alt_groups
        self.train_targets = train_targets
        self.fanout = fanout
        self.random_state = random_state

    def make_model(self) -> AttentiveBPR:
        return AttentiveBPR(
            dim=self.dim,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            l2=self.l2,
            random_state=derive_seed(self.random_state, "attention.init"),
        )

    def training_data(self, network, events, checkins=None):
        prefs = topic_preferences(network, checkins)
        visited = visited_topics(network, checkins)
        events = list(events)
        if self.train_targets == "initiator":
            targets = event_initiators(events, network.checkins if checkins is None else checkins)
        elif self.train_targets == "all":
            targets = None
        else:
            raise ValueError(f"train_targets must be 'initiator' or 'all', got {self.train_targets!r}")
        return make_training_data(
            events,
            prefs,
            visited,
            network.users,
            network.topics,
            self.neg_ratio,
            seed=derive_seed(self.random_state, "attention.pairs"),
            graph=network,
            n_alt_groups=self.n_alt_groups,
            event_targets=targets,
        )

    def fit(self, network: GeoSocialNetwork, events=(), checkins=None, model: AttentiveBPR | None = None):
        """Prepare preferences, locations and core numbers; train unless ``model`` is given.

        ``checkins`` restricts the history used for preferences and current
        locations (e.g. to a training period); defaults to all check-ins.
        """
        check_query_params(self.core, self.group_size, self.top_k)
        self.network_ = network
        self.prefs_ = topic_preferences(network, checkins)
        self.origin_ = dataset_origin(network)
        self.locations_ = {
            u: tuple(project(lat, lon, self.origin_))
            for u, (lat, lon) in current_locations(network, checkins).items()
        }
        self.cores_ = CoreIndex(network)
        if model is None:
            model = self.make_model().fit(self.training_data(network, events, checkins))
        self.model_ = model
        self.vocabulary_ = tuple(sorted(set(model.topics_) & set(network.topics)))
        self.indexes_: dict[str, SpatialIndex] = {}
        self._index_lock = threading.Lock()
        return self

    def index_for(self, topic: str) -> SpatialIndex:
        check_is_fitted(self, "network_")
        with self._index_lock:
            if topic not in self.indexes_:
                pois = [p for p in self.network_.pois.values() if p.topic == topic]
                self.indexes_[topic] = build_index(pois, self.origin_, self.fanout)
            return self.indexes_[topic]

    def recommend(self, target: UserId, core=None, group_size=None, top_k=None) -> Recommendation:
        """Recommendation for one target.

        Raises
        ------
        UnknownUser
            ``target`` is not in the network.
        EmptyResult
            No valid group exists for the target.
        """
        check_is_fitted(self, "model_")
        k = self.core if core is None else core
        h = self.group_size if group_size is None else group_size
        K = self.top_k if top_k is None else top_k
        check_query_params(k, h, K)
        if target not in self.network_:
            raise UnknownUser(target)
        q = Query(target, h, k, K)
        res = social_group_category_query(
            self.network_,
            q,
            self.model_,
            self.prefs_,
            cap=self.cap,
            require_friendship=self.require_friendship,
            cores=self.cores_,
            vocabulary=self.vocabulary_,
        )
        locs = [self.locations_[u] for u in res.group.members if u in self.locations_]
        ann = spa_df(self.index_for(res.topic), locs, K) if locs else AnnResult()
        return Recommendation(
            target,
            res.group.members,
            res.topic,
            ann,
            float(res.weights.group_score[res.group_index]),
            len(res.pool),
        )

    def predict(self, targets) -> list[Recommendation | None]:
        """One recommendation per target; ``None`` where no group exists."""
        out = []
        for u in targets:
            try:
                out.append(self.recommend(u))
            except EmptyResult:
                out.append(None)
        return out
