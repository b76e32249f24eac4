"""Attentive group selection and attention-weighted BPR topic ranking.

Influence of the target on a member is a gated cosine over topic
preference rows.  Raw attention is an affine map of influence; one
softmax runs over every (group, member) pair of the candidate pool, so
group scores are comparable across groups and sum to one.  The topic
ranker scores ``group_score * <u_target, v_topic>`` and is trained with a
pairwise logistic loss plus an L2 penalty, optimized by Adam.
"""

from __future__ import annotations

import logging
import math
import struct
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import NoTopic, NoTrainingData, UnknownTopic, UnknownUser
from .graph import CheckIn, GeoSocialNetwork, Poi, TopicId, UserId

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"AGSGR1"
_TIE_RTOL = 1e-12


# --- topic preferences and influence ------------------------------------


def topic_preference(checkins: Iterable[CheckIn], pois: Mapping[str, Poi]) -> dict[TopicId, float]:
    """Share of a user's check-ins falling in each topic; empty history -> {}."""
    counts = Counter(pois[c.poi].topic for c in checkins)
    total = sum(counts.values())
    if total == 0:
        return {}
    return {t: n / total for t, n in sorted(counts.items())}


def topic_preferences(
    g: GeoSocialNetwork, checkins: Iterable[CheckIn] | None = None
) -> dict[UserId, dict[TopicId, float]]:
    by_user: dict[UserId, list[CheckIn]] = {u: [] for u in g.users}
    for c in g.checkins if checkins is None else checkins:
        by_user.setdefault(c.user, []).append(c)
    return {u: topic_preference(cs, g.pois) for u, cs in by_user.items()}


def visited_topics(
    g: GeoSocialNetwork, checkins: Iterable[CheckIn] | None = None
) -> dict[UserId, frozenset]:
    seen: dict[UserId, set] = {u: set() for u in g.users}
    for c in g.checkins if checkins is None else checkins:
        seen.setdefault(c.user, set()).add(g.pois[c.poi].topic)
    return {u: frozenset(s) for u, s in seen.items()}


def influence(target_pref: Mapping[TopicId, float], member_pref: Mapping[TopicId, float]) -> float:
    """Topic-aware influence of the target on a member, in [0, 1].

    Only shared topics where the target's preference is at least the
    member's contribute to the numerator; the denominator uses both full
    preference norms.
    """
    if not target_pref or not member_pref:
        return 0.0
    num = 0.0
    for t in sorted(target_pref.keys() & member_pref.keys()):
        a, b = target_pref[t], member_pref[t]
        if a >= b:
            num += a * b
    if num == 0.0:
        return 0.0
    den = math.sqrt(sum(v * v for v in target_pref.values())) * math.sqrt(
        sum(v * v for v in member_pref.values())
    )
    return min(1.0, num / den)


# --- attention over a candidate pool -------------------------------------


@dataclass
class AttentionWeights:
    """Per-pair attention for a pool, flattened.

    Pair ``p`` belongs to group ``pair_group[p]`` and non-target member
    ``pair_member[p]``.
    """

    pair_group: np.ndarray
    pair_member: np.ndarray
    sigma: np.ndarray
    raw: np.ndarray
    normalized: np.ndarray
    group_score: np.ndarray

    def as_dict(self, which: str = "normalized") -> dict[tuple[int, UserId], float]:
        vals = getattr(self, which)
        return {
            (int(j), int(u)): float(v)
            for j, u, v in zip(self.pair_group, self.pair_member, vals)
        }


def _softmax(a: np.ndarray) -> np.ndarray:
    e = np.exp(a - a.max())
    return e / e.sum()


def attention_from_sigma(pair_group, pair_member, sigma, w: float, c: float, n_groups: int) -> AttentionWeights:
    pair_group = np.asarray(pair_group, dtype=np.int64)
    sigma = np.asarray(sigma, dtype=float)
    raw = w * sigma + c
    alpha = _softmax(raw)
    gs = np.bincount(pair_group, weights=alpha, minlength=n_groups)
    return AttentionWeights(
        pair_group, np.asarray(pair_member, dtype=np.int64), sigma, raw, alpha, gs
    )


def attention_scores(pool, target: UserId, model, prefs: Mapping[UserId, Mapping]) -> AttentionWeights:
    """Raw score ``w * influence + c`` for every non-target member of every
    pool group, normalized by a single softmax over the whole pool."""
    groups = list(pool)
    if not groups:
        raise ValueError("attention over an empty pool")
    tpref = prefs.get(target, {})
    cache: dict[UserId, float] = {}
    pg, pm, ps = [], [], []
    for j, grp in enumerate(groups):
        for u in grp.members:
            if u == target:
                continue
            if u not in cache:
                cache[u] = influence(tpref, prefs.get(u, {}))
            pg.append(j)
            pm.append(u)
            ps.append(cache[u])
    return attention_from_sigma(pg, pm, ps, model.w_, model.c_, len(groups))


def _argmax_first(scores: np.ndarray) -> int:
    top = scores.max()
    tol = _TIE_RTOL * max(abs(top), 1e-300)
    return int(np.flatnonzero(scores >= top - tol)[0])


def select_group(weights: AttentionWeights | Sequence[float]) -> int:
    """Index of the highest group score; near-ties go to the smallest index."""
    scores = weights.group_score if isinstance(weights, AttentionWeights) else np.asarray(weights, float)
    return _argmax_first(scores)


def predicted_score(model, target: UserId, topic: TopicId, group_score: float) -> float:
    return float(group_score * model.user_vector(target) @ model.topic_vector(topic))


def select_topic(
    target: UserId,
    model,
    weights: AttentionWeights | float,
    vocabulary: Iterable[TopicId],
    group_index: int = 0,
) -> TopicId:
    """Top-1 topic for the selected group; ties go to the smallest topic id."""
    vocab = sorted(set(vocabulary))
    if not vocab:
        raise NoTopic("empty topic vocabulary")
    gs = float(weights.group_score[group_index]) if isinstance(weights, AttentionWeights) else float(weights)
    scores = np.array([predicted_score(model, target, t, gs) for t in vocab])
    return vocab[_argmax_first(scores)]


# --- training data ----------------------------------------------------------


def build_pairs(
    members: Iterable[UserId],
    visited: Mapping[UserId, frozenset],
    vocabulary: Iterable[TopicId],
    neg_ratio: int | None = 4,
    rng: np.random.Generator | None = None,
) -> list[tuple[TopicId, TopicId]]:
    """(positive, negative) topic pairs for one group.

    Positives are topics every member has visited; negatives are the rest
    of the vocabulary (visited by nobody or only by some members).  Each
    positive is paired with up to ``neg_ratio`` negatives drawn uniformly
    without replacement; ``None`` keeps all of them.
    """
    members = list(members)
    if not members:
        return []
    common = frozenset.intersection(*(frozenset(visited.get(u, ())) for u in members))
    vocab = sorted(set(vocabulary))
    pos = [t for t in vocab if t in common]
    neg = [t for t in vocab if t not in common]
    if not pos or not neg:
        return []
    rng = rng or np.random.default_rng(0)
    out = []
    for q in pos:
        if neg_ratio is None or neg_ratio >= len(neg):
            chosen = neg
        else:
            idx = np.sort(rng.choice(len(neg), size=neg_ratio, replace=False))
            chosen = [neg[i] for i in idx]
        out.extend((q, s) for s in chosen)
    return out


@dataclass
class TrainingData:
    """Flattened A-BPR training set.

    Every training pool belongs to one target user and lists the distinct
    groups that target took part in.  ``pair_*`` arrays describe
    (group, non-target member) attention pairs, ordered by pool; ``inst_*``
    arrays describe (target, group, positive, negative) instances.
    """

    user_ids: tuple
    topics: tuple
    pair_sigma: np.ndarray
    pair_pool: np.ndarray
    pair_group: np.ndarray
    group_pool: np.ndarray
    inst_user: np.ndarray
    inst_group: np.ndarray
    inst_pos: np.ndarray
    inst_neg: np.ndarray

    @property
    def n_pools(self) -> int:
        return int(self.group_pool.max()) + 1 if len(self.group_pool) else 0

    @property
    def n_groups(self) -> int:
        return len(self.group_pool)

    def __len__(self):
        return len(self.inst_user)


def make_training_data(
    events,
    prefs: Mapping[UserId, Mapping],
    visited: Mapping[UserId, frozenset],
    user_ids: Iterable[UserId],
    topics: Iterable[TopicId],
    neg_ratio: int | None = 4,
    seed: int = 0,
    graph: GeoSocialNetwork | None = None,
    n_alt_groups: int = 4,
    event_targets: Sequence[Iterable[UserId]] | None = None,
) -> TrainingData:
    """Training instances from group events, one per (event, target, topic pair).

    ``event_targets[i]`` lists the members of event ``i`` that act as the
    target user (default: every member).

    The pool of a target holds every observed group it joined plus, when
    ``graph`` is given, up to ``n_alt_groups`` unobserved groups per
    observed one: the target with randomly drawn friends, same size.
    Only observed groups carry ranking instances, so the attention
    parameters learn to favor observed groups over the alternatives.
    """
    user_ids = tuple(sorted(user_ids))
    topics = tuple(sorted(topics))
    uidx = {u: i for i, u in enumerate(user_ids)}
    tidx = {t: i for i, t in enumerate(topics)}
    events = list(events)
    rng = np.random.default_rng(seed)

    member_sets = [frozenset(e.members) for e in events]
    if event_targets is None:
        targets = [sorted(ms) for ms in member_sets]
    else:
        targets = [sorted(set(t) & ms) for t, ms in zip(event_targets, member_sets)]
    observed: dict[UserId, set] = {}
    for ms, ts in zip(member_sets, targets):
        for u in ts:
            observed.setdefault(u, set()).add(ms)
    pool_order = sorted(observed)
    pools: dict[UserId, list[frozenset]] = {}
    for u in pool_order:
        groups = sorted(observed[u], key=lambda s: tuple(sorted(s)))
        extra: set[frozenset] = set()
        if graph is not None and u in graph and n_alt_groups > 0:
            friends = np.asarray(graph.neighbors(u))
            for ms in groups:
                size = len(ms) - 1
                if len(friends) < size:
                    continue
                for _ in range(n_alt_groups):
                    alt = frozenset(rng.choice(friends, size, replace=False).tolist()) | {u}
                    if alt not in observed[u]:
                        extra.add(alt)
        pools[u] = groups + sorted(extra, key=lambda s: tuple(sorted(s)))

    pool_id = {u: i for i, u in enumerate(pool_order)}
    group_id: dict[tuple[UserId, frozenset], int] = {}
    pair_sigma, pair_pool, pair_group, group_pool = [], [], [], []
    for u in pool_order:
        for ms in pools[u]:
            gid = len(group_pool)
            group_id[(u, ms)] = gid
            group_pool.append(pool_id[u])
            for m in sorted(ms):
                if m == u:
                    continue
                pair_sigma.append(influence(prefs.get(u, {}), prefs.get(m, {})))
                pair_pool.append(pool_id[u])
                pair_group.append(gid)

    iu, ig, ip, ineg = [], [], [], []
    for ms, ts in zip(member_sets, targets):
        for u in ts:
            if u not in uidx:
                continue
            for q, s in build_pairs(ms, visited, topics, neg_ratio, rng):
                iu.append(uidx[u])
                ig.append(group_id[(u, ms)])
                ip.append(tidx[q])
                ineg.append(tidx[s])

    def arr(x, dt):
        return np.asarray(x, dtype=dt)

    return TrainingData(
        user_ids,
        topics,
        arr(pair_sigma, float),
        arr(pair_pool, np.int64),
        arr(pair_group, np.int64),
        arr(group_pool, np.int64),
        arr(iu, np.int64),
        arr(ig, np.int64),
        arr(ip, np.int64),
        arr(ineg, np.int64),
    )


# --- optimizer --------------------------------------------------------------


class Adam:
    def __init__(self, lr=1e-2, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for k, p in params.items():
            g = grads[k]
            if k not in self.m:
                self.m[k] = np.zeros_like(p)
                self.v[k] = np.zeros_like(p)
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            p -= self.lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.eps)


# --- loss ---------------------------------------------------------------------


def _sigmoid_neg(x):
    # 1 / (1 + e^x), stable for large |x|
    return np.exp(-np.logaddexp(0.0, x))


def abpr_loss_and_grad(params: Mapping[str, np.ndarray], data: TrainingData, l2: float):
    """Objective and analytic gradient w.r.t. ``U``, ``V``, ``w`` and ``c``.

    ``sum softplus(-(gs * <u, v_q - v_s>)) + l2 * ||theta||^2`` where
    ``gs`` is the instance group's pool-softmax score.
    """
    U, V = params["U"], params["V"]
    w, c = float(params["w"]), float(params["c"])
    P, G = data.n_pools, data.n_groups

    a = w * data.pair_sigma + c
    amax = np.full(P, -np.inf)
    np.maximum.at(amax, data.pair_pool, a)
    e = np.exp(a - amax[data.pair_pool])
    Z = np.bincount(data.pair_pool, weights=e, minlength=P)
    alpha = e / Z[data.pair_pool]
    gs = np.bincount(data.pair_group, weights=alpha, minlength=G)
    a_sig = alpha * data.pair_sigma
    dgs_dw = np.bincount(data.pair_group, weights=a_sig, minlength=G) - gs * np.bincount(
        data.pair_pool, weights=a_sig, minlength=P
    )[data.group_pool]
    dgs_dc = gs - gs * np.bincount(data.pair_pool, weights=alpha, minlength=P)[data.group_pool]

    ut = U[data.inst_user]
    dv = V[data.inst_pos] - V[data.inst_neg]
    margin = np.einsum("ij,ij->i", ut, dv)
    g = gs[data.inst_group]
    x = g * margin
    reg = U.ravel() @ U.ravel() + V.ravel() @ V.ravel() + w * w + c * c
    loss = float(np.logaddexp(0.0, -x).sum() + l2 * reg)

    dx = -_sigmoid_neg(x)
    gU = 2.0 * l2 * U
    gV = 2.0 * l2 * V
    coef = (dx * g)[:, None]
    np.add.at(gU, data.inst_user, coef * dv)
    np.add.at(gV, data.inst_pos, coef * ut)
    np.add.at(gV, data.inst_neg, -coef * ut)
    g_gs = np.bincount(data.inst_group, weights=dx * margin, minlength=G)
    gw = float(g_gs @ dgs_dw) + 2.0 * l2 * w
    gc = float(g_gs @ dgs_dc) + 2.0 * l2 * c
    return loss, {"U": gU, "V": gV, "w": np.asarray(gw), "c": np.asarray(gc)}


# --- estimator ----------------------------------------------------------------


class AttentiveBPR(BaseEstimator):
    """Attention-weighted BPR topic ranker.

    Parameters
    ----------
    dim : int
        Latent dimension of user and topic vectors.
    learning_rate, beta1, beta2, epsilon : float
        Adam hyperparameters.
    epochs : int
        Full-batch Adam steps.
    l2 : float
        Weight of the squared-norm penalty over all parameters.
    init_std : float
        Standard deviation of the Gaussian initialization of vectors.
    random_state : int
    """

    def __init__(
        self,
        dim=32,
        learning_rate=1e-2,
        epochs=200,
        l2=1e-3,
        init_std=0.1,
        beta1=0.9,
        beta2=0.999,
        epsilon=1e-8,
        random_state=0,
    ):
        self.dim = dim
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.l2 = l2
        self.init_std = init_std
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.random_state = random_state

    def _init_params(self, n_users, n_topics):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")
        rng = np.random.default_rng(self.random_state)
        return {
            "U": rng.normal(0.0, self.init_std, size=(n_users, self.dim)),
            "V": rng.normal(0.0, self.init_std, size=(n_topics, self.dim)),
            "w": np.asarray(1.0),
            "c": np.asarray(0.0),
        }

    def fit(self, data: TrainingData, y=None):
        if len(data) == 0:
            raise NoTrainingData("no (group, positive, negative) triples to train on")
        params = self._init_params(len(data.user_ids), len(data.topics))
        opt = Adam(self.learning_rate, self.beta1, self.beta2, self.epsilon)
        history = []
        for epoch in range(self.epochs):
            loss, grads = abpr_loss_and_grad(params, data, self.l2)
            history.append(loss)
            logger.debug("epoch %d loss %.10g", epoch, loss)
            opt.step(params, grads)
        self._set_fitted(data.user_ids, data.topics, params)
        self.loss_history_ = history
        self.adam_ = opt
        return self

    def _set_fitted(self, user_ids, topics, params):
        self.user_ids_ = tuple(int(u) for u in user_ids)
        self.topics_ = tuple(topics)
        self._uidx = {u: i for i, u in enumerate(self.user_ids_)}
        self._tidx = {t: i for i, t in enumerate(self.topics_)}
        self.user_vecs_ = params["U"]
        self.item_vecs_ = params["V"]
        self.w_ = float(params["w"])
        self.c_ = float(params["c"])

    @classmethod
    def from_vectors(cls, user_vecs: Mapping, topic_vecs: Mapping, w=1.0, c=0.0, l2=1e-3):
        """Build a fitted model from explicit vectors (handy for fixtures)."""
        users = sorted(user_vecs)
        topics = sorted(topic_vecs)
        U = np.array([np.asarray(user_vecs[u], float) for u in users], ndmin=2)
        V = np.array([np.asarray(topic_vecs[t], float) for t in topics], ndmin=2)
        model = cls(dim=U.shape[1], l2=l2)
        model._set_fitted(users, topics, {"U": U, "V": V, "w": w, "c": c})
        return model

    def params_(self) -> dict[str, np.ndarray]:
        check_is_fitted(self, "user_vecs_")
        return {
            "U": self.user_vecs_,
            "V": self.item_vecs_,
            "w": np.asarray(self.w_),
            "c": np.asarray(self.c_),
        }

    def user_vector(self, u: UserId) -> np.ndarray:
        check_is_fitted(self, "user_vecs_")
        try:
            return self.user_vecs_[self._uidx[u]]
        except KeyError:
            raise UnknownUser(u) from None

    def topic_vector(self, t: TopicId) -> np.ndarray:
        check_is_fitted(self, "item_vecs_")
        try:
            return self.item_vecs_[self._tidx[t]]
        except KeyError:
            raise UnknownTopic(t) from None

    def topic_scores(self, target: UserId, group_score: float = 1.0) -> dict[TopicId, float]:
        s = group_score * (self.item_vecs_ @ self.user_vector(target))
        return {t: float(v) for t, v in zip(self.topics_, s)}

    # checkpoint I/O

    def save(self, path) -> None:
        """Write the little-endian checkpoint.

        Layout: magic ``AGSGR1``; uint32 dim, n_users, n_topics; int64 user
        ids; float64 user vectors (row-major); per topic a uint32 byte
        length followed by UTF-8 bytes; float64 topic vectors; float64 w,
        c, l2.
        """
        check_is_fitted(self, "user_vecs_")
        U = np.ascontiguousarray(self.user_vecs_, dtype="<f8")
        V = np.ascontiguousarray(self.item_vecs_, dtype="<f8")
        with open(path, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(struct.pack("<III", U.shape[1], U.shape[0], V.shape[0]))
            fh.write(np.asarray(self.user_ids_, dtype="<i8").tobytes())
            fh.write(U.tobytes())
            for t in self.topics_:
                b = str(t).encode("utf-8")
                fh.write(struct.pack("<I", len(b)))
                fh.write(b)
            fh.write(V.tobytes())
            fh.write(struct.pack("<ddd", self.w_, self.c_, float(self.l2)))

    @classmethod
    def load(cls, path) -> "AttentiveBPR":
        with open(path, "rb") as fh:
            buf = fh.read()
        if buf[:6] != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a model checkpoint")
        off = 6
        d, nu, nt = struct.unpack_from("<III", buf, off)
        off += 12
        users = np.frombuffer(buf, dtype="<i8", count=nu, offset=off)
        off += 8 * nu
        U = np.frombuffer(buf, dtype="<f8", count=nu * d, offset=off).reshape(nu, d).copy()
        off += 8 * nu * d
        topics = []
        for _ in range(nt):
            (n,) = struct.unpack_from("<I", buf, off)
            off += 4
            topics.append(buf[off : off + n].decode("utf-8"))
            off += n
        V = np.frombuffer(buf, dtype="<f8", count=nt * d, offset=off).reshape(nt, d).copy()
        off += 8 * nt * d
        w, c, l2 = struct.unpack_from("<ddd", buf, off)
        model = cls(dim=d, l2=l2)
        model._set_fitted(users.tolist(), topics, {"U": U, "V": V, "w": w, "c": c})
        return model
