import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from agsgr.attention import (
    Adam,
    AttentiveBPR,
    TrainingData,
    abpr_loss_and_grad,
    attention_from_sigma,
    attention_scores,
    build_pairs,
    influence,
    make_training_data,
    predicted_score,
    select_group,
    select_topic,
    topic_preference,
    topic_preferences,
    visited_topics,
)
from agsgr.exceptions import NoTopic, NoTrainingData, UnknownTopic
from agsgr.graph import CheckIn, Poi
from agsgr.groups import CandidateGroup, CandidatePool
from agsgr.ingest import GroupEvent

from helpers import max_relative_gradient_error, random_params, random_training_data

POIS = {"a": Poi("a", 0, 0, "A"), "b": Poi("b", 0, 0, "B")}

prefs_st = st.dictionaries(st.sampled_from("ABCDE"), st.floats(0.01, 1.0), max_size=5).map(
    lambda d: {k: v / sum(d.values()) for k, v in d.items()} if d else {}
)


# --- preferences and influence


def test_topic_preference_examples():
    assert topic_preference([CheckIn(1, "a", t) for t in range(3)], POIS) == {"A": 1.0}
    two = [CheckIn(1, "a", 0), CheckIn(1, "a", 1), CheckIn(1, "b", 2), CheckIn(1, "b", 3)]
    assert topic_preference(two, POIS) == {"A": 0.5, "B": 0.5}
    assert topic_preference([], POIS) == {}


def test_topic_preferences_per_user(small_network):
    prefs = topic_preferences(small_network)
    for u, row in prefs.items():
        assert math.isclose(sum(row.values()), 1.0)
    np.testing.assert_allclose(prefs[1]["A"], 2 / 3)


def test_influence_examples():
    assert influence({"A": 1.0}, {"A": 1.0}) == 1.0
    assert influence({"A": 1.0}, {"B": 1.0}) == 0.0
    assert influence({}, {"A": 1.0}) == 0.0
    got = influence({"A": 0.8, "B": 0.2}, {"A": 0.5, "B": 0.5})
    np.testing.assert_allclose(got, (0.8 * 0.5) / (math.sqrt(0.68) * math.sqrt(0.5)), rtol=1e-15)


@settings(max_examples=300)
@given(prefs_st, prefs_st)
def test_influence_bounds(p, q):
    s = influence(p, q)
    assert 0.0 <= s <= 1.0
    if not set(p) & set(q):
        assert s == 0.0
    if p:
        np.testing.assert_allclose(influence(p, p), 1.0, rtol=1e-12)


# --- attention


def test_single_group_equal_sigma():
    w = attention_from_sigma([0, 0], [2, 3], [0.4, 0.4], 1.0, 0.0, 1)
    np.testing.assert_allclose(w.normalized, [0.5, 0.5])
    np.testing.assert_allclose(w.group_score, [1.0])


def test_two_groups_equal_sigma_proportional_to_size():
    w = attention_from_sigma([0, 0, 1, 1, 1], [2, 3, 4, 5, 6], [0.3] * 5, 1.0, 0.0, 2)
    np.testing.assert_allclose(w.group_score, [2 / 5, 3 / 5])


def test_softmax_arithmetic():
    w = attention_from_sigma([0, 0], [2, 3], [0.0, math.log(2)], 1.0, 0.0, 1)
    np.testing.assert_allclose(w.normalized, [1 / 3, 2 / 3], rtol=1e-12)


def test_attention_scores_on_pool():
    prefs = {0: {"A": 1.0}, 1: {"A": 1.0}, 2: {"B": 1.0}, 3: {"A": 0.5, "B": 0.5}}
    pool = CandidatePool([CandidateGroup((0, 1, 2)), CandidateGroup((0, 1, 3))])
    model = AttentiveBPR.from_vectors({0: [1.0]}, {"A": [1.0]}, w=2.0, c=0.5)
    w = attention_scores(pool, 0, model, prefs)
    assert len(w.raw) == 4
    sig = [influence(prefs[0], prefs[u]) for u in (1, 2, 1, 3)]
    np.testing.assert_allclose(w.raw, 2.0 * np.array(sig) + 0.5)
    np.testing.assert_allclose(w.normalized.sum(), 1.0, atol=1e-12)
    np.testing.assert_allclose(w.group_score.sum(), 1.0, atol=1e-12)
    assert set(w.as_dict()) == {(0, 1), (0, 2), (1, 1), (1, 3)}
    assert select_group(w) == 1


def test_select_group_examples():
    assert select_group([0.2, 0.5, 0.3]) == 1
    assert select_group([0.25, 0.25, 0.25, 0.25]) == 0


@settings(max_examples=200)
@given(
    st.lists(st.floats(0, 1), min_size=1, max_size=12),
    st.floats(-5, 5),
    st.floats(-3, 3),
    st.floats(-50, 50),
    st.integers(0, 2**31 - 1),
)
def test_shift_invariance_and_normalization(sigma, w, c, shift, seed):
    rng = np.random.default_rng(seed)
    n_groups = int(rng.integers(1, len(sigma) + 1))
    groups = np.sort(np.r_[np.arange(n_groups), rng.integers(0, n_groups, len(sigma) - n_groups)])
    a = attention_from_sigma(groups, np.arange(len(sigma)), sigma, w, c, n_groups)
    b = attention_from_sigma(groups, np.arange(len(sigma)), sigma, w, c + shift, n_groups)
    assert abs(a.normalized.sum() - 1.0) <= 1e-9
    assert np.all((a.normalized > 0) & (a.normalized <= 1))
    np.testing.assert_allclose(a.group_score, np.bincount(groups, a.normalized, n_groups))
    assert select_group(a) == select_group(b)


# --- scoring


def test_predicted_score_examples():
    m = AttentiveBPR.from_vectors({7: [1.0, 0.0]}, {"A": [1.0, 0.0], "Z": [0.0, 0.0], "C": [2.5, 0.0]})
    assert predicted_score(m, 7, "A", 1.0) == 1.0
    assert predicted_score(m, 7, "Z", 1.0) == 0.0
    np.testing.assert_allclose(predicted_score(m, 7, "C", 0.4), 1.0)
    with pytest.raises(UnknownTopic):
        predicted_score(m, 7, "nope", 1.0)


def test_select_topic_examples():
    m = AttentiveBPR.from_vectors({1: [1.0]}, {"A": [0.9], "B": [0.1]})
    assert select_topic(1, m, 1.0, ["A"]) == "A"
    assert select_topic(1, m, 1.0, ["A", "B"]) == "A"
    tie = AttentiveBPR.from_vectors({1: [1.0]}, {"A": [0.5], "B": [0.5]})
    assert select_topic(1, tie, 1.0, ["B", "A"]) == "A"
    with pytest.raises(NoTopic):
        select_topic(1, m, 1.0, [])


# --- training pairs


def test_build_pairs_examples():
    visited = {1: frozenset("A"), 2: frozenset("A")}
    assert build_pairs([1, 2], visited, ["A", "B"]) == [("A", "B")]
    assert build_pairs([1, 2], {1: frozenset("A"), 2: frozenset("B")}, ["A", "B"]) == []
    many = {1: frozenset("PQ"), 2: frozenset("PQR")}
    vocab = list("PQ") + list("RSTUVWXY")
    pairs = build_pairs([1, 2], many, vocab, neg_ratio=4, rng=np.random.default_rng(0))
    assert len(pairs) == 8
    assert {q for q, _ in pairs} == {"P", "Q"}
    assert all(s not in "PQ" for _, s in pairs)
    # R was visited by only one member, so it may serve as a negative
    assert "R" in {s for _, s in build_pairs([1, 2], many, vocab, neg_ratio=None)}


def test_make_training_data_pools(small_network):
    events = [GroupEvent(0, "a1", (1, 2, 3)), GroupEvent(5, "b1", (1, 5, 6))]
    prefs = topic_preferences(small_network)
    visited = visited_topics(small_network)
    data = make_training_data(
        events, prefs, visited, small_network.users, small_network.topics, seed=0, graph=small_network
    )
    assert len(data) > 0
    # every instance group belongs to the pool of its target
    pool_of_user = {}
    for u, gid in zip(data.inst_user, data.inst_group):
        pool_of_user.setdefault(u, set()).add(data.group_pool[gid])
    assert all(len(v) == 1 for v in pool_of_user.values())
    only_initiator = make_training_data(
        events, prefs, visited, small_network.users, small_network.topics,
        graph=small_network, event_targets=[(1,), (1,)],
    )
    assert set(only_initiator.inst_user.tolist()) == {small_network.users.index(1)}


# --- loss, gradients, optimizer


def test_gradient_small_fixture():
    rng = np.random.default_rng(3)
    data = random_training_data(rng, n_users=3, n_topics=2)
    params = random_params(rng, data)
    assert max_relative_gradient_error(params, data, l2=0.05) < 1e-4


def test_c_gradient_is_pure_penalty():
    rng = np.random.default_rng(4)
    data = random_training_data(rng)
    params = random_params(rng, data)
    _, g = abpr_loss_and_grad(params, data, 0.1)
    np.testing.assert_allclose(float(g["c"]), 2 * 0.1 * float(params["c"]), atol=1e-12)


def test_adam_first_step_moves_by_lr():
    p = {"x": np.array([1.0, -2.0])}
    opt = Adam(lr=0.1)
    opt.step(p, {"x": np.array([3.0, -0.5])})
    np.testing.assert_allclose(p["x"], [0.9, -1.9], rtol=1e-6)
    assert opt.t == 1


def _one_pair_data():
    return TrainingData(
        (0,),
        ("q", "s"),
        np.array([0.5]),
        np.array([0]),
        np.array([0]),
        np.array([0]),
        np.array([0]),
        np.array([0]),
        np.array([0]),
        np.array([1]),
    )


def test_single_pair_separates():
    m = AttentiveBPR(dim=4, epochs=300, learning_rate=0.05, l2=1e-4, random_state=1).fit(_one_pair_data())
    assert m.topic_scores(0)["q"] > m.topic_scores(0)["s"]


def test_large_l2_shrinks_norms_monotonically():
    data = random_training_data(np.random.default_rng(5))
    norms = []
    for epochs in (1, 20, 60, 150):
        m = AttentiveBPR(dim=4, epochs=epochs, learning_rate=1e-2, l2=100.0, random_state=0).fit(data)
        norms.append(np.linalg.norm(m.user_vecs_) + np.linalg.norm(m.item_vecs_))
    assert all(b < a for a, b in zip(norms, norms[1:]))


def test_loss_non_increasing():
    data = random_training_data(np.random.default_rng(6), n_users=3, n_topics=3)
    m = AttentiveBPR(dim=4, epochs=200, learning_rate=1e-2, random_state=0).fit(data)
    diffs = np.diff(m.loss_history_)
    assert diffs.max() <= 1e-6


def test_fit_is_reproducible_and_clonable():
    data = random_training_data(np.random.default_rng(7))
    a = AttentiveBPR(dim=3, epochs=30, random_state=4).fit(data)
    b = clone(a).fit(data)
    np.testing.assert_array_equal(a.user_vecs_, b.user_vecs_)
    assert a.get_params()["dim"] == 3


def test_empty_training_data_raises():
    empty = make_training_data([], {}, {}, [1], ["A"])
    with pytest.raises(NoTrainingData):
        AttentiveBPR().fit(empty)


def test_checkpoint_round_trip(tmp_path):
    data = random_training_data(np.random.default_rng(8))
    m = AttentiveBPR(dim=3, epochs=5).fit(data)
    path = tmp_path / "m.bin"
    m.save(path)
    assert path.read_bytes()[:6] == b"AGSGR1"
    back = AttentiveBPR.load(path)
    np.testing.assert_array_equal(back.user_vecs_, m.user_vecs_)
    np.testing.assert_array_equal(back.item_vecs_, m.item_vecs_)
    assert (back.w_, back.c_, back.l2) == (m.w_, m.c_, m.l2)
    assert back.topics_ == m.topics_ and back.user_ids_ == m.user_ids_


def test_load_rejects_garbage(tmp_path):
    p = tmp_path / "x.bin"
    p.write_bytes(b"nope")
    with pytest.raises(ValueError):
        AttentiveBPR.load(p)
