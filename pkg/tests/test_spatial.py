import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agsgr.exceptions import EmptyGroup
from agsgr.graph import Poi
from agsgr.oracles import ann_mismatch, mec_radius_bruteforce, random_ann_instance
from agsgr.spatial import (
    AnnResult,
    SearchTrace,
    SpatialIndex,
    adist,
    brute_force_ann,
    build_index,
    mindist,
    minimum_enclosing_circle,
    project,
    spa_df,
)

points_st = st.lists(
    st.tuples(st.floats(-1e4, 1e4, allow_nan=False), st.floats(-1e4, 1e4, allow_nan=False)),
    min_size=1,
    max_size=25,
)


def test_project_examples():
    assert tuple(project(40.0, -74.0, (40.0, -74.0))) == (0.0, 0.0)
    p = project(41.0, -74.0, (40.0, -74.0))
    assert p.x == 0.0
    np.testing.assert_allclose(p.y, 6_371_000 * math.pi / 180, rtol=1e-12)
    np.testing.assert_allclose(p.y, 111_195, atol=0.5)
    e, w = project(40.0, -73.5, (40.0, -74.0)), project(40.0, -74.5, (40.0, -74.0))
    assert e.x == -w.x


def test_adist_examples():
    assert adist((0, 0), [(3, 4)]) == 5.0
    assert adist((1, 1), [(1, 1), (1, 1)]) == 0.0
    assert adist((0, 0), [(3, 0), (0, 7), (-2, 0)]) == 7.0
    with pytest.raises(EmptyGroup):
        adist((0, 0), [])


def test_mec_small_cases():
    c = minimum_enclosing_circle([(2, 3)])
    assert (c.center.x, c.center.y, c.radius) == (2, 3, 0.0)
    c = minimum_enclosing_circle([(0, 0), (6, 8)])
    assert (c.center.x, c.center.y) == (3, 4) and c.radius == 5.0
    with pytest.raises(EmptyGroup):
        minimum_enclosing_circle([])


def test_mec_degenerate_inputs():
    line = [(0, 0), (1, 0), (2, 0), (5, 0), (3, 0)]
    c = minimum_enclosing_circle(line)
    np.testing.assert_allclose([c.center.x, c.center.y, c.radius], [2.5, 0, 2.5], atol=1e-12)
    dup = [(1, 1)] * 5 + [(3, 1)]
    c = minimum_enclosing_circle(dup)
    np.testing.assert_allclose([c.center.x, c.radius], [2, 1], atol=1e-12)


def test_mec_matches_oracle_on_50_points():
    rng = np.random.default_rng(11)
    for _ in range(10):
        pts = rng.uniform(-100, 100, size=(50, 2))
        np.testing.assert_allclose(minimum_enclosing_circle(pts).radius, mec_radius_bruteforce(pts), atol=1e-6)


@settings(max_examples=150, deadline=None)
@given(points_st)
def test_mec_encloses_and_is_minimal(pts):
    c = minimum_enclosing_circle(pts)
    for p in pts:
        assert math.hypot(p[0] - c.center.x, p[1] - c.center.y) <= c.radius + 1e-6 * max(1.0, c.radius)
    assert c.radius <= mec_radius_bruteforce(pts) + 1e-6 * max(1.0, c.radius)


@settings(max_examples=150, deadline=None)
@given(points_st)
def test_mec_center_minimizes_adist(pts):
    c = minimum_enclosing_circle(pts)
    here = adist((c.center.x, c.center.y), pts)
    np.testing.assert_allclose(here, c.radius, rtol=1e-9, atol=1e-9)
    for dx, dy in ((1, 0), (0, 1), (-1, 0), (0, -1), (0.7, 0.7)):
        assert adist((c.center.x + dx, c.center.y + dy), pts) >= here - 1e-9 * max(1.0, here)


def test_mindist_examples():
    box = (0.0, 0.0, 10.0, 10.0)
    assert mindist(box, (5, 5)) == 0.0
    assert mindist(box, (-4, 5)) == 4.0
    assert mindist(box, (13, 14)) == 5.0


def _check_index(index: SpatialIndex):
    seen = []
    for node in index.nodes():
        x0, y0, x1, y1 = node.mbr
        if node.is_leaf:
            pts = index.xy[node.lo : node.hi]
            assert np.all((pts[:, 0] >= x0) & (pts[:, 0] <= x1) & (pts[:, 1] >= y0) & (pts[:, 1] <= y1))
            assert node.hi - node.lo <= index.fanout
            seen.extend(range(node.lo, node.hi))
        else:
            assert len(node.children) <= index.fanout
            for ch in node.children:
                cx0, cy0, cx1, cy1 = ch.mbr
                assert x0 <= cx0 and y0 <= cy0 and cx1 <= x1 and cy1 <= y1
                assert node.lo <= ch.lo and ch.hi <= node.hi
    assert sorted(seen) == list(range(len(index)))


def test_index_single_poi():
    idx = SpatialIndex.build(["p"], [(1.0, 2.0)])
    assert idx.root.is_leaf and len(list(idx.leaves())) == 1
    assert spa_df(idx, [(0, 0)], 3).ranked == [("p", math.hypot(1, 2))]


def test_index_thousand_pois():
    rng = np.random.default_rng(2)
    xy = rng.uniform(0, 1000, size=(1000, 2))
    ids = [f"p{i:04d}" for i in range(1000)]
    idx = SpatialIndex.build(ids, xy)
    _check_index(idx)
    assert sorted(idx.ids.tolist()) == ids
    where = {pid: i for i, pid in enumerate(idx.ids)}
    for i in rng.choice(1000, 50, replace=False):
        np.testing.assert_array_equal(idx.xy[where[ids[i]]], xy[i])
        assert spa_df(idx, [tuple(xy[i])], 1).ranked[0][1] == 0.0


def test_empty_index():
    idx = SpatialIndex.build([], np.zeros((0, 2)))
    assert len(idx) == 0 and idx.root is None
    assert len(spa_df(idx, [(0, 0)], 5)) == 0
    assert len(brute_force_ann([], np.zeros((0, 2)), [(0, 0)], 5)) == 0


def test_build_index_from_pois_filters_nothing():
    pois = [Poi(f"x{i}", 40 + i * 1e-3, -74.0, "A") for i in range(20)]
    idx = build_index(pois, (40.0, -74.0))
    assert len(idx) == 20 and set(idx.topics) == {"A"}


def test_single_member_group_is_knn():
    rng = np.random.default_rng(3)
    xy = rng.uniform(0, 100, size=(300, 2))
    ids = [f"q{i}" for i in range(300)]
    u = (50.0, 50.0)
    got = spa_df(SpatialIndex.build(ids, xy, fanout=8), [u], 7)
    d = np.hypot(xy[:, 0] - 50, xy[:, 1] - 50)
    order = np.argsort(d, kind="stable")[:7]
    assert got.ids == [ids[i] for i in order]


def test_k_larger_than_poi_count():
    xy = [(0, 0), (1, 1), (2, 2)]
    res = brute_force_ann(["a", "b", "c"], xy, [(0, 0)], K=10)
    assert res.ids == ["a", "b", "c"]
    assert spa_df(SpatialIndex.build(["a", "b", "c"], xy), [(0, 0)], 10).ids == res.ids


def test_ties_broken_by_poi_id():
    xy = [(1, 0), (0, 1), (-1, 0), (0, -1)]
    ids = ["d", "b", "c", "a"]
    res = spa_df(SpatialIndex.build(ids, xy, fanout=2), [(0, 0)], 3)
    assert res.ids == ["a", "b", "c"]


def test_5000_pois_6_users_k10():
    rng = np.random.default_rng(4)
    xy = rng.uniform(0, 10_000, size=(5000, 2))
    ids = [f"p{i}" for i in range(5000)]
    group = rng.uniform(0, 10_000, size=(6, 2))
    got = spa_df(SpatialIndex.build(ids, xy), group, 10)
    want = brute_force_ann(ids, xy, group, 10)
    assert got.ids == want.ids
    np.testing.assert_allclose([d for _, d in got.ranked], [d for _, d in want.ranked], atol=1e-6)


def test_random_instances_match_and_prune_safely():
    for t in range(40):
        inst = random_ann_instance(np.random.default_rng([99, t]), max_pois=1500)
        assert ann_mismatch(inst) is None


def test_pruning_happens():
    rng = np.random.default_rng(5)
    xy = rng.uniform(0, 10_000, size=(5000, 2))
    trace = SearchTrace()
    spa_df(SpatialIndex.build([str(i) for i in range(5000)], xy), [(5000, 5000), (5100, 5050)], 5, trace=trace)
    assert trace.pruned and trace.entries_scanned < 5000


def test_anchor_triangle_bound():
    rng = np.random.default_rng(6)
    for _ in range(200):
        group = rng.uniform(-50, 50, size=(int(rng.integers(1, 8)), 2))
        loc = rng.uniform(-100, 100, size=2)
        anchor = rng.uniform(-100, 100, size=2)
        bound = max(np.hypot(*(loc - anchor)) - np.hypot(*(g - anchor)) for g in group)
        assert adist(loc, group) >= bound - 1e-9


def test_ann_result_csv():
    res = AnnResult([("p1", 12.34567), ("p2", 100.0)])
    assert res.to_csv() == "rank,poi_id,adist_meters\n1,p1,12.346\n2,p2,100.000\n"
