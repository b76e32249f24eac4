"""Shared fixtures for the topic-ranker tests."""

import numpy as np

from agsgr.attention import TrainingData, abpr_loss_and_grad

GRAD_FLOOR = 1e-10  # guards exact zeros only


def random_training_data(rng, n_users=3, n_topics=None, max_groups=3, max_members=3, max_inst=6):
    """Small random pools: every user owns a pool of 1..max_groups groups."""
    n_topics = n_topics or int(rng.integers(2, 5))
    pair_sigma, pair_pool, pair_group, group_pool = [], [], [], []
    iu, ig, ip, ineg = [], [], [], []
    for u in range(n_users):
        gids = []
        for _ in range(int(rng.integers(1, max_groups + 1))):
            gid = len(group_pool)
            group_pool.append(u)
            gids.append(gid)
            for _ in range(int(rng.integers(1, max_members + 1))):
                pair_sigma.append(rng.uniform(0, 1))
                pair_pool.append(u)
                pair_group.append(gid)
        for _ in range(int(rng.integers(1, max_inst + 1))):
            q, s = rng.choice(n_topics, size=2, replace=False)
            iu.append(u)
            ig.append(int(rng.choice(gids)))
            ip.append(int(q))
            ineg.append(int(s))
    a = lambda x, dt=np.int64: np.asarray(x, dtype=dt)  # noqa: E731
    return TrainingData(
        tuple(range(n_users)),
        tuple(f"t{i}" for i in range(n_topics)),
        a(pair_sigma, float),
        a(pair_pool),
        a(pair_group),
        a(group_pool),
        a(iu),
        a(ig),
        a(ip),
        a(ineg),
    )


def random_params(rng, data, dim=4):
    return {
        "U": rng.normal(0, 0.5, size=(len(data.user_ids), dim)),
        "V": rng.normal(0, 0.5, size=(len(data.topics), dim)),
        "w": np.asarray(rng.normal(1.0, 1.0)),
        "c": np.asarray(rng.normal(0.0, 1.0)),
    }


def max_relative_gradient_error(params, data, l2, step=1e-5, floor=GRAD_FLOOR):
    """Largest ``|analytic - numeric| / max(|analytic|, |numeric|, floor)``
    over every parameter entry, numeric by central differences."""
    _, grads = abpr_loss_and_grad(params, data, l2)
    worst = 0.0
    for name, p in params.items():
        flat = p.reshape(-1)
        g = np.asarray(grads[name]).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up, _ = abpr_loss_and_grad(params, data, l2)
            flat[i] = orig - step
            down, _ = abpr_loss_and_grad(params, data, l2)
            flat[i] = orig
            num = (up - down) / (2 * step)
            err = abs(g[i] - num) / max(abs(g[i]), abs(num), floor)
            worst = max(worst, err)
    return worst


def ndcg_direct(rels):
    """Gain over ideal gain, summing ``1 / log2(i)`` (1 at i = 1) over the
    relevant positions only."""
    weight = lambda i: 1.0 if i == 1 else 1.0 / np.log2(i)  # noqa: E731
    hits = [i for i, r in enumerate(rels, 1) if r]
    if not hits:
        return 0.0
    gain = 0.0
    for i in hits:
        gain += weight(i)
    best = 0.0
    for i in range(1, len(hits) + 1):
        best += weight(i)
    return gain / best


def planted_recommender(seed, **params):
    from agsgr.recommender import GeoSocialGroupRecommender
    from agsgr.synthetic import make_planted_dataset

    ds = make_planted_dataset(seed)
    kw = dict(core=3, group_size=5, top_k=5, random_state=seed)
    kw.update(params)
    return ds, GeoSocialGroupRecommender(**kw).fit(ds.network, ds.events)


def write_planted_csv(directory, seed=0):
    """Check-in and edge CSVs of the planted dataset; returns the dataset."""
    from agsgr.synthetic import make_planted_dataset

    ds = make_planted_dataset(seed)
    g = ds.network
    rows = ["user_id,poi_id,timestamp,lat,lon,category"]
    for c in g.checkins:
        p = g.pois[c.poi]
        rows.append(f"{c.user},{c.poi},{c.time},{p.lat!r},{p.lon!r},{p.topic}")
    (directory / "checkins.csv").write_text("\n".join(rows) + "\n")
    (directory / "edges.csv").write_text("".join(f"{u},{v}\n" for u, v in g.edges()))
    return ds
