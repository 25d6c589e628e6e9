import math

import numpy as np
import pytest

from llmsocial import core
from llmsocial.core import snapshot_at
from llmsocial.errors import InsufficientOutsiders, NoBackstoryAgents, NoFollowEvents
from llmsocial.homophily import (
    _windows, backstory_drift, community_homophily, follow_spells, individual_follow_homophily, month_start,
    neighbor_convergence, next_month,
)
from llmsocial.text import hashed_bow_encoder

from conftest import agents, build_log

F, U, P = core.FOLLOWED, core.UNFOLLOWED, core.POSTED


class TableEncoder:
    """Maps whole texts to fixed vectors, for hand arithmetic."""

    def __init__(self, table):
        self.table = {k: np.asarray(v, dtype=float) for k, v in table.items()}

    def dim(self):
        return len(next(iter(self.table.values())))

    def encode(self, text):
        return self.table[text]


def _post(pid, author, text):
    return {"post_id": pid, "author_id": author, "text": text}


def _two_cliques(text_of):
    ids = [f"u{i}" for i in range(6)]
    events = list(agents(*ids))
    for i, a in enumerate(ids):
        events.append((P, 1, _post(f"p{i}", a, text_of(i))))
    for grp in (ids[:3], ids[3:]):
        for a in grp:
            for b in grp:
                if a != b:
                    events.append((F, 2, {"follower_id": a, "followee_id": b}))
    return build_log(*events)


def test_identical_text_gives_ratio_one():
    rep = community_homophily(snapshot_at(_two_cliques(lambda i: "same words here")), hashed_bow_encoder(),
                              n_random=3)
    assert rep.n_communities == 2
    assert rep.mean_ratio == pytest.approx(1.0, abs=1e-12)


def test_community_ratio_by_hand():
    enc = TableEncoder({"in": [1.0, 0.0], "out": [1.0, 1.0]})
    # group one talks about "in", group two about "out"
    rep = community_homophily(snapshot_at(_two_cliques(lambda i: "in" if i < 3 else "out")), enc, n_random=3)
    # inside similarity 1, across similarity cos(45 deg)
    assert rep.mean_ratio == pytest.approx(math.sqrt(2), abs=1e-12)
    assert rep.per_agent["u0"]["E_C"] == pytest.approx(1.0)


def test_too_few_outsiders():
    with pytest.raises(InsufficientOutsiders):
        community_homophily(snapshot_at(_two_cliques(lambda i: "a b")), hashed_bow_encoder(), n_random=4)


def test_single_follow_hand_quotient():
    enc = TableEncoder({"x": [1, 0], "y": [1, 1], "w": [1, 2]})
    log = build_log(*agents("a", "b", "c"),
                    (P, 10, _post("p1", "a", "x")), (P, 11, _post("p2", "b", "y")), (P, 12, _post("p3", "c", "w")),
                    (F, 150, {"follower_id": "a", "followee_id": "b"}))
    rep = individual_follow_homophily(log, enc, window=100)
    s, s_bar = 1 / math.sqrt(2), 1 / math.sqrt(5)
    assert rep.per_window == {100: pytest.approx(s / s_bar, abs=1e-12)}
    assert rep.overall_mean == pytest.approx(s / s_bar, abs=1e-12)


def test_posts_inside_window_are_ignored():
    enc = TableEncoder({"x": [1, 0], "y": [1, 1], "w": [1, 2], "late": [0, 1]})
    log = build_log(*agents("a", "b", "c"),
                    (P, 10, _post("p1", "a", "x")), (P, 11, _post("p2", "b", "y")), (P, 12, _post("p3", "c", "w")),
                    (P, 120, _post("p4", "a", "late")),
                    (F, 150, {"follower_id": "a", "followee_id": "b"}))
    assert individual_follow_homophily(log, enc, window=100).overall_mean == pytest.approx(math.sqrt(2.5))


def test_no_follows():
    with pytest.raises(NoFollowEvents):
        individual_follow_homophily(build_log(*agents("a")), hashed_bow_encoder())


def test_calendar_months():
    jan15 = 1_705_276_800_000  # 2024-01-15 UTC
    assert month_start(jan15) == 1_704_067_200_000
    assert next_month(month_start(jan15)) == 1_706_745_600_000
    assert _windows(0, 250, 100) == [(0, 100), (100, 200), (200, 300)]


def test_drift_flat_when_posts_copy_backstory():
    back = "robots love gardening and painting"
    log = build_log(*agents("a", backstory=back),
                    *[(P, t * 10, _post(f"p{t}", "a", back)) for t in range(6)])
    series = backstory_drift(log, bucket_ms=20, min_bucket_size=1)
    for m in ("jaccard", "precision", "contextual"):
        assert all(v == pytest.approx(1.0) for v in series[m].means())


def test_drift_single_post():
    log = build_log(*agents("a", backstory="cats"), (P, 5, _post("p", "a", "cats dogs")))
    s = backstory_drift(log, measures=("jaccard",), min_bucket_size=1)["jaccard"]
    assert s.to_rows() == [(0, 0.5, 1)]


def test_drift_needs_backstories():
    with pytest.raises(NoBackstoryAgents):
        backstory_drift(build_log(*agents("a")))


def test_small_buckets_are_suppressed():
    log = build_log(*agents("a", backstory="cats"), (P, 5, _post("p", "a", "cats")))
    s = backstory_drift(log, measures=("jaccard",), min_bucket_size=2)["jaccard"]
    assert s.buckets == {} and s.suppressed == [0]


def test_follow_spells():
    log = build_log(*agents("a", "b"), (F, 1, {"follower_id": "a", "followee_id": "b"}),
                    (U, 4, {"follower_id": "a", "followee_id": "b"}),
                    (F, 6, {"follower_id": "a", "followee_id": "b"}))
    assert follow_spells(log) == [("a", "b", 1, 4), ("a", "b", 6, None)]


def test_one_bucket_spell_lands_in_bucket_zero():
    log = build_log(*agents("a", "b", backstory="hi"),
                    (F, 0, {"follower_id": "a", "followee_id": "b"}),
                    (P, 3, _post("p1", "a", "sun rain")), (P, 4, _post("p2", "b", "sun snow")),
                    (U, 10, {"follower_id": "a", "followee_id": "b"}),
                    (P, 15, _post("p3", "a", "sun rain")), (P, 16, _post("p4", "b", "sun snow")),
                    (P, 40, _post("p5", "a", "end")))
    series = neighbor_convergence(log, hashed_bow_encoder(), bucket_ms=10, min_bucket_size=1)
    assert list(series["with_backstory"].buckets) == [0]
    assert series["no_backstory"].buckets == {}


def test_cumulative_mode_grows_windows():
    log = build_log(*agents("a", "b"),
                    (F, 0, {"follower_id": "a", "followee_id": "b"}),
                    (P, 3, _post("p1", "a", "sun rain")), (P, 4, _post("p2", "b", "sun rain")),
                    (P, 13, _post("p3", "a", "moon")), (P, 14, _post("p4", "b", "tide")),
                    (P, 30, _post("p5", "a", "end")))
    enc = hashed_bow_encoder()
    win = neighbor_convergence(log, enc, bucket_ms=10, min_bucket_size=1)["no_backstory"]
    cum = neighbor_convergence(log, enc, bucket_ms=10, mode="cumulative", min_bucket_size=1)["no_backstory"]
    assert win.means()[0] == pytest.approx(1.0) and win.means()[1] == pytest.approx(0.0)
    assert 0.0 < cum.means()[1] < 1.0
