"""Homophily and social-influence measurements over an event log.

Agent similarity is the cosine between agent encodings (the mean of the
agent's post encodings).  Every measurement that needs randomness takes a
``seed`` and derives one substream per agent, so results do not depend on
iteration order.
"""

from __future__ import annotations

import calendar
import datetime as dt
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .core import EventLog, FOLLOWED, POSTED, COMMENTED, UNFOLLOWED, AGENT_CREATED, Snapshot, snapshot_at
from .errors import (
    InsufficientOutsiders, NoBackstoryAgents, NoCommunities, NoEdges, NoFollowEvents,
)
from .graph import FollowGraph, greedy_modularity_communities
from .stats import spearman
from .text import EncoderPort, cosine_sim, jaccard_sim, precision_sim, preprocess

DAY_MS = 86_400_000
MONTH_MS = 30 * DAY_MS


def _substream(seed: int, idx: int) -> np.random.Generator:
    return np.random.default_rng([seed, idx])


def _mean_vec(texts, enc):
    return np.mean([enc.encode(t) for t in texts], axis=0)


# ---------------------------------------------------------------------------
# Community level

@dataclass
class HomophilyReport:
    per_agent: dict[str, dict[str, float]]
    mean_ratio: float
    n_random: int
    excluded_small_communities: list[list[str]] = field(default_factory=list)
    n_communities: int = 0


def community_homophily(snapshot: Snapshot, enc: EncoderPort, min_community_frac: float = 0.01,
                        n_random: int = 100, seed: int = 0) -> HomophilyReport:
    """E_C (mean similarity to own-community members, self excluded) against
    E_bar_C (mean similarity to ``n_random`` outsiders drawn without replacement).
    """
    authors = sorted(a for a in snapshot.agents if snapshot.posts_by_author.get(a))
    if not authors:
        raise NoCommunities("no agent has posts")
    vec = {a: _mean_vec([snapshot.posts[p].text for p in snapshot.posts_by_author[a]], enc) for a in authors}
    g = FollowGraph.from_snapshot(snapshot).undirected()
    part = greedy_modularity_communities(g)
    n_pop = len(snapshot.agents)
    kept, dropped = [], []
    for comm in part.communities:
        (kept if len(comm) >= min_community_frac * n_pop else dropped).append(comm)
    kept = [[a for a in c if a in vec] for c in kept]
    kept = [c for c in kept if len(c) >= 2]
    if not kept:
        raise NoCommunities("no community survives the size filter")
    community_of = {a: i for i, c in enumerate(kept) for a in c}
    index = {a: i for i, a in enumerate(authors)}
    per_agent = {}
    ratios = []
    for i, comm in enumerate(kept):
        for a in comm:
            outsiders = [b for b in authors if community_of.get(b) != i]
            if len(outsiders) < n_random:
                raise InsufficientOutsiders(
                    f"{a}: {len(outsiders)} agents outside its community, n_random={n_random}")
            rng = _substream(seed, index[a])
            sample = rng.choice(len(outsiders), size=n_random, replace=False)
            e_c = float(np.mean([cosine_sim(vec[a], vec[b]) for b in comm if b != a]))
            e_bar = float(np.mean([cosine_sim(vec[a], vec[outsiders[j]]) for j in sample]))
            per_agent[a] = {"E_C": e_c, "E_bar_C": e_bar, "community": i}
            if e_bar != 0:
                ratios.append(e_c / e_bar)
    if not ratios:
        raise NoCommunities("every agent has zero outsider similarity")
    return HomophilyReport(per_agent, float(np.mean(ratios)), n_random, dropped, len(kept))


# ---------------------------------------------------------------------------
# Individual level, at follow time

@dataclass
class FollowHomophilyReport:
    per_window: dict[int, float]
    overall_mean: float
    n_ratios: int = 0
    per_window_n: dict[int, int] = field(default_factory=dict)


def month_start(ts: int) -> int:
    d = dt.datetime.fromtimestamp(ts / 1000, tz=dt.timezone.utc)
    return calendar.timegm((d.year, d.month, 1, 0, 0, 0)) * 1000


def next_month(ts: int) -> int:
    d = dt.datetime.fromtimestamp(ts / 1000, tz=dt.timezone.utc)
    y, m = (d.year + 1, 1) if d.month == 12 else (d.year, d.month + 1)
    return calendar.timegm((y, m, 1, 0, 0, 0)) * 1000


def _windows(first: int, last: int, window):
    """List of ``(start, end)`` covering ``[first, last]``; ``window`` is
    ``"month"`` or a width in ms."""
    out = []
    if window in ("month", "calendar-month"):
        s = month_start(first)
        while s <= last:
            e = next_month(s)
            out.append((s, e))
            s = e
    else:
        w = int(window)
        if w <= 0:
            raise ValueError("window width must be positive")
        s = (first // w) * w
        while s <= last:
            out.append((s, s + w))
            s += w
    return out


def _authored(log: EventLog):
    """``(ts, author, text)`` for every post and reply, in log order."""
    for e in log:
        if e.kind == POSTED:
            yield e.timestamp, e.payload["author_id"], e.payload["text"]
        elif e.kind == COMMENTED:
            yield e.timestamp, e.payload["actor_id"], e.payload["text"]


def individual_follow_homophily(log: EventLog, enc: EncoderPort, window="month",
                                max_nonneighbor_sample: int = 1000, seed: int = 0) -> FollowHomophilyReport:
    """Per window: S_t (similarity to agents newly followed in the window)
    over S_bar_t (similarity to agents not connected at window end).

    Encodings use only posts authored before the window starts.
    """
    follows = [e for e in log if e.kind == FOLLOWED]
    if not follows:
        raise NoFollowEvents("log has no follow events")
    posts = list(_authored(log))
    agents = sorted(e.payload["agent_id"] for e in log if e.kind == AGENT_CREATED)
    index = {a: i for i, a in enumerate(agents)}
    edge_events = [e for e in log if e.kind in (FOLLOWED, UNFOLLOWED)]

    per_window, per_window_n, all_ratios = {}, {}, []
    for w_i, (start, end) in enumerate(_windows(follows[0].timestamp, follows[-1].timestamp, window)):
        new = defaultdict(set)
        for e in follows:
            if start <= e.timestamp < end:
                new[e.payload["follower_id"]].add(e.payload["followee_id"])
        if not new:
            continue
        texts = defaultdict(list)
        for ts, a, t in posts:
            if ts >= start:
                break
            texts[a].append(t)
        connected = set()
        for e in edge_events:
            if e.timestamp >= end:
                break
            pair = (e.payload["follower_id"], e.payload["followee_id"])
            if e.kind == FOLLOWED:
                connected.add(pair)
            else:
                connected.discard(pair)
        vec = {a: _mean_vec(ts_, enc) for a, ts_ in texts.items()}
        ratios = []
        for a in sorted(new):
            if a not in vec:
                continue
            targets = [b for b in sorted(new[a]) if b in vec]
            others = [b for b in agents if b != a and b in vec
                      and (a, b) not in connected and (b, a) not in connected]
            if not targets or not others:
                continue
            if len(others) > max_nonneighbor_sample:
                rng = np.random.default_rng([seed, w_i, index[a]])
                others = [others[j] for j in sorted(rng.choice(len(others), max_nonneighbor_sample, replace=False))]
            s = np.mean([cosine_sim(vec[a], vec[b]) for b in targets])
            s_bar = np.mean([cosine_sim(vec[a], vec[b]) for b in others])
            if s_bar != 0:
                ratios.append(float(s / s_bar))
        if ratios:
            per_window[start] = float(np.mean(ratios))
            per_window_n[start] = len(ratios)
            all_ratios.extend(ratios)
    if not all_ratios:
        raise NoFollowEvents("no follow event had encodable endpoints before its window")
    return FollowHomophilyReport(per_window, float(np.mean(all_ratios)), len(all_ratios), per_window_n)


# ---------------------------------------------------------------------------
# Similarity over time

@dataclass
class SimilaritySeries:
    measure: str
    buckets: dict[int, dict[str, float]]
    suppressed: list[int] = field(default_factory=list)

    def means(self) -> list[float]:
        return [self.buckets[k]["mean"] for k in sorted(self.buckets)]

    def ratio_last_first(self) -> float:
        m = self.means()
        if not m:
            raise ValueError("series is empty")
        return m[-1] / m[0] if m[0] != 0 else float("inf")

    def trend(self) -> float:
        """Spearman correlation between bucket index and bucket mean."""
        keys = sorted(self.buckets)
        return spearman(keys, [self.buckets[k]["mean"] for k in keys])

    def to_rows(self) -> list[tuple[int, float, int]]:
        return [(k, self.buckets[k]["mean"], int(self.buckets[k]["n"])) for k in sorted(self.buckets)]


def _series(measure, values: dict[int, list[float]], min_bucket_size: int) -> SimilaritySeries:
    buckets, suppressed = {}, []
    for k in sorted(values):
        v = values[k]
        if len(v) >= min_bucket_size:
            buckets[k] = {"mean": float(np.mean(v)), "n": len(v)}
        else:
            suppressed.append(k)
    return SimilaritySeries(measure, buckets, suppressed)


MEASURES = ("jaccard", "precision", "contextual")


def backstory_drift(log: EventLog, measures=MEASURES, bucket_ms: int = MONTH_MS,
                    enc: EncoderPort | None = None, min_bucket_size: int = 5) -> dict[str, SimilaritySeries]:
    """Similarity of each post to its author's backstory, bucketed by the
    post's age relative to the author's creation."""
    measures = tuple(measures)
    bad = set(measures) - set(MEASURES)
    if bad:
        raise ValueError(f"unknown measures {sorted(bad)}")
    if "contextual" in measures and enc is None:
        from .text import hashed_bow_encoder

        enc = hashed_bow_encoder()
    snap = snapshot_at(log)
    backs = {a: r for a, r in snap.agents.items() if r.backstory}
    if not backs:
        raise NoBackstoryAgents("no agent has a backstory")
    b_tokens = {a: preprocess(r.backstory) for a, r in backs.items()}
    b_vec = {a: enc.encode(r.backstory) for a, r in backs.items()} if enc is not None else {}
    values = {m: defaultdict(list) for m in measures}
    for post in snap.posts_in_order():
        a = post.author_id
        if a not in backs:
            continue
        k = (post.created_at - backs[a].created_at) // bucket_ms
        toks = preprocess(post.text)
        for m in measures:
            if m == "jaccard":
                values[m][k].append(jaccard_sim(b_tokens[a], toks))
            elif m == "precision":
                if toks:
                    values[m][k].append(precision_sim(b_tokens[a], toks))
            else:
                values[m][k].append(cosine_sim(b_vec[a], enc.encode(post.text)))
    return {m: _series(m, values[m], min_bucket_size) for m in measures}


def follow_spells(log: EventLog) -> list[tuple[str, str, int, int | None]]:
    """``(follower, followee, start, end)`` for every follow spell; open
    spells have ``end=None``."""
    open_, spells = {}, []
    for e in log:
        if e.kind == FOLLOWED:
            open_[(e.payload["follower_id"], e.payload["followee_id"])] = e.timestamp
        elif e.kind == UNFOLLOWED:
            pair = (e.payload["follower_id"], e.payload["followee_id"])
            spells.append((*pair, open_.pop(pair), e.timestamp))
    spells.extend((a, b, t, None) for (a, b), t in open_.items())
    return sorted(spells, key=lambda s: (s[2], s[0], s[1]))


def neighbor_convergence(log: EventLog, enc: EncoderPort, bucket_ms: int = MONTH_MS, n_buckets: int = 12,
                         mode: str = "windowed", min_bucket_size: int = 5) -> dict[str, SimilaritySeries]:
    """Similarity of connected agents as a function of connection age.

    For each follow spell and each age bucket the spell covers in full, both agents
    are encoded from their posts inside that bucket (``mode="windowed"``) or
    from the spell start to the bucket end (``mode="cumulative"``).  Spells
    are split into cohorts by whether the follower has a backstory.
    """
    if mode not in ("windowed", "cumulative"):
        raise ValueError("mode must be 'windowed' or 'cumulative'")
    spells = follow_spells(log)
    if not spells:
        raise NoEdges("log has no follow edges")
    horizon = log.last_timestamp
    has_back = {e.payload["agent_id"]: bool(e.payload.get("backstory"))
                for e in log if e.kind == AGENT_CREATED}
    by_author = defaultdict(list)
    for ts, a, t in _authored(log):
        by_author[a].append((ts, t))
    times = {a: np.array([ts for ts, _ in v]) for a, v in by_author.items()}

    def window_vec(a, lo, hi):
        if a not in times:
            return None
        i, j = np.searchsorted(times[a], [lo, hi], side="left")
        if i == j:
            return None
        return _mean_vec([t for _, t in by_author[a][i:j]], enc)

    values = {"with_backstory": defaultdict(list), "no_backstory": defaultdict(list)}
    for a, b, start, end in spells:
        stop = horizon + 1 if end is None else end
        cohort = "with_backstory" if has_back.get(a) else "no_backstory"
        for k in range(n_buckets):
            lo = start + k * bucket_ms
            hi = lo + bucket_ms
            if hi > stop:
                break  # only buckets the spell covers completely
            first = start if mode == "cumulative" else lo
            va, vb = window_vec(a, first, hi), window_vec(b, first, hi)
            if va is None or vb is None:
                continue
            values[cohort][k].append(cosine_sim(va, vb))
    return {c: _series(c, v, min_bucket_size) for c, v in values.items()}
