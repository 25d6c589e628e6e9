"""Toxicity scoring, toxic-agent profiles, engagement and toxic homophily."""

from __future__ import annotations

import logging
import re
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Protocol, Sequence

import numpy as np

from .adapters import JsonlCache, bounded_map, env_transport, with_retries
from .core import PostRecord, lexical_features
from .errors import (
    DegenerateGroup, EmptyClass, EmptyLexicon, EmptySet, NoEligibleAgents, NoPosts, NoToxicPosts,
)
from .graph import FollowGraph, assortativity, group_ratios
from .stats import StatResult, welch_t
from .text import content_hash, load_word_list

logger = logging.getLogger(__name__)

TOXIC_THRESHOLD = 0.5
DEFAULT_THRESHOLDS = (1, 4, 8)
_WORD = re.compile(r"\w+", re.UNICODE)


class ScorerPort(Protocol):
    def score(self, text: str) -> float: ...


class LexiconScorer:
    """``min(1, hits / max(1, words) * 4)`` over lowercase word tokens."""

    def __init__(self, lexicon: Iterable[str]):
        self.lexicon = frozenset(w.lower() for w in lexicon)
        if not self.lexicon:
            raise EmptyLexicon("toxicity lexicon is empty")

    def score(self, text: str) -> float:
        words = _WORD.findall(text.lower())
        hits = sum(w in self.lexicon for w in words)
        return min(1.0, hits / max(1, len(words)) * 4)

    def score_many(self, texts: Sequence[str]) -> list[float]:
        return [self.score(t) for t in texts]


def lexicon_scorer(lexicon_file=None) -> LexiconScorer:
    """Scorer from a one-token-per-line file; ``None`` uses the bundled lexicon."""
    return LexiconScorer(load_word_list(lexicon_file, "toxic_lexicon.txt"))


class RemoteScorer:
    """HTTP scorer: POST ``{"texts": [...]}`` -> ``{"scores": [...]}``.

    Batches of at most 16 texts, exponential-backoff retries, and a
    content-hash -> score cache persisted one record per line.
    """

    batch_size = 16

    def __init__(self, url: str | None = None, cache_path=None,
                 transport: Callable[[dict], dict] | None = None,
                 token_env: str = "LLMSOCIAL_SCORER_TOKEN", max_in_flight: int = 4,
                 retries: int = 3, base_delay: float = 0.5):
        if transport is None:
            if url is None:
                raise ValueError("RemoteScorer needs a url or a transport")
            transport = env_transport(url, token_env)
        self.transport = transport
        self.cache = JsonlCache(cache_path)
        self.max_in_flight = max_in_flight
        self.retries = retries
        self.base_delay = base_delay

    def _fetch(self, batch: list[tuple[str, str]]) -> list[tuple[str, float]]:
        resp = with_retries(lambda: self.transport({"texts": [t for _, t in batch]}),
                            self.retries, self.base_delay)
        scores = resp["scores"]
        if len(scores) != len(batch):
            raise ValueError("scorer returned a different number of scores")
        out = []
        for (k, _), s in zip(batch, scores):
            s = float(s)
            if not 0.0 <= s <= 1.0:
                raise ValueError(f"score {s} outside [0, 1]")
            out.append((k, s))
        return out

    def score_many(self, texts: Sequence[str]) -> list[float]:
        keys = [content_hash(t) for t in texts]
        todo = sorted({k: t for k, t in zip(keys, texts) if k not in self.cache}.items())
        batches = [todo[i: i + self.batch_size] for i in range(0, len(todo), self.batch_size)]
        for result in bounded_map(self._fetch, batches, self.max_in_flight):
            self.cache.put_many(result)
        return [float(self.cache.get(k)) for k in keys]

    def score(self, text: str) -> float:
        return self.score_many([text])[0]


def score_texts(scorer: ScorerPort, texts: Sequence[str]) -> list[float]:
    if hasattr(scorer, "score_many"):
        return list(scorer.score_many(texts))
    return [scorer.score(t) for t in texts]


def label_toxic(post: PostRecord | str, scorer: ScorerPort, threshold: float = TOXIC_THRESHOLD) -> bool:
    text = post if isinstance(post, str) else post.text
    return scorer.score(text) > threshold


def label_toxic_many(posts: Sequence[PostRecord | str], scorer: ScorerPort,
                     threshold: float = TOXIC_THRESHOLD) -> list[bool]:
    texts = [p if isinstance(p, str) else p.text for p in posts]
    return [s > threshold for s in score_texts(scorer, texts)]


# ---------------------------------------------------------------------------
# Profiles

@dataclass
class ToxicityProfile:
    agent_id: str
    n_toxic: int
    n_posts: int
    mean_toxicity: float
    is_toxic_at: dict[int, bool] = field(default_factory=dict)
    toxic_posts: dict[str, bool] = field(default_factory=dict)


def build_profiles(posts: Iterable[PostRecord], scorer: ScorerPort, agents: Iterable[str] = (),
                   thresholds: Sequence[int] = DEFAULT_THRESHOLDS,
                   threshold: float = TOXIC_THRESHOLD) -> dict[str, ToxicityProfile]:
    """One profile per author (plus zero-post profiles for extra ``agents``)."""
    posts = list(posts)
    scores = score_texts(scorer, [p.text for p in posts])
    per = defaultdict(list)
    for p, s in zip(posts, scores):
        per[p.author_id].append((p.post_id, s))
    for a in agents:
        per.setdefault(a, [])
    out = {}
    for a in sorted(per):
        rows = per[a]
        flags = {pid: s > threshold for pid, s in rows}
        n_toxic = sum(flags.values())
        mean = float(np.mean([s for _, s in rows])) if rows else 0.0
        out[a] = ToxicityProfile(a, n_toxic, len(rows), mean,
                                 {k: n_toxic >= k for k in thresholds}, flags)
    return out


def log2_bin(count: int) -> int:
    """Bin index for a positive count: 1 -> 0, 2-3 -> 1, 4-7 -> 2, ..."""
    return count.bit_length() - 1


def bin_label(b: int) -> str:
    lo, hi = 2 ** b, 2 ** (b + 1) - 1
    return str(lo) if lo == hi else f"{lo}-{hi}"


def toxicity_concentration(profiles: Mapping[str, ToxicityProfile] | Iterable[ToxicityProfile]) -> dict[str, float]:
    """Share of all toxic posts contributed by agents in each log2 bin of toxic-post count."""
    profs = profiles.values() if isinstance(profiles, Mapping) else profiles
    per_bin = defaultdict(int)
    for p in profs:
        if p.n_toxic > 0:
            per_bin[log2_bin(p.n_toxic)] += p.n_toxic
    total = sum(per_bin.values())
    if total == 0:
        raise NoToxicPosts("no toxic posts to distribute")
    return {bin_label(b): per_bin[b] / total for b in sorted(per_bin)}


# ---------------------------------------------------------------------------
# Engagement

def engagement_score(post: PostRecord) -> int:
    return post.likes + post.views + post.comments


def agent_mean_engagement(posts: Sequence[PostRecord]) -> float:
    if not posts:
        raise NoPosts("agent has no posts")
    return float(np.mean([engagement_score(p) for p in posts]))


@dataclass
class EngagementGap:
    frac_agents_higher_on_nontoxic: float
    frac_agents_higher_on_toxic: float
    frac_equal: float
    per_agent_gaps: dict[str, float]


def toxic_engagement_gap(profiles: Mapping[str, ToxicityProfile], posts: Iterable[PostRecord]) -> EngagementGap:
    """Per agent: mean engagement on toxic posts minus mean on non-toxic posts."""
    by_author = defaultdict(list)
    for p in posts:
        by_author[p.author_id].append(p)
    gaps = {}
    for a in sorted(profiles):
        flags = profiles[a].toxic_posts
        tox = [engagement_score(p) for p in by_author.get(a, []) if flags.get(p.post_id)]
        non = [engagement_score(p) for p in by_author.get(a, []) if p.post_id in flags and not flags[p.post_id]]
        if tox and non:
            gaps[a] = float(np.mean(tox) - np.mean(non))
    if not gaps:
        raise NoEligibleAgents("no agent has both toxic and non-toxic posts")
    n = len(gaps)
    neg = sum(g < 0 for g in gaps.values())
    pos = sum(g > 0 for g in gaps.values())
    return EngagementGap(neg / n, pos / n, (n - neg - pos) / n, gaps)


def compare_engagement_by_toxicity(profiles: Mapping[str, ToxicityProfile], posts: Iterable[PostRecord],
                                   per: str = "agent") -> StatResult:
    """Welch t of engagement, toxic vs non-toxic agents (``per="agent"`` uses
    per-agent means, ``per="post"`` uses every post)."""
    by_author = defaultdict(list)
    for p in posts:
        by_author[p.author_id].append(p)
    tox, non = [], []
    for a, prof in profiles.items():
        ps = by_author.get(a, [])
        if not ps:
            continue
        vals = [agent_mean_engagement(ps)] if per == "agent" else [engagement_score(p) for p in ps]
        (tox if prof.n_toxic >= 1 else non).extend(vals)
    return welch_t(tox, non)


# ---------------------------------------------------------------------------
# Network comparisons

@dataclass
class GroupMixing:
    assortativity: float
    cross_group_ratio: float
    same_group_ratio: float
    n_nodes: int
    n_edges: int


def toxic_homophily(g: FollowGraph, profiles: Mapping[str, ToxicityProfile],
                    thresholds: Sequence[int] = DEFAULT_THRESHOLDS) -> dict[int, GroupMixing]:
    """At threshold k compare agents with no toxic post to agents with at
    least k, on the subgraph induced by those two groups."""
    missing = [n for n in g.nodes if n not in profiles]
    if missing:
        raise KeyError(f"unprofiled nodes: {missing[:5]}")
    out = {}
    for k in thresholds:
        labels = {}
        for n in g.nodes:
            c = profiles[n].n_toxic
            if c == 0:
                labels[n] = "nontoxic"
            elif c >= k:
                labels[n] = "toxic"
        if not any(v == "toxic" for v in labels.values()) or not any(v == "nontoxic" for v in labels.values()):
            raise EmptyClass(f"one side is empty at threshold {k}")
        sub = g.subgraph(labels)
        cross, same = group_ratios(sub, labels)
        out[k] = GroupMixing(assortativity(sub, labels), cross, same, len(sub), sub.n_edges())
    return out


# ---------------------------------------------------------------------------
# Linguistic comparison

FEATURES = ("hashtags", "mentions", "words", "chars", "emojis", "has_emoji")


@dataclass
class FeatureComparison:
    mean_toxic: float
    mean_nontoxic: float
    delta: float
    welch_t: StatResult | None


def linguistic_comparison(toxic_posts: Sequence, nontoxic_posts: Sequence) -> dict[str, FeatureComparison]:
    """Per lexical feature: group means, difference and Welch t (``None``
    when a group is too small or constant)."""
    if not toxic_posts or not nontoxic_posts:
        raise EmptySet("both post sets must be non-empty")
    ft = [lexical_features(p) for p in toxic_posts]
    fn = [lexical_features(p) for p in nontoxic_posts]
    out = {}
    for name in FEATURES:
        a = [float(getattr(f, name)) for f in ft]
        b = [float(getattr(f, name)) for f in fn]
        try:
            t = welch_t(a, b)
        except DegenerateGroup:
            t = None
        ma, mb = float(np.mean(a)), float(np.mean(b))
        out[name] = FeatureComparison(ma, mb, ma - mb, t)
    return out
