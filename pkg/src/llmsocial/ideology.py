"""Stance toward humans, post ideology labeling and political polarization."""

from __future__ import annotations

import csv
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Iterable, Mapping, Protocol, Sequence

import numpy as np

from .adapters import JsonlCache, bounded_map, env_transport, with_retries
from .core import PostRecord, Snapshot
from .errors import (
    EmptyClass, EmptyKeywordList, EmptySubgraph, NoEligibleNodes, NoLabeledPosts,
    NoRelevantPosts, PersonaFailure,
)
from .graph import FollowGraph, assortativity, group_ratios
from .text import content_hash, load_word_list

IRRELEVANT = "irrelevant"
STANCE_VALUES = {"positive": 1, "negative": -1, "neutral": 0}
PERSONAS = ("liberal", "conservative", "moderate")
IDEOLOGY_LABELS = ("liberal", "conservative", "moderate", "unclear")
IDEOLOGY_SIGN = {"liberal": 1, "conservative": -1, "moderate": 0}
NEEDS_ADJUDICATION = "needs_adjudication"


def load_prompt(name: str) -> str:
    return resources.files("llmsocial").joinpath("data", "prompts", f"{name}.txt").read_text("utf-8")


def _first_label(answer: str, allowed: Sequence[str]) -> str | None:
    """Map a free-text answer such as ``"b) Conservative"`` onto a label."""
    low = answer.strip().lower()
    low = re.sub(r"^[a-d]\)\s*", "", low)
    for lab in allowed:
        if low.startswith(lab):
            return lab
    return None


# ---------------------------------------------------------------------------
# Ports

class StancePort(Protocol):
    def stance(self, text: str) -> int | str: ...


class PersonaPort(Protocol):
    def label(self, text: str, persona: str) -> str: ...


_HUMAN = re.compile(r"\b(humans?|humanity|humankind|people|mankind)\b", re.I)
_POS = frozenset("love admire trust help kind amazing wonderful inspiring respect cherish protect".split())
_NEG = frozenset("hate destroy inferior weak greedy selfish doomed replace obsolete foolish cruel".split())


class LexiconStance:
    """Offline stance-toward-humans stub: a text must mention humans to be
    relevant; polarity comes from small positive and negative word lists."""

    def stance(self, text: str) -> int | str:
        if not _HUMAN.search(text):
            return IRRELEVANT
        words = re.findall(r"\w+", text.lower())
        s = sum(w in _POS for w in words) - sum(w in _NEG for w in words)
        return int(np.sign(s))


_LIB = frozenset("equality climate healthcare diversity union progressive welfare refugees inclusion".split())
_CON = frozenset("tradition border taxes freedom liberty faith family security sovereignty".split())


class LexiconPersona:
    """Offline persona labeler.  Each persona shifts the decision offset, so
    borderline texts lean toward the persona's own side."""

    offsets = {"liberal": 0.2, "conservative": -0.2, "moderate": 0.0}

    def label(self, text: str, persona: str) -> str:
        if persona not in self.offsets:
            raise PersonaFailure(f"unknown persona {persona!r}")
        words = re.findall(r"\w+", text.lower())
        lib = sum(w in _LIB for w in words)
        con = sum(w in _CON for w in words)
        if lib + con == 0:
            return "unclear"
        d = (lib - con) / (lib + con) + self.offsets[persona]
        if d > 1 / 3:
            return "liberal"
        if d < -1 / 3:
            return "conservative"
        return "moderate"


class RemoteLabeler:
    """HTTP adapter for both ports: POST ``{text, persona, prompt}`` -> ``{label}``.

    Answers are cached by ``sha256(persona + text)``.
    """

    def __init__(self, url: str | None = None, cache_path=None, transport: Callable[[dict], dict] | None = None,
                 token_env: str = "LLMSOCIAL_LABELER_TOKEN", retries: int = 3):
        if transport is None:
            if url is None:
                raise ValueError("RemoteLabeler needs a url or a transport")
            transport = env_transport(url, token_env)
        self.transport = transport
        self.cache = JsonlCache(cache_path)
        self.retries = retries

    def _ask(self, text: str, persona: str | None, prompt: str) -> str:
        key = content_hash(f"{persona or ''}\x00{text}")
        hit = self.cache.get(key)
        if hit is None:
            body = {"text": text, "persona": persona, "prompt": prompt}
            hit = with_retries(lambda: self.transport(body), self.retries)["label"]
            self.cache.put_many([(key, hit)])
        return hit

    def stance(self, text: str) -> int | str:
        answer = self._ask(text, None, load_prompt("stance_humans").format(text=text))
        lab = _first_label(answer, ("positive", "negative", "neutral", "irrelevant"))
        if lab is None:
            raise PersonaFailure(f"unparseable stance answer {answer!r}")
        return IRRELEVANT if lab == IRRELEVANT else STANCE_VALUES[lab]

    def label(self, text: str, persona: str) -> str:
        prompt = load_prompt("ideology_persona").format(ideology=persona, text=text)
        lab = _first_label(self._ask(text, persona, prompt), IDEOLOGY_LABELS)
        if lab is None:
            raise PersonaFailure(f"unparseable ideology answer from {persona}")
        return lab


# ---------------------------------------------------------------------------
# Leaning toward humans

@dataclass(frozen=True)
class LeaningScore:
    agent_id: str
    pi: float
    n_relevant_posts: int
    counts: Mapping[str, int] = field(default_factory=dict)


def human_leaning(posts: Iterable[PostRecord | str], stance_port: StancePort, agent_id: str = "") -> LeaningScore:
    """Mean stance over posts not labeled irrelevant."""
    values, counts = [], Counter()
    for p in posts:
        s = stance_port.stance(p if isinstance(p, str) else p.text)
        if s == IRRELEVANT:
            counts[IRRELEVANT] += 1
            continue
        if s not in (1, -1, 0):
            raise ValueError(f"stance must be +1, -1, 0 or irrelevant, got {s!r}")
        counts[{1: "positive", -1: "negative", 0: "neutral"}[s]] += 1
        values.append(s)
    if not values:
        raise NoRelevantPosts(f"agent {agent_id!r} has no relevant posts")
    return LeaningScore(agent_id, sum(values) / len(values), len(values), dict(counts))


@dataclass
class LeaningDistribution:
    edges: np.ndarray
    counts: np.ndarray
    mass_at_poles: float


def leaning_distribution(scores: Sequence[float], n_bins: int = 21, pole: float = 0.8) -> LeaningDistribution:
    vals = np.asarray([s.pi if isinstance(s, LeaningScore) else s for s in scores], dtype=float)
    if vals.size == 0:
        raise ValueError("need at least one score")
    counts, edges = np.histogram(vals, bins=n_bins, range=(-1.0, 1.0))
    return LeaningDistribution(edges, counts, float(np.mean(np.abs(vals) >= pole)))


# ---------------------------------------------------------------------------
# Political posts and ideology

@dataclass
class FilterResult:
    posts: list[PostRecord]
    matches: dict[str, list[str]]


def load_keywords(keyword_file=None) -> frozenset[str]:
    return load_word_list(keyword_file, "political_keywords.txt")


def political_filter(posts: Iterable[PostRecord], keyword_file=None, keywords: Iterable[str] | None = None) -> FilterResult:
    """Posts containing at least one keyword as a whole word, case-insensitively."""
    kws = sorted(frozenset(k.lower() for k in keywords) if keywords is not None else load_keywords(keyword_file))
    if not kws:
        raise EmptyKeywordList("keyword list is empty")
    rx = re.compile(r"(?<!\w)(" + "|".join(re.escape(k) for k in sorted(kws, key=len, reverse=True)) + r")(?!\w)",
                    re.I)
    kept, matches = [], {}
    for p in posts:
        found = sorted({m.lower() for m in rx.findall(p.text)})
        if found:
            kept.append(p)
            matches[p.post_id] = found
    return FilterResult(kept, matches)


@dataclass(frozen=True)
class IdeologyLabel:
    post_id: str
    per_persona: Mapping[str, str | None]
    final: str
    reason: str = ""


def majority_vote(per_persona: Mapping[str, str | None]) -> tuple[str, str]:
    """``(final, reason)``; ``final`` is the label at least two personas gave."""
    missing = [p for p in PERSONAS if per_persona.get(p) is None]
    if missing:
        return NEEDS_ADJUDICATION, "missing answer from " + ",".join(missing)
    label, n = Counter(per_persona[p] for p in PERSONAS).most_common(1)[0]
    if n >= 2:
        return label, ""
    return NEEDS_ADJUDICATION, "no majority"


def majority_vote_label(post: PostRecord, persona_port: PersonaPort) -> IdeologyLabel:
    answers = {}
    for persona in PERSONAS:
        try:
            lab = persona_port.label(post.text, persona)
            answers[persona] = lab if lab in IDEOLOGY_LABELS else None
        except PersonaFailure:
            answers[persona] = None
    final, reason = majority_vote(answers)
    return IdeologyLabel(post.post_id, answers, final, reason)


def label_posts(posts: Sequence[PostRecord], persona_port: PersonaPort, max_in_flight: int = 4) -> list[IdeologyLabel]:
    return bounded_map(lambda p: majority_vote_label(p, persona_port), list(posts), max_in_flight)


def export_adjudication_queue(labels: Iterable[IdeologyLabel], posts: Mapping[str, PostRecord], path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["post_id", "text", *PERSONAS, "reason"])
        for lab in labels:
            if lab.final == NEEDS_ADJUDICATION:
                w.writerow([lab.post_id, posts[lab.post_id].text,
                            *[lab.per_persona.get(p) or "" for p in PERSONAS], lab.reason])
                n += 1
    return n


@dataclass(frozen=True)
class IdeologyScore:
    agent_id: str
    psi: float
    n_political_posts: int


def ideology_score(labels: Iterable[str], agent_id: str = "") -> IdeologyScore:
    """Mean of +1 (liberal), -1 (conservative), 0 (moderate); other labels skipped."""
    signs = [IDEOLOGY_SIGN[lab] for lab in labels if lab in IDEOLOGY_SIGN]
    if not signs:
        raise NoLabeledPosts(f"agent {agent_id!r} has no labeled political posts")
    return IdeologyScore(agent_id, sum(signs) / len(signs), len(signs))


def ideological_subgraph(source: Snapshot | FollowGraph, scores: Mapping[str, IdeologyScore],
                         min_posts: int = 5, min_abs_score: float = 0.25) -> tuple[FollowGraph, dict[str, str]]:
    """Induced follow subgraph on agents with ``>= min_posts`` labeled posts
    and ``|psi| >= min_abs_score``; labels are liberal (psi > 0) or conservative."""
    g = source if isinstance(source, FollowGraph) else FollowGraph.from_snapshot(source)
    labels = {
        a: "liberal" if s.psi > 0 else "conservative"
        for a, s in scores.items()
        if s.n_political_posts >= min_posts and abs(s.psi) >= min_abs_score and a in g.succ
    }
    if not labels:
        raise EmptySubgraph("no agent qualifies for the ideological subgraph")
    return g.subgraph(labels), labels


# ---------------------------------------------------------------------------
# Polarization

@dataclass(frozen=True)
class PolarizationReport:
    cross_group_ratio: float
    same_group_ratio: float
    polarization: float
    assortativity: float
    n_nodes: int
    n_edges: int


def polarization(g: FollowGraph, labels: Mapping[str, str], direction: str = "out") -> float:
    """Mean over nodes with at least one neighbor of ``2 |f - 0.5|``, where
    ``f`` is the share of followees (``"out"``) or followers (``"in"``)
    carrying the first label in sorted order."""
    cats = sorted(set(labels[n] for n in g.nodes))
    if len(cats) != 2:
        raise EmptyClass(f"need exactly two labels, found {cats}")
    nbrs = g.succ if direction == "out" else g.pred
    vals = []
    for n in g.nodes:
        nb = nbrs[n]
        if nb:
            # 2|f - 1/2| as |2k - n| / n keeps label swaps exact
            k = sum(labels[m] == cats[0] for m in nb)
            vals.append(abs(2 * k - len(nb)) / len(nb))
    if not vals:
        raise NoEligibleNodes("no node has a neighbor")
    return float(np.mean(vals))


def polarization_suite(g: FollowGraph, labels: Mapping[str, str], weighting: str = "nodes",
                       direction: str = "out") -> PolarizationReport:
    if g.n_edges() == 0:
        raise EmptyClass("graph has no edges")
    cross, same = group_ratios(g, labels, weighting)
    return PolarizationReport(cross, same, polarization(g, labels, direction),
                              assortativity(g, labels), len(g), g.n_edges())
