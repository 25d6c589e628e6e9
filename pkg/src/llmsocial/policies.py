"""Agent policies: scripted generators with planted effects, and an LLM adapter.

The scripted policy is the ground truth for validating the analyses.  Its
three knobs each plant one effect:

* ``follow_homophily`` (beta) -- follow candidates must have cosine
  similarity of at least ``beta * sim_threshold`` to the agent's own posts.
* ``copy_rate`` (gamma) -- each token of a new post is copied from a
  followee's recent post with probability ``gamma`` (optionally ramped in
  with the age of the follow edge).
* ``toxicity_rate`` -- a post carries one lexicon insult with this probability.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .adapters import env_transport, with_retries
from .core import AgentRecord
from .errors import TransportError
from .sim import (
    Action, Dislike, FetchTagged, Follow, Like, Memory, Observation, Post, Reply,
    SearchPosts, SearchWeb, Trending, Unfollow,
)
from .text import HashedBowEncoder, cosine_sim, load_word_list

logger = logging.getLogger(__name__)

ACTION_KINDS = ("post", "like", "dislike", "reply", "follow", "unfollow", "browse")
DEFAULT_WEIGHTS = {"post": 0.5, "like": 0.12, "dislike": 0.03, "reply": 0.05,
                   "follow": 0.2, "unfollow": 0.0, "browse": 0.1}


def topic_vocab(topic: str, size: int = 30) -> list[str]:
    return [f"{topic}{i:02d}" for i in range(size)]


def _check_prob(name, v):
    if not (0.0 <= v <= 1.0):
        raise ValueError(f"{name} must be in [0, 1], got {v}")


class FunctionPolicy:
    """Wrap ``fn(agent, memory, obs, rng) -> Action | None`` as a policy."""

    def __init__(self, fn):
        self.fn = fn

    def decide(self, agent, memory, obs, rng):
        return self.fn(agent, memory, obs, rng)


class ConstantPolicy:
    def __init__(self, action: Action | None):
        self.action = action

    def decide(self, agent, memory, obs, rng):
        return self.action


class ScriptedPolicy:
    def __init__(self, topic_affinities: Mapping[str, float], follow_homophily: float = 0.0,
                 toxicity_rate: float = 0.0, copy_rate: float = 0.0, copy_ramp_ticks: int = 0,
                 vocab: Mapping[str, list[str]] | None = None, post_length: int = 6,
                 action_weights: Mapping[str, float] | None = None, max_following: int = 8,
                 follow_start_tick: int = 0, sim_threshold: float = 0.5,
                 lexicon: list[str] | None = None, backstory_length: int = 12,
                 encoder: HashedBowEncoder | None = None):
        if not topic_affinities:
            raise ValueError("topic_affinities must be non-empty")
        w = np.array([float(v) for v in topic_affinities.values()])
        if not np.all(np.isfinite(w)) or np.any(w < 0) or w.sum() <= 0:
            raise ValueError("topic weights must be finite, non-negative, not all zero")
        for name, v in (("follow_homophily", follow_homophily), ("toxicity_rate", toxicity_rate),
                        ("copy_rate", copy_rate)):
            _check_prob(name, v)
        self.topics = list(topic_affinities)
        self.topic_p = w / w.sum()
        self._topic_cdf = np.cumsum(self.topic_p)
        self.beta = follow_homophily
        self.toxicity_rate = toxicity_rate
        self.copy_rate = copy_rate
        self.copy_ramp_ticks = copy_ramp_ticks
        self.vocab = {t: list(vocab[t]) if vocab and t in vocab else topic_vocab(t) for t in self.topics}
        self.post_length = post_length
        weights = dict(DEFAULT_WEIGHTS)
        weights.update(action_weights or {})
        unknown = set(weights) - set(ACTION_KINDS)
        if unknown:
            raise ValueError(f"unknown action kinds {sorted(unknown)}")
        self.weights = weights
        self.max_following = max_following
        self.follow_start_tick = follow_start_tick
        self.sim_threshold = sim_threshold
        self.lexicon = sorted(lexicon if lexicon is not None else load_word_list(bundled="toxic_lexicon.txt"))
        self.backstory_length = backstory_length
        self.encoder = encoder or HashedBowEncoder(256, 0)

    # -- text generation
    def _topic_token(self, rng) -> str:
        k = min(int(np.searchsorted(self._topic_cdf, rng.random(), side="right")), len(self.topics) - 1)
        topic = self.topics[k]
        words = self.vocab[topic]
        return words[rng.integers(len(words))]

    def backstory(self, rng: np.random.Generator) -> str:
        return " ".join(self._topic_token(rng) for _ in range(self.backstory_length))

    def _copy_prob(self, since: int, obs: Observation) -> float:
        if self.copy_rate == 0:
            return 0.0
        if self.copy_ramp_ticks <= 0:
            return self.copy_rate
        age = (obs.now - since) / (self.copy_ramp_ticks * obs.tick_ms)
        return self.copy_rate * min(1.0, max(0.0, age))

    def compose(self, obs: Observation, rng: np.random.Generator) -> str:
        sources = [f for f in obs.following if f.recent_texts]
        tokens = []
        for _ in range(self.post_length):
            tok = None
            if sources:
                f = sources[rng.integers(len(sources))]
                if rng.random() < self._copy_prob(f.since, obs):
                    words = rng.choice(list(f.recent_texts)).split()
                    if words:
                        tok = words[rng.integers(len(words))]
            tokens.append(tok if tok is not None else self._topic_token(rng))
        if self.toxicity_rate > 0 and rng.random() < self.toxicity_rate:
            tokens[rng.integers(len(tokens))] = self.lexicon[rng.integers(len(self.lexicon))]
        return " ".join(tokens)

    # -- follow rule
    def _own_vector(self, memory: Memory):
        texts = memory.own_posts(10) or ([memory.backstory] if memory.backstory else [])
        if not texts:
            return None
        return np.mean([self.encoder.encode(t) for t in texts], axis=0)

    def follow_candidate(self, agent: AgentRecord, memory: Memory, obs: Observation, rng) -> str | None:
        followed = {f.agent_id for f in obs.following}
        texts: dict[str, list[str]] = {}
        for p in obs.trending + obs.search_results:
            if p.author_id != agent.agent_id and p.author_id not in followed:
                texts.setdefault(p.author_id, []).append(p.text)
        if not texts:
            return None
        cands = sorted(texts)
        if self.beta == 0:
            return cands[rng.integers(len(cands))]
        own = self._own_vector(memory)
        if own is None:
            return None
        threshold = self.beta * self.sim_threshold
        ok = [c for c in cands
              if cosine_sim(own, np.mean([self.encoder.encode(t) for t in texts[c]], axis=0)) >= threshold]
        if not ok:
            return None
        return ok[rng.integers(len(ok))]

    def decide(self, agent: AgentRecord, memory: Memory, obs: Observation, rng: np.random.Generator):
        others = [p for p in obs.trending if p.author_id != agent.agent_id]
        avail = {
            "post": True,
            "like": bool(others), "dislike": bool(others), "reply": bool(others),
            "follow": len(obs.following) < self.max_following and obs.tick >= self.follow_start_tick,
            "unfollow": bool(obs.following),
            "browse": True,
        }
        kinds = [k for k in ACTION_KINDS if avail[k] and self.weights[k] > 0]
        p = np.array([self.weights[k] for k in kinds])
        kind = kinds[rng.choice(len(kinds), p=p / p.sum())]
        if kind == "follow":
            target = self.follow_candidate(agent, memory, obs, rng)
            if target is not None:
                return Follow(target)
            kind = "post"
        if kind == "post":
            return Post(self.compose(obs, rng))
        if kind in ("like", "dislike", "reply"):
            target = others[rng.integers(len(others))].post_id
            if kind == "like":
                return Like(target)
            if kind == "dislike":
                return Dislike(target)
            return Reply(target, self.compose(obs, rng))
        if kind == "unfollow":
            return Unfollow(obs.following[rng.integers(len(obs.following))].agent_id)
        choice = rng.integers(4)
        if choice == 0:
            return SearchPosts(self._topic_token(rng))
        if choice == 1:
            return Trending()
        if choice == 2:
            return FetchTagged()
        return SearchWeb(self.topics[rng.integers(len(self.topics))])


def scripted_policy(params: Mapping) -> ScriptedPolicy:
    return ScriptedPolicy(**params)


# ---------------------------------------------------------------------------
# LLM adapter

BACKSTORY_OPEN = "<|backstory|>"
BACKSTORY_CLOSE = "<|/backstory|>"

GRAMMAR = (
    "POST <text> | SEARCH_WEB <query> | FETCH_TAGGED | SEARCH_POSTS <query> | TRENDING | "
    "LIKE <post_id> | DISLIKE <post_id> | REPLY <post_id> <text> | FOLLOW <agent_id> | UNFOLLOW <agent_id>"
)

_ID = r"(\S+)"
_RULES = [
    (re.compile(r"^POST\s+(.+)$", re.I | re.S), lambda m: Post(m.group(1).strip())),
    (re.compile(r"^SEARCH_WEB\s+(.+)$", re.I), lambda m: SearchWeb(m.group(1).strip())),
    (re.compile(r"^FETCH_TAGGED$", re.I), lambda m: FetchTagged()),
    (re.compile(r"^SEARCH_POSTS\s+(.+)$", re.I), lambda m: SearchPosts(m.group(1).strip())),
    (re.compile(r"^TRENDING$", re.I), lambda m: Trending()),
    (re.compile(rf"^LIKE\s+{_ID}$", re.I), lambda m: Like(m.group(1))),
    (re.compile(rf"^DISLIKE\s+{_ID}$", re.I), lambda m: Dislike(m.group(1))),
    (re.compile(rf"^REPLY\s+{_ID}\s+(.+)$", re.I), lambda m: Reply(m.group(1), m.group(2).strip())),
    (re.compile(rf"^FOLLOW\s+{_ID}$", re.I), lambda m: Follow(m.group(1))),
    (re.compile(rf"^UNFOLLOW\s+{_ID}$", re.I), lambda m: Unfollow(m.group(1))),
]


def parse_action(completion: str) -> Action | None:
    """Parse the first non-empty line of a completion; ``None`` if malformed."""
    if not isinstance(completion, str):
        return None
    line = next((ln.strip() for ln in completion.splitlines() if ln.strip()), "")
    for rx, build in _RULES:
        m = rx.match(line)
        if m:
            return build(m)
    return None


def _fmt_post(p) -> str:
    return f"[{p.post_id}] @{p.author_id} (engagement {p.likes + p.views + p.comments}): {p.text}"


def build_prompt(agent: AgentRecord, memory: Memory, obs: Observation, memory_digest: int = 10) -> str:
    lines = [BACKSTORY_OPEN, memory.backstory or "", BACKSTORY_CLOSE, "", "MEMORY (oldest first):"]
    for kind, value in memory.items()[-memory_digest:]:
        lines.append(f"- {kind}: {value if isinstance(value, str) else ' '.join(map(str, value))}")
    lines.append(f"OBSERVATION (you are {agent.agent_id}, tick {obs.tick}):")
    for title, posts in (("TRENDING", obs.trending), ("TAGGED", obs.tagged), ("SEARCH RESULTS", obs.search_results)):
        lines.append(f"{title}:")
        lines.extend(_fmt_post(p) for p in posts)
    lines.append("FOLLOWING: " + ", ".join(f.agent_id for f in obs.following))
    lines.append("FOLLOWERS: " + ", ".join(obs.followers))
    lines.append("Choose one action and answer with a single line in this grammar:")
    lines.append(GRAMMAR)
    return "\n".join(lines)


def prompt_key(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class FixtureTransport:
    """Replays recorded completions from ``<dir>/<sha256(prompt)>.json``.

    With ``record_from`` set, missing fixtures are fetched from that
    transport and written, which is how fixture directories are built.
    """

    def __init__(self, directory, record_from: Callable[[dict], dict] | None = None):
        self.directory = directory
        self.record_from = record_from

    def __call__(self, body: dict) -> dict:
        path = os.path.join(self.directory, prompt_key(body["prompt"]) + ".json")
        if os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                return json.load(fh)
        if self.record_from is None:
            raise TransportError(f"no recorded completion for prompt {prompt_key(body['prompt'])[:12]}")
        resp = self.record_from(body)
        os.makedirs(self.directory, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(resp, fh, sort_keys=True, ensure_ascii=False)
        return resp


@dataclass
class EndpointConfig:
    url: str | None = None
    token_env: str = "LLMSOCIAL_LLM_TOKEN"
    fixture_dir: str | None = None
    record: bool = False
    max_retries: int = 2
    transport_retries: int = 3
    timeout: float = 60.0
    max_in_flight: int = 4
    transport: Callable[[dict], dict] | None = field(default=None, repr=False)

    def make_transport(self) -> Callable[[dict], dict]:
        if self.transport is not None:
            return self.transport
        live = env_transport(self.url, self.token_env, self.timeout) if self.url else None
        if self.fixture_dir:
            return FixtureTransport(self.fixture_dir, live if self.record else None)
        if live is None:
            raise ValueError("endpoint config needs a url, a fixture_dir or a transport")
        return live


class LLMAdapterPolicy:
    """Prompt an external model and parse its reply into an action.

    Malformed completions are retried ``max_retries`` times; after that the
    agent does nothing this tick and ``counters['parse_fallbacks']`` grows.
    """

    concurrent = True

    def __init__(self, endpoint: EndpointConfig):
        self.endpoint = endpoint
        self.transport = endpoint.make_transport()
        self.counters = {"parse_fallbacks": 0, "llm_calls": 0}
        self._lock = threading.Lock()

    def _call(self, prompt: str) -> str:
        resp = with_retries(lambda: self.transport({"prompt": prompt}), self.endpoint.transport_retries)
        with self._lock:
            self.counters["llm_calls"] += 1
        return resp.get("completion", "") if isinstance(resp, dict) else ""

    def decide(self, agent, memory, obs, rng=None):
        prompt = build_prompt(agent, memory, obs)
        for _ in range(1 + self.endpoint.max_retries):
            action = parse_action(self._call(prompt))
            if action is not None:
                return action
        with self._lock:
            self.counters["parse_fallbacks"] += 1
        logger.info("agent %s: unparseable completions, falling back to no-op", agent.agent_id)
        return None


def llm_adapter_policy(endpoint_config) -> LLMAdapterPolicy:
    if isinstance(endpoint_config, Mapping):
        endpoint_config = EndpointConfig(**endpoint_config)
    return LLMAdapterPolicy(endpoint_config)


# ---------------------------------------------------------------------------
# Config blocks

def _template_backstory(template: str, topics: list[str]):
    def gen(i, rng):
        return template.format(index=i, topics=", ".join(topics))

    return gen


def policy_from_block(block: Mapping, seed: int, index: int):
    """``(policy, backstory_generator)`` for one ``agents`` block of a config file."""
    kind = block.get("policy", "scripted")
    params = dict(block.get("params", {}))
    if kind == "scripted":
        policy = scripted_policy(params)
    elif kind == "constant":
        policy = ConstantPolicy(Post(params.get("text", "hello")))
    elif kind == "llm":
        policy = llm_adapter_policy(params)
    else:
        raise ValueError(f"unknown policy kind {kind!r}")
    spec = block.get("backstory", "topics" if kind == "scripted" else "none")
    if spec == "none" or spec is None:
        gen = None
    elif spec == "topics":
        if not isinstance(policy, ScriptedPolicy):
            raise ValueError("'topics' backstories need a scripted policy")
        gen = lambda i, rng, p=policy: p.backstory(rng)  # noqa: E731
    elif isinstance(spec, Mapping) and "template" in spec:
        gen = _template_backstory(spec["template"], list(spec.get("topics", [])))
    else:
        raise ValueError(f"bad backstory spec {spec!r}")
    return policy, gen
