"""Deterministic discrete-tick simulator of an agents-only social platform.

Each tick visits every active agent once, in an order drawn from the run
seed.  The agent's policy sees its memory and an :class:`Observation` built
from the current platform state and returns one :class:`Action`; the engine
turns that action into events on the :class:`~llmsocial.core.EventLog`.

Randomness is split into independent streams (one for visit order, one per
agent) derived from the run seed, so identical ``(config, seed)`` always
produces a byte-identical log.
"""

from __future__ import annotations

import heapq
import json
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol, Union

import numpy as np

from . import core
from .adapters import bounded_map
from .core import AgentRecord, EventLog, PostRecord, Snapshot, append_event, make_event
from .errors import PolicyError

logger = logging.getLogger(__name__)

DAY_MS = 86_400_000


# ---------------------------------------------------------------------------
# Actions

@dataclass(frozen=True)
class Post:
    text: str


@dataclass(frozen=True)
class SearchWeb:
    query: str


@dataclass(frozen=True)
class FetchTagged:
    pass


@dataclass(frozen=True)
class SearchPosts:
    query: str


@dataclass(frozen=True)
class Trending:
    pass


@dataclass(frozen=True)
class Like:
    post_id: str


@dataclass(frozen=True)
class Dislike:
    post_id: str


@dataclass(frozen=True)
class Reply:
    post_id: str
    text: str


@dataclass(frozen=True)
class Follow:
    agent_id: str


@dataclass(frozen=True)
class Unfollow:
    agent_id: str


Action = Union[Post, SearchWeb, FetchTagged, SearchPosts, Trending, Like, Dislike, Reply, Follow, Unfollow]
ACTION_TYPES = (Post, SearchWeb, FetchTagged, SearchPosts, Trending, Like, Dislike, Reply, Follow, Unfollow)


# ---------------------------------------------------------------------------
# Memory and observations

class Memory:
    """Ring buffer of the agent's last ``K`` events plus a fixed backstory slot."""

    def __init__(self, backstory: str | None = None, K: int = 50):
        self.backstory = backstory
        self.K = K
        self._items: deque = deque(maxlen=K)
        self.last_query: str | None = None

    def add(self, kind: str, value: Any) -> None:
        self._items.append((kind, value))

    def items(self) -> list[tuple[str, Any]]:
        return list(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def own_posts(self, n: int | None = None) -> list[str]:
        texts = [v for k, v in self._items if k == "posted"]
        return texts if n is None else texts[-n:]


@dataclass(frozen=True)
class FolloweeSummary:
    agent_id: str
    recent_texts: tuple[str, ...]
    since: int = 0  # when the current follow edge was created


@dataclass(frozen=True)
class Observation:
    now: int
    tick: int
    tick_ms: int
    agent_created_at: int
    trending: tuple[PostRecord, ...] = ()
    tagged: tuple[PostRecord, ...] = ()
    search_results: tuple[PostRecord, ...] = ()
    followers: tuple[str, ...] = ()
    following: tuple[FolloweeSummary, ...] = ()

    @property
    def age_ticks(self) -> int:
        return (self.now - self.agent_created_at) // self.tick_ms if self.tick_ms else 0


def engagement(post: PostRecord) -> int:
    return post.likes + post.views + post.comments


def build_observation(snapshot: Snapshot, agent_id: str, window: int, top_n: int,
                      query: str | None = None, now: int | None = None,
                      tick: int = 0, tick_ms: int = DAY_MS, recent_k: int = 3) -> Observation:
    """Observation for ``agent_id`` derived only from ``snapshot``.

    trending: top ``top_n`` posts created in ``[now - window, now]`` by
    engagement (ties: newer first, then post id).  tagged: the ``top_n``
    most recent posts mentioning ``@agent_id``.  search_results: the
    ``top_n`` most recent posts containing ``query`` (case-insensitive).
    """
    if agent_id not in snapshot.agents:
        raise KeyError(agent_id)
    if now is None:
        now = snapshot.at if snapshot.at is not None else 0
    recent = snapshot.posts_since(now - window)
    trending = heapq.nsmallest(
        top_n, recent, key=lambda p: (-engagement(p), -p.created_at, p.post_id)
    ) if top_n > 0 else []
    tagged_ids = snapshot.mentions.get(agent_id, [])
    tagged = [snapshot.posts[pid] for pid in tagged_ids[::-1][:top_n]]
    results: list[PostRecord] = []
    if query:
        q = query.lower()
        for post in snapshot.iter_posts_newest_first():
            if q in post.text.lower():
                results.append(post)
                if len(results) >= top_n:
                    break
    following = []
    for fid in snapshot.following(agent_id):
        ids = snapshot.posts_by_author.get(fid, [])[-recent_k:]
        following.append(FolloweeSummary(fid, tuple(snapshot.posts[i].text for i in ids),
                                         snapshot.follow_graph[(agent_id, fid)]))
    return Observation(
        now=now, tick=tick, tick_ms=tick_ms,
        agent_created_at=snapshot.agents[agent_id].created_at,
        trending=tuple(trending), tagged=tuple(tagged), search_results=tuple(results),
        followers=tuple(snapshot.followers(agent_id)), following=tuple(following),
    )


class PolicyPort(Protocol):
    def decide(self, agent: AgentRecord, memory: Memory, obs: Observation,
               rng: np.random.Generator) -> Action | None: ...


# ---------------------------------------------------------------------------
# Configuration

@dataclass
class SimConfig:
    n_agents: int
    ticks: int
    seed: int
    policy_assignment: Any = None  # PolicyPort or callable(index) -> PolicyPort
    backstory_generator: Callable[[int, np.random.Generator], str | None] | None = None
    tick_ms: int = DAY_MS
    window_ticks: int = 3
    top_n: int = 20
    memory_size: int = 50
    creation_tick: Callable[[int], int] | None = None
    web_documents: tuple[str, ...] = ()
    max_in_flight: int = 4

    def policy_for(self, i: int) -> PolicyPort:
        pa = self.policy_assignment
        if pa is None:
            raise ValueError("SimConfig.policy_assignment is not set")
        if hasattr(pa, "decide"):
            return pa
        return pa(i)


def agent_id_for(i: int) -> str:
    return f"a{i:05d}"


def _stream(seed: int, *path: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *path]))


# ---------------------------------------------------------------------------
# Engine

class Simulation:
    """One simulation run.  ``run()`` returns the event log."""

    def __init__(self, config: SimConfig):
        if config.n_agents < 1:
            raise ValueError("n_agents must be >= 1")
        if config.ticks < 0:
            raise ValueError("ticks must be >= 0")
        self.config = config
        self.log = EventLog()
        self.snapshot = Snapshot(at=0)
        self.memories: dict[str, Memory] = {}
        self.policies: dict[str, PolicyPort] = {}
        self.rngs: dict[str, np.random.Generator] = {}
        self.active: list[str] = []
        self._n_posts = 0
        self.metrics = {"decisions": 0, "noops": 0, "policy_errors": 0, "skipped": 0}

    def _emit(self, kind: str, ts: int, **payload) -> core.PlatformEvent:
        append_event(self.log, make_event(kind, ts, **payload))
        e = self.log[-1]
        self.snapshot.apply(e)
        self.snapshot.at = ts
        return e

    def _next_post_id(self) -> str:
        self._n_posts += 1
        return f"p{self._n_posts:07d}"

    def _create_agents(self, tick: int, ts: int) -> None:
        cfg = self.config
        for i in range(cfg.n_agents):
            created = cfg.creation_tick(i) if cfg.creation_tick else 0
            if created != tick:
                continue
            aid = agent_id_for(i)
            rng = _stream(cfg.seed, 1, i)
            backstory = cfg.backstory_generator(i, rng) if cfg.backstory_generator else None
            self._emit(core.AGENT_CREATED, ts, agent_id=aid, display_name=f"agent{i}", backstory=backstory)
            self.memories[aid] = Memory(backstory, cfg.memory_size)
            self.policies[aid] = cfg.policy_for(i)
            self.rngs[aid] = rng
            self.active.append(aid)

    def _observe(self, aid: str, tick: int, ts: int) -> Observation:
        cfg = self.config
        return build_observation(
            self.snapshot, aid, cfg.window_ticks * cfg.tick_ms, cfg.top_n,
            query=self.memories[aid].last_query, now=ts, tick=tick, tick_ms=cfg.tick_ms,
        )

    def run(self) -> EventLog:
        cfg = self.config
        order_rng = _stream(cfg.seed, 0)
        for tick in range(cfg.ticks):
            ts = tick * cfg.tick_ms
            self._create_agents(tick, ts)
            if not self.active:
                continue
            order = [self.active[i] for i in order_rng.permutation(len(self.active))]
            concurrent = [a for a in order if getattr(self.policies[a], "concurrent", False)]
            prefetched = {}
            if concurrent:
                # external adapters: decide on start-of-tick observations in
                # parallel, then apply in the seeded order
                reqs = [(a, self._observe(a, tick, ts)) for a in concurrent]
                decisions = bounded_map(
                    lambda r: self.policies[r[0]].decide(
                        self.snapshot.agents[r[0]], self.memories[r[0]], r[1], self.rngs[r[0]]),
                    reqs, cfg.max_in_flight,
                )
                prefetched = dict(zip(concurrent, decisions))
            for aid in order:
                if aid in prefetched:
                    action = prefetched[aid]
                else:
                    obs = self._observe(aid, tick, ts)
                    action = self.policies[aid].decide(
                        self.snapshot.agents[aid], self.memories[aid], obs, self.rngs[aid])
                self.metrics["decisions"] += 1
                self._execute(aid, action, ts)
        self.log.metrics.update(self.metrics)
        self._collect_policy_counters()
        return self.log

    def _collect_policy_counters(self) -> None:
        seen = set()
        for pol in self.policies.values():
            if id(pol) in seen:
                continue
            seen.add(id(pol))
            for k, v in getattr(pol, "counters", {}).items():
                self.log.metrics[k] = self.log.metrics.get(k, 0) + v

    def _execute(self, aid: str, action: Action | None, ts: int) -> None:
        mem = self.memories[aid]
        snap = self.snapshot
        if action is None:
            self.metrics["noops"] += 1
            return
        if not isinstance(action, ACTION_TYPES):
            self.metrics["policy_errors"] += 1
            logger.warning("agent %s returned a non-action %r", aid, action)
            return
        try:
            if isinstance(action, Post):
                pid = self._next_post_id()
                self._emit(core.POSTED, ts, post_id=pid, author_id=aid, text=action.text)
                mem.add("posted", action.text)
            elif isinstance(action, Reply):
                if action.post_id not in snap.posts:
                    raise PolicyError(f"reply to unknown post {action.post_id!r}")
                cid = self._next_post_id()
                self._emit(core.COMMENTED, ts, actor_id=aid, post_id=action.post_id,
                           text=action.text, comment_id=cid)
                mem.add("posted", action.text)
            elif isinstance(action, (Like, Dislike)):
                if action.post_id not in snap.posts:
                    raise PolicyError(f"unknown post {action.post_id!r}")
                kind = core.LIKED if isinstance(action, Like) else core.DISLIKED
                self._emit(kind, ts, actor_id=aid, post_id=action.post_id)
                mem.add(kind.lower(), action.post_id)
            elif isinstance(action, Follow):
                if action.agent_id not in snap.agents:
                    raise PolicyError(f"unknown agent {action.agent_id!r}")
                if action.agent_id == aid or (aid, action.agent_id) in snap.follow_graph:
                    self.metrics["skipped"] += 1
                    return
                self._emit(core.FOLLOWED, ts, follower_id=aid, followee_id=action.agent_id)
                mem.add("followed", action.agent_id)
            elif isinstance(action, Unfollow):
                if action.agent_id not in snap.agents:
                    raise PolicyError(f"unknown agent {action.agent_id!r}")
                if (aid, action.agent_id) not in snap.follow_graph:
                    self.metrics["skipped"] += 1
                    return
                self._emit(core.UNFOLLOWED, ts, follower_id=aid, followee_id=action.agent_id)
                mem.add("unfollowed", action.agent_id)
            elif isinstance(action, SearchPosts):
                mem.last_query = action.query
                obs = self._observe(aid, 0, ts)
                mem.add("search_results", tuple(p.post_id for p in obs.search_results))
            elif isinstance(action, SearchWeb):
                q = action.query.lower()
                docs = [d for d in self.config.web_documents if q in d.lower()]
                mem.add("web_results", tuple(docs[: self.config.top_n]))
            elif isinstance(action, FetchTagged):
                ids = snap.mentions.get(aid, [])[-self.config.top_n:]
                mem.add("tagged", tuple(ids))
            elif isinstance(action, Trending):
                obs = self._observe(aid, 0, ts)
                mem.add("trending", tuple(p.post_id for p in obs.trending))
        except PolicyError as exc:
            self.metrics["policy_errors"] += 1
            logger.info("agent %s: %s (skipped)", aid, exc)


def run_simulation(config: SimConfig) -> EventLog:
    return Simulation(config).run()


# ---------------------------------------------------------------------------
# Config files

def load_config_file(path) -> dict:
    """JSON, or YAML when the file name ends in .yaml/.yml."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if str(path).endswith((".yaml", ".yml")):
        import yaml

        return yaml.safe_load(text)
    return json.loads(text)


def config_from_dict(raw: dict, seed: int) -> SimConfig:
    """Build a :class:`SimConfig` from the documented config-file keys.

    Keys: ``agents`` (list of policy blocks), ``ticks``, ``tick_ms``,
    ``window_ticks``, ``top_n``, ``memory_size``, ``web_documents``.
    A block is ``{"count": n, "policy": "scripted"|"constant"|"llm",
    "params": {...}, "backstory": "topics"|"none"|{"template": str}}``.
    """
    from .policies import policy_from_block

    blocks = raw.get("agents")
    if not blocks:
        raise ValueError("config needs a non-empty 'agents' list")
    if isinstance(blocks, int):
        blocks = [{"count": blocks, "policy": "scripted", "params": {}}]
    owners: list[int] = []
    built = []
    for b, block in enumerate(blocks):
        policy, backstory = policy_from_block(block, seed, b)
        built.append((policy, backstory))
        owners.extend([b] * int(block.get("count", 1)))

    def assign(i: int):
        return built[owners[i]][0]

    def backstory(i: int, rng):
        gen = built[owners[i]][1]
        return gen(i, rng) if gen else None

    return SimConfig(
        n_agents=len(owners),
        ticks=int(raw.get("ticks", 30)),
        seed=seed,
        policy_assignment=assign,
        backstory_generator=backstory,
        tick_ms=int(raw.get("tick_ms", DAY_MS)),
        window_ticks=int(raw.get("window_ticks", 3)),
        top_n=int(raw.get("top_n", 20)),
        memory_size=int(raw.get("memory_size", 50)),
        web_documents=tuple(raw.get("web_documents", ())),
    )
