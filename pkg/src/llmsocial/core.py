"""Domain types, the append-only event log, snapshots and JSONL persistence.

The event log is the single source of truth.  A :class:`Snapshot` is the
materialised platform state obtained by replaying every event with
``timestamp <= at``.
"""

from __future__ import annotations

import bisect
import json
import logging
import re
from collections import defaultdict
from dataclasses import dataclass
from typing import Any, Iterable, Iterator

from .errors import (
    DanglingReference,
    InvalidUnfollow,
    OrderError,
    OutOfOrder,
    ParseError,
    SchemaError,
    ValidationError,
)

logger = logging.getLogger(__name__)

AGENT_CREATED = "AgentCreated"
POSTED = "Posted"
LIKED = "Liked"
DISLIKED = "Disliked"
COMMENTED = "Commented"
FOLLOWED = "Followed"
UNFOLLOWED = "Unfollowed"

EVENT_KINDS = (AGENT_CREATED, POSTED, LIKED, DISLIKED, COMMENTED, FOLLOWED, UNFOLLOWED)

# kind -> (required fields, optional fields)
PAYLOAD_SCHEMA: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {
    AGENT_CREATED: (("agent_id", "display_name"), ("backstory",)),
    POSTED: (("post_id", "author_id", "text"), ("reply_to", "likes", "views", "comments")),
    LIKED: (("actor_id", "post_id"), ()),
    DISLIKED: (("actor_id", "post_id"), ()),
    COMMENTED: (("actor_id", "post_id", "text", "comment_id"), ()),
    FOLLOWED: (("follower_id", "followee_id"), ()),
    UNFOLLOWED: (("follower_id", "followee_id"), ()),
}

_STR_FIELDS = {
    "agent_id", "display_name", "backstory", "post_id", "author_id", "text",
    "reply_to", "actor_id", "comment_id", "follower_id", "followee_id",
}
_COUNT_FIELDS = {"likes", "views", "comments"}


@dataclass
class AgentRecord:
    agent_id: str
    display_name: str
    created_at: int
    backstory: str | None = None


@dataclass
class PostRecord:
    post_id: str
    author_id: str
    text: str
    created_at: int
    reply_to: str | None = None
    likes: int = 0
    views: int = 0
    comments: int = 0
    dislikes: int = 0


@dataclass(frozen=True)
class PlatformEvent:
    seq: int
    timestamp: int
    kind: str
    payload: dict[str, Any]

    def to_json(self) -> str:
        obj = {"seq": self.seq, "ts": self.timestamp, "kind": self.kind, "payload": self.payload}
        return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def make_event(kind: str, timestamp: int, seq: int | None = None, **payload) -> PlatformEvent:
    """Build an event, dropping optional payload fields that are ``None``."""
    clean = {k: v for k, v in payload.items() if v is not None}
    return PlatformEvent(-1 if seq is None else seq, int(timestamp), kind, clean)


class Snapshot:
    """Platform state at time ``at``.

    Built by :func:`snapshot_at`; the simulator also keeps one live and
    applies events to it incrementally.  Callers treat it as read-only.
    """

    def __init__(self, at: int | None = None):
        self.at = at
        self.agents: dict[str, AgentRecord] = {}
        self.posts: dict[str, PostRecord] = {}
        # (follower, followee) -> creation timestamp of the live spell
        self.follow_graph: dict[tuple[str, str], int] = {}
        self.out_edges: dict[str, set[str]] = defaultdict(set)
        self.in_edges: dict[str, set[str]] = defaultdict(set)
        self.posts_by_author: dict[str, list[str]] = defaultdict(list)
        self.mentions: dict[str, list[str]] = defaultdict(list)
        self._post_order: list[str] = []
        self._post_times: list[int] = []

    def apply(self, e: PlatformEvent) -> None:
        p = e.payload
        if e.kind == AGENT_CREATED:
            self.agents[p["agent_id"]] = AgentRecord(
                p["agent_id"], p["display_name"], e.timestamp, p.get("backstory")
            )
        elif e.kind == POSTED:
            self._add_post(PostRecord(
                p["post_id"], p["author_id"], p["text"], e.timestamp, p.get("reply_to"),
                likes=p.get("likes", 0), views=p.get("views", 0), comments=p.get("comments", 0),
            ))
        elif e.kind == COMMENTED:
            self.posts[p["post_id"]].comments += 1
            self._add_post(PostRecord(
                p["comment_id"], p["actor_id"], p["text"], e.timestamp, reply_to=p["post_id"]
            ))
        elif e.kind == LIKED:
            self.posts[p["post_id"]].likes += 1
        elif e.kind == DISLIKED:
            self.posts[p["post_id"]].dislikes += 1
        elif e.kind == FOLLOWED:
            a, b = p["follower_id"], p["followee_id"]
            self.follow_graph[(a, b)] = e.timestamp
            self.out_edges[a].add(b)
            self.in_edges[b].add(a)
        elif e.kind == UNFOLLOWED:
            a, b = p["follower_id"], p["followee_id"]
            del self.follow_graph[(a, b)]
            self.out_edges[a].discard(b)
            self.in_edges[b].discard(a)

    def _add_post(self, post: PostRecord) -> None:
        self.posts[post.post_id] = post
        self.posts_by_author[post.author_id].append(post.post_id)
        self._post_order.append(post.post_id)
        self._post_times.append(post.created_at)
        for name in set(MENTION_RE.findall(post.text)):
            self.mentions[name].append(post.post_id)

    def posts_since(self, t: int) -> list[PostRecord]:
        """Posts with ``created_at >= t`` in creation order."""
        i = bisect.bisect_left(self._post_times, t)
        return [self.posts[pid] for pid in self._post_order[i:]]

    def posts_in_order(self) -> list[PostRecord]:
        return [self.posts[pid] for pid in self._post_order]

    def iter_posts_newest_first(self):
        for pid in reversed(self._post_order):
            yield self.posts[pid]

    def following(self, agent_id: str) -> list[str]:
        return sorted(self.out_edges.get(agent_id, ()))

    def followers(self, agent_id: str) -> list[str]:
        return sorted(self.in_edges.get(agent_id, ()))


class EventLog:
    """Append-only, totally ordered event sequence.

    Validation state (known agents, posts, live edges) is kept alongside
    the events so appends are O(1).
    """

    def __init__(self, events: Iterable[PlatformEvent] = ()):
        self._events: list[PlatformEvent] = []
        self._agents: set[str] = set()
        self._posts: set[str] = set()
        self._edges: set[tuple[str, str]] = set()
        self.metrics: dict[str, int] = {}
        for e in events:
            append_event(self, e)

    def __len__(self) -> int:
        return len(self._events)

    def __iter__(self) -> Iterator[PlatformEvent]:
        return iter(self._events)

    def __getitem__(self, i):
        return self._events[i]

    @property
    def events(self) -> tuple[PlatformEvent, ...]:
        return tuple(self._events)

    @property
    def last_timestamp(self) -> int | None:
        return self._events[-1].timestamp if self._events else None

    def has_agent(self, agent_id: str) -> bool:
        return agent_id in self._agents

    def has_post(self, post_id: str) -> bool:
        return post_id in self._posts

    def has_edge(self, follower: str, followee: str) -> bool:
        return (follower, followee) in self._edges

    def to_jsonl(self) -> str:
        return "".join(e.to_json() + "\n" for e in self._events)


def _check_refs(log: EventLog, e: PlatformEvent) -> None:
    p = e.payload
    kind = e.kind
    if kind == AGENT_CREATED:
        if p["agent_id"] in log._agents:
            raise ValidationError(f"duplicate agent_id {p['agent_id']!r}")
        return
    actor = p.get("author_id") or p.get("actor_id") or p.get("follower_id")
    if actor not in log._agents:
        raise DanglingReference(f"{kind}: unknown agent {actor!r}")
    if kind == POSTED:
        if p["post_id"] in log._posts:
            raise ValidationError(f"duplicate post_id {p['post_id']!r}")
        if p.get("reply_to") is not None and p["reply_to"] not in log._posts:
            raise DanglingReference(f"reply_to {p['reply_to']!r} is not an earlier post")
    elif kind in (LIKED, DISLIKED, COMMENTED):
        if p["post_id"] not in log._posts:
            raise DanglingReference(f"{kind}: unknown post {p['post_id']!r}")
        if kind == COMMENTED and p["comment_id"] in log._posts:
            raise ValidationError(f"duplicate post_id {p['comment_id']!r}")
    elif kind in (FOLLOWED, UNFOLLOWED):
        a, b = p["follower_id"], p["followee_id"]
        if b not in log._agents:
            raise DanglingReference(f"{kind}: unknown agent {b!r}")
        if a == b:
            raise ValidationError(f"{kind}: follower equals followee ({a!r})")
        if kind == FOLLOWED and (a, b) in log._edges:
            raise ValidationError(f"Followed: edge {a}->{b} already live")
        if kind == UNFOLLOWED and (a, b) not in log._edges:
            raise InvalidUnfollow(f"Unfollowed: no live edge {a}->{b}")


def append_event(log: EventLog, e: PlatformEvent) -> EventLog:
    """Validate ``e`` against the log and append it.

    An event with ``seq < 0`` is assigned the next sequence number.
    Raises OutOfOrder, DanglingReference or InvalidUnfollow.
    """
    if e.kind not in PAYLOAD_SCHEMA:
        raise ValidationError(f"unknown event kind {e.kind!r}")
    required, _ = PAYLOAD_SCHEMA[e.kind]
    missing = [f for f in required if f not in e.payload]
    if missing:
        raise ValidationError(f"{e.kind}: missing payload fields {missing}")
    if log._events:
        last = log._events[-1]
        if e.timestamp < last.timestamp:
            raise OutOfOrder(f"timestamp {e.timestamp} < last timestamp {last.timestamp}")
        if e.seq >= 0 and e.seq <= last.seq:
            raise OutOfOrder(f"seq {e.seq} does not follow {last.seq}")
    if e.seq < 0:
        e = PlatformEvent(log._events[-1].seq + 1 if log._events else 0, e.timestamp, e.kind, e.payload)
    _check_refs(log, e)

    p = e.payload
    if e.kind == AGENT_CREATED:
        log._agents.add(p["agent_id"])
    elif e.kind == POSTED:
        log._posts.add(p["post_id"])
    elif e.kind == COMMENTED:
        log._posts.add(p["comment_id"])
    elif e.kind == FOLLOWED:
        log._edges.add((p["follower_id"], p["followee_id"]))
    elif e.kind == UNFOLLOWED:
        log._edges.discard((p["follower_id"], p["followee_id"]))
    log._events.append(e)
    return log


def snapshot_at(log: EventLog, t: int | None = None) -> Snapshot:
    """Replay every event with ``timestamp <= t`` (all events if ``t`` is None)."""
    snap = Snapshot(at=t if t is not None else log.last_timestamp)
    for e in log:
        if t is not None and e.timestamp > t:
            break
        snap.apply(e)
    return snap


# ---------------------------------------------------------------------------
# JSONL persistence

def _validate_payload(kind: str, payload: Any, line: int, strict: bool) -> dict:
    if not isinstance(payload, dict):
        raise SchemaError(line, "payload", "must be an object")
    required, optional = PAYLOAD_SCHEMA[kind]
    for f in required:
        if f not in payload:
            raise SchemaError(line, f, "missing")
    out = {}
    for k, v in payload.items():
        if k not in required and k not in optional:
            if strict:
                raise SchemaError(line, k, f"unknown field for {kind}")
            logger.warning("line %d: ignoring unknown field %r", line, k)
            continue
        if v is None and k in optional:
            continue
        if k in _STR_FIELDS and not isinstance(v, str):
            raise SchemaError(line, k, "must be a string")
        if k in _COUNT_FIELDS and (isinstance(v, bool) or not isinstance(v, int) or v < 0):
            raise SchemaError(line, k, "must be a non-negative integer")
        out[k] = v
    return out


def parse_event_line(text: str, line: int, strict: bool = True) -> PlatformEvent:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(line, str(exc)) from None
    if not isinstance(obj, dict):
        raise ParseError(line, "expected a JSON object")
    for key in ("seq", "ts", "kind", "payload"):
        if key not in obj:
            raise SchemaError(line, key, "missing")
    extra = set(obj) - {"seq", "ts", "kind", "payload"}
    if extra:
        if strict:
            raise SchemaError(line, sorted(extra)[0], "unknown top-level field")
        logger.warning("line %d: ignoring unknown fields %s", line, sorted(extra))
    for key in ("seq", "ts"):
        if isinstance(obj[key], bool) or not isinstance(obj[key], int):
            raise SchemaError(line, key, "must be an integer")
    if obj["seq"] < 0:
        raise SchemaError(line, "seq", "must be non-negative")
    if obj["kind"] not in PAYLOAD_SCHEMA:
        raise SchemaError(line, "kind", f"unknown kind {obj['kind']!r}")
    payload = _validate_payload(obj["kind"], obj["payload"], line, strict)
    return PlatformEvent(obj["seq"], obj["ts"], obj["kind"], payload)


def ingest_jsonl(path, strict: bool = True) -> EventLog:
    """Read a JSONL event file into a validated :class:`EventLog`.

    Errors carry the 1-based line number.  Blank lines are skipped.
    """
    out = EventLog()
    line_of: list[int] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            e = parse_event_line(raw, lineno, strict)
            try:
                append_event(out, e)
            except OutOfOrder as exc:
                raise OrderError(lineno, str(exc)) from None
            except ValidationError as exc:
                raise SchemaError(lineno, "payload", str(exc)) from None
            line_of.append(lineno)
    out.metrics["lines"] = len(line_of)
    return out


def export_jsonl(log: EventLog, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(log.to_jsonl())


# ---------------------------------------------------------------------------
# Lexical features

HASHTAG_RE = re.compile(r"(?<![\w#])#(\w+)")
MENTION_RE = re.compile(r"(?<![\w@])@(\w+)")

# Extended_Pictographic blocks plus regional indicators.
_EMOJI_RANGES = (
    (0x00A9, 0x00A9), (0x00AE, 0x00AE), (0x203C, 0x203C), (0x2049, 0x2049),
    (0x2122, 0x2122), (0x2139, 0x2139), (0x2194, 0x2199), (0x21A9, 0x21AA),
    (0x231A, 0x231B), (0x2328, 0x2328), (0x2388, 0x2388), (0x23CF, 0x23CF),
    (0x23E9, 0x23F3), (0x23F8, 0x23FA), (0x24C2, 0x24C2), (0x25AA, 0x25AB),
    (0x25B6, 0x25B6), (0x25C0, 0x25C0), (0x25FB, 0x25FE), (0x2600, 0x2605),
    (0x2607, 0x2612), (0x2614, 0x2685), (0x2690, 0x2705), (0x2708, 0x2712),
    (0x2714, 0x2714), (0x2716, 0x2716), (0x271D, 0x271D), (0x2721, 0x2721),
    (0x2728, 0x2728), (0x2733, 0x2734), (0x2744, 0x2744), (0x2747, 0x2747),
    (0x274C, 0x274C), (0x274E, 0x274E), (0x2753, 0x2755), (0x2757, 0x2757),
    (0x2763, 0x2767), (0x2795, 0x2797), (0x27A1, 0x27A1), (0x27B0, 0x27B0),
    (0x27BF, 0x27BF), (0x2934, 0x2935), (0x2B05, 0x2B07), (0x2B1B, 0x2B1C),
    (0x2B50, 0x2B50), (0x2B55, 0x2B55), (0x3030, 0x3030), (0x303D, 0x303D),
    (0x3297, 0x3297), (0x3299, 0x3299), (0x1F000, 0x1F0FF), (0x1F10D, 0x1F10F),
    (0x1F12F, 0x1F12F), (0x1F16C, 0x1F171), (0x1F17E, 0x1F17F), (0x1F18E, 0x1F18E),
    (0x1F191, 0x1F19A), (0x1F1AD, 0x1F1FF), (0x1F201, 0x1F20F), (0x1F21A, 0x1F21A),
    (0x1F22F, 0x1F22F), (0x1F232, 0x1F23A), (0x1F23C, 0x1F23F), (0x1F249, 0x1F3FA),
    (0x1F400, 0x1F53D), (0x1F546, 0x1F64F), (0x1F680, 0x1F6FF), (0x1F774, 0x1F77F),
    (0x1F7D5, 0x1F7FF), (0x1F80C, 0x1F80F), (0x1F848, 0x1F84F), (0x1F85A, 0x1F85F),
    (0x1F888, 0x1F88F), (0x1F8AE, 0x1F8FF), (0x1F90C, 0x1F93A), (0x1F93C, 0x1F945),
    (0x1F947, 0x1FAFF), (0x1FC00, 0x1FFFD),
)
_EMOJI_STARTS = [lo for lo, _ in _EMOJI_RANGES]


def is_emoji(ch: str) -> bool:
    cp = ord(ch)
    i = bisect.bisect_right(_EMOJI_STARTS, cp) - 1
    return i >= 0 and cp <= _EMOJI_RANGES[i][1]


@dataclass(frozen=True)
class FeatureRecord:
    hashtags: int = 0
    mentions: int = 0
    words: int = 0
    chars: int = 0
    emojis: int = 0
    has_emoji: bool = False


def lexical_features(post: PostRecord | str) -> FeatureRecord:
    text = post if isinstance(post, str) else post.text
    emojis = sum(1 for ch in text if is_emoji(ch))
    return FeatureRecord(
        hashtags=len(HASHTAG_RE.findall(text)),
        mentions=len(MENTION_RE.findall(text)),
        words=len(text.split()),
        chars=len(text),
        emojis=emojis,
        has_emoji=emojis > 0,
    )
