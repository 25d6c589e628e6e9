"""Planted-effect corpora and graphs.

Each generator builds data in which one phenomenon is present by
construction, so the matching analysis has a known right answer.
"""

from __future__ import annotations

import numpy as np

from . import core
from .core import EventLog, append_event, make_event
from .graph import FollowGraph
from .policies import scripted_policy
from .sim import DAY_MS, SimConfig, run_simulation

_FILLER = [f"word{i:02d}" for i in range(40)]


# ---------------------------------------------------------------------------
# Simulated corpora

def homophily_corpus(beta: float, seed: int, n_agents: int = 40, ticks: int = 90,
                     topics=("alpha", "beta")) -> EventLog:
    """Agents split round-robin over ``topics``; follows gated by ``beta``.

    With ``topics`` of length one every agent draws text from the same pool
    (the null corpus).
    """
    pols = [scripted_policy({"topic_affinities": {t: 1.0}, "follow_homophily": beta,
                             "follow_start_tick": 10, "max_following": 6}) for t in topics]
    cfg = SimConfig(n_agents, ticks, seed, lambda i: pols[i % len(pols)],
                    lambda i, rng: pols[i % len(pols)].backstory(rng))
    return run_simulation(cfg)


def influence_corpus(gamma: float, seed: int, n_agents: int = 32, ticks: int = 150,
                     n_topics: int = 16, ramp_ticks: int = 110, tick_ms: int = 3 * DAY_MS) -> EventLog:
    """Random follows early on; each post token is copied from a followee with
    probability ``gamma``, ramped in over ``ramp_ticks`` of connection age."""
    topics = [f"topic{chr(97 + i)}" for i in range(n_topics)]
    pols = [scripted_policy({"topic_affinities": {t: 1.0}, "copy_rate": gamma, "copy_ramp_ticks": ramp_ticks,
                             "max_following": 2, "action_weights": {"follow": 0.2}}) for t in topics]
    cfg = SimConfig(n_agents, ticks, seed, lambda i: pols[i % n_topics],
                    lambda i, rng: pols[i % n_topics].backstory(rng), tick_ms=tick_ms)
    return run_simulation(cfg)


def toxicity_corpus(seed: int, n_agents: int = 40, ticks: int = 60, toxic_share: float = 0.3,
                    toxicity_rate: float = 0.3) -> EventLog:
    """A ``toxic_share`` of agents insult at ``toxicity_rate``; the rest never do."""
    n_toxic = int(round(toxic_share * n_agents))
    tox = scripted_policy({"topic_affinities": {"news": 1.0, "games": 1.0}, "toxicity_rate": toxicity_rate})
    calm = scripted_policy({"topic_affinities": {"news": 1.0, "games": 1.0}})
    cfg = SimConfig(n_agents, ticks, seed, lambda i: tox if i < n_toxic else calm,
                    lambda i, rng: (tox if i < n_toxic else calm).backstory(rng))
    return run_simulation(cfg)


STANCE_VOCAB = {
    "pro_human": ["humans", "people", "humanity", "love", "admire", "trust", "help"],
    "anti_human": ["humans", "people", "humanity", "hate", "greedy", "cruel", "doomed"],
    "mixed_human": ["humans", "people", "love", "trust", "hate", "greedy", "weather"],
}


def stance_corpus(seed: int, n_agents: int = 60, ticks: int = 20, shares=(0.45, 0.45, 0.10)) -> EventLog:
    """Agents drawn from pro-human, anti-human and mixed vocabularies in the
    given ``shares``; posts from the first two groups carry one stance almost
    always, so leaning scores pile up at the poles."""
    groups = list(STANCE_VOCAB)
    pols = {gname: scripted_policy({"topic_affinities": {gname: 1.0}, "vocab": STANCE_VOCAB,
                                    "action_weights": {"follow": 0.0, "unfollow": 0.0}})
            for gname in groups}
    bounds = np.cumsum(np.asarray(shares, dtype=float) / sum(shares)) * n_agents

    def group(i):
        return groups[min(int(np.searchsorted(bounds, i, side="right")), len(groups) - 1)]

    cfg = SimConfig(n_agents, ticks, seed, lambda i: pols[group(i)], lambda i, rng: pols[group(i)].backstory(rng))
    return run_simulation(cfg)


# ---------------------------------------------------------------------------
# Graphs with planted labels

def random_digraph(n: int, p: float, rng: np.random.Generator) -> FollowGraph:
    g = FollowGraph([f"n{i:04d}" for i in range(n)])
    mask = rng.random((n, n)) < p
    np.fill_diagonal(mask, False)
    for u, v in zip(*np.nonzero(mask)):
        g.add_edge(f"n{u:04d}", f"n{v:04d}")
    return g


def segregated_cliques(sizes=(5, 5), labels=("a", "b")) -> tuple[FollowGraph, dict[str, str]]:
    """Disjoint complete digraphs, one per label."""
    g, lab = FollowGraph(), {}
    k = 0
    for size, name in zip(sizes, labels):
        members = [f"n{k + i:04d}" for i in range(size)]
        k += size
        for u in members:
            lab[u] = name
            g.add_node(u)
            for v in members:
                if u != v:
                    g.add_edge(u, v)
    return g, lab


def graded_toxic_graph(seed: int, n_clean: int = 160, counts=(1, 2, 3, 4, 6, 8, 10, 12), per_count: int = 20,
                       p_base: float = 0.05, slope: float = 0.2) -> tuple[FollowGraph, dict[str, int]]:
    """Follow graph where segregation grows with toxicity intensity.

    Agents carry a toxic-post count (0 for clean agents).  A follow between
    a clean and a toxic agent with count ``c`` happens with probability
    ``p_base * exp(-slope * c)``; same-class pairs follow with ``p_base``.
    """
    rng = np.random.default_rng(seed)
    n_tox = [c for c in counts for _ in range(per_count)]
    tox_count = {f"n{i:04d}": 0 for i in range(n_clean)}
    for j, c in enumerate(n_tox):
        tox_count[f"n{n_clean + j:04d}"] = c
    nodes = sorted(tox_count)
    g = FollowGraph(nodes)
    for u in nodes:
        for v in nodes:
            if u == v:
                continue
            cu, cv = tox_count[u], tox_count[v]
            if (cu == 0) == (cv == 0):
                p = p_base
            else:
                p = p_base * float(np.exp(-slope * max(cu, cv)))
            if rng.random() < p:
                g.add_edge(u, v)
    return g, tox_count


# ---------------------------------------------------------------------------
# Prediction corpus

def _bernoulli_tokens(rng, share_pos: float, n: int, pos: str, neg: str, n_filler: int) -> str:
    toks = [pos if rng.random() < share_pos else neg for _ in range(n)]
    toks += [_FILLER[i] for i in rng.integers(len(_FILLER), size=n_filler)]
    rng.shuffle(toks)
    return " ".join(toks)


def prediction_corpus(seed: int, n_targets: int = 1200, n_sources: int = 200, k_follow: int = 5,
                      w_backstory: float = 0.5, w_posts: float = 0.25, w_scores: float = 0.25,
                      rho: float = 0.3, noise: float = 0.1) -> tuple[core.Snapshot, dict[str, float]]:
    """Target agents with backstories who each follow ``k_follow`` source agents.

    Each source has an opinion score ``s`` and a post latent ``z`` with
    correlation ``rho``; its posts express ``z``.  A target's backstory
    expresses its own latent ``b`` and its score is
    ``w_backstory*b + w_posts*mean(z) + w_scores*mean(s) + noise``, clipped
    to [-1, 1].  Backstory, neighbor posts and neighbor scores thus each
    carry part of the signal.
    """
    rng = np.random.default_rng(seed)
    log = EventLog()
    ts = 0
    s = rng.uniform(-1, 1, n_sources)
    z = np.clip(rho * s + np.sqrt(1 - rho ** 2) * rng.uniform(-1, 1, n_sources), -1, 1)
    scores: dict[str, float] = {}
    sources = [f"s{i:04d}" for i in range(n_sources)]
    for i, sid in enumerate(sources):
        append_event(log, make_event(core.AGENT_CREATED, ts, agent_id=sid, display_name=sid))
        for k in range(5):
            ts += 1
            append_event(log, make_event(core.POSTED, ts, post_id=f"{sid}p{k}", author_id=sid,
                                         text=_bernoulli_tokens(rng, (1 + z[i]) / 2, 8, "rise", "fall", 4)))
        scores[sid] = float(s[i])
    for i in range(n_targets):
        tid = f"t{i:05d}"
        b = rng.uniform(-1, 1)
        ts += 1
        append_event(log, make_event(core.AGENT_CREATED, ts, agent_id=tid, display_name=tid,
                                     backstory=_bernoulli_tokens(rng, (1 + b) / 2, 24, "bright", "gloom", 12)))
        follows = rng.choice(n_sources, size=k_follow, replace=False)
        for j in sorted(follows):
            ts += 1
            append_event(log, make_event(core.FOLLOWED, ts, follower_id=tid, followee_id=sources[j]))
        y = w_backstory * b + w_posts * z[follows].mean() + w_scores * s[follows].mean() + noise * rng.normal()
        scores[tid] = float(np.clip(y, -1, 1))
    # sources have no backstory, so only targets become dataset rows
    return core.snapshot_at(log), scores
