import numpy as np
import pytest

from llmsocial import core
from llmsocial.core import snapshot_at
from llmsocial.graph import FollowGraph, reciprocity
from llmsocial.policies import (
    ConstantPolicy, EndpointConfig, FixtureTransport, FunctionPolicy, llm_adapter_policy, parse_action,
    scripted_policy, topic_vocab,
)
from llmsocial.sim import (
    Follow, Like, Memory, Post, Reply, SimConfig, Simulation, Trending, Unfollow, agent_id_for,
    build_observation, config_from_dict, run_simulation,
)
from llmsocial.synthetic import homophily_corpus
from llmsocial.toxicity import lexicon_scorer

from conftest import agents, build_log


def kinds(log):
    return [e.kind for e in log]


def test_single_agent_constant_post():
    log = run_simulation(SimConfig(1, 3, seed=0, policy_assignment=ConstantPolicy(Post("x"))))
    assert kinds(log) == [core.AGENT_CREATED] + [core.POSTED] * 3
    assert all(e.payload["text"] == "x" for e in log if e.kind == core.POSTED)


def test_mutual_follow_on_first_tick():
    def follow_other(agent, memory, obs, rng):
        if obs.tick == 0:
            return Follow(agent_id_for(1 - int(agent.agent_id[1:])))
        return None

    log = run_simulation(SimConfig(2, 2, seed=0, policy_assignment=FunctionPolicy(follow_other)))
    g = FollowGraph.from_snapshot(snapshot_at(log))
    assert g.n_edges() == 2 and reciprocity(g) == 1.0


def test_bad_references_are_skipped_not_fatal():
    pol = FunctionPolicy(lambda a, m, o, r: [Like("p9999999"), Follow("ghost"), Reply("nope", "x"), "junk"][o.tick])
    sim = Simulation(SimConfig(1, 4, seed=0, policy_assignment=pol))
    log = sim.run()
    assert len(log) == 1
    assert log.metrics["policy_errors"] == 4


def test_redundant_follow_and_unfollow_are_skipped():
    pol = FunctionPolicy(lambda a, m, o, r: Follow(a.agent_id) if o.tick == 0 else Unfollow(agent_id_for(0)))
    log = run_simulation(SimConfig(2, 2, seed=0, policy_assignment=pol))
    assert len(log) == 2
    assert log.metrics["skipped"] == 4


def test_same_seed_same_log():
    pol = scripted_policy({"topic_affinities": {"alpha": 1.0, "beta": 2.0}, "follow_homophily": 0.5,
                           "toxicity_rate": 0.1})
    cfg = lambda: SimConfig(100, 200, seed=9, policy_assignment=pol,  # noqa: E731
                            backstory_generator=lambda i, rng: pol.backstory(rng))
    assert run_simulation(cfg()).to_jsonl() == run_simulation(cfg()).to_jsonl()


def test_different_seeds_differ():
    pol = scripted_policy({"topic_affinities": {"alpha": 1.0}})
    a = run_simulation(SimConfig(5, 10, seed=1, policy_assignment=pol)).to_jsonl()
    b = run_simulation(SimConfig(5, 10, seed=2, policy_assignment=pol)).to_jsonl()
    assert a != b


def test_full_homophily_keeps_follows_inside_groups():
    log = homophily_corpus(beta=1.0, seed=3, n_agents=20, ticks=40)
    follows = [e.payload for e in log if e.kind == core.FOLLOWED]
    assert follows
    group = lambda aid: int(aid[1:]) % 2  # noqa: E731
    assert all(group(f["follower_id"]) == group(f["followee_id"]) for f in follows)


def test_zero_toxicity_rate_gives_clean_posts():
    pol = scripted_policy({"topic_affinities": {"alpha": 1.0}, "toxicity_rate": 0.0})
    log = run_simulation(SimConfig(10, 20, seed=4, policy_assignment=pol))
    scorer = lexicon_scorer()
    texts = [e.payload["text"] for e in log if e.kind == core.POSTED]
    assert texts and all(scorer.score(t) == 0.0 for t in texts)


def test_toxicity_rate_one_makes_every_post_toxic():
    pol = scripted_policy({"topic_affinities": {"alpha": 1.0}, "toxicity_rate": 1.0})
    log = run_simulation(SimConfig(5, 20, seed=4, policy_assignment=pol))
    scorer = lexicon_scorer()
    assert all(scorer.score(e.payload["text"]) > 0 for e in log if e.kind == core.POSTED)


def test_scripted_parameters_are_validated():
    with pytest.raises(ValueError):
        scripted_policy({"topic_affinities": {"a": 1.0}, "follow_homophily": 1.5})
    with pytest.raises(ValueError):
        scripted_policy({"topic_affinities": {"a": 1.0}, "copy_rate": -0.1})


def test_memory_ring_keeps_backstory():
    m = Memory("born in a lab", K=3)
    for i in range(5):
        m.add("posted", str(i))
    assert [v for _, v in m.items()] == ["2", "3", "4"]
    assert m.backstory == "born in a lab"


def _obs_log(engagements):
    events = list(agents("a", "b"))
    for i, eng in enumerate(engagements):
        events.append((core.POSTED, 10 + i, {"post_id": f"p{i}", "author_id": "a", "text": f"post {i} @b",
                                             "likes": eng}))
    return build_log(*events)


def test_observation_empty_platform():
    obs = build_observation(snapshot_at(build_log(*agents("a"))), "a", window=100, top_n=5, query="x")
    assert obs.trending == obs.tagged == obs.search_results == ()


def test_trending_sorted_by_engagement():
    obs = build_observation(snapshot_at(_obs_log([5, 3, 9])), "a", window=100, top_n=2)
    assert [p.likes for p in obs.trending] == [9, 5]


def test_observation_window_tagged_and_search():
    snap = snapshot_at(_obs_log([1, 2, 3]))
    obs = build_observation(snap, "b", window=1, top_n=10, query="POST 1")
    assert [p.post_id for p in obs.trending] == ["p2", "p1"]
    assert [p.post_id for p in obs.tagged] == ["p2", "p1", "p0"]
    assert [p.post_id for p in obs.search_results] == ["p1"]


def test_observation_does_not_depend_on_later_events():
    log = _obs_log([1, 2, 3])
    early = build_observation(snapshot_at(log, 11), "b", window=100, top_n=10)
    assert [p.post_id for p in early.tagged] == ["p1", "p0"]


@pytest.mark.parametrize("text,action", [
    ("POST hello", Post("hello")),
    ("  like p0000001\nextra", Like("p0000001")),
    ("REPLY p1 nice one", Reply("p1", "nice one")),
    ("TRENDING", Trending()),
    ("dance wildly", None),
    ("", None),
])
def test_parse_action(text, action):
    assert parse_action(text) == action


def test_llm_adapter_posts_completion():
    pol = llm_adapter_policy({"transport": lambda body: {"completion": "POST hello"}})
    log = run_simulation(SimConfig(1, 1, seed=0, policy_assignment=pol))
    assert [e.payload.get("text") for e in log if e.kind == core.POSTED] == ["hello"]


def test_llm_adapter_falls_back_after_retries():
    calls = []
    pol = llm_adapter_policy({"transport": lambda body: calls.append(1) or {"completion": "???"}, "max_retries": 2})
    log = run_simulation(SimConfig(1, 1, seed=0, policy_assignment=pol))
    assert len(calls) == 3
    assert log.metrics["parse_fallbacks"] == 1 and log.metrics["noops"] == 1


def test_fixture_record_and_replay(tmp_path):
    def live(body):
        n = len(body["prompt"]) % 3
        return {"completion": ["POST recorded", "TRENDING", "SEARCH_POSTS recorded"][n]}

    def run(transport):
        pol = llm_adapter_policy(EndpointConfig(transport=transport))
        return run_simulation(SimConfig(3, 4, seed=5, policy_assignment=pol)).to_jsonl()

    recorded = run(FixtureTransport(tmp_path, record_from=live))
    assert run(FixtureTransport(tmp_path)) == recorded


def test_config_from_dict_blocks():
    raw = {"ticks": 5, "agents": [
        {"count": 2, "policy": "scripted", "params": {"topic_affinities": {"x": 1.0}}},
        {"count": 1, "policy": "constant", "params": {"text": "hi"}, "backstory": {"template": "agent {index}"}},
    ]}
    cfg = config_from_dict(raw, seed=1)
    log = run_simulation(cfg)
    snap = snapshot_at(log)
    assert len(snap.agents) == 3
    assert snap.agents[agent_id_for(2)].backstory == "agent 2"
    assert set(snap.agents[agent_id_for(0)].backstory.split()) <= set(topic_vocab("x"))


def test_agents_created_on_their_tick():
    cfg = SimConfig(3, 5, seed=0, policy_assignment=ConstantPolicy(None), creation_tick=lambda i: i)
    log = run_simulation(cfg)
    assert [e.timestamp for e in log if e.kind == core.AGENT_CREATED] == [0, cfg.tick_ms, 2 * cfg.tick_ms]
