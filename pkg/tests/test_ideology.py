import csv
from fractions import Fraction

import numpy as np
import pytest

from llmsocial.core import PostRecord
from llmsocial.errors import EmptyKeywordList, EmptySubgraph, NoLabeledPosts, NoRelevantPosts, PersonaFailure
from llmsocial.graph import FollowGraph
from llmsocial.ideology import (
    IRRELEVANT, NEEDS_ADJUDICATION, IdeologyScore, LexiconPersona, LexiconStance, RemoteLabeler,
    export_adjudication_queue, human_leaning, ideological_subgraph, ideology_score, label_posts,
    leaning_distribution, load_prompt, majority_vote, majority_vote_label, political_filter, polarization,
    polarization_suite,
)
from llmsocial.synthetic import segregated_cliques


class ListStance:
    def __init__(self, values):
        self.values = iter(values)

    def stance(self, text):
        return next(self.values)


def post(pid, text, author="a"):
    return PostRecord(pid, author, text, 0)


@pytest.mark.parametrize("stances,pi", [((1, 1, 1), 1.0), ((1, -1), 0.0), ((1, 1, -1), 1 / 3),
                                        ((1, IRRELEVANT, 0), 0.5)])
def test_leaning_hand_means(stances, pi):
    assert human_leaning(["t"] * len(stances), ListStance(stances)).pi == pytest.approx(pi, abs=1e-15)


def test_leaning_needs_relevant_posts():
    with pytest.raises(NoRelevantPosts):
        human_leaning(["t", "t"], ListStance([IRRELEVANT, IRRELEVANT]))


def test_lexicon_stance():
    s = LexiconStance()
    assert s.stance("the weather is nice") == IRRELEVANT
    assert s.stance("I love and admire people") == 1
    assert s.stance("humans are greedy and cruel") == -1
    assert s.stance("humans exist") == 0


def test_distribution_poles():
    d = leaning_distribution([-1.0] * 7)
    assert d.mass_at_poles == 1.0 and (d.counts > 0).sum() == 1
    u = np.random.default_rng(0).uniform(-1, 1, 5000)
    assert leaning_distribution(u).mass_at_poles == pytest.approx(0.2, abs=0.05)


def test_political_filter_whole_words():
    posts = [post("1", "Election day!"), post("2", "electionsX are weird"), post("3", "cats")]
    res = political_filter(posts, keywords=["election"])
    assert [p.post_id for p in res.posts] == ["1"]
    assert res.matches == {"1": ["election"]}
    with pytest.raises(EmptyKeywordList):
        political_filter(posts, keywords=[])
    assert political_filter([post("4", "new taxes on the border")]).posts


@pytest.mark.parametrize("labels,final", [
    (("liberal", "liberal", "moderate"), "liberal"),
    (("liberal", "conservative", "moderate"), NEEDS_ADJUDICATION),
    (("unclear", "unclear", "liberal"), "unclear"),
    (("liberal", None, "liberal"), NEEDS_ADJUDICATION),
])
def test_majority_examples(labels, final):
    got, reason = majority_vote(dict(zip(("liberal", "conservative", "moderate"), labels)))
    assert got == final
    assert (reason == "") == (final != NEEDS_ADJUDICATION)


def test_persona_failure_becomes_adjudication():
    class Broken:
        def label(self, text, persona):
            if persona == "moderate":
                raise PersonaFailure("timeout")
            return "liberal"

    lab = majority_vote_label(post("1", "x"), Broken())
    assert lab.final == NEEDS_ADJUDICATION and "moderate" in lab.reason


def test_lexicon_persona_leans_with_offsets():
    lp = LexiconPersona()
    text = "equality and tradition"
    assert [lp.label(text, p) for p in ("liberal", "conservative", "moderate")] == \
        ["moderate", "moderate", "moderate"]
    assert lp.label("climate welfare taxes", "liberal") == "liberal"
    assert lp.label("nothing here", "moderate") == "unclear"


def test_adjudication_queue(tmp_path):
    posts = {"1": post("1", "climate taxes"), "2": post("2", "equality")}

    class Split:
        def label(self, text, persona):
            return persona if text == "climate taxes" else "liberal"

    labels = label_posts(list(posts.values()), Split(), max_in_flight=2)
    path = tmp_path / "queue.csv"
    assert export_adjudication_queue(labels, posts, path) == 1
    rows = list(csv.reader(open(path, encoding="utf-8")))
    assert rows[0] == ["post_id", "text", "liberal", "conservative", "moderate", "reason"]
    assert rows[1][:2] == ["1", "climate taxes"]


@pytest.mark.parametrize("labels,psi", [(("liberal", "liberal"), Fraction(1)),
                                        (("liberal", "conservative", "moderate"), Fraction(0)),
                                        (("liberal", "liberal", "conservative"), Fraction(1, 3)),
                                        (("liberal", "unclear", NEEDS_ADJUDICATION), Fraction(1))])
def test_ideology_score(labels, psi):
    assert ideology_score(labels).psi == pytest.approx(float(psi), abs=1e-15)


def test_ideology_score_needs_labels():
    with pytest.raises(NoLabeledPosts):
        ideology_score(["unclear"])


def test_subgraph_filter_boundaries():
    g = FollowGraph("abc", [("a", "b"), ("b", "c"), ("c", "a")])
    scores = {"a": IdeologyScore("a", 0.25, 5), "b": IdeologyScore("b", -0.9, 4), "c": IdeologyScore("c", -0.5, 9)}
    sub, lab = ideological_subgraph(g, scores)
    assert lab == {"a": "liberal", "c": "conservative"}
    assert set(sub.edges) == {("c", "a")}
    with pytest.raises(EmptySubgraph):
        ideological_subgraph(g, {"a": IdeologyScore("a", 0.1, 9)})


def test_segregated_polarization():
    g, lab = segregated_cliques((4, 4), ("liberal", "conservative"))
    r = polarization_suite(g, lab)
    assert (r.cross_group_ratio, r.polarization, r.assortativity) == (0.0, 1.0, 1.0)


def test_six_node_hand_tabulation():
    # L = {0,1,2}, C = {3,4,5}
    lab = {n: "L" if n < 3 else "C" for n in range(6)}
    edges = [(0, 1), (1, 0), (1, 2), (2, 3), (3, 4), (4, 5), (5, 3), (3, 0)]
    g = FollowGraph(range(6), edges)
    r = polarization_suite(g, lab)
    cross = 2 / 8  # (2,3) and (3,0)
    assert r.cross_group_ratio == pytest.approx(cross / 0.5)
    assert r.same_group_ratio == pytest.approx((1 - cross) / 0.5)
    # share of followees labeled "C" (first in sorted order) per node with followees
    f = {0: 0, 1: 0, 2: 1, 3: 0.5, 4: 1, 5: 1}
    assert r.polarization == pytest.approx(np.mean([2 * abs(v - 0.5) for v in f.values()]))
    e = np.array([[3, 1], [1, 3]]) / 8  # rows source C/L, cols target C/L; C sorts first
    a, b = e.sum(1), e.sum(0)
    assert r.assortativity == pytest.approx((np.trace(e) - a @ b) / (1 - a @ b), abs=1e-12)


def test_label_flip_symmetry():
    rng = np.random.default_rng(1)
    g = FollowGraph(range(30), [(int(u), int(v)) for u, v in rng.integers(30, size=(120, 2)) if u != v])
    lab = {n: "x" if rng.random() < 0.4 else "y" for n in g.nodes}
    flip = {n: "y" if v == "x" else "x" for n, v in lab.items()}
    a, b = polarization_suite(g, lab), polarization_suite(g, flip)
    assert a == b
    assert polarization(g, lab, "in") == polarization(g, flip, "in")


def test_prompts_are_templates():
    assert "{text}" in load_prompt("stance_humans")
    assert "{ideology}" in load_prompt("ideology_persona")


def test_remote_labeler_and_cache(tmp_path):
    seen = []

    def transport(body):
        seen.append(body)
        return {"label": "Liberal." if body["persona"] else "b) Negative"}

    r = RemoteLabeler(transport=transport, cache_path=tmp_path / "c.jsonl")
    assert r.label("tax the rich", "moderate") == "liberal"
    assert r.label("tax the rich", "moderate") == "liberal"
    assert len(seen) == 1 and "moderate" in seen[0]["prompt"]
    assert r.stance("humans are fine") == -1
    bad = RemoteLabeler(transport=lambda body: {"label": "banana"})
    with pytest.raises(PersonaFailure):
        bad.label("x", "liberal")
