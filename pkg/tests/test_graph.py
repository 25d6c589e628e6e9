import itertools

import networkx as nx
import numpy as np
import pytest

from llmsocial.errors import DegenerateMixing, EmptyGraph, UnknownNode, UnlabeledNode
from llmsocial.graph import (
    FollowGraph, UGraph, assortativity, avg_clustering_by_degree, avg_shortest_path, closeness_centrality,
    connected_components, degree_histogram, degree_preserving_random, edge_overlap, greedy_modularity_communities,
    local_clustering, mixing_matrix, modularity, read_edge_list, reciprocity, write_edge_list,
)
from llmsocial.synthetic import random_digraph


def to_nx(g):
    h = nx.DiGraph() if g.directed else nx.Graph()
    h.add_nodes_from(g.nodes)
    h.add_edges_from(g.edges if g.directed else g.edge_list())
    return h


def test_reciprocity_examples(rng):
    full = FollowGraph("abc", [(u, v) for u in "abc" for v in "abc" if u != v])
    assert reciprocity(full) == 1.0
    star = FollowGraph("cxyz", [("c", x) for x in "xyz"])
    assert reciprocity(star) == 0.0
    g = FollowGraph(range(8))
    while g.n_edges() < 20:
        u, v = rng.integers(8, size=2).tolist()
        if u != v:
            g.add_edge(u, v)
    pairs = list(g.edges)
    scan = sum(any((c, d) == (b, a) for c, d in pairs) for a, b in pairs) / len(pairs)
    assert reciprocity(g) == scan
    with pytest.raises(EmptyGraph):
        reciprocity(FollowGraph("ab"))


def test_degree_histograms(rng):
    cycle = FollowGraph("abc", [("a", "b"), ("b", "c"), ("c", "a")])
    assert degree_histogram(cycle, "in") == {1: 3}
    assert degree_histogram(FollowGraph(), "in") == {}
    g = random_digraph(50, 0.08, rng)
    h = to_nx(g)
    for mode, degs in [("in", dict(h.in_degree())), ("out", dict(h.out_degree())),
                       ("undirected", dict(h.to_undirected().degree())),
                       ("mutual", dict(h.to_undirected(reciprocal=True).degree()))]:
        recount = {}
        for d in degs.values():
            recount[d] = recount.get(d, 0) + 1
        assert degree_histogram(g, mode) == dict(sorted(recount.items()))


def test_clustering(rng):
    tri = UGraph("abc", [("a", "b"), ("b", "c"), ("a", "c")])
    assert all(local_clustering(tri, n) == 1.0 for n in "abc")
    star = UGraph("cxyz", [("c", x) for x in "xyz"])
    assert local_clustering(star, "c") == 0.0
    with pytest.raises(UnknownNode):
        local_clustering(star, "q")
    g = random_digraph(12, 0.3, rng).undirected()
    for n in g.nodes:
        nb = sorted(g.adj[n])
        k = len(nb)
        links = sum(1 for a, b in itertools.combinations(nb, 2) if g.has_edge(a, b))
        expected = 2 * links / (k * (k - 1)) if k > 1 else 0.0
        assert local_clustering(g, n) == pytest.approx(expected, abs=1e-12)
    by_deg = avg_clustering_by_degree(g)
    ref = nx.clustering(to_nx(g))
    for d, v in by_deg.items():
        assert v == pytest.approx(np.mean([ref[n] for n in g.nodes if g.degree(n) == d]), abs=1e-12)


def test_components(rng):
    two = UGraph(range(6), [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    assert connected_components(two) == [3, 3]
    path = UGraph(range(5), [(i, i + 1) for i in range(4)])
    assert connected_components(path) == [5]
    g = random_digraph(40, 0.03, rng)
    ref = sorted((len(c) for c in nx.weakly_connected_components(to_nx(g))), reverse=True)
    assert connected_components(g) == ref


def test_shortest_paths():
    path = UGraph("abc", [("a", "b"), ("b", "c")])
    assert avg_shortest_path(path, "exact").mean == pytest.approx(4 / 3)
    k5 = UGraph(range(5), itertools.combinations(range(5), 2))
    ps = avg_shortest_path(k5, "exact")
    assert (ps.mean, ps.sd) == (1.0, 0.0)


def test_shortest_paths_match_floyd_warshall():
    rng = np.random.default_rng(7)
    g = random_digraph(30, 0.08, rng)
    n = len(g)
    idx = {v: i for i, v in enumerate(g.nodes)}
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0)
    for u, v in g.edges:
        d[idx[u], idx[v]] = 1
    for k in range(n):
        d = np.minimum(d, d[:, [k]] + d[[k], :])
    off = ~np.eye(n, dtype=bool)
    finite = d[off & np.isfinite(d)]
    ps = avg_shortest_path(g, "exact")
    assert ps.mean == pytest.approx(finite.mean(), abs=1e-9)
    assert ps.sd == pytest.approx(finite.std(), abs=1e-9)
    assert ps.n_unreachable == int((off & ~np.isfinite(d)).sum())


def test_sampled_paths_are_seeded_and_close():
    g = random_digraph(60, 0.1, np.random.default_rng(2))
    a = avg_shortest_path(g, "sampled", pairs=4000, seed=5)
    assert a == avg_shortest_path(g, "sampled", pairs=4000, seed=5)
    assert a.mean == pytest.approx(avg_shortest_path(g, "exact").mean, abs=0.05)


def test_closeness():
    star = UGraph(range(5), [(0, i) for i in range(1, 5)])
    assert closeness_centrality(star, 0) == 1.0
    path = UGraph("abc", [("a", "b"), ("b", "c")])
    assert closeness_centrality(path, "b") == 1.0
    assert closeness_centrality(path, "a") == pytest.approx(2 / 3)
    lone = UGraph("ab")
    assert closeness_centrality(lone, "a") == 0.0


def test_closeness_matches_networkx(rng):
    g = random_digraph(25, 0.08, rng)
    h = to_nx(g)
    ref_in = nx.closeness_centrality(h, wf_improved=True)
    ref_out = nx.closeness_centrality(h.reverse(), wf_improved=True)
    for n in g.nodes:
        assert closeness_centrality(g, n, "in") == pytest.approx(ref_in[n], abs=1e-12)
        assert closeness_centrality(g, n, "out") == pytest.approx(ref_out[n], abs=1e-12)


def test_rewiring_preserves_degrees(rng):
    g = random_digraph(30, 0.1, rng)
    r = degree_preserving_random(g, seed=4)
    for n in g.nodes:
        assert len(r.succ[n]) == len(g.succ[n]) and len(r.pred[n]) == len(g.pred[n])
    assert all(u != v for u, v in r.edges)
    cyc = FollowGraph(range(4), [(i, (i + 1) % 4) for i in range(4)])
    out = degree_preserving_random(cyc, seed=1)
    assert all(len(out.succ[n]) == 1 and len(out.pred[n]) == 1 for n in range(4))
    u = random_digraph(30, 0.1, rng).undirected()
    ru = degree_preserving_random(u, seed=3)
    assert all(ru.degree(n) == u.degree(n) for n in u.nodes)
    assert edge_overlap(u, ru) < 1.0


def test_modularity_matches_networkx(rng):
    g = random_digraph(15, 0.2, rng).undirected()
    labels = {n: int(rng.integers(3)) for n in g.nodes}
    comms = [{n for n in g.nodes if labels[n] == c} for c in range(3)]
    comms = [c for c in comms if c]
    assert modularity(g, labels) == pytest.approx(nx.community.modularity(to_nx(g), comms), abs=1e-12)


def test_two_cliques_with_bridge():
    edges = list(itertools.combinations(range(4), 2)) + list(itertools.combinations(range(4, 8), 2)) + [(3, 4)]
    part = greedy_modularity_communities(UGraph(range(8), edges))
    assert part.communities == [[0, 1, 2, 3], [4, 5, 6, 7]]


def test_single_clique_is_one_community():
    part = greedy_modularity_communities(UGraph(range(5), itertools.combinations(range(5), 2)))
    assert len(part.communities) == 1


def test_greedy_agrees_with_networkx_on_karate():
    h = nx.karate_club_graph()
    g = UGraph(h.nodes, h.edges)
    ours = greedy_modularity_communities(g)
    ref = nx.community.greedy_modularity_communities(h, weight=None)
    assert ours.modularity == pytest.approx(nx.community.modularity(h, ref, weight=None), abs=1e-9)


def test_assortativity_examples():
    g = FollowGraph(range(6), [(u, v) for c in ((0, 1, 2), (3, 4, 5)) for u in c for v in c if u != v])
    labels = {n: "a" if n < 3 else "b" for n in range(6)}
    assert assortativity(g, labels) == 1.0
    bip = FollowGraph(range(6), [(u, v) for u in range(3) for v in range(3, 6)]
                      + [(v, u) for u in range(3) for v in range(3, 6)])
    assert assortativity(bip, labels) == -1.0
    with pytest.raises(UnlabeledNode):
        assortativity(g, {0: "a"})
    with pytest.raises(DegenerateMixing):
        assortativity(g, {n: "a" for n in range(6)})


def test_assortativity_matches_tabulation_and_networkx():
    rng = np.random.default_rng(11)
    g = random_digraph(200, 0.03, rng)
    labels = {n: ["x", "y", "z"][int(rng.integers(3))] for n in g.nodes}
    cats = sorted(set(labels.values()))
    e = np.zeros((3, 3))
    for u, v in g.edges:
        e[cats.index(labels[u]), cats.index(labels[v])] += 1
    e /= e.sum()
    a, b = e.sum(1), e.sum(0)
    r = (np.trace(e) - a @ b) / (1 - a @ b)
    assert assortativity(g, labels) == pytest.approx(r, abs=1e-12)
    _, M = mixing_matrix(g, labels)
    assert np.allclose(M, e)
    h = to_nx(g)
    nx.set_node_attributes(h, labels, "lab")
    assert assortativity(g, labels) == pytest.approx(nx.attribute_assortativity_coefficient(h, "lab"), abs=1e-12)


def test_edge_list_round_trip(tmp_path):
    g = FollowGraph(["a", "b", "c"], {("a", "b"): 3, ("c", "a"): 5})
    p = tmp_path / "edges.txt"
    write_edge_list(g, p)
    assert read_edge_list(p).edges == g.edges
