"""Follow-graph construction and structural metrics.

``FollowGraph`` is the directed follow graph (edge ``u -> v`` means ``u``
follows ``v``).  Its ``undirected()`` view has an edge wherever either
direction exists; ``mutual()`` keeps only reciprocated pairs.  Both views
are :class:`UGraph` instances.  Metric functions accept either kind and use
``successors`` for traversal, so a ``UGraph`` behaves like a symmetric
digraph.
"""

from __future__ import annotations

from collections import Counter, defaultdict, deque
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping

import numpy as np

from .errors import (
    DegenerateMixing,
    EmptyGraph,
    NoReachablePairs,
    UnknownNode,
    UnlabeledNode,
)


class FollowGraph:
    directed = True

    def __init__(self, nodes: Iterable = (), edges: Mapping | Iterable = ()):
        self.succ: dict = {}
        self.pred: dict = {}
        self.edges: dict[tuple, int] = {}
        for n in nodes:
            self.add_node(n)
        items = edges.items() if isinstance(edges, Mapping) else ((e[:2], e[2] if len(e) > 2 else 0) for e in edges)
        for (u, v), ts in items:
            self.add_edge(u, v, ts)

    @classmethod
    def from_snapshot(cls, snapshot, include_isolated: bool = True) -> "FollowGraph":
        nodes = sorted(snapshot.agents) if include_isolated else ()
        return cls(nodes, dict(sorted(snapshot.follow_graph.items())))

    def add_node(self, n) -> None:
        if n not in self.succ:
            self.succ[n] = set()
            self.pred[n] = set()

    def add_edge(self, u, v, ts: int = 0) -> None:
        if u == v:
            raise ValueError(f"self-loop on {u!r}")
        self.add_node(u)
        self.add_node(v)
        self.edges[(u, v)] = ts
        self.succ[u].add(v)
        self.pred[v].add(u)

    @property
    def nodes(self) -> list:
        return sorted(self.succ)

    def __len__(self) -> int:
        return len(self.succ)

    def n_edges(self) -> int:
        return len(self.edges)

    def has_edge(self, u, v) -> bool:
        return (u, v) in self.edges

    def successors(self, n):
        return self.succ[n]

    def undirected(self) -> "UGraph":
        g = UGraph(self.nodes)
        for u, v in self.edges:
            g.add_edge(u, v)
        return g

    def mutual(self) -> "UGraph":
        g = UGraph(self.nodes)
        for u, v in self.edges:
            if (v, u) in self.edges:
                g.add_edge(u, v)
        return g

    def subgraph(self, keep: Iterable) -> "FollowGraph":
        keep = set(keep)
        return FollowGraph(
            sorted(n for n in self.succ if n in keep),
            {(u, v): ts for (u, v), ts in self.edges.items() if u in keep and v in keep},
        )

    def copy(self) -> "FollowGraph":
        return FollowGraph(self.nodes, dict(self.edges))


class UGraph:
    directed = False

    def __init__(self, nodes: Iterable = (), edges: Iterable = ()):
        self.adj: dict = {}
        for n in nodes:
            self.add_node(n)
        for u, v in edges:
            self.add_edge(u, v)

    def add_node(self, n) -> None:
        self.adj.setdefault(n, set())

    def add_edge(self, u, v) -> None:
        if u == v:
            raise ValueError(f"self-loop on {u!r}")
        self.add_node(u)
        self.add_node(v)
        self.adj[u].add(v)
        self.adj[v].add(u)

    @property
    def nodes(self) -> list:
        return sorted(self.adj)

    @property
    def succ(self):
        return self.adj

    def __len__(self) -> int:
        return len(self.adj)

    def successors(self, n):
        return self.adj[n]

    def degree(self, n) -> int:
        return len(self.adj[n])

    def edge_list(self) -> list[tuple]:
        order = {n: i for i, n in enumerate(self.nodes)}
        return sorted(
            ((u, v) for u in self.adj for v in self.adj[u] if order[u] < order[v]),
            key=lambda e: (order[e[0]], order[e[1]]),
        )

    def n_edges(self) -> int:
        return sum(len(s) for s in self.adj.values()) // 2

    def has_edge(self, u, v) -> bool:
        return v in self.adj.get(u, ())

    def subgraph(self, keep: Iterable) -> "UGraph":
        keep = set(keep)
        return UGraph(
            sorted(n for n in self.adj if n in keep),
            [(u, v) for u, v in self.edge_list() if u in keep and v in keep],
        )


def as_undirected(g) -> UGraph:
    return g.undirected() if g.directed else g


# ---------------------------------------------------------------------------
# Degree, reciprocity, clustering, components

def reciprocity(g: FollowGraph) -> float:
    """Fraction of directed edges whose reverse edge also exists."""
    if not g.edges:
        raise EmptyGraph("reciprocity needs at least one directed edge")
    return sum((v, u) in g.edges for u, v in g.edges) / len(g.edges)


def degree_histogram(g, mode: str = "in") -> dict[int, int]:
    """``degree -> number of nodes``; counts sum to the node count."""
    if mode in ("in", "out"):
        if not g.directed:
            raise ValueError(f"mode {mode!r} needs a directed graph")
        adj = g.pred if mode == "in" else g.succ
        degrees = (len(adj[n]) for n in g.succ)
    elif mode == "undirected":
        u = as_undirected(g)
        degrees = (len(u.adj[n]) for n in u.adj)
    elif mode == "mutual":
        u = g.mutual() if g.directed else g
        degrees = (len(u.adj[n]) for n in u.adj)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return dict(sorted(Counter(degrees).items()))


def local_clustering(g: UGraph, node) -> float:
    if node not in g.adj:
        raise UnknownNode(node)
    nbrs = g.adj[node]
    k = len(nbrs)
    if k < 2:
        return 0.0
    links = sum(len(g.adj[v] & nbrs) for v in nbrs) // 2
    return 2.0 * links / (k * (k - 1))


def avg_clustering_by_degree(g: UGraph) -> dict[int, float]:
    g = as_undirected(g)
    acc: dict[int, list[float]] = {}
    for n in g.nodes:
        acc.setdefault(len(g.adj[n]), []).append(local_clustering(g, n))
    return {k: float(np.mean(v)) for k, v in sorted(acc.items())}


def connected_components(g) -> list[int]:
    """Component sizes in descending order (weak components for digraphs)."""
    g = as_undirected(g)
    seen = set()
    sizes = []
    for s in g.nodes:
        if s in seen:
            continue
        seen.add(s)
        queue = deque([s])
        size = 0
        while queue:
            u = queue.popleft()
            size += 1
            for v in g.adj[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        sizes.append(size)
    return sorted(sizes, reverse=True)


# ---------------------------------------------------------------------------
# Paths and closeness

def bfs_distances(g, source, reverse: bool = False) -> dict:
    adj = g.pred if (reverse and g.directed) else g.succ
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        d = dist[u] + 1
        for v in adj[u]:
            if v not in dist:
                dist[v] = d
                queue.append(v)
    return dist


@dataclass(frozen=True)
class PathStats:
    mean: float
    sd: float
    n_pairs: int
    n_unreachable: int
    policy: str


def avg_shortest_path(g, policy: str = "auto", pairs: int = 100_000, seed: int = 0) -> PathStats:
    """Mean and (population) sd of shortest-path lengths over reachable ordered pairs.

    ``policy`` is ``"exact"`` (all pairs), ``"sampled"`` (``pairs`` ordered
    pairs drawn uniformly with ``seed``) or ``"auto"`` (exact up to 10,000
    nodes).  Unreachable pairs are excluded from the statistics and counted.
    """
    nodes = g.nodes
    n = len(nodes)
    if policy == "auto":
        policy = "exact" if n <= 10_000 else "sampled"
    lengths: list[int] = []
    unreachable = 0
    if policy == "exact":
        for s in nodes:
            dist = bfs_distances(g, s)
            lengths.extend(d for t, d in dist.items() if t != s)
            unreachable += n - len(dist)
    elif policy == "sampled":
        if n < 2:
            raise NoReachablePairs("need at least two nodes")
        rng = np.random.default_rng(seed)
        src = rng.integers(0, n, size=pairs)
        dst = rng.integers(0, n - 1, size=pairs)
        dst = dst + (dst >= src)  # uniform over targets != source
        by_source: dict[int, list[int]] = {}
        for s, t in zip(src.tolist(), dst.tolist()):
            by_source.setdefault(s, []).append(t)
        for s in sorted(by_source):
            dist = bfs_distances(g, nodes[s])
            for t in by_source[s]:
                d = dist.get(nodes[t])
                if d is None:
                    unreachable += 1
                else:
                    lengths.append(d)
    else:
        raise ValueError(f"unknown policy {policy!r}")
    if not lengths:
        raise NoReachablePairs("no reachable node pairs")
    arr = np.asarray(lengths, dtype=float)
    return PathStats(float(arr.mean()), float(arr.std()), len(lengths), unreachable, policy)


def closeness_centrality(g, node, direction: str = "out") -> float:
    """Closeness with Wasserman-Faust scaling for disconnected graphs.

    ``(r-1)/sum(d) * (r-1)/(n-1)`` where ``r`` counts nodes reachable from
    ``node`` (itself included).  ``direction="in"`` measures distances *to*
    the node along follow edges.
    """
    if node not in g.succ:
        raise UnknownNode(node)
    n = len(g)
    dist = bfs_distances(g, node, reverse=(direction == "in"))
    total = sum(dist.values())
    r = len(dist)
    if total == 0 or n < 2:
        return 0.0
    return (r - 1) / total * (r - 1) / (n - 1)


# ---------------------------------------------------------------------------
# Randomisation

def degree_preserving_random(g, seed: int = 0, swaps_per_edge: int = 10):
    """Rewire by double-edge swaps, preserving every node's (in/out) degree.

    Directed: ``a->b, c->d`` become ``a->d, c->b``.  Undirected: the second
    edge's orientation is drawn at random.  Swaps that would create a
    self-loop or a duplicate edge are skipped.  Returns a new graph.
    """
    rng = np.random.default_rng(seed)
    if g.directed:
        edges = list(g.edges.items())
        m = len(edges)
        if m < 2:
            return g.copy()
        present = set(g.edges)
        attempts = swaps_per_edge * m
        picks = rng.integers(0, m, size=(attempts, 2))
        for i, j in picks.tolist():
            if i == j:
                continue
            (a, b), ts1 = edges[i]
            (c, d), ts2 = edges[j]
            if a == c or b == d or a == d or c == b:
                continue
            if (a, d) in present or (c, b) in present:
                continue
            present.difference_update([(a, b), (c, d)])
            present.update([(a, d), (c, b)])
            edges[i] = ((a, d), ts1)
            edges[j] = ((c, b), ts2)
        return FollowGraph(g.nodes, dict(edges))

    edges = g.edge_list()
    m = len(edges)
    if m < 2:
        return UGraph(g.nodes, edges)
    present = {frozenset(e) for e in edges}
    attempts = swaps_per_edge * m
    picks = rng.integers(0, m, size=(attempts, 2))
    flips = rng.integers(0, 2, size=attempts)
    for (i, j), flip in zip(picks.tolist(), flips.tolist()):
        if i == j:
            continue
        a, b = edges[i]
        c, d = edges[j] if not flip else edges[j][::-1]
        if len({a, b, c, d}) < 4:
            continue
        e1, e2 = frozenset((a, d)), frozenset((c, b))
        if e1 in present or e2 in present:
            continue
        present.difference_update([frozenset((a, b)), frozenset((c, d))])
        present.update([e1, e2])
        edges[i] = (a, d)
        edges[j] = (c, b)
    return UGraph(g.nodes, edges)


def edge_overlap(g1, g2) -> float:
    """Share of ``g1``'s edges that are also edges of ``g2``."""
    if g1.directed:
        e1, e2 = set(g1.edges), set(g2.edges)
    else:
        e1 = {frozenset(e) for e in g1.edge_list()}
        e2 = {frozenset(e) for e in g2.edge_list()}
    return len(e1 & e2) / len(e1) if e1 else 0.0


# ---------------------------------------------------------------------------
# Communities

@dataclass(frozen=True)
class Partition:
    assignment: dict
    modularity: float

    @property
    def communities(self) -> list[list]:
        groups: dict[int, list] = {}
        for node, c in self.assignment.items():
            groups.setdefault(c, []).append(node)
        return [sorted(groups[c]) for c in sorted(groups)]


def modularity(g, assignment: Mapping) -> float:
    """Newman modularity of a node -> community map on the undirected view."""
    g = as_undirected(g)
    m = g.n_edges()
    if m == 0:
        raise EmptyGraph("modularity undefined without edges")
    inside: Counter = Counter()
    degree: Counter = Counter()
    for u, v in g.edge_list():
        if assignment[u] == assignment[v]:
            inside[assignment[u]] += 1
    for n in g.nodes:
        degree[assignment[n]] += len(g.adj[n])
    return float(sum(inside[c] / m - (degree[c] / (2 * m)) ** 2 for c in degree))


def greedy_modularity_communities(g) -> Partition:
    """Agglomerative greedy modularity maximisation (Clauset-Newman-Moore).

    Starts from singletons, repeatedly merges the connected pair of
    communities with the largest modularity gain ``2 (e_ij - a_i a_j)``
    (ties: lexicographically smallest community-id pair, ids being node
    positions in sorted order), and returns the partition at peak modularity.
    """
    g = as_undirected(g)
    m = g.n_edges()
    if m == 0:
        raise EmptyGraph("community detection needs at least one edge")
    nodes = g.nodes
    idx = {n: i for i, n in enumerate(nodes)}
    two_m = 2.0 * m
    a = {i: len(g.adj[n]) / two_m for i, n in enumerate(nodes)}
    e: dict[int, dict[int, float]] = {i: {} for i in range(len(nodes))}
    for u, v in g.edge_list():
        i, j = idx[u], idx[v]
        e[i][j] = e[i].get(j, 0.0) + 1.0 / two_m
        e[j][i] = e[j].get(i, 0.0) + 1.0 / two_m
    members = {i: [i] for i in range(len(nodes))}

    q = -sum(x * x for x in a.values())
    best_q = q
    best = {i: list(ms) for i, ms in members.items()}
    while True:
        best_pair = None
        best_gain = -np.inf
        for i in sorted(e):
            ai = a[i]
            row = e[i]
            for j in sorted(row):
                if j <= i:
                    continue
                gain = 2.0 * (row[j] - ai * a[j])
                if gain > best_gain + 1e-15:
                    best_gain, best_pair = gain, (i, j)
        if best_pair is None:
            break
        i, j = best_pair
        for k, ejk in e.pop(j).items():
            if k == i:
                continue
            e[i][k] = e[i].get(k, 0.0) + ejk
            e[k][i] = e[i][k]
            e[k].pop(j, None)
        e[i].pop(j, None)
        a[i] += a.pop(j)
        members[i].extend(members.pop(j))
        q += best_gain
        if q > best_q + 1e-12:
            best_q = q
            best = {c: list(ms) for c, ms in members.items()}

    ordered = sorted(best.values(), key=min)
    assignment = {nodes[i]: c for c, ms in enumerate(ordered) for i in sorted(ms)}
    assignment = {n: assignment[n] for n in nodes}
    return Partition(assignment, modularity(g, assignment))


# ---------------------------------------------------------------------------
# Assortativity

def _mixing_counts(g, labels: Mapping) -> tuple[list, np.ndarray]:
    cats = sorted({labels[n] for n in g.nodes if n in labels}, key=repr)
    pos = {c: i for i, c in enumerate(cats)}
    M = np.zeros((len(cats), len(cats)), dtype=np.int64)
    if g.directed:
        pairs = g.edges.keys()
    else:
        pairs = [p for u, v in g.edge_list() for p in ((u, v), (v, u))]
    for u, v in pairs:
        for n in (u, v):
            if n not in labels:
                raise UnlabeledNode(n)
        M[pos[labels[u]], pos[labels[v]]] += 1
    if M.sum() == 0:
        raise EmptyGraph("assortativity needs at least one edge")
    return cats, M


def mixing_matrix(g, labels: Mapping) -> tuple[list, np.ndarray]:
    """Normalised category mixing matrix ``e[source_cat, target_cat]``.

    Directed graphs count each ordered edge once; undirected graphs count
    each edge in both directions, which makes the matrix symmetric.
    """
    cats, M = _mixing_counts(g, labels)
    return cats, M / M.sum()


def assortativity(g, labels: Mapping[Hashable, Hashable]) -> float:
    """Newman's categorical assortativity coefficient."""
    _, M = _mixing_counts(g, labels)
    # (m tr - sum a_i b_i) / (m^2 - sum a_i b_i) on integer counts: exact under relabelling
    m = int(M.sum())
    ab = sum(int(x) * int(y) for x, y in zip(M.sum(axis=1), M.sum(axis=0)))
    denom = m * m - ab
    if denom == 0:
        raise DegenerateMixing("all edge endpoints share one category")
    return (m * int(np.trace(M)) - ab) / denom


def group_ratios(g: FollowGraph, labels: Mapping, weighting: str = "nodes") -> tuple[float, float]:
    """Observed over expected share of cross-label and same-label edges.

    For two labels the expected cross share under random mixing is
    ``2 f (1 - f)`` with ``f`` the fraction of nodes (``weighting="nodes"``)
    or of total degree (``weighting="degree"``) carrying the first label.
    """
    edges = [(u, v) for u in g.nodes for v in g.successors(u)]
    if not edges:
        raise EmptyClass("graph has no edges")
    cats = sorted(set(labels[n] for n in g.nodes))
    if len(cats) != 2:
        raise EmptyClass(f"need exactly two labels, found {cats}")
    if weighting == "nodes":
        k, n = sum(labels[n] == cats[0] for n in g.nodes), len(g)
    elif weighting == "degree":
        deg = defaultdict(int)
        for u, v in edges:
            deg[u] += 1
            deg[v] += 1
        k, n = sum(d for n, d in deg.items() if labels[n] == cats[0]), sum(deg.values())
    else:
        raise ValueError("weighting must be 'nodes' or 'degree'")
    # integer counts keep the result exactly symmetric under a label swap
    n_cross = sum(labels[u] != labels[v] for u, v in edges)
    m = len(edges)
    exp_cross = 2 * k * (n - k) / (n * n)
    exp_same = (k * k + (n - k) * (n - k)) / (n * n)
    return n_cross / m / exp_cross, (m - n_cross) / m / exp_same


# ---------------------------------------------------------------------------
# Edge-list text format: "follower followee ts" per line

def write_edge_list(g: FollowGraph, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for (u, v), ts in sorted(g.edges.items()):
            fh.write(f"{u} {v} {ts}\n")


def read_edge_list(path) -> FollowGraph:
    g = FollowGraph()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) not in (2, 3):
                raise ValueError(f"line {lineno}: expected 'follower followee [ts]'")
            g.add_edge(parts[0], parts[1], int(parts[2]) if len(parts) == 3 else 0)
    return g
