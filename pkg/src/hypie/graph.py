"""Undirected graphs, synthetic TREE-L / TREE-H generation, homophily and
centrality baselines."""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np

# per-class Gaussian feature parameters (mean, variance); class 0 is the root class
CLASS_FEATURE_PARAMS = ((0.0, 1.0), (1.0, 1.0), (2.0, 1.0), (3.0, 1.0))


class DisconnectedGraphError(ValueError):
    pass


@dataclass
class Graph:
    n: int
    edges: np.ndarray  # (m, 2) int, u < v, sorted, no self-loops
    features: np.ndarray | None = None
    labels: np.ndarray | None = None
    depth: np.ndarray | None = None
    _adj: list | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.n = int(self.n)
        self.edges = canonical_edges(self.edges, self.n)
        if self.features is not None:
            self.features = np.asarray(self.features, dtype=np.float64)
            if self.features.ndim != 2 or self.features.shape[0] != self.n:
                raise ValueError(f"features must have {self.n} rows, got {self.features.shape}")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
            if len(self.labels) != self.n:
                raise ValueError(f"labels must have length {self.n}, got {len(self.labels)}")
        if self.depth is not None:
            self.depth = np.asarray(self.depth, dtype=np.int64).reshape(-1)
            if len(self.depth) != self.n:
                raise ValueError(f"depth must have length {self.n}, got {len(self.depth)}")
            if np.count_nonzero(self.depth == 0) != 1:
                raise ValueError("depth vector must contain exactly one root (depth 0)")

    @property
    def num_edges(self):
        return len(self.edges)

    @property
    def num_classes(self):
        return 0 if self.labels is None else int(self.labels.max()) + 1

    def adjacency_list(self):
        if self._adj is None:
            adj = [[] for _ in range(self.n)]
            for u, v in self.edges:
                adj[u].append(int(v))
                adj[v].append(int(u))
            self._adj = [np.array(sorted(a), dtype=np.int64) for a in adj]
        return self._adj

    def degrees(self):
        deg = np.zeros(self.n, dtype=np.int64)
        np.add.at(deg, self.edges[:, 0], 1)
        np.add.at(deg, self.edges[:, 1], 1)
        return deg

    def directed_edges(self, self_loops=False):
        """(rows, cols) listing each undirected edge both ways (+ optional loops)."""
        rows = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        cols = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        if self_loops:
            loop = np.arange(self.n)
            rows, cols = np.concatenate([rows, loop]), np.concatenate([cols, loop])
        order = np.lexsort((cols, rows))
        return rows[order], cols[order]

    def edge_set(self):
        return {(int(u), int(v)) for u, v in self.edges}

    def with_edges(self, edges):
        """Same nodes/attributes, different edge list."""
        return Graph(self.n, edges, self.features, self.labels, self.depth)

    def with_features(self, features):
        return Graph(self.n, self.edges, features, self.labels, self.depth)


def canonical_edges(edges, n):
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(e) == 0:
        return e
    if e.min() < 0 or e.max() >= n:
        raise ValueError(f"edge endpoint out of range [0, {n})")
    e = e[e[:, 0] != e[:, 1]]
    e = np.sort(e, axis=1)
    return np.unique(e, axis=0)


def gen_tree(branching=3, node_budget=1093, variant="H", feature_dim=32, seed=0):
    """Complete ``branching``-ary tree filled level by level up to the budget.

    TREE-H labels each of the root's subtrees by its own class and gives the
    root a class of its own. TREE-L labels by level, with the first four
    levels sharing class 0 and each deeper level getting the next class.
    Features are drawn per class from ``N(mean, variance)``.
    """
    if branching < 2:
        raise ValueError("branching must be >= 2")
    if node_budget < 1:
        raise ValueError("node budget must be >= 1")
    variant = str(variant).upper()
    if variant not in ("H", "L"):
        raise ValueError(f"variant must be 'H' or 'L', got {variant!r}")
    n = int(node_budget)
    child = np.arange(1, n)
    parent = (child - 1) // branching
    edges = np.stack([parent, child], axis=1)
    depth = np.zeros(n, dtype=np.int64)
    for v in range(1, n):
        depth[v] = depth[(v - 1) // branching] + 1

    labels = np.zeros(n, dtype=np.int64)
    if variant == "H":
        # root keeps class 0; everything else inherits its depth-1 ancestor's index
        for v in range(1, n):
            labels[v] = v if depth[v] == 1 else labels[(v - 1) // branching]
    else:
        labels = np.minimum(np.clip(depth - 3, 0, None), len(CLASS_FEATURE_PARAMS) - 1)

    rng = np.random.default_rng(seed)
    features = None
    if feature_dim:
        features = np.empty((n, feature_dim))
        for cls in range(int(labels.max()) + 1):
            mask = labels == cls
            mu, var = CLASS_FEATURE_PARAMS[cls % len(CLASS_FEATURE_PARAMS)]
            features[mask] = rng.normal(mu, np.sqrt(var), size=(int(mask.sum()), feature_dim))
    return Graph(n, edges, features, labels, depth)


def homophily(g):
    """Mean fraction of same-label neighbours per node (isolated nodes skipped)."""
    if g.labels is None:
        raise ValueError("homophily needs node labels")
    adj = g.adjacency_list()
    rates = []
    isolated = 0
    for v in range(g.n):
        nb = adj[v]
        if len(nb) == 0:
            isolated += 1
            continue
        rates.append(np.mean(g.labels[nb] == g.labels[v]))
    if isolated:
        warnings.warn(f"{isolated} isolated node(s) excluded from homophily", stacklevel=2)
    return float(np.mean(rates))


def bfs_distances(g, source):
    adj = g.adjacency_list()
    dist = np.full(g.n, -1, dtype=np.int64)
    dist[source] = 0
    q = deque([source])
    while q:
        u = q.popleft()
        for w in adj[u]:
            if dist[w] < 0:
                dist[w] = dist[u] + 1
                q.append(w)
    return dist


def is_connected(g):
    return g.n > 0 and bool(np.all(bfs_distances(g, 0) >= 0))


def _brandes(g):
    adj = g.adjacency_list()
    bc = np.zeros(g.n)
    for s in range(g.n):
        stack = []
        preds = [[] for _ in range(g.n)]
        sigma = np.zeros(g.n)
        sigma[s] = 1.0
        dist = np.full(g.n, -1, dtype=np.int64)
        dist[s] = 0
        q = deque([s])
        while q:
            v = q.popleft()
            stack.append(v)
            for w in adj[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    q.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = np.zeros(g.n)
        while stack:
            w = stack.pop()
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                bc[w] += delta[w]
    # every unordered pair was counted from both endpoints
    return bc / 2.0


def centrality(g, kind="degree"):
    """Degree, betweenness (unnormalised) or closeness centrality per node."""
    if kind == "degree":
        return g.degrees().astype(np.float64)
    if kind not in ("betweenness", "closeness"):
        raise ValueError(f"unknown centrality {kind!r}")
    if not is_connected(g):
        raise DisconnectedGraphError(f"{kind} centrality needs a connected graph")
    if kind == "betweenness":
        return _brandes(g)
    out = np.zeros(g.n)
    for v in range(g.n):
        total = bfs_distances(g, v).sum()
        out[v] = (g.n - 1) / total if total > 0 else 0.0
    return out


def most_central(g, kind="degree"):
    """Index of the most central node; ties go to the lowest index."""
    return int(np.argmax(centrality(g, kind)))
