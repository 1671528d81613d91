"""Independent reference implementations used by the tests.

Everything here is deliberately naive: plain loops, no shared code with the
package beyond the manifold primitives where a geometric quantity is needed.
"""

from fractions import Fraction
from itertools import product

import numpy as np

from hypie import center as C
from hypie.manifold import Lorentz


# --- ranking ---------------------------------------------------------------------------
def pairwise_auc(pos, neg):
    """O(n^2) AUC as an exact fraction: wins + ties/2 over all pairs."""
    twice = 0
    for p, q in product(pos, neg):
        if p > q:
            twice += 2
        elif p == q:
            twice += 1
    return Fraction(twice, 2 * len(pos) * len(neg))


def brute_ap(pos, neg):
    """Average precision from the definition: sum over thresholds of
    (recall_k - recall_{k-1}) * precision_k with one threshold per distinct score."""
    scores = np.concatenate([pos, neg])
    y = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
    ap, prev_recall = 0.0, 0.0
    for t in sorted(set(scores.tolist()), reverse=True):
        sel = scores >= t
        tp = float(np.sum(y[sel]))
        recall = tp / len(pos)
        precision = tp / float(np.sum(sel))
        ap += (recall - prev_recall) * precision
        prev_recall = recall
    return ap


# --- graphs ------------------------------------------------------------------------------
def _all_shortest_paths(adj, s, t):
    """Enumerate every shortest s-t path by iterative deepening DFS."""
    n = len(adj)
    dist = [-1] * n
    dist[s] = 0
    frontier = [s]
    while frontier:
        nxt = []
        for u in frontier:
            for v in adj[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    nxt.append(v)
        frontier = nxt
    if dist[t] < 0:
        return []
    paths = []

    def walk(path):
        u = path[-1]
        if u == t:
            paths.append(list(path))
            return
        for v in adj[u]:
            if dist[v] == dist[u] + 1 and len(path) <= dist[t]:
                path.append(v)
                walk(path)
                path.pop()

    walk([s])
    return [p for p in paths if len(p) == dist[t] + 1]


def brute_betweenness(n, edges):
    """Unnormalised betweenness as exact fractions over unordered pairs."""
    adj = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    bc = [Fraction(0)] * n
    for s in range(n):
        for t in range(s + 1, n):
            paths = _all_shortest_paths(adj, s, t)
            if not paths:
                continue
            for path in paths:
                for v in path[1:-1]:
                    bc[v] += Fraction(1, len(paths))
    return bc


def random_connected_graph(n, p, rng):
    """Random spanning tree plus extra Bernoulli(p) edges."""
    edges = set()
    order = rng.permutation(n)
    for i in range(1, n):
        j = int(rng.integers(0, i))
        u, v = int(order[i]), int(order[j])
        edges.add((min(u, v), max(u, v)))
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < p:
                edges.add((u, v))
    return sorted(edges)


# --- centers ----------------------------------------------------------------------------------
def perturbation_violations(points, best, objective, perturb, rng, trials=1000, rmin=1e-3, rmax=0.5):
    """Count perturbed candidates whose objective is <= the claimed minimiser's.

    Returns ``(violations, min_margin)`` where margin = f(candidate) - f(best).
    """
    f0 = objective(best)
    bad = 0
    margin = np.inf
    for _ in range(trials):
        r = rng.uniform(rmin, rmax)
        cand = perturb(best, r, rng)
        m = objective(cand) - f0
        margin = min(margin, m)
        if m <= 0:
            bad += 1
    return bad, margin


def euclid_perturb(c, r, rng):
    d = rng.standard_normal(c.shape)
    return c + r * d / np.linalg.norm(d)


def lorentz_perturb(man):
    """Move a hyperboloid point by geodesic length ``r`` in a random direction."""

    def move(c, r, rng):
        v = man.proj_tan(c[None], rng.standard_normal((1, c.shape[-1])))
        v = v / np.asarray(man.norm_tangent(c[None], v)).reshape(-1, 1) * r
        return man.expmap(c[None], v)[0]

    return move


def center_minimality_protocol(n_sets=100, trials=1000, seed=0):
    """Run both center minimality checks plus the geodesic diagnostic.

    Returns a dict with violation counts for the asserted objectives and the
    min margin / violation count of the reported geodesic-squared variant.
    """
    rng = np.random.default_rng(seed)
    man = Lorentz(-1.0)
    out = {"tangent_violations": 0, "lorentz_violations": 0, "geodesic_violations": 0,
           "tangent_margin": np.inf, "lorentz_margin": np.inf, "geodesic_margin": np.inf}
    move = lorentz_perturb(man)
    for _ in range(n_sets):
        n = int(rng.integers(2, 51))
        dim = int(rng.integers(2, 6))
        u = rng.standard_normal((n, dim)) * rng.uniform(0.1, 2.0)
        mean = np.asarray(C.tangent_mean(u))
        bad, m = perturbation_violations(
            u, mean, lambda c: C.sqdist_objective(u, c, C.TANGENT_EUCLIDEAN), euclid_perturb, rng, trials)
        out["tangent_violations"] += bad
        out["tangent_margin"] = min(out["tangent_margin"], m)

        z = man.expmap0(u)
        cen = np.asarray(C.lorentz_centroid(z, man))
        bad, m = perturbation_violations(
            z, cen, lambda c: C.sqdist_objective(z, c, C.LORENTZIAN_SQ, man), move, rng, trials)
        out["lorentz_violations"] += bad
        out["lorentz_margin"] = min(out["lorentz_margin"], m)

        bad, m = perturbation_violations(
            z, cen, lambda c: C.sqdist_objective(z, c, C.GEODESIC, man), move, rng, max(trials // 10, 1))
        out["geodesic_violations"] += bad
        out["geodesic_margin"] = min(out["geodesic_margin"], m)
    return out
