"""Plain-text dataset I/O, train/val/test splits and embedding files."""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass

import numpy as np

from hypie.graph import Graph
from hypie.manifold import Lorentz, get_manifold

EDGES_FILE = "graph.edges"
FEATURES_FILE = "features.csv"
LABELS_FILE = "labels.txt"
DEPTH_FILE = "depth.txt"


class FormatError(ValueError):
    pass


# --- graph files ------------------------------------------------------------------
def _read_int_pairs(path):
    pairs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) != 2:
                raise FormatError(f"{path}:{lineno}: expected 'u v', got {s!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-integer node id in {s!r}") from None
            if u < 0 or v < 0:
                raise FormatError(f"{path}:{lineno}: negative node id")
            pairs.append((u, v))
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def _read_ints(path):
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s:
                continue
            try:
                out.append(int(s))
            except ValueError:
                raise FormatError(f"{path}:{lineno}: expected one integer, got {s!r}") from None
    return np.array(out, dtype=np.int64)


def _read_features(path):
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s:
                continue
            try:
                rows.append([float(t) for t in s.split(",")])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: malformed feature row") from None
            if len(rows[-1]) != len(rows[0]):
                raise FormatError(f"{path}:{lineno}: {len(rows[-1])} columns, expected {len(rows[0])}")
    return np.array(rows, dtype=np.float64)


def load_dataset(edges_path, features_path=None, labels_path=None, depth_path=None):
    """Read a graph; node count comes from the attribute files when given."""
    edges = _read_int_pairs(edges_path)
    features = _read_features(features_path) if features_path else None
    labels = _read_ints(labels_path) if labels_path else None
    depth = _read_ints(depth_path) if depth_path else None
    sizes = {len(a) for a in (features, labels, depth) if a is not None}
    if len(sizes) > 1:
        raise FormatError(f"attribute files disagree on the node count: {sorted(sizes)}")
    n = sizes.pop() if sizes else (int(edges.max()) + 1 if len(edges) else 0)
    if len(edges) and edges.max() >= n:
        raise FormatError(f"edge endpoint {int(edges.max())} has no node (n = {n})")
    return Graph(n, edges, features, labels, depth)


def load_dir(path):
    """Load the directory layout written by :func:`save_dataset`."""
    opt = lambda name: os.path.join(path, name) if os.path.exists(os.path.join(path, name)) else None  # noqa: E731
    return load_dataset(os.path.join(path, EDGES_FILE), opt(FEATURES_FILE), opt(LABELS_FILE), opt(DEPTH_FILE))


def save_dataset(g, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, EDGES_FILE), "w") as fh:
        fh.writelines(f"{u} {v}\n" for u, v in g.edges)
    if g.features is not None:
        with open(os.path.join(out_dir, FEATURES_FILE), "w") as fh:
            for row in g.features:
                fh.write(",".join(repr(float(x)) for x in row) + "\n")
    for name, arr in ((LABELS_FILE, g.labels), (DEPTH_FILE, g.depth)):
        if arr is not None:
            with open(os.path.join(out_dir, name), "w") as fh:
                fh.writelines(f"{int(x)}\n" for x in arr)


# --- splits ------------------------------------------------------------------------
@dataclass
class LinkSplit:
    train_pos: np.ndarray
    val_pos: np.ndarray
    test_pos: np.ndarray
    val_neg: np.ndarray
    test_neg: np.ndarray
    ratios: tuple


@dataclass
class NodeSplit:
    train_mask: np.ndarray
    val_mask: np.ndarray
    test_mask: np.ndarray


def _check_ratios(ratios):
    r = tuple(float(x) for x in ratios)
    if len(r) != 3 or min(r) < 0 or abs(sum(r) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three nonnegative numbers summing to 1, got {ratios}")
    return r


def _counts(total, ratios):
    n_val = int(round(ratios[1] * total))
    n_test = int(round(ratios[2] * total))
    n_train = total - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise ValueError(f"ratios {ratios} leave an empty split for {total} items")
    return n_train, n_val, n_test


def split_links(g, ratios=(0.75, 0.05, 0.20), seed=0):
    """Shuffle edges into train/val/test and draw equally many non-edges for
    val and test (disjoint from each other)."""
    ratios = _check_ratios(ratios)
    rng = np.random.default_rng(seed)
    m = g.num_edges
    n_train, n_val, n_test = _counts(m, ratios)
    perm = rng.permutation(m)
    e = g.edges[perm]
    train, val, test = e[:n_train], e[n_train:n_train + n_val], e[n_train + n_val:]

    n = g.n
    need = n_val + n_test
    if n * (n - 1) // 2 - m < need:
        raise ValueError("not enough non-edges for validation/test negatives")
    taken = set(int(u) * n + int(v) for u, v in g.edges)
    neg = []
    while len(neg) < need:
        u, v = rng.integers(0, n, size=2)
        if u == v:
            continue
        u, v = (u, v) if u < v else (v, u)
        key = int(u) * n + int(v)
        if key in taken:
            continue
        taken.add(key)
        neg.append((int(u), int(v)))
    neg = np.array(neg, dtype=np.int64)
    return LinkSplit(train, val, test, neg[:n_val], neg[n_val:], ratios)


def split_nodes(g, scheme="ratio", ratios=(0.7, 0.15, 0.15), per_class=20, seed=0):
    """Node masks, either by global ratios or ``per_class`` training labels
    per class (the remaining nodes go to val/test in the ``ratios[1:]`` proportion)."""
    if g.labels is None:
        raise ValueError("node split needs labels")
    rng = np.random.default_rng(seed)
    n = g.n
    train = np.zeros(n, dtype=bool)
    val = np.zeros(n, dtype=bool)
    test = np.zeros(n, dtype=bool)
    if scheme == "ratio":
        ratios = _check_ratios(ratios)
        n_train, n_val, _ = _counts(n, ratios)
        perm = rng.permutation(n)
        train[perm[:n_train]] = True
        val[perm[n_train:n_train + n_val]] = True
        test[perm[n_train + n_val:]] = True
    elif scheme == "per_class":
        for cls in range(g.num_classes):
            members = np.nonzero(g.labels == cls)[0]
            if len(members) < per_class:
                raise ValueError(f"class {cls} has {len(members)} nodes, fewer than {per_class}")
            train[rng.choice(members, size=per_class, replace=False)] = True
        rest = rng.permutation(np.nonzero(~train)[0])
        share = ratios[1] / (ratios[1] + ratios[2])
        n_val = int(round(share * len(rest)))
        val[rest[:n_val]] = True
        test[rest[n_val:]] = True
    else:
        raise ValueError(f"unknown node split scheme {scheme!r}")
    return NodeSplit(train, val, test)


# --- embeddings ----------------------------------------------------------------------
def save_embedding(points, manifold, path):
    pts = np.asarray(points, dtype=np.float64)
    n, amb = pts.shape
    dim = manifold.intrinsic_dim(amb)
    with open(path, "w") as fh:
        fh.write(f"model={manifold.name} kappa={float(manifold.kappa)!r} dim={dim} n={n}\n")
        for row in pts:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def _parse_header(line, path):
    fields = {}
    for tok in line.split():
        if "=" not in tok:
            raise FormatError(f"{path}:1: malformed header token {tok!r}")
        k, v = tok.split("=", 1)
        fields[k] = v
    missing = {"model", "kappa", "dim", "n"} - fields.keys()
    if missing:
        raise FormatError(f"{path}:1: header lacks {sorted(missing)}")
    return fields["model"], float(fields["kappa"]), int(fields["dim"]), int(fields["n"])


def load_embedding(path, expect_model=None):
    """Read an embedding file; returns ``(points, manifold)``."""
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: empty embedding file")
    model, kappa, dim, n = _parse_header(lines[0], path)
    if expect_model is not None and model != expect_model:
        raise FormatError(f"{path}: file holds a {model} embedding, expected {expect_model}")
    manifold = get_manifold(model, kappa)
    amb = manifold.ambient_dim(dim)
    rows = lines[1:]
    if len(rows) != n:
        raise FormatError(f"{path}: header says n={n}, found {len(rows)} rows")
    pts = np.empty((n, amb))
    for i, ln in enumerate(rows):
        vals = ln.split()
        if len(vals) != amb:
            raise FormatError(f"{path}:{i + 2}: {len(vals)} coordinates, expected {amb}")
        pts[i] = [float(v) for v in vals]
    if isinstance(manifold, Lorentz) and not manifold.check_point(pts):
        warnings.warn(f"{path}: points off the hyperboloid; projecting", stacklevel=2)
        pts = manifold.project(pts)
    elif not manifold.check_point(pts):
        raise FormatError(f"{path}: points outside the {model} model")
    return pts, manifold


def write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
