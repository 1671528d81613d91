"""Task metrics and position diagnostics (HDO / HDC / relative hierarchy)."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from hypie import center as _center
from hypie.manifold import Flat

ACCURACY = "accuracy"
F1_BINARY = "f1_binary"
F1_MACRO = "f1_macro"


def ranking_metrics(pos_scores, neg_scores):
    """AUC (rank statistic, ties count one half) and average precision.

    AUC is computed from integer counts so it equals the pairwise
    comparison ``P(pos > neg) + P(pos == neg) / 2`` exactly.
    """
    pos = np.asarray(pos_scores, dtype=np.float64).reshape(-1)
    neg = np.asarray(neg_scores, dtype=np.float64).reshape(-1)
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("ranking metrics need at least one positive and one negative")
    neg_sorted = np.sort(neg)
    below = np.searchsorted(neg_sorted, pos, side="left")
    at_or_below = np.searchsorted(neg_sorted, pos, side="right")
    greater = int(below.sum())
    ties = int((at_or_below - below).sum())
    auc = (2 * greater + ties) / (2 * len(pos) * len(neg))

    scores = np.concatenate([pos, neg])
    y = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
    order = np.argsort(-scores, kind="mergesort")
    scores, y = scores[order], y[order]
    # one threshold per distinct score
    last = np.r_[np.nonzero(np.diff(scores))[0], len(scores) - 1]
    tp = np.cumsum(y)[last]
    precision = tp / (last + 1)
    recall = tp / len(pos)
    ap = float(np.sum(np.diff(np.r_[0.0, recall]) * precision))
    return float(auc), ap


def classification_metrics(pred, labels, mask=None, average=ACCURACY, num_classes=None):
    pred = np.asarray(pred).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if mask is None:
        mask = np.ones(len(labels), dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("mask selects no nodes")
    p, t = pred[mask], labels[mask]
    k = num_classes if num_classes is not None else int(labels.max()) + 1
    if p.min() < 0 or p.max() >= k or t.min() < 0:
        raise ValueError(f"label id outside [0, {k})")
    if average == ACCURACY:
        return float(np.mean(p == t))
    if average == F1_BINARY:
        return _f1(p, t, 1)
    if average == F1_MACRO:
        return float(np.mean([_f1(p, t, c) for c in range(k)]))
    raise ValueError(f"unknown average {average!r}")


def _f1(p, t, cls):
    tp = np.sum((p == cls) & (t == cls))
    fp = np.sum((p == cls) & (t != cls))
    fn = np.sum((p != cls) & (t == cls))
    if 2 * tp + fp + fn == 0:
        warnings.warn(f"F1 undefined for class {cls}; counted as 0", stacklevel=3)
        return 0.0
    return float(2 * tp / (2 * tp + fp + fn))


@dataclass
class HdoStats:
    min: float
    max: float
    mean: float
    root: float
    bin_edges: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)
    hdc_min: float = 0.0
    hdc_max: float = 0.0
    hdc_mean: float = 0.0

    def as_dict(self):
        return {"min": self.min, "max": self.max, "mean": self.mean, "root": self.root}

    def hdc_dict(self):
        return {"min": self.hdc_min, "max": self.hdc_max, "mean": self.hdc_mean}

    def write_histogram(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_left", "bin_right", "count"])
            for lo, hi, c in zip(self.bin_edges[:-1], self.bin_edges[1:], self.counts):
                w.writerow([repr(float(lo)), repr(float(hi)), int(c)])


def hdo(points, manifold):
    """Distance of every row to the origin."""
    points = np.asarray(points, dtype=np.float64)
    if isinstance(manifold, Flat):
        return np.linalg.norm(points, axis=-1)
    return np.asarray(manifold.dist0(points)).reshape(-1)


def hdo_diagnostics(points, manifold, bins=50):
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or len(points) == 0:
        raise ValueError("need a nonempty (n, D) embedding")
    d = hdo(points, manifold)
    c = np.asarray(_center.center(points, manifold), dtype=np.float64)
    root = float(hdo(c[None, :], manifold)[0])
    if isinstance(manifold, Flat):
        hdc = np.linalg.norm(points - c, axis=-1)
    else:
        hdc = np.asarray(manifold.dist(points, np.broadcast_to(c, points.shape))).reshape(-1)
    top = float(d.max())
    counts, edges = np.histogram(d, bins=bins, range=(0.0, top if top > 0 else 1.0))
    return HdoStats(
        min=float(d.min()),
        max=top,
        mean=float(d.mean()),
        root=root,
        bin_edges=edges,
        counts=counts,
        hdc_min=float(hdc.min()),
        hdc_max=float(hdc.max()),
        hdc_mean=float(hdc.mean()),
    )


def hierarchy_accuracy(hdo_values, depth, pairs=5000, seed=0):
    """Share of random distinct-depth pairs whose shallower node is closer to
    the origin (strictly; ties count as wrong)."""
    h = np.asarray(hdo_values, dtype=np.float64).reshape(-1)
    depth = np.asarray(depth).reshape(-1)
    if len(h) != len(depth):
        raise ValueError("hdo and depth lengths differ")
    if pairs < 1:
        raise ValueError("pairs must be >= 1")
    if len(np.unique(depth)) < 2:
        raise ValueError("no pair of nodes with distinct depths")
    rng = np.random.default_rng(seed)
    i_all, j_all = [], []
    need = pairs
    while need > 0:
        i = rng.integers(0, len(h), size=2 * need + 16)
        j = rng.integers(0, len(h), size=2 * need + 16)
        keep = depth[i] != depth[j]
        i_all.append(i[keep][:need])
        j_all.append(j[keep][:need])
        need -= len(i_all[-1])
    i, j = np.concatenate(i_all), np.concatenate(j_all)
    shallow = np.where(depth[i] < depth[j], i, j)
    deep = np.where(depth[i] < depth[j], j, i)
    return float(np.mean(h[shallow] < h[deep]))
