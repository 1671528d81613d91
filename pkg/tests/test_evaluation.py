"""Ranking and classification metrics, HDO/HDC diagnostics, relative hierarchy."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import average_precision_score, f1_score

from hypie import center as C
from hypie import evaluation as E
from hypie.manifold import Flat, Lorentz, Poincare, random_points

from .oracles import brute_ap, pairwise_auc


def test_auc_examples():
    assert E.ranking_metrics([0.9, 0.8], [0.1, 0.2]) == (1.0, 1.0)
    auc, _ = E.ranking_metrics([0.5] * 4, [0.5] * 3)
    assert auc == 0.5
    with pytest.raises(ValueError):
        E.ranking_metrics([], [0.1])


def test_auc_five_plus_five():
    rng = np.random.default_rng(0)
    pos, neg = rng.random(5), rng.random(5)
    assert E.ranking_metrics(pos, neg)[0] == float(pairwise_auc(pos, neg))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 100), st.integers(1, 100), st.integers(2, 20))
def test_auc_equals_pairwise_oracle(seed, n_pos, n_neg, levels):
    # integer-valued scores force plenty of ties
    rng = np.random.default_rng(seed)
    pos, neg = rng.integers(0, levels, n_pos).astype(float), rng.integers(0, levels, n_neg).astype(float)
    auc, ap = E.ranking_metrics(pos, neg)
    assert auc == float(pairwise_auc(pos, neg))
    assert abs(ap - brute_ap(pos, neg)) < 1e-12


def test_ap_matches_sklearn_without_ties():
    rng = np.random.default_rng(1)
    for _ in range(20):
        pos, neg = rng.normal(1.0, 1.0, 30), rng.normal(0.0, 1.0, 40)
        _, ap = E.ranking_metrics(pos, neg)
        ref = average_precision_score(np.r_[np.ones(30), np.zeros(40)], np.r_[pos, neg])
        assert abs(ap - ref) < 1e-12


def test_classification_examples():
    y = np.array([0, 1, 2, 1])
    assert E.classification_metrics(y, y) == 1.0
    assert E.classification_metrics(y, y, average=E.F1_MACRO) == 1.0
    assert E.classification_metrics(np.array([1, 0, 1, 0]), np.array([0, 1, 0, 1]), average=E.F1_BINARY) == 0.0
    with pytest.raises(ValueError):
        E.classification_metrics(np.array([0, 5]), np.array([0, 1]), num_classes=2)
    with pytest.raises(ValueError):
        E.classification_metrics(y, y, mask=np.zeros(4, dtype=bool))


def test_six_sample_confusion():
    pred = np.array([0, 1, 1, 0, 1, 2])
    labels = np.array([0, 1, 0, 0, 2, 2])
    # per class (tp, fp, fn): 0 -> (2, 0, 1), 1 -> (1, 2, 0), 2 -> (1, 0, 1)
    f1 = [2 * 2 / (4 + 0 + 1), 2 * 1 / (2 + 2 + 0), 2 * 1 / (2 + 0 + 1)]
    assert abs(E.classification_metrics(pred, labels, average=E.F1_MACRO) - np.mean(f1)) < 1e-15
    assert E.classification_metrics(pred, labels) == 4 / 6
    assert abs(np.mean(f1) - f1_score(labels, pred, average="macro")) < 1e-15
    mask = np.array([1, 1, 1, 0, 0, 0], dtype=bool)
    assert E.classification_metrics(pred, labels, mask=mask) == 2 / 3


def test_undefined_f1_warns():
    with pytest.warns(UserWarning, match="undefined"):
        v = E.classification_metrics(np.array([0, 0]), np.array([0, 0]), average=E.F1_MACRO, num_classes=2)
    assert v == 0.5


# --- HDO diagnostics -------------------------------------------------------------------------------
def test_hdo_all_at_origin():
    for man in (Poincare(), Lorentz()):
        s = E.hdo_diagnostics(man.origin(5, 3), man)
        assert s.min == s.max == s.mean == s.root == 0.0


def test_hdo_single_point_at_two():
    b = Poincare()
    s = E.hdo_diagnostics(np.array([[math.tanh(1.0), 0.0]]), b)
    for v in (s.min, s.max, s.mean, s.root):
        assert abs(v - 2.0) < 1e-12
    assert s.hdc_max < 1e-12


def test_hdo_symmetric_pair():
    for man in (Poincare(), Lorentz()):
        p = man.expmap0(np.array([[0.6, -0.3], [-0.6, 0.3]]))
        s = E.hdo_diagnostics(p, man)
        assert abs(s.root) < 1e-9
        d = E.hdo(p, man)
        assert abs(s.hdc_max - d.max()) < 1e-9 and abs(s.hdc_min - d.min()) < 1e-9


def test_hdo_stats_invariants_and_histogram(tmp_path):
    rng = np.random.default_rng(2)
    man = Poincare()
    p = random_points(man, 60, 3, rng, 3.0)
    s = E.hdo_diagnostics(p, man, bins=10)
    assert s.min <= s.mean <= s.max
    assert s.counts.sum() == 60 and len(s.bin_edges) == 11
    assert s.bin_edges[0] == 0.0 and s.bin_edges[-1] == s.max
    path = tmp_path / "h.csv"
    s.write_histogram(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "bin_left,bin_right,count" and len(lines) == 11
    assert sum(int(ln.split(",")[2]) for ln in lines[1:]) == 60


def test_flat_hdo_is_norm():
    p = np.array([[3.0, 4.0], [-3.0, -4.0]])
    s = E.hdo_diagnostics(p, Flat())
    assert s.max == 5.0 and s.root == 0.0


@pytest.mark.parametrize("man", [Poincare(), Lorentz()])
def test_root_zero_after_whole_alignment(man):
    rng = np.random.default_rng(3)
    for _ in range(10):
        p = random_points(man, 30, 4, rng, 2.5)
        out = C.align_root(p, C.center(p, man), man)
        assert E.hdo_diagnostics(out, man).root < 1e-6


# --- relative hierarchy -------------------------------------------------------------------
def test_hierarchy_accuracy_examples():
    depth = np.repeat(np.arange(5), 4)
    assert E.hierarchy_accuracy(depth.astype(float), depth) == 1.0
    assert E.hierarchy_accuracy(-depth.astype(float), depth) == 0.0
    # ties count as wrong
    assert E.hierarchy_accuracy(np.zeros(20), depth) == 0.0
    with pytest.raises(ValueError):
        E.hierarchy_accuracy(np.zeros(4), np.zeros(4, dtype=int))
    with pytest.raises(ValueError):
        E.hierarchy_accuracy(np.zeros(4), np.arange(4), pairs=0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_hierarchy_accuracy_monotone_invariant(seed):
    rng = np.random.default_rng(seed)
    depth = rng.integers(0, 5, 50)
    if len(np.unique(depth)) < 2:
        depth[0] = 0
        depth[1] = 1
    h = rng.random(50) * 3
    base = E.hierarchy_accuracy(h, depth, pairs=500, seed=seed)
    for f in (np.exp, lambda x: 5 * x + 2, np.sqrt, np.arctan):
        assert E.hierarchy_accuracy(f(h), depth, pairs=500, seed=seed) == base
