"""Shallow embeddings, hyperbolic feed-forward / graph-convolution layers and
their link-prediction and node-classification heads.

Every layer maps through the tangent space at the origin. Tangent vectors at
the origin are handled in intrinsic coordinates (``d`` numbers), so the same
code drives the Poincare ball, the Lorentz model and the flat fallback.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from hypie import autodiff as ad
from hypie.autodiff import Parameter
from hypie.manifold import Flat, Poincare

RELU = "relu"
IDENTITY = "identity"
ACTIVATIONS = {RELU: ad.relu, IDENTITY: lambda x: x}


# --- shallow embedding --------------------------------------------------------
@dataclass
class ShallowEmbedding:
    """Trainable ``n x d`` table.

    With ``space='riemannian_poincare'`` the rows are ball coordinates and
    are updated by Riemannian steps; with ``space='tangent_at_origin'`` the
    rows are tangent coordinates decoded through ``expmap0``.
    """

    table: Parameter
    manifold: object

    @classmethod
    def init(cls, n, dim, manifold, space=None, scale=1e-3, rng=None):
        rng = np.random.default_rng(0) if rng is None else rng
        if space is None:
            space = ad.RIEMANNIAN_POINCARE if isinstance(manifold, Poincare) else ad.TANGENT_AT_ORIGIN
        if space == ad.RIEMANNIAN_POINCARE and not isinstance(manifold, Poincare):
            raise ValueError("Riemannian table updates are only implemented on the Poincare ball")
        data = rng.uniform(-scale, scale, size=(n, dim))
        return cls(Parameter(data, space=space, name="embedding"), manifold)

    @property
    def n(self):
        return self.table.data.shape[0]

    def points(self):
        """Decoded manifold coordinates (recorded for autodiff)."""
        if self.table.space == ad.TANGENT_AT_ORIGIN:
            return self.manifold.expmap0(self.table.value)
        return self.table.value

    def parameters(self):
        return [self.table]


def _edge_keys(edges, n):
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    return np.unique(np.concatenate([e[:, 0] * n + e[:, 1], e[:, 1] * n + e[:, 0]]))


def sample_negatives(anchors, edges, n, k, rng, max_rounds=50):
    """``k`` uniform non-neighbours (and not the anchor) per anchor node.

    Rows that cannot be filled are marked with ``-1``.
    """
    anchors = np.asarray(anchors, dtype=np.int64)
    keys = _edge_keys(edges, n)
    out = rng.integers(0, n, size=(len(anchors), k))
    for _ in range(max_rounds):
        bad = (out == anchors[:, None]) | np.isin(anchors[:, None] * n + out, keys)
        if not bad.any():
            break
        out[bad] = rng.integers(0, n, size=int(bad.sum()))
    else:
        bad = (out == anchors[:, None]) | np.isin(anchors[:, None] * n + out, keys)
        # exhaustive fallback for (near) saturated nodes
        for r in np.unique(np.nonzero(bad)[0]):
            a = anchors[r]
            nb = keys[(keys >= a * n) & (keys < (a + 1) * n)] - a * n
            pool = np.setdiff1d(np.arange(n), np.r_[nb, a])
            out[r] = rng.choice(pool, size=k) if len(pool) else -1
    return out


def shallow_loss(points, manifold, edges, negatives):
    """Mean over edges of ``-log softmax(-d)`` for the positive pair.

    The softmax runs over the positive, the ``k`` negatives and the anchor
    itself (its zero self-distance contributes ``exp(0)``).
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    negatives = np.asarray(negatives, dtype=np.int64)
    if len(edges) == 0:
        raise ValueError("shallow loss needs at least one edge")
    if negatives.ndim != 2 or negatives.shape[0] != len(edges) or negatives.shape[1] < 1:
        raise ValueError("negatives must be an (edges, k >= 1) index array")
    valid = np.all(negatives >= 0, axis=1)
    if not valid.all():
        warnings.warn(f"skipping {int((~valid).sum())} edge(s) without valid negatives", stacklevel=2)
        edges, negatives = edges[valid], negatives[valid]
        if len(edges) == 0:
            raise ValueError("no edge has valid negatives")
    m, k = negatives.shape
    xi = points[edges[:, 0]]
    d_pos = manifold.dist(xi, points[edges[:, 1]])
    anchor_rep = points[np.repeat(edges[:, 0], k)]
    d_neg = manifold.dist(anchor_rep, points[negatives.reshape(-1)])
    logits = ad.concat([_col(-d_pos), -ad.reshape(d_neg, (m, k)), np.zeros((m, 1))], axis=-1)
    return -ad.mean(ad.log_softmax(logits, axis=-1)[:, 0])


def _col(x):
    return ad.reshape(x, (-1, 1))


# --- Fermi-Dirac link decoder --------------------------------------------------
@dataclass(frozen=True)
class FermiDiracParams:
    r: float = 2.0
    t: float = 1.0

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("Fermi-Dirac temperature t must be > 0")


def fermi_dirac(d_sq, p=FermiDiracParams()):
    """Edge probability ``1 / (exp((d_sq - r) / t) + 1)``."""
    return ad.sigmoid(-(d_sq - p.r) / p.t)


def pair_sqdist(points, manifold, pairs):
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    d = manifold.dist(points[pairs[:, 0]], points[pairs[:, 1]])
    return d * d


def lp_loss(points, manifold, pos_edges, neg_edges, fd=FermiDiracParams()):
    """Binary cross-entropy on Fermi-Dirac probabilities.

    ``-log p = softplus((d^2 - r)/t)`` and ``-log(1 - p) = softplus(-(d^2 - r)/t)``,
    written that way so saturated probabilities never hit ``log(0)``.
    """
    if len(pos_edges) == 0 or len(neg_edges) == 0:
        raise ValueError("link loss needs nonempty positive and negative edge lists")
    zp = (pair_sqdist(points, manifold, pos_edges) - fd.r) / fd.t
    zn = (pair_sqdist(points, manifold, neg_edges) - fd.r) / fd.t
    return ad.mean(ad.softplus(zp)) + ad.mean(ad.softplus(-zn))


# --- hyperbolic layers -----------------------------------------------------------
@dataclass
class HypLayerParams:
    W: Parameter  # (d_out, d_in)
    b: Parameter  # (d_out,) tangent vector at the origin
    manifold_in: object
    manifold_out: object
    activation: str = RELU

    @classmethod
    def init(cls, d_in, d_out, manifold_in, manifold_out=None, activation=RELU, rng=None):
        rng = np.random.default_rng(0) if rng is None else rng
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        # Glorot uniform
        lim = np.sqrt(6.0 / (d_in + d_out))
        W = Parameter(rng.uniform(-lim, lim, size=(d_out, d_in)), name="W")
        b = Parameter(np.zeros(d_out), name="b")
        return cls(W, b, manifold_in, manifold_out or manifold_in, activation)

    @property
    def d_in(self):
        return self.W.data.shape[1]

    @property
    def d_out(self):
        return self.W.data.shape[0]

    def parameters(self):
        return [self.W, self.b]


def _dropout(u, rate, rng):
    if not rate or rng is None:
        return u
    keep = rng.random(ad.value(u).shape) >= rate
    return u * (keep / (1.0 - rate))


def hyp_linear(params, x, dropout=0.0, rng=None):
    """``exp_o(W log_o x)`` then the bias step ``exp_h(PT_{o->h}(b))``."""
    m = params.manifold_in
    u = m.logmap0(x)
    if ad.value(u).shape[-1] != params.d_in:
        raise ValueError(f"layer expects dim {params.d_in}, got {ad.value(u).shape[-1]}")
    u = _dropout(u, dropout, rng)
    h = m.expmap0(u @ params.W.value.T)
    if isinstance(m, Flat):
        return h + params.b.value
    n = ad.value(h).shape[0]
    bias = params.b.value * np.ones((n, 1))
    return m.project(m.expmap(h, m.ptransp0(h, bias)))


def hyp_activation(x, manifold_in, manifold_out, sigma=RELU):
    """``exp_o^{out}(sigma(log_o^{in}(x)))``."""
    fn = ACTIVATIONS[sigma] if isinstance(sigma, str) else sigma
    return manifold_out.expmap0(fn(manifold_in.logmap0(x)))


def hnn_forward(layers, x, dropout=0.0, rng=None):
    for i, layer in enumerate(layers):
        if i and layers[i - 1].d_out != layer.d_in:
            raise ValueError(f"layer {i} expects dim {layer.d_in}, previous emits {layers[i - 1].d_out}")
        h = hyp_linear(layer, x, dropout, rng)
        x = hyp_activation(h, layer.manifold_in, layer.manifold_out, layer.activation)
    return x


# --- neighbourhood aggregation ------------------------------------------------------
DEGREE = "degree"
ATTENTION = "attention"


@dataclass
class EdgeWeights:
    """Sparse aggregation weights: ``values[e]`` is the weight of ``cols[e]``
    in the aggregate of ``rows[e]``."""

    rows: np.ndarray
    cols: np.ndarray
    values: object  # ndarray or DiffValue
    n: int

    def dense(self):
        out = np.zeros((self.n, self.n))
        np.add.at(out, (self.rows, self.cols), ad.value(self.values))
        return out


@dataclass
class AttentionParams:
    a: Parameter  # (2 d,)
    bias: Parameter = field(default=None)

    @classmethod
    def init(cls, dim, rng=None, scale=0.1):
        rng = np.random.default_rng(0) if rng is None else rng
        return cls(Parameter(rng.normal(0.0, scale, size=2 * dim), name="attn_a"), Parameter(np.zeros(1), name="attn_b"))

    def parameters(self):
        return [self.a, self.bias]


def segment_softmax(logits, segments, num_segments):
    """Softmax of ``logits`` within each segment."""
    lv = ad.value(logits)
    seg_max = np.full(num_segments, -np.inf)
    np.maximum.at(seg_max, segments, lv)
    # shift by a constant per segment: softmax is invariant, so no gradient needed
    e = ad.exp(logits - seg_max[segments])
    tot = ad.segment_sum(e, segments, num_segments)
    return e / tot[segments]


def agg_weights(graph_or_edges, mode=DEGREE, points=None, manifold=None, attn=None):
    """Aggregation weights over neighbourhoods with self-loops.

    ``graph_or_edges`` is a :class:`hypie.graph.Graph` or a ``(rows, cols, n)``
    triple already containing self-loops.
    """
    if isinstance(graph_or_edges, tuple):
        rows, cols, n = graph_or_edges
        rows, cols = np.asarray(rows), np.asarray(cols)
    else:
        rows, cols = graph_or_edges.directed_edges(self_loops=True)
        n = graph_or_edges.n
    if not np.array_equal(np.unique(rows), np.arange(n)):
        raise ValueError("every node needs at least one neighbour (self-loop)")
    if mode == DEGREE:
        deg = np.bincount(rows, minlength=n).astype(np.float64)
        return EdgeWeights(rows, cols, 1.0 / np.sqrt(deg[rows] * deg[cols]), n)
    if mode == ATTENTION:
        if points is None or manifold is None or attn is None:
            raise ValueError("attention weights need points, manifold and attention parameters")
        u = manifold.logmap0(points)
        d = ad.value(u).shape[-1]
        a = attn.a.value
        left = u @ a[:d]
        right = u @ a[d:]
        logits = left[rows] + right[cols] + attn.bias.value
        return EdgeWeights(rows, cols, segment_softmax(logits, rows, n), n)
    raise ValueError(f"unknown aggregation mode {mode!r}")


def hyp_aggregate(points, weights, manifold):
    """``exp_o(sum_j a_ij log_o(x_j))`` for every node ``i``."""
    u = manifold.logmap0(points)
    msg = u[weights.cols] * _col(weights.values)
    return manifold.project(manifold.expmap0(ad.segment_sum(msg, weights.rows, weights.n)))


def lift_features(features, manifold):
    """Raw features read as tangent vectors at the origin and mapped in."""
    return manifold.expmap0(np.asarray(features, dtype=np.float64))


def hgcn_forward(layers, graph, features, mode=DEGREE, attn=None, dropout=0.0, rng=None, lifted=False):
    """Stack of (linear -> aggregate -> activation) layers.

    ``attn`` is a list with one :class:`AttentionParams` per layer when
    ``mode='attention'``.
    """
    x = features if lifted else lift_features(features, layers[0].manifold_in)
    base = agg_weights(graph, DEGREE) if mode == DEGREE else None
    for i, layer in enumerate(layers):
        if i and layers[i - 1].d_out != layer.d_in:
            raise ValueError(f"layer {i} expects dim {layer.d_in}, previous emits {layers[i - 1].d_out}")
        h = hyp_linear(layer, x, dropout, rng)
        if mode == DEGREE:
            w = base
        else:
            w = agg_weights(graph, ATTENTION, h, layer.manifold_in, attn[i])
        h = hyp_aggregate(h, w, layer.manifold_in)
        x = hyp_activation(h, layer.manifold_in, layer.manifold_out, layer.activation)
    return x


# --- node classification head ----------------------------------------------------------
@dataclass
class DecoderParams:
    W: Parameter  # (classes, d)
    b: Parameter  # (classes,)

    @classmethod
    def init(cls, dim, num_classes, rng=None):
        rng = np.random.default_rng(0) if rng is None else rng
        lim = np.sqrt(6.0 / (dim + num_classes))
        return cls(Parameter(rng.uniform(-lim, lim, size=(num_classes, dim)), name="dec_W"),
                   Parameter(np.zeros(num_classes), name="dec_b"))

    def parameters(self):
        return [self.W, self.b]


def nc_decode(points, manifold, dec):
    """Class logits from an affine map of ``log_o(z)``."""
    u = manifold.logmap0(points)
    if ad.value(u).shape[-1] != dec.W.data.shape[1]:
        raise ValueError("decoder input dim does not match the embedding")
    return u @ dec.W.value.T + dec.b.value


def ce_loss(logits, labels, mask=None):
    """Mean negative log-likelihood over the masked nodes."""
    labels = np.asarray(labels, dtype=np.int64)
    idx = np.arange(len(labels)) if mask is None else np.nonzero(np.asarray(mask, dtype=bool))[0]
    if len(idx) == 0:
        raise ValueError("mask selects no nodes")
    k = ad.value(logits).shape[-1]
    if labels[idx].min() < 0 or labels[idx].max() >= k:
        raise ValueError(f"labels must lie in [0, {k})")
    logp = ad.log_softmax(logits[idx], axis=-1)
    return -ad.mean(logp[np.arange(len(idx)), labels[idx]])
