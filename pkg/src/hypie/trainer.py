"""Training loops for the shallow, HNN and HGCN models with optional HIE."""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from hypie import autodiff as ad
from hypie import evaluation as ev
from hypie import hie as H
from hypie import models as M
from hypie.data import LinkSplit, NodeSplit, split_links, split_nodes
from hypie.manifold import Flat, Poincare, get_manifold
from hypie.optim import Optimizer

PRESET_LR = (0.01, 0.02, 0.005)
PRESET_WEIGHT_DECAY = (1e-4, 5e-4, 5e-5)
PRESET_PATIENCE = (100, 200, 500)
PRESET_DROPOUT = (0.1, 0.2, 0.5, 0.6)
DIVERGENCE_LIMIT = 1e6


class TrainingAborted(RuntimeError):
    def __init__(self, epoch, reason):
        super().__init__(f"training aborted at epoch {epoch}: {reason}")
        self.epoch = epoch


@dataclass
class TrainConfig:
    model: str = "hgcn"  # shallow | hnn | hgcn
    manifold: str = "poincare"
    task: str = "nc"  # lp | nc
    dim: int = 16
    layers: int = 2
    hidden: int = 0  # 0 -> same as dim
    kappa: float = -1.0
    lr: float = 0.01
    weight_decay: float = 5e-4
    dropout: float = 0.0
    patience: int = 100
    max_epochs: int = 2000
    seed: int = 0
    agg: str = "degree"
    neg_k: int = 10
    fd_r: float = 2.0
    fd_t: float = 1.0
    nc_metric: str = "accuracy"
    link_ratios: tuple = (0.75, 0.05, 0.20)
    node_split: str = "ratio"
    node_ratios: tuple = (0.7, 0.15, 0.15)
    per_class: int = 20
    shallow_space: str = ""  # "" -> riemannian_poincare on the ball, tangent otherwise
    hierarchy_pairs: int = 5000
    feat_norm: str = "scale"  # none | scale | standardize
    hie: H.HieConfig = field(default_factory=H.HieConfig)

    def __post_init__(self):
        if self.model not in ("shallow", "hnn", "hgcn"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.task not in ("lp", "nc"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.model == "shallow" and self.task != "lp":
            raise ValueError("the shallow model is trained for link prediction only")
        if self.layers < 1 and self.model != "shallow":
            raise ValueError("need at least one layer")
        if self.feat_norm not in ("none", "scale", "standardize"):
            raise ValueError(f"unknown feature normalisation {self.feat_norm!r}")
        self.link_ratios = tuple(float(x) for x in self.link_ratios)
        self.node_ratios = tuple(float(x) for x in self.node_ratios)

    # flat key=value view ---------------------------------------------------------
    def to_flat(self):
        out = {}
        for f in dataclasses.fields(self):
            if f.name == "hie":
                for g in dataclasses.fields(H.HieConfig):
                    out[f"hie_{g.name}"] = getattr(self.hie, g.name)
            else:
                out[f.name] = getattr(self, f.name)
        return out

    @classmethod
    def from_flat(cls, mapping):
        """Build from string or typed values keyed like :meth:`to_flat`."""
        own = {f.name: f for f in dataclasses.fields(cls)}
        hie_fields = {f.name: f for f in dataclasses.fields(H.HieConfig)}
        base, hie = {}, {}
        for key, raw in mapping.items():
            if key.startswith("hie_") and key[4:] in hie_fields:
                hie[key[4:]] = _coerce(raw, hie_fields[key[4:]].default)
            elif key in own and key != "hie":
                base[key] = _coerce(raw, own[key].default)
            else:
                raise KeyError(f"unknown config key {key!r}")
        return cls(**base, hie=H.HieConfig(**hie))


def _coerce(raw, default):
    if not isinstance(raw, str):
        return raw
    if isinstance(default, bool):
        low = raw.strip().lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"not a boolean: {raw!r}")
        return low in ("true", "1", "yes")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if isinstance(default, tuple):
        return tuple(float(x) for x in raw.replace("/", ",").split(",") if x.strip())
    return raw.strip()


def format_flat(flat):
    """Inverse of config-file parsing: one ``key=value`` per line."""
    lines = []
    for k, v in flat.items():
        if isinstance(v, tuple):
            v = ",".join(repr(float(x)) for x in v)
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{k}={v}")
    return "\n".join(lines) + "\n"


def parse_config_text(text, source="<config>"):
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise ValueError(f"{source}:{lineno}: expected key=value, got {s!r}")
        k, v = s.split("=", 1)
        out[k.strip()] = v.strip()
    return out


# --- model state ------------------------------------------------------------------------
@dataclass
class ModelState:
    """Everything trainable plus the pieces needed to run a forward pass."""

    config: TrainConfig
    manifold: object
    shallow: M.ShallowEmbedding | None = None
    layers: list = field(default_factory=list)
    attn: list = field(default_factory=list)
    decoder: M.DecoderParams | None = None

    def parameters(self):
        ps = []
        if self.shallow is not None:
            ps += self.shallow.parameters()
        for layer in self.layers:
            ps += layer.parameters()
        for a in self.attn:
            ps += a.parameters()
        if self.decoder is not None:
            ps += self.decoder.parameters()
        return ps

    def snapshot(self):
        return [p.data.copy() for p in self.parameters()]

    def restore(self, snap):
        for p, v in zip(self.parameters(), snap):
            p.data = v.copy()


def build_model(cfg, graph, rng):
    man = get_manifold(cfg.manifold, cfg.kappa)
    state = ModelState(cfg, man)
    if cfg.model == "shallow":
        space = cfg.shallow_space or (ad.RIEMANNIAN_POINCARE if isinstance(man, Poincare) else ad.TANGENT_AT_ORIGIN)
        state.shallow = M.ShallowEmbedding.init(graph.n, cfg.dim, man, space=space, rng=rng)
        return state
    if graph.features is None:
        raise ValueError(f"{cfg.model} needs node features")
    hidden = cfg.hidden or cfg.dim
    dims = [graph.features.shape[1]] + [hidden] * (cfg.layers - 1) + [cfg.dim]
    for i in range(cfg.layers):
        act = M.RELU if i < cfg.layers - 1 else M.IDENTITY
        state.layers.append(M.HypLayerParams.init(dims[i], dims[i + 1], man, man, act, rng=rng))
        if cfg.model == "hgcn" and cfg.agg == M.ATTENTION:
            state.attn.append(M.AttentionParams.init(dims[i + 1], rng=rng))
    if cfg.task == "nc":
        state.decoder = M.DecoderParams.init(cfg.dim, graph.num_classes, rng=rng)
    return state


def prepare_features(features, how):
    """``scale``: divide by the mean row norm so rows have norm about one and
    ``expmap0`` keeps them off the boundary; ``standardize`` z-scores every
    column first and then does the same."""
    x = np.asarray(features, dtype=np.float64)
    if how == "none":
        return x
    if how == "standardize":
        sd = x.std(axis=0)
        x = (x - x.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    scale = np.linalg.norm(x, axis=1).mean()
    return x / scale if scale > 0 else x


def forward(state, graph, dropout_rng=None):
    cfg = state.config
    if cfg.model == "shallow":
        return state.shallow.points()
    rate = cfg.dropout if dropout_rng is not None else 0.0
    if cfg.model == "hnn":
        x = M.lift_features(graph.features, state.manifold)
        return M.hnn_forward(state.layers, x, rate, dropout_rng)
    return M.hgcn_forward(state.layers, graph, graph.features, cfg.agg, state.attn, rate, dropout_rng)


def output_embedding(state, graph):
    """Evaluation-mode embedding in the frame the task head consumes."""
    z = forward(state, graph)
    hcfg = state.config.hie
    if hcfg.mode != H.OFF and hcfg.aligns and hcfg.effective_alignment == H.WHOLE:
        z = H._to_manifold(H.aligned(z, state.manifold, hcfg), state.manifold, hcfg)
    return np.asarray(ad.value(z))


# --- training --------------------------------------------------------------------------------
@dataclass
class TrainResult:
    state: ModelState
    embedding: np.ndarray
    history: list
    best_epoch: int
    best_val: float
    graph: object = None
    split: object = None


def make_split(cfg, graph):
    if cfg.task == "lp":
        return split_links(graph, cfg.link_ratios, seed=cfg.seed)
    return split_nodes(graph, cfg.node_split, cfg.node_ratios, cfg.per_class, seed=cfg.seed)


def _lp_scores(z, man, pairs, fd):
    return np.asarray(ad.value(M.fermi_dirac(M.pair_sqdist(z, man, pairs), fd)))


def _val_metric(state, graph, split, z):
    cfg = state.config
    if cfg.task == "lp":
        fd = M.FermiDiracParams(cfg.fd_r, cfg.fd_t)
        auc, _ = ev.ranking_metrics(_lp_scores(z, state.manifold, split.val_pos, fd),
                                    _lp_scores(z, state.manifold, split.val_neg, fd))
        return auc
    logits = ad.value(M.nc_decode(z, state.manifold, state.decoder))
    return ev.classification_metrics(logits.argmax(-1), graph.labels, split.val_mask, cfg.nc_metric,
                                     num_classes=graph.num_classes)


def train(cfg, graph, split=None, log=None):
    """Train one run and return the best-validation checkpoint."""
    split = make_split(cfg, graph) if split is None else split
    if cfg.task == "lp" and not isinstance(split, LinkSplit):
        raise ValueError("lp task needs a LinkSplit")
    if cfg.task == "nc" and not isinstance(split, NodeSplit):
        raise ValueError("nc task needs a NodeSplit")
    ss = np.random.SeedSequence(cfg.seed)
    init_rng, sample_rng, drop_rng = (np.random.default_rng(s) for s in ss.spawn(3))

    # message passing only sees training links in link prediction
    work_graph = graph.with_edges(split.train_pos) if cfg.task == "lp" else graph
    if work_graph.features is not None:
        work_graph = work_graph.with_features(prepare_features(work_graph.features, cfg.feat_norm))
    state = build_model(cfg, work_graph, init_rng)
    params = state.parameters()
    opt = Optimizer(params, lr=cfg.lr, weight_decay=cfg.weight_decay, manifold=state.manifold)
    fd = M.FermiDiracParams(cfg.fd_r, cfg.fd_t)

    if cfg.task == "lp":
        train_pos = split.train_pos
        directed = np.concatenate([train_pos, train_pos[:, ::-1]])

    def task_loss(z, negs):
        if cfg.model == "shallow":
            return M.shallow_loss(z, state.manifold, directed, negs)
        if cfg.task == "lp":
            return M.lp_loss(z, state.manifold, train_pos, negs, fd)
        logits = M.nc_decode(z, state.manifold, state.decoder)
        return M.ce_loss(logits, graph.labels, split.train_mask)

    history = []
    best = (-math.inf, -1, None)
    waited = 0
    for epoch in range(cfg.max_epochs):
        negs = None
        if cfg.model == "shallow":
            negs = M.sample_negatives(directed[:, 0], graph.edges, graph.n, cfg.neg_k, sample_rng)
        elif cfg.task == "lp":
            anchors = sample_rng.integers(0, graph.n, size=len(train_pos))
            negs = np.stack([anchors, M.sample_negatives(anchors, graph.edges, graph.n, 1, sample_rng)[:, 0]], 1)
            negs = negs[negs[:, 1] >= 0]
        z = forward(state, work_graph, drop_rng if cfg.dropout else None)
        total, _ = H.combine_loss(lambda out: task_loss(out, negs), z, state.manifold, cfg.hie)
        loss_val = float(ad.value(total))
        if not math.isfinite(loss_val):
            raise TrainingAborted(epoch, "loss is NaN or infinite")
        if loss_val > DIVERGENCE_LIMIT:
            raise TrainingAborted(epoch, f"loss {loss_val:.3g} exceeds {DIVERGENCE_LIMIT:g}")
        opt.step(ad.gradient(total, params))

        zv = output_embedding(state, work_graph)
        val = _val_metric(state, graph, split, zv)
        history.append({"epoch": epoch, "loss": loss_val, "val": float(val)})
        if log is not None:
            log(epoch, loss_val, val)
        if val > best[0]:
            best = (val, epoch, state.snapshot())
            waited = 0
        else:
            waited += 1
            if waited >= cfg.patience:
                break
    state.restore(best[2])
    emb = output_embedding(state, work_graph)
    return TrainResult(state, emb, history, best[1], float(best[0]), graph, split)


# --- evaluation ------------------------------------------------------------------------------
def evaluate(result, bins=50):
    """Metrics report (JSON-ready dict) for a finished run."""
    state, graph, split, z = result.state, result.graph, result.split, result.embedding
    cfg = state.config
    man = state.manifold
    metrics = {}
    if cfg.task == "lp":
        fd = M.FermiDiracParams(cfg.fd_r, cfg.fd_t)
        for part in ("val", "test"):
            auc, ap = ev.ranking_metrics(_lp_scores(z, man, getattr(split, f"{part}_pos"), fd),
                                         _lp_scores(z, man, getattr(split, f"{part}_neg"), fd))
            metrics[f"{part}_auc"], metrics[f"{part}_ap"] = auc, ap
    else:
        pred = ad.value(M.nc_decode(z, man, state.decoder)).argmax(-1)
        for part in ("val", "test"):
            metrics[f"{part}_{cfg.nc_metric}"] = ev.classification_metrics(
                pred, graph.labels, getattr(split, f"{part}_mask"), cfg.nc_metric, num_classes=graph.num_classes)
    stats = ev.hdo_diagnostics(z, man, bins)
    report = {
        "task": cfg.task,
        "model": cfg.model,
        "manifold": cfg.manifold,
        "dim": cfg.dim,
        "seed": cfg.seed,
        "metrics": metrics,
        "hdo_stats": stats.as_dict(),
        "hdc_stats": stats.hdc_dict(),
        "best_epoch": result.best_epoch,
        "epochs_run": len(result.history),
    }
    if graph.depth is not None:
        h = ev.hdo(z, man)
        metrics["hierarchy_accuracy"] = ev.hierarchy_accuracy(h, graph.depth, cfg.hierarchy_pairs, seed=cfg.seed)
        report["hdo_stats"]["root_node"] = float(h[int(np.argmin(graph.depth))])
    return report, stats


def write_history(history, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "loss", "val"])
        for row in history:
            w.writerow([row["epoch"], repr(row["loss"]), repr(row["val"])])


def trimmed_mean(values):
    """Mean after dropping one max and one min (plain mean for < 3 values)."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    if len(v) < 3:
        return float(v.mean())
    return float(v[1:-1].mean())
