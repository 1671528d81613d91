"""Command-line entry point: ``hypie <verb> [options]``.

Verbs: gen-tree, train, eval, probe, gradcheck, sweep.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from hypie import data as D
from hypie import evaluation as ev
from hypie import gradsuite
from hypie import trainer as T
from hypie.graph import gen_tree, homophily

EMBEDDING_FILE = "embedding.txt"
METRICS_FILE = "metrics.json"
HISTORY_FILE = "history.csv"
HISTOGRAM_FILE = "hdo_histogram.csv"
WEIGHTS_FILE = "weights.npz"
CONFIG_FILE = "config.cfg"


class CliError(Exception):
    pass


def _config_keys():
    return list(T.TrainConfig().to_flat().keys())


def _add_config_flags(p):
    g = p.add_argument_group("training config (overrides --config)")
    for key in _config_keys():
        g.add_argument("--" + key.replace("_", "-"), dest="cfg_" + key, default=None, metavar="V",
                       help=f"config key '{key}'")


def _resolve_config(args):
    flat = {}
    if getattr(args, "config", None):
        if not os.path.exists(args.config):
            raise CliError(f"config file not found: {args.config}")
        with open(args.config) as fh:
            flat.update(T.parse_config_text(fh.read(), args.config))
    for key in _config_keys():
        v = getattr(args, "cfg_" + key, None)
        if v is not None:
            flat[key] = v
    try:
        return T.TrainConfig.from_flat(flat)
    except (KeyError, ValueError, TypeError) as exc:
        raise CliError(f"bad config: {exc}") from None


def _load_data(path):
    if not os.path.exists(os.path.join(path, D.EDGES_FILE)):
        raise CliError(f"no {D.EDGES_FILE} in {path}")
    return D.load_dir(path)


def _print_json(obj):
    print(json.dumps(obj, indent=2, sort_keys=True))


# --- verbs ---------------------------------------------------------------------------------
def cmd_gen_tree(args):
    g = gen_tree(args.branching, args.nodes, args.variant, args.feature_dim, args.seed)
    D.save_dataset(g, args.out)
    _print_json({
        "nodes": g.n,
        "edges": g.num_edges,
        "classes": g.num_classes,
        "max_depth": int(g.depth.max()),
        "homophily": round(homophily(g), 3),
        "out": args.out,
    })


def _run_one(cfg, graph, out_dir):
    result = T.train(cfg, graph)
    report, stats = T.evaluate(result)
    os.makedirs(out_dir, exist_ok=True)
    D.save_embedding(result.embedding, result.state.manifold, os.path.join(out_dir, EMBEDDING_FILE))
    D.write_json(report, os.path.join(out_dir, METRICS_FILE))
    T.write_history(result.history, os.path.join(out_dir, HISTORY_FILE))
    stats.write_histogram(os.path.join(out_dir, HISTOGRAM_FILE))
    np.savez(os.path.join(out_dir, WEIGHTS_FILE), *result.state.snapshot())
    with open(os.path.join(out_dir, CONFIG_FILE), "w") as fh:
        fh.write(T.format_flat(cfg.to_flat()))
    return report


def cmd_train(args):
    cfg = _resolve_config(args)
    graph = _load_data(args.data)
    report = _run_one(cfg, graph, args.out)
    _print_json(report)


def cmd_eval(args):
    cfg_path = os.path.join(args.run, CONFIG_FILE)
    w_path = os.path.join(args.run, WEIGHTS_FILE)
    for p in (cfg_path, w_path):
        if not os.path.exists(p):
            raise CliError(f"missing run artifact: {p}")
    with open(cfg_path) as fh:
        cfg = T.TrainConfig.from_flat(T.parse_config_text(fh.read(), cfg_path))
    graph = _load_data(args.data)
    split = T.make_split(cfg, graph)
    work = graph.with_edges(split.train_pos) if cfg.task == "lp" else graph
    if work.features is not None:
        work = work.with_features(T.prepare_features(work.features, cfg.feat_norm))
    state = T.build_model(cfg, work, np.random.default_rng(0))
    with np.load(w_path) as z:
        snap = [z[f"arr_{i}"] for i in range(len(z.files))]
    if len(snap) != len(state.parameters()):
        raise CliError("weights file does not match the configured model")
    state.restore(snap)
    emb = T.output_embedding(state, work)
    result = T.TrainResult(state, emb, [], -1, float("nan"), graph, split)
    report, _ = T.evaluate(result)
    report.pop("best_epoch")
    report.pop("epochs_run")
    _print_json(report)


def cmd_probe(args):
    if not os.path.exists(args.embedding):
        raise CliError(f"embedding file not found: {args.embedding}")
    pts, man = D.load_embedding(args.embedding)
    stats = ev.hdo_diagnostics(pts, man, args.bins)
    out = {"hdo_stats": stats.as_dict(), "hdc_stats": stats.hdc_dict(), "n": int(len(pts))}
    if args.depth:
        depth = D._read_ints(args.depth)
        if len(depth) != len(pts):
            raise CliError(f"depth file has {len(depth)} entries for {len(pts)} points")
        out["hierarchy_accuracy"] = ev.hierarchy_accuracy(ev.hdo(pts, man), depth, args.pairs, args.seed)
    if args.histogram:
        stats.write_histogram(args.histogram)
    _print_json(out)


def cmd_gradcheck(args):
    results = gradsuite.run(seed=args.seed)
    bad = 0
    for r in results:
        bad += not r.ok
        print(f"{'PASS' if r.ok else 'FAIL'} {r.name} max_rel_err={r.report.max_rel_err:.2e} "
              f"coords={r.report.n_checked} tol={r.report.tol_rel:g}")
    print(f"{len(results) - bad}/{len(results)} checks passed")
    return 1 if bad else 0


def cmd_sweep(args):
    base = _resolve_config(args)
    graph = _load_data(args.data)
    try:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    except ValueError:
        raise CliError(f"bad --seeds {args.seeds!r}") from None
    per_metric = {}
    runs = []
    for seed in seeds:
        cfg = dataclasses.replace(base, seed=seed)
        report = _run_one(cfg, graph, os.path.join(args.out, f"seed{seed}"))
        runs.append({"seed": seed, "metrics": report["metrics"]})
        for k, v in report["metrics"].items():
            per_metric.setdefault(k, []).append(v)
    summary = {
        "seeds": seeds,
        "runs": runs,
        "mean": {k: float(np.mean(v)) for k, v in per_metric.items()},
        "trimmed_mean": {k: T.trimmed_mean(v) for k, v in per_metric.items()},
        "std": {k: float(np.std(v)) for k, v in per_metric.items()},
    }
    D.write_json(summary, os.path.join(args.out, "summary.json"))
    _print_json(summary)


# --- parser ------------------------------------------------------------------------------------
def build_parser():
    p = argparse.ArgumentParser(prog="hypie", description="Hyperbolic embeddings with HIE regularisation.")
    sub = p.add_subparsers(dest="verb", metavar="VERB")

    s = sub.add_parser("gen-tree", help="write a synthetic TREE-H / TREE-L dataset")
    s.add_argument("--variant", choices=["H", "L"], default="H")
    s.add_argument("--branching", type=int, default=3)
    s.add_argument("--nodes", type=int, default=1093)
    s.add_argument("--feature-dim", type=int, default=32)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_tree)

    s = sub.add_parser("train", help="train one run and write its artifacts")
    s.add_argument("--data", required=True, help="dataset directory")
    s.add_argument("--config", help="key=value config file")
    s.add_argument("--out", default="run", help="run directory")
    _add_config_flags(s)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="recompute metrics from a run directory")
    s.add_argument("--run", required=True)
    s.add_argument("--data", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("probe", help="HDO/HDC diagnostics of an embedding file")
    s.add_argument("--embedding", required=True)
    s.add_argument("--depth", help="optional depth file for hierarchy accuracy")
    s.add_argument("--bins", type=int, default=50)
    s.add_argument("--pairs", type=int, default=5000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--histogram", help="write the HDO histogram CSV here")
    s.set_defaults(func=cmd_probe)

    s = sub.add_parser("gradcheck", help="run the finite-difference gradient suite")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("sweep", help="train over several seeds and aggregate")
    s.add_argument("--data", required=True)
    s.add_argument("--config")
    s.add_argument("--seeds", default="0,1,2,3,4")
    s.add_argument("--out", default="sweep")
    _add_config_flags(s)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not getattr(args, "verb", None):
        parser.print_usage(sys.stderr)
        return 2
    try:
        rc = args.func(args)
    except (CliError, D.FormatError, OSError, ValueError, T.TrainingAborted) as exc:
        print(f"hypie {args.verb}: error: {exc}", file=sys.stderr)
        return 1
    return int(rc or 0)


if __name__ == "__main__":
    sys.exit(main())
