"""Per-depth HDO profile of one trained run, plus the histogram the probe verb
writes.  Shows where the center sits relative to the nodes.

    python demos/hdo_diagnostics.py [--mode full] [--epochs 300]
"""

import argparse

import numpy as np

from hypie import evaluation as E
from hypie import hie as H
from hypie import trainer as T
from hypie.graph import gen_tree


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--mode", default=H.FULL, choices=H.MODES)
    ap.add_argument("--epochs", type=int, default=300)
    ap.add_argument("--histogram", default=None, help="optional CSV output")
    args = ap.parse_args()

    g = gen_tree(variant="H")
    cfg = T.TrainConfig(model="hgcn", task="nc", dim=16, agg="attention", max_epochs=args.epochs,
                        hie=H.HieConfig(mode=args.mode, sigma="identity", lam=0.01))
    res = T.train(cfg, g)
    man = res.state.manifold
    h = E.hdo(res.embedding, man)
    stats = E.hdo_diagnostics(res.embedding, man, bins=20)

    print("depth  nodes  mean HDO  std")
    for d in range(int(g.depth.max()) + 1):
        sel = h[g.depth == d]
        print(f"{d:5d}  {len(sel):5d}  {sel.mean():8.3f}  {sel.std():.3f}")
    p10, p25 = np.percentile(h, [10, 25])
    print(f"center HDO {stats.root:.3f}  (p10 {p10:.3f}, p25 {p25:.3f}); root node HDO {h[0]:.3f}")
    print(f"HDC mean {stats.hdc_mean:.3f}, hierarchy accuracy {E.hierarchy_accuracy(h, g.depth):.3f}")
    if args.histogram:
        stats.write_histogram(args.histogram)


if __name__ == "__main__":
    main()
