"""Parameter updates: Adam for Euclidean / tangent parameters and a Riemannian
exponential-map step for rows living on the Poincare ball."""

from __future__ import annotations

import numpy as np

from hypie import autodiff as ad


def clip_global_norm(grads, max_norm):
    if max_norm is None:
        return grads
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if total <= max_norm or total == 0:
        return grads
    return [g * (max_norm / total) for g in grads]


class Optimizer:
    """Adam (decoupled from the Riemannian rows) with global-norm clipping.

    ``riemannian_poincare`` parameters take the step
    ``x <- proj(exp_x(-lr * g / lambda_x^2))``; weight decay is not applied
    to them.
    """

    def __init__(self, params, lr=0.01, weight_decay=0.0, betas=(0.9, 0.999), eps=1e-8,
                 clip=10.0, manifold=None):
        self.params = list(params)
        self.lr = lr
        self.weight_decay = weight_decay
        self.betas = betas
        self.eps = eps
        self.clip = clip
        self.manifold = manifold
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        if any(p.space == ad.RIEMANNIAN_POINCARE for p in self.params) and manifold is None:
            raise ValueError("Riemannian parameters need the manifold")

    def step(self, grads):
        grads = clip_global_norm(list(grads), self.clip)
        self.t += 1
        b1, b2 = self.betas
        for i, (p, g) in enumerate(zip(self.params, grads)):
            if p.space == ad.RIEMANNIAN_POINCARE:
                rg = self.manifold.egrad2rgrad(p.data, g)
                p.data = self.manifold.project(self.manifold.expmap(p.data, -self.lr * rg))
                continue
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            mhat = self.m[i] / (1 - b1 ** self.t)
            vhat = self.v[i] / (1 - b2 ** self.t)
            p.data = p.data - self.lr * mhat / (np.sqrt(vhat) + self.eps)
