"""Hyperbolic embedding centers and root alignment.

All functions take batched coordinate arrays (``n x D``) plus the manifold,
and are differentiable when given ``DiffValue`` inputs.
"""

from __future__ import annotations

import numpy as np

from hypie import autodiff as ad
from hypie.manifold import Flat, Lorentz, ManifoldMismatchError, Poincare

GEODESIC = "geodesic"
LORENTZIAN_SQ = "lorentzian_sq"
TANGENT_EUCLIDEAN = "tangent_euclidean"


def _weights(n, weights):
    if weights is None:
        return np.ones(n)
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if len(w) != n:
        raise ValueError(f"{len(w)} weights for {n} points")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    if not w.sum() > 0:
        raise ValueError("weights must have a positive sum")
    return w


def _nonempty(points):
    if ad.value(points).ndim != 2 or ad.value(points).shape[0] == 0:
        raise ValueError("expected a nonempty (n, D) point set")


def gyromidpoint(points, manifold, weights=None):
    """Weighted Mobius gyromidpoint on the Poincare ball."""
    if not isinstance(manifold, Poincare):
        raise ManifoldMismatchError("gyromidpoint needs the Poincare ball")
    _nonempty(points)
    w = _weights(ad.value(points).shape[0], weights)[:, None]
    lam = manifold.lambda_x(points)
    num = ad.sum(w * lam * points, axis=0, keepdims=True)
    den = ad.sum(w * (lam - 1.0), axis=0, keepdims=True)
    mid = manifold.mobius_scalar(0.5, num / den)
    return manifold.project(mid)[0]


def lorentz_centroid(points, manifold, weights=None):
    """Weighted Lorentzian centroid, normalised back onto the hyperboloid."""
    if not isinstance(manifold, Lorentz):
        raise ManifoldMismatchError("lorentz_centroid needs the Lorentz model")
    _nonempty(points)
    w = _weights(ad.value(points).shape[0], weights)[:, None]
    s = ad.sum(w * points, axis=0)
    sq = manifold.minkowski(s, s, keepdims=False)
    if abs(float(ad.value(sq))) < 1e-300:
        raise ValueError("degenerate weighted sum: Minkowski norm is zero")
    return s / (manifold.sqrt_c * ad.sqrt(ad.abs(sq)))


def tangent_mean(vectors, weights=None):
    """Weighted arithmetic mean of tangent vectors at the origin."""
    _nonempty(vectors)
    w = _weights(ad.value(vectors).shape[0], weights)[:, None]
    return ad.sum(w * vectors, axis=0) / w.sum()


def center(points, manifold, weights=None):
    """The manifold's natural center (gyromidpoint / centroid / mean)."""
    if isinstance(manifold, Poincare):
        return gyromidpoint(points, manifold, weights)
    if isinstance(manifold, Lorentz):
        return lorentz_centroid(points, manifold, weights)
    return tangent_mean(points, weights)


def align_root(points, center_point, manifold):
    """Translate ``points`` so that ``center_point`` lands on the origin.

    Poincare uses the left gyrotranslation ``(-z_c) (+) z``. It has the same
    HDO as ``z (+) (-z_c)`` (Mobius addition is gyrocommutative in norm) and
    is an isometry, so the re-computed center of the result is the origin.
    Lorentz uses ``exp_m(PT_{o->m}(log_o(z)))`` with ``m`` the reflected
    center ``(c_0, -c_s)``.
    """
    cv, pv = ad.value(center_point), ad.value(points)
    if cv.shape[-1] != pv.shape[-1]:
        raise ManifoldMismatchError(f"center dim {cv.shape[-1]} != points dim {pv.shape[-1]}")
    if isinstance(manifold, Poincare):
        return manifold.project(manifold.mobius_add(-center_point, points))
    if isinstance(manifold, Lorentz):
        mirrored = ad.concat([center_point[0:1], -center_point[1:]], axis=-1)
        mirrored = mirrored * np.ones((pv.shape[0], 1))
        tangent = manifold.ptransp0(mirrored, manifold.logmap0(points))
        return manifold.expmap(mirrored, tangent)
    return points - center_point


def align_tangent(vectors, weights=None):
    """Tangent-space alignment: subtract the (weighted) mean."""
    c = tangent_mean(vectors, weights)
    return vectors - c, c


def sqdist_objective(points, candidate, metric, manifold=None, weights=None):
    """``sum_i w_i m(z_i, candidate)^2`` for the chosen metric."""
    pv = ad.value(points)
    w = _weights(pv.shape[0], weights)
    if metric == TANGENT_EUCLIDEAN:
        diff = pv - np.asarray(candidate)
        return float(np.sum(w * np.sum(diff * diff, axis=-1)))
    if manifold is None or isinstance(manifold, Flat):
        raise ValueError(f"metric {metric!r} needs a hyperbolic manifold")
    cand = np.broadcast_to(np.asarray(candidate, dtype=np.float64), pv.shape)
    if metric == GEODESIC:
        d = manifold.dist(pv, cand)
        return float(np.sum(w * d * d))
    if metric == LORENTZIAN_SQ:
        if not isinstance(manifold, Lorentz):
            raise ValueError("lorentzian_sq needs the Lorentz model")
        sq = 2.0 / manifold.kappa - 2.0 * manifold.minkowski(pv, cand, keepdims=False)
        return float(np.sum(w * sq))
    raise ValueError(f"unknown metric {metric!r}")
