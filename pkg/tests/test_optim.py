"""Adam, clipping and the Riemannian step on the ball."""

import numpy as np
import pytest

from hypie import autodiff as ad
from hypie.manifold import Poincare
from hypie.optim import Optimizer, clip_global_norm


def test_clip_global_norm():
    g = [np.array([3.0]), np.array([4.0])]
    out = clip_global_norm(g, 1.0)
    np.testing.assert_allclose(np.concatenate(out), [0.6, 0.8])
    assert clip_global_norm(g, 10.0) is g
    assert clip_global_norm(g, None) is g
    z = [np.zeros(2)]
    assert clip_global_norm(z, 1.0) is z


def test_adam_first_step_has_size_lr():
    # with bias correction the first update is lr * g / (|g| + eps) elementwise
    p = ad.Parameter(np.array([1.0, -2.0, 0.5]))
    opt = Optimizer([p], lr=0.1, clip=None)
    opt.step([np.array([0.3, -7.0, 0.0])])
    np.testing.assert_allclose(p.data, [0.9, -1.9, 0.5], atol=1e-7)


def test_weight_decay_enters_euclidean_gradient():
    p = ad.Parameter(np.array([2.0]))
    opt = Optimizer([p], lr=0.1, weight_decay=0.5, clip=None)
    opt.step([np.array([-1.0 + 1e-12])])  # net gradient ~ 0 after decay 0.5 * 2
    assert abs(p.data[0] - 2.0) < 1e-3


def test_riemannian_step_from_origin():
    # Riemannian gradient at the origin is g / 4; the step moves a geodesic
    # distance of 2 * lr * |g| / 4 against g
    b = Poincare()
    p = ad.Parameter(np.zeros((1, 2)), space=ad.RIEMANNIAN_POINCARE)
    opt = Optimizer([p], lr=0.5, weight_decay=1.0, clip=None, manifold=b)
    g = np.array([[3.0, -4.0]])
    opt.step([g])
    assert abs(float(b.dist0(p.data)[0]) - 0.5 * 5.0 / 2) < 1e-12
    direction = p.data[0] / np.linalg.norm(p.data[0])
    np.testing.assert_allclose(direction, [-0.6, 0.8], atol=1e-12)


def test_riemannian_rows_stay_in_ball():
    b = Poincare()
    rng = np.random.default_rng(0)
    p = ad.Parameter(rng.uniform(-0.5, 0.5, (20, 3)), space=ad.RIEMANNIAN_POINCARE)
    opt = Optimizer([p], lr=10.0, clip=None, manifold=b)
    for _ in range(20):
        opt.step([rng.normal(size=(20, 3)) * 100])
        assert b.check_point(p.data)


def test_riemannian_needs_manifold():
    p = ad.Parameter(np.zeros((1, 2)), space=ad.RIEMANNIAN_POINCARE)
    with pytest.raises(ValueError):
        Optimizer([p])
