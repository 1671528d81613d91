"""Hierarchy-informed stretching: root alignment plus an HDO-weighted loss that
pushes nodes away from the origin in proportion to their own level."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hypie import autodiff as ad
from hypie import center as _center
from hypie.manifold import Flat

OFF = "off"
ALIGN_ONLY = "align_only"
STRETCH_ONLY = "stretch_only"
FULL = "full"
OPPOSITE = "opposite"
MODES = (OFF, ALIGN_ONLY, STRETCH_ONLY, FULL, OPPOSITE)

HYPERBOLIC = "hyperbolic"
TANGENT = "tangent"
PARTIAL = "partial"
WHOLE = "whole"
SIGMAS = {"tanh": ad.tanh, "identity": lambda x: x}
PRESET_LAMBDAS = (1.0, 0.1, 0.01, 0.001)


@dataclass(frozen=True)
class HieConfig:
    mode: str = OFF
    space: str = HYPERBOLIC
    sigma: str = "tanh"
    lam: float = 0.1
    detach_weights: bool = True
    alignment: str = PARTIAL
    detach_center: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown HIE mode {self.mode!r}")
        if self.space not in (HYPERBOLIC, TANGENT):
            raise ValueError(f"unknown HIE space {self.space!r}")
        if self.sigma not in SIGMAS:
            raise ValueError(f"unknown sigma {self.sigma!r}")
        if self.alignment not in (PARTIAL, WHOLE):
            raise ValueError(f"unknown alignment {self.alignment!r}")
        if not self.lam >= 0:
            raise ValueError("lambda must be >= 0")

    @property
    def aligns(self):
        return self.mode in (FULL, ALIGN_ONLY)

    @property
    def effective_alignment(self):
        # the alignment-only ablation is defined as whole-mode centering
        return WHOLE if self.mode == ALIGN_ONLY else self.alignment


def aligned(points, manifold, config):
    """Root-aligned copy of ``points`` in the representation ``config.space`` uses.

    Returns manifold coordinates for the hyperbolic variant and tangent
    coordinates at the origin for the tangent variant.
    """
    if config.space == TANGENT:
        u = manifold.logmap0(points)
        if not config.aligns:
            return u
        c = _center.tangent_mean(u)
        return u - (ad.detach(c) if config.detach_center else c)
    if not config.aligns:
        return points
    c = _center.center(points, manifold)
    if config.detach_center:
        c = ad.detach(c)
    return _center.align_root(points, c, manifold)


def stretch_term(z, manifold, config):
    """``sigma(-/+ mean(w_i d_i))`` with ``d_i`` the level of each (aligned) node."""
    if config.space == TANGENT or isinstance(manifold, Flat):
        d = ad.norm(z, axis=-1)
    else:
        d = manifold.dist0(z)
    w = ad.detach(d) if config.detach_weights else d
    z_hdo = ad.mean(w * d)
    sign = 1.0 if config.mode == OPPOSITE else -1.0
    return SIGMAS[config.sigma](sign * z_hdo)


def hie_loss(points, manifold, config):
    """The stretching loss ``L_hyp``; exactly ``0.0`` when it is switched off."""
    if config.mode in (OFF, ALIGN_ONLY):
        return 0.0
    if ad.value(points).shape[0] == 0:
        raise ValueError("HIE loss needs a nonempty embedding")
    return stretch_term(aligned(points, manifold, config), manifold, config)


def _to_manifold(z, manifold, config):
    return manifold.expmap0(z) if config.space == TANGENT else z


def combine_loss(task_loss, points, manifold, config):
    """Total loss ``L_task + lambda * L_hyp`` and the embedding the task sees.

    ``task_loss`` is a callable mapping an embedding to a scalar. With
    partial alignment it gets the raw embedding and alignment lives only
    inside the stretching loss; with whole alignment it gets the aligned
    embedding, which is also returned. A precomputed scalar is accepted when
    no whole-mode alignment is needed.
    """
    if config.mode == OFF:
        out = points
        total = task_loss(out) if callable(task_loss) else task_loss
        return total, out
    whole = config.aligns and config.effective_alignment == WHOLE
    z = aligned(points, manifold, config) if (whole or config.mode != ALIGN_ONLY) else None
    out = _to_manifold(z, manifold, config) if whole else points
    if callable(task_loss):
        task = task_loss(out)
    elif whole:
        raise ValueError("whole-mode alignment needs the task loss as a callable")
    else:
        task = task_loss
    if config.mode == ALIGN_ONLY or config.lam == 0:
        return task, out
    return task + config.lam * stretch_term(z, manifold, config), out
