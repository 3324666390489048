"""Rotation/translation losses on SE_2(3) elements and their gradients.

All functions are batched over a leading axis.  Gradients are taken with
respect to the first (predicted) argument.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import liegroup as lg
from ..errors import ConfigError

GEO_EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 1.0
    beta: float = 1.0
    c1: float = 1.0
    c2: float = 1.0

    def __post_init__(self):
        if min(self.alpha, self.beta, self.c1, self.c2) < 0:
            raise ConfigError("loss weights must be non-negative")
        if self.c1 + self.c2 <= 0:
            raise ConfigError("c1 + c2 must be positive")


def _cos_angle(r1, r2):
    return 0.5 * (np.einsum("...ij,...ij->...", r1, r2) - 1.0)


def frobenius_loss(r1, r2):
    d = np.asarray(r1) - np.asarray(r2)
    return 0.5 * np.einsum("...ij,...ij->...", d, d)


def geodesic_loss(r1, r2):
    """Rotation angle between ``r1`` and ``r2``.

    Evaluated with ``atan2`` so that identical rotations give exactly zero;
    on SO(3) this equals ``arccos(clip(u, -1, 1))`` with
    ``u = (tr(r1^T r2) - 1) / 2``.  The ``GEO_EPS`` clamp only affects the
    gradient (see :func:`rotation_loss_grad`).
    """
    return lg.rotation_angle(np.swapaxes(r1, -1, -2) @ r2)


def rotation_loss(r1, r2, alpha=1.0, beta=1.0):
    return alpha * frobenius_loss(r1, r2) + beta * geodesic_loss(r1, r2)


def rotation_loss_grad(r1, r2, alpha=1.0, beta=1.0):
    u = _cos_angle(r1, r2)
    inside = (u > -1.0 + GEO_EPS) & (u < 1.0 - GEO_EPS)
    uc = np.clip(u, -1.0 + GEO_EPS, 1.0 - GEO_EPS)
    dgeo = np.where(inside, -1.0 / np.sqrt(1.0 - uc * uc), 0.0)
    return alpha * (r1 - r2) + beta * (0.5 * dgeo)[..., None, None] * r2


def translation_loss(v1, p1, v2, p2):
    return np.abs(np.asarray(v1) - v2).sum(axis=-1) + np.abs(np.asarray(p1) - p2).sum(axis=-1)


def total_loss(e_hat, label, weights: LossWeights = LossWeights()):
    """Batch mean of ``c1 L_rot + c2 L_trans`` on ``(B, 5, 5)`` elements."""
    return float(np.mean(per_sample_loss(e_hat, label, weights)))


def per_sample_loss(e_hat, label, weights: LossWeights = LossWeights()):
    rot = rotation_loss(e_hat[..., :3, :3], label[..., :3, :3], weights.alpha, weights.beta)
    trans = translation_loss(e_hat[..., :3, 3], e_hat[..., :3, 4], label[..., :3, 3], label[..., :3, 4])
    return weights.c1 * rot + weights.c2 * trans


def total_loss_grad(e_hat, label, weights: LossWeights = LossWeights()):
    """``(loss, dL/de_hat)`` with ``dL/de_hat`` shaped like ``e_hat``."""
    e_hat = np.asarray(e_hat, dtype=float)
    n = e_hat.shape[0]
    g = np.zeros_like(e_hat)
    g[:, :3, :3] = weights.c1 * rotation_loss_grad(
        e_hat[:, :3, :3], label[:, :3, :3], weights.alpha, weights.beta
    )
    g[:, :3, 3:5] = weights.c2 * np.sign(e_hat[:, :3, 3:5] - label[:, :3, 3:5])
    return total_loss(e_hat, label, weights), g / n
