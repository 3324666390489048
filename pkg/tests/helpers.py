"""Shared test utilities."""

import numpy as np

from innkf.seggn.losses import total_loss
from innkf.seggn.model import backward


def randomise(model, rng, scale=0.5):
    for k, v in model.params.items():
        model.params[k] = rng.normal(0, scale, v.shape)
    return model


def gradient_check(model, windows, labels, weights, seed=1, h=1e-5):
    """Worst relative error between analytic and central-difference gradients."""
    _, grads = backward(model, windows, labels, weights, rng=np.random.default_rng(seed))

    def loss():
        return total_loss(model.forward(windows, rng=np.random.default_rng(seed))[1], labels, weights)

    worst = 0.0
    for k, p in model.params.items():
        for i in np.ndindex(p.shape):
            orig = p[i]
            p[i] = orig + h
            lp = loss()
            p[i] = orig - h
            lm = loss()
            p[i] = orig
            num = (lp - lm) / (2 * h)
            err = abs(num - grads[k][i]) / max(abs(num), abs(grads[k][i]), 1e-6)
            worst = max(worst, err)
    return worst
