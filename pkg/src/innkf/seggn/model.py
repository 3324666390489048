"""SE_2(3) group generation network.

A causal TCN summarises a window of proprioceptive features; an affine head
emits nine generator coefficients ``xi``; the error estimate is
``exp(sum_k xi_k G_k)``, a valid group element by construction.
"""

from __future__ import annotations

import numpy as np

from .. import liegroup as lg
from ..errors import ConfigError, ShapeMismatch
from .features import N_FEATURES, WINDOW
from .losses import LossWeights, total_loss_grad
from .tcn import TemporalConvNet

PRESETS = {
    "full": {"widths": (128, 128, 128, 256, 256), "window": WINDOW, "dropout": 0.5},
    "desk": {"widths": (16, 16, 32), "window": WINDOW, "dropout": 0.5},
    "tiny": {"widths": (4, 4), "window": 6, "dropout": 0.5},
}
HEAD_INIT_SCALE = 0.01


class SeggnModel:
    def __init__(self, widths=PRESETS["desk"]["widths"], window: int = WINDOW,
                 dropout: float = 0.5, n_features: int = N_FEATURES, seed: int = 0):
        if window < 1 or not widths or any(int(w) < 1 for w in widths):
            raise ConfigError("window and widths must be positive")
        if not 0.0 <= dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        self.widths = tuple(int(w) for w in widths)
        self.window = int(window)
        self.dropout = float(dropout)
        self.n_features = int(n_features)
        self.tcn = TemporalConvNet(self.n_features, self.widths, self.dropout)
        self.feat_mean = np.zeros(self.n_features)
        self.feat_std = np.ones(self.n_features)
        self.params = {}
        self.init_params(seed)

    @classmethod
    def from_preset(cls, name: str, seed: int = 0, **overrides) -> "SeggnModel":
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
        cfg = {**PRESETS[name], **overrides}
        return cls(cfg["widths"], cfg["window"], cfg["dropout"], cfg.get("n_features", N_FEATURES), seed)

    def config(self) -> dict:
        return {"widths": list(self.widths), "window": self.window, "dropout": self.dropout,
                "n_features": self.n_features}

    def init_params(self, seed: int) -> None:
        rng = np.random.default_rng(seed)
        self.params = {}
        for layer in self.tcn.layers():
            layer.init(self.params, rng)
        c = self.tcn.n_out
        bound = 1.0 / np.sqrt(c)
        self.params["head.w"] = HEAD_INIT_SCALE * rng.uniform(-bound, bound, (9, c))
        self.params["head.b"] = np.zeros(9)

    def param_names(self):
        return list(self.params)

    def n_params(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def set_normalization(self, mean, std) -> None:
        std = np.asarray(std, dtype=float).copy()
        std[std < 1e-8] = 1.0
        self.feat_mean = np.asarray(mean, dtype=float).copy()
        self.feat_std = std

    def _check(self, windows):
        w = np.asarray(windows, dtype=float)
        if w.ndim == 2:
            w = w[None]
        if w.ndim != 3 or w.shape[1:] != (self.window, self.n_features):
            raise ShapeMismatch(
                f"expected windows of shape (B, {self.window}, {self.n_features}), got {np.shape(windows)}"
            )
        return w

    def forward(self, windows, rng=None, return_cache=False):
        """``(coeffs, e_hat)`` for ``(B, window, features)``; dropout only if ``rng`` is given."""
        w = self._check(windows)
        x = (w - self.feat_mean) / self.feat_std
        h, cache = self.tcn.forward(self.params, x, rng)
        coeffs = h @ self.params["head.w"].T + self.params["head.b"]
        e_hat = lg.exp_se23(coeffs)
        if return_cache:
            return coeffs, e_hat, (h, cache)
        return coeffs, e_hat

    def predict(self, windows, chunk: int = 4096):
        """Inference in chunks; returns ``e_hat`` of shape ``(B, 5, 5)``."""
        w = self._check(windows)
        out = np.empty((w.shape[0], 5, 5))
        for s in range(0, w.shape[0], chunk):
            out[s : s + chunk] = self.forward(w[s : s + chunk])[1]
        return out


def coefficient_grad(coeffs, e_hat, grad_e):
    """Pull ``dL/dE`` back to ``dL/dxi`` through ``E = exp(xi)``.

    Uses ``exp(xi + d) ~ exp(xi) exp(J_r(xi) d)``.
    """
    m = np.swapaxes(e_hat, -1, -2) @ grad_e
    g = np.einsum("bij,kij->bk", m, lg.GENERATORS)
    jr = lg.right_jacobian_se23(coeffs)
    return np.einsum("bki,bk->bi", jr, g)


def backward(model: SeggnModel, windows, labels, weights: LossWeights = LossWeights(), rng=None):
    """``(loss, grads)`` of the batch-mean loss w.r.t. every parameter."""
    labels = np.asarray(labels, dtype=float)
    coeffs, e_hat, (h, cache) = model.forward(windows, rng=rng, return_cache=True)
    if labels.shape != e_hat.shape:
        raise ShapeMismatch(f"labels must have shape {e_hat.shape}, got {labels.shape}")
    loss, grad_e = total_loss_grad(e_hat, labels, weights)
    dxi = coefficient_grad(coeffs, e_hat, grad_e)
    grads = {"head.w": dxi.T @ h, "head.b": dxi.sum(axis=0)}
    dh = dxi @ model.params["head.w"]
    model.tcn.backward(model.params, grads, dh, cache)
    return loss, {k: grads[k] for k in model.params}
