"""Mini-batch training with a hand-written Adam optimiser."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, EmptyDataset, ShapeMismatch
from .features import normalization_stats, windows_at
from .losses import LossWeights, per_sample_loss, rotation_loss
from .model import SeggnModel, backward


@dataclass
class TrainingSet:
    """Feature sequences and per-tick labels; windows are cut on demand."""

    features: list = field(default_factory=list)  # each (T_i, F)
    labels: list = field(default_factory=list)  # each (T_i, 5, 5)

    def add(self, features, labels) -> None:
        features = np.asarray(features, dtype=float)
        labels = np.asarray(labels, dtype=float)
        if features.ndim != 2 or labels.shape != (len(features), 5, 5):
            raise ShapeMismatch("need (T, F) features and (T, 5, 5) labels")
        self.features.append(features)
        self.labels.append(labels)

    def __len__(self):
        return int(sum(len(f) for f in self.features))

    def batch(self, index, window):
        """``index`` is an ``(n, 2)`` array of (sequence, tick) pairs."""
        wins = np.empty((len(index), window, self.features[0].shape[1]))
        labs = np.empty((len(index), 5, 5))
        for s in np.unique(index[:, 0]):
            sel = index[:, 0] == s
            wins[sel] = windows_at(self.features[s], index[sel, 1], window)
            labs[sel] = self.labels[s][index[sel, 1]]
        return wins, labs


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 5e-4
    batch: int = 256
    epochs: int = 20
    preset: str = "desk"
    window: int | None = None
    dropout: float | None = None
    val_fraction: float = 0.1
    stride: int = 1  # keep every stride-th tick as a training window
    weights: LossWeights = field(default_factory=LossWeights)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr <= 0 or self.batch < 1 or self.epochs < 0 or self.stride < 1:
            raise ConfigError("lr, batch and stride must be positive, epochs non-negative")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigError("val_fraction must lie in [0, 1)")


class Adam:
    def __init__(self, params: dict, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k in params:  # fixed key order keeps updates deterministic
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


@dataclass
class TrainHistory:
    epoch: list = field(default_factory=list)
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_rot: list = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "val_loss", "val_rot_loss"])
            for row in zip(self.epoch, self.train_loss, self.val_loss, self.val_rot):
                w.writerow([row[0]] + [repr(float(x)) for x in row[1:]])


def split_indices(data: TrainingSet, val_fraction: float, stride: int):
    """Chronological split: the tail of every sequence is held out."""
    train, val = [], []
    for s, f in enumerate(data.features):
        n = len(f)
        n_val = int(round(val_fraction * n))
        ticks = np.arange(0, n, stride)
        cut = n - n_val
        seq = np.full(len(ticks), s)
        pairs = np.stack([seq, ticks], axis=1)
        train.append(pairs[ticks < cut])
        val.append(pairs[ticks >= cut])
    return np.concatenate(train), np.concatenate(val)


def evaluate(model: SeggnModel, data: TrainingSet, index, weights: LossWeights, chunk=4096):
    """Mean total and rotation loss over ``index`` (inference mode)."""
    if len(index) == 0:
        return float("nan"), float("nan")
    tot = rot = 0.0
    for s in range(0, len(index), chunk):
        wins, labs = data.batch(index[s : s + chunk], model.window)
        e_hat = model.predict(wins)
        tot += per_sample_loss(e_hat, labs, weights).sum()
        rot += rotation_loss(e_hat[:, :3, :3], labs[:, :3, :3], weights.alpha, weights.beta).sum()
    return float(tot / len(index)), float(rot / len(index))


def train(data: TrainingSet, cfg: TrainConfig = TrainConfig(), seed: int = 0, model=None, log=None):
    """Fit a model; returns ``(model, history)``.  Deterministic given ``seed``."""
    if len(data) == 0:
        raise EmptyDataset("no training samples")
    overrides = {k: v for k, v in (("window", cfg.window), ("dropout", cfg.dropout)) if v is not None}
    n_feat = data.features[0].shape[1]
    if model is None:
        model = SeggnModel.from_preset(cfg.preset, seed=seed, n_features=n_feat, **overrides)
    mean, std = normalization_stats(data.features)
    model.set_normalization(mean, std)

    train_idx, val_idx = split_indices(data, cfg.val_fraction, cfg.stride)
    if len(train_idx) == 0:
        raise EmptyDataset("validation split leaves no training samples")
    rng = np.random.default_rng([seed, 1])
    drop_rng = np.random.default_rng([seed, 2])
    opt = Adam(model.params, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    hist = TrainHistory()
    for epoch in range(cfg.epochs):
        order = train_idx[rng.permutation(len(train_idx))]
        total, count = 0.0, 0
        for s in range(0, len(order), cfg.batch):
            wins, labs = data.batch(order[s : s + cfg.batch], model.window)
            loss, grads = backward(model, wins, labs, cfg.weights, rng=drop_rng)
            opt.step(model.params, grads)
            total += loss * len(wins)
            count += len(wins)
        vl, vr = evaluate(model, data, val_idx, cfg.weights)
        hist.epoch.append(epoch + 1)
        hist.train_loss.append(total / count)
        hist.val_loss.append(vl)
        hist.val_rot.append(vr)
        if log is not None:
            log(f"epoch {epoch + 1}/{cfg.epochs} train {total / count:.6g} val {vl:.6g}")
    return model, hist
