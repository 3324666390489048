"""Causal dilated temporal convolutions with hand-written backward passes.

Activations are channels-last, ``(batch, time, channels)``.  Each layer is
asked for the last ``n_out`` time steps only: the network's output is read
at the final tick of the window, so earlier positions outside the receptive
field are never computed.  Positions before the start of the window are
zeros, exactly as in a padded-and-chomped convolution over the full window.
"""

from __future__ import annotations

import numpy as np


def _pad_left(x, n):
    if n <= 0:
        return x
    return np.concatenate([np.zeros((x.shape[0], n, x.shape[2])), x], axis=1)


class CausalConv:
    """Kernel-2 causal convolution ``y_t = W1 x_t + W0 x_{t-d} + b``."""

    def __init__(self, name: str, c_in: int, c_out: int, dilation: int):
        self.name = name
        self.c_in, self.c_out, self.dilation = c_in, c_out, dilation

    def param_shapes(self):
        return {f"{self.name}.w": (2, self.c_out, self.c_in), f"{self.name}.b": (self.c_out,)}

    def init(self, params, rng):
        bound = 1.0 / np.sqrt(2 * self.c_in)
        params[f"{self.name}.w"] = rng.uniform(-bound, bound, (2, self.c_out, self.c_in))
        params[f"{self.name}.b"] = rng.uniform(-bound, bound, self.c_out)

    def needed(self, n_out: int, window: int) -> int:
        return min(window, n_out + self.dilation)

    def forward(self, params, x, n_out):
        d = self.dilation
        pad = n_out + d - x.shape[1]
        xp = _pad_left(x, pad)
        w = params[f"{self.name}.w"]
        y = xp[:, d:] @ w[1].T + xp[:, :n_out] @ w[0].T + params[f"{self.name}.b"]
        return y, (xp, pad, n_out)

    def backward(self, params, grads, dy, cache):
        xp, pad, n_out = cache
        d = self.dilation
        w = params[f"{self.name}.w"]
        cur, lag = xp[:, d:], xp[:, :n_out]
        c = self.c_in
        gw = np.empty_like(w)
        gw[1] = dy.reshape(-1, self.c_out).T @ cur.reshape(-1, c)
        gw[0] = dy.reshape(-1, self.c_out).T @ lag.reshape(-1, c)
        grads[f"{self.name}.w"] = gw
        grads[f"{self.name}.b"] = dy.sum(axis=(0, 1))
        dxp = np.zeros_like(xp)
        dxp[:, d:] += dy @ w[1]
        dxp[:, :n_out] += dy @ w[0]
        return dxp[:, max(pad, 0):]


class Pointwise:
    """1x1 convolution used on the residual path when widths change."""

    def __init__(self, name: str, c_in: int, c_out: int):
        self.name = name
        self.c_in, self.c_out = c_in, c_out

    def param_shapes(self):
        return {f"{self.name}.w": (self.c_out, self.c_in), f"{self.name}.b": (self.c_out,)}

    def init(self, params, rng):
        bound = 1.0 / np.sqrt(self.c_in)
        params[f"{self.name}.w"] = rng.uniform(-bound, bound, (self.c_out, self.c_in))
        params[f"{self.name}.b"] = rng.uniform(-bound, bound, self.c_out)

    def forward(self, params, x):
        return x @ params[f"{self.name}.w"].T + params[f"{self.name}.b"], x

    def backward(self, params, grads, dy, x):
        grads[f"{self.name}.w"] = dy.reshape(-1, self.c_out).T @ x.reshape(-1, self.c_in)
        grads[f"{self.name}.b"] = dy.sum(axis=(0, 1))
        return dy @ params[f"{self.name}.w"]


def _dropout(x, rate, rng):
    if rate <= 0.0 or rng is None:
        return x, None
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


class ResidualBlock:
    """conv -> ReLU -> dropout -> conv -> ReLU -> dropout, plus residual, ReLU."""

    def __init__(self, name: str, c_in: int, c_out: int, dilation: int, dropout: float):
        self.name = name
        self.conv1 = CausalConv(f"{name}.conv1", c_in, c_out, dilation)
        self.conv2 = CausalConv(f"{name}.conv2", c_out, c_out, dilation)
        self.down = Pointwise(f"{name}.down", c_in, c_out) if c_in != c_out else None
        self.dropout = dropout
        self.c_out = c_out

    def layers(self):
        return [m for m in (self.conv1, self.conv2, self.down) if m is not None]

    def needed(self, n_out: int, window: int) -> int:
        return self.conv1.needed(self.conv2.needed(n_out, window), window)

    def forward(self, params, x, n_out, window, rng=None):
        n_mid = self.conv2.needed(n_out, window)
        z1, c1 = self.conv1.forward(params, x, n_mid)
        h1 = np.maximum(z1, 0.0)
        h1d, m1 = _dropout(h1, self.dropout, rng)
        z2, c2 = self.conv2.forward(params, h1d, n_out)
        h2 = np.maximum(z2, 0.0)
        h2d, m2 = _dropout(h2, self.dropout, rng)
        x_tail = x[:, x.shape[1] - n_out :]
        if self.down is not None:
            res, cd = self.down.forward(params, x_tail)
        else:
            res, cd = x_tail, None
        z = h2d + res
        out = np.maximum(z, 0.0)
        return out, (x.shape, c1, z1, m1, c2, z2, m2, cd, z)

    def backward(self, params, grads, dout, cache):
        x_shape, c1, z1, m1, c2, z2, m2, cd, z = cache
        dz = dout * (z > 0)
        n_out = dz.shape[1]
        dx = np.zeros(x_shape)
        if self.down is not None:
            dx[:, x_shape[1] - n_out :] += self.down.backward(params, grads, dz, cd)
        else:
            dx[:, x_shape[1] - n_out :] += dz
        dh2 = dz if m2 is None else dz * m2
        dz2 = dh2 * (z2 > 0)
        dh1d = self.conv2.backward(params, grads, dz2, c2)
        dh1 = dh1d if m1 is None else dh1d * m1
        dz1 = dh1 * (z1 > 0)
        dx += self.conv1.backward(params, grads, dz1, c1)
        return dx


class TemporalConvNet:
    """Stack of residual blocks with dilation ``2**i`` for block ``i``."""

    def __init__(self, n_in: int, widths, dropout: float):
        self.blocks = []
        c = n_in
        for i, w in enumerate(widths):
            self.blocks.append(ResidualBlock(f"block{i}", c, int(w), 2**i, dropout))
            c = int(w)
        self.n_out = c

    def layers(self):
        return [layer for b in self.blocks for layer in b.layers()]

    def receptive_field(self) -> int:
        return 1 + sum(2 * b.conv1.dilation for b in self.blocks)

    def input_length(self, window: int) -> int:
        n = 1
        for b in reversed(self.blocks):
            n = b.needed(n, window)
        return n

    def forward(self, params, x, rng=None):
        """Hidden features at the last tick of each window, ``(B, C)``."""
        window = x.shape[1]
        lengths = [1]
        for b in reversed(self.blocks):
            lengths.append(b.needed(lengths[-1], window))
        lengths = lengths[::-1]  # lengths[i] = input length of block i
        h = x[:, window - lengths[0] :]
        caches = []
        for i, b in enumerate(self.blocks):
            h, c = b.forward(params, h, lengths[i + 1], window, rng)
            caches.append(c)
        return h[:, -1], (caches, x.shape, lengths[0])

    def backward(self, params, grads, dh, cache):
        caches, x_shape, n_in = cache
        d = dh[:, None, :]
        for b, c in zip(reversed(self.blocks), reversed(caches)):
            d = b.backward(params, grads, d, c)
        dx = np.zeros(x_shape)
        dx[:, x_shape[1] - n_in :] = d
        return dx
