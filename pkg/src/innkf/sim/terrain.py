"""Height-map terrains: flat, stairs, slope, uneven, discrete obstacles.

Terrains are laid out along +x.  Every non-flat kind starts after a 1 m flat
lead-in and returns to zero height at the end of its segment, which lets
``composite`` chain the four rough kinds into one course.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError

KINDS = ("flat", "stairs", "slope", "uneven", "discrete_obstacle", "composite")
COMPOSITE_ORDER = ("stairs", "slope", "uneven", "discrete_obstacle")
LEAD_IN = 1.0


@dataclass(frozen=True)
class TerrainProfile:
    kind: str = "flat"
    step_height: float = 0.04  # m
    step_depth: float = 0.3  # m
    slope: float = 0.12  # rad
    roughness: float = 0.02  # m
    obstacle_spacing: float = 0.4  # m
    obstacle_height: float = 0.04  # m
    segment_length: float = 12.0  # m
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown terrain kind {self.kind!r}; expected one of {KINDS}")
        if self.segment_length <= 0 or self.step_depth <= 0 or self.obstacle_spacing <= 0:
            raise ConfigError("terrain lengths must be positive")
        object.__setattr__(self, "_bumps", _bump_table(self.seed))
        object.__setattr__(self, "_blocks", _block_table(self.seed))

    @property
    def length(self) -> float:
        """Extent of the non-flat part of the course."""
        n = len(COMPOSITE_ORDER) if self.kind == "composite" else 1
        return LEAD_IN + n * self.segment_length

    def height(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "flat":
            return np.zeros(np.broadcast(x, y).shape)
        if self.kind != "composite":
            return self._segment(self.kind, x - LEAD_IN, y)
        out = np.zeros(np.broadcast(x, y).shape)
        for i, kind in enumerate(COMPOSITE_ORDER):
            out = out + self._segment(kind, x - LEAD_IN - i * self.segment_length, y)
        return out

    def max_slope(self) -> float:
        """Lipschitz bound of the continuous parts (discontinuities excluded)."""
        kx, ky, _, amp = self._bumps
        bumps = self.roughness * np.sum(amp * (np.hypot(kx, ky) + np.pi / self.segment_length))
        return float(max(np.tan(self.slope), bumps))

    def _segment(self, kind, s, y):
        L = self.segment_length
        inside = (s >= 0.0) & (s < L)
        s_in = np.clip(s, 0.0, L)
        if kind == "stairs":
            n = int(L / self.step_depth)
            k = np.floor(s_in / self.step_depth)
            h = self.step_height * np.maximum(np.minimum(k, n - 1 - k), 0.0)
        elif kind == "slope":
            h = np.tan(self.slope) * np.minimum(s_in, L - s_in)
        elif kind == "uneven":
            kx, ky, ph, amp = self._bumps
            arg = kx * s_in[..., None] + ky * np.asarray(y)[..., None] + ph
            taper = np.sin(np.pi * s_in / L) ** 2
            h = self.roughness * taper * np.sum(amp * np.sin(arg), axis=-1)
        elif kind == "discrete_obstacle":
            table = self._blocks
            ix = np.floor(s_in / self.obstacle_spacing).astype(int) % table.shape[0]
            iy = np.floor(np.asarray(y) / self.obstacle_spacing).astype(int) % table.shape[1]
            h = self.obstacle_height * table[ix, iy]
        else:  # pragma: no cover - guarded in __post_init__
            raise ConfigError(kind)
        return np.where(inside, h, 0.0)


def _bump_table(seed):
    rng = np.random.default_rng([seed, 1])
    n = 6
    wavelength = rng.uniform(0.8, 2.5, n)
    heading = rng.uniform(-np.pi, np.pi, n)
    kx = 2 * np.pi / wavelength * np.cos(heading)
    ky = 2 * np.pi / wavelength * np.sin(heading)
    amp = rng.uniform(0.5, 1.0, n)
    return kx, ky, rng.uniform(0, 2 * np.pi, n), amp / amp.sum() * 2.0


def _block_table(seed):
    rng = np.random.default_rng([seed, 2])
    # about half of the cells carry a block of 50-100% nominal height
    return np.where(rng.random((64, 16)) < 0.5, rng.uniform(0.5, 1.0, (64, 16)), 0.0)


def composite_course(seed: int = 0, **kwargs) -> TerrainProfile:
    return TerrainProfile(kind="composite", seed=seed, **kwargs)
