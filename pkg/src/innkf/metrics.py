"""Absolute and relative trajectory errors.

No alignment is applied: estimates and truth share the world frame and the
initial state by construction.  Rotation errors use the geodesic angle of
``R_est R_true^T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import liegroup as lg
from .errors import ConfigError, LengthMismatch, TooShort

MIN_PATH = 1e-3  # m; windows with less travel are skipped in RE statistics


@dataclass(frozen=True)
class ATE:
    R: float  # rad
    v: float  # m/s
    p: float  # m

    def as_dict(self):
        return {"ATE_R_rad": self.R, "ATE_v_mps": self.v, "ATE_p_m": self.p}


@dataclass(frozen=True)
class RE:
    mode: str  # "time" or "distance"
    window: float  # s or m
    R_mean: float | None  # rad/m
    R_std: float | None
    p_mean: float | None  # percent of segment path length
    p_std: float | None
    n_windows: int

    def as_dict(self):
        return {
            "mode": self.mode,
            "window": self.window,
            "RE_R_rad_per_m_mean": self.R_mean,
            "RE_R_rad_per_m_std": self.R_std,
            "RE_p_percent_mean": self.p_mean,
            "RE_p_percent_std": self.p_std,
            "n_windows": self.n_windows,
        }


def _check_pair(est, truth):
    est = np.asarray(est, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if est.shape != truth.shape:
        raise LengthMismatch(f"estimate {est.shape} and truth {truth.shape} differ")
    if est.ndim != 3 or est.shape[1:] != (5, 5):
        raise LengthMismatch("trajectories must be (T, 5, 5) arrays")
    if len(est) == 0:
        raise TooShort("empty trajectory")
    return est, truth


def rotation_errors(est, truth):
    r = est[:, :3, :3] @ np.swapaxes(truth[:, :3, :3], 1, 2)
    return lg.rotation_angle(r)


def error_series(est, truth):
    """Per-tick errors: rotation angle, and v/p differences per axis."""
    est, truth = _check_pair(est, truth)
    return {
        "R": rotation_errors(est, truth),
        "v": est[:, :3, 3] - truth[:, :3, 3],
        "p": est[:, :3, 4] - truth[:, :3, 4],
    }


def eval_ate(est, truth) -> ATE:
    e = error_series(est, truth)
    rms = lambda x: float(np.sqrt(np.mean(x)))  # noqa: E731
    return ATE(
        R=rms(e["R"] ** 2),
        v=rms(np.sum(e["v"] ** 2, axis=1)),
        p=rms(np.sum(e["p"] ** 2, axis=1)),
    )


def _window_ends(t, path, mode, window):
    if mode == "time":
        ends = np.searchsorted(t, t + window - 1e-9, side="left")
    else:
        ends = np.searchsorted(path, path + window, side="left")
    return ends


def eval_re(est, truth, t, window: float = 10.0, mode: str = "time") -> RE:
    """Relative errors over windows of ``window`` seconds or metres.

    Every tick starts a window; the segment's relative poses are compared as
    ``(X_i^-1 X_j)_true^-1 (X_i^-1 X_j)_est``.  The translation error is
    reported in percent of the true path length of the segment, the
    rotation error in radians per metre.
    """
    if mode not in ("time", "distance"):
        raise ConfigError("mode must be 'time' or 'distance'")
    if window <= 0:
        raise ConfigError("window must be positive")
    est, truth = _check_pair(est, truth)
    t = np.asarray(t, dtype=float)
    if len(t) != len(est):
        raise LengthMismatch("one timestamp per pose is required")
    steps = np.linalg.norm(np.diff(truth[:, :3, 4], axis=0), axis=1)
    path = np.concatenate([[0.0], np.cumsum(steps)])
    span = t[-1] - t[0] if mode == "time" else path[-1]
    if span < window:
        raise TooShort(f"trajectory spans {span:.6g} but the window is {window:.6g}")

    ends = _window_ends(t, path, mode, window)
    start = np.nonzero(ends < len(t))[0]
    end = ends[start]
    seg = path[end] - path[start]
    keep = seg >= MIN_PATH
    start, end, seg = start[keep], end[keep], seg[keep]
    if len(start) == 0:
        return RE(mode, float(window), None, None, None, None, 0)

    rel_est = lg.compose(lg.inverse(est[start]), est[end])
    rel_true = lg.compose(lg.inverse(truth[start]), truth[end])
    # SE(3) part only: rotation and position columns
    r_err = np.swapaxes(rel_true[:, :3, :3], 1, 2) @ rel_est[:, :3, :3]
    p_err = np.einsum("nji,nj->ni", rel_true[:, :3, :3], rel_est[:, :3, 4] - rel_true[:, :3, 4])
    re_p = 100.0 * np.linalg.norm(p_err, axis=1) / seg
    re_r = lg.rotation_angle(r_err) / seg
    return RE(mode, float(window), float(re_r.mean()), float(re_r.std()),
              float(re_p.mean()), float(re_p.std()), int(len(start)))
