"""Per-tick feature rows, sliding windows and training labels."""

from __future__ import annotations

import numpy as np

from .. import liegroup as lg
from ..errors import ShapeMismatch

WINDOW = 50
FEATURE_LAYOUT = (
    ("accel", 3),
    ("gyro", 3),
    ("q", 12),
    ("dq", 12),
    ("foot_pos", 12),
    ("foot_vel", 12),
    ("contact", 4),
    ("estimate", 9),
)
N_FEATURES = sum(n for _, n in FEATURE_LAYOUT)


def feature_rows(sensors, X_est, contacts=None) -> np.ndarray:
    """``(T, 67)`` features; ``contacts`` defaults to the records' flags."""
    X_est = np.asarray(X_est, dtype=float)
    if len(sensors) != len(X_est):
        raise ShapeMismatch("one filter estimate per sensor record is required")
    if contacts is None:
        contacts = np.array([r.contact for r in sensors])
    cols = [
        np.array([r.accel_meas for r in sensors]),
        np.array([r.omega_meas for r in sensors]),
        np.array([r.q for r in sensors]),
        np.array([r.dq for r in sensors]),
        np.array([r.foot_pos for r in sensors]).reshape(len(sensors), 12),
        np.array([r.foot_vel for r in sensors]).reshape(len(sensors), 12),
        np.asarray(contacts, dtype=float),
        lg.log_se23(X_est),
    ]
    return np.concatenate(cols, axis=1)


def windows_at(features, ticks, window: int = WINDOW) -> np.ndarray:
    """Windows ending at each tick in ``ticks``, ``(len(ticks), window, F)``.

    Ticks earlier than ``window - 1`` are left-padded by repeating tick 0.
    """
    ticks = np.asarray(ticks, dtype=int)
    idx = ticks[:, None] + np.arange(1 - window, 1)[None, :]
    return np.asarray(features)[np.clip(idx, 0, None)]


def error_labels(X_est, X_true) -> np.ndarray:
    """Right-invariant errors ``X_est X_true^-1``."""
    return lg.compose(np.asarray(X_est), lg.inverse(np.asarray(X_true)))


def normalization_stats(feature_list):
    stacked = np.concatenate(list(feature_list), axis=0)
    return stacked.mean(axis=0), stacked.std(axis=0)
