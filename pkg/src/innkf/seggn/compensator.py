"""Applying a trained model to filter output, offline and streaming.

The compensated estimate is ``E_hat^-1 X_plus``.  It is never fed back into
the filter, so the filter's own trajectory is unaffected by the model.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .. import liegroup as lg
from ..inekf import FilterTrajectory, InEKF, run_filter
from .features import N_FEATURES, feature_rows, windows_at
from .model import SeggnModel


def compensate(x_plus, e_hat):
    return lg.compose(lg.inverse(e_hat), x_plus)


def compensate_trajectory(model: SeggnModel, sensors, traj: FilterTrajectory, chunk: int = 4096):
    """Compensated ``(T, 5, 5)`` estimates for a finished filter run."""
    feats = feature_rows(sensors, traj.X, traj.contacts)
    out = np.empty_like(traj.X)
    for s in range(0, len(feats), chunk):
        ticks = np.arange(s, min(s + chunk, len(feats)))
        e_hat = model.predict(windows_at(feats, ticks, model.window))
        out[ticks] = compensate(traj.X[ticks], e_hat)
    return out


@dataclass
class CompensatedRun:
    raw: FilterTrajectory
    X: np.ndarray  # compensated estimates aligned with raw.t


def run_compensated(records, model: SeggnModel, **filter_kwargs) -> CompensatedRun:
    raw = run_filter(records, **filter_kwargs)
    return CompensatedRun(raw, compensate_trajectory(model, records, raw))


class StreamingCompensator:
    """Filter + compensator pipeline fed one record at a time.

    ``feed`` returns the raw filter step for tick ``t`` and the compensated
    estimate for tick ``t - 1`` (``None`` on the first call); ``flush``
    releases the last pending tick.
    """

    def __init__(self, model: SeggnModel, **filter_kwargs):
        self.model = model
        self.filter = InEKF(**filter_kwargs)
        self._rows = deque(maxlen=model.window)
        self._pending = None

    def _emit(self):
        if self._pending is None:
            return None
        t, x = self._pending
        rows = np.array(self._rows)
        win = windows_at(rows, [len(rows) - 1], self.model.window)
        e_hat = self.model.predict(win)[0]
        return t, compensate(x, e_hat)

    def feed(self, rec):
        out = self._emit()
        step = self.filter.feed(rec)
        row = feature_rows([rec], step.base[None], step.contacts[None])[0]
        if len(self._rows) == 0:
            # left padding by repetition, matching windows_at
            self._rows.extend([row] * (self.model.window - 1))
        self._rows.append(row)
        self._pending = (step.t, step.base)
        return step, out

    def flush(self):
        out = self._emit()
        self._pending = None
        return out


def identity_model(window: int = 50, n_features: int = N_FEATURES) -> SeggnModel:
    """A model whose output is exactly the identity element."""
    m = SeggnModel((1,), window=window, dropout=0.0, n_features=n_features)
    m.params["head.w"][:] = 0.0
    return m
