"""End-to-end glue used by the command line: configs, runs and reports."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import simio
from .contact import ContactModelParams
from .errors import ConfigError, DataError
from .inekf import NoiseConfig, run_filter
from .metrics import eval_ate, eval_re, error_series
from .seggn.compensator import compensate_trajectory
from .seggn.features import error_labels, feature_rows
from .seggn.losses import LossWeights
from .seggn.train import TrainConfig, TrainingSet
from .sim import GaitConfig, SensorNoiseSpec, TerrainProfile, simulate_sequence
from .simio import truth_arrays

log = logging.getLogger("innkf")

REPORT_SCHEMA = "innkf-run-report"
REPORT_VERSION = 1
RE_TIME_WINDOW = 10.0  # s
RE_DISTANCE_WINDOW = 8.0  # m

# sensor defaults for generated datasets: noise, constant IMU bias and slip
BENCHMARK_SENSOR = {
    "gyro_bias": (0.002, -0.001, 0.003),
    "accel_bias": (0.02, -0.01, 0.03),
    "slip_rate": 0.3,
    "slip_speed": 0.3,
    "slip_fraction": 0.5,
}


def _section(cfg, name):
    return dict((cfg or {}).get(name, {}))


def _triple(x):
    a = np.atleast_1d(np.asarray(x, dtype=float))
    if a.shape not in ((1,), (3,)):
        raise ConfigError(f"expected a scalar or a 3-vector, got {x!r}")
    return tuple(np.broadcast_to(a, (3,)).tolist())


def noise_from_config(cfg) -> NoiseConfig:
    sec = _section(cfg, "noise")
    try:
        return NoiseConfig(**{k: np.asarray(v, dtype=float) for k, v in sec.items()})
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def contact_params_from_config(cfg) -> ContactModelParams:
    sec = _section(cfg, "contact")
    kw = {}
    for key in ("beta0", "beta1"):
        if key in sec:
            kw[key] = tuple(np.broadcast_to(np.asarray(sec[key], dtype=float), (4,)).tolist())
    for key in ("k", "theta"):
        if key in sec:
            kw[key] = float(sec[key])
    return ContactModelParams(**kw)


def filter_kwargs(cfg) -> dict:
    sec = _section(cfg, "filter")
    source = sec.get("contact_source", "estimator")
    if source not in ("estimator", "record"):
        raise ConfigError("filter.contact_source must be 'estimator' or 'record'")
    return {
        "noise": noise_from_config(cfg),
        "contact_params": contact_params_from_config(cfg),
        "initial_contact_cov": float(sec.get("initial_contact_cov", 1e-6)),
        "contact_source": source,
    }


def sensor_spec_from_config(cfg, seed: int) -> SensorNoiseSpec:
    sec = {**BENCHMARK_SENSOR, **_section(cfg, "sensor")}
    base = NoiseConfig()
    noise = NoiseConfig(
        sigma_g=sec.get("sigma_g", base.sigma_g),
        sigma_a=sec.get("sigma_a", base.sigma_a),
        sigma_v=base.sigma_v,
        sigma_q=sec.get("sigma_q", base.sigma_q),
    )
    return SensorNoiseSpec(
        noise=noise,
        sigma_dq=float(sec.get("sigma_dq", SensorNoiseSpec.sigma_dq)),
        gyro_bias=_triple(sec["gyro_bias"]),
        accel_bias=_triple(sec["accel_bias"]),
        slip_rate=float(sec["slip_rate"]),
        slip_speed=float(sec["slip_speed"]),
        slip_fraction=float(sec["slip_fraction"]),
        seed=seed,
    )


def gait_from_config(cfg) -> GaitConfig:
    return GaitConfig(**{k: float(v) for k, v in _section(cfg, "gait").items()})


def terrain_from_config(cfg, seed: int, kind: str | None = None) -> TerrainProfile:
    sec = _section(cfg, "terrain")
    kw = {k: float(v) for k, v in sec.items() if k != "kind"}
    return TerrainProfile(kind=kind or sec.get("kind", "composite"), seed=seed, **kw)


def loss_weights_from_config(cfg) -> LossWeights:
    return LossWeights(**{k: float(v) for k, v in _section(cfg, "loss").items()})


def train_config_from_config(cfg, **overrides) -> TrainConfig:
    sec = _section(cfg, "train")
    kw = {}
    for key, cast in (("lr", float), ("batch", int), ("epochs", int), ("window", int),
                      ("dropout", float), ("val_fraction", float), ("preset", str)):
        if key in sec:
            kw[key] = cast(sec[key])
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig(weights=loss_weights_from_config(cfg), **kw)


# simulate --------------------------------------------------------------------

def simulate(cfg, seed: int, duration: float, out, terrain_kind: str | None = None):
    terrain = terrain_from_config(cfg, seed, terrain_kind)
    gait = gait_from_config(cfg)
    spec = sensor_spec_from_config(cfg, seed)
    seq = simulate_sequence(terrain, gait, duration, spec)
    meta = {
        "seed": seed,
        "rate_hz": seq.truth.rate,
        "robot": gait.geometry.to_dict(),
        "terrain": terrain.kind,
        "duration_s": duration,
        "n_slip_events": len(seq.truth.slips),
    }
    simio.write_dataset(out, seq.sensors, seq.truth_records, meta)
    return seq


# estimate --------------------------------------------------------------------

@dataclass
class Estimate:
    t: np.ndarray
    raw: object  # FilterTrajectory
    compensated: np.ndarray | None


def run_estimate(sensors, truth, cfg=None, model=None) -> Estimate:
    if not sensors:
        raise DataError("dataset has no records")
    simio.check_timestamps(sensors)
    x0 = truth[0].X if truth is not None else None
    raw = run_filter(sensors, x0=x0, **filter_kwargs(cfg))
    comp = compensate_trajectory(model, sensors, raw) if model is not None else None
    return Estimate(raw.t, raw, comp)


def estimator_metrics(t, est, truth_X) -> dict:
    out = eval_ate(est, truth_X).as_dict()
    for key, mode, window in (("RE_time", "time", RE_TIME_WINDOW), ("RE_distance", "distance", RE_DISTANCE_WINDOW)):
        try:
            out[key] = eval_re(est, truth_X, t, window, mode).as_dict()
        except DataError as exc:
            out[key] = {"mode": mode, "window": window, "skipped": str(exc)}
    return out


def build_report(name: str, header: dict, t, estimates: dict, truth_X) -> dict:
    """Deterministic report; runtime statistics are kept out of it."""
    return {
        "schema": REPORT_SCHEMA,
        "schema_version": REPORT_VERSION,
        "dataset": name,
        "seed": header.get("seed"),
        "n_ticks": int(len(t)),
        "duration_s": float(t[-1] - t[0]) if len(t) else 0.0,
        "alignment": "none",
        "estimators": {k: estimator_metrics(t, x, truth_X) for k, x in estimates.items()},
    }


def write_error_csv(path, t, est, truth_X) -> None:
    e = error_series(est, truth_X)
    cols = ["t", "rot_err_rad", "vx_err", "vy_err", "vz_err", "px_err", "py_err", "pz_err"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(len(t)):
            vals = [t[i], e["R"][i], *e["v"][i], *e["p"][i]]
            fh.write(",".join(repr(float(v)) for v in vals) + "\n")


def write_report(path, report: dict) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


# train -----------------------------------------------------------------------

def _prepare(args):
    path, cfg = args
    sensors, truth, _ = simio.read_dataset(path)
    if truth is None:
        raise DataError(f"{path}: training requires ground truth")
    est = run_estimate(sensors, truth, cfg)
    _, X = truth_arrays(truth)
    return feature_rows(sensors, est.raw.X, est.raw.contacts), error_labels(est.raw.X, X)


def training_set(paths, cfg=None, jobs: int = 1) -> TrainingSet:
    """Run the filter on every dataset and collect features and labels, in input order."""
    data = TrainingSet()
    work = [(p, cfg) for p in paths]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_prepare, work))
    else:
        results = [_prepare(w) for w in work]
    for feats, labels in results:
        data.add(feats, labels)
    return data
