"""Record schema, dataset files and configuration files.

Dataset layout (UTF-8 text, one JSON document per line)::

    line 1   header  {"format": "innkf-dataset", "schema_version": 1, "seed": ...,
                      "rate_hz": ..., "robot": {...}, "frames": {...}, "meta": {...},
                      "n_records": N}
    line 2.. record  {"t": ..., "omega_meas": [3], "accel_meas": [3], "q": [12],
                      "dq": [12], "foot_pos": [4x3], "foot_vel": [4x3],
                      "contact": [4], "normal_force": [4], "tau": [12],
                      "gravity_torque": [12],
                      "truth": {"R": [3x3], "v": [3], "p": [3]}}

Floats are written with ``repr`` precision so a write/read cycle is exact.
The ``truth`` member is optional (recorded datasets have none).
"""

from __future__ import annotations

import configparser
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import liegroup as lg
from .errors import ConfigError, CorruptRecord, DataError, SchemaVersionMismatch

SCHEMA_VERSION = 1
FORMAT_NAME = "innkf-dataset"
NOMINAL_DT = 0.002
DT_JITTER = 1e-6

FRAMES = {
    "world": "z-up, gravity (0, 0, -9.81) m/s^2",
    "base": "IMU frame; foot positions/velocities and joint Jacobians are expressed here",
}


@dataclass
class SensorRecord:
    t: float
    omega_meas: np.ndarray
    accel_meas: np.ndarray
    q: np.ndarray
    dq: np.ndarray
    foot_pos: np.ndarray  # (4, 3)
    foot_vel: np.ndarray  # (4, 3)
    contact: np.ndarray  # (4,) bool
    normal_force: np.ndarray
    tau: np.ndarray
    gravity_torque: np.ndarray

    def to_json(self) -> dict:
        return {
            "t": float(self.t),
            "omega_meas": self.omega_meas.tolist(),
            "accel_meas": self.accel_meas.tolist(),
            "q": self.q.tolist(),
            "dq": self.dq.tolist(),
            "foot_pos": self.foot_pos.tolist(),
            "foot_vel": self.foot_vel.tolist(),
            "contact": [bool(c) for c in self.contact],
            "normal_force": self.normal_force.tolist(),
            "tau": self.tau.tolist(),
            "gravity_torque": self.gravity_torque.tolist(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "SensorRecord":
        def arr(key, shape):
            a = np.asarray(d[key], dtype=float)
            if a.shape != shape:
                raise ValueError(f"{key}: expected shape {shape}, got {a.shape}")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{key}: non-finite value")
            return a

        contact = d["contact"]
        if len(contact) != 4 or not all(isinstance(c, bool) for c in contact):
            raise ValueError("contact: expected four booleans")
        t = d["t"]
        if not isinstance(t, (int, float)) or not np.isfinite(t):
            raise ValueError("t: expected a finite number")
        return cls(
            t=float(t),
            omega_meas=arr("omega_meas", (3,)),
            accel_meas=arr("accel_meas", (3,)),
            q=arr("q", (12,)),
            dq=arr("dq", (12,)),
            foot_pos=arr("foot_pos", (4, 3)),
            foot_vel=arr("foot_vel", (4, 3)),
            contact=np.array(contact, dtype=bool),
            normal_force=arr("normal_force", (4,)),
            tau=arr("tau", (12,)),
            gravity_torque=arr("gravity_torque", (12,)),
        )


@dataclass
class TruthRecord:
    t: float
    X: np.ndarray  # (5, 5)

    def to_json(self) -> dict:
        return {
            "R": self.X[:3, :3].tolist(),
            "v": self.X[:3, 3].tolist(),
            "p": self.X[:3, 4].tolist(),
        }

    @classmethod
    def from_json(cls, t: float, d: dict) -> "TruthRecord":
        x = lg.make_element(np.asarray(d["R"], float), np.asarray(d["v"], float), np.asarray(d["p"], float))
        lg.check_group(x)
        return cls(t=t, X=x)


def check_timestamps(records) -> None:
    t = np.array([r.t for r in records])
    if len(t) < 2:
        return
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise DataError("timestamps must be strictly increasing")
    if np.any(np.abs(dt - NOMINAL_DT) > DT_JITTER):
        raise DataError(f"timestamps deviate from the nominal {NOMINAL_DT} s spacing")


def write_dataset(path, sensors, truth=None, meta=None) -> None:
    """Write sensor records (and optional truth) to ``path``."""
    meta = dict(meta or {})
    if truth is not None and len(truth) != len(sensors):
        raise DataError("truth and sensor streams differ in length")
    header = {
        "format": FORMAT_NAME,
        "schema_version": SCHEMA_VERSION,
        "seed": meta.pop("seed", None),
        "rate_hz": meta.pop("rate_hz", 1.0 / NOMINAL_DT),
        "robot": meta.pop("robot", {}),
        "frames": FRAMES,
        "meta": meta,
        "n_records": len(sensors),
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for i, rec in enumerate(sensors):
            d = rec.to_json()
            if truth is not None:
                d["truth"] = truth[i].to_json()
            fh.write(json.dumps(d, allow_nan=False) + "\n")


def read_header(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return _parse_header(fh.readline())


def _parse_header(line: str) -> dict:
    try:
        header = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorruptRecord(f"unreadable header: {exc}", line=1) from None
    if not isinstance(header, dict) or header.get("format") != FORMAT_NAME:
        raise CorruptRecord("not an innkf dataset header", line=1)
    if header.get("schema_version") != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"dataset schema version {header.get('schema_version')!r}, "
            f"this reader supports {SCHEMA_VERSION}"
        )
    return header


def read_dataset(path):
    """Return ``(sensors, truth, header)``; ``truth`` is ``None`` if absent."""
    sensors, truth = [], []
    with open(path, encoding="utf-8") as fh:
        header = _parse_header(fh.readline())
        lineno = 1
        for lineno, line in enumerate(fh, start=2):
            if not line.endswith("\n"):
                raise CorruptRecord("truncated record", line=lineno)
            try:
                d = json.loads(line)
                rec = SensorRecord.from_json(d)
                tr = TruthRecord.from_json(rec.t, d["truth"]) if "truth" in d else None
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise CorruptRecord(str(exc), line=lineno) from None
            sensors.append(rec)
            truth.append(tr)
    expected = header.get("n_records")
    if expected is not None and expected != len(sensors):
        raise CorruptRecord(
            f"header announces {expected} records, found {len(sensors)}", line=lineno + 1
        )
    has_truth = [t is not None for t in truth]
    if any(has_truth) and not all(has_truth):
        raise DataError("truth present on some records only")
    return sensors, (truth if all(has_truth) and truth else None), header


# trajectories ---------------------------------------------------------------

TRAJECTORY_COLUMNS = (
    ["t"]
    + [f"R{i}{j}" for i in range(3) for j in range(3)]
    + ["vx", "vy", "vz", "px", "py", "pz"]
)


def write_trajectory(path, t, X) -> None:
    """Plot-ready CSV, one row per tick, full float precision."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(TRAJECTORY_COLUMNS) + "\n")
        for ti, x in zip(t, X):
            vals = [ti, *x[:3, :3].ravel(), *x[:3, 3], *x[:3, 4]]
            fh.write(",".join(repr(float(v)) for v in vals) + "\n")


def read_trajectory(path):
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().strip().split(",")
        if head != TRAJECTORY_COLUMNS:
            raise CorruptRecord("unexpected trajectory columns", line=1)
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise CorruptRecord(str(exc)) from None
    if data.shape[1] != len(TRAJECTORY_COLUMNS):
        raise CorruptRecord("wrong number of trajectory columns")
    t = data[:, 0]
    X = lg.make_element(data[:, 1:10].reshape(-1, 3, 3), data[:, 10:13], data[:, 13:16])
    return t, X


def truth_arrays(truth):
    return np.array([r.t for r in truth]), np.stack([r.X for r in truth])


# configuration --------------------------------------------------------------

CONFIG_KEYS = {
    "noise": ("sigma_g", "sigma_a", "sigma_v", "sigma_q"),
    "sensor": ("sigma_g", "sigma_a", "sigma_q", "sigma_dq", "gyro_bias", "accel_bias",
               "slip_rate", "slip_speed", "slip_fraction"),
    "contact": ("beta0", "beta1", "k", "theta"),
    "loss": ("alpha", "beta", "c1", "c2"),
    "gait": ("period", "duty", "step_length", "body_height", "swing_height"),
    "terrain": ("kind", "step_height", "step_depth", "slope", "roughness", "obstacle_spacing",
                "obstacle_height", "segment_length"),
    "filter": ("initial_contact_cov", "contact_source"),
    "train": ("lr", "batch", "epochs", "preset", "window", "dropout", "val_fraction"),
}


def load_config(path) -> dict:
    """Parse an INI-style key/value file into ``{section: {key: value}}``.

    Values are parsed as floats, comma-separated float lists, or left as
    strings.  Unknown sections or keys raise ``ConfigError``.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    out = {}
    for section in parser.sections():
        if section not in CONFIG_KEYS:
            raise ConfigError(f"unknown config section [{section}]")
        out[section] = {}
        for key, raw in parser.items(section):
            if key not in CONFIG_KEYS[section]:
                raise ConfigError(f"unknown key {section}.{key}")
            out[section][key] = _parse_value(raw)
    return out


def _parse_value(raw: str):
    parts = [p.strip() for p in raw.split(",")]
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        return raw.strip()
    return vals[0] if len(vals) == 1 else vals


def dump_config(cfg: dict, path) -> None:
    parser = configparser.ConfigParser()
    for section, values in cfg.items():
        parser[section] = {
            k: ", ".join(repr(float(x)) for x in v) if isinstance(v, (list, tuple, np.ndarray))
            else (repr(float(v)) if isinstance(v, (int, float)) else str(v))
            for k, v in values.items()
        }
    with open(Path(path), "w", encoding="utf-8") as fh:
        parser.write(fh)
