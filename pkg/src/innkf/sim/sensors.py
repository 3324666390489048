"""Noisy proprioceptive streams synthesised from a ground-truth trajectory.

IMU samples are generated so that the filter's own discretisation
reproduces the truth: ``omega_k = Log(R_k^T R_{k+1}) / dt`` and
``a_k = R_k^T ((v_{k+1} - v_k) / dt - g)``.  Noise densities are turned into
per-sample standard deviations by dividing by ``sqrt(dt)``.  Each channel
draws from its own RNG stream so switching one channel's noise off leaves
the others bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import liegroup as lg
from ..errors import ConfigError
from ..inekf import GRAVITY, NoiseConfig
from ..kinematics import N_LEGS, all_fk, all_jacobians
from ..simio import SensorRecord, TruthRecord
from .gait import GaitConfig, GroundTruth, generate_truth, inject_slip, random_slip_events
from .terrain import TerrainProfile

CHANNELS = ("gyro", "accel", "q", "dq")


@dataclass(frozen=True)
class SensorNoiseSpec:
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    sigma_dq: float = 0.05  # rad/s per sample
    gyro_bias: tuple = (0.0, 0.0, 0.0)  # rad/s
    accel_bias: tuple = (0.0, 0.0, 0.0)  # m/s^2
    slip_rate: float = 0.0  # probability that a stance phase slips
    slip_speed: float = 0.3  # m/s
    slip_fraction: float = 0.5  # portion of the stance phase spent slipping
    slip_events: tuple = ()
    seed: int = 0

    def __post_init__(self):
        if self.sigma_dq < 0:
            raise ConfigError("sigma_dq must be non-negative")
        for name in ("gyro_bias", "accel_bias"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (3,) or not np.all(np.isfinite(arr)):
                raise ConfigError(f"{name} must be a finite 3-vector")

    @classmethod
    def zero(cls, seed: int = 0) -> "SensorNoiseSpec":
        return cls(noise=NoiseConfig.zero(), sigma_dq=0.0, seed=seed)


def imu_from_truth(truth: GroundTruth, gravity=GRAVITY):
    """Noise-free ``(omega, accel)`` for ticks ``0..N-1``."""
    dt = 1.0 / truth.rate
    r = truth.X[:, :3, :3]
    v = truth.X[:, :3, 3]
    rel = np.einsum("nji,njk->nik", r[:-1], r[1:])
    omega = lg.log_so3(rel) / dt
    acc_world = (v[1:] - v[:-1]) / dt - gravity
    accel = np.einsum("nji,nj->ni", r[:-1], acc_world)
    return omega, accel


def contact_forces(truth: GroundTruth, gravity=GRAVITY):
    """World-frame ground reaction per foot, the body weight shared by stance feet."""
    g = truth.gait.geometry
    total = g.mass * (truth.accel_world - gravity)
    n = np.maximum(truth.contact.sum(axis=1), 1)
    return truth.contact[..., None] * (total / n[:, None])[:, None, :]


def leg_gravity_torque(geometry, q, r, gravity=GRAVITY):
    """Synthetic leg-weight torque: half the leg mass lumped at the foot."""
    jac = all_jacobians(geometry, q)
    w = 0.5 * geometry.leg_mass * np.einsum("nji,j->ni", r, gravity)
    tau = -np.einsum("nlji,nj->nli", jac, w)
    return tau.reshape(len(q), -1)


def synthesize_sensors(truth: GroundTruth, spec: SensorNoiseSpec, gravity=GRAVITY):
    """Return ``(sensors, truth_records)`` for ticks ``0..N-1``."""
    n = truth.n_ticks
    dt = 1.0 / truth.rate
    rngs = dict(zip(CHANNELS, (np.random.default_rng(s) for s in np.random.SeedSequence(spec.seed).spawn(len(CHANNELS)))))
    nz = spec.noise

    omega, accel = imu_from_truth(truth, gravity)
    omega = omega + rngs["gyro"].standard_normal((n, 3)) * (nz.sigma_g / np.sqrt(dt))
    omega = omega + np.asarray(spec.gyro_bias, dtype=float)
    accel = accel + rngs["accel"].standard_normal((n, 3)) * (nz.sigma_a / np.sqrt(dt))
    accel = accel + np.asarray(spec.accel_bias, dtype=float)

    geom = truth.gait.geometry
    q_true = truth.q[:n]
    q = q_true + rngs["q"].standard_normal((n, 12)) * nz.sigma_q
    dq = truth.dq[:n] + rngs["dq"].standard_normal((n, 12)) * spec.sigma_dq
    foot_pos = all_fk(geom, q)
    jac = all_jacobians(geom, q)
    foot_vel = np.einsum("nlij,nlj->nli", jac, dq.reshape(n, N_LEGS, 3))

    r = truth.X[:n, :3, :3]
    f_world = contact_forces(truth, gravity)[:n]
    f_base = np.einsum("nji,nlj->nli", r, f_world)
    grav_tau = leg_gravity_torque(geom, q_true, r, gravity)
    jac_true = all_jacobians(geom, q_true)
    tau = grav_tau - np.einsum("nlji,nlj->nli", jac_true, f_base).reshape(n, 12)

    sensors = [
        SensorRecord(
            t=float(truth.t[k]),
            omega_meas=omega[k],
            accel_meas=accel[k],
            q=q[k],
            dq=dq[k],
            foot_pos=foot_pos[k],
            foot_vel=foot_vel[k],
            contact=truth.contact[k].copy(),
            normal_force=f_world[k, :, 2].copy(),
            tau=tau[k],
            gravity_torque=grav_tau[k],
        )
        for k in range(n)
    ]
    truth_records = [TruthRecord(float(truth.t[k]), truth.X[k].copy()) for k in range(n)]
    return sensors, truth_records


@dataclass
class Sequence:
    truth: GroundTruth
    sensors: list
    truth_records: list

    @property
    def X(self) -> np.ndarray:
        return self.truth.X[: len(self.sensors)]


def simulate_sequence(
    terrain: TerrainProfile,
    gait: GaitConfig,
    duration: float,
    spec: SensorNoiseSpec,
    rate: float = 500.0,
    seed: int | None = None,
) -> Sequence:
    """Truth, slip injection and sensor synthesis in one call."""
    seed = spec.seed if seed is None else seed
    truth = generate_truth(terrain, gait, duration, rate, seed)
    events = tuple(spec.slip_events)
    if spec.slip_rate > 0:
        events += tuple(random_slip_events(truth, spec.slip_rate, spec.slip_speed, spec.slip_fraction, seed))
    truth = inject_slip(truth, events)
    sensors, truth_records = synthesize_sensors(truth, spec)
    return Sequence(truth, sensors, truth_records)
