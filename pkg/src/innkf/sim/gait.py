"""Kinematic trot generator producing ground-truth base and foot motion.

The base follows a smooth analytic path: forward speed ramps up with a
quintic smoothstep, height tracks a Gaussian-smoothed terrain profile
(cubic spline, so C^2), and small roll/yaw/bounce oscillations are layered
on top.  Feet follow a periodic contact schedule; stance feet are fixed in
the world except during scheduled slip events.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.ndimage import gaussian_filter1d

from .. import liegroup as lg
from ..errors import ConfigError, IkFailure, UnreachableGait
from ..kinematics import N_LEGS, RobotGeometry, all_ik
from .terrain import TerrainProfile

MAX_TICKS = 10**7


@dataclass(frozen=True)
class GaitConfig:
    period: float = 0.5  # s
    duty: float = 0.6
    step_length: float = 0.25  # m advanced per gait cycle
    body_height: float = 0.28  # m
    swing_height: float = 0.08  # m
    phase_offsets: tuple = (0.0, 0.5, 0.5, 0.0)  # trot: FR+RL, FL+RR
    ramp_time: float = 1.0  # s
    bounce: float = 0.004  # m
    roll_amplitude: float = 0.02  # rad
    yaw_amplitude: float = 0.03  # rad
    yaw_period: float = 7.0  # s
    geometry: RobotGeometry = field(default_factory=RobotGeometry)

    def __post_init__(self):
        if not 0.0 < self.duty < 1.0:
            raise ConfigError("duty factor must lie in (0, 1)")
        if self.period <= 0 or self.ramp_time <= 0:
            raise ConfigError("period and ramp time must be positive")
        g = self.geometry
        reach = g.thigh + g.calf
        half_stride = 0.5 * self.step_length * self.duty
        if self.body_height >= reach or np.hypot(half_stride, self.body_height) >= 0.98 * reach:
            raise UnreachableGait("step length / body height exceed leg reach")
        if self.step_length < 0:
            raise UnreachableGait("step length must be non-negative")

    @property
    def speed(self) -> float:
        return self.step_length / self.period


@dataclass(frozen=True)
class SlipEvent:
    foot: int
    t_start: float
    t_end: float
    velocity: tuple  # world-frame foot velocity during the event [m/s]

    @property
    def displacement(self) -> np.ndarray:
        return np.asarray(self.velocity, dtype=float) * (self.t_end - self.t_start)


def _smoothstep(tau):
    tau = np.clip(tau, 0.0, 1.0)
    return tau**3 * (10 - 15 * tau + 6 * tau * tau)


def _smoothstep_d(tau):
    inside = (tau > 0) & (tau < 1)
    return np.where(inside, 30 * tau**2 * (1 - tau) ** 2, 0.0)


def _smoothstep_dd(tau):
    inside = (tau > 0) & (tau < 1)
    return np.where(inside, 60 * tau - 180 * tau**2 + 120 * tau**3, 0.0)


def _rot_x(a):
    c, s = np.cos(a), np.sin(a)
    out = np.zeros(np.shape(a) + (3, 3))
    out[..., 0, 0] = 1
    out[..., 1, 1], out[..., 1, 2] = c, -s
    out[..., 2, 1], out[..., 2, 2] = s, c
    return out


def _rot_y(a):
    c, s = np.cos(a), np.sin(a)
    out = np.zeros(np.shape(a) + (3, 3))
    out[..., 1, 1] = 1
    out[..., 0, 0], out[..., 0, 2] = c, s
    out[..., 2, 0], out[..., 2, 2] = -s, c
    return out


def _rot_z(a):
    c, s = np.cos(a), np.sin(a)
    out = np.zeros(np.shape(a) + (3, 3))
    out[..., 2, 2] = 1
    out[..., 0, 0], out[..., 0, 1] = c, -s
    out[..., 1, 0], out[..., 1, 1] = s, c
    return out


class BaseMotion:
    """Analytic base trajectory; every method is vectorised over ``t``."""

    def __init__(self, terrain: TerrainProfile, gait: GaitConfig, seed: int = 0, extent: float = 0.0):
        self.terrain = terrain
        self.gait = gait
        rng = np.random.default_rng([seed, 7])
        self.phase_roll = rng.uniform(0, 2 * np.pi)
        self.phase_yaw = rng.uniform(0, 2 * np.pi)
        self.amp_scale = rng.uniform(0.8, 1.2)
        xs = np.arange(-2.0, max(extent, terrain.length) + 3.0, 0.01)
        g = gait.geometry
        lateral = np.array([-g.hip_y - g.abduction, 0.0, g.hip_y + g.abduction])
        heights = terrain.height(xs[:, None], lateral[None, :]).mean(axis=1)
        self._ground = CubicSpline(xs, gaussian_filter1d(heights, sigma=20.0, mode="nearest"))
        self._ground_d = self._ground.derivative(1)
        self._ground_dd = self._ground.derivative(2)

    def ground(self, x):
        return self._ground(x)

    def ramp(self, t):
        tau = np.asarray(t, dtype=float) / self.gait.ramp_time
        T = self.gait.ramp_time
        return _smoothstep(tau), _smoothstep_d(tau) / T, _smoothstep_dd(tau) / T**2

    def forward(self, t):
        """Distance along x and its first two derivatives."""
        t = np.asarray(t, dtype=float)
        u, T = self.gait.speed, self.gait.ramp_time
        tau = np.clip(t / T, 0.0, 1.0)
        x_ramp = u * T * tau**4 * (2.5 - 3 * tau + tau * tau)
        x = np.where(t < T, x_ramp, u * (0.5 * T + (t - T)))
        x = np.where(t <= 0, 0.0, x)
        s, ds, _ = self.ramp(t)
        return x, u * s, u * ds

    def _osc(self, t):
        """Amplitude envelope shared by the gait oscillations."""
        s, ds, dds = self.ramp(t)
        scale = self.amp_scale if self.gait.speed > 0 else 0.0
        return scale * s, scale * ds, scale * dds

    def position(self, t):
        return self.kinematics(t)[0]

    def kinematics(self, t):
        """Position, velocity and acceleration, each ``(..., 3)``."""
        t = np.asarray(t, dtype=float)
        g = self.gait
        x, xd, xdd = self.forward(t)
        e, ed, edd = self._osc(t)
        w = 4 * np.pi / g.period
        b, bd, bdd = np.sin(w * t), w * np.cos(w * t), -w * w * np.sin(w * t)
        bounce = g.bounce * e * b
        bounce_d = g.bounce * (ed * b + e * bd)
        bounce_dd = g.bounce * (edd * b + 2 * ed * bd + e * bdd)
        h, hd, hdd = self._ground(x), self._ground_d(x), self._ground_dd(x)
        z = g.body_height + h + bounce
        zd = hd * xd + bounce_d
        zdd = hdd * xd * xd + hd * xdd + bounce_dd
        zero = np.zeros_like(x)
        return (
            np.stack([x, zero, z], axis=-1),
            np.stack([xd, zero, zd], axis=-1),
            np.stack([xdd, zero, zdd], axis=-1),
        )

    def angles(self, t):
        t = np.asarray(t, dtype=float)
        g = self.gait
        x, _, _ = self.forward(t)
        e, _, _ = self._osc(t)
        yaw = g.yaw_amplitude * e * np.sin(2 * np.pi * t / g.yaw_period + self.phase_yaw)
        pitch = -np.arctan(self._ground_d(x))
        roll = g.roll_amplitude * e * np.sin(2 * np.pi * t / g.period + self.phase_roll)
        return roll, pitch, yaw

    def rotation(self, t):
        roll, pitch, yaw = self.angles(t)
        return _rot_z(yaw) @ _rot_y(pitch) @ _rot_x(roll)


class FootSchedule:
    """Periodic stance/swing schedule and footholds for one leg."""

    def __init__(self, motion: BaseMotion, leg: int, duration: float, slips=()):
        g = motion.gait
        geom = g.geometry
        self.leg = leg
        self.motion = motion
        T = g.period
        k = np.arange(-2, int(np.ceil(duration / T)) + 3)
        self.td = (k - g.phase_offsets[leg]) * T
        self.lo = self.td + g.duty * T
        t_mid = np.maximum(self.td + 0.5 * g.duty * T, 0.0)
        p_mid = motion.position(t_mid)
        _, _, yaw = motion.angles(t_mid)
        hip = geom.hip(leg) + np.array([0.0, geom.side[leg] * geom.abduction, 0.0])
        c, s = np.cos(yaw), np.sin(yaw)
        fx = p_mid[:, 0] + c * hip[0] - s * hip[1]
        fy = p_mid[:, 1] + s * hip[0] + c * hip[1]
        self.footholds = np.stack([fx, fy, motion.terrain.height(fx, fy)], axis=-1)
        self.slips = [ev for ev in slips if ev.foot == leg]
        self.swing_height = g.swing_height

    def slip_offset(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape + (3,))
        for ev in self.slips:
            dur = np.clip(t - ev.t_start, 0.0, ev.t_end - ev.t_start)
            out += dur[..., None] * np.asarray(ev.velocity, dtype=float)
        return out

    def evaluate(self, t):
        """World foot position ``(..., 3)`` and stance flag at times ``t``."""
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.td, t, side="right") - 1
        stance = t < self.lo[k]
        slip_t = self.slip_offset(t)
        slip_td = self.slip_offset(self.td[k])
        slip_lo = self.slip_offset(self.lo[k])
        start = self.footholds[k] + slip_lo - slip_td
        end = self.footholds[k + 1]
        tau = (t - self.lo[k]) / (self.td[k + 1] - self.lo[k])
        s = _smoothstep(tau)[..., None]
        swing = start + s * (end - start)
        tc = np.clip(tau, 0.0, 1.0)
        swing[..., 2] += self.swing_height * 16 * tc**2 * (1 - tc) ** 2
        stance_pos = self.footholds[k] + slip_t - slip_td
        return np.where(stance[..., None], stance_pos, swing), stance


@dataclass
class GroundTruth:
    """Sampled ground truth at ``rate`` Hz, one extra tick past the end."""

    t: np.ndarray  # (N+1,)
    X: np.ndarray  # (N+1, 5, 5)
    accel_world: np.ndarray  # (N+1, 3) second derivative of position
    foot_world: np.ndarray  # (N+1, 4, 3)
    foot_base: np.ndarray  # (N+1, 4, 3)
    foot_base_vel: np.ndarray  # (N+1, 4, 3)
    contact: np.ndarray  # (N+1, 4)
    q: np.ndarray  # (N+1, 12)
    dq: np.ndarray  # (N+1, 12)
    terrain: TerrainProfile
    gait: GaitConfig
    seed: int
    duration: float
    rate: float
    slips: tuple = ()

    @property
    def n_ticks(self) -> int:
        return len(self.t) - 1


def _feet(motion, schedules, t):
    feet, flags = zip(*(s.evaluate(t) for s in schedules))
    return np.stack(feet, axis=-2), np.stack(flags, axis=-1)


def _feet_in_base(motion, schedules, t):
    feet, flags = _feet(motion, schedules, t)
    r = motion.rotation(t)
    p = motion.position(t)
    rel = feet - p[..., None, :]
    return np.einsum("...ji,...kj->...ki", r, rel), feet, flags


def generate_truth(
    terrain: TerrainProfile,
    gait: GaitConfig,
    duration: float,
    rate: float = 500.0,
    seed: int = 0,
    slips=(),
) -> GroundTruth:
    n = int(round(duration * rate))
    if n < 1 or n > MAX_TICKS:
        raise ConfigError(f"duration*rate must be in [1, {MAX_TICKS}] ticks")
    dt = 1.0 / rate
    t = np.arange(n + 1) * dt
    extent = gait.speed * (duration + 2 * gait.period)
    motion = BaseMotion(terrain, gait, seed, extent=extent)
    schedules = [FootSchedule(motion, leg, duration, slips) for leg in range(N_LEGS)]

    p, v, a = motion.kinematics(t)
    R = motion.rotation(t)
    X = lg.make_element(R, v, p)

    foot_base, foot_world, contact = _feet_in_base(motion, schedules, t)
    h = 1e-6
    fb_plus, _, _ = _feet_in_base(motion, schedules, t + h)
    fb_minus, _, _ = _feet_in_base(motion, schedules, t - h)
    foot_base_vel = (fb_plus - fb_minus) / (2 * h)

    geom = gait.geometry
    try:
        q = all_ik(geom, foot_base)
    except IkFailure as exc:
        raise UnreachableGait(f"gait leaves the leg workspace: {exc}") from None
    from ..kinematics import all_jacobians

    jac = all_jacobians(geom, q)
    dq = np.linalg.solve(jac, foot_base_vel[..., None])[..., 0].reshape(len(t), 12)
    return GroundTruth(
        t=t, X=X, accel_world=a, foot_world=foot_world, foot_base=foot_base,
        foot_base_vel=foot_base_vel, contact=contact, q=q, dq=dq, terrain=terrain,
        gait=gait, seed=seed, duration=duration, rate=rate, slips=tuple(slips),
    )


def inject_slip(truth: GroundTruth, events) -> GroundTruth:
    """Regenerate ``truth`` with additional slip events (base motion unchanged)."""
    events = tuple(events)
    for ev in events:
        if not (0 <= ev.t_start <= ev.t_end <= truth.duration):
            raise ConfigError(f"slip event {ev} outside the sequence")
    if not events:
        return truth
    return generate_truth(
        truth.terrain, truth.gait, truth.duration, truth.rate, truth.seed,
        slips=truth.slips + events,
    )


def random_slip_events(truth: GroundTruth, rate: float, speed: float, fraction: float, seed: int):
    """Draw slip events on stance phases.

    Each stance phase slips with probability ``rate``; the foot moves
    backwards relative to the walking direction (as on a slippery surface
    during push-off) at ``speed`` scaled by U(0.5, 1.5) for ``fraction`` of
    the stance time.
    """
    if not 0.0 <= rate <= 1.0 or not 0.0 < fraction <= 1.0:
        raise ConfigError("slip rate must be in [0, 1] and fraction in (0, 1]")
    rng = np.random.default_rng([seed, 11])
    gait = truth.gait
    motion = BaseMotion(truth.terrain, gait, truth.seed, extent=gait.speed * (truth.duration + 2 * gait.period))
    stance_len = gait.duty * gait.period
    events = []
    for leg in range(N_LEGS):
        sched = FootSchedule(motion, leg, truth.duration)
        for td, lo in zip(sched.td, sched.lo):
            draw = rng.random(3)
            if td < 0.5 or lo > truth.duration or draw[0] >= rate:
                continue
            length = fraction * stance_len
            t0 = td + draw[1] * (stance_len - length)
            _, _, yaw = motion.angles(t0)
            mag = speed * (0.5 + draw[2])
            vel = (-mag * float(np.cos(yaw)), -mag * float(np.sin(yaw)), 0.0)
            events.append(SlipEvent(leg, float(t0), float(t0 + length), vel))
    return events


def with_gait(gait: GaitConfig, **changes) -> GaitConfig:
    return replace(gait, **changes)
