"""Leg kinematics for a 12-joint quadruped (abduction, hip pitch, knee).

Each leg is a 3-DoF chain hanging from a hip mount on the base (IMU) frame::

    foot = hip + Rx(q0) @ ([0, side*l_ab, 0] + Ry(q1) @ [0, 0, -l1]
                                              + Ry(q1 + q2) @ [0, 0, -l2])

Joint vectors are ordered leg-major: ``q[3*leg:3*leg+3]``.  Functions
broadcast over leading dimensions of the joint arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IkFailure

LEG_NAMES = ("FR", "FL", "RR", "RL")
N_LEGS = 4
N_JOINTS = 12


@dataclass(frozen=True)
class RobotGeometry:
    """Go1-like dimensions; all values in metres."""

    hip_x: float = 0.185
    hip_y: float = 0.095
    abduction: float = 0.08
    thigh: float = 0.2
    calf: float = 0.2
    mass: float = 12.0
    leg_mass: float = 0.6
    # +1 for front/left, -1 for rear/right, in LEG_NAMES order
    fore: tuple = field(default=(1.0, 1.0, -1.0, -1.0))
    side: tuple = field(default=(-1.0, 1.0, -1.0, 1.0))

    def hip(self, leg: int) -> np.ndarray:
        return np.array([self.fore[leg] * self.hip_x, self.side[leg] * self.hip_y, 0.0])

    def to_dict(self) -> dict:
        return {
            "hip_x": self.hip_x,
            "hip_y": self.hip_y,
            "abduction": self.abduction,
            "thigh": self.thigh,
            "calf": self.calf,
            "mass": self.mass,
            "leg_mass": self.leg_mass,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RobotGeometry":
        keys = ("hip_x", "hip_y", "abduction", "thigh", "calf", "mass", "leg_mass")
        return cls(**{k: float(d[k]) for k in keys if k in d})


def _leg_terms(geom, leg, q):
    q = np.asarray(q, dtype=float)
    q0, q1, q2 = q[..., 0], q[..., 1], q[..., 2]
    l1, l2 = geom.thigh, geom.calf
    q12 = q1 + q2
    x = -l1 * np.sin(q1) - l2 * np.sin(q12)
    y = np.full_like(x, geom.side[leg] * geom.abduction)
    z = -l1 * np.cos(q1) - l2 * np.cos(q12)
    return q0, q1, q12, x, y, z


def leg_fk(geom: RobotGeometry, leg: int, q: np.ndarray) -> np.ndarray:
    """Foot position in the base frame for joint angles ``(..., 3)``."""
    q0, _, _, x, y, z = _leg_terms(geom, leg, q)
    c, s = np.cos(q0), np.sin(q0)
    out = np.stack([x, c * y - s * z, s * y + c * z], axis=-1)
    return out + geom.hip(leg)


def leg_jacobian(geom: RobotGeometry, leg: int, q: np.ndarray) -> np.ndarray:
    """d(foot)/d(q), shape ``(..., 3, 3)``."""
    q0, q1, q12, x, y, z = _leg_terms(geom, leg, q)
    l1, l2 = geom.thigh, geom.calf
    c, s = np.cos(q0), np.sin(q0)
    dx1 = -l1 * np.cos(q1) - l2 * np.cos(q12)
    dx2 = -l2 * np.cos(q12)
    dz1 = l1 * np.sin(q1) + l2 * np.sin(q12)
    dz2 = l2 * np.sin(q12)
    zero = np.zeros_like(x)
    col0 = np.stack([zero, -s * y - c * z, c * y - s * z], axis=-1)
    col1 = np.stack([dx1, -s * dz1, c * dz1], axis=-1)
    col2 = np.stack([dx2, -s * dz2, c * dz2], axis=-1)
    return np.stack([col0, col1, col2], axis=-1)


def leg_orientation(geom: RobotGeometry, leg: int, q: np.ndarray) -> np.ndarray:
    """Orientation of the foot (calf) frame in the base frame."""
    q = np.asarray(q, dtype=float)
    q0, q12 = q[..., 0], q[..., 1] + q[..., 2]
    c0, s0 = np.cos(q0), np.sin(q0)
    c1, s1 = np.cos(q12), np.sin(q12)
    out = np.zeros(q.shape[:-1] + (3, 3))
    # Rx(q0) @ Ry(q1 + q2)
    out[..., 0, 0] = c1
    out[..., 0, 2] = s1
    out[..., 1, 0] = s0 * s1
    out[..., 1, 1] = c0
    out[..., 1, 2] = -s0 * c1
    out[..., 2, 0] = -c0 * s1
    out[..., 2, 1] = s0
    out[..., 2, 2] = c0 * c1
    return out


def leg_ik(geom: RobotGeometry, leg: int, foot: np.ndarray) -> np.ndarray:
    """Analytic inverse kinematics, knee bent backwards (``q2 < 0``)."""
    r = np.asarray(foot, dtype=float) - geom.hip(leg)
    y = geom.side[leg] * geom.abduction
    l1, l2 = geom.thigh, geom.calf
    yz2 = r[..., 1] ** 2 + r[..., 2] ** 2 - y * y
    if np.any(yz2 <= 0.0):
        raise IkFailure(f"leg {LEG_NAMES[leg]}: foot inside abduction radius")
    z = -np.sqrt(yz2)
    q0 = np.arctan2(r[..., 2], r[..., 1]) - np.arctan2(z, y)
    q0 = (q0 + np.pi) % (2 * np.pi) - np.pi
    x = r[..., 0]
    d = (x * x + z * z - l1 * l1 - l2 * l2) / (2 * l1 * l2)
    if np.any(np.abs(d) > 1.0):
        raise IkFailure(f"leg {LEG_NAMES[leg]}: foot outside workspace")
    q2 = -np.arccos(d)
    q1 = np.arctan2(-x, -z) - np.arctan2(l2 * np.sin(q2), l1 + l2 * np.cos(q2))
    return np.stack([q0, q1, q2], axis=-1)


def all_fk(geom: RobotGeometry, q: np.ndarray) -> np.ndarray:
    """Foot positions ``(..., 4, 3)`` from the 12-vector ``q``."""
    q = np.asarray(q, dtype=float)
    return np.stack([leg_fk(geom, i, q[..., 3 * i : 3 * i + 3]) for i in range(N_LEGS)], axis=-2)


def all_jacobians(geom: RobotGeometry, q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return np.stack(
        [leg_jacobian(geom, i, q[..., 3 * i : 3 * i + 3]) for i in range(N_LEGS)], axis=-3
    )


def all_ik(geom: RobotGeometry, feet: np.ndarray) -> np.ndarray:
    feet = np.asarray(feet, dtype=float)
    return np.concatenate([leg_ik(geom, i, feet[..., i, :]) for i in range(N_LEGS)], axis=-1)
