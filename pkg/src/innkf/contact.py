"""Torque-based contact estimation.

The contact force at each foot is recovered from joint torques through the
leg Jacobian, projected on the surface normal, and mapped to a contact
probability with a per-foot logistic model.  A streaming
:class:`ContactEstimator` keeps the previous normal force per foot so the
measurement covariance can be derived from its rate of change.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import BadNormal, ConfigError, SingularJacobian
from .kinematics import N_LEGS, RobotGeometry, all_jacobians

JACOBIAN_COND_LIMIT = 1e8


@dataclass(frozen=True)
class ContactModelParams:
    beta0: tuple = (-3.0, -3.0, -3.0, -3.0)
    beta1: tuple = (0.25, 0.25, 0.25, 0.25)
    k: float = 1e-4
    theta: float = 0.5

    def __post_init__(self):
        if any(b <= 0 for b in self.beta1):
            raise ConfigError("beta1 must be positive")
        if self.k < 0:
            raise ConfigError("k must be non-negative")
        if not 0.0 < self.theta < 1.0:
            raise ConfigError("theta must lie in (0, 1)")
        if len(self.beta0) != len(self.beta1):
            raise ConfigError("beta0 and beta1 need one entry per foot")


@dataclass
class FootContactReading:
    force: np.ndarray
    normal_force: float
    probability: float
    covariance: float
    in_contact: bool


def estimate_contact_force(jacobian, tau, gravity_torque) -> np.ndarray:
    """Least-squares contact force satisfying ``J^T f = -(tau - g)``.

    ``jacobian`` is the ``(3, m)`` foot Jacobian; the solution is
    ``-(J J^T)^-1 J (tau - g)``.
    """
    j = np.asarray(jacobian, dtype=float)
    rhs = j @ (np.asarray(tau, dtype=float) - np.asarray(gravity_torque, dtype=float))
    jjt = j @ j.T
    if not np.all(np.isfinite(jjt)) or np.linalg.cond(jjt) >= JACOBIAN_COND_LIMIT:
        raise SingularJacobian("J J^T is ill-conditioned; leg near a kinematic singularity")
    return -np.linalg.solve(jjt, rhs)


def normal_force(f, n, tol: float = 1e-6) -> float:
    n = np.asarray(n, dtype=float)
    if abs(np.linalg.norm(n) - 1.0) > tol:
        raise BadNormal(f"normal must be a unit vector (|n| = {np.linalg.norm(n):.6g})")
    return float(np.dot(f, n))


def contact_probability(f_normal, params: ContactModelParams, foot: int):
    z = params.beta1[foot] * np.asarray(f_normal, dtype=float) + params.beta0[foot]
    return expit(z)[()]


def contact_covariance(f_normal, f_normal_prev, k):
    d = np.asarray(f_normal, dtype=float) - np.asarray(f_normal_prev, dtype=float)
    return (k * d * d)[()]


def contact_state(p, theta) -> bool:
    return bool(p >= theta)


@dataclass
class ContactEstimator:
    """Streams per-foot contact readings; one instance per sequence."""

    geometry: RobotGeometry = field(default_factory=RobotGeometry)
    params: ContactModelParams = field(default_factory=ContactModelParams)
    _prev: list = field(default_factory=lambda: [None] * N_LEGS, init=False, repr=False)

    def reset(self):
        self._prev = [None] * N_LEGS

    def step(self, q, tau, gravity_torque, normal=(0.0, 0.0, 1.0), jacobians=None) -> list:
        """Process one tick; ``normal`` is the surface normal in the base frame."""
        jac = all_jacobians(self.geometry, q) if jacobians is None else jacobians
        tau = np.asarray(tau, dtype=float)
        grav = np.asarray(gravity_torque, dtype=float)
        readings = []
        for i in range(N_LEGS):
            sl = slice(3 * i, 3 * i + 3)
            f = estimate_contact_force(jac[i], tau[sl], grav[sl])
            fn = normal_force(f, normal)
            prev = fn if self._prev[i] is None else self._prev[i]
            prob = float(contact_probability(fn, self.params, i))
            readings.append(
                FootContactReading(
                    force=f,
                    normal_force=fn,
                    probability=prob,
                    covariance=float(contact_covariance(fn, prev, self.params.k)),
                    in_contact=contact_state(prob, self.params.theta),
                )
            )
            self._prev[i] = fn
        return readings
