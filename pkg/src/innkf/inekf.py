"""Contact-aided right-invariant EKF on SE_{N+2}(3).

The filter state is the base element ``X = (R, v, p)`` augmented with the
world positions of the feet currently in contact.  Errors are right
invariant, ``eta = Z_hat Z^-1``, and the tangent ordering of the covariance
is ``(omega, v, p, d_1, ..., d_N)`` where contacts appear in registration
order.

Functional core (``predict``, ``update_contact``, ``add_contact``,
``remove_contact``) plus a streaming :class:`InEKF` that consumes sensor
records one tick at a time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import liegroup as lg
from .contact import ContactEstimator, ContactModelParams
from .errors import (
    DuplicateContact,
    InnkfError,
    NonFiniteInput,
    NumericalError,
    SingularInnovation,
    UnknownContact,
)
from .kinematics import (
    N_JOINTS,
    N_LEGS,
    RobotGeometry,
    all_jacobians,
    leg_fk,
    leg_jacobian,
    leg_orientation,
)

GRAVITY = np.array([0.0, 0.0, -9.81])
INNOVATION_COND_LIMIT = 1e12
DEFAULT_INITIAL_COV = (1e-2, 1e-2, 1e-2)


class InvalidTimestep(InnkfError, ValueError):
    exit_code = 3


def _vec(x, n):
    a = np.asarray(x, dtype=float)
    return np.broadcast_to(a, (n,)).copy()


@dataclass(frozen=True)
class NoiseConfig:
    """White-noise densities used by the filter (and by the simulator).

    ``sigma_g`` [rad/s/sqrt(Hz)], ``sigma_a`` [m/s^2/sqrt(Hz)], ``sigma_v``
    [m/s/sqrt(Hz)] are continuous-time densities; ``sigma_q`` is the
    per-sample encoder noise [rad].
    """

    sigma_g: np.ndarray = field(default_factory=lambda: np.full(3, 2e-3))
    sigma_a: np.ndarray = field(default_factory=lambda: np.full(3, 2e-2))
    sigma_v: np.ndarray = field(default_factory=lambda: np.full(3, 5e-2))
    sigma_q: np.ndarray = field(default_factory=lambda: np.full(N_JOINTS, 5e-3))

    def __post_init__(self):
        for name, n in (("sigma_g", 3), ("sigma_a", 3), ("sigma_v", 3), ("sigma_q", N_JOINTS)):
            arr = _vec(getattr(self, name), n)
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite and non-negative")
            object.__setattr__(self, name, arr)

    @classmethod
    def zero(cls) -> "NoiseConfig":
        return cls(np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(N_JOINTS))


@dataclass
class KinematicsMeasurement:
    foot: int
    p_fk: np.ndarray
    R_fk: np.ndarray
    J_p: np.ndarray

    @classmethod
    def from_joints(cls, geometry: RobotGeometry, foot: int, q, p_fk=None, J_p=None):
        ql = np.asarray(q, dtype=float)[3 * foot : 3 * foot + 3]
        if p_fk is None:
            p_fk = leg_fk(geometry, foot, ql)
        if J_p is None:
            J_p = leg_jacobian(geometry, foot, ql)
        return cls(
            foot=foot,
            p_fk=np.asarray(p_fk, dtype=float),
            R_fk=leg_orientation(geometry, foot, ql),
            J_p=np.asarray(J_p, dtype=float),
        )


@dataclass
class AugmentedState:
    base: np.ndarray = field(default_factory=lambda: np.eye(5))
    contacts: dict = field(default_factory=dict)  # foot -> world position, in P order
    frames: dict = field(default_factory=dict)  # foot -> last contact-frame orientation

    def copy(self) -> "AugmentedState":
        return AugmentedState(
            self.base.copy(),
            {k: v.copy() for k, v in self.contacts.items()},
            {k: v.copy() for k, v in self.frames.items()},
        )

    @property
    def dim(self) -> int:
        return 9 + 3 * len(self.contacts)

    def index(self, foot: int) -> int:
        for i, key in enumerate(self.contacts):
            if key == foot:
                return 9 + 3 * i
        raise UnknownContact(f"foot {foot} is not a registered contact")

    def matrix(self) -> np.ndarray:
        """The ``(5 + N)``-square matrix view ``Z``."""
        n = len(self.contacts)
        z = np.eye(5 + n)
        z[:5, :5] = self.base
        for i, d in enumerate(self.contacts.values()):
            z[:3, 5 + i] = d
        return z

    def set_base(self, x: np.ndarray) -> None:
        self.base = np.array(x, dtype=float)


def extract_base(state: AugmentedState) -> np.ndarray:
    return state.base.copy()


def augmented_adjoint(state: AugmentedState) -> np.ndarray:
    n = state.dim
    r = state.base[:3, :3]
    ad = np.zeros((n, n))
    ad[:9, :9] = lg.adjoint(state.base)
    for i, d in enumerate(state.contacts.values()):
        s = 9 + 3 * i
        ad[s : s + 3, s : s + 3] = r
        ad[s : s + 3, 0:3] = lg.hat3(d) @ r
    return ad


def apply_correction(state: AugmentedState, delta: np.ndarray) -> AugmentedState:
    """Left-multiply the augmented state by ``exp(delta)``."""
    phi = delta[0:3]
    dr = lg.exp_so3(phi)
    jl = lg.left_jacobian_so3(phi)
    out = state.copy()
    x = state.base
    out.base[:3, :3] = dr @ x[:3, :3]
    out.base[:3, 3] = dr @ x[:3, 3] + jl @ delta[3:6]
    out.base[:3, 4] = dr @ x[:3, 4] + jl @ delta[6:9]
    for i, (foot, d) in enumerate(state.contacts.items()):
        s = 9 + 3 * i
        out.contacts[foot] = dr @ d + jl @ delta[s : s + 3]
    return out


def _symmetrize(p):
    return 0.5 * (p + p.T)


def transition_matrix(n: int, dt: float, gravity=GRAVITY) -> np.ndarray:
    """``expm(A dt)`` for the nilpotent error dynamics (``A^3 = 0``)."""
    phi = np.eye(n)
    gx = lg.hat3(gravity)
    phi[3:6, 0:3] = gx * dt
    phi[6:9, 0:3] = 0.5 * gx * dt * dt
    phi[6:9, 3:6] = np.eye(3) * dt
    return phi


def error_dynamics_matrix(n: int, gravity=GRAVITY) -> np.ndarray:
    a = np.zeros((n, n))
    a[3:6, 0:3] = lg.hat3(gravity)
    a[6:9, 3:6] = np.eye(3)
    return a


def process_noise(state: AugmentedState, noise: NoiseConfig) -> np.ndarray:
    """``Ad_Z Cov(w) Ad_Z^T`` with ``w = (w_g, w_a, 0, h_R w_v, ...)``."""
    n = state.dim
    cov = np.zeros((n, n))
    cov[0:3, 0:3] = np.diag(noise.sigma_g**2)
    cov[3:6, 3:6] = np.diag(noise.sigma_a**2)
    sv = np.diag(noise.sigma_v**2)
    for i, foot in enumerate(state.contacts):
        s = 9 + 3 * i
        hr = state.frames.get(foot, np.eye(3))
        cov[s : s + 3, s : s + 3] = hr @ sv @ hr.T
    ad = augmented_adjoint(state)
    return ad @ cov @ ad.T


def predict(state, cov, omega, accel, dt, noise: NoiseConfig, gravity=GRAVITY):
    omega = np.asarray(omega, dtype=float)
    accel = np.asarray(accel, dtype=float)
    if not (np.all(np.isfinite(omega)) and np.all(np.isfinite(accel)) and np.isfinite(dt)):
        raise NonFiniteInput("non-finite IMU sample or timestep")
    if not 0.0 < dt <= 0.1:
        raise InvalidTimestep(f"dt={dt} outside (0, 0.1]")

    x = state.base
    r, v, p = x[:3, :3], x[:3, 3], x[:3, 4]
    out = state.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        acc_world = r @ accel + gravity
        out.base[:3, :3] = r @ lg.exp_so3(omega * dt)
        out.base[:3, 3] = v + acc_world * dt
        out.base[:3, 4] = p + v * dt + 0.5 * acc_world * dt * dt
    if not np.all(np.isfinite(out.base)):
        raise NumericalError("state diverged during propagation")

    phi = transition_matrix(state.dim, dt, gravity)
    qbar = process_noise(state, noise)
    cov_new = phi @ (cov + qbar * dt) @ phi.T
    return out, _symmetrize(cov_new)


def measurement_jacobian(state: AugmentedState, foot: int) -> np.ndarray:
    h = np.zeros((3, state.dim))
    h[:, 6:9] = -np.eye(3)
    s = state.index(foot)
    h[:, s : s + 3] = np.eye(3)
    return h


def innovation(state: AugmentedState, meas: KinematicsMeasurement) -> np.ndarray:
    """``Pi Z Y`` for ``Y = (h_p, 0, 1, -1)``, i.e. ``R h_p + p - d``."""
    if meas.foot not in state.contacts:
        raise UnknownContact(f"foot {meas.foot} is not a registered contact")
    x = state.base
    return x[:3, :3] @ meas.p_fk + x[:3, 4] - state.contacts[meas.foot]


def kinematic_noise(state: AugmentedState, meas: KinematicsMeasurement, noise: NoiseConfig):
    r = state.base[:3, :3]
    sq = noise.sigma_q[3 * meas.foot : 3 * meas.foot + 3]
    rj = r @ meas.J_p
    return rj @ np.diag(sq**2) @ rj.T


def update_contact(state, cov, meas: KinematicsMeasurement, contact_cov: float, noise: NoiseConfig):
    if meas.foot not in state.contacts:
        raise UnknownContact(f"foot {meas.foot} is not a registered contact")
    h = measurement_jacobian(state, meas.foot)
    nbar = kinematic_noise(state, meas, noise) + contact_cov * np.eye(3)
    s = h @ cov @ h.T + nbar
    if not np.all(np.isfinite(s)) or np.linalg.cond(s) > INNOVATION_COND_LIMIT:
        raise SingularInnovation("innovation covariance is ill-conditioned")
    k = np.linalg.solve(s, h @ cov).T  # P H^T S^-1 (S symmetric)
    with np.errstate(over="ignore", invalid="ignore"):
        delta = k @ innovation(state, meas)
        new_state = apply_correction(state, delta)
    if not (np.all(np.isfinite(delta)) and np.all(np.isfinite(new_state.base))):
        raise NumericalError("state diverged during the contact update")
    new_state.frames[meas.foot] = np.asarray(meas.R_fk, dtype=float)
    ikh = np.eye(state.dim) - k @ h
    cov_new = ikh @ cov @ ikh.T + k @ nbar @ k.T
    return new_state, _symmetrize(cov_new)


def add_contact(state, cov, meas: KinematicsMeasurement, initial_cov: float, noise: NoiseConfig):
    if meas.foot in state.contacts:
        raise DuplicateContact(f"foot {meas.foot} already registered")
    x = state.base
    out = state.copy()
    out.contacts[meas.foot] = x[:3, 4] + x[:3, :3] @ meas.p_fk
    out.frames[meas.foot] = np.asarray(meas.R_fk, dtype=float)
    n = state.dim
    big = np.zeros((n + 3, n + 3))
    big[:n, :n] = cov
    big[n:, :n] = cov[6:9, :]
    big[:n, n:] = cov[:, 6:9]
    big[n:, n:] = cov[6:9, 6:9] + kinematic_noise(state, meas, noise) + initial_cov * np.eye(3)
    return out, _symmetrize(big)


def remove_contact(state, cov, foot: int):
    s = state.index(foot)
    out = state.copy()
    del out.contacts[foot]
    out.frames.pop(foot, None)
    keep = np.r_[0:s, s + 3 : state.dim]
    return out, cov[np.ix_(keep, keep)].copy()


def initial_covariance(diag=DEFAULT_INITIAL_COV) -> np.ndarray:
    return np.diag(np.repeat(np.asarray(diag, dtype=float), 3))


@dataclass
class FilterStep:
    t: float
    base: np.ndarray
    cov: np.ndarray
    contacts: np.ndarray  # bool flags fed to the filter this tick


class InEKF:
    """Streaming contact-aided InEKF.

    ``feed`` propagates with the previous IMU sample over the elapsed time,
    then processes the feet: removals, updates of continuing contacts (in
    foot order) and finally registration of new contacts.
    """

    def __init__(
        self,
        geometry: RobotGeometry | None = None,
        noise: NoiseConfig | None = None,
        contact_params: ContactModelParams | None = None,
        x0=None,
        p0=None,
        initial_contact_cov: float = 1e-6,
        contact_source: str = "estimator",
        gravity=GRAVITY,
    ):
        if contact_source not in ("estimator", "record"):
            raise ValueError("contact_source must be 'estimator' or 'record'")
        self.geometry = geometry or RobotGeometry()
        self.noise = noise or NoiseConfig()
        self.contact_estimator = ContactEstimator(
            self.geometry, contact_params or ContactModelParams()
        )
        self.state = AugmentedState(np.eye(5) if x0 is None else np.array(x0, dtype=float))
        self.cov = initial_covariance() if p0 is None else np.array(p0, dtype=float)
        self.initial_contact_cov = initial_contact_cov
        self.contact_source = contact_source
        self.gravity = np.asarray(gravity, dtype=float)
        self._prev = None

    def feed(self, rec) -> FilterStep:
        if self._prev is not None:
            dt = rec.t - self._prev.t
            self.state, self.cov = predict(
                self.state, self.cov, self._prev.omega_meas, self._prev.accel_meas,
                dt, self.noise, self.gravity,
            )
        r = self.state.base[:3, :3]
        jac = all_jacobians(self.geometry, rec.q)
        readings = self.contact_estimator.step(
            rec.q, rec.tau, rec.gravity_torque, r.T @ [0.0, 0.0, 1.0], jacobians=jac
        )
        if self.contact_source == "record":
            flags = np.asarray(rec.contact, dtype=bool)
        else:
            flags = np.array([rd.in_contact for rd in readings])

        for foot in list(self.state.contacts):
            if not flags[foot]:
                self.state, self.cov = remove_contact(self.state, self.cov, foot)
        meas = {
            i: KinematicsMeasurement.from_joints(self.geometry, i, rec.q, rec.foot_pos[i], jac[i])
            for i in range(N_LEGS)
            if flags[i]
        }
        for foot in range(N_LEGS):
            if flags[foot] and foot in self.state.contacts:
                self.state, self.cov = update_contact(
                    self.state, self.cov, meas[foot], readings[foot].covariance, self.noise
                )
        for foot in range(N_LEGS):
            if flags[foot] and foot not in self.state.contacts:
                self.state, self.cov = add_contact(
                    self.state, self.cov, meas[foot], self.initial_contact_cov, self.noise
                )
        self._prev = rec
        return FilterStep(rec.t, self.state.base.copy(), self.cov[:9, :9].copy(), flags)


@dataclass
class FilterTrajectory:
    t: np.ndarray
    X: np.ndarray  # (T, 5, 5)
    P: np.ndarray  # (T, 9, 9) base covariance block
    contacts: np.ndarray  # (T, 4)

    def __len__(self):
        return len(self.t)


def run_filter(records, **kwargs) -> FilterTrajectory:
    """Batch runner over a time-ordered record sequence."""
    f = InEKF(**kwargs)
    steps = [f.feed(rec) for rec in records]
    return FilterTrajectory(
        t=np.array([s.t for s in steps]),
        X=np.stack([s.base for s in steps]),
        P=np.stack([s.cov for s in steps]),
        contacts=np.stack([s.contacts for s in steps]),
    )
