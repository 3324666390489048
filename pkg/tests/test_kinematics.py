import numpy as np
import pytest

from innkf.errors import IkFailure
from innkf.kinematics import (
    N_LEGS,
    RobotGeometry,
    all_fk,
    all_ik,
    all_jacobians,
    leg_fk,
    leg_ik,
    leg_jacobian,
    leg_orientation,
)

GEOM = RobotGeometry()


def nominal_q(rng, n):
    q = np.empty((n, 3))
    q[:, 0] = rng.uniform(-0.3, 0.3, n)
    q[:, 1] = rng.uniform(0.2, 1.2, n)
    q[:, 2] = rng.uniform(-2.4, -0.6, n)
    return q


def test_zero_pose_hangs_straight_down():
    for leg in range(N_LEGS):
        foot = leg_fk(GEOM, leg, np.zeros(3))
        expected = GEOM.hip(leg) + [0, GEOM.side[leg] * GEOM.abduction, -(GEOM.thigh + GEOM.calf)]
        assert np.allclose(foot, expected, atol=1e-15)


@pytest.mark.parametrize("leg", range(N_LEGS))
def test_ik_inverts_fk(rng, leg):
    q = nominal_q(rng, 200)
    assert np.allclose(leg_ik(GEOM, leg, leg_fk(GEOM, leg, q)), q, atol=1e-9)


@pytest.mark.parametrize("leg", range(N_LEGS))
def test_jacobian_matches_central_differences(rng, leg):
    q = nominal_q(rng, 20)
    jac = leg_jacobian(GEOM, leg, q)
    h = 1e-6
    for j in range(3):
        dq = np.zeros(3)
        dq[j] = h
        num = (leg_fk(GEOM, leg, q + dq) - leg_fk(GEOM, leg, q - dq)) / (2 * h)
        assert np.allclose(jac[..., j], num, atol=1e-8)


def test_orientation_is_rotation(rng):
    r = leg_orientation(GEOM, 0, nominal_q(rng, 50))
    assert np.allclose(r @ np.swapaxes(r, 1, 2), np.eye(3), atol=1e-12)
    assert np.allclose(np.linalg.det(r), 1.0)


def test_batched_helpers_match_per_leg(rng):
    q = np.concatenate([nominal_q(rng, 5) for _ in range(N_LEGS)], axis=1)
    feet = all_fk(GEOM, q)
    jac = all_jacobians(GEOM, q)
    for leg in range(N_LEGS):
        ql = q[:, 3 * leg : 3 * leg + 3]
        assert np.array_equal(feet[:, leg], leg_fk(GEOM, leg, ql))
        assert np.array_equal(jac[:, leg], leg_jacobian(GEOM, leg, ql))
    assert np.allclose(all_ik(GEOM, feet), q, atol=1e-9)


def test_unreachable_foot_raises():
    far = GEOM.hip(0) + [0.0, -GEOM.abduction, -1.0]
    with pytest.raises(IkFailure):
        leg_ik(GEOM, 0, far)


def test_geometry_dict_roundtrip():
    g = RobotGeometry(thigh=0.21)
    assert RobotGeometry.from_dict(g.to_dict()) == g
