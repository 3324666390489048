import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from innkf.contact import (
    ContactEstimator,
    ContactModelParams,
    contact_covariance,
    contact_probability,
    contact_state,
    estimate_contact_force,
    normal_force,
)
from innkf.errors import BadNormal, ConfigError, SingularJacobian

UNIT = ContactModelParams(beta0=(0.0,) * 4, beta1=(1.0,) * 4)


# force from torque ------------------------------------------------------------


def test_identity_jacobian_force():
    f = estimate_contact_force(np.eye(3), [0, 0, -9.8], np.zeros(3))
    assert np.allclose(f, [0, 0, 9.8], atol=1e-15)


def test_gravity_compensated_torque_gives_zero_force(rng):
    g = rng.normal(size=3)
    assert np.array_equal(estimate_contact_force(rng.normal(size=(3, 3)), g, g), np.zeros(3))


@pytest.mark.parametrize("m", [3, 5])
def test_force_matches_normal_equations(rng, m):
    for _ in range(20):
        j = rng.normal(size=(3, m))
        tau, g = rng.normal(size=m), rng.normal(size=m)
        # least squares of J^T f = -(tau - g)
        oracle = np.linalg.lstsq(j.T, -(tau - g), rcond=None)[0]
        assert np.allclose(estimate_contact_force(j, tau, g), oracle, atol=1e-9)


def test_singular_jacobian_raises():
    j = np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 1.0, 1e-9]])
    with pytest.raises(SingularJacobian):
        estimate_contact_force(j, np.ones(3), np.zeros(3))


# normal projection -------------------------------------------------------------


def test_normal_force_examples():
    assert normal_force([0, 0, 9.8], [0, 0, 1]) == pytest.approx(9.8)
    assert normal_force([1, 0, 0], [0, 0, 1]) == 0.0
    assert normal_force([1, 2, 3], [0, 1, 0]) == 2.0


def test_normal_must_be_unit():
    with pytest.raises(BadNormal):
        normal_force([1, 2, 3], [0, 0, 1.01])


# probability, covariance, state ---------------------------------------------------


def test_probability_examples():
    assert contact_probability(0.0, UNIT, 0) == 0.5
    assert contact_probability(np.log(3.0), UNIT, 1) == pytest.approx(0.75, abs=1e-15)
    assert contact_probability(1e4, UNIT, 2) >= 1 - 1e-12


@given(st.floats(-200, 200), st.floats(-200, 200))
def test_probability_monotone(f1, f2):
    params = ContactModelParams()
    lo, hi = sorted((f1, f2))
    if hi - lo < 1e-3:
        return
    p_lo, p_hi = contact_probability(lo, params, 0), contact_probability(hi, params, 0)
    assert p_lo <= p_hi
    if p_hi < 1 - 1e-9:  # expit rounds to exactly 1.0 above about z = 37
        assert p_lo < p_hi


def test_covariance_examples():
    assert contact_covariance(4.0, 4.0, 1.0) == 0.0
    assert contact_covariance(5.0, 2.0, 2.0) == 18.0


@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_covariance_time_reversal(a, b):
    assert contact_covariance(a, b, 1e-4) == contact_covariance(b, a, 1e-4) >= 0


def test_contact_state_threshold_inclusive():
    assert contact_state(0.5, 0.5)
    assert not contact_state(0.0, 0.5)
    assert contact_state(1.0, 0.5)


@pytest.mark.parametrize(
    "kw", [{"beta1": (0.0, 1.0, 1.0, 1.0)}, {"k": -1.0}, {"theta": 1.0}, {"theta": 0.0}]
)
def test_params_validation(kw):
    with pytest.raises(ConfigError):
        ContactModelParams(**kw)


# streaming estimator ---------------------------------------------------------------


def test_default_parameters_split_at_twelve_newtons():
    p = ContactModelParams()
    assert contact_probability(12.0, p, 0) == pytest.approx(0.5)


def _readings(sensors):
    est = ContactEstimator()
    return [est.step(r.q, r.tau, r.gravity_torque) for r in sensors]


def test_estimator_recovers_simulated_contacts(flat_zero_noise):
    truth, sensors, _ = flat_zero_noise
    for rec in sensors[:2000]:
        r = truth.X[int(round(rec.t * truth.rate)), :3, :3]
        est_normal = ContactEstimator().step(rec.q, rec.tau, rec.gravity_torque, r.T @ [0, 0, 1])
        assert np.allclose([x.normal_force for x in est_normal], rec.normal_force, atol=1e-6)
        assert [x.in_contact for x in est_normal] == list(rec.contact)


def test_estimator_first_tick_has_zero_covariance_and_is_deterministic(flat_zero_noise):
    _, sensors, _ = flat_zero_noise
    a, b = _readings(sensors[:300]), _readings(sensors[:300])
    assert all(r.covariance == 0.0 for r in a[0])
    for ra, rb in zip(a, b):
        for x, y in zip(ra, rb):
            assert np.array_equal(x.force, y.force) and x.covariance == y.covariance
            assert x.in_contact == (x.probability >= 0.5)
