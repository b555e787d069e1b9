import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from edtsc import estimation as E
from edtsc.plant import VehicleParams

P = VehicleParams()


def test_lateral_forces_by_hand():
    Y_f, Y_r = E.lateral_forces(10.0, 0.0, 0.5, 0.0, 0.0, P)
    assert Y_f == pytest.approx(260 * 0.7 / 1.53 * 5, abs=0.05)
    assert Y_f == pytest.approx(594.8, abs=0.05)
    assert Y_r == pytest.approx(705.2, abs=0.05)


def test_lateral_forces_zero_rates():
    assert E.lateral_forces(10.0, 0.0, 0.0, 0.0, 0.0, P) == (0.0, 0.0)


def test_lateral_forces_cosine_on_front_only():
    a = E.lateral_forces(10.0, 0.1, 0.5, 0.3, 0.0, P)
    b = E.lateral_forces(10.0, 0.1, 0.5, 0.3, math.pi / 3, P)
    assert b[0] == pytest.approx(0.5 * a[0])
    assert b[1] == a[1]


def test_lateral_forces_paused_at_low_speed():
    assert E.lateral_forces(0.5, 0.0, 0.5, 0.0, 0.0, P) is None


def _stream(rng, n, theta):
    for _ in range(n):
        beta, gamma = rng.uniform(-0.05, 0.05), rng.uniform(-0.5, 0.5)
        v, delta = rng.uniform(5, 25), rng.uniform(-0.1, 0.1)
        xf, xr = E.regressor(beta, gamma, v, delta, P)
        yield (xf * theta[0], xr * theta[1]), beta, gamma, v, delta


def test_rls_converges_on_noise_free_stream():
    rng = np.random.default_rng(1)
    theta = np.array([20000.0, 18000.0])
    # large initial covariance: the prior should not bias the result
    est = E.StiffnessEstimate(Gamma=1e10 * np.eye(2))
    for Y, beta, gamma, v, delta in _stream(rng, 200, theta):
        est = E.rls_step(est, Y, beta, gamma, v, delta, P)
    assert np.all(np.abs(est.theta_hat / theta - 1) < 1e-3)


def test_rls_matches_batch_least_squares():
    # R = sigma^2 I and a huge initial covariance make RLS the batch solution
    rng = np.random.default_rng(2)
    theta = np.array([20000.0, 18000.0])
    est = E.StiffnessEstimate(Gamma=1e12 * np.eye(2), R_meas=np.eye(2))
    xs, ys = [], []
    for Y, beta, gamma, v, delta in _stream(rng, 200, theta):
        est = E.rls_step(est, Y, beta, gamma, v, delta, P)
        xs.append((est.xi_filt[0].y, est.xi_filt[1].y))
        ys.append((est.Y_filt[0].y, est.Y_filt[1].y))
    X, Yv = np.array(xs), np.array(ys)
    batch = np.array([np.linalg.lstsq(X[:, [i]], Yv[:, i], rcond=None)[0][0] for i in (0, 1)])
    assert np.max(np.abs(est.theta_hat - batch) / batch) <= 1e-6


def test_zero_regressor_leaves_estimate_unchanged():
    est = E.StiffnessEstimate()
    nxt = E.rls_step(est, (0.0, 0.0), 0.0, 0.0, 10.0, 0.0, P)
    np.testing.assert_array_equal(nxt.theta_hat, est.theta_hat)
    np.testing.assert_array_equal(nxt.Gamma, est.Gamma)


@given(st.floats(-0.1, 0.1), st.floats(-1, 1), st.floats(3, 40), st.floats(-0.2, 0.2),
       st.floats(-2000, 2000), st.floats(-2000, 2000))
def test_covariance_is_psd_nonincreasing(beta, gamma, v, delta, yf, yr):
    est = E.StiffnessEstimate(Gamma=np.array([[2e5, 3e4], [3e4, 1e5]]))
    nxt = E.rls_step(est, (yf, yr), beta, gamma, v, delta, P)
    diff = est.Gamma - nxt.Gamma
    assert np.min(np.linalg.eigvalsh(0.5 * (diff + diff.T))) >= -1e-6 * np.max(est.Gamma)
    assert np.min(np.linalg.eigvalsh(nxt.Gamma)) > 0


def test_projection_bounds():
    est = E.StiffnessEstimate(theta_hat=np.array([5e3, 5e3]))
    for _ in range(50):
        est = E.rls_step(est, (-1e6, -1e6), 0.05, 0.3, 10.0, 0.05, P)
    assert np.all(est.theta_hat >= est.C_min) and np.all(est.theta_hat <= est.C_max)


def test_gain_entries_by_hand():
    K = E.observer_gain((2e4, 1.8e4), 10.0, (-10.0, -10.0), P)
    assert K[1, 0] == 20.0
    assert K[0, 1] == pytest.approx(0.1)


def test_gain_neutral_geometry():
    p = VehicleParams(l_f=0.75, l_r=0.75)
    K = E.observer_gain((2e4, 2e4), 10.0, (-15.0, -20.0), p)
    assert K[0, 0] == -1.0


valid_theta = st.tuples(st.floats(5e3, 5e4), st.floats(5e3, 5e4))


@given(valid_theta, st.floats(3, 40), st.floats(-30, -5), st.floats(-60, -31))
def test_pole_placement(theta, v, l1, l2):
    bal = P.l_f * theta[0] - P.l_r * theta[1]
    if abs(bal) < 1e-3 * (P.l_f * theta[0] + P.l_r * theta[1]):
        return  # neutral steer: gain floor makes placement approximate
    A, _, C, _ = E.observer_matrices(theta, v, P)
    K = E.observer_gain(theta, v, (l1, l2), P)
    ev = np.sort(np.linalg.eigvals(A - K @ C).real)
    np.testing.assert_allclose(ev, sorted((l1, l2)), atol=1e-6)
    assert np.max(np.abs(np.linalg.eigvals(A - K @ C).imag)) <= 1e-6


def _euler_plant(x, delta, v, C, dt):
    db, dg, ay = E.linear_bicycle_rates(x[0], x[1], delta, 0.0, v, *C, P)
    return np.array([x[0] + dt * db, x[1] + dt * dg]), ay


@pytest.mark.parametrize("e0", [(0.05, 0.0), (0.0, 0.2), (0.05, 0.2), (-0.03, 0.1)])
def test_observer_error_decays_at_pole_rate(e0):
    # A - K C is far from normal (eigenvector condition number ~ 3e3), so
    # the decay bound is stated in modal coordinates, where each component
    # shrinks at least as fast as exp(max(poles)*t)
    C = (2e4, 1.8e4)
    v, dt = 15.0, 0.001
    A, _, Cm, _ = E.observer_matrices(C, v, P)
    K = E.observer_gain(C, v, (-15.0, -20.0), P)
    _, V = np.linalg.eig(A - K @ Cm)
    Vinv = np.linalg.inv(V)
    obs = E.SlipAngleObserverState(e0[0], e0[1], (-15.0, -20.0))
    x = np.array([0.0, 0.0])
    m0 = np.linalg.norm(Vinv @ np.array(e0))
    for k in range(1, 1001):
        delta = 0.02 * math.sin(2 * k * dt)
        _, _, ay = E.linear_bicycle_rates(x[0], x[1], delta, 0.0, v, *C, P)
        obs = E.slip_angle_observer_step(obs, (x[1], ay), (delta, 0.0), C, v, dt, P)
        x, _ = _euler_plant(x, delta, v, C, dt)
        e = np.array([obs.beta_hat - x[0], obs.gamma_hat - x[1]])
        assert np.linalg.norm(Vinv @ e) <= 2.0 * m0 * math.exp(-15.0 * k * dt) + 1e-12
    assert np.linalg.norm(e) < 1e-3 * np.linalg.norm(e0)


def test_zero_innovation_is_pure_model_step():
    C = (2e4, 1.8e4)
    v, dt, delta = 12.0, 0.005, 0.03
    x = np.array([0.01, 0.15])
    _, _, ay = E.linear_bicycle_rates(x[0], x[1], delta, 0.0, v, *C, P)
    obs = E.slip_angle_observer_step(E.SlipAngleObserverState(*x), (x[1], ay), (delta, 0.0),
                                     C, v, dt, P)
    nxt, _ = _euler_plant(x, delta, v, C, dt)
    assert obs.beta_hat == pytest.approx(nxt[0], abs=1e-12)
    assert obs.gamma_hat == pytest.approx(nxt[1], abs=1e-12)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_observer_resets_on_non_finite_update():
    obs = E.SlipAngleObserverState(1e308, 1e308)
    out = E.slip_angle_observer_step(obs, (0.3, 0.0), (0.0, 0.0), (2e4, 2e4), 10.0, 0.005, P)
    assert out.reset and out.beta_hat == 0.0 and out.gamma_hat == 0.3


def test_observer_poles_must_be_negative():
    with pytest.raises(ValueError):
        E.SlipAngleObserverState(poles=(-1.0, 0.0))


def test_desired_yaw_rate_examples():
    theta = (2e4, 2e4)
    assert E.desired_yaw_rate(10.0, 0.0, theta, P).gamma_des == 0.0
    r = E.desired_yaw_rate(10.0, 0.1, theta, P)
    assert r.K_stab == pytest.approx(-5.523e-4, rel=1e-3)
    assert r.gamma_des == pytest.approx(10 * 0.1 / (1.53 - 0.05523), rel=1e-3)
    assert r.gamma_des == pytest.approx(0.678, abs=5e-4)
    assert E.desired_yaw_rate(20.0, 0.1, theta, P).gamma_des == pytest.approx(1.528, abs=5e-4)


def test_desired_yaw_rate_denominator_guard():
    r = E.desired_yaw_rate(60.0, 0.1, (2e4, 2e4), P, eps=0.1)
    assert r.gamma_des == pytest.approx(60 * 0.1 / 0.1)


@pytest.mark.parametrize("v", [5.0, 10.0, 20.0])
def test_stability_factor_sign_convention(v):
    delta = 0.05
    over = E.desired_yaw_rate(v, delta, (3e4, 1e4), P)   # weak rear: oversteer
    under = E.desired_yaw_rate(v, delta, (1e4, 3e4), P)  # weak front: understeer
    assert over.K_stab < 0 < under.K_stab
    assert over.gamma_des / delta > v / P.L > under.gamma_des / delta


def test_cornering_stiffness_converges_on_linear_plant():
    C = np.array([2.0e4, 1.8e4])
    v, dt = 15.0, 0.005
    est = E.StiffnessEstimate()
    x = np.array([0.0, 0.0])
    for k in range(int(2.0 / dt)):
        delta = 0.03 * min(k * dt / 0.2, 1.0)
        db, dg, _ = E.linear_bicycle_rates(x[0], x[1], delta, 0.0, v, *C, P)
        Y = E.lateral_forces(v, db, x[1], dg, delta, P)
        est = E.rls_step(est, Y, x[0], x[1], v, delta, P)
        x = x + dt * np.array([db, dg])
    assert np.all(np.abs(est.theta_hat / C - 1) <= 0.05)
