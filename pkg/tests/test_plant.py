import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from edtsc.estimation import linear_bicycle_rates
from edtsc.plant import (AxleTires, PlantError, TireParams, VehicleParams, VehicleState,
                         linear_cornering_stiffness, normal_loads, slip_ratio, tire_force,
                         vehicle_derivatives, wheel_kinematics)

P = VehicleParams()
TIRES = AxleTires()
FRONT = TireParams(mu=1.4, B_x=12.0, C_x=1.6, B_y=10.0, C_y=1.5)


def test_zero_slip_gives_zero_force():
    assert tire_force(0.0, 0.0, 700.0, FRONT) == (0.0, 0.0)


def test_small_angle_matches_linear_slope():
    _, fy = tire_force(0.0, 0.01, 700.0, FRONT)
    # slope of the magic formula at the origin is mu*Fz*B*C
    assert fy == pytest.approx(1.4 * 700 * 10 * 1.5 * 0.01, rel=0.02)
    # the same slope, by central difference on the formula itself
    h = 1e-7
    slope = (tire_force(0.0, h, 700.0, FRONT)[1] - tire_force(0.0, -h, 700.0, FRONT)[1]) / (2 * h)
    assert slope == pytest.approx(linear_cornering_stiffness(700.0, FRONT), rel=1e-6)


def test_combined_slip_is_clamped_to_friction_circle():
    fx, fy = tire_force(0.5, 0.3, 700.0, FRONT)
    assert math.hypot(fx, fy) <= 980.0 * (1 + 1e-12)


def test_negative_load_is_rejected():
    with pytest.raises(PlantError):
        tire_force(0.1, 0.0, -1.0, FRONT)


@given(st.floats(-5, 5), st.floats(-1.5, 1.5), st.floats(0, 5000))
def test_friction_bound_holds_everywhere(lam, alpha, Fz):
    fx, fy = tire_force(lam, alpha, Fz, FRONT)
    assert math.hypot(fx, fy) <= FRONT.mu * Fz * (1 + 1e-9) + 1e-12


def test_static_axle_split():
    fl, fr, rl, rr = normal_loads(None, 0.0, 0.0, P)
    assert fl + fr == pytest.approx(260 * 9.81 * 0.7 / 1.53, abs=0.05)
    assert fl + fr == pytest.approx(1167.0, abs=0.1)
    assert rl + rr == pytest.approx(1383.6, abs=0.1)
    assert fl == fr and rl == rr


@given(st.floats(-6, 6), st.floats(-6, 6))
def test_normal_loads_balance(ax, ay):
    loads = normal_loads(None, ax, ay, P)
    assert all(f >= 0 for f in loads)
    if min(loads) > 0:
        assert sum(loads) == pytest.approx(P.M * P.g, rel=1e-9)


def test_acceleration_loads_rear_axle():
    _, _, rl0, rr0 = normal_loads(None, 0.0, 0.0, P)
    _, _, rl, rr = normal_loads(None, 5.0, 0.0, P)
    assert rl + rr > rl0 + rr0


def test_extreme_lateral_acceleration_floors_at_zero():
    loads = normal_loads(None, 0.0, 100.0, P)
    assert min(loads) == 0.0


def test_slip_ratio_definition():
    assert slip_ratio(20.0, 18.0, 1.0) == pytest.approx(0.1)
    assert slip_ratio(0.0, 0.0, 1.0) == 0.0


def _rolling(v, u=0.0, gamma=0.0):
    """State with both rear wheels free rolling at their contact-point speed."""
    (_, yl), (_, yr) = P.wheel_positions()[2:]
    return VehicleState(0.0, 0.0, 0.0, v, u, gamma, (v - gamma * yl) / P.r,
                        (v - gamma * yr) / P.r)


def test_straight_coasting_is_symmetric():
    p = VehicleParams(CdA=1e-12)
    d = vehicle_derivatives(_rolling(15.0), 0.0, 0.0, 0.0, p, TIRES)
    assert d.u == pytest.approx(0.0, abs=1e-12)
    assert d.gamma == pytest.approx(0.0, abs=1e-12)


def _per_tire_stiffness():
    fl, _, rl, _ = normal_loads(None, 0.0, 0.0, P)
    return (linear_cornering_stiffness(fl, TIRES.front),
            linear_cornering_stiffness(rl, TIRES.rear))


def test_small_angle_rates_match_bicycle_model():
    v, u, gamma, delta = 15.0, 0.05, 0.08, 0.015
    st_ = _rolling(v, u, gamma)
    d = vehicle_derivatives(st_, delta, 0.0, 0.0, P, TIRES)
    C_f, C_r = _per_tire_stiffness()
    dbeta, dgamma, _ = linear_bicycle_rates(u / v, gamma, delta, 0.0, v, C_f, C_r, P)
    assert d.gamma == pytest.approx(dgamma, rel=0.05)
    assert d.u == pytest.approx(v * dbeta, rel=0.05)


def _simulate(T_l, T_r, delta, v0, t_end, h=1e-3):
    """RK4 on the bare plant with constant inputs."""
    x = np.array(_rolling(v0).as_tuple())

    def f(x):
        s = VehicleState.from_sequence(x)
        return np.array(vehicle_derivatives(s, delta, T_l, T_r, P, TIRES).as_tuple())

    for _ in range(int(round(t_end / h))):
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return VehicleState.from_sequence(x)


def test_left_biased_drive_yaws_positive():
    s = _simulate(30.0, 10.0, 0.0, 10.0, 0.05)
    assert s.gamma > 0.0


def test_steady_state_yaw_matches_linear_gain():
    v, delta = 10.0, math.radians(1.5)
    # hold speed: rear torque balances drag
    T = 0.5 * P.r * 0.5 * P.rho * P.CdA * v * v
    s = _simulate(T, T, delta, v, 4.0)
    C_f, C_r = _per_tire_stiffness()
    K = P.M / (2 * P.L) * (P.l_r / C_f - P.l_f / C_r)
    gamma_ss = s.v * delta / (P.L + K * s.v ** 2)
    assert s.gamma == pytest.approx(gamma_ss, rel=0.05)
    kin = wheel_kinematics(s.v, s.u, s.gamma, s.omega_rl, s.omega_rr, delta, P)
    assert max(abs(x) for x in kin.lam) <= 0.01


def test_steering_out_of_range_rejected():
    with pytest.raises(PlantError):
        vehicle_derivatives(_rolling(5.0), 2.0, 0.0, 0.0, P, TIRES)


def test_invalid_params_rejected():
    with pytest.raises(PlantError):
        VehicleParams(M=-1.0)
    with pytest.raises(PlantError):
        VehicleParams(G=0.5)
    with pytest.raises(ValueError):
        TireParams(mu=0.0)
