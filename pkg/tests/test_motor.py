import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from edtsc.motor import (MotorParams, MotorState, clamp_voltage, combined_inertia,
                         drive_current_rate, load_torque, motor_derivatives)

MP = MotorParams()


def test_combined_inertia_from_table_values():
    assert combined_inertia(1.26e-2, 0.23, 4.0) == pytest.approx(0.026975, rel=1e-12)
    assert MP.J == pytest.approx(0.026975, rel=1e-12)


def test_rest_is_equilibrium():
    assert motor_derivatives(MotorState(0.0, 0.0), 0.0, 0.0, MP) == (0.0, 0.0)


def test_electrical_steady_state():
    V = 7e-3 * 10 + 0.04 * 100
    _, di = motor_derivatives(MotorState(100.0, 10.0), V, 0.0, MP)
    assert di == pytest.approx(0.0, abs=1e-9)


def test_mechanical_rate_by_hand():
    dw, _ = motor_derivatives(MotorState(100.0, 10.0), 0.0, 3.5, MP)
    assert dw == pytest.approx((5.0 - 1.0 - 3.5) / 0.026975, rel=1e-12)
    assert dw == pytest.approx(18.54, abs=0.005)


def test_load_torque_refers_tyre_force_through_gear():
    assert load_torque(10.0, 100.0, 0.23, 4.0, 0.5) == pytest.approx(0.5 + 0.23 * 100 / 4)
    assert load_torque(-10.0, 0.0, 0.23, 4.0, 0.5) == -0.5
    assert load_torque(0.0, 0.0, 0.23, 4.0, 0.5) == 0.0


def test_inverter_bounds():
    assert drive_current_rate(0.0, -5.0, 250.0) == 0.0
    assert drive_current_rate(250.0, 5.0, 250.0) == 0.0
    assert drive_current_rate(100.0, -5.0, 250.0) == -5.0
    assert clamp_voltage(60.0, 48.0) == 48.0
    assert clamp_voltage(-3.0, 48.0) == 0.0
    with pytest.raises(ValueError):
        clamp_voltage(float("nan"), 48.0)


def _rk4(x, h, n, f):
    for _ in range(n):
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        yield x


def _field(params, V=0.0, T_L=0.0):
    return lambda x: np.array(motor_derivatives(MotorState(x[0], x[1]), V, T_L, params))


@given(st.floats(-300, 300), st.floats(-100, 100))
def test_energy_non_increasing_with_matched_constants(w0, i0):
    # with K_t == K_b the electromechanical coupling is lossless, so the
    # kinetic plus magnetic energy can only fall under zero input
    p = MotorParams(K_t=0.5, K_b=0.5)
    E_prev = None
    for x in _rk4(np.array([w0, i0]), 2e-5, 2000, _field(p)):
        E = 0.5 * p.J * x[0] ** 2 + 0.5 * p.L_w * x[1] ** 2
        if E_prev is not None:
            assert E <= E_prev * (1 + 1e-9) + 1e-12
        E_prev = E


@given(st.floats(-300, 300), st.floats(-100, 100))
def test_storage_function_non_increasing_with_table_constants(w0, i0):
    # K_t != K_b here; the weighted energy (K_b/K_t)*J*w^2/2 + L*I^2/2 is the
    # one whose rate is -(K_b/K_t)*K_f*w^2 - R*I^2
    p = MP
    c = p.K_b / p.K_t
    E_prev = None
    for x in _rk4(np.array([w0, i0]), 2e-5, 2000, _field(p)):
        E = 0.5 * c * p.J * x[0] ** 2 + 0.5 * p.L_w * x[1] ** 2
        if E_prev is not None:
            assert E <= E_prev * (1 + 1e-9) + 1e-12
        E_prev = E


def test_plain_energy_can_rise_with_table_constants():
    # documents why the weighted storage function is needed above
    p = MP
    w, i = 1.0, 1.0
    dw, di = motor_derivatives(MotorState(w, i), 0.0, 0.0, p)
    assert p.J * w * dw + p.L_w * i * di > 0.0


@pytest.mark.parametrize("V,T_L", [(4.07, 3.5), (24.0, 0.0), (48.0, 10.0)])
def test_constant_inputs_settle(V, T_L):
    x = np.array([0.0, 0.0])
    f = _field(MP, V, T_L)
    for x in _rk4(x, 1e-4, 40000, f):
        pass
    dw, di = f(x)
    assert abs(dw) < 1e-6 and abs(di) < 1e-6


def test_invalid_params_rejected():
    with pytest.raises(ValueError):
        MotorParams(K_t=0.0)
    with pytest.raises(ValueError):
        MotorParams(F_c=-1.0)
    with pytest.raises(ValueError):
        MotorParams(J=0.001)
