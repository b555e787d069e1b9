"""Cornering-stiffness RLS, adaptive body-slip observer, yaw-rate reference.

Cornering stiffnesses are per tyre (the lateral model carries a factor 2 for
the two tyres of each axle); lateral forces from :func:`lateral_forces` are
axle totals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .filters import LowPass
from .plant import VehicleParams

__all__ = [
    "StiffnessEstimate",
    "SlipAngleObserverState",
    "YawReference",
    "lateral_forces",
    "regressor",
    "rls_step",
    "observer_matrices",
    "observer_gain",
    "slip_angle_observer_step",
    "stability_factor",
    "desired_yaw_rate",
    "linear_bicycle_rates",
]


def _lowpass_pair(omega_c, dt):
    return (LowPass(omega_c, dt), LowPass(omega_c, dt))


@dataclass(frozen=True)
class StiffnessEstimate:
    theta_hat: np.ndarray = field(default_factory=lambda: np.array([1.0e4, 1.0e4]))
    Gamma: np.ndarray = field(default_factory=lambda: 1.0e6 * np.eye(2))
    R_meas: np.ndarray = field(default_factory=lambda: np.diag([100.0**2, 100.0**2]))
    omega_c: float = 50.0
    dt: float = 0.005
    C_min: float = 1.0e3
    C_max: float = 1.0e5
    xi_filt: tuple = None
    Y_filt: tuple = None

    def __post_init__(self):
        if self.xi_filt is None:
            object.__setattr__(self, "xi_filt", _lowpass_pair(self.omega_c, self.dt))
        if self.Y_filt is None:
            object.__setattr__(self, "Y_filt", _lowpass_pair(self.omega_c, self.dt))


@dataclass(frozen=True)
class SlipAngleObserverState:
    beta_hat: float = 0.0
    gamma_hat: float = 0.0
    poles: tuple = (-15.0, -20.0)
    reset: bool = False

    def __post_init__(self):
        if not all(p < 0 for p in self.poles):
            raise ValueError("observer poles must be strictly negative")


@dataclass(frozen=True)
class YawReference:
    gamma_des: float
    K_stab: float


def lateral_forces(v, dbeta_hat, gamma, dgamma, delta, params: VehicleParams, v_min=1.0):
    """Axle lateral forces ``(Y_f, Y_r)`` from measured yaw motion.

    Returns ``None`` at or below ``v_min`` where the estimate is paused.
    """
    if v <= v_min:
        return None
    p = params
    L = p.L
    ay = v * (dbeta_hat + gamma)
    Y_f = p.M * p.l_r / L * (ay + p.l_f * dgamma) * math.cos(delta)
    Y_r = p.M * p.l_f / L * (ay - p.l_r * dgamma)
    return Y_f, Y_r


def regressor(beta, gamma, v, delta, params: VehicleParams):
    """Unfiltered diagonal entries of the RLS regressor (axle force per C)."""
    return (-2.0 * (beta + params.l_f * gamma / v - delta),
            -2.0 * (beta - params.l_r * gamma / v))


def rls_step(est: StiffnessEstimate, Y, beta, gamma, v, delta,
             params: VehicleParams, v_min: float = 1.0) -> StiffnessEstimate:
    """Filter regressor and forces, then apply one RLS update with projection."""
    if v <= v_min or Y is None:
        return est
    xf, xr = regressor(beta, gamma, v, delta, params)
    fx = (est.xi_filt[0].step(xf), est.xi_filt[1].step(xr))
    fy = (est.Y_filt[0].step(Y[0]), est.Y_filt[1].step(Y[1]))
    xi = np.diag([fx[0].y, fx[1].y])
    Yv = np.array([fy[0].y, fy[1].y])
    theta = est.theta_hat
    Gamma = est.Gamma
    S = est.R_meas + xi @ Gamma @ xi.T
    try:
        K = Gamma @ xi.T @ np.linalg.inv(S)
    except np.linalg.LinAlgError:
        return replace(est, xi_filt=fx, Y_filt=fy)
    theta = theta + K @ (Yv - xi @ theta)
    Gamma = (np.eye(2) - K @ xi) @ Gamma
    Gamma = 0.5 * (Gamma + Gamma.T)
    theta = np.clip(theta, est.C_min, est.C_max)
    return replace(est, theta_hat=theta, Gamma=Gamma, xi_filt=fx, Y_filt=fy)


def observer_matrices(theta, v, params: VehicleParams):
    """State-space ``(A, B, C, D)`` of the linear lateral model at speed ``v``.

    States ``[beta, gamma]``, inputs ``[delta, N_z]``, outputs
    ``[gamma, a_y]``.  The yaw-damping entry uses ``l_f^2 C_f + l_r^2 C_r``.
    """
    C_f, C_r = float(theta[0]), float(theta[1])
    p = params
    M, I, lf, lr = p.M, p.I_z, p.l_f, p.l_r
    a11 = -2.0 * (C_f + C_r) / (M * v)
    a12 = -1.0 - 2.0 * (lf * C_f - lr * C_r) / (M * v * v)
    a21 = -2.0 * (lf * C_f - lr * C_r) / I
    a22 = -2.0 * (lf * lf * C_f + lr * lr * C_r) / (I * v)
    b11 = 2.0 * C_f / (M * v)
    b21 = 2.0 * lf * C_f / I
    A = np.array([[a11, a12], [a21, a22]])
    B = np.array([[b11, 0.0], [b21, 1.0 / I]])
    C = np.array([[0.0, 1.0], [v * a11, v * (a12 + 1.0)]])
    D = np.array([[0.0, 0.0], [v * b11, 0.0]])
    return A, B, C, D


def observer_gain(theta, v, poles, params: VehicleParams, steer_margin: float = 1e-3):
    """Closed-form gain placing the observer error poles at ``poles``.

    The yaw-moment balance ``l_f C_f - l_r C_r`` appears in the denominator
    of ``K22``; near neutral steer it is held there at ``steer_margin`` times
    ``l_f C_f + l_r C_r`` (sign preserved), where the placement becomes
    approximate.
    """
    C_f, C_r = float(theta[0]), float(theta[1])
    if C_f <= 0 or C_r <= 0:
        raise ValueError("cornering stiffnesses must be positive")
    l1, l2 = poles
    p = params
    M, I, lf, lr = p.M, p.I_z, p.l_f, p.l_r
    bal = lf * C_f - lr * C_r
    floor = steer_margin * (lf * C_f + lr * C_r)
    bal_k22 = bal
    if abs(bal) < floor:
        bal_k22 = math.copysign(floor, bal) if bal != 0.0 else floor
    K11 = l1 * l2 * bal * I / (2.0 * C_f * C_r * p.L**2) - 1.0
    K12 = 1.0 / v
    K21 = -(l1 + l2)
    K22 = M * (lf * lf * C_f + lr * lr * C_r) / (I * bal_k22)
    return np.array([[K11, K12], [K21, K22]])


def slip_angle_observer_step(obs: SlipAngleObserverState, y, u, theta_hat, v, dt,
                             params: VehicleParams, v_min: float = 1.0,
                             steer_margin: float = 1e-3) -> SlipAngleObserverState:
    """Explicit Euler step of the adaptive Luenberger observer.

    ``y = (gamma_meas, a_y_meas)``, ``u = (delta, N_z)``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if v <= v_min:
        return replace(obs, beta_hat=0.0, gamma_hat=float(y[0]), reset=False)
    A, B, C, D = observer_matrices(theta_hat, v, params)
    K = observer_gain(theta_hat, v, obs.poles, params, steer_margin)
    x = np.array([obs.beta_hat, obs.gamma_hat])
    uv = np.asarray(u, dtype=float)
    yhat = C @ x + D @ uv
    dx = A @ x + B @ uv + K @ (np.asarray(y, dtype=float) - yhat)
    xn = x + dt * dx
    if not np.all(np.isfinite(xn)):
        return replace(obs, beta_hat=0.0, gamma_hat=float(y[0]), reset=True)
    return replace(obs, beta_hat=float(xn[0]), gamma_hat=float(xn[1]), reset=False)


def stability_factor(theta, params: VehicleParams) -> float:
    C_f, C_r = float(theta[0]), float(theta[1])
    p = params
    return p.M / (2.0 * p.L) * (p.l_r / C_f - p.l_f / C_r)


def desired_yaw_rate(v, delta, theta_hat, params: VehicleParams, eps: float = 0.1):
    """Steady-state cornering yaw rate for the current speed and steer."""
    K = stability_factor(theta_hat, params)
    den = max(params.L + K * v * v, eps)
    return YawReference(v * delta / den, K)


def linear_bicycle_rates(beta, gamma, delta, N_z, v, C_f, C_r, params: VehicleParams):
    """``(dbeta, dgamma, a_y)`` of the linear two-degree-of-freedom model."""
    p = params
    Y_f = -C_f * (beta + p.l_f * gamma / v - delta)
    Y_r = -C_r * (beta - p.l_r * gamma / v)
    dbeta = 2.0 * (Y_f + Y_r) / (p.M * v) - gamma
    N_t = -2.0 * Y_f * p.l_f + 2.0 * Y_r * p.l_r
    dgamma = (N_z - N_t) / p.I_z
    return dbeta, dgamma, v * (dbeta + gamma)
