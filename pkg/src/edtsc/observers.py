"""Reaction-torque observer and the slip-ratio estimator built on it.

The disturbance observer is realised without differentiating the motor
speed: ``s*J_n*Q(s)*w`` is rewritten as ``J_n*omega_c*(w - Q(s)*w)``.
The slip estimator integrates the slip-ratio state equation from motor
speed and the estimated reaction torque only, so it never needs a vehicle
speed measurement.

Gear convention: the motor spins ``G`` times faster than the wheel, so the
wheel surface speed is ``r*omega_m/G`` and the tyre force behind a reaction
torque ``T_R`` is ``G*T_R/r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .filters import LowPass
from .plant import VehicleParams, drag_force

__all__ = [
    "NominalPlant",
    "DisturbanceObserverState",
    "SlipEstimatorState",
    "disturbance_torque_step",
    "reaction_torque",
    "slip_ratio_step",
    "LAMBDA_MAX",
]

LAMBDA_MAX = 0.999


@dataclass(frozen=True)
class NominalPlant:
    J_n: float
    K_tn: float
    K_fn: float

    def __post_init__(self):
        if min(self.J_n, self.K_tn, self.K_fn) <= 0:
            raise ValueError("nominal plant constants must be positive")

    @classmethod
    def from_motor(cls, motor) -> "NominalPlant":
        return cls(motor.J, motor.K_t, motor.K_f)


@dataclass(frozen=True)
class DisturbanceObserverState:
    omega_c: float = 50.0
    z1: float = 0.0
    z2: float = 0.0
    T_D_hat: float = 0.0
    # previous filter inputs, needed by the ramp-invariant update
    u1_prev: float = 0.0
    u2_prev: float = 0.0

    def __post_init__(self):
        if self.omega_c <= 0:
            raise ValueError("omega_c must be positive")

    @classmethod
    def steady(cls, omega_c: float, current: float, omega_m: float,
               plant: NominalPlant) -> "DisturbanceObserverState":
        """Observer already converged on constant ``(current, omega_m)``."""
        u1 = plant.K_tn * current - plant.K_fn * omega_m
        return cls(omega_c, u1, omega_m, u1, u1, omega_m)


def disturbance_torque_step(I: float, omega_m: float, dt: float,
                            obs: DisturbanceObserverState,
                            plant: NominalPlant) -> DisturbanceObserverState:
    """Advance the Q-filtered disturbance estimate by one sample."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if dt * obs.omega_c >= 2.0:
        raise ValueError("dt*omega_c must stay below 2")
    u1 = plant.K_tn * I - plant.K_fn * omega_m
    q1 = LowPass(obs.omega_c, dt, obs.z1, obs.u1_prev).step(u1)
    q2 = LowPass(obs.omega_c, dt, obs.z2, obs.u2_prev).step(omega_m)
    T_D = q1.y - plant.J_n * obs.omega_c * (omega_m - q2.y)
    return DisturbanceObserverState(obs.omega_c, q1.y, q2.y, T_D, u1, omega_m)


def reaction_torque(T_D_hat: float, F_c: float) -> float:
    return T_D_hat - F_c


@dataclass(frozen=True)
class SlipEstimatorState:
    lambda_hat: float = 0.0
    F_dr_hat: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.lambda_hat):
            raise ValueError("non-finite slip estimate")


def slip_ratio_step(est: SlipEstimatorState, omega_m: float, domega_m: float,
                    T_R_hat: float, dt: float, params: VehicleParams, *,
                    T_R_other: float | None = None, omega_min: float = 1.0,
                    extra_resistance: float = 0.0,
                    dV_offset: float = 0.0,
                    coast_reset: bool = False) -> SlipEstimatorState:
    """One step of the slip-ratio state equation, clamped to [0, 0.999].

    ``domega_m`` is the motor acceleration over the step (a backward
    difference is exact here); the kinematic term is integrated in closed
    form, the force term explicitly.

    ``T_R_other`` is the reaction torque of the other driven wheel; without it
    both driven wheels are assumed to push equally.  ``extra_resistance`` adds
    to the aerodynamic driving resistance, and ``dV_offset`` is the rate of
    the contact point's speed offset from the centre of mass (``-gamma_dot*y``).
    Below ``omega_min`` the estimate is held.  With ``coast_reset`` a
    non-positive reaction torque re-zeroes the estimate, which stops the open
    integration from carrying an old error through coasting phases.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if omega_m <= omega_min:
        return est
    if coast_reset and T_R_hat <= 0.0:
        # no driving force: the tyre is free rolling
        return SlipEstimatorState(0.0, est.F_dr_hat)
    p = params
    lam = est.lambda_hat
    V_w = p.r * omega_m / p.G
    V_hat = V_w * (1.0 - lam)
    F_dr = drag_force(V_hat, p) + extra_resistance
    other = T_R_hat if T_R_other is None else T_R_other
    F_drive = p.G * (T_R_hat + other) / p.r
    dV = (F_drive - F_dr) / p.M + dV_offset
    omega_prev = omega_m - dt * domega_m
    if omega_prev > 0.0:
        # (1 - lam)*omega is proportional to the vehicle speed, so the
        # kinematic term integrates exactly over a linear speed ramp
        z = ((1.0 - lam) * omega_prev + dt * dV * p.G / p.r) / omega_m
        lam_new = 1.0 - z
    else:
        dlam = (1.0 - lam) * domega_m / omega_m - dV / V_w
        lam_new = lam + dt * dlam
    lam_new = min(max(lam_new, 0.0), LAMBDA_MAX)
    return SlipEstimatorState(lam_new, F_dr)
