"""DC-equivalent drive motor: electrical and mechanical dynamics.

The permanent-magnet machine is represented by its DC equivalent; the pole
pair count is carried for bookkeeping only.  Whether the torque and back-EMF
constants already absorb the pole count is not known, so nothing is scaled by
it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "MotorParams",
    "MotorState",
    "combined_inertia",
    "motor_derivatives",
    "load_torque",
    "drive_current_rate",
    "clamp_voltage",
]


def combined_inertia(J_m: float, J_w: float, G: float) -> float:
    """Rotor plus wheel inertia referred to the motor shaft."""
    return J_m + J_w / G**2


@dataclass(frozen=True)
class MotorParams:
    J_m: float = 1.26e-2
    K_t: float = 0.5
    K_f: float = 0.01
    K_b: float = 0.04
    R_w: float = 7.0e-3
    L_w: float = 7.6e-5
    F_c: float = 0.5
    J: float = combined_inertia(1.26e-2, 0.23, 4.0)
    pole_pairs: int = 10
    V_max: float = 48.0
    I_max: float = 250.0

    def __post_init__(self):
        if min(self.J_m, self.K_t, self.K_f, self.K_b, self.R_w, self.L_w) <= 0:
            raise ValueError("motor constants must be strictly positive")
        if self.F_c < 0:
            raise ValueError("Coulomb friction must be non-negative")
        if not self.J > self.J_m:
            raise ValueError("combined inertia must exceed rotor inertia")


@dataclass
class MotorState:
    omega_m: float = 0.0
    current: float = 0.0


def motor_derivatives(state: MotorState, V_cmd: float, T_L: float, params: MotorParams):
    """``(domega_m, dcurrent)`` of the motor under command voltage and load."""
    p = params
    I, w = state.current, state.omega_m
    domega = (p.K_t * I - p.K_f * w - T_L) / p.J
    dcurrent = (-p.R_w * I - p.K_b * w + V_cmd) / p.L_w
    return domega, dcurrent


def load_torque(omega_m: float, Fx_wheel: float, r: float, G: float, F_c: float) -> float:
    """Shaft load: Coulomb friction plus tyre reaction referred through the gear."""
    if omega_m > 0.0:
        fc = F_c
    elif omega_m < 0.0:
        fc = -F_c
    else:
        fc = 0.0
    return fc + r * Fx_wheel / G


def drive_current_rate(current: float, dcurrent: float, I_max: float) -> float:
    """Current rate seen through a motoring-only, current-limited inverter.

    The inverter neither regenerates nor exceeds ``I_max``: at either bound
    the rate pushing further out is zeroed.
    """
    if current <= 0.0 and dcurrent < 0.0:
        return 0.0
    if current >= I_max and dcurrent > 0.0:
        return 0.0
    return dcurrent


def clamp_voltage(V: float, V_max: float, floor: float = 0.0) -> float:
    if not math.isfinite(V):
        raise ValueError("non-finite voltage command")
    return min(max(V, floor), V_max)
