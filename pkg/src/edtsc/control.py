"""Yaw PI, one-sided slip PID, differential voltage split and command merge."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .fis import FISOutput
from .plant import VehicleParams

__all__ = [
    "PidState",
    "ControlCommand",
    "differential_split",
    "pid_step",
    "yaw_pi_step",
    "slip_pid_step",
    "compose_commands",
]


@dataclass(frozen=True)
class PidState:
    kp: float
    ki: float
    kd: float = 0.0
    out_lo: float = -math.inf
    out_hi: float = math.inf
    integ: float = 0.0
    prev_err: float | None = None
    anti_windup: bool = True

    def __post_init__(self):
        if not self.out_lo < self.out_hi:
            raise ValueError("out_lo must be below out_hi")


@dataclass(frozen=True)
class ControlCommand:
    v_left: float
    v_right: float


def pid_step(pid: PidState, err: float, dt: float):
    """Discrete PID with conditional-integration anti-windup.

    The integral is advanced first; if the resulting output saturates and the
    error pushes further into saturation, the advance is discarded.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    deriv = 0.0 if pid.prev_err is None else (err - pid.prev_err) / dt
    integ = pid.integ + err * dt
    if pid.ki != 0.0:
        lo, hi = sorted((pid.out_lo / pid.ki, pid.out_hi / pid.ki))
        integ = min(max(integ, lo), hi)
    out = pid.kp * err + pid.ki * integ + pid.kd * deriv
    if pid.anti_windup and ((out > pid.out_hi and err * pid.ki > 0)
                            or (out < pid.out_lo and err * pid.ki < 0)):
        integ = pid.integ
        out = pid.kp * err + pid.ki * integ + pid.kd * deriv
    out = min(max(out, pid.out_lo), pid.out_hi)
    return replace(pid, integ=integ, prev_err=err), out


def yaw_pi_step(pid: PidState, gamma_err: float, dt: float):
    """PI yaw-moment request ``N_z`` on the supplied tracking error.

    Pass desired minus actual yaw rate for a moment that opposes the error.
    """
    return pid_step(pid, gamma_err, dt)


def slip_pid_step(pid: PidState, lambda_hat: float, lambda_ref: float, dt: float,
                  release: str = "freeze"):
    """Non-positive voltage trim that acts only while slip exceeds the reference.

    ``release`` sets what happens once slip falls back under the reference:
    ``"freeze"`` returns zero and keeps the integral untouched, while
    ``"bleed"`` keeps running the PID on the (now positive) error so the
    accumulated cut unwinds gradually; its output is still capped at zero.
    """
    if pid.out_hi > 0.0:
        pid = replace(pid, out_hi=0.0)
    err = lambda_ref - lambda_hat
    if release == "freeze":
        if err >= 0.0:
            return replace(pid, prev_err=None), 0.0
    elif release != "bleed":
        raise ValueError(f"unknown release mode {release!r}")
    pid, out = pid_step(pid, err, dt)
    return pid, min(out, 0.0)


def differential_split(V_cmd: float, delta: float, params: VehicleParams):
    """Scale the command by each rear wheel's turning radius over the centre's.

    ``R_l/R = 1 + (w/2)*tan(delta)/L`` is used directly, which is the exact
    limit at ``delta = 0`` and keeps ``V_l + V_r = 2*V_cmd``.
    """
    if abs(delta) >= 0.5 * math.pi:
        raise ValueError("steering angle out of range")
    k = 0.5 * params.w * math.tan(delta) / params.L
    d = V_cmd * k
    return V_cmd + d, V_cmd - d


def compose_commands(T_dem: float, delta: float, fis_out: FISOutput | None,
                     dV_traction, k_fis: float, V_max: float,
                     params: VehicleParams, V_floor: float = 0.0,
                     mode: str = "multiplicative",
                     V_unit: float | None = None) -> ControlCommand:
    """Merge driver demand, differential split and FIS/traction trims.

    ``mode="additive"`` adds ``k_fis*v_corr*V_unit`` instead of scaling;
    ``V_unit`` defaults to ``V_max``.
    """
    if not 0.0 <= T_dem <= 1.0:
        raise ValueError("torque demand must lie in [0, 1]")
    base = max(T_dem * V_max, V_floor)
    V_l, V_r = differential_split(base, delta, params)
    if fis_out is not None and k_fis != 0.0:
        if mode == "multiplicative":
            V_l *= 1.0 + k_fis * fis_out.v_corr_l
            V_r *= 1.0 + k_fis * fis_out.v_corr_r
        elif mode == "additive":
            unit = V_max if V_unit is None else V_unit
            V_l += k_fis * fis_out.v_corr_l * unit
            V_r += k_fis * fis_out.v_corr_r * unit
        else:
            raise ValueError(f"unknown correction mode {mode!r}")
    V_l += dV_traction[0]
    V_r += dV_traction[1]
    return ControlCommand(min(max(V_l, 0.0), V_max), min(max(V_r, 0.0), V_max))
