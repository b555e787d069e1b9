"""Twin-track planar vehicle model with simplified magic-formula tyres.

Axis convention follows the controller literature this package implements:
``v`` is the *longitudinal* and ``u`` the *lateral* body velocity.  The body
frame is x forward, y to the right, z down, so positive yaw rate, positive
steering and positive curvature all turn the car to the right.  Left wheels
sit at ``y = -w/2``; a left-biased drive torque therefore yaws the car in the
positive direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

__all__ = [
    "VehicleParams",
    "TireParams",
    "AxleTires",
    "VehicleState",
    "TireForce",
    "WheelKinematics",
    "PlantError",
    "tire_force",
    "normal_loads",
    "drag_force",
    "wheel_kinematics",
    "wheel_forces",
    "body_derivatives",
    "vehicle_derivatives",
    "slip_ratio",
    "linear_cornering_stiffness",
]

# wheel order used throughout: front-left, front-right, rear-left, rear-right
WHEELS = ("fl", "fr", "rl", "rr")


class PlantError(ValueError):
    """Raised when the plant is evaluated outside its physical domain."""


@dataclass(frozen=True)
class VehicleParams:
    M: float = 260.0
    I_z: float = 60.0
    l_f: float = 0.83
    l_r: float = 0.7
    w: float = 1.2
    J_w: float = 0.23
    r: float = 0.23
    G: float = 4.0
    h_cg: float = 0.30
    CdA: float = 1.0
    rho: float = 1.225
    g: float = 9.81
    # speed below which slip quantities are regularised (standstill)
    v_eps: float = 1.0

    def __post_init__(self):
        if self.M <= 0 or self.I_z <= 0:
            raise PlantError("mass and yaw inertia must be positive")
        if self.l_f <= 0 or self.l_r <= 0 or self.w <= 0 or self.r <= 0:
            raise PlantError("geometry must be positive")
        if self.G < 1 or self.h_cg < 0 or self.v_eps <= 0:
            raise PlantError("gear ratio must be >= 1, h_cg >= 0, v_eps > 0")

    @property
    def L(self) -> float:
        return self.l_f + self.l_r

    def wheel_positions(self):
        """Body-frame (x, y) of each wheel contact patch, in WHEELS order."""
        h = 0.5 * self.w
        return ((self.l_f, -h), (self.l_f, h), (-self.l_r, -h), (-self.l_r, h))


@dataclass(frozen=True)
class TireParams:
    mu: float = 1.4
    B_x: float = 12.0
    C_x: float = 1.6
    B_y: float = 10.0
    C_y: float = 1.5

    def __post_init__(self):
        if min(self.mu, self.B_x, self.C_x, self.B_y, self.C_y) <= 0:
            raise PlantError("tyre coefficients must be positive")


@dataclass(frozen=True)
class AxleTires:
    front: TireParams = TireParams()
    rear: TireParams = TireParams(B_y=12.0)


@dataclass
class VehicleState:
    x: float = 0.0
    y: float = 0.0
    psi: float = 0.0
    v: float = 0.0
    u: float = 0.0
    gamma: float = 0.0
    omega_rl: float = 0.0
    omega_rr: float = 0.0

    @property
    def beta(self) -> float:
        return math.atan2(self.u, self.v) if (self.u or self.v) else 0.0

    def as_tuple(self):
        return tuple(getattr(self, f.name) for f in fields(self))

    @classmethod
    def from_sequence(cls, seq):
        return cls(*(float(s) for s in seq))


@dataclass(frozen=True)
class TireForce:
    Fx: float
    Fy: float
    Fz: float


@dataclass(frozen=True)
class WheelKinematics:
    """Per-wheel slip quantities, wheel-frame contact velocity included."""

    lam: tuple
    alpha: tuple
    vx: tuple


def tire_force(lam: float, alpha: float, Fz: float, params: TireParams):
    """Combined-slip tyre force ``(Fx, Fy)`` in the wheel frame.

    Pure-slip magic-formula forces are scaled radially onto the friction
    circle of radius ``mu*Fz`` whenever their resultant exceeds it.
    """
    if Fz < 0.0:
        raise PlantError(f"negative normal load {Fz!r}")
    if not (math.isfinite(lam) and math.isfinite(alpha)):
        raise PlantError("non-finite slip input")
    cap = params.mu * Fz
    fx = cap * math.sin(params.C_x * math.atan(params.B_x * lam))
    fy = cap * math.sin(params.C_y * math.atan(params.B_y * alpha))
    mag = math.hypot(fx, fy)
    if mag > cap and mag > 0.0:
        s = cap / mag
        fx *= s
        fy *= s
    return fx, fy


def normal_loads(state: VehicleState | None, ax: float, ay: float, params: VehicleParams):
    """Quasi-static wheel loads ``(fl, fr, rl, rr)``, each floored at zero.

    ``ay`` positive (towards +y, i.e. a right-hand turn) loads the left side.
    """
    p = params
    L = p.L
    mg = p.M * p.g
    front = 0.5 * mg * p.l_r / L
    rear = 0.5 * mg * p.l_f / L
    dlong = p.M * ax * p.h_cg / (2.0 * L)
    dlat = p.M * ay * p.h_cg / (2.0 * p.w)
    loads = (
        front - dlong + dlat,
        front - dlong - dlat,
        rear + dlong + dlat,
        rear + dlong - dlat,
    )
    return tuple(max(0.0, f) for f in loads)


def drag_force(v: float, params: VehicleParams) -> float:
    return 0.5 * params.rho * params.CdA * v * abs(v)


def slip_ratio(V_w: float, V: float, v_eps: float) -> float:
    """Driving slip ``(V_w - V)/V_w`` with a standstill-safe denominator."""
    den = max(abs(V_w), abs(V), v_eps)
    return (V_w - V) / den


def linear_cornering_stiffness(Fz: float, tire: TireParams) -> float:
    """Small-angle slope of the lateral magic formula, N/rad per tyre."""
    return tire.mu * Fz * tire.B_y * tire.C_y


def wheel_kinematics(v, u, gamma, omega_rl, omega_rr, delta, params: VehicleParams):
    """Slip ratios, slip angles and contact-point longitudinal speeds.

    Front wheels are free rolling, so their slip ratio is zero.
    """
    eps = params.v_eps
    lams = []
    alphas = []
    vxs = []
    for i, (xi, yi) in enumerate(params.wheel_positions()):
        vx = v - gamma * yi
        vy = u + gamma * xi
        if i < 2:
            c, s = math.cos(delta), math.sin(delta)
            vxw = vx * c + vy * s
            vyw = -vx * s + vy * c
            alpha = -math.atan(vyw / max(abs(vxw), eps))
            lam = 0.0
        else:
            vxw, vyw = vx, vy
            alpha = -math.atan(vyw / max(abs(vxw), eps))
            omega = omega_rl if i == 2 else omega_rr
            lam = slip_ratio(params.r * omega, vxw, eps)
        lams.append(lam)
        alphas.append(alpha)
        vxs.append(vxw)
    return WheelKinematics(tuple(lams), tuple(alphas), tuple(vxs))


def wheel_forces(state: VehicleState, delta: float, params: VehicleParams,
                 tires: AxleTires, ax: float = 0.0, ay: float = 0.0):
    """Wheel-frame tyre forces for all four wheels (WHEELS order)."""
    kin = wheel_kinematics(state.v, state.u, state.gamma, state.omega_rl,
                           state.omega_rr, delta, params)
    loads = normal_loads(state, ax, ay, params)
    out = []
    for i in range(4):
        tp = tires.front if i < 2 else tires.rear
        fx, fy = tire_force(kin.lam[i], kin.alpha[i], loads[i], tp)
        out.append(TireForce(fx, fy, loads[i]))
    return tuple(out), kin


def body_derivatives(state: VehicleState, delta: float, forces, params: VehicleParams):
    """Rigid-body rates ``(dx, dy, dpsi, dv, du, dgamma)`` from tyre forces."""
    p = params
    c, s = math.cos(delta), math.sin(delta)
    fx_sum = 0.0
    fy_sum = 0.0
    mz = 0.0
    for i, ((xi, yi), f) in enumerate(zip(p.wheel_positions(), forces)):
        if i < 2:
            fxb = f.Fx * c - f.Fy * s
            fyb = f.Fx * s + f.Fy * c
        else:
            fxb, fyb = f.Fx, f.Fy
        fx_sum += fxb
        fy_sum += fyb
        mz += xi * fyb - yi * fxb
    v, u, gamma, psi = state.v, state.u, state.gamma, state.psi
    dv = (fx_sum - drag_force(v, p)) / p.M + gamma * u
    du = fy_sum / p.M - gamma * v
    dgamma = mz / p.I_z
    cp, sp = math.cos(psi), math.sin(psi)
    return (v * cp - u * sp, v * sp + u * cp, gamma, dv, du, dgamma)


def vehicle_derivatives(state: VehicleState, delta: float, T_rl: float, T_rr: float,
                        params: VehicleParams, tires: AxleTires,
                        ax: float = 0.0, ay: float = 0.0) -> VehicleState:
    """Time derivative of the full vehicle state under rear wheel torques.

    ``ax``/``ay`` are the body accelerations used for load transfer; the
    caller supplies them (typically lagged by one step) to break the
    algebraic loop.
    """
    if abs(delta) >= 0.5 * math.pi:
        raise PlantError("steering angle out of range")
    forces, _ = wheel_forces(state, delta, params, tires, ax, ay)
    body = body_derivatives(state, delta, forces, params)
    dw_rl = (T_rl - params.r * forces[2].Fx) / params.J_w
    dw_rr = (T_rr - params.r * forces[3].Fx) / params.J_w
    out = body + (dw_rl, dw_rr)
    if not all(math.isfinite(d) for d in out):
        raise PlantError("non-finite state derivative")
    return VehicleState(*out)
