"""Closed-loop simulation, trace logging and metrics.

Each control step runs measure -> observers -> estimators -> references ->
FIS -> controller -> actuate, then integrates the plant and both motors over
the step with a fixed-step third-order Runge-Kutta scheme (optionally split
into substeps, voltages held constant).
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import control, estimation, fis, observers
from .config import SimConfig
from .filters import Differentiator
from .motor import MotorState, drive_current_rate, load_torque, motor_derivatives
from .plant import (PlantError, VehicleState, body_derivatives, linear_cornering_stiffness,
                    wheel_forces)
from .scenarios import (DriverMemory, LanePath, Track, dlc_path, driver_step,
                        load_track, synthetic_track)

__all__ = [
    "SimulationError",
    "SimLog",
    "Metrics",
    "COLUMNS",
    "build_fis",
    "build_reference",
    "run_scenario",
    "compute_metrics",
    "lane_violations",
    "write_outputs",
]

COLUMNS = (
    "t", "x", "y", "psi", "v", "u", "gamma", "omega_rl", "omega_rr",
    "omega_m_l", "current_l", "omega_m_r", "current_r",
    "delta", "T_dem",
    "lambda_l", "lambda_r", "lambda_hat_l", "lambda_hat_r",
    "T_R_l", "T_R_r", "T_R_hat_l", "T_R_hat_r",
    "beta", "beta_hat", "gamma_des", "gamma_err",
    "C_f", "C_r", "C_f_hat", "C_r_hat",
    "v_corr_l", "v_corr_r", "N_z", "dV_l", "dV_r", "V_l", "V_r",
    "friction_use", "window",
)


class SimulationError(RuntimeError):
    """Numerical failure during integration; carries the step index."""

    def __init__(self, step: int, msg: str):
        super().__init__(f"step {step}: {msg}")
        self.step = step


@dataclass
class SimLog:
    data: np.ndarray
    columns: tuple = COLUMNS
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.data.shape[0]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    @property
    def dt(self) -> float:
        return float(self.meta.get("dt", np.nan))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns)
            for row in self.data:
                w.writerow([repr(float(x)) for x in row])

    @classmethod
    def from_csv(cls, path) -> "SimLog":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ValueError(f"{path}: empty log")
        cols = tuple(rows[0])
        data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)
        data = data.reshape(-1, len(cols))
        meta = {}
        if data.shape[0] > 1:
            meta["dt"] = float(data[1, 0] - data[0, 0])
        return cls(data, cols, meta)


# ----------------------------------------------------------------- builders

def build_fis(cfg: SimConfig) -> fis.FuzzySystem:
    f = cfg.fis
    rules = None
    if f.rules_left is not None or f.rules_right is not None:
        left = f.rules_left or fis._TABLE_LEFT
        right = f.rules_right or fis._TABLE_RIGHT
        rules = fis.RuleBase.from_rows(left, right)
    return fis.FuzzySystem(
        slip=fis.evenly_spaced("slip", 0.0, 1.0, fis.SLIP_LABELS, f.slip_peaks),
        error=fis.evenly_spaced("yaw_error", -1.0, 1.0, fis.ERROR_LABELS, f.error_peaks),
        output=fis.evenly_spaced("v_corr", -1.0, 1.0, fis.ERROR_LABELS, f.output_peaks),
        rules=rules or fis.default_rules(),
    )


def build_reference(cfg: SimConfig):
    if cfg.sim.scenario == "dlc":
        return dlc_path(cfg.speed, cfg.dlc)
    if cfg.track.csv:
        return load_track(cfg.track.csv)
    return synthetic_track()


# ------------------------------------------------------------------ plant

_N = 10  # x, y, psi, v, u, gamma, omega_m_l, i_l, omega_m_r, i_r


def _unpack(y, G):
    return VehicleState(y[0], y[1], y[2], y[3], y[4], y[5], y[6] / G, y[8] / G)


def _rhs(y, V_l, V_r, delta, acc, cfg: SimConfig):
    """Derivative of the 10-state system plus the tyre forces behind it."""
    vp, mp = cfg.vehicle, cfg.motor
    st = _unpack(y, vp.G)
    forces, kin = wheel_forces(st, delta, vp, cfg.tires, acc[0], acc[1])
    body = body_derivatives(st, delta, forces, vp)
    out = np.empty(_N)
    out[:6] = body
    for j, (V, f) in enumerate(((V_l, forces[2]), (V_r, forces[3]))):
        w, i = y[6 + 2 * j], y[7 + 2 * j]
        TL = load_torque(w, f.Fx, vp.r, vp.G, mp.F_c)
        dw, di = motor_derivatives(MotorState(w, i), V, TL, mp)
        out[6 + 2 * j] = dw
        out[7 + 2 * j] = drive_current_rate(i, di, mp.I_max)
    return out, forces, kin


def _clip_currents(y, I_max):
    y[7] = min(max(y[7], 0.0), I_max)
    y[9] = min(max(y[9], 0.0), I_max)
    return y


_MAX_SUBSTEPS = 64


def _substep_count(y, forces, cfg, dt) -> int:
    """Substeps that keep ``h * rate <= 1`` for the wheel-slip mode.

    Near standstill the driven-wheel slip dynamics are very fast (the slip
    denominator bottoms out at ``v_eps``), so the fixed substep count is
    raised there; at speed the configured count applies.  ``refine``
    multiplies the result, which halves every substep when set to 2.
    """
    vp, mp, tr = cfg.vehicle, cfg.motor, cfg.tires.rear
    Fz = max(forces[2].Fz, forces[3].Fz, 0.0)
    slope = tr.mu * Fz * tr.B_x * tr.C_x
    V_w = max(abs(y[6]), abs(y[8])) * vp.r / vp.G
    den = max(abs(y[3]), V_w, vp.v_eps)
    rate = slope * vp.r * vp.r / (vp.G * vp.G * mp.J * den)
    n = max(cfg.sim.substeps, min(math.ceil(dt * rate), _MAX_SUBSTEPS))
    return n * cfg.sim.refine


def _body_acc(y, dy):
    """Longitudinal and lateral acceleration from the body derivatives."""
    return dy[3] - y[5] * y[4], dy[4] + y[5] * y[3]


def _rk3_step(y, h, V_l, V_r, delta, acc, cfg):
    """Bogacki-Shampine third-order step.

    Load transfer needs the accelerations the forces produce; the first
    stage refreshes them and the later stages reuse that value, so the lag
    shrinks with the substep.  Returns the new state and the accelerations.
    """
    k1, _, _ = _rhs(y, V_l, V_r, delta, acc, cfg)
    acc = _body_acc(y, k1)
    k2, _, _ = _rhs(y + 0.5 * h * k1, V_l, V_r, delta, acc, cfg)
    k3, _, _ = _rhs(y + 0.75 * h * k2, V_l, V_r, delta, acc, cfg)
    y = _clip_currents(y + h / 9.0 * (2.0 * k1 + 3.0 * k2 + 4.0 * k3), cfg.motor.I_max)
    return y, acc


def _cruise_init(cfg: SimConfig, v0: float):
    """Straight-line state at speed ``v0`` with the motors holding it."""
    vp, mp = cfg.vehicle, cfg.motor
    y = np.zeros(_N)
    y[3] = v0
    if v0 <= 0:
        return y
    Fx = 0.5 * 0.5 * vp.rho * vp.CdA * v0 * v0
    # tyre slip that delivers Fx at the static rear load
    Fz = 0.5 * vp.M * vp.g * vp.l_f / vp.L
    tp = cfg.tires.rear
    lam = math.tan(math.asin(Fx / (tp.mu * Fz)) / tp.C_x) / tp.B_x
    w = vp.G * v0 / (vp.r * (1.0 - lam))
    i = (load_torque(w, Fx, vp.r, vp.G, mp.F_c) + mp.K_f * w) / mp.K_t
    y[6] = y[8] = w
    y[7] = y[9] = i
    return y


# ------------------------------------------------------------------ runner

def run_scenario(cfg: SimConfig, reference=None) -> SimLog:
    """Simulate one scenario and return its trace."""
    sim, vp, mp = cfg.sim, cfg.vehicle, cfg.motor
    dt = sim.dt
    n_steps = int(round(sim.duration / dt))
    ref = reference if reference is not None else build_reference(cfg)
    is_dlc = sim.scenario == "dlc"
    fis_on = sim.fis
    est_cfg, ctl, oc = cfg.estimation, cfg.control, cfg.observer

    drv = replace(cfg.driver, wheelbase=vp.L, mode="dlc" if is_dlc else "track",
                  test_speed=cfg.speed if is_dlc else cfg.driver.test_speed)
    v0 = cfg.speed if is_dlc else sim.v0
    y = _cruise_init(cfg, v0)
    if is_dlc:
        y[1] = ref.y_ref(0.0)
    fuzzy = build_fis(cfg)
    plant_n = observers.NominalPlant.from_motor(mp)
    dob = [observers.DisturbanceObserverState.steady(oc.omega_c, y[7 + 2 * j], y[6 + 2 * j],
                                                     plant_n) for j in (0, 1)]
    w_prev = [y[6], y[8]]
    dw_meas = [0.0, 0.0]
    diff_g = Differentiator.create(oc.diff_omega_c, dt, 0.0)
    slip_est = [observers.SlipEstimatorState() for _ in (0, 1)]
    rls = estimation.StiffnessEstimate(
        theta_hat=np.array([est_cfg.C_f0, est_cfg.C_r0]),
        Gamma=est_cfg.Gamma0 * np.eye(2), R_meas=est_cfg.R_meas * np.eye(2),
        omega_c=est_cfg.omega_c, dt=dt, C_min=est_cfg.C_min, C_max=est_cfg.C_max)
    obs = estimation.SlipAngleObserverState(0.0, 0.0, tuple(est_cfg.poles))
    yaw_pid = control.PidState(ctl.yaw_kp, ctl.yaw_ki, 0.0, -ctl.yaw_limit, ctl.yaw_limit)
    slip_pid = [control.PidState(ctl.slip_kp, ctl.slip_ki, ctl.slip_kd, -mp.V_max, 0.0)
                for _ in (0, 1)]
    memory = DriverMemory(pedal=_pedal_for(y, cfg) if v0 > 0 else 0.0,
                          integ=(_pedal_for(y, cfg) / drv.ki_throttle
                                 if v0 > 0 and drv.ki_throttle > 0 else 0.0))
    acc = (0.0, 0.0)
    rows = np.empty((n_steps + 1, len(COLUMNS)))
    completion = math.nan
    # a zero-length run logs nothing
    k_done = n_steps if n_steps > 0 else -1
    half_w = 0.5 * vp.w
    V_unit = cfg.fis.additive_unit or mp.R_w * mp.I_max
    window_start = ref.x_start if is_dlc else -math.inf

    for k in range(k_done + 1):
        t = k * dt
        st = _unpack(y, vp.G)
        # --- measure
        wl, il, wr, ir = y[6], y[7], y[8], y[9]
        delta, T_dem, memory, done = driver_step(st, ref, drv, dt, memory)
        try:
            forces, kin = wheel_forces(st, delta, vp, cfg.tires, acc[0], acc[1])
            body = body_derivatives(st, delta, forces, vp)
        except (PlantError, OverflowError) as exc:
            raise SimulationError(k, str(exc)) from exc
        ay_meas = body[4] + st.gamma * st.v
        gamma = st.gamma
        v_meas = st.v
        # --- observers
        T_R_hat = []
        for j, (w, i) in enumerate(((wl, il), (wr, ir))):
            dob[j] = observers.disturbance_torque_step(i, w, dt, dob[j], plant_n)
            dw_meas[j] = (w - w_prev[j]) / dt
            w_prev[j] = w
            T_R_hat.append(observers.reaction_torque(dob[j].T_D_hat, mp.F_c))
        diff_g = diff_g.step(gamma)
        dgamma_meas = diff_g.rate
        N_z_est = half_w * vp.G / vp.r * (T_R_hat[0] - T_R_hat[1])
        # --- estimators
        # v*(dbeta + gamma) is the measured lateral acceleration; using it
        # directly keeps the observer's own error out of the force estimate
        dbeta_meas = ay_meas / v_meas - gamma if v_meas > est_cfg.v_min else 0.0
        Y = estimation.lateral_forces(v_meas, dbeta_meas, gamma, dgamma_meas, delta, vp,
                                      est_cfg.v_min)
        if Y is not None:
            # share of the yaw acceleration produced by the wheel-torque moment
            Y = (Y[0] - N_z_est / vp.L, Y[1] + N_z_est / vp.L)
        if abs(ay_meas) >= est_cfg.ay_min:
            rls = estimation.rls_step(rls, Y, obs.beta_hat, gamma, v_meas, delta, vp,
                                      est_cfg.v_min)
        obs = estimation.slip_angle_observer_step(
            obs, (gamma, ay_meas), (delta, N_z_est), rls.theta_hat, v_meas, dt, vp,
            est_cfg.v_min, est_cfg.steer_margin)
        extra = 0.0
        if oc.full_resistance:
            # steering-induced drag of the front axle and the yaw-coupling term
            Y_f = (vp.M * vp.l_r * ay_meas + vp.I_z * dgamma_meas - N_z_est) / vp.L
            extra = Y_f * math.tan(delta) - vp.M * gamma * obs.beta_hat * v_meas
        for j, w in enumerate((wl, wr)):
            y_i = -half_w if j == 0 else half_w
            slip_est[j] = observers.slip_ratio_step(
                slip_est[j], w, dw_meas[j], T_R_hat[j], dt, vp,
                T_R_other=T_R_hat[1 - j], omega_min=oc.omega_min,
                extra_resistance=extra,
                dV_offset=(-dgamma_meas * y_i) if oc.full_resistance else 0.0,
                coast_reset=oc.coast_reset)
        lam_hat = (slip_est[0].lambda_hat, slip_est[1].lambda_hat)
        # --- references
        ref_yaw = estimation.desired_yaw_rate(v_meas, delta, rls.theta_hat, vp, est_cfg.eps)
        gamma_des = ref_yaw.gamma_des
        if est_cfg.friction_limit > 0.0 and v_meas > est_cfg.v_min:
            cap = est_cfg.friction_limit * cfg.tires.rear.mu * 9.81 / v_meas
            gamma_des = min(max(gamma_des, -cap), cap)
        gamma_err = gamma - gamma_des
        # --- FIS
        if fis_on:
            f_out = fuzzy.infer(max(lam_hat) / cfg.fis.lambda_norm,
                                gamma_err / cfg.fis.gamma_err_norm)
        else:
            f_out = fis.FISOutput(0.0, 0.0)
        # --- controller
        yaw_pid, N_z = control.yaw_pi_step(yaw_pid, -gamma_err, dt)
        # zero pedal maps to the zero-torque voltage so the trims keep authority
        if ctl.coast_floor == "backemf":
            floor = mp.K_b * 0.5 * (wl + wr)
        elif ctl.coast_floor == "fraction":
            floor = ctl.coast_floor_frac * mp.V_max
        else:
            floor = 0.0
        dV = [0.0, 0.0]
        if fis_on:
            pre = control.compose_commands(T_dem, delta, f_out, (0.0, 0.0), cfg.fis.k_fis,
                                           mp.V_max, vp, floor, cfg.fis.mode, V_unit)
            for j, (w, V_pre) in enumerate(((wl, pre.v_left), (wr, pre.v_right))):
                scale = 1.0
                if ctl.slip_schedule == "backemf":
                    # gains are quoted at full back-EMF; scale to this wheel speed
                    scale = max(mp.K_b * w / mp.V_max, ctl.schedule_floor)
                if V_pre <= 0.0:
                    continue
                # the deepest cut the PID may ask for brings the command to zero
                pid = replace(slip_pid[j], out_lo=-V_pre / scale)
                pid, out = control.slip_pid_step(pid, lam_hat[j], ctl.lambda_ref, dt,
                                                 release=ctl.slip_release)
                slip_pid[j] = pid
                dV[j] = out * scale
        cmd = control.compose_commands(T_dem, delta, f_out if fis_on else None, dV,
                                       cfg.fis.k_fis, mp.V_max, vp, floor, cfg.fis.mode, V_unit)
        # --- log
        C_f_true = linear_cornering_stiffness(0.5 * (forces[0].Fz + forces[1].Fz),
                                              cfg.tires.front)
        C_r_true = linear_cornering_stiffness(0.5 * (forces[2].Fz + forces[3].Fz),
                                              cfg.tires.rear)
        use = max(math.hypot(f.Fx, f.Fy) / (cfg.tires.front.mu if i < 2 else
                                            cfg.tires.rear.mu) / f.Fz
                  if f.Fz > 0 else 0.0 for i, f in enumerate(forces))
        rows[k] = (
            t, st.x, st.y, st.psi, st.v, st.u, st.gamma, st.omega_rl, st.omega_rr,
            wl, il, wr, ir, delta, T_dem,
            kin.lam[2], kin.lam[3], lam_hat[0], lam_hat[1],
            vp.r * forces[2].Fx / vp.G, vp.r * forces[3].Fx / vp.G, T_R_hat[0], T_R_hat[1],
            st.beta, obs.beta_hat, gamma_des, gamma_err,
            C_f_true, C_r_true, rls.theta_hat[0], rls.theta_hat[1],
            f_out.v_corr_l, f_out.v_corr_r, N_z, dV[0], dV[1], cmd.v_left, cmd.v_right,
            use, 1.0 if st.x >= window_start else 0.0,
        )
        if not np.all(np.isfinite(rows[k])):
            raise SimulationError(k, "non-finite value in state or signals")
        if done:
            completion = t
            k_done = k
            break
        if k == n_steps:
            break
        # --- actuate
        acc = (body[3] - st.gamma * st.u, ay_meas)
        try:
            n_sub = _substep_count(y, forces, cfg, dt)
            for _ in range(n_sub):
                y, acc = _rk3_step(y, dt / n_sub, cmd.v_left, cmd.v_right, delta, acc, cfg)
        except (ValueError, OverflowError) as exc:
            raise SimulationError(k, str(exc)) from exc
        if not np.all(np.isfinite(y)):
            raise SimulationError(k, "non-finite state")
    data = rows[: k_done + 1]
    meta = {
        "dt": dt, "scenario": sim.scenario, "fis": fis_on,
        "speed_kmh": sim.speed_kmh, "completion_time": completion,
        "completed": math.isfinite(completion),
    }
    if is_dlc:
        meta["lane_violations"] = lane_violations(data, ref, cfg.dlc.vehicle_width)
    return SimLog(data, COLUMNS, meta)


def _pedal_for(y, cfg: SimConfig) -> float:
    mp = cfg.motor
    V = mp.R_w * y[7] + mp.K_b * y[6]
    return min(max(V / mp.V_max, 0.0), 1.0)


def lane_violations(data, ref: LanePath, vehicle_width: float) -> int:
    """Samples where the body centre leaves a coned lane (width allowance kept)."""
    if data.shape[0] == 0:
        return 0
    xs = data[:, COLUMNS.index("x")]
    ys = data[:, COLUMNS.index("y")]
    bad = 0
    for x0, x1, c, width in ref.gates():
        m = (xs >= x0) & (xs <= x1)
        bad += int(np.sum(np.abs(ys[m] - c) > 0.5 * (width - vehicle_width)))
    return bad


# ------------------------------------------------------------------ metrics

@dataclass(frozen=True)
class Metrics:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def to_text(self) -> str:
        lines = []
        for k, v in self.values.items():
            if isinstance(v, float):
                lines.append(f"{k}={v:.10g}")
            else:
                lines.append(f"{k}={v}")
        return "\n".join(lines) + "\n"


def _rms(x):
    return float(np.sqrt(np.mean(np.square(x)))) if len(x) else math.nan


def _peak(x):
    return float(np.max(np.abs(x))) if len(x) else math.nan


def _pearson(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2:
        return None
    da, db = a - a.mean(), b - b.mean()
    sa, sb = np.sqrt(np.sum(da * da)), np.sqrt(np.sum(db * db))
    # spread at round-off level counts as constant
    tol = 1e-12 * np.sqrt(a.size)
    if sa <= tol * max(1.0, np.max(np.abs(a))) or sb <= tol * max(1.0, np.max(np.abs(b))):
        return None
    return float(np.clip(np.sum(da * db) / (sa * sb), -1.0, 1.0))


def reduction(m_a: float, m_b: float) -> float:
    """Percentage by which ``m_a`` improves on the baseline ``m_b``."""
    return 100.0 * (m_b - m_a) / m_b


def _single(log: SimLog, v_min: float = 1.0) -> dict:
    win = log["window"] > 0.5 if "window" in log.columns else np.ones(len(log), bool)
    # slip is only defined once the vehicle rolls; below v_min the plant's
    # regularised slip and the textbook ratio part ways
    moving = win & (log["v"] >= v_min)
    lam = np.concatenate([log["lambda_l"][moving], log["lambda_r"][moving]])
    lam_hat = np.concatenate([log["lambda_hat_l"][moving], log["lambda_hat_r"][moving]])
    ge = log["gamma_err"][win]
    tr = np.concatenate([log["T_R_l"][win], log["T_R_r"][win]])
    tr_hat = np.concatenate([log["T_R_hat_l"][win], log["T_R_hat_r"][win]])
    pos = tr > 0
    out = {
        "samples": int(np.sum(win)),
        "rms_lambda": _rms(lam),
        "peak_lambda": _peak(lam),
        "rms_gamma_err": _rms(ge),
        "peak_gamma_err": _peak(ge),
    }
    c = _pearson(lam_hat, lam)
    if c is not None:
        out["corr_lambda"] = c
    c = _pearson(tr_hat[pos], tr[pos])
    if c is not None:
        out["corr_T_R"] = c
    ct = log.meta.get("completion_time", math.nan)
    if ct is not None and math.isfinite(ct):
        out["completion_time"] = float(ct)
    return out


def _check_grid(a: SimLog, b: SimLog):
    ta, tb = a["t"], b["t"]
    if len(ta) == 0 or len(tb) == 0:
        raise ValueError("cannot compare empty logs")
    da = np.diff(ta)
    db = np.diff(tb)
    step_a = da[0] if da.size else a.dt
    step_b = db[0] if db.size else b.dt
    if not math.isclose(step_a, step_b, rel_tol=1e-9) or ta[0] != tb[0]:
        raise ValueError("logs are not on the same time grid")
    for d, s in ((da, step_a), (db, step_b)):
        if d.size and np.max(np.abs(d - s)) > 1e-9 * max(1.0, s):
            raise ValueError("non-uniform time grid")


def compute_metrics(log_a: SimLog, log_b: SimLog | None = None) -> Metrics:
    """Summary statistics of ``log_a``; with a baseline ``log_b`` also the
    percentage reductions ``100*(m_b - m_a)/m_b``.

    Samples outside the scoring window (``window`` column) are ignored; for
    the lane change the window opens at the entry gate.
    """
    vals = _single(log_a)
    if log_b is not None:
        _check_grid(log_a, log_b)
        base = _single(log_b)
        for key in ("rms_lambda", "peak_lambda", "rms_gamma_err", "peak_gamma_err"):
            vals[f"baseline_{key}"] = base[key]
            vals[f"{key}_reduction"] = (reduction(vals[key], base[key])
                                        if base[key] > 0 else math.nan)
        if "completion_time" in base:
            vals["baseline_completion_time"] = base["completion_time"]
    return Metrics(vals)


def write_outputs(log: SimLog, out_dir, metrics: Metrics | None = None) -> None:
    os.makedirs(out_dir, exist_ok=True)
    log.to_csv(os.path.join(out_dir, "states.csv"))
    m = metrics or compute_metrics(log)
    extra = {k: v for k, v in log.meta.items() if k not in m.values}
    text = m.to_text() + "".join(f"{k}={v}\n" for k, v in extra.items())
    with open(os.path.join(out_dir, "metrics.txt"), "w", encoding="utf-8") as fh:
        fh.write(text)
