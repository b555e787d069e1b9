"""Quick numeric self-checks runnable from an installed package.

These mirror the component properties exercised by the test suite but use
only numpy, so ``edtsc selftest`` works without the test extras.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import control, estimation, fis, observers
from .motor import MotorParams
from .plant import VehicleParams

# numpy 2 renamed trapz
_trapz = getattr(np, "trapezoid", None) or np.trapz

__all__ = ["CheckResult", "run_selftest"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _rls_vs_batch(rng) -> CheckResult:
    p = VehicleParams()
    theta = np.array([2.0e4, 1.8e4])
    est = estimation.StiffnessEstimate(omega_c=1.0e9, Gamma=1.0e8 * np.eye(2),
                                       R_meas=np.eye(2), C_min=1.0, C_max=1.0e7)
    rows, ys = [], []
    for _ in range(200):
        beta, gamma = rng.uniform(-0.05, 0.05), rng.uniform(-0.5, 0.5)
        v, delta = rng.uniform(5, 25), rng.uniform(-0.1, 0.1)
        xf, xr = estimation.regressor(beta, gamma, v, delta, p)
        # a huge cutoff makes the filters pass-through after one sample
        est = estimation.rls_step(est, (xf * theta[0], xr * theta[1]), beta, gamma, v,
                                  delta, p)
        rows.append((xf, xr))
        ys.append((xf * theta[0], xr * theta[1]))
    X = np.array(rows)
    Y = np.array(ys)
    batch = np.array([np.dot(X[:, i], Y[:, i]) / np.dot(X[:, i], X[:, i]) for i in (0, 1)])
    err = float(np.max(np.abs(est.theta_hat - batch) / batch))
    return CheckResult("rls_vs_batch", err <= 1e-6, f"max rel err {err:.2e}")


def _poles(rng) -> CheckResult:
    p = VehicleParams()
    worst = 0.0
    for _ in range(100):
        th = rng.uniform(5e3, 5e4, size=2)
        v = rng.uniform(3.0, 40.0)
        poles = (-rng.uniform(5, 30), -rng.uniform(31, 60))
        A, _, C, _ = estimation.observer_matrices(th, v, p)
        K = estimation.observer_gain(th, v, poles, p)
        bal = p.l_f * th[0] - p.l_r * th[1]
        if abs(bal) < 1e-3 * (p.l_f * th[0] + p.l_r * th[1]):
            continue
        ev = np.sort(np.linalg.eigvals(A - K @ C).real)
        worst = max(worst, float(np.max(np.abs(ev - np.sort(poles)))))
    return CheckResult("pole_placement", worst <= 1e-6, f"max eig err {worst:.2e}")


def _centroid(rng) -> CheckResult:
    sysf = fis.default_system()
    xs = np.linspace(-1.0, 1.0, 10_001)
    worst = 0.0
    for _ in range(200):
        a, b = rng.uniform(0, 1), rng.uniform(-1, 1)
        out = sysf.infer(a, b)
        left, right = sysf.firing(a, b)
        for levels, val in ((left, out.v_corr_l), (right, out.v_corr_r)):
            mu = np.zeros_like(xs)
            for lab, h in levels.items():
                s = sysf.output[lab]
                mu = np.maximum(mu, np.minimum(h, [s(x) for x in xs]))
            ref = float(_trapz(mu * xs, xs) / _trapz(mu, xs))
            worst = max(worst, abs(ref - val))
    return CheckResult("fis_centroid", worst <= 1e-3, f"max err {worst:.2e}")


def _split(rng) -> CheckResult:
    p = VehicleParams()
    worst = 0.0
    for _ in range(10_000):
        V, d = rng.uniform(0, 48), rng.uniform(-0.5, 0.5)
        vl, vr = control.differential_split(V, d, p)
        worst = max(worst, abs(vl + vr - 2 * V) / max(1.0, V))
    vl, vr = control.differential_split(17.0, 0.0, p)
    ok = worst <= 8 * np.finfo(float).eps and vl == vr
    return CheckResult("differential_identity", ok, f"max err {worst:.2e}")


def _dob() -> CheckResult:
    mp = MotorParams()
    plant = observers.NominalPlant.from_motor(mp)
    wc, dt, load = 50.0, 1e-4, 12.0
    obs = observers.DisturbanceObserverState(wc)
    w = 0.0
    i = 10.0
    n = int(round(5.0 / wc / dt))
    t63 = None
    for k in range(1, n + 1):
        w += dt * (mp.K_t * i - mp.K_f * w - load) / mp.J
        obs = observers.disturbance_torque_step(i, w, dt, obs, plant)
        if t63 is None and obs.T_D_hat >= 0.632 * load:
            t63 = k * dt
    ok = abs(obs.T_D_hat - load) <= 0.01 * load and t63 is not None \
        and abs(t63 - 1.0 / wc) <= dt + 1e-12
    return CheckResult("dob_dc", ok, f"final {obs.T_D_hat:.4f}, t63 {t63}")


def run_selftest(seed: int = 0):
    """Run every check; returns the list of :class:`CheckResult`."""
    rng = np.random.default_rng(seed)
    out = []
    for fn in (_rls_vs_batch, _poles, _centroid, _split):
        out.append(fn(rng))
    out.append(_dob())
    return out
