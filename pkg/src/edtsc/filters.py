"""Discrete first-order low-pass filter and causal filtered differentiator.

Both are discretised ramp-invariantly (exact for inputs that are linear
between samples), so the pole is exactly ``exp(-omega_c*dt)`` and the DC gain
is exactly one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class LowPass:
    """``omega_c/(s + omega_c)`` sampled at ``dt``."""

    omega_c: float
    dt: float
    y: float = 0.0
    u_prev: float = 0.0

    def __post_init__(self):
        if self.omega_c <= 0 or self.dt <= 0:
            raise ValueError("cutoff and step must be positive")

    @property
    def coefficients(self):
        a = math.exp(-self.omega_c * self.dt)
        b_new = 1.0 - (1.0 - a) / (self.omega_c * self.dt)
        b_old = (1.0 - a) - b_new
        return a, b_new, b_old

    def step(self, u: float) -> "LowPass":
        a, b_new, b_old = self.coefficients
        return replace(self, y=a * self.y + b_new * u + b_old * self.u_prev, u_prev=u)

    def settled(self, u: float) -> "LowPass":
        """Filter resting at the steady state of a constant input ``u``."""
        return replace(self, y=u, u_prev=u)


@dataclass(frozen=True)
class Differentiator:
    """Low-pass the signal at ``omega_c`` then take the backward difference."""

    lp: LowPass
    rate: float = 0.0

    @classmethod
    def create(cls, omega_c: float, dt: float, x0: float = 0.0) -> "Differentiator":
        return cls(LowPass(omega_c, dt).settled(x0))

    def step(self, x: float) -> "Differentiator":
        lp = self.lp.step(x)
        return Differentiator(lp, (lp.y - self.lp.y) / lp.dt)

    @property
    def value(self) -> float:
        return self.lp.y
