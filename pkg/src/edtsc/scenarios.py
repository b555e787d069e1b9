"""Reference paths and the preview driver.

Two references are supported: a curvature-distance track (integrated into a
planar polyline) and a double-lane-change lane path built from cone-gate
sections joined by cosine blends.  Curvature sign follows the vehicle model:
positive curvature turns toward +y (to the right).
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "TrackError",
    "Track",
    "LanePath",
    "DLCGeometry",
    "DriverParams",
    "DriverMemory",
    "load_track",
    "synthetic_track",
    "dlc_path",
    "driver_step",
]


class TrackError(ValueError):
    """Malformed track or lane-path description."""


@dataclass(frozen=True)
class Track:
    s: np.ndarray
    kappa: np.ndarray
    ds: float = 0.25
    # dense polyline, filled in __post_init__
    ps: np.ndarray = field(default=None, repr=False)
    px: np.ndarray = field(default=None, repr=False)
    py: np.ndarray = field(default=None, repr=False)
    ppsi: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        k = np.asarray(self.kappa, dtype=float)
        if s.ndim != 1 or s.size < 2 or s.size != k.size:
            raise TrackError("a track needs at least two (s, kappa) samples")
        if s[0] != 0.0:
            raise TrackError("arc length must start at 0")
        if np.any(np.diff(s) <= 0):
            raise TrackError("arc length must be strictly increasing")
        if np.any(np.abs(k) >= 0.5):
            raise TrackError("|kappa| must stay below 0.5 1/m")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "kappa", k)
        n = int(math.ceil(s[-1] / self.ds)) + 1
        ps = np.linspace(0.0, s[-1], n)
        kk = np.interp(ps, s, k)
        h = np.diff(ps)
        psi = np.concatenate([[0.0], np.cumsum(0.5 * h * (kk[1:] + kk[:-1]))])
        pm = 0.5 * (psi[1:] + psi[:-1])
        px = np.concatenate([[0.0], np.cumsum(h * np.cos(pm))])
        py = np.concatenate([[0.0], np.cumsum(h * np.sin(pm))])
        object.__setattr__(self, "ps", ps)
        object.__setattr__(self, "px", px)
        object.__setattr__(self, "py", py)
        object.__setattr__(self, "ppsi", psi)

    @property
    def total_length(self) -> float:
        return float(self.s[-1])

    def curvature(self, s: float) -> float:
        return float(np.interp(s, self.s, self.kappa))

    def locate(self, x: float, y: float, s_hint: float, window: float = 15.0) -> float:
        """Arc length of the closest polyline point near ``s_hint``."""
        i0 = max(0, int((s_hint - window) / self.ds))
        i1 = min(self.ps.size, int((s_hint + window) / self.ds) + 2)
        d2 = (self.px[i0:i1] - x) ** 2 + (self.py[i0:i1] - y) ** 2
        return float(self.ps[i0 + int(np.argmin(d2))])

    def point(self, s: float):
        return (float(np.interp(s, self.ps, self.px)),
                float(np.interp(s, self.ps, self.py)),
                float(np.interp(s, self.ps, self.ppsi)))

    def lateral_offset(self, x, y, s_hint):
        """Signed offset of the point from the path (positive: right of path)."""
        s = self.locate(x, y, s_hint)
        px, py, psi = self.point(s)
        return s, -math.sin(psi) * (x - px) + math.cos(psi) * (y - py)


def load_track(source) -> Track:
    """Parse ``s_m,kappa_inv_m`` CSV from a path or text stream.

    ``#`` comment lines and one leading header row are tolerated.
    """
    if isinstance(source, (str, os.PathLike)) and not str(source).count("\n") \
            and os.path.exists(source):
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
    rows = []
    seen_data = False
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise TrackError(f"line {lineno}: expected 2 columns, got {len(parts)}")
        try:
            s, k = float(parts[0]), float(parts[1])
        except ValueError:
            if not seen_data and not rows:
                seen_data = True  # header row
                continue
            raise TrackError(f"line {lineno}: non-numeric field in {line!r}") from None
        if not (math.isfinite(s) and math.isfinite(k)):
            raise TrackError(f"line {lineno}: non-finite value")
        if rows and s <= rows[-1][1]:
            raise TrackError(f"line {lineno}: arc length {s} not increasing")
        rows.append((lineno, s, k))
        seen_data = True
    if len(rows) < 2:
        raise TrackError("track needs at least two samples")
    return Track(np.array([r[1] for r in rows]), np.array([r[2] for r in rows]))


def synthetic_track(segments=None, ramp: float = 5.0) -> Track:
    """Straight / left arc / straight / right arc / straight test segment.

    ``segments`` is a list of ``(length_m, kappa)``; curvature changes ramp
    linearly over ``ramp`` metres so the path has continuous curvature.
    """
    if segments is None:
        segments = [(60.0, 0.0), (60.0, -0.05), (50.0, 0.0), (60.0, 0.04), (70.0, 0.0)]
    s_pts = [0.0]
    k_pts = [segments[0][1]]
    s0 = 0.0
    for i, (length, k) in enumerate(segments):
        if length <= 0:
            raise TrackError("segment lengths must be positive")
        end = s0 + length
        nxt = segments[i + 1][1] if i + 1 < len(segments) else k
        if nxt != k and length > 2 * ramp:
            s_pts += [end - 0.5 * ramp, end + 0.5 * ramp]
            k_pts += [k, nxt]
        s0 = end
    if s_pts[-1] < s0:
        s_pts.append(s0)
        k_pts.append(segments[-1][1])
    return Track(np.array(s_pts), np.array(k_pts))


@dataclass(frozen=True)
class DLCGeometry:
    """Cone-gate layout of the double lane change.

    Section lengths run entry lane, transition, offset lane, transition,
    exit lane.  Lane widths derive from the vehicle width the same way the
    obstacle-avoidance test layout does; ``offset_gap`` is the lateral
    clearance between the entry lane edge and the offset lane edge.
    ``ref_speed_kmh`` > 0 stretches all lengths by ``v/ref`` above that speed.
    """

    section_lengths: tuple = (12.0, 13.5, 11.0, 12.5, 12.0)
    vehicle_width: float = 1.4
    offset_gap: float = 1.0
    approach: float = 40.0
    run_out: float = 30.0
    ref_speed_kmh: float = 30.0

    def lane_widths(self):
        W = self.vehicle_width
        return (1.1 * W + 0.25, W + 1.0, max(1.3 * W + 0.25, 3.0))


@dataclass(frozen=True)
class LanePath:
    """Reference lateral offset ``y_ref(x)`` along a straight run in +x."""

    sections: tuple
    centers: tuple
    widths: tuple
    x_start: float
    run_out: float

    def __post_init__(self):
        if len(self.sections) != 5 or any(L <= 0 for L in self.sections):
            raise TrackError("lane path needs five positive section lengths")
        if not all(math.isfinite(c) for c in self.centers):
            raise TrackError("lane offsets must be finite")

    @property
    def bounds(self):
        edges = [self.x_start]
        for L in self.sections:
            edges.append(edges[-1] + L)
        return edges

    @property
    def total_length(self) -> float:
        return self.bounds[-1] + self.run_out

    def _segment(self, x):
        b = self.bounds
        c0, c1, c2 = self.centers
        if x < b[1]:
            return c0, c0, 0.0, 1.0
        if x < b[2]:
            return c0, c1, x - b[1], b[2] - b[1]
        if x < b[3]:
            return c1, c1, 0.0, 1.0
        if x < b[4]:
            return c1, c2, x - b[3], b[4] - b[3]
        return c2, c2, 0.0, 1.0

    def y_ref(self, x: float) -> float:
        a, b, t, L = self._segment(x)
        return a + (b - a) * 0.5 * (1.0 - math.cos(math.pi * t / L))

    def slope(self, x: float) -> float:
        a, b, t, L = self._segment(x)
        return (b - a) * 0.5 * math.pi / L * math.sin(math.pi * t / L)

    def curvature(self, x: float) -> float:
        a, b, t, L = self._segment(x)
        y2 = (b - a) * 0.5 * (math.pi / L) ** 2 * math.cos(math.pi * t / L)
        y1 = self.slope(x)
        return y2 / (1.0 + y1 * y1) ** 1.5

    def gates(self):
        """``(x0, x1, center, width)`` of the three coned lanes."""
        b = self.bounds
        return ((b[0], b[1], self.centers[0], self.widths[0]),
                (b[2], b[3], self.centers[1], self.widths[1]),
                (b[4], b[5], self.centers[2], self.widths[2]))

    def lateral_offset(self, x, y, s_hint=None):
        return x, y - self.y_ref(x)


def dlc_path(test_speed: float, geometry: DLCGeometry = DLCGeometry()) -> LanePath:
    """Lane path for a run at ``test_speed`` (m/s)."""
    if any(L <= 0 for L in geometry.section_lengths):
        raise TrackError("section lengths must be positive")
    scale = 1.0
    if geometry.ref_speed_kmh > 0:
        scale = max(1.0, test_speed * 3.6 / geometry.ref_speed_kmh)
    secs = tuple(L * scale for L in geometry.section_lengths)
    w1, w3, w5 = geometry.lane_widths()
    offset = 0.5 * w1 + geometry.offset_gap + 0.5 * w3
    # exit lane shares its outer edge with the entry lane
    exit_center = 0.5 * (w5 - w1)
    return LanePath(secs, (0.0, offset, exit_center), (w1, w3, w5),
                    geometry.approach, geometry.run_out)


@dataclass(frozen=True)
class DriverParams:
    preview_dist: float = 4.0
    preview_time: float = 0.4
    steer_gain: float = 1.0
    delta_max: float = 0.45
    # road-wheel steering rate limit (rad/s); 0 disables it
    steer_rate: float = 0.3
    # lane change only: curvature feed-forward lead time (s)
    ff_lead: float = 0.1
    ff_window: float = 0.2
    # lane change only: distance over which the pedal is lifted before the gate
    release_dist: float = 1.0
    mode: str = "track"
    wheelbase: float = 1.53
    # track speed policy
    a_lat_max: float = 8.0
    v_cap: float = 22.0
    a_coast: float = 1.5
    speed_horizon: float = 80.0
    # dlc speed policy (m/s)
    test_speed: float = 0.0
    # throttle PI and pedal slew (1/s)
    kp_throttle: float = 0.15
    ki_throttle: float = 0.05
    pedal_rate: float = 1.0

    def __post_init__(self):
        if self.preview_dist <= 0:
            raise ValueError("preview distance must be positive")
        if self.wheelbase <= 0:
            raise ValueError("wheelbase must be positive")
        if self.mode not in ("track", "dlc"):
            raise ValueError(f"unknown driver mode {self.mode!r}")


@dataclass(frozen=True)
class DriverMemory:
    s: float = 0.0
    integ: float = 0.0
    pedal: float = 0.0
    released: bool = False
    delta: float = 0.0


def _track_speed_target(track: Track, s: float, p: DriverParams) -> float:
    ss = np.linspace(s, min(s + p.speed_horizon, track.total_length), 41)
    kk = np.abs(np.interp(ss, track.s, track.kappa))
    v_corner = np.sqrt(p.a_lat_max / np.maximum(kk, 1e-6))
    v_allow = np.sqrt(v_corner**2 + 2.0 * p.a_coast * (ss - s))
    return float(min(p.v_cap, v_allow.min()))


def driver_step(state, ref, params: DriverParams, dt: float,
                memory: DriverMemory = DriverMemory()):
    """Steering and pedal for one control step.

    Returns ``(delta, T_dem, memory, done)``; ``done`` is set once the
    vehicle passes the end of the reference.
    """
    p = params
    v = max(state.v, 0.0)
    Lp = max(p.preview_dist, p.preview_time * v)
    xp = state.x + Lp * math.cos(state.psi)
    yp = state.y + Lp * math.sin(state.psi)
    if isinstance(ref, Track):
        s_now = ref.locate(state.x, state.y, memory.s)
        s_p, off = ref.lateral_offset(xp, yp, s_now + Lp)
        _, _, psi_p = ref.point(s_p)
        kappa = ref.curvature(s_p)
        err = -off * math.cos(state.psi - psi_p)
        done = s_now >= ref.total_length - 1e-9 or s_p >= ref.total_length
    else:
        s_now = state.x
        _, off = ref.lateral_offset(xp, yp)
        # the lane path is short and tight: feed forward the curvature only a
        # short lead ahead so the car does not cut into the previous gate.
        # The blend's curvature jumps at section ends, so it is averaged over
        # a short window, which keeps the steering continuous in x.
        xc = state.x + p.ff_lead * v
        half = 0.5 * max(p.ff_window * v, 0.1)
        s0, s1 = ref.slope(xc - half), ref.slope(xc + half)
        kappa = (s1 - s0) / (2.0 * half) / (1.0 + (0.5 * (s0 + s1)) ** 2) ** 1.5
        err = -off * math.cos(state.psi)
        done = state.x >= ref.total_length
    L = p.wheelbase
    k_y = p.steer_gain * 2.0 * L / (Lp * Lp)
    delta = math.atan(L * kappa) + k_y * err
    delta = min(max(delta, -p.delta_max), p.delta_max)
    if p.steer_rate > 0.0:
        d_step = p.steer_rate * dt
        delta = min(max(delta, memory.delta - d_step), memory.delta + d_step)

    released = memory.released
    if p.mode == "dlc":
        v_target = p.test_speed
        if isinstance(ref, LanePath) and state.x >= ref.x_start:
            released = True
    else:
        v_target = _track_speed_target(ref, s_now, p)
    if released:
        pedal = 0.0
        integ = memory.integ
    else:
        e = v_target - v
        integ = memory.integ + e * dt
        cmd = p.kp_throttle * e + p.ki_throttle * integ
        if (cmd > 1.0 and e > 0) or (cmd < 0.0 and e < 0):
            integ = memory.integ
            cmd = p.kp_throttle * e + p.ki_throttle * integ
        cmd = min(max(cmd, 0.0), 1.0)
        step = p.pedal_rate * dt
        pedal = min(max(cmd, memory.pedal - step), memory.pedal + step)
        if p.mode == "dlc" and isinstance(ref, LanePath) and p.release_dist > 0.0:
            # lift off over a short distance before the entry gate; tying the
            # ramp to position rather than to the step keeps it grid-free
            pedal = min(pedal, max(0.0, (ref.x_start - state.x) / p.release_dist))
    return delta, pedal, DriverMemory(s_now, integ, pedal, released, delta), done
