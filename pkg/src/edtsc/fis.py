"""Mamdani fuzzy inference for left/right voltage correction factors.

Inputs are the normalised slip ratio (``[0, 1]``) and the normalised yaw-rate
error (``[-1, 1]``); each output is defuzzified by the exact centroid of the
min-clipped, max-aggregated consequent sets.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

__all__ = [
    "FuzzySet",
    "FuzzyVariable",
    "RuleBase",
    "FISOutput",
    "FuzzySystem",
    "FISError",
    "evenly_spaced",
    "clipped_centroid",
    "default_rules",
    "default_system",
    "SLIP_LABELS",
    "ERROR_LABELS",
]

SLIP_LABELS = ("VS", "S", "M", "L", "VL")
ERROR_LABELS = ("NL", "NS", "Z", "PS", "PL")

# rows: slip set, columns: yaw-rate error NL..PL.  The ambiguous bare "N" in
# the S row is read as NS.
_TABLE_LEFT = {
    "VS": ("PL", "PL", "Z", "NL", "NL"),
    "S": ("PL", "PS", "NS", "NS", "NL"),
    "M": ("PS", "Z", "NS", "NL", "NL"),
    "L": ("PS", "Z", "NL", "NS", "NL"),
    "VL": ("Z", "Z", "NL", "NL", "NL"),
}
_TABLE_RIGHT = {
    "VS": ("NL", "NL", "Z", "PL", "PL"),
    "S": ("NL", "NS", "NS", "PS", "PL"),
    "M": ("NL", "NL", "NS", "Z", "PS"),
    "L": ("NL", "NS", "NL", "Z", "PS"),
    "VL": ("NL", "NL", "NS", "Z", "Z"),
}


class FISError(RuntimeError):
    pass


@dataclass(frozen=True)
class FuzzySet:
    """Triangle with optional flat shoulder beyond the peak on either side."""

    label: str
    peak: float
    left: float
    right: float
    left_shoulder: bool = False
    right_shoulder: bool = False

    def __call__(self, x: float) -> float:
        if x < self.peak:
            if self.left_shoulder:
                return 1.0
            if x <= self.left:
                return 0.0
            return (x - self.left) / (self.peak - self.left)
        if x > self.peak:
            if self.right_shoulder:
                return 1.0
            if x >= self.right:
                return 0.0
            return (self.right - x) / (self.right - self.peak)
        return 1.0

    def edges(self):
        """Sloped pieces as ``(slope, intercept)`` lines."""
        out = []
        if not self.left_shoulder:
            k = 1.0 / (self.peak - self.left)
            out.append((k, -k * self.left))
        if not self.right_shoulder:
            k = -1.0 / (self.right - self.peak)
            out.append((k, -k * self.right))
        return out


@dataclass(frozen=True)
class FuzzyVariable:
    name: str
    lo: float
    hi: float
    sets: tuple

    def __post_init__(self):
        peaks = [s.peak for s in self.sets]
        if any(b <= a for a, b in zip(peaks, peaks[1:])):
            raise ValueError(f"{self.name}: peaks must be strictly increasing")
        if not self.lo < self.hi:
            raise ValueError(f"{self.name}: empty universe")

    @property
    def labels(self):
        return tuple(s.label for s in self.sets)

    def clamp(self, x: float) -> float:
        return min(max(x, self.lo), self.hi)

    def fuzzify(self, x: float) -> dict:
        x = self.clamp(x)
        return {s.label: s(x) for s in self.sets}

    def __getitem__(self, label):
        for s in self.sets:
            if s.label == label:
                return s
        raise KeyError(label)


def evenly_spaced(name, lo, hi, labels, peaks=None) -> FuzzyVariable:
    """Triangles peaked at ``peaks`` (even grid by default), feet on neighbours."""
    n = len(labels)
    if peaks is None:
        step = (hi - lo) / (n - 1)
        peaks = [lo + i * step for i in range(n)]
    sets = []
    for i, lab in enumerate(labels):
        left = peaks[i - 1] if i > 0 else lo - 1.0
        right = peaks[i + 1] if i < n - 1 else hi + 1.0
        sets.append(FuzzySet(lab, float(peaks[i]), float(left), float(right),
                             left_shoulder=(i == 0), right_shoulder=(i == n - 1)))
    return FuzzyVariable(name, float(lo), float(hi), tuple(sets))


def clipped_centroid(var: FuzzyVariable, levels: dict) -> float:
    """Exact centroid of ``max_j min(levels[j], set_j(x))`` over the universe.

    The aggregate is piecewise linear; every kink is a foot, a peak, a point
    where an edge meets a clip level, or a crossing of two edges, so the
    integrals are exact on the sorted candidate grid.
    """
    active = [(var[lab], h) for lab, h in levels.items() if h > 0.0]
    if not active:
        raise FISError(f"{var.name}: no rule fired")
    lo, hi = var.lo, var.hi
    xs = {lo, hi}
    edges = []
    for s, h in active:
        xs.update((s.left, s.peak, s.right))
        for k, b in s.edges():
            edges.append((k, b))
    for k, b in edges:
        for _, h in active:
            xs.add((h - b) / k)
    for (k1, b1), (k2, b2) in itertools.combinations(edges, 2):
        if k1 != k2:
            xs.add((b2 - b1) / (k1 - k2))
    grid = sorted(x for x in xs if lo <= x <= hi)

    def mu(x):
        return max(min(h, s(x)) for s, h in active)

    area = 0.0
    moment = 0.0
    xa = grid[0]
    ya = mu(xa)
    for xb in grid[1:]:
        yb = mu(xb)
        dx = xb - xa
        if dx > 0.0:
            area += 0.5 * dx * (ya + yb)
            moment += dx / 6.0 * (xa * (2.0 * ya + yb) + xb * (ya + 2.0 * yb))
        xa, ya = xb, yb
    if area <= 0.0:
        raise FISError(f"{var.name}: aggregated shape has zero area")
    return moment / area


@dataclass(frozen=True)
class RuleBase:
    """``(slip label, error label) -> output label`` for each motor."""

    left: dict
    right: dict

    def validate(self, slip_labels, err_labels, out_labels):
        for table in (self.left, self.right):
            for key in itertools.product(slip_labels, err_labels):
                if key not in table:
                    raise ValueError(f"rule base missing cell {key}")
                if table[key] not in out_labels:
                    raise ValueError(f"unknown output label {table[key]!r}")

    @classmethod
    def from_rows(cls, left_rows: dict, right_rows: dict, err_labels=ERROR_LABELS):
        def expand(rows):
            return {(s, e): lab for s, row in rows.items()
                    for e, lab in zip(err_labels, row)}
        return cls(expand(left_rows), expand(right_rows))


def default_rules() -> RuleBase:
    return RuleBase.from_rows(_TABLE_LEFT, _TABLE_RIGHT)


@dataclass(frozen=True)
class FISOutput:
    v_corr_l: float
    v_corr_r: float


@dataclass(frozen=True)
class FuzzySystem:
    slip: FuzzyVariable
    error: FuzzyVariable
    output: FuzzyVariable
    rules: RuleBase = field(default_factory=default_rules)

    def __post_init__(self):
        self.rules.validate(self.slip.labels, self.error.labels, self.output.labels)

    def firing(self, lambda_norm: float, gamma_err_norm: float):
        """Per-output clip level of each consequent set (min AND, max OR)."""
        ms = self.slip.fuzzify(lambda_norm)
        me = self.error.fuzzify(gamma_err_norm)
        left = {}
        right = {}
        # row-major order; max aggregation makes it irrelevant, but fixed anyway
        for s in self.slip.labels:
            if ms[s] <= 0.0:
                continue
            for e in self.error.labels:
                w = min(ms[s], me[e])
                if w <= 0.0:
                    continue
                lo = self.rules.left[(s, e)]
                ro = self.rules.right[(s, e)]
                if w > left.get(lo, 0.0):
                    left[lo] = w
                if w > right.get(ro, 0.0):
                    right[ro] = w
        return left, right

    def infer(self, lambda_norm: float, gamma_err_norm: float) -> FISOutput:
        left, right = self.firing(lambda_norm, gamma_err_norm)
        return FISOutput(clipped_centroid(self.output, left),
                         clipped_centroid(self.output, right))


def default_system(rules: RuleBase | None = None) -> FuzzySystem:
    return FuzzySystem(
        slip=evenly_spaced("slip", 0.0, 1.0, SLIP_LABELS),
        error=evenly_spaced("yaw_error", -1.0, 1.0, ERROR_LABELS),
        output=evenly_spaced("v_corr", -1.0, 1.0, ERROR_LABELS),
        rules=rules or default_rules(),
    )
