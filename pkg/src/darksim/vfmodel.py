from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .errors import ModelError

# Tolerance in bins, absorbs float error in f/bin when f sits on a bin edge.
_BIN_EPS = 1e-9


@dataclass(frozen=True)
class VoltageLimits:
    vmax: float
    vmin: float

    def __post_init__(self) -> None:
        if not 0 < self.vmin < self.vmax:
            raise ModelError(f"Voltage limits must satisfy 0 < vmin < vmax (got {self.vmin}, {self.vmax})")


@dataclass(frozen=True)
class VfCurve:
    """Piecewise-linear frequency to nominal-voltage mapping, quantized to `bin` Hz steps."""

    points: Tuple[Tuple[float, float], ...]
    bin: float = 100e6

    def __post_init__(self) -> None:
        points = tuple((float(f), float(v)) for f, v in self.points)
        object.__setattr__(self, "points", points)
        if len(points) < 2:
            raise ModelError("A V/F curve needs at least two knots")
        if self.bin <= 0:
            raise ModelError("Frequency bin must be positive")
        for (f0, v0), (f1, v1) in zip(points, points[1:]):
            if f1 <= f0:
                raise ModelError("V/F knot frequencies must be strictly increasing")
            if v1 < v0:
                raise ModelError("V/F knot voltages must be non-decreasing")
        if points[0][0] <= 0 or points[0][1] <= 0:
            raise ModelError("V/F knots must be positive")

    @property
    def f_min(self) -> float:
        return self.points[0][0]

    @property
    def f_max(self) -> float:
        return self.points[-1][0]

    def shifted(self, dv: float) -> "VfCurve":
        return VfCurve(points=tuple((f, v + dv) for f, v in self.points), bin=self.bin)


@dataclass(frozen=True)
class FmaxResult:
    frequency: float
    degenerate: bool = False


def vnom_at(curve: VfCurve, f: float) -> float:
    f_lo, f_hi = curve.f_min, curve.f_max
    # Bin arithmetic can land a few ulps outside the knots.
    slack = curve.bin * _BIN_EPS
    if f < f_lo - slack or f > f_hi + slack:
        raise ModelError(f"{f / 1e6:.1f} MHz is outside the V/F curve [{f_lo / 1e6:.0f}, {f_hi / 1e6:.0f}] MHz")
    freqs, volts = zip(*curve.points)
    return float(np.interp(f, freqs, volts))


def frequency_bins(curve: VfCurve) -> List[float]:
    """Bin-aligned frequencies inside the curve range, ascending."""
    lo = math.ceil(curve.f_min / curve.bin - _BIN_EPS)
    hi = math.floor(curve.f_max / curve.bin + _BIN_EPS)
    return [k * curve.bin for k in range(lo, hi + 1)]


def quantize_down(f: float, bin: float) -> float:
    if f < 0 or bin <= 0:
        raise ModelError(f"quantize_down needs f >= 0 and bin > 0 (got {f}, {bin})")
    k = math.floor(f / bin)
    if (k + 1) * bin <= f:
        k += 1
    elif k * bin > f:
        k -= 1
    return k * bin


def fmax_under_vmax(curve: VfCurve, vgb: float, limits: VoltageLimits) -> FmaxResult:
    """Highest bin whose nominal voltage plus guardband stays at or under Vmax."""
    bins = frequency_bins(curve)
    for f in reversed(bins):
        if vnom_at(curve, f) + vgb <= limits.vmax:
            return FmaxResult(frequency=f)
    floor = bins[0] if bins else curve.f_min
    return FmaxResult(frequency=floor, degenerate=True)

