from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Deque, Dict, List, Mapping, Optional, Sequence, Tuple

from .errors import ModelError
from .modes import PmuMode
from .vfmodel import VoltageLimits


class LimitKind(str, Enum):
    TDP = "TDP"
    TDC = "TDC"
    EDC = "EDC"
    VMAX = "Vmax"
    VMIN = "Vmin"


@dataclass(frozen=True)
class Violation:
    limit: LimitKind
    amount: float

    def describe(self) -> str:
        unit = {LimitKind.TDP: "W", LimitKind.TDC: "A", LimitKind.EDC: "A"}.get(self.limit, "V")
        return f"{self.limit.value} exceeded by {self.amount:.4g} {unit}"


@dataclass(frozen=True)
class DesignLimits:
    tdp: float
    tdc: float
    edc: float
    vmax: float
    vmin: float

    def __post_init__(self) -> None:
        if min(self.tdp, self.tdc, self.edc, self.vmax, self.vmin) <= 0:
            raise ModelError("Design limits must all be positive")
        if self.edc < self.tdc:
            raise ModelError(f"EDC ({self.edc} A) must be at least TDC ({self.tdc} A)")
        if self.vmin >= self.vmax:
            raise ModelError("vmin must be below vmax")

    @property
    def voltage(self) -> VoltageLimits:
        return VoltageLimits(vmax=self.vmax, vmin=self.vmin)


@dataclass(frozen=True)
class CorePowerParams:
    """Per-core CMOS power model.

    cdyn_per_level maps virus level id to switched capacitance in farads.
    Leakage current scales as ilkg_ref * (v / v_ref) ** lkg_voltage_exponent.
    """

    cdyn_per_level: Mapping[int, float]
    ilkg_ref: float
    v_ref: float = 1.0
    lkg_voltage_exponent: float = 2.0
    gated_residual_fraction: float = 0.02

    def __post_init__(self) -> None:
        object.__setattr__(self, "cdyn_per_level", dict(sorted(self.cdyn_per_level.items())))
        values = list(self.cdyn_per_level.values())
        if not values or values[0] <= 0:
            raise ModelError("cdyn_per_level needs positive entries")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ModelError("cdyn must be strictly increasing with virus level")
        if self.ilkg_ref < 0:
            raise ModelError("ilkg_ref must be non-negative")
        if self.v_ref <= 0:
            raise ModelError("v_ref must be positive")
        if not 0 <= self.gated_residual_fraction <= 1:
            raise ModelError("gated_residual_fraction must lie in [0, 1]")

    def cdyn(self, level_id: int) -> float:
        try:
            return self.cdyn_per_level[level_id]
        except KeyError:
            raise ModelError(f"No cdyn for virus level {level_id}") from None


@dataclass(frozen=True)
class GraphicsPowerParams:
    cdyn: float
    ilkg_ref: float
    v_ref: float = 1.0
    lkg_voltage_exponent: float = 2.0

    def __post_init__(self) -> None:
        if self.cdyn <= 0 or self.ilkg_ref < 0 or self.v_ref <= 0:
            raise ModelError("Graphics power parameters must be positive")


@dataclass(frozen=True)
class CorePower:
    dynamic: float
    leakage: float

    @property
    def total(self) -> float:
        return self.dynamic + self.leakage


@dataclass(frozen=True)
class PowerBreakdown:
    dynamic: float
    leakage: float
    per_core: Tuple[float, ...]
    graphics: float
    uncore: float
    total: float

    @classmethod
    def compose(cls, cores: Sequence[CorePower], graphics: float = 0.0, uncore: float = 0.0) -> "PowerBreakdown":
        dynamic = sum(c.dynamic for c in cores)
        leakage = sum(c.leakage for c in cores)
        return cls(
            dynamic=dynamic,
            leakage=leakage,
            per_core=tuple(c.total for c in cores),
            graphics=graphics,
            uncore=uncore,
            total=dynamic + leakage + graphics + uncore,
        )

    @property
    def cores(self) -> float:
        return self.dynamic + self.leakage


def leakage_current(v: float, ilkg_ref: float, v_ref: float, exponent: float) -> float:
    return ilkg_ref * (v / v_ref) ** exponent


def core_power(
    f: float,
    v: float,
    level_id: int,
    active_fraction: float,
    gated: bool,
    params: CorePowerParams,
    limits: Optional[VoltageLimits] = None,
) -> CorePower:
    if not 0 <= active_fraction <= 1:
        raise ModelError(f"active_fraction must lie in [0, 1], got {active_fraction}")
    if f < 0 or v < 0:
        raise ModelError("Frequency and voltage must be non-negative")
    if limits is not None and not limits.vmin <= v <= limits.vmax:
        raise ModelError(f"{v:.4f} V is outside [{limits.vmin}, {limits.vmax}] V")

    dynamic = active_fraction * params.cdyn(level_id) * v * v * f
    leakage = leakage_current(v, params.ilkg_ref, params.v_ref, params.lkg_voltage_exponent) * v
    if gated:
        leakage *= params.gated_residual_fraction
    return CorePower(dynamic=dynamic, leakage=leakage)


def idle_leakage_floor(n_idle: int, v: float, mode: PmuMode, params: CorePowerParams) -> float:
    """Leakage of idle cores: full in Bypass (cannot gate), residual otherwise."""
    per_core = leakage_current(v, params.ilkg_ref, params.v_ref, params.lkg_voltage_exponent) * v
    if PmuMode(mode) is PmuMode.NORMAL:
        per_core *= params.gated_residual_fraction
    return n_idle * per_core


def graphics_power(f: float, v: float, load: float, params: GraphicsPowerParams) -> float:
    if load <= 0:
        return 0.0
    leakage = leakage_current(v, params.ilkg_ref, params.v_ref, params.lkg_voltage_exponent) * v
    return load * params.cdyn * v * v * f + leakage


def rail_current(breakdown: PowerBreakdown, v: float) -> float:
    """Core-rail current drawn at setpoint `v`; graphics and uncore sit on other rails."""
    if v <= 0:
        raise ModelError(f"rail voltage must be positive, got {v}")
    return breakdown.cores / v


def check_limits(
    breakdown: PowerBreakdown,
    icc_total: float,
    v: float,
    limits: DesignLimits,
    *,
    icc_sustained: Optional[float] = None,
) -> List[Violation]:
    """Every design limit the interval breaks. TDC uses icc_sustained when given."""
    sustained = icc_total if icc_sustained is None else icc_sustained
    checks = (
        (LimitKind.TDP, breakdown.total - limits.tdp),
        (LimitKind.TDC, sustained - limits.tdc),
        (LimitKind.EDC, icc_total - limits.edc),
        (LimitKind.VMAX, v - limits.vmax),
        (LimitKind.VMIN, limits.vmin - v),
    )
    return [Violation(limit=kind, amount=excess) for kind, excess in checks if excess > 0]


@dataclass
class RollingCurrent:
    """Time-weighted average current over the trailing window."""

    window: float
    _samples: Deque[Tuple[float, float]] = field(default_factory=deque)
    _span: float = 0.0
    _charge: float = 0.0

    def __post_init__(self) -> None:
        if self.window <= 0:
            raise ModelError("TDC window must be positive")

    def push(self, duration: float, current: float) -> float:
        self._samples.append((duration, current))
        self._span += duration
        self._charge += duration * current
        while self._span > self.window and self._samples:
            oldest_d, oldest_i = self._samples[0]
            excess = self._span - self.window
            if oldest_d <= excess:
                self._samples.popleft()
                self._span -= oldest_d
                self._charge -= oldest_d * oldest_i
            else:
                self._samples[0] = (oldest_d - excess, oldest_i)
                self._span -= excess
                self._charge -= excess * oldest_i
        return self.average

    @property
    def average(self) -> float:
        return self._charge / self._span if self._span > 0 else 0.0


def limits_summary(violations: Sequence[Violation]) -> Dict[str, int]:
    counts: Dict[str, int] = {}
    for violation in violations:
        counts[violation.limit.value] = counts.get(violation.limit.value, 0) + 1
    return counts
