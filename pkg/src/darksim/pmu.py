from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from .cstates import CoreCState
from .errors import ModelError
from .guardband import GuardbandModel, guardband_voltage, package_level, vr_setpoint
from .modes import PmuMode, Segment
from .power import (
    CorePower,
    CorePowerParams,
    DesignLimits,
    GraphicsPowerParams,
    PowerBreakdown,
    core_power,
    graphics_power,
    idle_leakage_floor,
    rail_current,
)
from .trace import CoreActivity, TraceInterval
from .vfmodel import VfCurve, fmax_under_vmax, frequency_bins, quantize_down, vnom_at

logger = logging.getLogger(__name__)

# Fuse value each segment ships with.
_PRODUCTIZED_FUSE = {Segment.DESKTOP: 1, Segment.MOBILE: 0}


@dataclass(frozen=True)
class Demand:
    cpu_intensity: float
    gfx_intensity: float

    def __post_init__(self) -> None:
        for name in ("cpu_intensity", "gfx_intensity"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise ModelError(f"{name} must lie in [0, 1], got {value}")

    @property
    def graphics_dominant(self) -> bool:
        return self.gfx_intensity > self.cpu_intensity

    @classmethod
    def of(cls, cores: Sequence[CoreActivity], graphics_load: float) -> "Demand":
        active = [c.active_fraction for c in cores if c.active]
        cpu = sum(active) / len(active) if active else 0.0
        return cls(cpu_intensity=cpu, gfx_intensity=graphics_load)


def classify_demand(interval: TraceInterval) -> Demand:
    return Demand.of(interval.cores, interval.graphics_load)


@dataclass(frozen=True)
class BudgetSplit:
    cores_budget: float
    graphics_budget: float
    uncore_reserve: float
    degenerate: bool = False

    @property
    def total(self) -> float:
        return self.cores_budget + self.graphics_budget + self.uncore_reserve


@dataclass(frozen=True)
class PbmPolicy:
    """Package budget manager knobs.

    cpu_share_under_graphics is the slice of the compute budget the cores keep while graphics
    dominates; graphics_full_load_w scales the graphics floor for CPU-dominant intervals.
    """

    uncore_reserve: float = 2.0
    cpu_share_under_graphics: float = 0.15
    graphics_full_load_w: float = 0.0

    def __post_init__(self) -> None:
        if self.uncore_reserve < 0 or self.graphics_full_load_w < 0:
            raise ModelError("PBM reserves must be non-negative")
        if not 0.10 <= self.cpu_share_under_graphics <= 0.20:
            raise ModelError("cpu_share_under_graphics must lie in [0.10, 0.20]")


@dataclass(frozen=True)
class GraphicsDomain:
    curve: VfCurve
    params: GraphicsPowerParams

    @property
    def full_load_power(self) -> float:
        f = self.curve.f_max
        return graphics_power(f, vnom_at(self.curve, f), 1.0, self.params)


@dataclass(frozen=True)
class CorePoint:
    frequency: float
    voltage: float
    c_state: CoreCState


@dataclass(frozen=True)
class OperatingPoint:
    cores: Tuple[CorePoint, ...]
    graphics_frequency: float
    graphics_voltage: float
    level_id: int
    core_power: Tuple[CorePower, ...]
    graphics_power: float
    degenerate: bool = False

    @property
    def frequency(self) -> float:
        return self.cores[0].frequency

    @property
    def voltage(self) -> float:
        return self.cores[0].voltage

    @property
    def cores_power(self) -> float:
        return sum(c.total for c in self.core_power)


def resolve_mode(fuse: int, segment: Segment) -> PmuMode:
    if fuse not in (0, 1):
        raise ModelError(f"Fuse must be 0 or 1, got {fuse}")
    mode = PmuMode.BYPASS if fuse == 1 else PmuMode.NORMAL
    segment = Segment(segment)
    if _PRODUCTIZED_FUSE[segment] != fuse:
        logger.warning("%s part fused for %s mode; shipping parts pair desktop with bypass and mobile with normal",
                       segment.value, mode.value)
    return mode


def pbm_allocate(
    tdp: float,
    demand: Demand,
    mode: PmuMode,
    leakage_floor: float,
    policy: PbmPolicy,
) -> BudgetSplit:
    """Split the package budget between the cores and graphics after the uncore reserve."""
    if tdp <= 0:
        raise ModelError("TDP must be positive")
    degenerate = leakage_floor >= tdp
    compute = max(tdp - policy.uncore_reserve, 0.0)
    reserve = tdp - compute

    if demand.graphics_dominant:
        cores = policy.cpu_share_under_graphics * compute
        if PmuMode(mode) is PmuMode.BYPASS:
            # Ungated idle cores leak on the cores' side of the budget.
            cores += leakage_floor
        cores = min(cores, compute)
        graphics = compute - cores
    else:
        graphics = min(demand.gfx_intensity * policy.graphics_full_load_w, compute)
        cores = compute - graphics

    if degenerate:
        logger.debug("Leakage floor %.2f W swallows the %.1f W TDP", leakage_floor, tdp)
    return BudgetSplit(cores_budget=cores, graphics_budget=graphics, uncore_reserve=reserve, degenerate=degenerate)


def _cores_at(
    f: float,
    v: float,
    cores: Sequence[CoreActivity],
    mode: PmuMode,
    params: CorePowerParams,
) -> Tuple[CorePower, ...]:
    gate_idle = PmuMode(mode) is PmuMode.NORMAL
    return tuple(
        core_power(f, v, c.virus_level, c.active_fraction, gate_idle and not c.active, params)
        for c in cores
    )


def _select_graphics(
    budget: float,
    load: float,
    graphics: Optional[GraphicsDomain],
) -> Tuple[float, float, float, bool]:
    if graphics is None or load <= 0:
        return 0.0, 0.0, 0.0, False
    bins = frequency_bins(graphics.curve)
    for f in reversed(bins):
        v = vnom_at(graphics.curve, f)
        p = graphics_power(f, v, load, graphics.params)
        if p <= budget:
            return f, v, p, False
    f = bins[0]
    v = vnom_at(graphics.curve, f)
    return f, v, graphics_power(f, v, load, graphics.params), True


def dvfs_select(
    budget: BudgetSplit,
    curve: VfCurve,
    gb_model: GuardbandModel,
    limits: DesignLimits,
    activity: Sequence[CoreActivity],
    mode: PmuMode,
    *,
    z_peak: float,
    params: CorePowerParams,
    graphics_load: float = 0.0,
    graphics: Optional[GraphicsDomain] = None,
) -> OperatingPoint:
    """Pick the shared core frequency and the graphics frequency for one interval.

    The core rail takes the highest bin that respects Vmax, the level's turbo limit, the
    cores budget, and the EDC/TDC current limits. While graphics dominates, the cores sit at
    the lowest curve point.
    """
    active = [c for c in activity if c.active]
    level = package_level(gb_model, len(active), (c.virus_level for c in active))
    vgb = guardband_voltage(level, gb_model, z_peak)
    demand = Demand.of(activity, graphics_load)

    if demand.graphics_dominant:
        candidates: List[float] = [curve.f_min]
        vmax_degenerate = False
    else:
        fmax = fmax_under_vmax(curve, vgb, limits.voltage)
        vmax_degenerate = fmax.degenerate
        top = fmax.frequency
        if level.max_freq is not None:
            top = min(top, quantize_down(level.max_freq, curve.bin))
        candidates = [f for f in reversed(frequency_bins(curve)) if f <= top] or [curve.f_min]

    chosen = None
    for f in candidates:
        v = vr_setpoint(vnom_at(curve, f), level, gb_model, z_peak)
        powers = _cores_at(f, v, activity, mode, params)
        watts = sum(p.total for p in powers)
        current = rail_current(PowerBreakdown.compose(powers), v)
        if watts <= budget.cores_budget and current <= limits.edc and current <= limits.tdc:
            chosen = (f, v, powers)
            break

    degenerate = vmax_degenerate or budget.degenerate
    if chosen is None:
        degenerate = True
        f = candidates[-1]
        v = vr_setpoint(vnom_at(curve, f), level, gb_model, z_peak)
        chosen = (f, v, _cores_at(f, v, activity, mode, params))

    f, v, powers = chosen
    g_f, g_v, g_p, g_degenerate = _select_graphics(budget.graphics_budget, graphics_load, graphics)
    points = tuple(
        CorePoint(frequency=f, voltage=v, c_state=CoreCState.CC0 if c.active else CoreCState.CC6) for c in activity
    )
    return OperatingPoint(
        cores=points,
        graphics_frequency=g_f,
        graphics_voltage=g_v,
        level_id=level.level_id,
        core_power=powers,
        graphics_power=g_p,
        degenerate=degenerate or g_degenerate,
    )


def idle_leakage_at_floor(
    curve: VfCurve,
    gb_model: GuardbandModel,
    activity: Sequence[CoreActivity],
    mode: PmuMode,
    *,
    z_peak: float,
    params: CorePowerParams,
) -> float:
    """Leakage the idle cores draw with the rail at the lowest curve point."""
    active = [c for c in activity if c.active]
    level = package_level(gb_model, len(active), (c.virus_level for c in active))
    v = vr_setpoint(vnom_at(curve, curve.f_min), level, gb_model, z_peak)
    return idle_leakage_floor(len(activity) - len(active), v, mode, params)
