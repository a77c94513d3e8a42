from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

from .errors import ModelError, VmaxExceeded
from .modes import PmuMode

logger = logging.getLogger(__name__)

# (tdp watts, adder volts) at the two ends of the supported TDP range.
RELIABILITY_ANCHORS: Tuple[Tuple[float, float], Tuple[float, float]] = ((35.0, 0.020), (91.0, 0.005))


@dataclass(frozen=True)
class LoadLine:
    r_ll: float

    def __post_init__(self) -> None:
        if not self.r_ll > 0:
            raise ModelError(f"Load-line resistance must be positive, got {self.r_ll}")


@dataclass(frozen=True)
class VirusLevel:
    """A power-virus level: worst-case current and the guardband step entering it.

    max_freq is the turbo ratio limit for the level; None leaves the curve top as the cap.
    """

    level_id: int
    icc_virus: float
    delta_v: float
    max_freq: Optional[float] = None

    def __post_init__(self) -> None:
        if self.icc_virus <= 0:
            raise ModelError(f"Level {self.level_id}: icc_virus must be positive")
        if self.delta_v < 0:
            raise ModelError(f"Level {self.level_id}: delta_v must be non-negative")
        if self.max_freq is not None and self.max_freq <= 0:
            raise ModelError(f"Level {self.level_id}: max_freq must be positive")


@dataclass(frozen=True)
class GuardbandModel:
    load_line: LoadLine
    levels: Tuple[VirusLevel, ...]
    droop_delta_i: Optional[float] = None
    droop_fraction: float = 0.4
    reliability_adder: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "levels", tuple(self.levels))
        if not self.levels:
            raise ModelError("Guardband model needs at least one virus level")
        for low, high in zip(self.levels, self.levels[1:]):
            if high.level_id <= low.level_id:
                raise ModelError("Virus level ids must be strictly increasing")
            if high.icc_virus <= low.icc_virus:
                raise ModelError("icc_virus must be strictly increasing with level")
        if self.droop_delta_i is not None and self.droop_delta_i < 0:
            raise ModelError("droop_delta_i must be non-negative")
        if not 0 <= self.droop_fraction <= 1:
            raise ModelError("droop_fraction must lie in [0, 1]")
        if self.reliability_adder < 0:
            raise ModelError("reliability_adder must be non-negative")

    def level(self, level_id: int) -> VirusLevel:
        for lvl in self.levels:
            if lvl.level_id == level_id:
                return lvl
        raise ModelError(f"Unknown virus level {level_id}")

    @property
    def top(self) -> VirusLevel:
        return self.levels[-1]


def load_line_voltage(vcc: float, icc: float, ll: LoadLine) -> float:
    """Voltage seen at the load once the VR output has dropped across R_LL."""
    if vcc <= 0 or icc < 0:
        raise ModelError(f"Load-line needs vcc > 0 and icc >= 0 (got {vcc}, {icc})")
    result = vcc - ll.r_ll * icc
    if result <= 0:
        raise ModelError(f"Setpoint infeasible: {vcc:.4f} V at {icc:.1f} A leaves {result:.4f} V at the load")
    return result


def droop_current(level: VirusLevel, gb: GuardbandModel) -> float:
    if gb.droop_delta_i is not None:
        return gb.droop_delta_i
    return gb.droop_fraction * level.icc_virus


def guardband_voltage(level: VirusLevel, gb: GuardbandModel, z_peak: float) -> float:
    """IR drop at the virus current, plus the peak-impedance droop, plus the reliability adder."""
    if z_peak < 0:
        raise ModelError("z_peak must be non-negative")
    ir_drop = gb.load_line.r_ll * level.icc_virus
    droop = z_peak * droop_current(level, gb)
    return ir_drop + droop + gb.reliability_adder


def vr_setpoint(
    vcc_min: float,
    level: VirusLevel,
    gb: GuardbandModel,
    z_peak: float,
    *,
    vmax: Optional[float] = None,
) -> float:
    if vcc_min <= 0:
        raise ModelError("vcc_min must be positive")
    setpoint = vcc_min + guardband_voltage(level, gb, z_peak)
    if vmax is not None and setpoint > vmax:
        raise VmaxExceeded(setpoint, vmax)
    return setpoint


def level_transition_delta(levels: Sequence[VirusLevel], from_id: int, to_id: int) -> float:
    ids = [lvl.level_id for lvl in levels]
    for level_id in (from_id, to_id):
        if level_id not in ids:
            raise ModelError(f"Unknown virus level {level_id}")
    lo, hi = sorted((ids.index(from_id), ids.index(to_id)))
    step = sum(lvl.delta_v for lvl in levels[lo + 1 : hi + 1])
    return step if to_id >= from_id else -step


def reliability_adder_for(
    tdp: float,
    mode: PmuMode,
    anchors: Tuple[Tuple[float, float], Tuple[float, float]] = RELIABILITY_ANCHORS,
) -> float:
    (tdp_lo, adder_lo), (tdp_hi, adder_hi) = anchors
    if not tdp_lo <= tdp <= tdp_hi:
        raise ModelError(f"TDP {tdp} W outside the supported range [{tdp_lo}, {tdp_hi}] W")
    if PmuMode(mode) is PmuMode.NORMAL:
        return 0.0
    if tdp_hi == tdp_lo:
        return adder_lo
    t = (tdp - tdp_lo) / (tdp_hi - tdp_lo)
    adder = adder_lo + t * (adder_hi - adder_lo)
    return min(max(adder, min(adder_lo, adder_hi)), max(adder_lo, adder_hi))


def derive_levels(
    r_ll: float,
    rows: Iterable[Tuple[int, float, Optional[float], Optional[float]]],
) -> Tuple[VirusLevel, ...]:
    """Build the level table from (level_id, icc_virus, delta_v, max_freq) rows.

    A missing delta_v comes from the load-line: r_ll times the current step from the level below.
    """
    levels = []
    prev_icc = 0.0
    for level_id, icc, delta_v, max_freq in sorted(rows, key=lambda row: row[0]):
        if delta_v is None:
            delta_v = r_ll * (icc - prev_icc)
        levels.append(VirusLevel(level_id=level_id, icc_virus=icc, delta_v=delta_v, max_freq=max_freq))
        prev_icc = icc
    return tuple(levels)


def package_level(gb: GuardbandModel, active_cores: int, requested: Iterable[int] = ()) -> VirusLevel:
    """Level the PMU programs: the active-core-count level or the highest per-core request, whichever is higher."""
    if active_cores <= 0:
        by_count = gb.levels[0]
    else:
        by_count = gb.levels[min(active_cores, len(gb.levels)) - 1]
    chosen = by_count
    for level_id in requested:
        lvl = gb.level(level_id)
        if lvl.icc_virus > chosen.icc_virus:
            chosen = lvl
    return chosen
