from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .errors import ModelError
from .modes import PmuMode, Segment


class PackageCState(IntEnum):
    C0 = 0
    C2 = 2
    C3 = 3
    C6 = 6
    C7 = 7
    C8 = 8
    C9 = 9
    C10 = 10

    @property
    def label(self) -> str:
        return self.name

    @classmethod
    def parse(cls, value: object) -> "PackageCState":
        if isinstance(value, cls):
            return value
        if isinstance(value, int):
            return cls(value)
        text = str(value).strip().upper()
        try:
            return cls[text if text.startswith("C") else f"C{text}"]
        except KeyError:
            raise ModelError(f"Unknown package C-state {value!r}") from None


class CoreCState(IntEnum):
    CC0 = 0
    CC3 = 3
    CC6 = 6


class GraphicsState(str, Enum):
    RC0 = "RC0"
    RC6 = "RC6"


class DramState(str, Enum):
    ACTIVE = "active"
    SELF_REFRESH = "self_refresh"


class DisplayState(str, Enum):
    ON = "on"
    PSR = "psr"
    OFF = "off"


@dataclass(frozen=True)
class ComponentStates:
    cores: Tuple[CoreCState, ...]
    graphics: GraphicsState = GraphicsState.RC6
    dram: DramState = DramState.ACTIVE
    io_power_gated: bool = False
    core_vr_off_ok: bool = False
    display: DisplayState = DisplayState.ON
    all_ips_off: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "cores", tuple(CoreCState(c) for c in self.cores))
        if not self.cores:
            raise ModelError("ComponentStates needs at least one core")


def resolve_package_cstate(cs: ComponentStates, platform_cap: PackageCState) -> PackageCState:
    """Deepest package state whose conditions all hold, clamped to the platform cap.

    Each state inherits every condition of the shallower states before it.
    """
    if any(c is CoreCState.CC0 for c in cs.cores) or cs.graphics is GraphicsState.RC0:
        return PackageCState.C0

    conditions = (
        (PackageCState.C2, all(c >= CoreCState.CC3 for c in cs.cores)),
        (PackageCState.C3, cs.dram is DramState.SELF_REFRESH),
        (PackageCState.C6, all(c is CoreCState.CC6 for c in cs.cores)),
        (PackageCState.C7, cs.io_power_gated),
        (PackageCState.C8, cs.core_vr_off_ok),
        (PackageCState.C9, cs.display in (DisplayState.PSR, DisplayState.OFF)),
        (PackageCState.C10, cs.all_ips_off and cs.display is DisplayState.OFF),
    )
    state = PackageCState.C0
    for candidate, holds in conditions:
        if not holds:
            break
        state = candidate
    return min(state, platform_cap)


def default_package_cap(segment: Segment, c8_enabled: bool) -> PackageCState:
    if Segment(segment) is Segment.MOBILE:
        return PackageCState.C10
    return PackageCState.C8 if c8_enabled else PackageCState.C7


@dataclass(frozen=True)
class CStatePowerTable:
    normal: Mapping[PackageCState, float]
    bypass: Mapping[PackageCState, float]

    def __post_init__(self) -> None:
        for mode, table in ((PmuMode.NORMAL, self.normal), (PmuMode.BYPASS, self.bypass)):
            ordered = sorted(table.items())
            if any(watts < 0 for _, watts in ordered):
                raise ModelError(f"{mode.value} C-state power must be non-negative")
            for (shallow, p_shallow), (deep, p_deep) in zip(ordered, ordered[1:]):
                if p_deep >= p_shallow:
                    raise ModelError(
                        f"{mode.value} C-state power must decrease with depth: "
                        f"{deep.label}={p_deep} W is not below {shallow.label}={p_shallow} W"
                    )

    def for_mode(self, mode: PmuMode) -> Mapping[PackageCState, float]:
        return self.bypass if PmuMode(mode) is PmuMode.BYPASS else self.normal


@dataclass(frozen=True)
class LatencyTable:
    """Entry/exit latency in seconds per package state, plus the staggered core ungate time."""

    entries: Mapping[PackageCState, Tuple[float, float]]
    core_ungate_latency: float = 15e-9

    def __post_init__(self) -> None:
        if self.core_ungate_latency < 0:
            raise ModelError("Core ungate latency must be non-negative")
        ordered = sorted(self.entries.items())
        if any(entry < 0 or exit_ < 0 for _, (entry, exit_) in ordered):
            raise ModelError("C-state latencies must be non-negative")
        for (shallow, (_, exit_shallow)), (deep, (_, exit_deep)) in zip(ordered, ordered[1:]):
            if exit_deep < exit_shallow:
                raise ModelError(f"{deep.label} exit latency is shorter than {shallow.label}")


def cstate_power(state: PackageCState, mode: PmuMode, table: CStatePowerTable) -> float:
    try:
        return table.for_mode(mode)[state]
    except KeyError:
        raise ModelError(f"C-state power table has no {PmuMode(mode).value} entry for {state.label}") from None


def wake_cost(from_state: PackageCState, mode: PmuMode, table: LatencyTable) -> float:
    if from_state is PackageCState.C0:
        return 0.0
    try:
        _, exit_latency = table.entries[from_state]
    except KeyError:
        raise ModelError(f"Latency table has no entry for {from_state.label}") from None
    # Cores sit behind closed power-gates from C6 down, only when gating is in use.
    if PmuMode(mode) is PmuMode.NORMAL and from_state >= PackageCState.C6:
        exit_latency += table.core_ungate_latency
    return exit_latency


def _merge_runs(timeline: Sequence[Tuple[PackageCState, float]]) -> List[Tuple[PackageCState, float]]:
    merged: List[Tuple[PackageCState, float]] = []
    for state, duration in timeline:
        if merged and merged[-1][0] == state:
            merged[-1] = (state, merged[-1][1] + duration)
        else:
            merged.append((state, duration))
    return merged


def residency_average_power(
    timeline: Sequence[Tuple[PackageCState, float]],
    table: CStatePowerTable,
    mode: PmuMode,
    latencies: Optional[LatencyTable] = None,
) -> float:
    """Time-weighted package power over a residency timeline.

    With latencies, the exit time of each wake is moved from the deeper state onto the
    shallower state it wakes into.
    """
    if not timeline:
        raise ModelError("Cannot average power over an empty timeline")
    if any(duration <= 0 for _, duration in timeline):
        raise ModelError("Timeline durations must be positive")

    runs = _merge_runs(timeline)
    charged: Dict[PackageCState, float] = {}
    for i, (state, duration) in enumerate(runs):
        charged[state] = charged.get(state, 0.0) + duration
        if latencies is None or i + 1 == len(runs):
            continue
        nxt = runs[i + 1][0]
        if nxt < state:
            moved = min(wake_cost(state, mode, latencies), duration)
            charged[state] -= moved
            charged[nxt] = charged.get(nxt, 0.0) + moved

    total_time = sum(duration for _, duration in runs)
    energy = sum(cstate_power(state, mode, table) * seconds for state, seconds in charged.items())
    return energy / total_time


# Component states an idle interval settles into, by platform scenario.
IDLE_HINTS: Dict[str, Dict[str, object]] = {
    "off": dict(io_power_gated=True, core_vr_off_ok=True, display=DisplayState.OFF, all_ips_off=True),
    "sleep": dict(io_power_gated=True, core_vr_off_ok=True, display=DisplayState.OFF, all_ips_off=True),
    "long_idle": dict(io_power_gated=True, core_vr_off_ok=True, display=DisplayState.OFF, all_ips_off=False),
    "short_idle": dict(io_power_gated=False, core_vr_off_ok=False, display=DisplayState.ON, all_ips_off=False),
}
DEFAULT_IDLE_HINT = "long_idle"


def idle_states(hint: str, n_cores: int) -> ComponentStates:
    try:
        flags = IDLE_HINTS[hint]
    except KeyError:
        raise ModelError(f"Unknown idle hint {hint!r}; expected one of {', '.join(IDLE_HINTS)}") from None
    return ComponentStates(
        cores=(CoreCState.CC6,) * n_cores,
        graphics=GraphicsState.RC6,
        dram=DramState.SELF_REFRESH,
        **flags,
    )
