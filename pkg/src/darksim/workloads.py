from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Tuple

import numpy as np

from .cstates import IDLE_HINTS
from .errors import ModelError
from .trace import CoreActivity, Trace, TraceInterval


class WorkloadKind(str, Enum):
    SPEC_BASE = "spec-base"
    SPEC_RATE = "spec-rate"
    GRAPHICS = "graphics"
    ENERGY_STAR = "energy-star"
    RMT = "rmt"


@dataclass(frozen=True)
class SuiteEntry:
    name: str
    mem_fraction: float

    def __post_init__(self) -> None:
        if not 0 <= self.mem_fraction <= 1:
            raise ModelError(f"{self.name}: mem_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class WorkloadModel:
    """Time per unit of work: w_cpu / f + w_mem."""

    w_cpu: float
    w_mem: float

    def __post_init__(self) -> None:
        if self.w_cpu < 0 or self.w_mem < 0 or (self.w_cpu == 0 and self.w_mem == 0):
            raise ModelError("Workload needs non-negative w_cpu/w_mem, not both zero")

    @classmethod
    def from_mem_fraction(cls, mem_fraction: float, f_ref: float) -> "WorkloadModel":
        """Scale so one unit of work takes one second at f_ref, mem_fraction of it frequency-bound-free."""
        return cls(w_cpu=(1.0 - mem_fraction) * f_ref, w_mem=mem_fraction)

    def throughput(self, f: float) -> float:
        if f <= 0:
            return 0.0
        return 1.0 / (self.w_cpu / f + self.w_mem)


@dataclass(frozen=True)
class WorkloadParams:
    n_cores: int = 4
    intervals: int = 200
    interval_s: float = 1e-3
    mem_fraction: float = 0.0
    jitter: float = 0.01
    graphics_core_activity: float = 0.2
    rmt_active_every: int = 100
    energy_star_mix: Dict[str, float] = field(
        default_factory=lambda: {"off": 0.45, "sleep": 0.05, "long_idle": 0.15, "short_idle": 0.35}
    )

    def __post_init__(self) -> None:
        if self.n_cores < 1 or self.intervals < 1:
            raise ModelError("Workloads need at least one core and one interval")
        if self.interval_s <= 0:
            raise ModelError("interval_s must be positive")
        if not 0 <= self.mem_fraction <= 1 or self.jitter < 0:
            raise ModelError("mem_fraction must lie in [0, 1] and jitter must be non-negative")
        if not 0 < self.graphics_core_activity <= 1:
            raise ModelError("graphics_core_activity must lie in (0, 1]")
        if self.rmt_active_every < 1:
            raise ModelError("rmt_active_every must be at least 1")
        unknown = set(self.energy_star_mix) - set(IDLE_HINTS)
        if unknown:
            raise ModelError(f"Unknown ENERGY STAR states: {sorted(unknown)}")
        if abs(sum(self.energy_star_mix.values()) - 1.0) > 1e-6:
            raise ModelError("ENERGY STAR mix must sum to 1")


def _jittered(rng: np.random.Generator, value: float, jitter: float) -> float:
    if jitter == 0:
        return value
    return float(np.clip(value + rng.uniform(-jitter, jitter), 0.0, 1.0))


def _idle_cores(n: int) -> Tuple[CoreActivity, ...]:
    return (CoreActivity(),) * n


def _apportion(mix: Dict[str, float], total: int) -> List[Tuple[str, int]]:
    """Largest-remainder split of `total` intervals across the mix, in mix order."""
    raw = [(name, share * total) for name, share in mix.items()]
    counts = {name: int(np.floor(x)) for name, x in raw}
    leftover = total - sum(counts.values())
    by_remainder = sorted(raw, key=lambda item: item[1] - np.floor(item[1]), reverse=True)
    for name, _ in by_remainder[:leftover]:
        counts[name] += 1
    return [(name, counts[name]) for name in mix]


def gen_workload(kind: WorkloadKind, params: WorkloadParams, seed: int = 0) -> Trace:
    """Synthetic activity trace; jitter is the only randomness and comes from `seed`."""
    kind = WorkloadKind(kind)
    rng = np.random.default_rng(seed)
    n, dt = params.n_cores, params.interval_s
    intervals: List[TraceInterval] = []

    if kind is WorkloadKind.SPEC_BASE:
        for _ in range(params.intervals):
            busy = CoreActivity(1.0, 1, _jittered(rng, params.mem_fraction, params.jitter))
            intervals.append(TraceInterval(dt, (busy,) + _idle_cores(n - 1)))

    elif kind is WorkloadKind.SPEC_RATE:
        for _ in range(params.intervals):
            cores = tuple(CoreActivity(1.0, 1, _jittered(rng, params.mem_fraction, params.jitter)) for _ in range(n))
            intervals.append(TraceInterval(dt, cores))

    elif kind is WorkloadKind.GRAPHICS:
        for _ in range(params.intervals):
            frac = _jittered(rng, params.graphics_core_activity, params.jitter) or params.graphics_core_activity
            busy = CoreActivity(frac, 1, params.mem_fraction)
            intervals.append(TraceInterval(dt, (busy,) + _idle_cores(n - 1), graphics_load=1.0))

    elif kind is WorkloadKind.RMT:
        phase = int(rng.integers(params.rmt_active_every))
        for i in range(params.intervals):
            if i % params.rmt_active_every == phase:
                core_id = int(rng.integers(n))
                cores = list(_idle_cores(n))
                cores[core_id] = CoreActivity(_jittered(rng, 0.5, 0.5) or 0.5, 1, params.mem_fraction)
                intervals.append(TraceInterval(dt, tuple(cores)))
            else:
                intervals.append(TraceInterval(dt, _idle_cores(n), idle_hint="long_idle"))

    else:
        for hint, count in _apportion(params.energy_star_mix, params.intervals):
            intervals.extend(TraceInterval(dt, _idle_cores(n), idle_hint=hint) for _ in range(count))

    return Trace(intervals=tuple(intervals), name=kind.value)
