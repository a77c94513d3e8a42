from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .cstates import (
    CStatePowerTable,
    LatencyTable,
    PackageCState,
    cstate_power,
    residency_average_power,
    resolve_package_cstate,
    wake_cost,
)
from .errors import ModelError
from .guardband import RELIABILITY_ANCHORS, GuardbandModel, reliability_adder_for
from .modes import PmuMode, Segment
from .pdn import PdnNetwork, Spacing, bypass, impedance_sweep, peak_impedance
from .pmu import (
    GraphicsDomain,
    OperatingPoint,
    PbmPolicy,
    classify_demand,
    dvfs_select,
    idle_leakage_at_floor,
    pbm_allocate,
)
from .power import (
    CorePower,
    CorePowerParams,
    DesignLimits,
    PowerBreakdown,
    RollingCurrent,
    Violation,
    check_limits,
    rail_current,
)
from .trace import Trace, TraceInterval
from .vfmodel import VfCurve
from .workloads import SuiteEntry, WorkloadKind, WorkloadModel, WorkloadParams, gen_workload

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepSettings:
    f_min: float = 1e3
    f_max: float = 1e9
    points: int = 400
    spacing: Spacing = Spacing.LOG


@lru_cache(maxsize=32)
def _peak(network: PdnNetwork, sweep: SweepSettings) -> float:
    profile = impedance_sweep(network, sweep.f_min, sweep.f_max, sweep.points, sweep.spacing)
    return peak_impedance(profile)[1]


@dataclass(frozen=True)
class PlatformConfig:
    """Everything one simulation run needs. The mode is fixed for the run."""

    mode: PmuMode
    segment: Segment
    package_cap: PackageCState
    network: PdnNetwork
    guardband: GuardbandModel
    curve: VfCurve
    limits: DesignLimits
    core_params: CorePowerParams
    graphics: GraphicsDomain
    policy: PbmPolicy
    cstate_power: CStatePowerTable
    latencies: LatencyTable
    sweep: SweepSettings = SweepSettings()
    reliability_anchors: Tuple[Tuple[float, float], Tuple[float, float]] = RELIABILITY_ANCHORS
    tdc_window: float = 1.0
    forced_z_peak: Optional[float] = None

    @property
    def tdp(self) -> float:
        return self.limits.tdp

    @property
    def n_cores(self) -> int:
        return len(self.network.cores)

    def with_mode(self, mode: PmuMode) -> "PlatformConfig":
        return replace(self, mode=PmuMode(mode))

    def with_tdp(self, tdp: float) -> "PlatformConfig":
        return replace(self, limits=replace(self.limits, tdp=tdp))

    def with_cap(self, cap: PackageCState) -> "PlatformConfig":
        return replace(self, package_cap=cap)

    def with_curve(self, curve: VfCurve) -> "PlatformConfig":
        return replace(self, curve=curve)

    def z_peak(self, mode: Optional[PmuMode] = None) -> float:
        if self.forced_z_peak is not None:
            return self.forced_z_peak
        mode = PmuMode(mode or self.mode)
        network = bypass(self.network) if mode is PmuMode.BYPASS else self.network
        return _peak(network, self.sweep)

    def guardband_for(self, mode: Optional[PmuMode] = None) -> GuardbandModel:
        mode = PmuMode(mode or self.mode)
        adder = reliability_adder_for(self.tdp, mode, self.reliability_anchors)
        return replace(self.guardband, reliability_adder=adder)


@dataclass(frozen=True)
class IntervalRecord:
    index: int
    start: float
    duration: float
    state: PackageCState
    breakdown: PowerBreakdown
    throughput: float
    lost_time: float = 0.0
    point: Optional[OperatingPoint] = None
    violations: Tuple[Violation, ...] = ()


@dataclass(frozen=True)
class SimReport:
    mode: PmuMode
    tdp: float
    package_cap: PackageCState
    trace_name: str
    intervals: Tuple[IntervalRecord, ...]
    total_time: float
    total_energy: float
    performance: float
    residency: Dict[PackageCState, float]
    residency_power: float

    @property
    def average_power(self) -> float:
        return self.total_energy / self.total_time

    @property
    def violations(self) -> List[Tuple[int, Violation]]:
        return [(rec.index, v) for rec in self.intervals for v in rec.violations]

    @property
    def degenerate_intervals(self) -> int:
        return sum(1 for rec in self.intervals if rec.point is not None and rec.point.degenerate)

    def residency_fraction(self, state: PackageCState) -> float:
        return self.residency.get(state, 0.0) / self.total_time


def _throughput(interval: TraceInterval, point: OperatingPoint, f_ref: float, graphics: GraphicsDomain) -> float:
    if classify_demand(interval).graphics_dominant:
        return interval.graphics_load * point.graphics_frequency / graphics.curve.f_max
    total = 0.0
    for core in interval.cores:
        if core.active:
            total += core.active_fraction * WorkloadModel.from_mem_fraction(core.mem_fraction, f_ref).throughput(
                point.frequency
            )
    return total


def _select(platform: PlatformConfig, interval: TraceInterval, gb: GuardbandModel, z_peak: float) -> OperatingPoint:
    floor = idle_leakage_at_floor(
        platform.curve, gb, interval.cores, platform.mode, z_peak=z_peak, params=platform.core_params
    )
    budget = pbm_allocate(
        platform.tdp, classify_demand(interval), platform.mode, floor, platform.policy
    )
    return dvfs_select(
        budget,
        platform.curve,
        gb,
        platform.limits,
        interval.cores,
        platform.mode,
        z_peak=z_peak,
        params=platform.core_params,
        graphics_load=interval.graphics_load,
        graphics=platform.graphics,
    )


def run(platform: PlatformConfig, trace: Trace) -> SimReport:
    """Step the trace interval by interval and collect power, performance and residency."""
    if trace.n_cores != platform.n_cores:
        raise ModelError(f"Trace has {trace.n_cores} cores, platform has {platform.n_cores}")

    mode = platform.mode
    gb = platform.guardband_for(mode)
    z_peak = platform.z_peak(mode)
    f_ref = platform.curve.f_max
    tdc = RollingCurrent(platform.tdc_window)
    idle_cores = (CorePower(0.0, 0.0),) * trace.n_cores

    # Power and frequency depend only on the activity shape, so equal shapes share a selection.
    selections: Dict[tuple, OperatingPoint] = {}
    records: List[IntervalRecord] = []
    residency: Dict[PackageCState, float] = {}
    energy = work = elapsed = 0.0
    previous = PackageCState.C0

    for index, interval in enumerate(trace.intervals):
        duration = interval.duration
        if interval.is_idle:
            state = resolve_package_cstate(interval.idle_states(), platform.package_cap)
            package = cstate_power(state, mode, platform.cstate_power)
            breakdown = PowerBreakdown.compose(idle_cores, uncore=package)
            tdc.push(duration, 0.0)
            record = IntervalRecord(index, elapsed, duration, state, breakdown, throughput=0.0)
        else:
            state = PackageCState.C0
            lost = min(wake_cost(previous, mode, platform.latencies), duration)
            key = (tuple((c.active_fraction, c.virus_level) for c in interval.cores), interval.graphics_load)
            point = selections.get(key)
            if point is None:
                point = selections[key] = _select(platform, interval, gb, z_peak)
            breakdown = PowerBreakdown.compose(
                point.core_power, graphics=point.graphics_power, uncore=platform.policy.uncore_reserve
            )
            icc = rail_current(breakdown, point.voltage)
            sustained = tdc.push(duration, icc)
            violations = check_limits(breakdown, icc, point.voltage, platform.limits, icc_sustained=sustained)
            useful = (duration - lost) / duration
            record = IntervalRecord(
                index,
                elapsed,
                duration,
                state,
                breakdown,
                throughput=useful * _throughput(interval, point, f_ref, platform.graphics),
                lost_time=lost,
                point=point,
                violations=tuple(violations),
            )

        records.append(record)
        energy += breakdown.total * duration
        work += record.throughput * duration
        elapsed += duration
        residency[state] = residency.get(state, 0.0) + duration
        previous = state

    timeline = [(rec.state, rec.duration) for rec in records]
    report = SimReport(
        mode=mode,
        tdp=platform.tdp,
        package_cap=platform.package_cap,
        trace_name=trace.name,
        intervals=tuple(records),
        total_time=elapsed,
        total_energy=energy,
        performance=work / elapsed,
        residency=dict(sorted(residency.items())),
        residency_power=residency_average_power(timeline, platform.cstate_power, mode),
    )
    logger.debug(
        "%s @ %.0f W on %s: perf=%.4f avg=%.3f W, %d violations",
        mode.value, platform.tdp, trace.name, report.performance, report.average_power, len(report.violations),
    )
    return report


def _pct_delta(new: float, base: float) -> float:
    if base == 0:
        return 0.0
    return (new / base - 1.0) * 100.0


@dataclass(frozen=True)
class ModeComparison:
    normal: SimReport
    bypass: SimReport

    @property
    def perf_delta_pct(self) -> float:
        return _pct_delta(self.bypass.performance, self.normal.performance)

    @property
    def power_delta_pct(self) -> float:
        return _pct_delta(self.bypass.average_power, self.normal.average_power)

    @property
    def residency_delta(self) -> Dict[PackageCState, float]:
        states = sorted(set(self.normal.residency) | set(self.bypass.residency))
        return {s: self.bypass.residency_fraction(s) - self.normal.residency_fraction(s) for s in states}


def compare_modes(platform: PlatformConfig, trace: Trace) -> ModeComparison:
    return ModeComparison(
        normal=run(platform.with_mode(PmuMode.NORMAL), trace),
        bypass=run(platform.with_mode(PmuMode.BYPASS), trace),
    )


@dataclass(frozen=True)
class SuiteRow:
    name: str
    perf_delta_pct: float
    power_delta_pct: float


@dataclass(frozen=True)
class SuiteComparison:
    kind: WorkloadKind
    tdp: float
    rows: Tuple[SuiteRow, ...]

    @property
    def mean_perf_delta_pct(self) -> float:
        return sum(r.perf_delta_pct for r in self.rows) / len(self.rows)

    @property
    def max_perf_delta_pct(self) -> float:
        return max(r.perf_delta_pct for r in self.rows)


def suite_row(
    platform: PlatformConfig,
    entry: SuiteEntry,
    kind: WorkloadKind,
    params: WorkloadParams,
    seed: int = 0,
) -> SuiteRow:
    trace = gen_workload(kind, replace(params, mem_fraction=entry.mem_fraction), seed)
    result = compare_modes(platform, trace)
    return SuiteRow(entry.name, result.perf_delta_pct, result.power_delta_pct)


def compare_suite(
    platform: PlatformConfig,
    suite: Sequence[SuiteEntry],
    kind: WorkloadKind,
    params: WorkloadParams,
    seed: int = 0,
) -> SuiteComparison:
    if not suite:
        raise ModelError("Suite is empty")
    rows = [suite_row(platform, entry, kind, params, seed + offset) for offset, entry in enumerate(suite)]
    return SuiteComparison(kind=WorkloadKind(kind), tdp=platform.tdp, rows=tuple(rows))


@dataclass(frozen=True)
class TrendRow:
    tdp: float
    base_delta_pct: float
    rate_delta_pct: float
    graphics_delta_pct: float


@dataclass(frozen=True)
class TrendTable:
    rows: Tuple[TrendRow, ...]

    def base_non_increasing(self) -> bool:
        deltas = [r.base_delta_pct for r in self.rows]
        return all(b <= a + 1e-9 for a, b in zip(deltas, deltas[1:]))

    def rate_non_decreasing(self) -> bool:
        deltas = [r.rate_delta_pct for r in self.rows]
        return all(b >= a - 1e-9 for a, b in zip(deltas, deltas[1:]))

    def row_for(self, tdp: float) -> TrendRow:
        for row in self.rows:
            if row.tdp == tdp:
                return row
        raise ModelError(f"No trend row for {tdp} W")


def trend_row(
    platform: PlatformConfig,
    tdp: float,
    suite: Sequence[SuiteEntry],
    params: WorkloadParams,
    seed: int = 0,
) -> TrendRow:
    at_tdp = platform.with_tdp(tdp)
    base = compare_suite(at_tdp, suite, WorkloadKind.SPEC_BASE, params, seed)
    rate = compare_suite(at_tdp, suite, WorkloadKind.SPEC_RATE, params, seed)
    gfx = compare_modes(at_tdp, gen_workload(WorkloadKind.GRAPHICS, params, seed))
    row = TrendRow(tdp, base.mean_perf_delta_pct, rate.mean_perf_delta_pct, gfx.perf_delta_pct)
    logger.info(
        "%.0f W: base %+.2f%%, rate %+.2f%%, graphics %+.2f%%",
        tdp, row.base_delta_pct, row.rate_delta_pct, row.graphics_delta_pct,
    )
    return row


def tdp_sweep(
    platform: PlatformConfig,
    tdps: Iterable[float],
    suite: Sequence[SuiteEntry],
    params: WorkloadParams,
    seed: int = 0,
) -> TrendTable:
    """Mean Bypass-over-Normal deltas per TDP for the base, rate and graphics workloads."""
    tdps = sorted(tdps)
    if not tdps:
        raise ModelError("TDP list is empty")
    return TrendTable(rows=tuple(trend_row(platform, tdp, suite, params, seed) for tdp in tdps))


@dataclass(frozen=True)
class GuardbandStudyRow:
    tdp: float
    perf_gain_pct: float


def guardband_study(
    platform: PlatformConfig,
    tdps: Iterable[float],
    suite: Sequence[SuiteEntry],
    params: WorkloadParams,
    offset_v: float,
    seed: int = 0,
) -> Tuple[GuardbandStudyRow, ...]:
    """Single-core suite gain from lowering the Normal-mode guardband by offset_v at each TDP."""
    if offset_v <= 0:
        raise ModelError("Guardband offset must be positive")
    normal = platform.with_mode(PmuMode.NORMAL)
    improved = normal.with_curve(normal.curve.shifted(-offset_v))
    rows = []
    for tdp in sorted(tdps):
        gains = []
        for offset, entry in enumerate(suite):
            entry_params = replace(params, mem_fraction=entry.mem_fraction)
            trace = gen_workload(WorkloadKind.SPEC_BASE, entry_params, seed + offset)
            baseline = run(normal.with_tdp(tdp), trace).performance
            gains.append(_pct_delta(run(improved.with_tdp(tdp), trace).performance, baseline))
        rows.append(GuardbandStudyRow(tdp, sum(gains) / len(gains)))
    return tuple(rows)


@dataclass(frozen=True)
class CapComparison:
    baseline: SimReport
    candidate: SimReport

    @property
    def reduction_pct(self) -> float:
        base = self.baseline.residency_power
        return (base - self.candidate.residency_power) / base * 100.0 if base else 0.0


def compare_caps(
    platform: PlatformConfig,
    trace: Trace,
    baseline_cap: PackageCState,
    candidate_cap: PackageCState,
) -> CapComparison:
    """Residency-weighted package power of the same trace under two package C-state caps."""
    return CapComparison(
        baseline=run(platform.with_cap(baseline_cap), trace),
        candidate=run(platform.with_cap(candidate_cap), trace),
    )
