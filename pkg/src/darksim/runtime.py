from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

from .config import load_config
from .cstates import CStatePowerTable, LatencyTable, PackageCState, default_package_cap
from .guardband import GuardbandModel, LoadLine, derive_levels
from .models import AppConfig, CurveSection
from .modes import PmuMode, Segment
from .pdn import CoreBranch, PdnNetwork, PdnStage, Spacing, Topology
from .pmu import GraphicsDomain, PbmPolicy, resolve_mode
from .power import CorePowerParams, DesignLimits, GraphicsPowerParams
from .sim import PlatformConfig, SweepSettings
from .vfmodel import VfCurve
from .workloads import SuiteEntry, WorkloadKind, WorkloadParams

logger = logging.getLogger(__name__)

_MILLI = 1e-3
_MICRO = 1e-6
_NANO = 1e-9
_PICO = 1e-12
_MEGA = 1e6


@dataclass(frozen=True)
class RuntimeContext:
    config_path: Path
    config: AppConfig
    platform: PlatformConfig


def build_curve(section: CurveSection) -> VfCurve:
    return VfCurve(
        points=tuple((k.freq_mhz * _MEGA, k.vnom_mv * _MILLI) for k in section.knots),
        bin=section.bin_mhz * _MEGA,
    )


def build_network(config: AppConfig) -> PdnNetwork:
    pdn = config.pdn
    stages = tuple(
        PdnStage(
            series_resistance=s.series_resistance_mohm * _MILLI,
            series_inductance=s.series_inductance_ph * _PICO,
            shunt_cap=s.shunt_cap_uf * _MICRO,
            cap_esr=s.cap_esr_mohm * _MILLI,
            cap_esl=s.cap_esl_ph * _PICO,
        )
        for s in pdn.stages
    )
    branch = CoreBranch(
        gate_resistance=pdn.core.gate_resistance_mohm * _MILLI,
        die_grid_resistance=pdn.core.die_grid_resistance_mohm * _MILLI,
        mim_cap=pdn.core.mim_cap_nf * _NANO,
        mim_esr=pdn.core.mim_esr_mohm * _MILLI,
    )
    return PdnNetwork(
        vr_output_resistance=pdn.vr_output_resistance_mohm * _MILLI,
        stages=stages,
        cores=(branch,) * pdn.cores,
        topology=Topology.GATED,
    )


def build_guardband(config: AppConfig) -> GuardbandModel:
    gb = config.guardband
    r_ll = gb.r_ll_mohm * _MILLI
    rows = [
        (
            row.level,
            row.icc_virus_a,
            None if row.delta_v_mv is None else row.delta_v_mv * _MILLI,
            None if row.max_freq_mhz is None else row.max_freq_mhz * _MEGA,
        )
        for row in gb.levels
    ]
    return GuardbandModel(
        load_line=LoadLine(r_ll),
        levels=derive_levels(r_ll, rows),
        droop_delta_i=gb.droop_delta_i_a,
        droop_fraction=gb.droop_fraction,
    )


def reliability_anchors(config: AppConfig) -> Tuple[Tuple[float, float], Tuple[float, float]]:
    adder = config.guardband.reliability_adder
    return (
        (adder.tdp_low_w, adder.adder_low_mv * _MILLI),
        (adder.tdp_high_w, adder.adder_high_mv * _MILLI),
    )


def select_mode(config: AppConfig) -> PmuMode:
    platform = config.platform
    fused = resolve_mode(platform.fuse, Segment(platform.segment))
    if platform.mode == "fuse":
        return fused
    override = PmuMode(platform.mode)
    if override is not fused:
        logger.info("Mode override: %s instead of fuse-selected %s", override.value, fused.value)
    return override


def build_platform(config: AppConfig) -> PlatformConfig:
    """Turn a validated config into the immutable model bundle a run consumes."""
    segment = Segment(config.platform.segment)
    if config.platform.package_cap is not None:
        cap = PackageCState.parse(config.platform.package_cap)
    else:
        cap = default_package_cap(segment, config.platform.c8_enabled)

    graphics = GraphicsDomain(
        curve=build_curve(config.graphics.curve),
        params=GraphicsPowerParams(
            cdyn=config.graphics.cdyn_nf * _NANO,
            ilkg_ref=config.graphics.ilkg_ref_a,
            v_ref=config.graphics.v_ref_mv * _MILLI,
            lkg_voltage_exponent=config.graphics.lkg_voltage_exponent,
        ),
    )
    limits = config.limits
    cs = config.cstates
    sweep = config.pdn.sweep

    return PlatformConfig(
        mode=select_mode(config),
        segment=segment,
        package_cap=cap,
        network=build_network(config),
        guardband=build_guardband(config),
        curve=build_curve(config.curve),
        limits=DesignLimits(
            tdp=config.platform.tdp_w,
            tdc=limits.tdc_a,
            edc=limits.edc_a,
            vmax=limits.vmax_mv * _MILLI,
            vmin=limits.vmin_mv * _MILLI,
        ),
        core_params=CorePowerParams(
            cdyn_per_level={row.level: row.cdyn_nf * _NANO for row in config.power.cdyn},
            ilkg_ref=config.power.ilkg_ref_a,
            v_ref=config.power.v_ref_mv * _MILLI,
            lkg_voltage_exponent=config.power.lkg_voltage_exponent,
            gated_residual_fraction=config.power.gated_residual_fraction,
        ),
        graphics=graphics,
        policy=PbmPolicy(
            uncore_reserve=config.pmu.uncore_reserve_w,
            cpu_share_under_graphics=config.pmu.cpu_share_under_graphics,
            graphics_full_load_w=graphics.full_load_power,
        ),
        cstate_power=CStatePowerTable(
            normal={PackageCState.parse(r.state): r.normal_w for r in cs.power},
            bypass={PackageCState.parse(r.state): r.bypass_w for r in cs.power},
        ),
        latencies=LatencyTable(
            entries={PackageCState.parse(r.state): (r.entry_us * _MICRO, r.exit_us * _MICRO) for r in cs.latency},
            core_ungate_latency=cs.ungate_latency_ns * _NANO,
        ),
        sweep=SweepSettings(sweep.f_min_hz, sweep.f_max_hz, sweep.points, Spacing(sweep.spacing)),
        reliability_anchors=reliability_anchors(config),
        tdc_window=limits.tdc_window_s,
    )


def interval_seconds(config: AppConfig) -> float:
    return config.sim.interval_ms * _MILLI


def workload_params(config: AppConfig, kind: WorkloadKind, intervals: Optional[int] = None) -> WorkloadParams:
    wl = config.workloads
    default_count = {
        WorkloadKind.RMT: wl.rmt_intervals,
        WorkloadKind.ENERGY_STAR: wl.energy_star_intervals,
    }.get(WorkloadKind(kind), wl.intervals)
    return WorkloadParams(
        n_cores=config.pdn.cores,
        intervals=intervals or default_count,
        interval_s=interval_seconds(config),
        jitter=wl.jitter,
        graphics_core_activity=wl.graphics_core_activity,
        rmt_active_every=wl.rmt_active_every,
        energy_star_mix=dict(wl.energy_star_mix),
    )


def suite_entries(config: AppConfig) -> Tuple[SuiteEntry, ...]:
    return tuple(SuiteEntry(row.name, row.mem_fraction) for row in config.workloads.suite)


def build_runtime(config_path: Path) -> RuntimeContext:
    cfg_path = config_path.expanduser().resolve()
    config = load_config(cfg_path)
    return RuntimeContext(config_path=cfg_path, config=config, platform=build_platform(config))
