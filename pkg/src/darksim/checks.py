from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from .cstates import PackageCState, cstate_power
from .guardband import guardband_voltage, vr_setpoint
from .modes import PmuMode
from .pdn import bypass, dc_resistance, impedance_at, impedance_sweep, nodal_impedance_at, peak_impedance
from .runtime import RuntimeContext
from .vfmodel import fmax_under_vmax


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    info: str


def _check_impedance_ratio(runtime: RuntimeContext) -> CheckResult:
    platform = runtime.platform
    z_gated = platform.z_peak(PmuMode.NORMAL)
    z_bypassed = platform.z_peak(PmuMode.BYPASS)
    ratio = z_gated / z_bypassed
    info = f"{z_gated * 1e3:.3f} / {z_bypassed * 1e3:.3f} mOhm = {ratio:.2f}x"
    return CheckResult(name="Gated/bypassed peak |Z|", ok=1.8 <= ratio <= 2.2, info=info)


def _check_dominance(runtime: RuntimeContext) -> CheckResult:
    network = runtime.platform.network
    sweep = runtime.platform.sweep
    gated = impedance_sweep(network, sweep.f_min, sweep.f_max, sweep.points, sweep.spacing)
    bypassed = impedance_sweep(bypass(network), sweep.f_min, sweep.f_max, sweep.points, sweep.spacing)
    above = int(np.count_nonzero(bypassed.magnitudes > gated.magnitudes))
    info = f"bypassed <= gated at all {len(gated)} points" if not above else f"bypassed above gated at {above} points"
    return CheckResult(name="Bypassed |Z| <= gated |Z|", ok=above == 0, info=info)


def _check_load_line(runtime: RuntimeContext) -> CheckResult:
    platform = runtime.platform
    r_dc = dc_resistance(bypass(platform.network))
    r_ll = platform.guardband.load_line.r_ll
    ok = abs(r_dc - r_ll) <= 0.05 * r_ll
    return CheckResult(name="Bypassed DC resistance vs R_LL", ok=ok, info=f"{r_dc * 1e3:.3f} vs {r_ll * 1e3:.3f} mOhm")


def _check_nodal_agreement(runtime: RuntimeContext) -> CheckResult:
    network = runtime.platform.network
    sweep = runtime.platform.sweep
    f_peak, _ = peak_impedance(impedance_sweep(network, sweep.f_min, sweep.f_max, sweep.points, sweep.spacing))
    ladder = impedance_at(network, f_peak)
    nodal = nodal_impedance_at(network, f_peak)
    rel = abs(ladder - nodal) / abs(nodal)
    return CheckResult(name="Ladder vs nodal solve", ok=rel < 1e-6, info=f"relative error {rel:.2e} at {f_peak:.3g} Hz")


def _check_guardband_delta(runtime: RuntimeContext) -> CheckResult:
    platform = runtime.platform
    top = platform.guardband.top
    vcc_min = runtime.config.guardband.vcc_min_mv * 1e-3
    normal = vr_setpoint(vcc_min, top, platform.guardband_for(PmuMode.NORMAL), platform.z_peak(PmuMode.NORMAL))
    bypassed = vr_setpoint(vcc_min, top, platform.guardband_for(PmuMode.BYPASS), platform.z_peak(PmuMode.BYPASS))
    delta_mv = (normal - bypassed) * 1e3
    return CheckResult(
        name=f"Level {top.level_id} setpoint reduction",
        ok=90.0 <= delta_mv <= 110.0,
        info=f"{delta_mv:.1f} mV at {platform.tdp:g} W",
    )


def _check_c7_ratio(runtime: RuntimeContext) -> CheckResult:
    table = runtime.platform.cstate_power
    normal = cstate_power(PackageCState.C7, PmuMode.NORMAL, table)
    bypassed = cstate_power(PackageCState.C7, PmuMode.BYPASS, table)
    required = runtime.config.cstates.min_c7_leakage_ratio
    return CheckResult(
        name="C7 bypass/normal power",
        ok=bypassed > required * normal,
        info=f"{bypassed / normal:.2f}x (needs > {required:g}x)",
    )


def _check_ungate_latency(runtime: RuntimeContext) -> CheckResult:
    latency_ns = runtime.platform.latencies.core_ungate_latency * 1e9
    return CheckResult(name="Core ungate latency", ok=10.0 <= latency_ns <= 20.0, info=f"{latency_ns:g} ns")


def _check_fmax_headroom(runtime: RuntimeContext) -> CheckResult:
    platform = runtime.platform
    degenerate = []
    for mode in PmuMode:
        gb = platform.guardband_for(mode)
        for level in gb.levels:
            vgb = guardband_voltage(level, gb, platform.z_peak(mode))
            result = fmax_under_vmax(platform.curve, vgb, platform.limits.voltage)
            if result.degenerate:
                degenerate.append(f"{mode.value}/L{level.level_id}")
    info = "every level fits under Vmax" if not degenerate else f"no feasible bin: {', '.join(degenerate)}"
    return CheckResult(name="Fmax under Vmax", ok=not degenerate, info=info)


def run_checks(runtime: RuntimeContext) -> List[CheckResult]:
    return [
        _check_impedance_ratio(runtime),
        _check_dominance(runtime),
        _check_load_line(runtime),
        _check_nodal_agreement(runtime),
        _check_guardband_delta(runtime),
        _check_c7_ratio(runtime),
        _check_ungate_latency(runtime),
        _check_fmax_headroom(runtime),
    ]
