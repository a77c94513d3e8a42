"""End-to-end numbers the reference calibration is expected to reproduce."""

from __future__ import annotations

import pytest

from darksim.cstates import PackageCState
from darksim.modes import PmuMode
from darksim.runtime import suite_entries, workload_params
from darksim.sim import compare_caps, compare_modes, compare_suite, tdp_sweep
from darksim.workloads import WorkloadKind, gen_workload


def test_single_thread_suite_gain_at_91w(reference_config, reference_platform) -> None:
    params = workload_params(reference_config, WorkloadKind.SPEC_BASE)

    result = compare_suite(reference_platform, suite_entries(reference_config), WorkloadKind.SPEC_BASE, params)

    assert len(result.rows) == 12
    assert result.mean_perf_delta_pct == pytest.approx(4.6, abs=0.2)
    assert result.max_perf_delta_pct == pytest.approx((4.2 / 3.9 - 1.0) * 100.0, abs=0.1)
    assert all(row.perf_delta_pct >= 0 for row in result.rows)


def test_multi_thread_suite_gain_at_91w(reference_config, reference_platform) -> None:
    params = workload_params(reference_config, WorkloadKind.SPEC_RATE)

    result = compare_suite(reference_platform, suite_entries(reference_config), WorkloadKind.SPEC_RATE, params)

    assert result.mean_perf_delta_pct == pytest.approx(5.06, abs=0.3)


def test_suite_gain_meets_the_acceptance_threshold(reference_config, reference_platform) -> None:
    params = workload_params(reference_config, WorkloadKind.SPEC_BASE)

    result = compare_suite(reference_platform, suite_entries(reference_config), WorkloadKind.SPEC_BASE, params)

    assert result.mean_perf_delta_pct / 100.0 >= 0.035


def test_tdp_trends(reference_config, reference_platform) -> None:
    params = workload_params(reference_config, WorkloadKind.SPEC_BASE, intervals=20)

    table = tdp_sweep(reference_platform, [91.0, 35.0, 65.0, 45.0], suite_entries(reference_config), params)

    assert [row.tdp for row in table.rows] == [35.0, 45.0, 65.0, 91.0]
    assert table.base_non_increasing()
    assert table.rate_non_decreasing()
    assert table.row_for(35.0).graphics_delta_pct == pytest.approx((1050 / 1075 - 1.0) * 100.0)
    for tdp in (45.0, 65.0, 91.0):
        assert table.row_for(tdp).graphics_delta_pct == pytest.approx(0.0, abs=1e-9)


def test_graphics_frequencies_at_35w(reference_config, reference_platform) -> None:
    params = workload_params(reference_config, WorkloadKind.GRAPHICS, intervals=10)
    trace = gen_workload(WorkloadKind.GRAPHICS, params, seed=0)

    result = compare_modes(reference_platform.with_tdp(35.0), trace)

    assert result.normal.intervals[0].point.graphics_frequency == pytest.approx(1075e6)
    assert result.bypass.intervals[0].point.graphics_frequency == pytest.approx(1050e6)


def test_mostly_idle_workload_saves_power_with_c8(reference_config, reference_platform) -> None:
    params = workload_params(reference_config, WorkloadKind.RMT)
    trace = gen_workload(WorkloadKind.RMT, params, seed=0)
    bypassed = reference_platform.with_mode(PmuMode.BYPASS)

    result = compare_caps(bypassed, trace, PackageCState.C7, PackageCState.C8)

    assert result.baseline.residency_power == pytest.approx(1.872)
    assert result.candidate.residency_power == pytest.approx(0.585)
    assert result.reduction_pct == pytest.approx(68.75)


def test_energy_star_mix_saves_power_with_c8(reference_config, reference_platform) -> None:
    params = workload_params(reference_config, WorkloadKind.ENERGY_STAR)
    trace = gen_workload(WorkloadKind.ENERGY_STAR, params, seed=0)
    bypassed = reference_platform.with_mode(PmuMode.BYPASS)

    result = compare_caps(bypassed, trace, PackageCState.C7, PackageCState.C8)

    assert result.reduction_pct == pytest.approx((2.57 - 1.725) / 2.57 * 100.0)


def test_reference_peak_impedances(reference_platform) -> None:
    z_gated = reference_platform.z_peak(PmuMode.NORMAL)
    z_bypassed = reference_platform.z_peak(PmuMode.BYPASS)

    assert z_gated == pytest.approx(5.043e-3, rel=0.03)
    assert z_bypassed == pytest.approx(2.444e-3, rel=0.03)
