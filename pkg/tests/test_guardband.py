from __future__ import annotations

import numpy as np
import pytest

from darksim.errors import ModelError, VmaxExceeded
from darksim.guardband import (
    GuardbandModel,
    LoadLine,
    VirusLevel,
    derive_levels,
    droop_current,
    guardband_voltage,
    level_transition_delta,
    load_line_voltage,
    package_level,
    reliability_adder_for,
    vr_setpoint,
)
from darksim.modes import PmuMode


def _make_model(**overrides) -> GuardbandModel:
    levels = derive_levels(2e-3, [(1, 55.0, None, 4.2e9), (2, 70.0, None, 3.6e9), (3, 100.0, None, 2.8e9)])
    return GuardbandModel(load_line=LoadLine(2e-3), levels=levels, **overrides)


def test_load_line_voltage() -> None:
    assert load_line_voltage(1.0, 50.0, LoadLine(2e-3)) == pytest.approx(0.9)


def test_load_line_voltage_over_a_random_grid() -> None:
    rng = np.random.default_rng(0)
    grid = zip(rng.uniform(0.6, 1.4, 1000), rng.uniform(0.0, 100.0, 1000), rng.uniform(0.5e-3, 3e-3, 1000))
    for vcc, icc, r_ll in grid:
        expected = vcc - r_ll * icc
        assert load_line_voltage(float(vcc), float(icc), LoadLine(float(r_ll))) == pytest.approx(expected, rel=1e-12)


def test_load_line_voltage_rejects_collapse() -> None:
    with pytest.raises(ModelError):
        load_line_voltage(0.1, 100.0, LoadLine(2e-3))


def test_derived_level_steps_follow_load_line() -> None:
    gb = _make_model()

    assert [lvl.delta_v for lvl in gb.levels] == pytest.approx([0.110, 0.030, 0.060])
    assert gb.top.level_id == 3
    assert gb.level(2).max_freq == 3.6e9


def test_explicit_delta_is_kept() -> None:
    (level,) = derive_levels(2e-3, [(1, 50.0, 0.012, None)])

    assert level.delta_v == 0.012
    assert level.max_freq is None


def test_levels_must_grow_in_current() -> None:
    with pytest.raises(ModelError):
        GuardbandModel(
            load_line=LoadLine(2e-3),
            levels=(VirusLevel(1, 70.0, 0.0), VirusLevel(2, 55.0, 0.0)),
        )


def test_unknown_level_lookup_fails() -> None:
    with pytest.raises(ModelError):
        _make_model().level(7)


def test_droop_current_fraction_or_override() -> None:
    gb = _make_model()

    assert droop_current(gb.top, gb) == pytest.approx(40.0)
    assert droop_current(gb.top, _make_model(droop_delta_i=25.0)) == 25.0


def test_guardband_components_add_up() -> None:
    gb = _make_model(reliability_adder=0.005)

    vgb = guardband_voltage(gb.top, gb, z_peak=2.5e-3)

    assert vgb == pytest.approx(0.200 + 0.100 + 0.005)


def test_top_level_setpoint_reduction_in_reference_range() -> None:
    normal = _make_model()
    bypassed = _make_model(reliability_adder=0.005)

    v_normal = vr_setpoint(0.7, normal.top, normal, z_peak=5.043e-3)
    v_bypass = vr_setpoint(0.7, bypassed.top, bypassed, z_peak=2.444e-3)

    assert (v_normal - v_bypass) * 1e3 == pytest.approx(98.96, abs=0.05)


def test_setpoint_above_vmax_raises() -> None:
    gb = _make_model()

    with pytest.raises(VmaxExceeded) as excinfo:
        vr_setpoint(1.0, gb.top, gb, z_peak=5e-3, vmax=1.2)

    assert excinfo.value.vmax == 1.2
    assert excinfo.value.setpoint > 1.2


def test_level_transition_delta_is_signed() -> None:
    levels = _make_model().levels

    assert level_transition_delta(levels, 1, 3) == pytest.approx(0.090)
    assert level_transition_delta(levels, 3, 1) == pytest.approx(-0.090)
    assert level_transition_delta(levels, 2, 2) == 0.0
    with pytest.raises(ModelError):
        level_transition_delta(levels, 1, 4)


def test_reliability_adder_interpolates_for_bypass_only() -> None:
    assert reliability_adder_for(35.0, PmuMode.BYPASS) == pytest.approx(0.020)
    assert reliability_adder_for(91.0, PmuMode.BYPASS) == pytest.approx(0.005)
    assert reliability_adder_for(63.0, PmuMode.BYPASS) == pytest.approx(0.0125)
    assert reliability_adder_for(63.0, PmuMode.NORMAL) == 0.0


@pytest.mark.parametrize("tdp", [20.0, 120.0])
def test_reliability_adder_rejects_out_of_range_tdp(tdp: float) -> None:
    with pytest.raises(ModelError):
        reliability_adder_for(tdp, PmuMode.BYPASS)


def test_package_level_takes_the_higher_request() -> None:
    gb = _make_model()

    assert package_level(gb, 0).level_id == 1
    assert package_level(gb, 1).level_id == 1
    assert package_level(gb, 2).level_id == 2
    assert package_level(gb, 8).level_id == 3
    assert package_level(gb, 1, requested=[3]).level_id == 3
    assert package_level(gb, 3, requested=[1]).level_id == 3
