from __future__ import annotations

import copy
from pathlib import Path

import pytest
import yaml
from pydantic import ValidationError

from darksim.config import REFERENCE_CONFIG_PATH, load_config, read_config_data, reference_config_text
from darksim.cstates import PackageCState
from darksim.modes import PmuMode
from darksim.models import AppConfig
from darksim.runtime import build_platform, build_runtime, select_mode, suite_entries, workload_params
from darksim.workloads import WorkloadKind

REFERENCE_DATA = read_config_data(REFERENCE_CONFIG_PATH)


def _make_data() -> dict:
    return copy.deepcopy(REFERENCE_DATA)


def _write_config(tmp_path: Path, data: dict) -> Path:
    path = tmp_path / "platform.yaml"
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return path


def test_reference_config_loads(reference_config) -> None:
    assert reference_config.platform.segment == "desktop"
    assert reference_config.platform.tdp_w == 91.0
    assert reference_config.pdn.cores == 4
    assert [row.level for row in reference_config.guardband.levels] == [1, 2, 3]
    assert len(suite_entries(reference_config)) == 12


def test_reference_text_matches_the_shipped_file() -> None:
    assert yaml.safe_load(reference_config_text()) == REFERENCE_DATA


def test_reference_mix_keeps_the_off_hint() -> None:
    assert set(REFERENCE_DATA["workloads"]["energy_star_mix"]) == {"off", "sleep", "long_idle", "short_idle"}


def test_bare_off_key_in_yaml_is_accepted(tmp_path: Path) -> None:
    text = reference_config_text().replace('{"off": 0.45,', "{off: 0.45,")
    assert '"off"' not in text
    path = tmp_path / "platform.yaml"
    path.write_text(text, encoding="utf-8")

    config = load_config(path)

    assert config.workloads.energy_star_mix["off"] == pytest.approx(0.45)


def test_fuse_selects_the_mode() -> None:
    data = _make_data()
    data["platform"]["fuse"] = 0

    assert select_mode(AppConfig.model_validate(data)) is PmuMode.NORMAL
    data["platform"]["fuse"] = 1
    assert select_mode(AppConfig.model_validate(data)) is PmuMode.BYPASS


def test_explicit_mode_overrides_the_fuse() -> None:
    data = _make_data()
    data["platform"]["fuse"] = 1
    data["platform"]["mode"] = "normal"

    assert select_mode(AppConfig.model_validate(data)) is PmuMode.NORMAL


def test_package_cap_follows_segment_unless_set() -> None:
    data = _make_data()
    data["platform"]["segment"] = "mobile"
    assert build_platform(AppConfig.model_validate(data)).package_cap is PackageCState.C10

    data["platform"]["package_cap"] = 7
    assert build_platform(AppConfig.model_validate(data)).package_cap is PackageCState.C7

    desktop = _make_data()
    desktop["platform"]["c8_enabled"] = False
    assert build_platform(AppConfig.model_validate(desktop)).package_cap is PackageCState.C7


def test_state_labels_are_normalized() -> None:
    data = _make_data()
    data["cstates"]["power"][0]["state"] = " c0 "

    config = AppConfig.model_validate(data)

    assert config.cstates.power[0].state == "C0"


def test_workload_params_pick_kind_specific_lengths(reference_config) -> None:
    assert workload_params(reference_config, WorkloadKind.RMT).intervals == 10_000
    assert workload_params(reference_config, WorkloadKind.ENERGY_STAR).intervals == 1000
    assert workload_params(reference_config, WorkloadKind.SPEC_BASE).intervals == 200
    assert workload_params(reference_config, WorkloadKind.SPEC_BASE, intervals=7).intervals == 7


def _edit_power_non_monotone(data: dict) -> None:
    data["cstates"]["power"][5]["bypass_w"] = 5.0


def _edit_edc_below_tdc(data: dict) -> None:
    data["limits"]["edc_a"] = 10.0


def _edit_cdyn_levels(data: dict) -> None:
    data["power"]["cdyn"] = data["power"]["cdyn"][:2]


def _edit_tdp_out_of_range(data: dict) -> None:
    data["platform"]["tdp_w"] = 125.0


def _edit_ungate_latency(data: dict) -> None:
    data["cstates"]["ungate_latency_ns"] = 50


def _edit_knot_order(data: dict) -> None:
    data["curve"]["knots"].reverse()


def _edit_missing_latency(data: dict) -> None:
    data["cstates"]["latency"] = data["cstates"]["latency"][1:]


def _edit_knot_off_grid(data: dict) -> None:
    data["curve"]["knots"][0]["freq_mhz"] = 850


def _edit_exit_latency_order(data: dict) -> None:
    data["cstates"]["latency"][-1]["exit_us"] = 1


def _edit_mix_sum(data: dict) -> None:
    data["workloads"]["energy_star_mix"] = {"off": 0.5, "sleep": 0.1}


def _edit_c7_ratio(data: dict) -> None:
    data["cstates"]["min_c7_leakage_ratio"] = 10.0


@pytest.mark.parametrize(
    ("edit", "message"),
    [
        (_edit_power_non_monotone, "strictly decrease"),
        (_edit_edc_below_tdc, "edc_a must be at least tdc_a"),
        (_edit_cdyn_levels, "do not match guardband levels"),
        (_edit_tdp_out_of_range, "outside the reliability-adder range"),
        (_edit_ungate_latency, "ungate_latency_ns"),
        (_edit_knot_order, "strictly increasing"),
        (_edit_missing_latency, "latency table is missing C2"),
        (_edit_mix_sum, "sum to 1"),
        (_edit_knot_off_grid, "bin grid"),
        (_edit_exit_latency_order, "exit_us must not decrease"),
        (_edit_c7_ratio, "C7 bypass power"),
    ],
)
def test_invalid_configs_are_rejected(tmp_path: Path, edit, message: str) -> None:
    data = _make_data()
    edit(data)

    with pytest.raises(ValidationError, match=message):
        load_config(_write_config(tmp_path, data))


def test_missing_config_file(tmp_path: Path) -> None:
    with pytest.raises(FileNotFoundError, match="darksim init"):
        load_config(tmp_path / "nope.yaml")


def test_non_mapping_config_is_rejected(tmp_path: Path) -> None:
    path = tmp_path / "platform.yaml"
    path.write_text("- just\n- a list\n", encoding="utf-8")

    with pytest.raises(ValueError, match="top level must be a mapping"):
        load_config(path)


def test_build_runtime_resolves_the_path(tmp_path: Path) -> None:
    path = _write_config(tmp_path, _make_data())

    runtime = build_runtime(path)

    assert runtime.config_path == path.resolve()
    assert runtime.platform.mode is PmuMode.BYPASS
    assert runtime.platform.limits.tdp == 91.0
