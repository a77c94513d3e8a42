from __future__ import annotations

import json
import logging
from pathlib import Path

import pytest
import yaml
from click.testing import CliRunner

from darksim.cli import EXIT_ASSERTION, EXIT_MODEL_ERROR, EXIT_USAGE, main
from darksim.config import REFERENCE_CONFIG_PATH, read_config_data, reference_config_text
from darksim.trace import CoreActivity, Trace, TraceInterval, write_trace


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


@pytest.fixture
def config_file(tmp_path: Path) -> Path:
    path = tmp_path / "darksim.yaml"
    path.write_text(reference_config_text(), encoding="utf-8")
    return path


def _gen_trace(runner: CliRunner, config_file: Path, out: Path, kind: str = "spec-base", intervals: int = 5) -> Path:
    result = runner.invoke(
        main,
        [
            "gen-trace",
            "--config", str(config_file),
            "--kind", kind,
            "--seed", "1",
            "--mem-frac", "0",
            "--intervals", str(intervals),
            "--out", str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    return out


def test_init_writes_the_reference_config(runner: CliRunner, tmp_path: Path) -> None:
    target = tmp_path / "platform.yaml"

    result = runner.invoke(main, ["init", "--out", str(target)])

    assert result.exit_code == 0, result.output
    assert target.read_text(encoding="utf-8") == reference_config_text()


def test_init_keeps_an_existing_file_without_force(runner: CliRunner, tmp_path: Path) -> None:
    target = tmp_path / "platform.yaml"
    target.write_text("mine", encoding="utf-8")

    kept = runner.invoke(main, ["init", "--out", str(target)])
    assert kept.exit_code == 0
    assert target.read_text(encoding="utf-8") == "mine"

    forced = runner.invoke(main, ["init", "--out", str(target), "--force"])
    assert forced.exit_code == 0
    assert target.read_text(encoding="utf-8") == reference_config_text()


def test_missing_config_option_is_a_usage_error(runner: CliRunner) -> None:
    result = runner.invoke(main, ["check"])

    assert result.exit_code == EXIT_USAGE


def test_invalid_config_lists_the_offending_fields(runner: CliRunner, tmp_path: Path) -> None:
    data = read_config_data(REFERENCE_CONFIG_PATH)
    data["limits"]["edc_a"] = 10.0
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump(data), encoding="utf-8")

    result = runner.invoke(main, ["check", "--config", str(path)])

    assert result.exit_code == EXIT_USAGE
    assert "Invalid config" in result.output
    assert "limits" in result.output


def test_unparseable_yaml_is_a_usage_error(runner: CliRunner, tmp_path: Path) -> None:
    path = tmp_path / "broken.yaml"
    path.write_text("pdn: [unclosed\n", encoding="utf-8")

    result = runner.invoke(main, ["check", "--config", str(path)])

    assert result.exit_code == EXIT_USAGE
    assert "Unreadable config" in result.output


def test_check_passes_on_the_reference_calibration(runner: CliRunner, config_file: Path) -> None:
    result = runner.invoke(main, ["check", "--config", str(config_file)])

    assert result.exit_code == 0, result.output
    assert "FAIL" not in result.output


def test_generated_trace_runs(runner: CliRunner, config_file: Path, tmp_path: Path) -> None:
    trace_path = _gen_trace(runner, config_file, tmp_path / "base.csv")
    out = tmp_path / "reports" / "base-run.csv"

    result = runner.invoke(
        main,
        ["run", "--config", str(config_file), "--trace", str(trace_path), "--out", str(out), "--mode", "normal"],
    )

    assert result.exit_code == 0, result.output
    assert out.exists()
    assert (tmp_path / "reports" / "base-run.summary.json").exists()
    summary = json.loads((tmp_path / "reports" / "base-run.summary.json").read_text(encoding="utf-8"))
    assert summary["mode"] == "normal"


def test_gen_trace_default_name(runner: CliRunner, config_file: Path, tmp_path: Path) -> None:
    with runner.isolated_filesystem(temp_dir=tmp_path):
        result = runner.invoke(
            main, ["gen-trace", "--config", str(config_file), "--kind", "rmt", "--seed", "4", "--intervals", "200"]
        )

        assert result.exit_code == 0, result.output
        assert Path("rmt-seed4.csv").exists()


def test_compare_assertions_set_the_exit_code(runner: CliRunner, config_file: Path, tmp_path: Path) -> None:
    trace_path = _gen_trace(runner, config_file, tmp_path / "base.csv")
    base_args = ["compare", "--config", str(config_file), "--trace", str(trace_path), "--out", str(tmp_path / "c.csv")]

    passing = runner.invoke(main, [*base_args, "--assert", "perf_delta_min=0.035"])
    failing = runner.invoke(main, [*base_args, "--assert", "perf_delta_min=0.5"])

    assert passing.exit_code == 0, passing.output
    assert failing.exit_code == EXIT_ASSERTION
    assert "assertion failed" in failing.output


def test_malformed_assertion_is_a_usage_error(runner: CliRunner, config_file: Path, tmp_path: Path) -> None:
    trace_path = _gen_trace(runner, config_file, tmp_path / "base.csv")

    result = runner.invoke(
        main,
        [
            "compare", "--config", str(config_file), "--trace", str(trace_path),
            "--out", str(tmp_path / "c.csv"), "--assert", "perf_delta=0.1",
        ],
    )

    assert result.exit_code == EXIT_USAGE


def test_compare_rejects_trace_and_suite_together(runner: CliRunner, config_file: Path, tmp_path: Path) -> None:
    trace_path = _gen_trace(runner, config_file, tmp_path / "base.csv")

    result = runner.invoke(
        main,
        [
            "compare", "--config", str(config_file), "--trace", str(trace_path),
            "--suite", "base", "--out", str(tmp_path / "c.csv"),
        ],
    )

    assert result.exit_code == EXIT_USAGE


def test_compare_caps_on_generated_energy_star_trace(runner: CliRunner, config_file: Path, tmp_path: Path) -> None:
    out = tmp_path / "caps.json"

    result = runner.invoke(
        main,
        [
            "compare", "--config", str(config_file), "--caps", "C7:C8", "--mode", "bypass",
            "--intervals", "100", "--out", str(out), "--format", "json", "--assert", "power_reduction_min=0.3",
        ],
    )

    assert result.exit_code == 0, result.output
    payload = json.loads(out.read_text(encoding="utf-8"))
    assert payload["reduction_pct"] > 30.0


def test_bad_caps_value_is_a_usage_error(runner: CliRunner, config_file: Path, tmp_path: Path) -> None:
    result = runner.invoke(
        main, ["compare", "--config", str(config_file), "--caps", "C7", "--out", str(tmp_path / "x.csv")]
    )

    assert result.exit_code == EXIT_USAGE


def test_suite_compare_with_short_traces(runner: CliRunner, config_file: Path, tmp_path: Path) -> None:
    out = tmp_path / "suite.csv"

    result = runner.invoke(
        main, ["compare", "--config", str(config_file), "--suite", "base", "--intervals", "3", "--out", str(out)]
    )

    assert result.exit_code == 0, result.output
    assert len(out.read_text(encoding="utf-8").splitlines()) == 13


def test_sweep_writes_the_trend(runner: CliRunner, config_file: Path, tmp_path: Path) -> None:
    out = tmp_path / "trend.json"

    result = runner.invoke(
        main,
        [
            "sweep", "--config", str(config_file), "--tdp", "35", "--tdp", "91",
            "--intervals", "3", "--out", str(out), "--format", "json",
        ],
    )

    assert result.exit_code == 0, result.output
    payload = json.loads(out.read_text(encoding="utf-8"))
    assert [row["tdp_w"] for row in payload["rows"]] == [35.0, 91.0]


@pytest.mark.parametrize(
    "args",
    [
        ["sweep", "--tdp", "20", "--intervals", "3"],
        ["sweep", "--tdp", "35", "--tdp", "125", "--intervals", "3"],
        ["compare", "--tdp", "150", "--intervals", "3"],
    ],
)
def test_tdp_outside_the_calibrated_range_is_a_usage_error(
    runner: CliRunner, config_file: Path, tmp_path: Path, args: list
) -> None:
    result = runner.invoke(main, [*args, "--config", str(config_file), "--out", str(tmp_path / "out.csv")])

    assert result.exit_code == EXIT_USAGE
    assert not (tmp_path / "out.csv").exists()


def test_tdp_is_checked_against_the_config_anchors(runner: CliRunner, tmp_path: Path) -> None:
    data = read_config_data(REFERENCE_CONFIG_PATH)
    data["guardband"]["reliability_adder"]["tdp_low_w"] = 45
    data["workloads"]["tdps"] = [45, 65, 91]
    config_file = tmp_path / "narrow.yaml"
    config_file.write_text(yaml.safe_dump(data), encoding="utf-8")
    trace_path = _gen_trace(runner, config_file, tmp_path / "base.csv")

    result = runner.invoke(
        main,
        [
            "run", "--config", str(config_file), "--trace", str(trace_path),
            "--tdp", "40", "--out", str(tmp_path / "r.csv"),
        ],
    )

    assert result.exit_code == EXIT_USAGE
    assert "calibrated range" in result.output


def test_unwritable_output_exits_with_model_error(
    runner: CliRunner, config_file: Path, tmp_path: Path, mocker
) -> None:
    trace_path = _gen_trace(runner, config_file, tmp_path / "base.csv")
    mocker.patch("darksim.report.atomic_write_text", side_effect=PermissionError(13, "denied"))

    result = runner.invoke(
        main,
        ["run", "--config", str(config_file), "--trace", str(trace_path), "--out", str(tmp_path / "r.csv")],
    )

    assert result.exit_code == EXIT_MODEL_ERROR
    assert "Could not write output" in result.output


def test_trace_core_count_must_match_the_platform(runner: CliRunner, config_file: Path, tmp_path: Path) -> None:
    two_cores = Trace(intervals=(TraceInterval(1e-3, (CoreActivity(1.0), CoreActivity())),))
    trace_path = write_trace(two_cores, tmp_path / "two.csv")

    result = runner.invoke(
        main,
        ["run", "--config", str(config_file), "--trace", str(trace_path), "--out", str(tmp_path / "r.csv")],
    )

    assert result.exit_code == EXIT_MODEL_ERROR


def test_impedance_export(runner: CliRunner, config_file: Path, tmp_path: Path) -> None:
    out = tmp_path / "z.csv"

    result = runner.invoke(
        main,
        [
            "impedance", "--config", str(config_file), "--sweep", "1e3:1e9:60",
            "--topology", "bypassed", "--out", str(out),
        ],
    )

    assert result.exit_code == 0, result.output
    assert "peak" in result.output
    assert len(out.read_text(encoding="utf-8").splitlines()) == 61


@pytest.mark.parametrize(("topology", "exit_code"), [("gated", EXIT_ASSERTION), ("bypassed", 0)])
def test_impedance_target_screening(
    runner: CliRunner, config_file: Path, tmp_path: Path, topology: str, exit_code: int
) -> None:
    out = tmp_path / "z.csv"

    # 1.12 V * 12.5% / 40 A = 3.5 mOhm, between the bypassed and gated peaks
    result = runner.invoke(
        main,
        [
            "impedance", "--config", str(config_file), "--topology", topology,
            "--ripple-pct", "12.5", "--out", str(out),
        ],
    )

    assert result.exit_code == exit_code, result.output
    assert out.exists()
    assert (tmp_path / "z.violations.csv").exists() == (exit_code == EXIT_ASSERTION)


def test_impedance_current_step_needs_a_ripple(runner: CliRunner, config_file: Path, tmp_path: Path) -> None:
    result = runner.invoke(
        main,
        ["impedance", "--config", str(config_file), "--current-step-a", "30", "--out", str(tmp_path / "z.csv")],
    )

    assert result.exit_code == EXIT_USAGE


def test_impedance_rejects_a_bad_sweep(runner: CliRunner, config_file: Path, tmp_path: Path) -> None:
    result = runner.invoke(
        main, ["impedance", "--config", str(config_file), "--sweep", "1e9:1e3:10", "--out", str(tmp_path / "z.csv")]
    )

    assert result.exit_code == EXIT_USAGE


@pytest.mark.parametrize(("value", "level"), [("debug", logging.DEBUG), ("chatty", logging.WARNING)])
def test_log_level_comes_from_the_environment(
    runner: CliRunner, tmp_path: Path, monkeypatch, mocker, value: str, level: int
) -> None:
    monkeypatch.setenv("DARKSIM_LOG", value)
    basic_config = mocker.patch("darksim.cli.logging.basicConfig")

    result = runner.invoke(main, ["init", "--out", str(tmp_path / "p.yaml")])

    assert result.exit_code == 0, result.output
    assert basic_config.call_args.kwargs["level"] == level
