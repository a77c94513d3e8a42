from __future__ import annotations

import csv
import io
import json
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Sequence, Tuple

from .cstates import cstate_power
from .errors import DarkSimError
from .paths import atomic_write_text, companion_path
from .pdn import ImpedanceProfile
from .power import limits_summary
from .sim import (
    CapComparison,
    GuardbandStudyRow,
    ModeComparison,
    PlatformConfig,
    SimReport,
    SuiteComparison,
    TrendTable,
)


class ReportFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


INTERVAL_FIELDS = [
    "interval",
    "t_s",
    "duration_s",
    "state",
    "level",
    "freq_hz",
    "voltage_v",
    "gfx_freq_hz",
    "gfx_voltage_v",
    "cores_w",
    "graphics_w",
    "uncore_w",
    "total_w",
    "throughput",
    "lost_s",
    "degenerate",
]
RESIDENCY_FIELDS = ["state", "seconds", "fraction", "avg_contribution_w"]
VIOLATION_FIELDS = ["interval", "limit", "amount"]
IMPEDANCE_FIELDS = ["freq_hz", "mag_ohm", "phase_rad"]
TREND_FIELDS = ["tdp_w", "base_delta_pct", "rate_delta_pct", "graphics_delta_pct"]


def _csv_text(fields: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _json_text(payload: Any) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def interval_rows(report: SimReport) -> List[Dict[str, Any]]:
    rows = []
    for rec in report.intervals:
        point = rec.point
        rows.append(
            {
                "interval": rec.index,
                "t_s": rec.start,
                "duration_s": rec.duration,
                "state": rec.state.label,
                "level": point.level_id if point else "",
                "freq_hz": point.frequency if point else 0.0,
                "voltage_v": point.voltage if point else 0.0,
                "gfx_freq_hz": point.graphics_frequency if point else 0.0,
                "gfx_voltage_v": point.graphics_voltage if point else 0.0,
                "cores_w": rec.breakdown.cores,
                "graphics_w": rec.breakdown.graphics,
                "uncore_w": rec.breakdown.uncore,
                "total_w": rec.breakdown.total,
                "throughput": rec.throughput,
                "lost_s": rec.lost_time,
                "degenerate": int(bool(point and point.degenerate)),
            }
        )
    return rows


def residency_rows(report: SimReport, platform: PlatformConfig) -> List[Dict[str, Any]]:
    rows = []
    for state, seconds in report.residency.items():
        fraction = seconds / report.total_time
        watts = cstate_power(state, report.mode, platform.cstate_power)
        rows.append(
            {
                "state": state.label,
                "seconds": seconds,
                "fraction": fraction,
                "avg_contribution_w": fraction * watts,
            }
        )
    return rows


def violation_rows(report: SimReport) -> List[Dict[str, Any]]:
    return [
        {"interval": index, "limit": violation.limit.value, "amount": violation.amount}
        for index, violation in report.violations
    ]


def run_summary(report: SimReport) -> Dict[str, Any]:
    return {
        "mode": report.mode.value,
        "tdp_w": report.tdp,
        "package_cap": report.package_cap.label,
        "trace": report.trace_name,
        "intervals": len(report.intervals),
        "total_time_s": report.total_time,
        "total_energy_j": report.total_energy,
        "average_power_w": report.average_power,
        "residency_power_w": report.residency_power,
        "performance": report.performance,
        "degenerate_intervals": report.degenerate_intervals,
        "violations": limits_summary([v for _, v in report.violations]),
        "residency": {state.label: seconds / report.total_time for state, seconds in report.residency.items()},
    }


def write_run_report(
    report: SimReport,
    platform: PlatformConfig,
    out_path: Path,
    fmt: ReportFormat = ReportFormat.CSV,
) -> List[Path]:
    """Write one run. CSV produces a file set next to out_path; JSON a single document."""
    if ReportFormat(fmt) is ReportFormat.JSON:
        payload = run_summary(report)
        payload["intervals_detail"] = interval_rows(report)
        payload["residency_detail"] = residency_rows(report, platform)
        payload["violations_detail"] = violation_rows(report)
        return [atomic_write_text(out_path, _json_text(payload))]

    return [
        atomic_write_text(out_path, _csv_text(INTERVAL_FIELDS, interval_rows(report))),
        atomic_write_text(
            companion_path(out_path, "residency"), _csv_text(RESIDENCY_FIELDS, residency_rows(report, platform))
        ),
        atomic_write_text(companion_path(out_path, "violations"), _csv_text(VIOLATION_FIELDS, violation_rows(report))),
        atomic_write_text(companion_path(out_path, "summary", ".json"), _json_text(run_summary(report))),
    ]


def comparison_summary(result: ModeComparison) -> Dict[str, Any]:
    return {
        "perf_delta_pct": result.perf_delta_pct,
        "power_delta_pct": result.power_delta_pct,
        "residency_delta": {state.label: delta for state, delta in result.residency_delta.items()},
        "normal": run_summary(result.normal),
        "bypass": run_summary(result.bypass),
    }


def _comparison_rows(result: ModeComparison) -> List[Dict[str, Any]]:
    pairs = [
        ("performance", result.normal.performance, result.bypass.performance),
        ("average_power_w", result.normal.average_power, result.bypass.average_power),
        ("residency_power_w", result.normal.residency_power, result.bypass.residency_power),
    ]
    rows = [
        {"metric": name, "normal": n, "bypass": b, "delta_pct": (b / n - 1) * 100 if n else 0.0}
        for name, n, b in pairs
    ]
    for state, delta in result.residency_delta.items():
        rows.append(
            {
                "metric": f"residency_{state.label}",
                "normal": result.normal.residency_fraction(state),
                "bypass": result.bypass.residency_fraction(state),
                "delta_pct": delta * 100,
            }
        )
    return rows


def write_comparison(result: ModeComparison, out_path: Path, fmt: ReportFormat = ReportFormat.CSV) -> List[Path]:
    if ReportFormat(fmt) is ReportFormat.JSON:
        return [atomic_write_text(out_path, _json_text(comparison_summary(result)))]
    text = _csv_text(["metric", "normal", "bypass", "delta_pct"], _comparison_rows(result))
    return [atomic_write_text(out_path, text)]


def suite_summary(result: SuiteComparison) -> Dict[str, Any]:
    return {
        "kind": result.kind.value,
        "tdp_w": result.tdp,
        "mean_perf_delta_pct": result.mean_perf_delta_pct,
        "max_perf_delta_pct": result.max_perf_delta_pct,
        "benchmarks": [
            {"name": r.name, "perf_delta_pct": r.perf_delta_pct, "power_delta_pct": r.power_delta_pct}
            for r in result.rows
        ],
    }


def write_suite(result: SuiteComparison, out_path: Path, fmt: ReportFormat = ReportFormat.CSV) -> List[Path]:
    if ReportFormat(fmt) is ReportFormat.JSON:
        return [atomic_write_text(out_path, _json_text(suite_summary(result)))]
    rows = [
        {"name": r.name, "perf_delta_pct": r.perf_delta_pct, "power_delta_pct": r.power_delta_pct}
        for r in result.rows
    ]
    return [atomic_write_text(out_path, _csv_text(["name", "perf_delta_pct", "power_delta_pct"], rows))]


def write_trend(table: TrendTable, out_path: Path, fmt: ReportFormat = ReportFormat.CSV) -> List[Path]:
    rows = [
        {
            "tdp_w": r.tdp,
            "base_delta_pct": r.base_delta_pct,
            "rate_delta_pct": r.rate_delta_pct,
            "graphics_delta_pct": r.graphics_delta_pct,
        }
        for r in table.rows
    ]
    if ReportFormat(fmt) is ReportFormat.JSON:
        payload = {
            "rows": rows,
            "base_non_increasing": table.base_non_increasing(),
            "rate_non_decreasing": table.rate_non_decreasing(),
        }
        return [atomic_write_text(out_path, _json_text(payload))]
    return [atomic_write_text(out_path, _csv_text(TREND_FIELDS, rows))]


def write_guardband_study(
    rows: Sequence[GuardbandStudyRow], offset_v: float, out_path: Path, fmt: ReportFormat = ReportFormat.CSV
) -> List[Path]:
    table = [{"tdp_w": r.tdp, "perf_gain_pct": r.perf_gain_pct} for r in rows]
    if ReportFormat(fmt) is ReportFormat.JSON:
        return [atomic_write_text(out_path, _json_text({"offset_mv": offset_v * 1e3, "rows": table}))]
    return [atomic_write_text(out_path, _csv_text(["tdp_w", "perf_gain_pct"], table))]


def cap_summary(result: CapComparison) -> Dict[str, Any]:
    return {
        "baseline_cap": result.baseline.package_cap.label,
        "candidate_cap": result.candidate.package_cap.label,
        "baseline_power_w": result.baseline.residency_power,
        "candidate_power_w": result.candidate.residency_power,
        "reduction_pct": result.reduction_pct,
    }


def write_caps(result: CapComparison, out_path: Path, fmt: ReportFormat = ReportFormat.CSV) -> List[Path]:
    summary = cap_summary(result)
    if ReportFormat(fmt) is ReportFormat.JSON:
        return [atomic_write_text(out_path, _json_text(summary))]
    return [atomic_write_text(out_path, _csv_text(list(summary), [summary]))]


def write_impedance(
    profile: ImpedanceProfile, out_path: Path, violations: Sequence[Tuple[float, float]] = ()
) -> List[Path]:
    """The profile itself, plus `<out>.violations.csv` when points sit above a target."""
    rows = ({"freq_hz": f, "mag_ohm": mag, "phase_rad": phase} for f, mag, phase in profile.samples())
    written = [atomic_write_text(out_path, _csv_text(IMPEDANCE_FIELDS, rows))]
    if violations:
        over = ({"freq_hz": f, "mag_ohm": mag} for f, mag in violations)
        text = _csv_text(IMPEDANCE_FIELDS[:2], over)
        written.append(atomic_write_text(companion_path(out_path, "violations"), text))
    return written


def parse_assertions(items: Iterable[str]) -> List[Tuple[str, float]]:
    """`perf_delta_min=0.035` -> [("perf_delta_min", 0.035)]."""
    parsed = []
    for item in items:
        key, sep, raw = item.partition("=")
        if not sep or not key.endswith(("_min", "_max")):
            raise DarkSimError(f"Assertion {item!r} must look like <metric>_min=<value> or <metric>_max=<value>")
        try:
            parsed.append((key.strip(), float(raw)))
        except ValueError:
            raise DarkSimError(f"Assertion {item!r} has a non-numeric bound") from None
    return parsed


def check_assertions(metrics: Mapping[str, float], assertions: Sequence[Tuple[str, float]]) -> List[str]:
    """Human-readable failures; an unknown metric counts as a failure."""
    failures = []
    for key, bound in assertions:
        metric, _, side = key.rpartition("_")
        if metric not in metrics:
            failures.append(f"{metric}: unknown metric (available: {', '.join(sorted(metrics))})")
            continue
        value = metrics[metric]
        if side == "min" and value < bound:
            failures.append(f"{metric}={value:.6g} is below {bound:.6g}")
        elif side == "max" and value > bound:
            failures.append(f"{metric}={value:.6g} is above {bound:.6g}")
    return failures


def run_metrics(report: SimReport) -> Dict[str, float]:
    return {
        "performance": report.performance,
        "average_power_w": report.average_power,
        "residency_power_w": report.residency_power,
        "violations": float(len(report.violations)),
    }


def comparison_metrics(result: ModeComparison) -> Dict[str, float]:
    return {
        "perf_delta": result.perf_delta_pct / 100.0,
        "power_delta": result.power_delta_pct / 100.0,
        "violations": float(len(result.normal.violations) + len(result.bypass.violations)),
    }


def suite_metrics(result: SuiteComparison) -> Dict[str, float]:
    return {"perf_delta": result.mean_perf_delta_pct / 100.0, "perf_delta_peak": result.max_perf_delta_pct / 100.0}


def cap_metrics(result: CapComparison) -> Dict[str, float]:
    return {"power_reduction": result.reduction_pct / 100.0}


def trend_metrics(table: TrendTable) -> Dict[str, float]:
    metrics = {
        "base_trend_ok": float(table.base_non_increasing()),
        "rate_trend_ok": float(table.rate_non_decreasing()),
    }
    for row in table.rows:
        tag = f"{row.tdp:g}w"
        metrics[f"base_delta_{tag}"] = row.base_delta_pct / 100.0
        metrics[f"rate_delta_{tag}"] = row.rate_delta_pct / 100.0
        metrics[f"graphics_delta_{tag}"] = row.graphics_delta_pct / 100.0
    return metrics
