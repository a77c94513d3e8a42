from __future__ import annotations

import logging
import os
from dataclasses import replace
from pathlib import Path
from typing import Any, Iterable, List, Mapping, Optional, Sequence, Tuple

import click
import yaml
from pydantic import ValidationError
from rich.console import Console
from rich.panel import Panel
from rich.progress import BarColumn, Progress, SpinnerColumn, TaskProgressColumn, TextColumn, TimeElapsedColumn
from rich.table import Table

from .checks import run_checks
from .cstates import PackageCState
from .errors import DarkSimError
from .guardband import RELIABILITY_ANCHORS, droop_current
from .modes import PmuMode
from .paths import atomic_write_text, slug
from .pdn import Spacing, Topology, bypass, impedance_sweep, peak_impedance, target_impedance, violations_above
from .report import (
    ReportFormat,
    cap_metrics,
    check_assertions,
    comparison_metrics,
    parse_assertions,
    run_metrics,
    suite_metrics,
    trend_metrics,
    write_caps,
    write_comparison,
    write_guardband_study,
    write_impedance,
    write_run_report,
    write_suite,
    write_trend,
)
from .runtime import RuntimeContext, build_runtime, interval_seconds, workload_params
from .sim import compare_caps, compare_modes, run
from .trace import Trace, load_trace, write_trace
from .workflow import Workflow, WorkflowEvent
from .vfmodel import vnom_at
from .workloads import WorkloadKind, gen_workload

console = Console()

EXIT_MODEL_ERROR = 1
EXIT_USAGE = 2
EXIT_ASSERTION = 3

_LOG_LEVELS = {"DEBUG", "INFO", "WARNING", "ERROR"}


def _configure_logging() -> None:
    level = os.environ.get("DARKSIM_LOG", "WARNING").strip().upper()
    if level not in _LOG_LEVELS:
        level = "WARNING"
    logging.basicConfig(level=getattr(logging, level), format="%(levelname)s: %(message)s")


def _runtime_or_exit(
    ctx: click.Context,
    config_path: Path,
    *,
    mode: Optional[str] = None,
    tdp: Optional[float] = None,
) -> RuntimeContext:
    """
    Build the runtime from a platform file and apply command-line overrides,
    or exit with a readable diagnostic.
    """
    try:
        runtime = build_runtime(config_path)
    except FileNotFoundError as exc:
        console.print(f"[red]{exc}[/red]")
        ctx.exit(EXIT_USAGE)
        raise  # for type checkers
    except ValidationError as exc:
        console.print(f"[red]Invalid config {config_path}[/red]")
        for err in exc.errors():
            loc = ".".join(str(p) for p in err.get("loc", [])) or "<root>"
            msg = err.get("msg", "Invalid value")
            console.print(f"  - {loc}: {msg}")
        console.print("Compare against `darksim init` output for the expected layout.")
        ctx.exit(EXIT_USAGE)
        raise  # for type checkers
    except (yaml.YAMLError, ValueError) as exc:
        console.print(f"[red]Unreadable config {config_path}: {exc}[/red]")
        ctx.exit(EXIT_USAGE)
        raise  # for type checkers
    except DarkSimError as exc:
        console.print(f"[red]Config describes an infeasible platform: {exc}[/red]")
        ctx.exit(EXIT_MODEL_ERROR)
        raise  # for type checkers

    platform = runtime.platform
    if mode is not None and mode != "fuse":
        platform = platform.with_mode(PmuMode(mode))
    if tdp is not None:
        _check_tdp(runtime, tdp)
        platform = platform.with_tdp(tdp)
    return replace(runtime, platform=platform)


def _check_tdp(runtime: RuntimeContext, tdp: float) -> None:
    (lo, _), (hi, _) = runtime.platform.reliability_anchors
    if not lo <= tdp <= hi:
        raise click.BadParameter(f"{tdp:g} W is outside the calibrated range [{lo:g}, {hi:g}] W.", param_hint="--tdp")


def _fail(ctx: click.Context, exc: Exception) -> None:
    if isinstance(exc, OSError):
        console.print(f"[red]Could not write output: {exc}[/red]")
    else:
        console.print(f"[red]{exc}[/red]")
    ctx.exit(EXIT_MODEL_ERROR)


def _parse_assert_option(ctx: click.Context, param: click.Parameter, value: Tuple[str, ...]) -> List[Tuple[str, float]]:
    try:
        return parse_assertions(value)
    except DarkSimError as exc:
        raise click.BadParameter(str(exc), ctx=ctx, param=param) from None


def _parse_caps(ctx: click.Context, param: click.Parameter, value: Optional[str]):
    if value is None:
        return None
    baseline, sep, candidate = value.partition(":")
    if not sep:
        raise click.BadParameter("expected BASELINE:CANDIDATE, e.g. C7:C8", ctx=ctx, param=param)
    try:
        return PackageCState.parse(baseline), PackageCState.parse(candidate)
    except (DarkSimError, ValueError) as exc:
        raise click.BadParameter(str(exc), ctx=ctx, param=param) from None


def _parse_sweep(ctx: click.Context, param: click.Parameter, value: Optional[str]):
    if value is None:
        return None
    parts = value.split(":")
    try:
        if len(parts) != 3:
            raise ValueError
        f_min, f_max, points = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise click.BadParameter("expected F_MIN:F_MAX:POINTS, e.g. 1e3:1e9:400", ctx=ctx, param=param) from None
    if not 0 < f_min < f_max or points < 2:
        raise click.BadParameter("need 0 < F_MIN < F_MAX and at least 2 points", ctx=ctx, param=param)
    return f_min, f_max, points


def _enforce(ctx: click.Context, metrics: Mapping[str, float], assertions: Sequence[Tuple[str, float]]) -> None:
    if not assertions:
        return
    failures = check_assertions(metrics, assertions)
    for failure in failures:
        console.print(f"[red]❌ assertion failed: {failure}[/red]")
    if failures:
        ctx.exit(EXIT_ASSERTION)
    console.print(f"[green]✓ {len(assertions)} assertion(s) passed[/green]")


def _print_written(paths: Iterable[Path]) -> None:
    for path in paths:
        console.print(f"[dim]wrote {path}[/dim]")


def _drain(events: Iterable[WorkflowEvent], title: str, total: int) -> Any:
    """Render workflow events with a progress bar and return the summary result."""
    result = None
    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TaskProgressColumn(),
        TimeElapsedColumn(),
        console=console,
        transient=True,
    ) as progress:
        task_id = progress.add_task(title, total=total)
        for event in events:
            if event.type == "processing":
                progress.update(task_id, description=f"[cyan]{event.message}[/cyan]")
            elif event.type == "completed":
                progress.advance(task_id)
                progress.console.print(f"  [green]✓ {event.message}[/green]")
            elif event.type == "warning":
                progress.console.print(f"[yellow]⚠️ {event.message}[/yellow]")
            elif event.type == "summary":
                result = event.data["result"] if event.data else None
                progress.console.print(f"[bold]{event.message}[/bold]")
    return result


def _load_trace_or_exit(ctx: click.Context, runtime: RuntimeContext, trace_path: Path) -> Trace:
    try:
        trace = load_trace(trace_path, last_interval_s=interval_seconds(runtime.config))
    except DarkSimError as exc:
        console.print(f"[red]{trace_path}: {exc}[/red]")
        ctx.exit(EXIT_MODEL_ERROR)
        raise  # for type checkers
    if trace.n_cores != runtime.platform.n_cores:
        console.print(
            f"[red]{trace_path}: trace has {trace.n_cores} cores, platform has {runtime.platform.n_cores}[/red]"
        )
        ctx.exit(EXIT_MODEL_ERROR)
    return trace


config_option = click.option(
    "--config",
    "config_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Platform calibration YAML (see `darksim init`).",
)
out_option = click.option(
    "--out",
    "out_path",
    required=True,
    type=click.Path(dir_okay=False, path_type=Path),
    help="Output file; CSV runs also write sibling .residency/.violations/.summary files.",
)
format_option = click.option(
    "--format",
    "fmt",
    type=click.Choice([f.value for f in ReportFormat]),
    default=ReportFormat.CSV.value,
    show_default=True,
)
TDP_RANGE = click.FloatRange(RELIABILITY_ANCHORS[0][0], RELIABILITY_ANCHORS[1][0])
tdp_option = click.option("--tdp", type=TDP_RANGE, help="Override the platform TDP (W).")
mode_option = click.option(
    "--mode",
    type=click.Choice(["fuse", "normal", "bypass"]),
    default=None,
    help="Override the PMU mode (default: the config's choice).",
)
seed_option = click.option(
    "--seed", type=int, default=None, help="Workload generator seed (default: the config's workloads.seed)."
)
intervals_option = click.option(
    "--intervals", type=click.IntRange(min=1), default=None, help="Intervals per generated trace."
)
assert_option = click.option(
    "--assert",
    "assertions",
    multiple=True,
    callback=_parse_assert_option,
    help="Acceptance bound such as perf_delta_min=0.035 (repeatable). Failure exits with 3.",
)


class OrderedGroup(click.Group):
    def list_commands(self, ctx: click.Context) -> list[str]:
        """Return commands in the desired order."""
        return ["init", "check", "run", "compare", "sweep", "impedance", "gen-trace"]


@click.group(cls=OrderedGroup)
@click.version_option(package_name="darksim", prog_name="darksim")
@click.pass_context
def main(ctx: click.Context) -> None:
    """Simulate power-gate bypassing on a client processor's power delivery network."""
    _configure_logging()
    ctx.ensure_object(dict)


@main.command()
@click.option(
    "--out",
    "out_path",
    type=click.Path(dir_okay=False, path_type=Path),
    default=Path("darksim.yaml"),
    show_default=True,
)
@click.option("--force", is_flag=True, help="Overwrite an existing file")
@click.pass_context
def init(ctx: click.Context, out_path: Path, force: bool) -> None:
    """Write the reference platform calibration to a YAML file."""
    from .config import reference_config_text

    target = out_path.expanduser().resolve()
    if target.exists() and not force:
        console.print(f"[yellow]{target} already exists. Use --force to overwrite.[/yellow]")
        return
    try:
        atomic_write_text(target, reference_config_text())
    except OSError as exc:
        _fail(ctx, exc)
    console.print(f"[green]Reference config written to {target}[/green]")


@main.command()
@config_option
@click.pass_context
def check(ctx: click.Context, config_path: Path) -> None:
    """Verify the calibration reproduces the expected impedance, guardband and C-state relations."""
    runtime = _runtime_or_exit(ctx, config_path)
    with console.status("[bold green]Running calibration checks...[/bold green]"):
        try:
            results = run_checks(runtime)
        except DarkSimError as exc:
            _fail(ctx, exc)

    table = Table(title="Calibration Checks", show_header=True)
    table.add_column("Check", style="bold")
    table.add_column("Status")
    table.add_column("Info")

    has_failures = False
    for res in results:
        status_style = "green" if res.ok else "red"
        status_icon = "✅" if res.ok else "❌"
        table.add_row(
            res.name,
            f"[{status_style}]{status_icon} {'OK' if res.ok else 'FAIL'}[/{status_style}]",
            res.info,
        )
        has_failures = has_failures or not res.ok

    console.print(table)
    if has_failures:
        ctx.exit(EXIT_ASSERTION)


@main.command(name="run")
@config_option
@click.option("--trace", "trace_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@out_option
@format_option
@mode_option
@tdp_option
@assert_option
@click.pass_context
def run_cmd(
    ctx: click.Context,
    config_path: Path,
    trace_path: Path,
    out_path: Path,
    fmt: str,
    mode: Optional[str],
    tdp: Optional[float],
    assertions: List[Tuple[str, float]],
) -> None:
    """Simulate one trace in one PMU mode."""
    runtime = _runtime_or_exit(ctx, config_path, mode=mode, tdp=tdp)
    trace = _load_trace_or_exit(ctx, runtime, trace_path)
    platform = runtime.platform
    try:
        with console.status(f"[bold green]Simulating {trace.name} ({len(trace)} intervals)...[/bold green]"):
            report = run(platform, trace)
        written = write_run_report(report, platform, out_path, ReportFormat(fmt))
    except (DarkSimError, OSError) as exc:
        _fail(ctx, exc)

    console.print(
        Panel(
            f"mode {report.mode.value}, cap {report.package_cap.label}, TDP {report.tdp:g} W\n"
            f"performance {report.performance:.4f}\n"
            f"average power {report.average_power:.3f} W (residency table {report.residency_power:.3f} W)\n"
            f"violations {len(report.violations)}, degenerate intervals {report.degenerate_intervals}",
            title=f"[bold]{trace.name}[/bold]",
        )
    )
    _print_written(written)
    _enforce(ctx, run_metrics(report), assertions)


@main.command()
@config_option
@click.option(
    "--trace",
    "trace_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Compare Normal and Bypass on this trace.",
)
@click.option(
    "--suite",
    type=click.Choice(["base", "rate"]),
    default=None,
    help="Compare over the configured benchmark suite (default when no trace is given).",
)
@click.option("--caps", callback=_parse_caps, default=None, help="Compare package C-state caps, e.g. C7:C8.")
@out_option
@format_option
@mode_option
@tdp_option
@seed_option
@intervals_option
@assert_option
@click.pass_context
def compare(
    ctx: click.Context,
    config_path: Path,
    trace_path: Optional[Path],
    suite: Optional[str],
    caps,
    out_path: Path,
    fmt: str,
    mode: Optional[str],
    tdp: Optional[float],
    seed: Optional[int],
    intervals: Optional[int],
    assertions: List[Tuple[str, float]],
) -> None:
    """Compare Normal against Bypass mode, or two package C-state caps."""
    if trace_path is not None and suite is not None:
        raise click.UsageError("--trace and --suite are mutually exclusive")
    if caps is not None and suite is not None:
        raise click.UsageError("--caps runs on a trace, not a suite")

    runtime = _runtime_or_exit(ctx, config_path, mode=mode, tdp=tdp)
    report_fmt = ReportFormat(fmt)
    if seed is None:
        seed = runtime.config.workloads.seed
    try:
        if caps is not None:
            if trace_path is not None:
                trace = _load_trace_or_exit(ctx, runtime, trace_path)
            else:
                params = workload_params(runtime.config, WorkloadKind.ENERGY_STAR, intervals)
                trace = gen_workload(WorkloadKind.ENERGY_STAR, params, seed)
            baseline, candidate = caps
            with console.status(f"[bold green]Comparing {baseline.label} and {candidate.label}...[/bold green]"):
                result = compare_caps(runtime.platform, trace, baseline, candidate)
            written = write_caps(result, out_path, report_fmt)
            console.print(
                f"{result.baseline.package_cap.label} {result.baseline.residency_power:.3f} W -> "
                f"{result.candidate.package_cap.label} {result.candidate.residency_power:.3f} W "
                f"([bold]{result.reduction_pct:.2f}% lower[/bold])"
            )
            metrics = cap_metrics(result)
        elif trace_path is not None:
            trace = _load_trace_or_exit(ctx, runtime, trace_path)
            with console.status(f"[bold green]Running {trace.name} in both modes...[/bold green]"):
                result = compare_modes(runtime.platform, trace)
            written = write_comparison(result, out_path, report_fmt)
            console.print(
                f"bypass vs normal: performance [bold]{result.perf_delta_pct:+.2f}%[/bold], "
                f"power {result.power_delta_pct:+.2f}%"
            )
            metrics = comparison_metrics(result)
        else:
            kind = WorkloadKind.SPEC_RATE if suite == "rate" else WorkloadKind.SPEC_BASE
            workflow = Workflow(runtime)
            total = len(runtime.config.workloads.suite)
            result = _drain(
                workflow.compare_suite(kind, seed=seed, intervals=intervals), f"{kind.value} suite", total
            )
            written = write_suite(result, out_path, report_fmt)
            metrics = suite_metrics(result)
    except (DarkSimError, OSError) as exc:
        _fail(ctx, exc)

    _print_written(written)
    _enforce(ctx, metrics, assertions)


@main.command()
@config_option
@click.option(
    "--tdp",
    "tdps",
    multiple=True,
    type=TDP_RANGE,
    help="TDP point in W (repeatable; default: the config's workloads.tdps).",
)
@click.option(
    "--guardband-offset-mv",
    type=click.FloatRange(min=0, min_open=True),
    default=None,
    help="Instead of the mode trend, measure Normal mode with its guardband lowered by this much.",
)
@out_option
@format_option
@seed_option
@intervals_option
@assert_option
@click.pass_context
def sweep(
    ctx: click.Context,
    config_path: Path,
    tdps: Tuple[float, ...],
    guardband_offset_mv: Optional[float],
    out_path: Path,
    fmt: str,
    seed: Optional[int],
    intervals: Optional[int],
    assertions: List[Tuple[str, float]],
) -> None:
    """Sweep TDP and report how the Bypass gain trends with it."""
    runtime = _runtime_or_exit(ctx, config_path)
    points = list(tdps) or list(runtime.config.workloads.tdps)
    for point in points:
        _check_tdp(runtime, point)
    if seed is None:
        seed = runtime.config.workloads.seed
    workflow = Workflow(runtime)
    report_fmt = ReportFormat(fmt)
    try:
        if guardband_offset_mv is not None:
            offset_v = guardband_offset_mv * 1e-3
            rows = _drain(
                workflow.guardband_study(points, offset_v, seed=seed, intervals=intervals),
                "guardband study",
                len(points),
            )
            written = write_guardband_study(rows, offset_v, out_path, report_fmt)
            metrics = {f"perf_gain_{row.tdp:g}w": row.perf_gain_pct / 100.0 for row in rows}
        else:
            table = _drain(workflow.tdp_sweep(points, seed=seed, intervals=intervals), "TDP sweep", len(points))
            written = write_trend(table, out_path, report_fmt)
            metrics = trend_metrics(table)
    except (DarkSimError, OSError) as exc:
        _fail(ctx, exc)

    _print_written(written)
    _enforce(ctx, metrics, assertions)


@main.command()
@config_option
@click.option("--sweep", "sweep_spec", callback=_parse_sweep, default=None, help="F_MIN:F_MAX:POINTS in Hz.")
@click.option("--spacing", type=click.Choice([s.value for s in Spacing]), default=None)
@click.option(
    "--topology",
    type=click.Choice([t.value for t in Topology]),
    default=Topology.GATED.value,
    show_default=True,
)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option(
    "--ripple-pct",
    type=click.FloatRange(0, 100, min_open=True),
    default=None,
    help="Screen against a flat target: this ripple of the nominal voltage at Fmax over the current step.",
)
@click.option(
    "--current-step-a",
    type=click.FloatRange(min=0, min_open=True),
    default=None,
    help="Load step for the target (default: the top virus level's droop current).",
)
@click.pass_context
def impedance(
    ctx: click.Context,
    config_path: Path,
    sweep_spec: Optional[Tuple[float, float, int]],
    spacing: Optional[str],
    topology: str,
    out_path: Path,
    ripple_pct: Optional[float],
    current_step_a: Optional[float],
) -> None:
    """Export |Z(f)| and phase of the gated or bypassed network as CSV, optionally screened against a target."""
    if current_step_a is not None and ripple_pct is None:
        raise click.UsageError("--current-step-a needs --ripple-pct")
    runtime = _runtime_or_exit(ctx, config_path)
    settings = runtime.platform.sweep
    f_min, f_max, points = sweep_spec or (settings.f_min, settings.f_max, settings.points)
    network = runtime.platform.network
    if Topology(topology) is Topology.BYPASSED:
        network = bypass(network)
    platform = runtime.platform
    z_target = None
    over: List[Tuple[float, float]] = []
    try:
        profile = impedance_sweep(network, f_min, f_max, points, Spacing(spacing or settings.spacing))
        if ripple_pct is not None:
            step = current_step_a or droop_current(platform.guardband.top, platform.guardband)
            z_target = target_impedance(vnom_at(platform.curve, platform.curve.f_max), ripple_pct / 100.0, step)
            over = violations_above(profile, z_target)
        written = write_impedance(profile, out_path, over)
    except (DarkSimError, OSError) as exc:
        _fail(ctx, exc)

    f_peak, z_peak = peak_impedance(profile)
    console.print(f"{topology}: peak |Z| {z_peak * 1e3:.3f} mOhm at {f_peak:.3g} Hz")
    _print_written(written)
    if z_target is None:
        return
    if not over:
        console.print(f"[green]|Z| stays under the {z_target * 1e3:.3f} mOhm target[/green]")
        return
    console.print(
        f"[red]{len(over)} of {len(profile)} points above the {z_target * 1e3:.3f} mOhm target, "
        f"{over[0][0]:.3g} to {over[-1][0]:.3g} Hz[/red]"
    )
    ctx.exit(EXIT_ASSERTION)


@main.command(name="gen-trace")
@config_option
@click.option("--kind", type=click.Choice([k.value for k in WorkloadKind]), required=True)
@click.option("--seed", type=int, required=True)
@click.option("--mem-frac", type=click.FloatRange(0.0, 1.0), default=None, help="Memory-bound fraction (SPEC kinds).")
@intervals_option
@click.option(
    "--out",
    "out_path",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="Output CSV (default: <kind>-seed<N>.csv).",
)
@click.pass_context
def gen_trace(
    ctx: click.Context,
    config_path: Path,
    kind: str,
    seed: int,
    mem_frac: Optional[float],
    intervals: Optional[int],
    out_path: Optional[Path],
) -> None:
    """Generate a synthetic activity trace."""
    runtime = _runtime_or_exit(ctx, config_path)
    workload = WorkloadKind(kind)
    target = out_path or Path(f"{slug(f'{workload.value}-seed{seed}')}.csv")
    try:
        params = workload_params(runtime.config, workload, intervals)
        if mem_frac is not None:
            params = replace(params, mem_fraction=mem_frac)
        trace = gen_workload(workload, params, seed)
        written = write_trace(trace, target)
    except (DarkSimError, OSError) as exc:
        _fail(ctx, exc)

    console.print(
        f"{workload.value}: {len(trace)} intervals over {trace.duration * 1e3:g} ms, "
        f"{trace.active_time_fraction() * 100:.1f}% active"
    )
    _print_written([written])
