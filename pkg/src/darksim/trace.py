from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from itertools import groupby
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .cstates import DEFAULT_IDLE_HINT, ComponentStates, idle_states
from .errors import TraceError
from .paths import atomic_write_text

logger = logging.getLogger(__name__)

TRACE_FIELDS = ["t_ms", "core_id", "active_frac", "virus_level", "mem_frac", "gfx_load"]
HINT_FIELD = "idle_hint"


@dataclass(frozen=True)
class CoreActivity:
    active_fraction: float = 0.0
    virus_level: int = 1
    mem_fraction: float = 0.0

    def __post_init__(self) -> None:
        if not 0 <= self.active_fraction <= 1:
            raise TraceError(f"active_fraction {self.active_fraction} outside [0, 1]")
        if not 0 <= self.mem_fraction <= 1:
            raise TraceError(f"mem_fraction {self.mem_fraction} outside [0, 1]")
        if self.virus_level < 1:
            raise TraceError(f"virus_level must be >= 1, got {self.virus_level}")

    @property
    def active(self) -> bool:
        return self.active_fraction > 0


@dataclass(frozen=True)
class TraceInterval:
    duration: float
    cores: Tuple[CoreActivity, ...]
    graphics_load: float = 0.0
    idle_hint: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "cores", tuple(self.cores))
        if not self.duration > 0:
            raise TraceError(f"Interval duration must be positive, got {self.duration}")
        if not self.cores:
            raise TraceError("Interval needs at least one core")
        if not 0 <= self.graphics_load <= 1:
            raise TraceError(f"graphics_load {self.graphics_load} outside [0, 1]")

    @property
    def is_idle(self) -> bool:
        return self.graphics_load == 0 and not any(c.active for c in self.cores)

    @property
    def active_cores(self) -> int:
        return sum(1 for c in self.cores if c.active)

    def idle_states(self) -> ComponentStates:
        return idle_states(self.idle_hint or DEFAULT_IDLE_HINT, len(self.cores))


@dataclass(frozen=True)
class Trace:
    intervals: Tuple[TraceInterval, ...]
    name: str = "trace"

    def __post_init__(self) -> None:
        object.__setattr__(self, "intervals", tuple(self.intervals))
        if not self.intervals:
            raise TraceError("A trace needs at least one interval")
        widths = {len(iv.cores) for iv in self.intervals}
        if len(widths) != 1:
            raise TraceError(f"Intervals disagree on core count: {sorted(widths)}")

    @property
    def n_cores(self) -> int:
        return len(self.intervals[0].cores)

    @property
    def duration(self) -> float:
        return sum(iv.duration for iv in self.intervals)

    def __len__(self) -> int:
        return len(self.intervals)

    def active_time_fraction(self) -> float:
        active = sum(iv.duration for iv in self.intervals if not iv.is_idle)
        return active / self.duration


def _parse_row(row: Dict[str, str], line: int) -> Tuple[float, int, CoreActivity, float, Optional[str]]:
    try:
        t_ms = float(row["t_ms"])
        core_id = int(row["core_id"])
        activity = CoreActivity(
            active_fraction=float(row["active_frac"]),
            virus_level=int(row["virus_level"]),
            mem_fraction=float(row["mem_frac"]),
        )
        gfx_load = float(row["gfx_load"])
    except (KeyError, TypeError, ValueError) as exc:
        raise TraceError(f"line {line}: cannot parse trace row {row!r}: {exc}") from exc
    except TraceError as exc:
        raise TraceError(f"line {line}: {exc}") from exc
    hint = (row.get(HINT_FIELD) or "").strip() or None
    return t_ms, core_id, activity, gfx_load, hint


def parse_trace(text: str, *, last_interval_s: float = 1e-3, name: str = "trace") -> Trace:
    """Parse the long-format trace CSV, one row per (interval, core).

    Interval durations come from consecutive t_ms values; the final one uses last_interval_s.
    """
    reader = csv.DictReader(io.StringIO(text))
    missing = [f for f in TRACE_FIELDS if f not in (reader.fieldnames or [])]
    if missing:
        raise TraceError(f"Trace header is missing columns: {', '.join(missing)}")

    rows = [_parse_row(row, line) for line, row in enumerate(reader, start=2)]
    if not rows:
        raise TraceError("Trace has no rows")

    grouped: List[Tuple[float, List[Tuple[int, CoreActivity, float, Optional[str]]]]] = []
    for t_ms, group in groupby(rows, key=lambda r: r[0]):
        grouped.append((t_ms, [r[1:] for r in group]))

    starts = [t for t, _ in grouped]
    if any(b <= a for a, b in zip(starts, starts[1:])):
        raise TraceError("t_ms must be strictly increasing between intervals")

    intervals = []
    for i, (t_ms, members) in enumerate(grouped):
        ids = [core_id for core_id, *_ in members]
        if ids != list(range(len(members))):
            raise TraceError(f"t_ms={t_ms}: core ids must run 0..n-1 in order, got {ids}")
        duration = (starts[i + 1] - t_ms) / 1e3 if i + 1 < len(grouped) else last_interval_s
        gfx_loads = {gfx for _, _, gfx, _ in members}
        if len(gfx_loads) != 1:
            raise TraceError(f"t_ms={t_ms}: gfx_load differs between core rows")
        hints = {hint for *_, hint in members if hint}
        if len(hints) > 1:
            raise TraceError(f"t_ms={t_ms}: conflicting idle hints {sorted(hints)}")
        intervals.append(
            TraceInterval(
                duration=duration,
                cores=tuple(activity for _, activity, _, _ in members),
                graphics_load=gfx_loads.pop(),
                idle_hint=hints.pop() if hints else None,
            )
        )

    trace = Trace(intervals=tuple(intervals), name=name)
    for iv in trace.intervals:
        if iv.idle_hint is not None:
            iv.idle_states()
    logger.debug("Parsed trace %s: %d intervals, %d cores", name, len(trace), trace.n_cores)
    return trace


def load_trace(path: Path, *, last_interval_s: float = 1e-3) -> Trace:
    path = path.expanduser()
    text = path.read_text(encoding="utf-8")
    return parse_trace(text, last_interval_s=last_interval_s, name=path.stem)


def format_trace(trace: Trace) -> str:
    with_hints = any(iv.idle_hint for iv in trace.intervals)
    fields = TRACE_FIELDS + ([HINT_FIELD] if with_hints else [])
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    t = 0.0
    for iv in trace.intervals:
        for core_id, core in enumerate(iv.cores):
            row = {
                "t_ms": repr(t * 1e3),
                "core_id": core_id,
                "active_frac": repr(core.active_fraction),
                "virus_level": core.virus_level,
                "mem_frac": repr(core.mem_fraction),
                "gfx_load": repr(iv.graphics_load),
            }
            if with_hints:
                row[HINT_FIELD] = iv.idle_hint or ""
            writer.writerow(row)
        t += iv.duration
    return buf.getvalue()


def write_trace(trace: Trace, path: Path) -> Path:
    return atomic_write_text(path, format_trace(trace))

