from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Generator, Optional, Sequence

from .errors import ModelError
from .runtime import RuntimeContext, suite_entries, workload_params
from .sim import (
    GuardbandStudyRow,
    SuiteComparison,
    TrendTable,
    guardband_study,
    suite_row,
    trend_row,
)
from .workloads import WorkloadKind

logger = logging.getLogger(__name__)


@dataclass
class WorkflowEvent:
    type: str
    message: str
    data: Optional[dict] = None


class Workflow:
    """Multi-run experiments, reported as a stream of events the CLI renders."""

    def __init__(self, runtime: RuntimeContext):
        self.runtime = runtime
        self.config = runtime.config
        self.platform = runtime.platform

    def _suite(self):
        suite = suite_entries(self.config)
        if not suite:
            raise ModelError("workloads.suite is empty in the config")
        return suite

    def compare_suite(
        self,
        kind: WorkloadKind,
        *,
        seed: int,
        intervals: Optional[int] = None,
    ) -> Generator[WorkflowEvent, None, None]:
        suite = self._suite()
        params = workload_params(self.config, kind, intervals)
        rows = []
        for offset, entry in enumerate(suite):
            yield WorkflowEvent("processing", f"{entry.name} ({offset + 1}/{len(suite)})")
            row = suite_row(self.platform, entry, kind, params, seed + offset)
            rows.append(row)
            yield WorkflowEvent("completed", f"{entry.name}: {row.perf_delta_pct:+.2f}% perf")
        result = SuiteComparison(kind=WorkloadKind(kind), tdp=self.platform.tdp, rows=tuple(rows))
        yield WorkflowEvent("summary", f"mean {result.mean_perf_delta_pct:+.2f}%", data={"result": result})

    def tdp_sweep(
        self,
        tdps: Sequence[float],
        *,
        seed: int,
        intervals: Optional[int] = None,
    ) -> Generator[WorkflowEvent, None, None]:
        suite = self._suite()
        params = workload_params(self.config, WorkloadKind.SPEC_BASE, intervals)
        rows = []
        for tdp in sorted(tdps):
            yield WorkflowEvent("processing", f"{tdp:g} W")
            row = trend_row(self.platform, tdp, suite, params, seed)
            rows.append(row)
            yield WorkflowEvent(
                "completed",
                f"{tdp:g} W: base {row.base_delta_pct:+.2f}%, rate {row.rate_delta_pct:+.2f}%, "
                f"graphics {row.graphics_delta_pct:+.2f}%",
            )
        table = TrendTable(rows=tuple(rows))
        if not table.base_non_increasing():
            yield WorkflowEvent("warning", "base deltas increase with TDP somewhere in the sweep")
        if not table.rate_non_decreasing():
            yield WorkflowEvent("warning", "rate deltas decrease with TDP somewhere in the sweep")
        yield WorkflowEvent("summary", f"{len(rows)} TDP points", data={"result": table})

    def guardband_study(
        self,
        tdps: Sequence[float],
        offset_v: float,
        *,
        seed: int,
        intervals: Optional[int] = None,
    ) -> Generator[WorkflowEvent, None, None]:
        suite = self._suite()
        params = workload_params(self.config, WorkloadKind.SPEC_BASE, intervals)
        rows: list[GuardbandStudyRow] = []
        for tdp in sorted(tdps):
            yield WorkflowEvent("processing", f"{tdp:g} W, guardband -{offset_v * 1e3:g} mV")
            (row,) = guardband_study(self.platform, [tdp], suite, params, offset_v, seed)
            rows.append(row)
            yield WorkflowEvent("completed", f"{tdp:g} W: {row.perf_gain_pct:+.2f}%")
        yield WorkflowEvent("summary", f"{len(rows)} TDP points", data={"result": tuple(rows)})
