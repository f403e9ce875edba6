"""Opt-in instrumentation for tests.

Enabled via the FLATLOG_TESTMODE environment variable (or by flipping
`enabled` directly). When on, every plan execution leaves a trace record
(partition shape, per-worker counts, write-once bitmap verdict, peak
auxiliary tuple storage) and merges run full invariant checks. Zero cost
when off.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

enabled = os.environ.get("FLATLOG_TESTMODE", "") not in ("", "0")

traces: list = []


@dataclass
class ExecutionTrace:
    plan_id: str
    p: int
    work_total: int
    slice_sizes: list
    tc: list
    total: int
    aux_peak: int
    bitmap_ok: bool | None

    @property
    def max_slice(self):
        return max(self.slice_sizes) if self.slice_sizes else 0

    @property
    def slice_bound(self):
        return math.ceil(self.work_total / self.p) if self.work_total else 0


def reset():
    traces.clear()


def record_execution(run):
    bitmap_ok = None
    if run.bitmap is not None:
        bitmap_ok = bool((run.bitmap == 1).all()) if run.counts.total else True
    traces.append(
        ExecutionTrace(
            plan_id=run.plan.plan_id,
            p=run.p,
            work_total=run.partition.total if run.partition else 0,
            slice_sizes=run.partition.slice_sizes() if run.partition else [],
            tc=[int(x) for x in run.counts.tc],
            total=run.counts.total,
            aux_peak=run.aux_peak,
            bitmap_ok=bitmap_ok,
        )
    )
