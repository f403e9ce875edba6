"""Fixpoint evaluation.

Strata run in topological order. A recursive stratum loops: freeze relation
versions, run every plan instance (histogram / count / allocate /
materialize), pool the staged tuples per head relation, subtract what the
full relations already hold (compute delta), and stop when every delta is
empty; otherwise sort the deltas into each maintained index (build index)
and fold them into the full relations (merge), updating histograms
incrementally. All writes happen in the merge step, so within an iteration
the plan instances are independent: the `stream` schedule runs the same
phase of all instances back to back instead of instance by instance, and
must produce bit-identical results to `seq`.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor

from . import testmode
from .errors import InternalError, ProgramError
from .executor import PlanExecution
from .interning import Interner
from .planner import CompiledProgram, compile_program
from .rowops import nrows
from .storage import DEFAULT_FLUSH_LIMIT, RelationState, compute_delta


class Stats:
    """Per-phase timing records; JSON-lines when a path is given."""

    def __init__(self, path=None, enabled=True):
        self.enabled = enabled
        self.records = []
        self._fh = open(path, "w", encoding="utf-8") if path else None

    def record(self, stratum, iteration, rule, phase, micros, tuples):
        if not self.enabled:
            return
        row = {
            "stratum": stratum,
            "iteration": iteration,
            "rule": rule,
            "phase": phase,
            "micros": int(micros),
            "tuples": int(tuples),
        }
        self.records.append(row)
        if self._fh:
            self._fh.write(json.dumps(row) + "\n")

    def close(self):
        if self._fh:
            self._fh.close()
            self._fh = None

    def phase_totals(self):
        out = {}
        for row in self.records:
            out[row["phase"]] = out.get(row["phase"], 0) + row["micros"]
        return out


@dataclass
class StratumResult:
    index: int
    rules: list
    rule_indexes: frozenset
    recursive: bool
    iterations: int


@dataclass
class Summary:
    relations: dict
    strata: list = field(default_factory=list)
    wall_seconds: float = 0.0

    def rounds_by_rules(self):
        return {s.rule_indexes: s.iterations for s in self.strata}


class Engine:
    """Compiled program plus evaluation state."""

    def __init__(self, program, *, workers=1, schedule="seq", head_threshold=DEFAULT_FLUSH_LIMIT,
                 stats: Stats | None = None, max_iterations=None):
        if workers < 1:
            raise ProgramError(f"worker count must be >= 1, got {workers}")
        if schedule not in ("seq", "stream"):
            raise ProgramError(f"unknown schedule {schedule!r}")
        self.compiled: CompiledProgram = (
            program if isinstance(program, CompiledProgram) else compile_program(program)
        )
        self.workers = workers
        self.schedule = schedule
        self.stats = stats or Stats(enabled=False)
        self.max_iterations = max_iterations
        self.interner = Interner()
        self.store = {}
        for name, arity in self.compiled.declarations.items():
            self.store[name] = RelationState(
                name, arity, self.compiled.orders[name], flush_limit=head_threshold
            )
        self._pending = []  # (relation, rows) loaded before solving
        self._seeded = False
        self._solved = False

    # --- loading -----------------------------------------------------------

    def load_facts(self, relation, rows):
        decls = self.compiled.declarations
        if relation not in decls:
            raise ProgramError(f"cannot load facts for undeclared relation {relation}")
        self._pending.append((relation, rows))

    # --- evaluation --------------------------------------------------------

    def prepare_inputs(self):
        """Intern and merge the loaded facts; safe to call once before solve."""
        if not self._seeded:
            self._seeded = True
            self._seed()
        return self

    def solve(self) -> Summary:
        if self._solved:
            raise InternalError("engine already solved; build a fresh one")
        self._solved = True
        started = time.perf_counter()
        pool = ThreadPoolExecutor(self.workers) if self.workers > 1 else None
        try:
            self.prepare_inputs()
            strata = []
            for stratum in self.compiled.strata:
                iterations = self._eval_stratum(stratum, pool)
                strata.append(
                    StratumResult(
                        index=stratum.index,
                        rules=[r.rule_id for r in stratum.rules],
                        rule_indexes=stratum.rule_indexes,
                        recursive=stratum.recursive,
                        iterations=iterations,
                    )
                )
        finally:
            if pool is not None:
                pool.shutdown()
        relations = {name: state.cardinality for name, state in self.store.items()}
        return Summary(
            relations=relations, strata=strata, wall_seconds=time.perf_counter() - started
        )

    def _seed(self):
        staged = set()
        for relation, rows in [
            *self.compiled.program.facts.items(),
            *self._pending,
        ]:
            state = self.store[relation]
            cols = self.interner.intern_rows(rows, state.arity)
            if nrows(cols):
                state.stage(cols)
                staged.add(relation)
        for relation in sorted(staged):
            self._flush_staging(relation, stratum=-1, iteration=0)

    def _flush_staging(self, relation, stratum, iteration):
        """Compute delta, build the per-order indexes, merge. Returns delta size."""
        state = self.store[relation]
        t0 = time.perf_counter_ns()
        staged = state.staged_columns()
        rows = compute_delta(staged, state.canonical)
        state.clear_staging()
        self.stats.record(
            stratum, iteration, state.name, "delta", (time.perf_counter_ns() - t0) / 1000,
            nrows(rows),
        )
        if not nrows(rows):
            return 0
        t0 = time.perf_counter_ns()
        state.take_delta(rows)
        self.stats.record(
            stratum, iteration, state.name, "build-index",
            (time.perf_counter_ns() - t0) / 1000, nrows(rows),
        )
        t0 = time.perf_counter_ns()
        state.merge_delta()
        self.stats.record(
            stratum, iteration, state.name, "merge", (time.perf_counter_ns() - t0) / 1000,
            state.cardinality,
        )
        if testmode.enabled:
            state.check_invariants()
        return nrows(rows)

    def _run_instances_seq(self, stratum, iteration, pool):
        outputs = []
        for plan in stratum.plans:
            run = PlanExecution(plan, self.store, self.workers, self.interner, pool)
            t0 = time.perf_counter_ns()
            part = run.histogram()
            self.stats.record(
                stratum.index, iteration, plan.plan_id, "histogram",
                (time.perf_counter_ns() - t0) / 1000, part.total,
            )
            t0 = time.perf_counter_ns()
            counts = run.count()
            self.stats.record(
                stratum.index, iteration, plan.plan_id, "count",
                (time.perf_counter_ns() - t0) / 1000, counts.total,
            )
            run.allocate()
            t0 = time.perf_counter_ns()
            out = run.materialize()
            self.stats.record(
                stratum.index, iteration, plan.plan_id, "materialize",
                (time.perf_counter_ns() - t0) / 1000, counts.total,
            )
            outputs.append((plan, out))
        return outputs

    def _run_instances_stream(self, stratum, iteration, pool):
        """Phase-aligned: the same pipeline phase of every instance runs before
        any instance moves to the next phase."""
        runs = [
            PlanExecution(plan, self.store, self.workers, self.interner, pool)
            for plan in stratum.plans
        ]
        for run in runs:
            t0 = time.perf_counter_ns()
            part = run.histogram()
            self.stats.record(
                stratum.index, iteration, run.plan.plan_id, "histogram",
                (time.perf_counter_ns() - t0) / 1000, part.total,
            )
        for run in runs:
            t0 = time.perf_counter_ns()
            counts = run.count()
            self.stats.record(
                stratum.index, iteration, run.plan.plan_id, "count",
                (time.perf_counter_ns() - t0) / 1000, counts.total,
            )
        for run in runs:
            run.allocate()
        outputs = []
        for run in runs:
            t0 = time.perf_counter_ns()
            out = run.materialize()
            self.stats.record(
                stratum.index, iteration, run.plan.plan_id, "materialize",
                (time.perf_counter_ns() - t0) / 1000, run.counts.total,
            )
            outputs.append((run.plan, out))
        return outputs

    def _eval_stratum(self, stratum, pool) -> int:
        heads = sorted(stratum.head_relations)
        if stratum.recursive:
            for rel in heads:
                self.store[rel].snapshot_full_as_delta()
        run_instances = (
            self._run_instances_stream if self.schedule == "stream" else self._run_instances_seq
        )
        iterations = 0
        while True:
            iterations += 1
            if self.max_iterations is not None and iterations > self.max_iterations:
                raise InternalError(
                    f"stratum {stratum.index} exceeded {self.max_iterations} iterations"
                )
            outputs = run_instances(stratum, iterations, pool)
            for plan, cols in outputs:
                self.store[plan.head_relation].stage(cols)
            delta_rows = {}
            for rel in heads:
                state = self.store[rel]
                t0 = time.perf_counter_ns()
                staged = state.staged_columns()
                rows = compute_delta(staged, state.canonical)
                state.clear_staging()
                self.stats.record(
                    stratum.index, iterations, rel, "delta",
                    (time.perf_counter_ns() - t0) / 1000, nrows(rows),
                )
                delta_rows[rel] = rows
            if all(nrows(rows) == 0 for rows in delta_rows.values()):
                if stratum.recursive:
                    for rel in heads:
                        self.store[rel].clear_delta()
                break
            for rel in heads:
                rows = delta_rows[rel]
                state = self.store[rel]
                t0 = time.perf_counter_ns()
                state.take_delta(rows)
                self.stats.record(
                    stratum.index, iterations, rel, "build-index",
                    (time.perf_counter_ns() - t0) / 1000, nrows(rows),
                )
                t0 = time.perf_counter_ns()
                state.merge_delta()
                self.stats.record(
                    stratum.index, iterations, rel, "merge",
                    (time.perf_counter_ns() - t0) / 1000, state.cardinality,
                )
                if testmode.enabled:
                    state.check_invariants()
            if not stratum.recursive:
                for rel in heads:
                    self.store[rel].clear_delta()
                break
        return iterations

    # --- results -----------------------------------------------------------

    def relation_rows(self, name):
        """Logical contents as constant tuples, sorted by their text form."""
        state = self.store[name]
        cols = state.attr_rows()
        n = nrows(cols)
        rows = []
        for i in range(n):
            rows.append(tuple(self.interner.text(int(c[i])) for c in cols))
        rows.sort()
        return rows


def run_program(program, facts=None, **kwargs):
    """Convenience wrapper: build an engine, load facts, solve.

    Returns (engine, summary)."""
    engine = Engine(program, **kwargs)
    for relation, rows in (facts or {}).items():
        engine.load_facts(relation, rows)
    summary = engine.solve()
    return engine, summary
