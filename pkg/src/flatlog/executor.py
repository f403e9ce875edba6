"""Join plan execution.

One plan execution is a fixed pipeline:

1. histogram: flatten the root level into work units. Each distinct root
   value contributes (outer source rows under it) x (inner source rows
   under it) units; the per-key fan-outs are prefix-summed into a 1-D
   space of T units and cut into p slices of at most ceil(T/p) units, so
   a heavy key is shared by several workers.
2. count: every worker walks its slice read-only and counts the tuples it
   would produce.
3. prefix sum over the per-worker counts fixes disjoint write offsets and
   the single output allocation for the whole execution.
4. materialize: the same walk again, writing tuples at the fixed offsets.

A worker's share of one root key is a rectangle of (outer row, inner row)
pairs; each output tuple matches exactly one such pair, so slices never
double-count and never miss. Inner join levels run as a leapfrog
intersection over the sorted columns, narrowed by binary search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import storage, testmode
from .errors import InternalError
from .interning import VALUE_DTYPE
from .planner import DELTA, FULL, JoinPlan
from .parser import VAR
from .rowops import empty_columns
from .storage import (
    Segment,
    distinct_values,
    intersect_level,
    leapfrog_intersect,
    narrow_segments,
    values_in_segments,
)


class WorkPartition:
    """Prefix-summed root fan-outs plus per-worker slice bounds."""

    __slots__ = ("keys", "outer_degrees", "d2", "work", "prefix", "total", "p", "bounds", "kappa")

    def __init__(self, keys, outer_degrees, d2, p):
        self.keys = keys
        self.outer_degrees = np.asarray(outer_degrees, dtype=np.int64)
        self.d2 = np.asarray(d2, dtype=np.int64)
        self.work = self.outer_degrees * self.d2
        self.prefix = np.cumsum(self.work)
        self.total = int(self.prefix[-1]) if len(self.prefix) else 0
        self.p = p
        chunk = math.ceil(self.total / p) if self.total else 0
        self.bounds = [
            (min(i * chunk, self.total), min((i + 1) * chunk, self.total)) for i in range(p)
        ]
        self.kappa = [
            int(self.prefix.searchsorted(b_s, side="right")) if b_s < b_e else None
            for b_s, b_e in self.bounds
        ]

    @classmethod
    def from_histogram(cls, hist: storage.Histogram, p: int) -> "WorkPartition":
        """Partition where the histogram degrees are the per-key fan-outs."""
        ones = np.ones(len(hist.keys), dtype=np.int64)
        return cls(hist.keys, hist.degrees, ones, p)

    @classmethod
    def empty(cls, p: int) -> "WorkPartition":
        return cls(np.empty(0, dtype=VALUE_DTYPE), np.empty(0, np.int64), np.empty(0, np.int64), p)

    def slice_sizes(self):
        return [b_e - b_s for b_s, b_e in self.bounds]

    def key_start(self, k: int) -> int:
        return int(self.prefix[k - 1]) if k else 0

    def spans(self, worker: int):
        """Yield (key index, local unit lo, local unit hi) for a worker's slice."""
        b_s, b_e = self.bounds[worker]
        if b_s >= b_e:
            return
        k = self.kappa[worker]
        while b_s < b_e and k < len(self.keys):
            start = self.key_start(k)
            if start >= b_e:
                break
            end = int(self.prefix[k])
            u0 = max(b_s, start) - start
            u1 = min(b_e, end) - start
            if u0 < u1:
                yield k, u0, u1
            k += 1


def decode_workunit(unit, partition: WorkPartition, d2=None):
    """Map a flat work-unit index to (key index, outer row, inner row).

    Accepts a scalar or an array of indexes; the mapping is a bijection from
    [0, T). `d2` defaults to the partition's per-key inner degrees.
    """
    if d2 is None:
        d2 = partition.d2
    prefix = partition.prefix
    if np.isscalar(unit) or isinstance(unit, (int, np.integer)):
        unit = int(unit)
        if not 0 <= unit < partition.total:
            raise InternalError(f"work unit {unit} outside [0, {partition.total})")
        k = int(prefix.searchsorted(unit, side="right"))
        local = unit - (int(prefix[k - 1]) if k else 0)
        i1, i2 = divmod(local, int(d2[k]))
        return k, i1, i2
    unit = np.asarray(unit, dtype=np.int64)
    if len(unit) and (unit.min() < 0 or unit.max() >= partition.total):
        raise InternalError("work unit outside the flattened range")
    k = prefix.searchsorted(unit, side="right")
    base = np.where(k > 0, prefix[np.maximum(k - 1, 0)], 0)
    local = unit - base
    return k, local // d2[k], local % d2[k]


def encode_workunit(partition: WorkPartition, k, i1, i2, d2=None):
    if d2 is None:
        d2 = partition.d2
    k = np.asarray(k)
    base = np.where(k > 0, partition.prefix[np.maximum(k - 1, 0)], 0)
    return base + np.asarray(i1) * d2[k] + np.asarray(i2)


def _rectangles(u0: int, u1: int, d2: int):
    """Split a contiguous unit range of one key's (rows x d2) grid into at
    most three (row lo, row hi, col lo, col hi) rectangles."""
    r0, c0 = divmod(u0, d2)
    r1, c1 = divmod(u1, d2)
    if r0 == r1:
        yield (r0, r0 + 1, c0, c1)
        return
    if c0:
        yield (r0, r0 + 1, c0, d2)
        r0 += 1
    if r0 < r1:
        yield (r0, r1, 0, d2)
    if c1:
        yield (r1, r1 + 1, 0, c1)


@dataclass
class CountResult:
    tc: np.ndarray  # per-worker output counts
    offsets: np.ndarray  # exclusive prefix sum of tc
    total: int

    @classmethod
    def from_counts(cls, counts) -> "CountResult":
        tc = np.asarray(counts, dtype=np.int64)
        offsets = np.zeros(len(tc), dtype=np.int64)
        if len(tc) > 1:
            np.cumsum(tc[:-1], out=offsets[1:])
        return cls(tc, offsets, int(tc.sum()))


class Prepared:
    """Per-execution read-only view of a plan's sources: resolved relation
    versions with constants already narrowed, plus per-level lookup tables."""

    __slots__ = ("plan", "segs", "ok", "cand_cols", "leaf_fast", "leaf_negs", "head_resolved")

    def __init__(self, plan, segs, ok, cand_cols, leaf_fast, leaf_negs, head_resolved):
        self.plan = plan
        self.segs = segs
        self.ok = ok
        self.cand_cols = cand_cols
        self.leaf_fast = leaf_fast
        self.leaf_negs = leaf_negs
        self.head_resolved = head_resolved


def _resolve_relation(store, pa):
    state = store[pa.relation]
    return state.full(pa.column_order) if pa.version == FULL else state.delta(pa.column_order)


def prepare(plan: JoinPlan, store, interner) -> Prepared:
    ok = True
    segs = []
    for pa in plan.atoms:
        rel = _resolve_relation(store, pa)
        source = rel.segments()
        for k, literal in enumerate(pa.const_values):
            ident = interner.lookup(literal)
            if ident is None:
                source = []
                break
            source = narrow_segments(source, (k,), ident)
            if not source:
                break
        segs.append(source)
        if not pa.negated and not source:
            ok = False
        if pa.negated and pa.check_level == -1 and source:
            ok = False

    m = plan.depth
    cand_cols = []
    for level in range(m):
        entries = []
        for a in plan.cand_atoms[level]:
            pa = plan.atoms[a]
            first = pa.n_const + pa.col_levels.index(level)
            entries.append((a, first))
        cand_cols.append(tuple(entries))

    leaf_fast = False
    leaf_negs = ()
    if m >= 2:
        leaf = m - 1
        leaf_fast = all(len(cols) == 1 for _, cols in plan.narrow_specs[leaf])
        if leaf_fast:
            leaf_negs = tuple(
                (a, cols[0]) for a, cols in plan.narrow_specs[leaf] if plan.atoms[a].negated
            )

    head_resolved = []
    for kind, x in plan.head_cols:
        if kind == VAR:
            head_resolved.append((True, x))
        else:
            head_resolved.append((False, interner.intern(x)))

    return Prepared(plan, segs, ok, tuple(cand_cols), leaf_fast, leaf_negs, tuple(head_resolved))


def _segment_key_degrees(segments, col_index):
    """Distinct values and their row counts across a source's segments."""
    hist = storage.Histogram.empty()
    for cols, lo, hi in segments:
        hist = hist.updated(cols[col_index][lo:hi])
    return hist.keys, hist.degrees


def build_partition(plan: JoinPlan, store, p: int, prep: Prepared | None = None,
                    interner=None) -> WorkPartition:
    """Root-level work partition for one plan execution."""
    if p < 1:
        raise InternalError("worker count must be >= 1")
    if prep is None:
        prep = prepare(plan, store, interner)
    if plan.depth == 0 or not prep.ok:
        return WorkPartition.empty(p)
    outer_pa = plan.atoms[plan.outer_atom]
    if outer_pa.n_const == 0 and outer_pa.col_levels[0] == 0:
        hist = _resolve_relation(store, outer_pa).hist
        okeys, odegs = hist.keys, hist.degrees
    else:
        okeys, odegs = _segment_key_degrees(
            prep.segs[plan.outer_atom], outer_pa.n_const + 0
        )
    if len(okeys) == 0:
        return WorkPartition.empty(p)
    if plan.inner_atom is not None:
        ihist = _resolve_relation(store, plan.atoms[plan.inner_atom]).hist
        keys, oidx, iidx = np.intersect1d(
            okeys, ihist.keys, assume_unique=True, return_indices=True
        )
        if len(keys) == 0:
            return WorkPartition.empty(p)
        return WorkPartition(keys, odegs[oidx], ihist.degrees[iidx], p)
    ones = np.ones(len(okeys), dtype=np.int64)
    return WorkPartition(okeys, odegs, ones, p)


def _restrict_rows(segments, lo: int, hi: int):
    """Window [lo, hi) of the logical row sequence formed by concatenating the
    segments in list order."""
    out = []
    pos = 0
    for cols, s_lo, s_hi in segments:
        n = s_hi - s_lo
        a = max(lo - pos, 0)
        b = min(hi - pos, n)
        if a < b:
            out.append(Segment(cols, s_lo + a, s_lo + b))
        pos += n
    return out


class _CountSink:
    __slots__ = ("n",)

    def __init__(self):
        self.n = 0

    def emit(self, binding):
        self.n += 1

    def emit_block(self, binding, level, values):
        self.n += len(values)


class _WriteSink:
    __slots__ = ("out", "head", "cursor", "bitmap", "start")

    def __init__(self, out_cols, head_resolved, start, bitmap=None):
        self.out = out_cols
        self.head = head_resolved
        self.cursor = start
        self.start = start
        self.bitmap = bitmap

    @property
    def emitted(self):
        return self.cursor - self.start

    def emit(self, binding):
        i = self.cursor
        for col, (is_var, x) in zip(self.out, self.head):
            col[i] = binding[x] if is_var else x
        if self.bitmap is not None:
            self.bitmap[i] += 1
        self.cursor = i + 1

    def emit_block(self, binding, level, values):
        n = len(values)
        i = self.cursor
        for col, (is_var, x) in zip(self.out, self.head):
            if is_var and x == level:
                col[i : i + n] = values
            elif is_var:
                col[i : i + n] = binding[x]
            else:
                col[i : i + n] = x
        if self.bitmap is not None:
            self.bitmap[i : i + n] += 1
        self.cursor = i + n


def _root_setup(plan, prep, cur, key, outer_rows, inner_rows):
    """Narrow all root-level sources to one key, restricting the outer and
    inner sources to the worker's row rectangle. False when nothing matches."""
    atoms = plan.atoms
    outer, inner = plan.outer_atom, plan.inner_atom
    spec = plan.narrow_specs[0]
    special = {}
    for a, cols in spec:
        if a == outer:
            special[a] = (cols, outer_rows)
        elif a == inner:
            special[a] = (cols, inner_rows)
    for a, (cols, rows) in special.items():
        segs = narrow_segments(cur[a], cols[:1], key)
        segs = _restrict_rows(segs, *rows)
        if len(cols) > 1 and segs:
            segs = narrow_segments(segs, cols[1:], key)
        cur[a] = segs
        if not segs:
            return False
    for a, cols in spec:
        if a in special:
            continue
        segs = narrow_segments(cur[a], cols, key)
        cur[a] = segs
        if not segs and not atoms[a].negated:
            return False
    for a in plan.checks[0]:
        if cur[a]:
            return False
    return True


def _descend(plan, prep, cur, binding, level, sink):
    m = plan.depth
    if level == m - 1 and prep.leaf_fast:
        values = intersect_level([(cur[a], col) for a, col in prep.cand_cols[level]])
        for a, col in prep.leaf_negs:
            if not len(values):
                break
            values = values[~values_in_segments(values, cur[a], col)]
        if len(values):
            sink.emit_block(binding, level, values)
        return
    last = level == m - 1
    spec = plan.narrow_specs[level]
    checks = plan.checks[level]
    atoms = plan.atoms
    views = [(cur[a], col) for a, col in prep.cand_cols[level]]
    for v in leapfrog_intersect(views):
        saved = [(a, cur[a]) for a, _ in spec]
        ok = True
        for a, cols in spec:
            segs = narrow_segments(cur[a], cols, v)
            cur[a] = segs
            if not segs and not atoms[a].negated:
                ok = False
                break
        if ok:
            for a in checks:
                if cur[a]:
                    ok = False
                    break
        if ok:
            binding[level] = v
            if last:
                sink.emit(binding)
            else:
                _descend(plan, prep, cur, binding, level + 1, sink)
        for a, segs in saved:
            cur[a] = segs


def _run_slice(prep: Prepared, partition: WorkPartition, worker: int, sink):
    plan = prep.plan
    m = plan.depth
    binding = [0] * max(m, 1)
    for key_idx, u0, u1 in partition.spans(worker):
        key = int(partition.keys[key_idx])
        d2 = int(partition.d2[key_idx])
        for r0, r1, c0, c1 in _rectangles(u0, u1, d2):
            cur = list(prep.segs)
            if not _root_setup(plan, prep, cur, key, (r0, r1), (c0, c1)):
                continue
            binding[0] = key
            if m == 1:
                sink.emit(binding)
            else:
                _descend(plan, prep, cur, binding, 1, sink)


def _map_workers(pool, fn, p):
    if pool is None or p == 1:
        return [fn(w) for w in range(p)]
    return list(pool.map(fn, range(p)))


def count_pass(plan, store, partition, prep=None, interner=None, pool=None) -> CountResult:
    """Read-only pass: exact per-worker output counts, no writes anywhere."""
    if prep is None:
        prep = prepare(plan, store, interner)
    if plan.depth == 0:
        counts = [0] * partition.p
        counts[0] = 1 if prep.ok else 0
        return CountResult.from_counts(counts)
    if not prep.ok or partition.total == 0:
        return CountResult.from_counts([0] * partition.p)

    def run(worker):
        sink = _CountSink()
        _run_slice(prep, partition, worker, sink)
        return sink.n

    return CountResult.from_counts(_map_workers(pool, run, partition.p))


def materialize_pass(plan, store, partition, counts: CountResult, out_cols,
                     prep=None, interner=None, pool=None, bitmap=None):
    """Second pass: re-runs the count walk, writing each worker's tuples into
    its pre-assigned slot range of the shared output buffer."""
    if prep is None:
        prep = prepare(plan, store, interner)
    if counts.total == 0:
        return
    if plan.depth == 0:
        sink = _WriteSink(out_cols, prep.head_resolved, 0, bitmap)
        sink.emit([])
        return

    def run(worker):
        sink = _WriteSink(out_cols, prep.head_resolved, int(counts.offsets[worker]), bitmap)
        _run_slice(prep, partition, worker, sink)
        expected = int(counts.tc[worker])
        if sink.emitted != expected:
            raise InternalError(
                f"plan {plan.plan_id} worker {worker}: materialized {sink.emitted} tuples "
                f"but counted {expected}"
            )
        return sink.emitted

    emitted = _map_workers(pool, run, partition.p)
    if bitmap is not None and not bool(np.all(bitmap == 1)):
        raise InternalError(f"plan {plan.plan_id}: output slots written zero or several times")
    return emitted


class PlanExecution:
    """One plan's pipeline, phase by phase, so a scheduler can interleave the
    phases of independent plans."""

    def __init__(self, plan, store, p, interner, pool=None):
        self.plan = plan
        self.store = store
        self.p = p
        self.interner = interner
        self.pool = pool
        self.prep = None
        self.partition = None
        self.counts = None
        self.out = None
        self.bitmap = None
        self.aux_peak = 0

    def histogram(self) -> WorkPartition:
        self.prep = prepare(self.plan, self.store, self.interner)
        self.partition = build_partition(self.plan, self.store, self.p, self.prep)
        return self.partition

    def count(self) -> CountResult:
        self.counts = count_pass(
            self.plan, self.store, self.partition, self.prep, pool=self.pool
        )
        return self.counts

    def allocate(self):
        total = self.counts.total
        self.out = tuple(
            np.empty(total, dtype=VALUE_DTYPE) for _ in range(self.plan.head_arity)
        )
        self.aux_peak = max(self.aux_peak, total)
        if testmode.enabled:
            self.bitmap = np.zeros(total, dtype=np.int16)
        return self.out

    def materialize(self):
        materialize_pass(
            self.plan,
            self.store,
            self.partition,
            self.counts,
            self.out,
            self.prep,
            pool=self.pool,
            bitmap=self.bitmap,
        )
        if testmode.enabled:
            testmode.record_execution(self)
        return self.out


def execute_plan(plan, store, p, interner, pool=None):
    """Histogram, count, allocate once, materialize; returns the staged
    head-projected tuples (attribute order)."""
    run = PlanExecution(plan, store, p, interner, pool)
    run.histogram()
    run.count()
    run.allocate()
    return run.materialize()
