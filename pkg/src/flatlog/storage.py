"""Flat sorted columnar relation storage.

A relation is kept as one or more *indexes*: per column order, parallel
value arrays sorted lexicographically, split into a small sorted `head`
buffer that absorbs freshly merged deltas cheaply and a large sorted
`body`. Logical contents are set(head) | set(body); the buffers are
disjoint. Each index maintains a histogram of its leading column over
head | body, updated incrementally from deltas.

Joins read relations through `Segment` views (a column set plus a row
range) and narrow them with binary searches; a source is at most two
segments (body, head).
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from . import rowops
from .errors import InternalError
from .interning import VALUE_DTYPE

DEFAULT_FLUSH_LIMIT = 4096


class Histogram:
    """Run-length summary of a sorted column: distinct keys, their counts,
    and the inclusive prefix sum of the counts."""

    __slots__ = ("keys", "degrees", "prefix")

    def __init__(self, keys, degrees, prefix):
        self.keys = keys
        self.degrees = degrees
        self.prefix = prefix

    @classmethod
    def empty(cls) -> "Histogram":
        return cls(
            np.empty(0, dtype=VALUE_DTYPE),
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.int64),
        )

    @classmethod
    def over_column(cls, col) -> "Histogram":
        if len(col) == 0:
            return cls.empty()
        change = np.empty(len(col), dtype=bool)
        change[0] = True
        np.not_equal(col[1:], col[:-1], out=change[1:])
        starts = np.flatnonzero(change)
        keys = col[starts].copy()
        degrees = np.diff(np.append(starts, len(col))).astype(np.int64)
        return cls(keys, degrees, np.cumsum(degrees))

    @property
    def total(self) -> int:
        return int(self.prefix[-1]) if len(self.prefix) else 0

    def updated(self, delta_col) -> "Histogram":
        """Histogram of the union, given a sorted delta column disjoint in rows
        (keys may overlap; their counts add)."""
        if len(delta_col) == 0:
            return self
        d = Histogram.over_column(delta_col)
        if len(self.keys) == 0:
            return d
        keys = np.concatenate([self.keys, d.keys])
        degs = np.concatenate([self.degrees, d.degrees])
        ukeys, inverse = np.unique(keys, return_inverse=True)
        udegs = np.zeros(len(ukeys), dtype=np.int64)
        np.add.at(udegs, inverse, degs)
        return Histogram(ukeys, udegs, np.cumsum(udegs))

    def degree_of(self, key) -> int:
        pos = int(self.keys.searchsorted(key))
        if pos < len(self.keys) and self.keys[pos] == key:
            return int(self.degrees[pos])
        return 0

    def check(self, expected_total: int):
        if len(self.keys) == 0:
            if len(self.degrees) or len(self.prefix) or expected_total != 0:
                raise InternalError("empty histogram with nonzero totals")
            return
        if not np.all(self.keys[1:] > self.keys[:-1]):
            raise InternalError("histogram keys not strictly increasing")
        if not np.all(self.degrees >= 1):
            raise InternalError("histogram degree < 1")
        if not np.array_equal(self.prefix, np.cumsum(self.degrees)):
            raise InternalError("histogram prefix sums inconsistent")
        if self.total != expected_total:
            raise InternalError(
                f"histogram total {self.total} != relation size {expected_total}"
            )


class Segment(NamedTuple):
    """A contiguous row range of one sorted buffer. `cols` are the buffer's
    arrays in index order."""

    cols: tuple
    lo: int
    hi: int

    def __len__(self):
        return self.hi - self.lo


def narrow(col, lo: int, hi: int, value) -> tuple[int, int]:
    """Maximal sub-range of [lo, hi) whose `col` equals `value` (may be empty).
    `col[lo:hi]` must be sorted."""
    view = col[lo:hi]
    return lo + int(view.searchsorted(value, "left")), lo + int(
        view.searchsorted(value, "right")
    )


def narrow_segments(segments, col_indexes, value):
    """Narrow every segment on the given columns (in order) to `value`,
    dropping segments that become empty."""
    out = []
    for cols, lo, hi in segments:
        for k in col_indexes:
            lo, hi = narrow(cols[k], lo, hi, value)
            if lo >= hi:
                break
        if lo < hi:
            out.append(Segment(cols, lo, hi))
    return out


def distinct_values(segments, col_index) -> np.ndarray:
    """Sorted distinct values of one column across a source's segments."""
    parts = []
    for cols, lo, hi in segments:
        c = cols[col_index][lo:hi]
        if len(c) == 0:
            continue
        keep = np.empty(len(c), dtype=bool)
        keep[0] = True
        np.not_equal(c[1:], c[:-1], out=keep[1:])
        parts.append(c[keep])
    if not parts:
        return np.empty(0, dtype=VALUE_DTYPE)
    if len(parts) == 1:
        return parts[0]
    return np.union1d(parts[0], parts[1]) if len(parts) == 2 else np.unique(
        np.concatenate(parts)
    )


def _seek(segments, col_index, target):
    """Smallest value >= target in the column across segments, or None."""
    best = None
    for cols, lo, hi in segments:
        c = cols[col_index]
        pos = lo + int(c[lo:hi].searchsorted(target, "left"))
        if pos < hi:
            v = int(c[pos])
            if best is None or v < best:
                best = v
    return best


def leapfrog_intersect(views):
    """Yield, in ascending order, the distinct values present in every view.

    A view is (segments, col_index). Values are found by mutual seeking with
    binary searches; nothing is materialized.
    """
    target = 0
    while True:
        bumped = True
        while bumped:
            bumped = False
            for segments, col_index in views:
                v = _seek(segments, col_index, target)
                if v is None:
                    return
                if v > target:
                    target = v
                    bumped = True
        # a full pass without a bump means every view holds exactly `target`
        yield target
        target += 1


def intersect_level(views) -> np.ndarray:
    """Sorted distinct values common to all views (vectorized form)."""
    arrays = [distinct_values(segments, col_index) for segments, col_index in views]
    arrays.sort(key=len)
    out = arrays[0]
    for a in arrays[1:]:
        if len(out) == 0:
            break
        out = np.intersect1d(out, a, assume_unique=True)
    return out


def values_in_segments(values: np.ndarray, segments, col_index) -> np.ndarray:
    """Vectorized membership of each value in any segment's column range."""
    present = np.zeros(len(values), dtype=bool)
    for cols, lo, hi in segments:
        c = cols[col_index][lo:hi]
        if len(c) == 0:
            continue
        pos = c.searchsorted(values, "left")
        inside = pos < len(c)
        hit = np.zeros(len(values), dtype=bool)
        hit[inside] = c[pos[inside]] == values[inside]
        present |= hit
    return present


class ColumnarRelation:
    """One sorted index of a relation under a fixed column order.

    `column_order[k]` is the attribute position stored in column k; rows are
    sorted lexicographically over columns 0..m-1 and duplicate-free within
    and across head/body.
    """

    __slots__ = ("arity", "column_order", "head", "body", "hist")

    def __init__(self, arity, column_order, head, body, hist):
        self.arity = arity
        self.column_order = tuple(column_order)
        self.head = head
        self.body = body
        self.hist = hist

    @classmethod
    def empty(cls, arity: int, column_order) -> "ColumnarRelation":
        return cls(
            arity,
            column_order,
            rowops.empty_columns(arity),
            rowops.empty_columns(arity),
            Histogram.empty(),
        )

    @classmethod
    def from_sorted(cls, arity, column_order, cols) -> "ColumnarRelation":
        """Build a body-only index from rows already sorted under the order."""
        hist = Histogram.over_column(cols[0]) if arity else Histogram.empty()
        return cls(arity, column_order, rowops.empty_columns(arity), cols, hist)

    @property
    def size(self) -> int:
        return len(self.head[0]) + len(self.body[0])

    def segments(self):
        """Source view: body segment then head segment (either may be absent).
        Row index i of the logical union counts body rows first."""
        segs = []
        nb = len(self.body[0])
        if nb:
            segs.append(Segment(self.body, 0, nb))
        nh = len(self.head[0])
        if nh:
            segs.append(Segment(self.head, 0, nh))
        return segs

    def merged_columns(self):
        """All rows as one sorted run (index order)."""
        return rowops.merge_sorted(self.body, self.head)

    def merge_delta(self, delta_cols, flush_limit=DEFAULT_FLUSH_LIMIT) -> "ColumnarRelation":
        """Integrate a sorted duplicate-free delta disjoint from the contents.

        Small deltas fold into the head buffer; once |head| + |delta| exceeds
        max(flush_limit, |body| / 8) the head and delta flush into the body in
        one pass and the head empties. The histogram is updated from the delta
        alone.
        """
        nd = len(delta_cols[0])
        if nd == 0:
            return self
        hist = self.hist.updated(delta_cols[0])
        nh, nb = len(self.head[0]), len(self.body[0])
        if nh + nd > max(flush_limit, nb // 8):
            body = rowops.merge_many([self.body, self.head, delta_cols])
            return ColumnarRelation(
                self.arity, self.column_order, rowops.empty_columns(self.arity), body, hist
            )
        head = rowops.merge_sorted(self.head, delta_cols)
        return ColumnarRelation(self.arity, self.column_order, head, self.body, hist)

    def check_invariants(self):
        if not rowops.is_sorted_strict(self.body):
            raise InternalError("body not strictly sorted")
        if not rowops.is_sorted_strict(self.head):
            raise InternalError("head not strictly sorted")
        if len(self.head[0]) and len(self.body[0]):
            if rowops.member_mask(self.head, self.body).any():
                raise InternalError("head and body overlap")
        self.hist.check(self.size)


def sort_dedup(staging_cols, column_order):
    """Sort staged tuples (attribute order) under `column_order` and drop
    duplicates. Returns columns in index order."""
    ordered = tuple(staging_cols[a] for a in column_order)
    return rowops.sort_dedup(ordered)


def compute_delta(staging_cols, full: ColumnarRelation):
    """Distinct staged tuples not already present in `full`.

    `full` must be the canonical (identity-order) index; the result is sorted
    duplicate-free, in attribute order. `full` is left untouched.
    """
    if full.column_order != tuple(range(full.arity)):
        raise InternalError("compute_delta requires the canonical index")
    if len(staging_cols) != full.arity:
        raise InternalError(
            f"arity mismatch: staged {len(staging_cols)} columns into arity-{full.arity} relation"
        )
    rows = rowops.sort_dedup(staging_cols)
    return rowops.diff_sorted(rows, full.head, full.body)


class RelationState:
    """Per-relation evaluation state: full indexes, the last merged delta as
    matching delta indexes, and an unsorted staging buffer of new tuples."""

    def __init__(self, name, arity, orders, flush_limit=DEFAULT_FLUSH_LIMIT):
        self.name = name
        self.arity = arity
        identity = tuple(range(arity))
        self.orders = sorted(set(tuple(o) for o in orders) | {identity})
        self.flush_limit = flush_limit
        self.fulls = {o: ColumnarRelation.empty(arity, o) for o in self.orders}
        self.deltas = {o: ColumnarRelation.empty(arity, o) for o in self.orders}
        self.staging = []

    @property
    def identity(self):
        return tuple(range(self.arity))

    @property
    def canonical(self) -> ColumnarRelation:
        return self.fulls[self.identity]

    def full(self, order) -> ColumnarRelation:
        return self.fulls[tuple(order)]

    def delta(self, order) -> ColumnarRelation:
        return self.deltas[tuple(order)]

    @property
    def cardinality(self) -> int:
        return self.canonical.size

    def stage(self, cols):
        if len(cols) != self.arity:
            raise InternalError(f"staging arity mismatch for {self.name}")
        if len(cols[0]):
            self.staging.append(cols)

    def staged_columns(self):
        if not self.staging:
            return rowops.empty_columns(self.arity)
        return rowops.concat_columns(self.staging)

    def clear_staging(self):
        self.staging = []

    def take_delta(self, rows_attr):
        """Install freshly derived rows (attribute order, sorted, deduplicated,
        disjoint from full) as the delta, sorted per index order."""
        for order in self.orders:
            ordered = tuple(rows_attr[a] for a in order)
            if order != self.identity:
                ordered = rowops.sort_rows(ordered)
            self.deltas[order] = ColumnarRelation.from_sorted(self.arity, order, ordered)

    def merge_delta(self):
        """Fold the current delta into every full index."""
        for order in self.orders:
            delta_cols = self.deltas[order].body
            self.fulls[order] = self.fulls[order].merge_delta(delta_cols, self.flush_limit)

    def snapshot_full_as_delta(self):
        """Make the delta equal to the full contents (recursive stratum entry)."""
        for order in self.orders:
            full = self.fulls[order]
            self.deltas[order] = ColumnarRelation(
                self.arity, order, rowops.empty_columns(self.arity), full.merged_columns(), full.hist
            )

    def clear_delta(self):
        for order in self.orders:
            self.deltas[order] = ColumnarRelation.empty(self.arity, order)

    def attr_rows(self):
        """Logical contents, sorted, in attribute order."""
        return self.canonical.merged_columns()

    def check_invariants(self):
        base = None
        for order, rel in self.fulls.items():
            rel.check_invariants()
            inverse = [0] * self.arity
            for k, a in enumerate(order):
                inverse[a] = k
            merged = rel.merged_columns()
            attr = rowops.sort_rows(tuple(merged[inverse[a]] for a in range(self.arity)))
            if base is None:
                base = attr
            else:
                for x, y in zip(base, attr):
                    if not np.array_equal(x, y):
                        raise InternalError(f"index {order} of {self.name} diverged")
