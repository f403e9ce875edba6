"""Bulk operations on tuple sets stored as parallel columns.

A row set is a tuple of equal-length 1-D arrays, one per column; row i is
(cols[0][i], ..., cols[m-1][i]). Order is lexicographic over columns left
to right. Everything here is deterministic and stable.
"""

from __future__ import annotations

import numpy as np

from .interning import VALUE_DTYPE

Columns = tuple


def empty_columns(arity: int) -> Columns:
    return tuple(np.empty(0, dtype=VALUE_DTYPE) for _ in range(arity))


def nrows(cols: Columns) -> int:
    return len(cols[0])


def concat_columns(chunks) -> Columns:
    chunks = list(chunks)
    if not chunks:
        raise ValueError("concat_columns needs at least one chunk")
    if len(chunks) == 1:
        return chunks[0]
    arity = len(chunks[0])
    return tuple(np.concatenate([c[k] for c in chunks]) for k in range(arity))


def lexsort_order(cols: Columns) -> np.ndarray:
    # np.lexsort treats the last key as primary, so feed columns reversed.
    return np.lexsort(tuple(reversed(cols)))


def sort_rows(cols: Columns) -> Columns:
    if nrows(cols) <= 1:
        return cols
    order = lexsort_order(cols)
    return tuple(c[order] for c in cols)


def dedup_sorted(cols: Columns) -> Columns:
    n = nrows(cols)
    if n <= 1:
        return cols
    keep = np.zeros(n, dtype=bool)
    keep[0] = True
    for c in cols:
        np.logical_or(keep[1:], c[1:] != c[:-1], out=keep[1:])
    if keep.all():
        return cols
    return tuple(c[keep] for c in cols)


def sort_dedup(cols: Columns) -> Columns:
    return dedup_sorted(sort_rows(cols))


def is_sorted_strict(cols: Columns) -> bool:
    """True iff rows are strictly increasing (sorted and duplicate-free)."""
    n = nrows(cols)
    if n <= 1:
        return True
    lt = np.zeros(n - 1, dtype=bool)   # row[i] < row[i+1] decided on an earlier column
    eq = np.ones(n - 1, dtype=bool)    # all columns so far equal
    for c in cols:
        lt |= eq & (c[:-1] < c[1:])
        eq &= c[:-1] == c[1:]
    return bool(np.all(lt))


def merge_sorted(a: Columns, b: Columns) -> Columns:
    """Merge two sorted duplicate-free disjoint row sets into one sorted run."""
    if nrows(a) == 0:
        return b
    if nrows(b) == 0:
        return a
    return sort_rows(concat_columns([a, b]))


def merge_many(parts) -> Columns:
    parts = [p for p in parts if nrows(p) > 0]
    if not parts:
        raise ValueError("merge_many needs the arity from somewhere; pass at least one part")
    if len(parts) == 1:
        return parts[0]
    return sort_rows(concat_columns(parts))


def member_mask(a: Columns, b: Columns) -> np.ndarray:
    """Per-row membership of `a` in `b`. Both must be sorted and duplicate-free."""
    na, nb = nrows(a), nrows(b)
    if na == 0 or nb == 0:
        return np.zeros(na, dtype=bool)
    comb = tuple(np.concatenate([cb, ca]) for cb, ca in zip(b, a))
    order = lexsort_order(comb)  # stable: b rows precede equal a rows
    eq_prev = np.ones(na + nb - 1, dtype=bool)
    for c in comb:
        s = c[order]
        eq_prev &= s[1:] == s[:-1]
    is_a = order >= nb
    prev_is_b = np.empty(na + nb, dtype=bool)
    prev_is_b[0] = False
    prev_is_b[1:] = order[:-1] < nb
    hit = np.zeros(na + nb, dtype=bool)
    hit[1:] = eq_prev
    hit &= is_a & prev_is_b
    out = np.zeros(na, dtype=bool)
    out[order[hit] - nb] = True
    return out


def diff_sorted(a: Columns, *bs: Columns) -> Columns:
    """Rows of sorted duplicate-free `a` present in none of the sorted sets `bs`."""
    if nrows(a) == 0:
        return a
    drop = np.zeros(nrows(a), dtype=bool)
    for b in bs:
        if nrows(b):
            drop |= member_mask(a, b)
    if not drop.any():
        return a
    keep = ~drop
    return tuple(c[keep] for c in a)


def as_tuples(cols: Columns) -> list:
    if nrows(cols) == 0:
        return []
    return [tuple(int(v) for v in row) for row in np.stack(cols, axis=1)]


def from_tuples(rows, arity: int) -> Columns:
    cols = [[] for _ in range(arity)]
    for row in rows:
        for k in range(arity):
            cols[k].append(row[k])
    return tuple(np.asarray(c, dtype=VALUE_DTYPE) for c in cols)
