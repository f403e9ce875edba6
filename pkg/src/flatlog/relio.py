"""Fact file I/O.

Text form: UTF-8 TSV, one tuple per line, tab-separated opaque constants.

Binary snapshot (fast reload), little-endian throughout:

    magic   8 bytes  b"FLATCOL1"
    arity   u32
    rows    u64
    columns arity x rows x u32 ids (column after column)
    dict    u32 count, then per id in order: u32 byte length + UTF-8 bytes

Snapshot ids index the trailing dictionary, so files are self-contained
and independent of any particular interning order.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import InputError

SNAPSHOT_MAGIC = b"FLATCOL1"


def read_tsv(path):
    """List of constant tuples from a TSV fact file."""
    rows = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                rows.append(tuple(line.split("\t")))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    return rows


def write_tsv(path, rows):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write("\t".join(row))
                fh.write("\n")
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc


def write_snapshot(path, rows, arity: int):
    """Write constant tuples as a binary snapshot with a local dictionary."""
    ids = {}
    strings = []
    columns = [np.empty(len(rows), dtype=np.uint32) for _ in range(arity)]
    for i, row in enumerate(rows):
        if len(row) != arity:
            raise InputError(f"snapshot row {row!r} does not have arity {arity}")
        for k, constant in enumerate(row):
            ident = ids.get(constant)
            if ident is None:
                ident = len(strings)
                ids[constant] = ident
                strings.append(constant)
            columns[k][i] = ident
    try:
        with open(path, "wb") as fh:
            fh.write(SNAPSHOT_MAGIC)
            fh.write(struct.pack("<IQ", arity, len(rows)))
            for col in columns:
                fh.write(col.astype("<u4").tobytes())
            fh.write(struct.pack("<I", len(strings)))
            for s in strings:
                data = s.encode("utf-8")
                fh.write(struct.pack("<I", len(data)))
                fh.write(data)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc


def read_snapshot(path):
    """Read a snapshot back into a list of constant tuples."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if data[:8] != SNAPSHOT_MAGIC:
        raise InputError(f"{path}: not a snapshot file")
    arity, nrows = struct.unpack_from("<IQ", data, 8)
    pos = 8 + 12
    columns = []
    for _ in range(arity):
        col = np.frombuffer(data, dtype="<u4", count=nrows, offset=pos)
        columns.append(col)
        pos += 4 * nrows
    (count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    strings = []
    for _ in range(count):
        (length,) = struct.unpack_from("<I", data, pos)
        pos += 4
        strings.append(data[pos : pos + length].decode("utf-8"))
        pos += length
    rows = []
    for i in range(nrows):
        rows.append(tuple(strings[int(col[i])] for col in columns))
    return rows
