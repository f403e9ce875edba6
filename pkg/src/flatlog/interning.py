"""Constant interning.

Constants appearing in fact files and rule literals are mapped to dense
integer ids (first-seen order, starting at 0) so relations can store
fixed-width columns. Ids are 32-bit by default; set FLATLOG_ID64=1 before
import for 64-bit ids.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import InputError

VALUE_DTYPE = np.uint64 if os.environ.get("FLATLOG_ID64", "") not in ("", "0") else np.uint32
ID_MAX = int(np.iinfo(VALUE_DTYPE).max)


class Interner:
    """Bijection between constants (str or int) and dense ids."""

    def __init__(self):
        self._ids: dict = {}
        self._constants: list = []

    def __len__(self) -> int:
        return len(self._constants)

    def intern(self, constant) -> int:
        if not isinstance(constant, (str, int)):
            raise InputError(f"cannot intern {type(constant).__name__} value {constant!r}")
        ident = self._ids.get(constant)
        if ident is None:
            ident = len(self._constants)
            if ident > ID_MAX:
                raise InputError(
                    f"interner capacity exceeded: more than {ID_MAX + 1} distinct constants"
                )
            self._ids[constant] = ident
            self._constants.append(constant)
        return ident

    def lookup(self, constant):
        """Id of an already-interned constant, or None."""
        return self._ids.get(constant)

    def value(self, ident: int):
        return self._constants[ident]

    def text(self, ident: int) -> str:
        return str(self._constants[ident])

    def intern_rows(self, rows, arity: int):
        """Intern an iterable of constant tuples into `arity` parallel columns."""
        cols = [[] for _ in range(arity)]
        for row in rows:
            if len(row) != arity:
                raise InputError(f"expected {arity} columns, got {len(row)}: {row!r}")
            for k, constant in enumerate(row):
                cols[k].append(self.intern(constant))
        return tuple(np.asarray(c, dtype=VALUE_DTYPE) for c in cols)
