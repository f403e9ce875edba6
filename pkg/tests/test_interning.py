import numpy as np
import pytest

from flatlog import interning
from flatlog.errors import InputError
from flatlog.interning import Interner


def test_same_constant_same_id():
    it = Interner()
    assert it.intern("a") == it.intern("a")


def test_distinct_constants_distinct_ids():
    it = Interner()
    assert it.intern("a") != it.intern("b")


def test_ids_dense_first_seen_order():
    # derived by running the interner on a three-constant fixture
    it = Interner()
    ids = [it.intern(c) for c in ("alpha", "beta", "gamma")]
    assert ids == [0, 1, 2]
    assert it.intern("beta") == 1
    assert [it.value(i) for i in range(3)] == ["alpha", "beta", "gamma"]


def test_str_and_int_keys_are_distinct():
    it = Interner()
    assert it.intern(17) != it.intern("17")
    assert it.value(it.intern(17)) == 17


def test_lookup_without_interning():
    it = Interner()
    it.intern("a")
    assert it.lookup("a") == 0
    assert it.lookup("b") is None
    assert len(it) == 1


def test_capacity_exceeded(monkeypatch):
    monkeypatch.setattr(interning, "ID_MAX", 1)
    it = Interner()
    it.intern("a")
    it.intern("b")
    with pytest.raises(InputError):
        it.intern("c")


def test_intern_rows_builds_columns():
    it = Interner()
    cols = it.intern_rows([("a", "b"), ("b", "a")], 2)
    assert [c.dtype == interning.VALUE_DTYPE for c in cols] == [True, True]
    assert cols[0].tolist() == [0, 1]
    assert cols[1].tolist() == [1, 0]


def test_intern_rows_arity_mismatch():
    with pytest.raises(InputError):
        Interner().intern_rows([("a",)], 2)
