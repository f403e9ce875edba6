import pytest

from flatlog import parse, stratify
from flatlog.errors import ProgramError

from util import TC_SOURCE


def test_tc_two_strata():
    prog = parse(TC_SOURCE)
    strata = stratify(prog.rules)
    assert len(strata) == 2
    base, rec = strata
    assert not base.recursive and len(base.rules) == 1
    assert base.rules[0].body[0].relation == "Edge"
    assert rec.recursive and len(rec.rules) == 1


def test_acyclic_chain_three_singleton_strata():
    src = """
.decl A(x:symbol)
.decl B(x:symbol)
.decl C(x:symbol)
.decl D(x:symbol)
B(x) :- A(x).
C(x) :- B(x).
D(x) :- C(x).
"""
    strata = stratify(parse(src).rules)
    assert [len(s.rules) for s in strata] == [1, 1, 1]
    assert [s.recursive for s in strata] == [False, False, False]
    assert [s.rules[0].head.relation for s in strata] == ["B", "C", "D"]


def test_negative_self_cycle_rejected():
    src = ".decl R(x:symbol)\n.decl S(x:symbol)\nR(x) :- S(x), !R(x).\n"
    with pytest.raises(ProgramError, match="not stratifiable"):
        stratify(parse(src).rules)


def test_negative_two_cycle_rejected():
    src = """
.decl P(x:symbol)
.decl Q(x:symbol)
.decl S(x:symbol)
P(x) :- S(x), !Q(x).
Q(x) :- P(x).
"""
    with pytest.raises(ProgramError, match="not stratifiable"):
        stratify(parse(src).rules)


def test_mutual_recursion_single_stratum():
    src = """
.decl P(x:symbol)
.decl Q(x:symbol)
.decl S(x:symbol)
P(x) :- S(x).
P(x) :- Q(x).
Q(x) :- P(x).
"""
    strata = stratify(parse(src).rules)
    assert [sorted(r.index for r in s.rules) for s in strata] == [[0], [1, 2]]
    assert strata[1].recursive


def test_negation_across_strata_is_fine():
    src = """
.decl S(x:symbol)
.decl P(x:symbol)
.decl Q(x:symbol)
P(x) :- S(x).
Q(x) :- S(x), !P(x).
"""
    strata = stratify(parse(src).rules)
    assert [s.rules[0].head.relation for s in strata] == ["P", "Q"]


def test_producers_precede_consumers():
    # every relation read by a stratum is fully produced by earlier strata
    src = """
.decl E(a:symbol, b:symbol)
.decl T(a:symbol, b:symbol)
.decl U(a:symbol)
T(x, y) :- E(x, y).
T(x, z) :- T(x, y), E(y, z).
U(x) :- T(x, x).
"""
    strata = stratify(parse(src).rules)
    produced = set()
    for s in strata:
        heads = {r.head.relation for r in s.rules}
        for r in s.rules:
            for a in r.body:
                assert a.relation in produced | heads | {"E"}
        produced |= heads
    assert [sorted(r.head.relation for r in s.rules) for s in strata][-1] == ["U"]
