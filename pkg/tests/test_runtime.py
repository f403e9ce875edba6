import random

import pytest

from flatlog import Engine, parse
from flatlog.errors import InternalError, ProgramError
from flatlog.oracle import naive_fixpoint
from flatlog.runtime import Stats, run_program

from util import (
    ANDERSEN_SOURCE,
    NEGATION_SOURCE,
    SG_SOURCE,
    TC_SOURCE,
    fractured_stratum_case,
    random_andersen,
    random_forest,
    random_graph,
    seeded_engine,
)


def relation_sets(engine, program):
    return {name: set(engine.relation_rows(name)) for name in program.declarations}


def test_tc_three_cycle_all_pairs():
    prog = parse(TC_SOURCE)
    edges = [("1", "2"), ("2", "3"), ("3", "1")]
    engine, summary = run_program(prog, {"Edge": edges})
    tc = set(engine.relation_rows("TC"))
    assert tc == {(a, b) for a in ("1", "2", "3") for b in ("1", "2", "3")}
    expected, rounds = naive_fixpoint(prog, {"Edge": edges})
    assert tc == expected["TC"]
    assert summary.rounds_by_rules() == rounds


def test_unproductive_stratum_terminates_after_one_check():
    prog = parse(TC_SOURCE)
    # a single self-loop: the base stratum produces it, recursion adds nothing
    engine, summary = run_program(prog, {"Edge": [("a", "a")]})
    rec = [s for s in summary.strata if s.recursive][0]
    assert rec.iterations == 1
    assert engine.relation_rows("TC") == [("a", "a")]


def test_sg_random_500_edges_matches_reference_rounds():
    rng = random.Random(77)
    prog = parse(SG_SOURCE)
    edges = random_forest(rng, 500)
    assert len(edges) >= 500
    engine, summary = run_program(prog, {"Edge": edges})
    expected, rounds = naive_fixpoint(prog, {"Edge": edges})
    assert set(engine.relation_rows("SG")) == expected["SG"]
    assert summary.rounds_by_rules() == rounds


def test_sg_ten_node_balanced_binary_tree():
    prog = parse(SG_SOURCE)
    edges = [(f"n{i}", f"n{2 * i + c}") for i in range(1, 6) for c in (0, 1) if 2 * i + c <= 10]
    engine, _ = run_program(prog, {"Edge": edges})
    expected, _ = naive_fixpoint(prog, {"Edge": edges})
    assert set(engine.relation_rows("SG")) == expected["SG"]


def test_two_stratum_program_base_then_closure():
    prog = parse(TC_SOURCE)
    engine, summary = run_program(prog, {"Edge": [("1", "2"), ("2", "3")]})
    assert [s.recursive for s in summary.strata] == [False, True]
    assert set(engine.relation_rows("TC")) == {("1", "2"), ("2", "3"), ("1", "3")}


def test_negation_complement_on_ten_nodes():
    rng = random.Random(5)
    prog = parse(NEGATION_SOURCE)
    edges = random_graph(rng, 10, 14)
    engine, _ = run_program(prog, {"Edge": edges})
    got = relation_sets(engine, prog)
    # reference complement computed explicitly
    nodes = {a for a, _ in edges} | {b for _, b in edges}
    reach = {b for (a, b) in got["TC"] if a == "n0"}
    assert got["Unreach"] == {(n,) for n in nodes if n not in reach}
    expected, _ = naive_fixpoint(prog, {"Edge": edges})
    assert got == expected


def test_andersen_random_statements_match_reference():
    rng = random.Random(12)
    prog = parse(ANDERSEN_SOURCE)
    facts = random_andersen(rng, 200)
    engine, summary = run_program(prog, facts)
    expected, rounds = naive_fixpoint(prog, facts)
    assert set(engine.relation_rows("PointsTo")) == expected["PointsTo"]
    assert summary.rounds_by_rules() == rounds


def test_schedule_modes_identical_relations():
    prog, facts = fractured_stratum_case(n_rules=12, seed=3)
    results = {}
    for schedule in ("seq", "stream"):
        engine, summary = run_program(prog, facts, schedule=schedule)
        results[schedule] = (
            relation_sets(engine, prog),
            summary.rounds_by_rules(),
        )
    assert results["seq"] == results["stream"]
    # the twelve-rule component really is one stratum
    engine, summary = run_program(prog, facts)
    sizes = sorted(len(s.rule_indexes) for s in summary.strata)
    assert sizes[-1] == 12


def test_phase_aligned_two_copy_rules():
    src = """
.decl A(x:symbol)
.decl B(x:symbol)
.decl C(x:symbol)
.input A
.output B
.output C
B(x) :- A(x).
C(x) :- A(x).
"""
    prog = parse(src)
    facts = {"A": [("1",), ("2",)]}
    seq, _ = run_program(prog, facts, schedule="seq")
    stream, _ = run_program(prog, facts, schedule="stream")
    assert relation_sets(seq, prog) == relation_sets(stream, prog)


def test_phase_aligned_single_rule_stratum_degenerates():
    prog = parse(TC_SOURCE)
    facts = {"Edge": [("a", "b"), ("b", "c"), ("c", "d")]}
    seq, s1 = run_program(prog, facts, schedule="seq")
    stream, s2 = run_program(prog, facts, schedule="stream")
    assert seq.relation_rows("TC") == stream.relation_rows("TC")
    assert s1.rounds_by_rules() == s2.rounds_by_rules()


def test_results_invariant_under_worker_count():
    rng = random.Random(9)
    prog = parse(SG_SOURCE)
    edges = random_graph(rng, 40, 90)
    baseline = None
    for workers in (1, 2, 8):
        engine, summary = run_program(prog, {"Edge": edges}, workers=workers)
        current = (relation_sets(engine, prog), summary.rounds_by_rules())
        if baseline is None:
            baseline = current
        assert current == baseline


def test_full_sizes_nondecreasing_and_watchdog():
    prog = parse(TC_SOURCE)
    edges = [(f"n{i}", f"n{i+1}") for i in range(12)]
    engine, summary = run_program(prog, {"Edge": edges}, max_iterations=100)
    assert summary.relations["TC"] == 12 * 13 // 2
    with pytest.raises(InternalError):
        run_program(prog, {"Edge": edges}, max_iterations=3)


def test_stats_records_phases(tmp_path):
    stats = Stats(path=str(tmp_path / "stats.jsonl"))
    prog = parse(TC_SOURCE)
    run_program(prog, {"Edge": [("1", "2"), ("2", "3")]}, stats=stats)
    stats.close()
    phases = {r["phase"] for r in stats.records}
    assert {"histogram", "count", "materialize", "delta", "build-index", "merge"} <= phases
    import json

    lines = (tmp_path / "stats.jsonl").read_text().splitlines()
    assert all({"stratum", "iteration", "rule", "phase", "micros", "tuples"}
               == set(json.loads(l)) for l in lines)


def test_engine_rejects_bad_config():
    prog = parse(TC_SOURCE)
    with pytest.raises(ProgramError):
        Engine(prog, workers=0)
    with pytest.raises(ProgramError):
        Engine(prog, schedule="async")


def test_load_facts_unknown_relation():
    prog = parse(TC_SOURCE)
    engine = Engine(prog)
    with pytest.raises(ProgramError):
        engine.load_facts("Nope", [("1",)])


WILDCARD_NEG_SOURCE = """
.decl R(a:symbol)
.decl T(a:symbol, b:symbol)
.decl U(a:symbol, b:symbol)
.decl W(a:symbol, b:symbol)
.decl Out(a:symbol, b:symbol, c:symbol)
.input R
.input T
.input U
.input W
.output Out
Out(x, y, z) :- R(x), T(x, y), U(y, z), !W(x, _).
"""


@pytest.mark.parametrize(
    "probe",
    ["!W(x, _)", "!W(_, y)", "!W(_, _)", '!W("v0", "v1")', "!W(x, y)"],
)
def test_negation_probe_shapes_match_reference(probe):
    prog = parse(WILDCARD_NEG_SOURCE.replace("!W(x, _)", probe))
    rng = random.Random(3)
    vals = [f"v{i}" for i in range(8)]
    facts = {
        "R": sorted({(rng.choice(vals),) for _ in range(6)}),
        "T": sorted({(rng.choice(vals), rng.choice(vals)) for _ in range(14)}),
        "U": sorted({(rng.choice(vals), rng.choice(vals)) for _ in range(14)}),
        "W": sorted({(rng.choice(vals), rng.choice(vals)) for _ in range(5)}),
    }
    engine, _ = run_program(prog, facts)
    expected, _ = naive_fixpoint(prog, facts)
    assert set(engine.relation_rows("Out")) == expected["Out"]


def test_ground_facts_seed_relations():
    src = """
.decl R(a:symbol)
.decl S(a:symbol)
.output S
R("seed").
S(x) :- R(x).
"""
    engine, _ = run_program(parse(src), {})
    assert engine.relation_rows("S") == [("seed",)]
