"""Benchmark suites: deterministic synthetic instances plus a harness that
runs them, optionally verifies against the reference evaluator, and reports
phase timings and iteration counts."""

from __future__ import annotations

import random
import time

from .errors import InputError
from .oracle import naive_fixpoint
from .parser import parse
from .runtime import Engine, Stats

SCALES = {"tiny": 0, "small": 1, "medium": 2}

TC_PROGRAM = """
.decl Edge(a:symbol, b:symbol)
.decl TC(a:symbol, b:symbol)
.input Edge
.output TC
TC(x, y) :- Edge(x, y).
TC(x, z) :- TC(x, y), Edge(y, z).
"""

SG_PROGRAM = """
.decl Edge(a:symbol, b:symbol)
.decl Node(a:symbol)
.decl Same(a:symbol, b:symbol)
.decl SG(a:symbol, b:symbol)
.input Edge
.output SG
Node(x) :- Edge(x, y).
Node(y) :- Edge(x, y).
Same(x, x) :- Node(x).
SG(x, y) :- Edge(p, x), Edge(p, y), !Same(x, y).
SG(x, y) :- Edge(a, x), SG(a, b), Edge(b, y).
"""

TRIANGLE_PROGRAM = """
.decl R(a:symbol, b:symbol)
.decl S(a:symbol, b:symbol)
.decl T(a:symbol, b:symbol)
.decl Triangle(a:symbol, b:symbol, c:symbol)
.input R
.input S
.input T
.output Triangle
Triangle(x, y, z) :- R(x, y), S(y, z), T(z, x).
"""

STAR_PROGRAM = """
.decl Hub(a:symbol)
.decl R1(a:symbol, b:symbol)
.decl R2(a:symbol, b:symbol)
.decl R3(a:symbol, b:symbol)
.decl Star(a:symbol, b:symbol, c:symbol, d:symbol)
.input Hub
.input R1
.input R2
.input R3
.output Star
Star(x, a, b, c) :- Hub(x), R1(x, a), R2(x, b), R3(x, c).
"""

NEG2HOP_PROGRAM = """
.decl E1(a:symbol, b:symbol)
.decl E2(a:symbol, b:symbol)
.decl E3(a:symbol, b:symbol)
.decl Hop(a:symbol, b:symbol)
.input E1
.input E2
.input E3
.output Hop
Hop(x, z) :- E1(x, y), E2(y, z), !E3(x, z).
"""

ANDERSEN_PROGRAM = """
.decl AddressOf(a:symbol, b:symbol)
.decl Assign(a:symbol, b:symbol)
.decl Load(a:symbol, b:symbol)
.decl Store(a:symbol, b:symbol)
.decl PointsTo(a:symbol, b:symbol)
.input AddressOf
.input Assign
.input Load
.input Store
.output PointsTo
PointsTo(x, y) :- AddressOf(x, y).
PointsTo(x, z) :- Assign(x, y), PointsTo(y, z).
PointsTo(x, z) :- Load(x, y), PointsTo(y, w), PointsTo(w, z).
PointsTo(w, z) :- Store(x, y), PointsTo(x, w), PointsTo(y, z).
"""


def _names(prefix, n):
    return [f"{prefix}{i}" for i in range(n)]


def _random_edges(rng, nodes, count):
    edges = set()
    while len(edges) < count:
        a = rng.randrange(len(nodes))
        b = rng.randrange(len(nodes))
        if a != b:
            edges.add((nodes[a], nodes[b]))
    return sorted(edges)


def _scale_value(scale, tiny, small, medium):
    if isinstance(scale, int):
        return scale
    try:
        return (tiny, small, medium)[SCALES[scale]]
    except KeyError:
        raise InputError(f"unknown scale {scale!r} (use tiny/small/medium or an integer)")


def gen_tc(scale, seed):
    n = _scale_value(scale, 10, 100, 1000)
    nodes = _names("n", n)
    edges = [(nodes[i], nodes[i + 1]) for i in range(n - 1)]
    return TC_PROGRAM, {"Edge": edges}


def gen_sg(scale, seed):
    n = _scale_value(scale, 12, 60, 400)
    rng = random.Random(seed)
    nodes = _names("n", n)
    edges = _random_edges(rng, nodes, int(n * 1.4))
    return SG_PROGRAM, {"Edge": edges}


def gen_triangle(scale, seed):
    n = _scale_value(scale, 15, 80, 400)
    rng = random.Random(seed)
    nodes = _names("v", n)
    edges = _random_edges(rng, nodes, n * 3)
    return TRIANGLE_PROGRAM, {"R": edges, "S": edges, "T": edges}


def gen_star(scale, seed):
    n = _scale_value(scale, 12, 60, 300)
    rng = random.Random(seed)
    hubs = _names("h", max(n // 4, 2))
    leaves = _names("l", n)
    def legs():
        return sorted(
            {(rng.choice(hubs), rng.choice(leaves)) for _ in range(n * 2)}
        )
    return STAR_PROGRAM, {
        "Hub": [(h,) for h in hubs],
        "R1": legs(),
        "R2": legs(),
        "R3": legs(),
    }


def gen_neg2hop(scale, seed):
    n = _scale_value(scale, 15, 80, 400)
    rng = random.Random(seed)
    nodes = _names("v", n)
    return NEG2HOP_PROGRAM, {
        "E1": _random_edges(rng, nodes, n * 2),
        "E2": _random_edges(rng, nodes, n * 2),
        "E3": _random_edges(rng, nodes, n),
    }


def gen_andersen(scale, seed):
    statements = _scale_value(scale, 30, 150, 1500)
    rng = random.Random(seed)
    variables = _names("v", max(statements // 3, 4))
    heaps = _names("h", max(statements // 5, 3))
    address, assign, load, store = set(), set(), set(), set()
    for _ in range(statements):
        kind = rng.randrange(4)
        if kind == 0:
            address.add((rng.choice(variables), rng.choice(heaps)))
        elif kind == 1:
            assign.add((rng.choice(variables), rng.choice(variables)))
        elif kind == 2:
            load.add((rng.choice(variables), rng.choice(variables)))
        else:
            store.add((rng.choice(variables), rng.choice(variables)))
    return ANDERSEN_PROGRAM, {
        "AddressOf": sorted(address),
        "Assign": sorted(assign),
        "Load": sorted(load),
        "Store": sorted(store),
    }


SUITES = {
    "tc": gen_tc,
    "sg": gen_sg,
    "triangle": gen_triangle,
    "star": gen_star,
    "neg2hop": gen_neg2hop,
    "andersen": gen_andersen,
}

ORACLE_FACT_LIMIT = 10_000


def run_suite(suite, scale, seed, *, workers=1, schedule="seq", verify=False):
    """Generate, evaluate, optionally verify; returns a report dict."""
    if suite not in SUITES:
        raise InputError(f"unknown suite {suite!r} (choose from {sorted(SUITES)})")
    source, facts = SUITES[suite](scale, seed)
    program = parse(source)
    stats = Stats(enabled=True)
    engine = Engine(program, workers=workers, schedule=schedule, stats=stats)
    for name, rows in facts.items():
        engine.load_facts(name, rows)
    started = time.perf_counter()
    summary = engine.solve()
    wall = time.perf_counter() - started
    report = {
        "suite": suite,
        "scale": scale,
        "seed": seed,
        "workers": workers,
        "schedule": schedule,
        "input_tuples": sum(len(rows) for rows in facts.values()),
        "relations": summary.relations,
        "iterations": {
            "|".join(sorted(s.rules)): s.iterations for s in summary.strata
        },
        "phase_micros": stats.phase_totals(),
        "wall_seconds": round(wall, 6),
        "verified": None,
    }
    if verify:
        total_facts = sum(len(rows) for rows in facts.values())
        if total_facts > ORACLE_FACT_LIMIT:
            report["verified"] = "skipped (instance beyond reference limits)"
        else:
            expected, _ = naive_fixpoint(program, facts)
            for name in program.declarations:
                got = set(engine.relation_rows(name))
                if got != expected[name]:
                    raise InputError(
                        f"verification failed for {name}: engine {len(got)} tuples, "
                        f"reference {len(expected[name])}"
                    )
            report["verified"] = True
    return report
