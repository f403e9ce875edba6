"""Shared fixtures and generators for the test suite."""

from __future__ import annotations

import random

from flatlog import Engine, parse

TC_SOURCE = """
.decl Edge(a:symbol, b:symbol)
.decl TC(a:symbol, b:symbol)
.input Edge
.output TC
TC(x, y) :- Edge(x, y).
TC(x, z) :- TC(x, y), Edge(y, z).
"""

SG_SOURCE = """
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

ANDERSEN_SOURCE = """
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

NEGATION_SOURCE = """
.decl Edge(a:symbol, b:symbol)
.decl Node(a:symbol)
.decl TC(a:symbol, b:symbol)
.decl Unreach(a:symbol)
.input Edge
.output Unreach
Node(x) :- Edge(x, y).
Node(y) :- Edge(x, y).
TC(x, y) :- Edge(x, y).
TC(x, z) :- TC(x, y), Edge(y, z).
Unreach(x) :- Node(x), !TC("n0", x).
"""


def random_graph(rng, n_nodes, n_edges, prefix="n"):
    nodes = [f"{prefix}{i}" for i in range(n_nodes)]
    edges = set()
    attempts = 0
    while len(edges) < n_edges and attempts < n_edges * 20:
        a, b = rng.randrange(n_nodes), rng.randrange(n_nodes)
        attempts += 1
        if a != b:
            edges.add((nodes[a], nodes[b]))
    return sorted(edges)


def random_forest(rng, target_edges, max_width=6, max_depth=4, prefix="f"):
    """Random forest with bounded level widths, so same-generation classes
    stay small while the edge count grows."""
    edges = []
    serial = 0
    while len(edges) < target_edges:
        depth = rng.randint(2, max_depth)
        level = [f"{prefix}{serial}"]
        serial += 1
        for _ in range(depth):
            width = rng.randint(1, max_width)
            nxt = []
            for _ in range(width):
                node = f"{prefix}{serial}"
                serial += 1
                edges.append((rng.choice(level), node))
                nxt.append(node)
            level = nxt
    return sorted(set(edges))


def random_andersen(rng, statements):
    variables = [f"v{i}" for i in range(max(statements // 3, 4))]
    heaps = [f"h{i}" for i in range(max(statements // 5, 3))]
    facts = {"AddressOf": set(), "Assign": set(), "Load": set(), "Store": set()}
    for _ in range(statements):
        kind = rng.randrange(4)
        if kind == 0:
            facts["AddressOf"].add((rng.choice(variables), rng.choice(heaps)))
        elif kind == 1:
            facts["Assign"].add((rng.choice(variables), rng.choice(variables)))
        elif kind == 2:
            facts["Load"].add((rng.choice(variables), rng.choice(variables)))
        else:
            facts["Store"].add((rng.choice(variables), rng.choice(variables)))
    return {k: sorted(v) for k, v in facts.items()}


def seeded_engine(source_or_program, facts, **kwargs) -> Engine:
    """Engine with inputs loaded and merged, strata not yet evaluated."""
    program = (
        parse(source_or_program) if isinstance(source_or_program, str) else source_or_program
    )
    engine = Engine(program, **kwargs)
    for name, rows in facts.items():
        engine.load_facts(name, rows)
    engine.prepare_inputs()
    return engine


def plan_for_head(engine, head_relation):
    for stratum in engine.compiled.strata:
        for plan in stratum.plans:
            if plan.head_relation == head_relation:
                return plan
    raise AssertionError(f"no plan produces {head_relation}")


# --- random join queries (one rule, no recursion) ---------------------------


def zipf_value(rng, domain, skew=1.4):
    """Skewed draw from range(domain): rank r with weight 1/(r+1)^skew."""
    weights = [(r + 1) ** -skew for r in range(domain)]
    total = sum(weights)
    x = rng.random() * total
    acc = 0.0
    for r, w in enumerate(weights):
        acc += w
        if x <= acc:
            return r
    return domain - 1


def random_join_case(seed):
    """A random connected conjunctive query plus skewed facts.

    Returns (program, facts, query_vars) where the program has a single rule
    Out(vars...) :- atoms..., every relation is an input, and Out is output.
    The head projects every variable actually used, in first-seen order.
    """
    rng = random.Random(seed)
    n_atoms = rng.randint(2, 6)
    pool = [f"x{i}" for i in range(rng.randint(2, 7))]
    domain = rng.randint(6, 40)

    atoms = []
    used = []
    for k in range(n_atoms):
        arity = rng.randint(1, 3)
        if k == 0:
            args = [rng.choice(pool) for _ in range(arity)]
        else:
            anchor = rng.choice(used)  # keep the query connected
            args = [anchor] + [rng.choice(pool) for _ in range(arity - 1)]
            rng.shuffle(args)
        for v in args:
            if v not in used:
                used.append(v)
        atoms.append((f"R{k}", args))

    decls, inputs, body = [], [], []
    facts = {}
    for name, args in atoms:
        arity = len(args)
        cols = ", ".join(f"c{i}:symbol" for i in range(arity))
        decls.append(f".decl {name}({cols})")
        inputs.append(f".input {name}")
        body.append(f"{name}({', '.join(args)})")
        n_rows = rng.randint(5, 120)
        rows = {tuple(f"v{zipf_value(rng, domain)}" for _ in range(arity)) for _ in range(n_rows)}
        facts[name] = sorted(rows)

    head_vars = used
    decls.append(f".decl Out({', '.join(f'c{i}:symbol' for i in range(len(head_vars)))})")
    source = "\n".join(
        decls + inputs + [".output Out", f"Out({', '.join(head_vars)}) :- {', '.join(body)}."]
    )
    return parse(source), facts, head_vars


# --- a fractured recursive stratum ------------------------------------------


def fractured_stratum_case(n_rules=12, seed=5, n_nodes=14, edges_per_rel=20):
    """One strongly connected stratum of `n_rules` mutually recursive rules.

    A_i(x,y) :- A_{(i+1) mod n}(x,z), B_i(z,y), seeded through one base rule.
    """
    rng = random.Random(seed)
    decls, inputs, rules = [], [], []
    facts = {}
    for i in range(n_rules):
        decls.append(f".decl A{i}(a:symbol, b:symbol)")
        decls.append(f".decl B{i}(a:symbol, b:symbol)")
        inputs.append(f".input B{i}")
        facts[f"B{i}"] = random_graph(rng, n_nodes, edges_per_rel)
        rules.append(f"A{i}(x, y) :- A{(i + 1) % n_rules}(x, z), B{i}(z, y).")
    decls.append(".decl Seed(a:symbol, b:symbol)")
    inputs.append(".input Seed")
    facts["Seed"] = random_graph(rng, n_nodes, edges_per_rel)
    rules.append("A0(x, y) :- Seed(x, y).")
    outputs = [f".output A{i}" for i in range(n_rules)]
    source = "\n".join(decls + inputs + outputs + rules)
    return parse(source), facts
