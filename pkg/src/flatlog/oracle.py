"""Reference evaluators for tests.

Deliberately share nothing with the engine beyond the parsed rule objects:
tuples are plain Python tuples of constants in hash sets, rule application
is a transparent nested scan, and the recursive-component grouping uses
its own Kosaraju pass instead of the engine's Tarjan. Agreement between
the two sides is therefore evidence, not an identity.
"""

from __future__ import annotations

import random
from itertools import product


def _match(args, row, binding):
    """Extend binding so the atom's args equal the row, or None."""
    out = binding
    for term, value in zip(args, row):
        if term.is_var():
            name = term.value
            bound = out.get(name)
            if bound is None:
                if out is binding:
                    out = dict(binding)
                out[name] = value
            elif bound != value:
                return None
        elif term.value != value:
            return None
    return out


def _contains_match(facts, atom, binding):
    """Does any tuple of the relation match the atom under the binding?
    Anonymous variables (fresh names) act as wildcards."""
    probe = []
    for term in atom.args:
        if term.is_var():
            probe.append(binding.get(term.value))
        else:
            probe.append(term.value)
    if None not in probe:
        return tuple(probe) in facts.get(atom.relation, set())
    for row in facts.get(atom.relation, ()):
        if all(want is None or want == value for want, value in zip(probe, row)):
            return True
    return False


def _rule_bindings(rule, facts):
    """All variable bindings satisfying the rule body against `facts`."""
    positives = [a for a in rule.body if not a.negated]
    negatives = [a for a in rule.body if a.negated]
    bindings = [dict()]
    for atom in positives:
        rows = facts.get(atom.relation, ())
        nxt = []
        for binding in bindings:
            for row in rows:
                extended = _match(atom.args, row, binding)
                if extended is not None:
                    nxt.append(extended)
        bindings = nxt
        if not bindings:
            return []
    if negatives:
        bindings = [
            b for b in bindings if not any(_contains_match(facts, a, b) for a in negatives)
        ]
    return bindings


def _head_tuple(rule, binding):
    return tuple(
        binding[t.value] if t.is_var() else t.value for t in rule.head.args
    )


def _apply_rules(rules, facts):
    derived = set()
    for rule in rules:
        for binding in _rule_bindings(rule, facts):
            derived.add((rule.head.relation, _head_tuple(rule, binding)))
    return derived


def _kosaraju(n, edges):
    """Components of the directed graph, topologically ordered."""
    fwd = [[] for _ in range(n)]
    rev = [[] for _ in range(n)]
    for i, j in edges:
        fwd[i].append(j)
        rev[j].append(i)
    seen = [False] * n
    finish = []
    for root in range(n):
        if seen[root]:
            continue
        stack = [(root, iter(fwd[root]))]
        seen[root] = True
        while stack:
            node, it = stack[-1]
            pushed = False
            for nxt in it:
                if not seen[nxt]:
                    seen[nxt] = True
                    stack.append((nxt, iter(fwd[nxt])))
                    pushed = True
                    break
            if not pushed:
                finish.append(node)
                stack.pop()
    assigned = [None] * n
    order = []
    for node in reversed(finish):
        if assigned[node] is not None:
            continue
        component = []
        stack = [node]
        assigned[node] = len(order)
        while stack:
            cur = stack.pop()
            component.append(cur)
            for nxt in rev[cur]:
                if assigned[nxt] is None:
                    assigned[nxt] = len(order)
                    stack.append(nxt)
        order.append(sorted(component))
    return order


def _rule_components(rules):
    producers = {}
    for i, rule in enumerate(rules):
        producers.setdefault(rule.head.relation, []).append(i)
    edges = set()
    recursive_reads = set()
    for j, rule in enumerate(rules):
        for atom in rule.body:
            for i in producers.get(atom.relation, ()):
                edges.add((i, j))
    components = _kosaraju(len(rules), sorted(edges))
    out = []
    for members in components:
        recursive = len(members) > 1 or (members[0], members[0]) in edges
        out.append((members, recursive))
    return out


def naive_fixpoint(program, input_facts=None, rule_order_seed=None):
    """Least fixpoint by repeated full rule application, component by
    component. Returns (facts per relation, rounds per component).

    `rounds` maps frozenset(rule indexes) to the number of full-application
    rounds the component took, counting the final round that found nothing
    new; single non-recursive rules apply exactly once and count 1.
    """
    facts = {name: set() for name in program.declarations}
    for name, rows in program.facts.items():
        facts[name].update(tuple(r) for r in rows)
    for name, rows in (input_facts or {}).items():
        facts[name].update(tuple(r) for r in rows)

    rules = list(program.rules)
    rounds = {}
    for members, recursive in _rule_components(rules):
        group = [rules[m] for m in members]
        if rule_order_seed is not None:
            random.Random(rule_order_seed).shuffle(group)
        key = frozenset(members)
        if not recursive:
            for rel, row in _apply_rules(group, facts):
                facts[rel].add(row)
            rounds[key] = 1
            continue
        count = 0
        while True:
            count += 1
            derived = _apply_rules(group, facts)
            fresh = [(rel, row) for rel, row in derived if row not in facts[rel]]
            if not fresh:
                break
            for rel, row in fresh:
                facts[rel].add(row)
        rounds[key] = count
    return facts, rounds


def bruteforce_join(atoms, facts, project=None):
    """All bindings satisfying the conjunction, projected to `project`.

    Nested scans over the relations' tuples with consistency filtering;
    negated atoms are checked once every variable is bound. `project`
    defaults to every variable in first-occurrence order.
    """
    positives = [a for a in atoms if not a.negated]
    negatives = [a for a in atoms if a.negated]
    if project is None:
        project = []
        for atom in positives:
            for v in atom.variables():
                if v not in project:
                    project.append(v)
    bindings = [dict()]
    for atom in positives:
        rows = facts.get(atom.relation, ())
        nxt = []
        for binding in bindings:
            for row in rows:
                extended = _match(atom.args, row, binding)
                if extended is not None:
                    nxt.append(extended)
        bindings = nxt
        if not bindings:
            return set()
    out = set()
    for binding in bindings:
        if any(_contains_match(facts, a, binding) for a in negatives):
            continue
        out.add(tuple(binding[v] for v in project))
    return out


def bruteforce_fixpoint(program, input_facts=None):
    """Second, independent fixpoint for negation-free programs: iterate
    bruteforce_join rule by rule over the whole program, with no component
    structure at all, until nothing changes."""
    for rule in program.rules:
        if any(a.negated for a in rule.body):
            raise ValueError("bruteforce_fixpoint handles positive programs only")
    facts = {name: set() for name in program.declarations}
    for name, rows in program.facts.items():
        facts[name].update(tuple(r) for r in rows)
    for name, rows in (input_facts or {}).items():
        facts[name].update(tuple(r) for r in rows)
    changed = True
    while changed:
        changed = False
        for rule in program.rules:
            vars_needed = [t.value if t.is_var() else None for t in rule.head.args]
            names = [v for v in vars_needed if v is not None]
            results = bruteforce_join(list(rule.body), facts, project=names)
            for values in results:
                by_name = dict(zip(names, values))
                row = tuple(
                    by_name[v] if v is not None else term.value
                    for v, term in zip(vars_needed, rule.head.args)
                )
                if row not in facts[rule.head.relation]:
                    facts[rule.head.relation].add(row)
                    changed = True
    return facts


def powerset_domain(facts):
    values = set()
    for rows in facts.values():
        for row in rows:
            values.update(row)
    return sorted(values)


def enumerate_assignments(variables, domain):
    """Exhaustive assignment stream (for very small cross-check fixtures)."""
    for combo in product(domain, repeat=len(variables)):
        yield dict(zip(variables, combo))
