"""Stratification.

Rules are grouped by strongly connected components of the rule dependency
graph: an edge r -> s exists when r's head relation appears in s's body
(negated or not). Components are emitted in topological order, so every
relation is fully produced before any rule that reads it from a later
component runs, and negated reads only ever see closed relations. A
negated dependency inside a component makes the program non-stratifiable.

A component is recursive when it has more than one rule or a rule that
reads its own head relation positively; a single rule with no self
dependency forms a non-recursive stratum evaluated exactly once.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ProgramError


@dataclass
class Stratum:
    index: int
    rules: list  # Rule objects, in source order
    recursive: bool

    @property
    def head_relations(self):
        return {r.head.relation for r in self.rules}

    @property
    def rule_indexes(self):
        return frozenset(r.index for r in self.rules)


def rule_dependencies(rules):
    """Edges (producer rule idx, consumer rule idx, negated?) plus producer map."""
    producers = {}
    for i, rule in enumerate(rules):
        producers.setdefault(rule.head.relation, []).append(i)
    edges = []
    for j, rule in enumerate(rules):
        for atom in rule.body:
            for i in producers.get(atom.relation, ()):
                edges.append((i, j, atom.negated))
    return edges, producers


def _tarjan(n, adjacency):
    """Iterative Tarjan; yields components in reverse topological order."""
    index = [None] * n
    low = [0] * n
    on_stack = [False] * n
    stack = []
    components = []
    counter = 0
    for root in range(n):
        if index[root] is not None:
            continue
        work = [(root, 0)]
        while work:
            node, ptr = work[-1]
            if ptr == 0:
                index[node] = low[node] = counter
                counter += 1
                stack.append(node)
                on_stack[node] = True
            advanced = False
            for k in range(ptr, len(adjacency[node])):
                nxt = adjacency[node][k]
                if index[nxt] is None:
                    work[-1] = (node, k + 1)
                    work.append((nxt, 0))
                    advanced = True
                    break
                if on_stack[nxt]:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                component = []
                while True:
                    member = stack.pop()
                    on_stack[member] = False
                    component.append(member)
                    if member == node:
                        break
                components.append(sorted(component))
    return components


def stratify(rules) -> list[Stratum]:
    """Split rules into topologically ordered strata. Raises ProgramError when
    a negated dependency closes a cycle."""
    n = len(rules)
    edges, _ = rule_dependencies(rules)
    adjacency = [[] for _ in range(n)]
    for i, j in sorted(set((i, j) for i, j, _ in edges)):
        adjacency[i].append(j)
    components = _tarjan(n, adjacency)  # reverse topological
    component_of = {}
    for c, members in enumerate(components):
        for m in members:
            component_of[m] = c
    for i, j, negated in edges:
        if negated and component_of[i] == component_of[j]:
            cycle = sorted({rules[m].head.relation for m in components[component_of[i]]})
            raise ProgramError(
                "program is not stratifiable: negation inside the recursive component "
                f"{{{', '.join(cycle)}}}"
            )
    self_edges = {(i, j) for i, j, _ in edges if i == j}
    strata = []
    for members in reversed(components):
        recursive = len(members) > 1 or (members[0], members[0]) in self_edges
        strata.append(
            Stratum(index=len(strata), rules=[rules[m] for m in members], recursive=recursive)
        )
    return strata
