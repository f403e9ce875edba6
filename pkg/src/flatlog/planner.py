"""Rule compilation.

Turns parsed rules into executable join plans ahead of time:

* `.split` directives rewrite a labelled rule by materializing a sub-
  conjunction into a helper relation, exposing its boundary variables as
  leading columns of a new rule.
* Recursive strata get the differential rewrite: a rule with k recursive
  body atoms becomes k plan instances, instance i reading atom i from the
  delta version and everything else from the full version.
* Each instance gets a global variable order (delta atom first, then
  greedy by constraint count), per-atom sort orders consistent with it,
  per-level source lists, anti-join probes for negated atoms, and the
  head projection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InternalError, ProgramError
from .parser import CONST, VAR, Atom, Program, Rule, Term
from .stratify import Stratum, stratify

FULL = "full"
DELTA = "delta"


@dataclass(frozen=True)
class PlanAtom:
    relation: str
    arity: int
    version: str  # FULL or DELTA
    negated: bool
    column_order: tuple  # attribute positions; constants first, then variables by level
    const_values: tuple  # literals for the leading constant columns
    col_levels: tuple  # variable-order level of each non-constant column (nondecreasing)
    check_level: int  # negated atoms: level where the probe fires (-1 if no variables)
    body_pos: int

    @property
    def n_const(self):
        return len(self.const_values)

    def levels_with_columns(self):
        """Map level -> tuple of column indexes (index order) bound at that level."""
        out = {}
        for local, level in enumerate(self.col_levels):
            out.setdefault(level, []).append(self.n_const + local)
        return {lvl: tuple(cols) for lvl, cols in out.items()}


@dataclass(frozen=True)
class JoinPlan:
    plan_id: str
    rule_index: int
    head_relation: str
    head_arity: int
    variable_order: tuple
    atoms: tuple  # PlanAtom
    head_cols: tuple  # per head column: (VAR, level) or (CONST, literal)
    delta_atom: int | None
    outer_atom: int | None  # None only for variable-free plans
    inner_atom: int | None
    # per level: candidate-generating atoms, (atom, columns) narrowing specs,
    # and negated probes that fire at the level
    cand_atoms: tuple
    narrow_specs: tuple
    checks: tuple

    @property
    def depth(self):
        return len(self.variable_order)


@dataclass
class StratumPlan:
    index: int
    rules: list
    recursive: bool
    plans: list  # JoinPlan instances, evaluation order

    @property
    def head_relations(self):
        return {r.head.relation for r in self.rules}

    @property
    def rule_indexes(self):
        return frozenset(r.index for r in self.rules)


@dataclass
class CompiledProgram:
    program: Program  # after split rewriting
    strata: list  # StratumPlan
    orders: dict  # relation -> set of required column orders

    @property
    def declarations(self):
        return self.program.declarations


# --- helper-relation splitting ---------------------------------------------


def split_rule(rule: Rule, directive) -> tuple[Rule, Rule]:
    """Apply one `.split` directive to its rule.

    Returns (helper rule, consumer rule). The helper's columns are the
    directive's boundary variables; its body is the split-off subset. The
    consumer keeps the remaining atoms plus one helper atom at the end.
    """
    remaining = list(rule.body)
    subset = []
    for pattern in directive.subset:
        for k, atom in enumerate(remaining):
            if atom is not None and not atom.negated and atom.relation == pattern.relation \
                    and atom.args == pattern.args:
                subset.append(atom)
                remaining[k] = None
                break
        else:
            raise ProgramError(
                f".split {directive.rule_label}: atom {pattern} does not occur in the rule body",
                directive.line,
            )
    remaining = [a for a in remaining if a is not None]
    if not remaining:
        remaining = []
    subset_vars = {v for a in subset for v in a.variables()}
    remainder_vars = {v for a in remaining for v in a.variables()}
    head_vars = set(rule.head.variables())
    shared = subset_vars & remainder_vars
    if remaining and not shared:
        raise ProgramError(
            f".split {directive.rule_label}: the subset shares no variable with the rest "
            "of the body (pure cross product)",
            directive.line,
        )
    boundary = shared | (subset_vars & head_vars)
    if set(directive.helper_vars) != boundary:
        raise ProgramError(
            f".split {directive.rule_label}: helper columns {sorted(directive.helper_vars)} "
            f"must be exactly the boundary variables {sorted(boundary)}",
            directive.line,
        )
    helper_args = tuple(Term(VAR, v) for v in directive.helper_vars)
    helper_head = Atom(directive.helper_name, helper_args)
    helper_rule = Rule(helper_head, tuple(subset), index=-1)
    consumer_body = tuple(remaining) + (Atom(directive.helper_name, helper_args),)
    consumer = Rule(rule.head, consumer_body, index=-1, label=rule.label)
    return helper_rule, consumer


def apply_splits(program: Program) -> Program:
    """Rewrite the program per its `.split` directives."""
    if not program.splits:
        return program
    # Recursion structure of the original program: a split may not detach atoms
    # that are mutually recursive with the rule's own head.
    original_strata = stratify(program.rules)
    stratum_of_rule = {}
    for s in original_strata:
        for r in s.rules:
            stratum_of_rule[r.index] = s
    rules = list(program.rules)
    declarations = dict(program.declarations)
    for directive in program.splits:
        target = None
        for k, rule in enumerate(rules):
            if rule.label == directive.rule_label:
                target = k
                break
        if target is None:
            raise ProgramError(
                f".split names unknown rule label {directive.rule_label!r}", directive.line
            )
        if directive.helper_name in declarations:
            raise ProgramError(
                f".split helper {directive.helper_name} collides with a declared relation",
                directive.line,
            )
        rule = rules[target]
        if rule.index >= 0:
            home = stratum_of_rule[rule.index]
            if home.recursive:
                recursive_rels = home.head_relations
                for pattern in directive.subset:
                    if pattern.relation in recursive_rels:
                        raise ProgramError(
                            f".split {directive.rule_label}: atom {pattern} is mutually "
                            "recursive with the rule head and cannot be split off",
                            directive.line,
                        )
        helper_rule, consumer = split_rule(rule, directive)
        declarations[directive.helper_name] = len(directive.helper_vars)
        rules[target] = consumer
        rules.append(helper_rule)
    reindexed = [
        Rule(r.head, r.body, index=i, label=r.label) for i, r in enumerate(rules)
    ]
    out = Program(
        declarations=declarations,
        inputs=list(program.inputs),
        outputs=list(program.outputs),
        rules=reindexed,
        facts={k: list(v) for k, v in program.facts.items()},
        splits=[],
    )
    return out


# --- differential rewrite ----------------------------------------------------


def seminaive_instances(stratum: Stratum) -> list[tuple[Rule, int | None]]:
    """Expand a stratum's rules into (rule, delta body position) instances.

    Recursive strata: one instance per recursive body atom, reading that atom
    from the delta and every other atom from the full version. Non-recursive
    strata: a single all-full instance.
    """
    if not stratum.recursive:
        return [(rule, None) for rule in stratum.rules]
    heads = stratum.head_relations
    instances = []
    for rule in stratum.rules:
        recursive_positions = [
            k for k, a in enumerate(rule.body) if not a.negated and a.relation in heads
        ]
        if not recursive_positions:
            raise InternalError(
                f"rule {rule.rule_id} sits in a recursive stratum without a recursive atom"
            )
        for k in recursive_positions:
            instances.append((rule, k))
    return instances


# --- variable ordering -------------------------------------------------------


def choose_variable_order(rule: Rule, delta_pos: int | None) -> tuple:
    """Global attribute order for one rule instance.

    The delta atom's variables come first, in that atom's argument order; the
    rest follow greedily by descending number of constraining positive atoms,
    ties broken by first occurrence in the body text.
    """
    first_seen = {}
    counts = {}
    for atom in rule.body:
        if atom.negated:
            continue
        seen_here = set()
        for term in atom.args:
            if not term.is_var():
                continue
            v = term.value
            first_seen.setdefault(v, len(first_seen))
            if v not in seen_here:
                counts[v] = counts.get(v, 0) + 1
                seen_here.add(v)
    order = []
    if delta_pos is not None:
        for term in rule.body[delta_pos].args:
            if term.is_var() and term.value not in order:
                order.append(term.value)
    rest = [v for v in counts if v not in order]
    rest.sort(key=lambda v: (-counts[v], first_seen[v]))
    order.extend(rest)
    return tuple(order)


# --- plan compilation ----------------------------------------------------------


def _plan_atom(atom: Atom, version, level_of, body_pos) -> PlanAtom:
    const_positions = [k for k, t in enumerate(atom.args) if not t.is_var()]
    var_positions = [
        k for k, t in enumerate(atom.args) if t.is_var() and t.value in level_of
    ]
    var_positions.sort(key=lambda k: (level_of[atom.args[k].value], k))
    # anonymous variables in negated atoms bind to nothing: their columns sort
    # last and are never narrowed, so the probe quantifies over them
    free_positions = [
        k for k, t in enumerate(atom.args) if t.is_var() and t.value not in level_of
    ]
    column_order = tuple(const_positions) + tuple(var_positions) + tuple(free_positions)
    const_values = tuple(atom.args[k].value for k in const_positions)
    col_levels = tuple(level_of[atom.args[k].value] for k in var_positions)
    check_level = max(col_levels) if col_levels else -1
    return PlanAtom(
        relation=atom.relation,
        arity=atom.arity,
        version=version,
        negated=atom.negated,
        column_order=column_order,
        const_values=const_values,
        col_levels=col_levels,
        check_level=check_level,
        body_pos=body_pos,
    )


def compile_instance(rule: Rule, delta_pos: int | None, head_arity: int) -> JoinPlan:
    order = choose_variable_order(rule, delta_pos)
    level_of = {v: i for i, v in enumerate(order)}
    atoms = []
    delta_atom = None
    for k, atom in enumerate(rule.body):
        version = DELTA if k == delta_pos else FULL
        plan_atom = _plan_atom(atom, version, level_of, k)
        if k == delta_pos:
            delta_atom = len(atoms)
        atoms.append(plan_atom)

    depth = len(order)
    cand, specs, checks = [], [], []
    for level in range(depth):
        level_cand, level_specs, level_checks = [], [], []
        for idx, pa in enumerate(atoms):
            cols = pa.levels_with_columns().get(level)
            if cols:
                level_specs.append((idx, cols))
                if not pa.negated:
                    level_cand.append(idx)
            if pa.negated and pa.check_level == level:
                level_checks.append(idx)
        cand.append(tuple(level_cand))
        specs.append(tuple(level_specs))
        checks.append(tuple(level_checks))

    outer = None
    inner = None
    if depth:
        if delta_atom is not None:
            outer = delta_atom
        else:
            outer = cand[0][0] if cand[0] else None
        if outer is None:
            raise InternalError(f"rule {rule.rule_id}: no positive source for the root level")
        for idx in cand[0]:
            pa = atoms[idx]
            if idx != outer and pa.n_const == 0 and pa.col_levels and pa.col_levels[0] == 0:
                inner = idx
                break

    head_cols = []
    for term in rule.head.args:
        if term.is_var():
            head_cols.append((VAR, level_of[term.value]))
        else:
            head_cols.append((CONST, term.value))

    suffix = "" if delta_pos is None else f"#{delta_pos}"
    plan = JoinPlan(
        plan_id=f"{rule.rule_id}{suffix}",
        rule_index=rule.index,
        head_relation=rule.head.relation,
        head_arity=head_arity,
        variable_order=order,
        atoms=tuple(atoms),
        head_cols=tuple(head_cols),
        delta_atom=delta_atom,
        outer_atom=outer,
        inner_atom=inner,
        cand_atoms=tuple(cand),
        narrow_specs=tuple(specs),
        checks=tuple(checks),
    )
    validate_plan(plan)
    return plan


def validate_plan(plan: JoinPlan):
    """Structural checks every emitted plan must satisfy."""
    seen = set()
    for v in plan.variable_order:
        if v in seen:
            raise InternalError(f"plan {plan.plan_id}: duplicate variable {v} in order")
        seen.add(v)
    for pa in plan.atoms:
        if list(pa.col_levels) != sorted(pa.col_levels):
            raise InternalError(
                f"plan {plan.plan_id}: atom {pa.relation} columns violate the prefix property"
            )
        if len(pa.column_order) != pa.arity or set(pa.column_order) != set(range(pa.arity)):
            raise InternalError(
                f"plan {plan.plan_id}: atom {pa.relation} column order is not a permutation"
            )
        for level in pa.col_levels:
            if not 0 <= level < len(plan.variable_order):
                raise InternalError(f"plan {plan.plan_id}: column level out of range")
    if plan.delta_atom is not None:
        pa = plan.atoms[plan.delta_atom]
        if pa.col_levels and pa.col_levels[0] != 0:
            raise InternalError(
                f"plan {plan.plan_id}: delta atom does not bind the outermost variable"
            )


def compile_program(program: Program) -> CompiledProgram:
    """Full pipeline: split rewriting, stratification, differential expansion,
    plan compilation, and index-order collection."""
    rewritten = apply_splits(program)
    strata = stratify(rewritten.rules)
    orders: dict = {name: set() for name in rewritten.declarations}
    producers: dict = {}
    for stratum in strata:
        for rel in stratum.head_relations:
            producers.setdefault(rel, set()).add(stratum.index)
    plans_per_stratum = []
    for stratum in strata:
        for rule in stratum.rules:
            for atom in rule.body:
                if atom.negated and any(
                    s >= stratum.index for s in producers.get(atom.relation, ())
                ):
                    raise InternalError(
                        f"negated atom {atom} reads a relation not closed before its stratum"
                    )
        instances = seminaive_instances(stratum)
        plans = [
            compile_instance(rule, delta_pos, rewritten.arity(rule.head.relation))
            for rule, delta_pos in instances
        ]
        for plan in plans:
            for pa in plan.atoms:
                orders[pa.relation].add(pa.column_order)
        plans_per_stratum.append(
            StratumPlan(
                index=stratum.index,
                rules=stratum.rules,
                recursive=stratum.recursive,
                plans=plans,
            )
        )
    for name, arity in rewritten.declarations.items():
        orders[name].add(tuple(range(arity)))
    return CompiledProgram(program=rewritten, strata=plans_per_stratum, orders=orders)
