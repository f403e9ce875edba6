"""Source language parser.

Accepted syntax (full EBNF in the README):

    .decl Name(a:symbol, b:symbol)
    .input Name
    .output Name
    .split label { Atom, Atom } -> Helper(v1, v2)
    label: Head(x, y) :- Body(x, z), !Closed(z), Other(z, y).
    Fact("a", "b").

Bare identifiers in atom arguments are variables, quoted strings and bare
integers are constants (integers are read as their decimal spelling), and
`_` is an anonymous variable. Comments run from `//` to end of line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import ProgramError

VAR = "var"
CONST = "const"


@dataclass(frozen=True)
class Term:
    kind: str  # VAR or CONST
    value: str

    def is_var(self):
        return self.kind == VAR


@dataclass(frozen=True)
class Atom:
    relation: str
    args: tuple
    negated: bool = False

    @property
    def arity(self):
        return len(self.args)

    def variables(self):
        return [t.value for t in self.args if t.is_var()]

    def __str__(self):
        inner = ", ".join(t.value if t.is_var() else f'"{t.value}"' for t in self.args)
        return f"{'!' if self.negated else ''}{self.relation}({inner})"


@dataclass(frozen=True)
class Rule:
    head: Atom
    body: tuple
    index: int
    label: str | None = None

    @property
    def rule_id(self):
        return self.label or f"r{self.index}"

    def __str__(self):
        if not self.body:
            return f"{self.head}."
        return f"{self.head} :- {', '.join(str(a) for a in self.body)}."


@dataclass(frozen=True)
class SplitDirective:
    rule_label: str
    subset: tuple  # Atom patterns, matched literally against the rule body
    helper_name: str
    helper_vars: tuple
    line: int


@dataclass
class Program:
    declarations: dict = field(default_factory=dict)  # name -> arity
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    rules: list = field(default_factory=list)
    facts: dict = field(default_factory=dict)  # name -> list of constant tuples
    splits: list = field(default_factory=list)

    def arity(self, name):
        return self.declarations[name]


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*)
  | (?P<string>"[^"\n]*")
  | (?P<number>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_?]*)
  | (?P<arrow>->)
  | (?P<implies>:-)
  | (?P<punct>[().,:{}!])
""",
    re.VERBOSE,
)


class _Token(tuple):
    __slots__ = ()

    @property
    def kind(self):
        return self[0]

    @property
    def text(self):
        return self[1]

    @property
    def line(self):
        return self[2]

    @property
    def col(self):
        return self[3]


def _tokenize(source: str):
    tokens = []
    line, line_start = 1, 0
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            col = pos - line_start + 1
            raise ProgramError(f"unexpected character {source[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(_Token((kind, text, line, pos - line_start + 1)))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + text.rfind("\n") + 1
        pos = m.end()
    tokens.append(_Token(("eof", "", line, pos - line_start + 1)))
    return tokens


class _Parser:
    def __init__(self, source):
        self.tokens = _tokenize(source)
        self.pos = 0
        self.program = Program()

    def peek(self, ahead=0):
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self):
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        raise ProgramError(message, tok.line, tok.col)

    def expect(self, kind, text=None):
        tok = self.next()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            raise ProgramError(f"expected {want!r}, found {tok.text!r}", tok.line, tok.col)
        return tok

    def parse(self) -> Program:
        while self.peek().kind != "eof":
            if self.peek().text == ".":
                self.directive()
            else:
                self.clause()
        self.resolve()
        return self.program

    # --- directives -------------------------------------------------------

    def directive(self):
        dot = self.expect("punct", ".")
        name = self.expect("ident")
        if name.text == "decl":
            self.decl()
        elif name.text == "input":
            self.program.inputs.append(self.expect("ident").text)
        elif name.text == "output":
            self.program.outputs.append(self.expect("ident").text)
        elif name.text == "split":
            self.split(dot)
        else:
            self.fail(f"unknown directive .{name.text}", name)

    def decl(self):
        name = self.expect("ident")
        if name.text in self.program.declarations:
            self.fail(f"relation {name.text} declared twice", name)
        self.expect("punct", "(")
        arity = 0
        while True:
            self.expect("ident")
            if self.peek().text == ":":
                self.next()
                self.expect("ident")  # attribute type, symbols only
            arity += 1
            if self.peek().text == ",":
                self.next()
                continue
            break
        self.expect("punct", ")")
        if arity < 1:
            self.fail(f"relation {name.text} must have at least one column", name)
        self.program.declarations[name.text] = arity

    def split(self, at):
        label = self.expect("ident").text
        self.expect("punct", "{")
        subset = [self.atom()]
        while self.peek().text == ",":
            self.next()
            subset.append(self.atom())
        self.expect("punct", "}")
        self.expect("arrow")
        helper = self.expect("ident").text
        self.expect("punct", "(")
        helper_vars = [self.expect("ident").text]
        while self.peek().text == ",":
            self.next()
            helper_vars.append(self.expect("ident").text)
        self.expect("punct", ")")
        for a in subset:
            if a.negated:
                self.fail(f"cannot split on negated atom {a}", at)
        self.program.splits.append(
            SplitDirective(label, tuple(subset), helper, tuple(helper_vars), at.line)
        )

    # --- clauses ----------------------------------------------------------

    def clause(self):
        label = None
        if (
            self.peek().kind == "ident"
            and self.peek(1).text == ":"
            and self.peek(1).kind == "punct"
        ):
            label = self.next().text
            self.next()
        head_tok = self.peek()
        head = self.atom()
        if head.negated:
            self.fail("rule head cannot be negated", head_tok)
        body = []
        if self.peek().kind == "implies":
            self.next()
            body.append(self.atom())
            while self.peek().text == ",":
                self.next()
                body.append(self.atom())
        self.expect("punct", ".")
        if not body:
            if any(t.is_var() for t in head.args):
                self.fail(f"fact {head} contains variables", head_tok)
            self.program.facts.setdefault(head.relation, []).append(
                tuple(t.value for t in head.args)
            )
            return
        self._check_rule(head, body, head_tok)
        self.program.rules.append(
            Rule(head, tuple(body), index=len(self.program.rules), label=label)
        )

    def atom(self) -> Atom:
        negated = False
        if self.peek().text == "!":
            self.next()
            negated = True
        name = self.expect("ident")
        self.expect("punct", "(")
        args = [self.term()]
        while self.peek().text == ",":
            self.next()
            args.append(self.term())
        self.expect("punct", ")")
        return Atom(name.text, tuple(args), negated)

    _fresh = 0

    def term(self) -> Term:
        tok = self.next()
        if tok.kind == "ident":
            if tok.text == "_":
                _Parser._fresh += 1
                return Term(VAR, f"_#{_Parser._fresh}")
            return Term(VAR, tok.text)
        if tok.kind == "string":
            return Term(CONST, tok.text[1:-1])
        if tok.kind == "number":
            return Term(CONST, tok.text)
        raise ProgramError(f"expected a term, found {tok.text!r}", tok.line, tok.col)

    def _check_rule(self, head, body, tok):
        positive_vars = set()
        for a in body:
            if not a.negated:
                positive_vars.update(a.variables())
        for v in head.variables():
            if v not in positive_vars:
                self.fail(f"head variable {v} is not bound by a positive body atom", tok)
        for a in body:
            if a.negated:
                for v in a.variables():
                    if not v.startswith("_#") and v not in positive_vars:
                        self.fail(
                            f"variable {v} of negated atom {a} is not bound by a positive atom",
                            tok,
                        )

    # --- post-parse resolution ---------------------------------------------

    def resolve(self):
        prog = self.program

        def check_arity(name, arity, what):
            declared = prog.declarations.get(name)
            if declared is None:
                raise ProgramError(f"relation {name} used in {what} but never declared")
            if declared != arity:
                raise ProgramError(
                    f"{what}: relation {name} declared with arity {declared}, used with {arity}"
                )

        for rule in prog.rules:
            check_arity(rule.head.relation, rule.head.arity, f"rule {rule.rule_id}")
            for a in rule.body:
                check_arity(a.relation, a.arity, f"rule {rule.rule_id}")
        for name, rows in prog.facts.items():
            for row in rows:
                check_arity(name, len(row), "fact")
        for name in prog.inputs + prog.outputs:
            if name not in prog.declarations:
                raise ProgramError(f"relation {name} marked input/output but never declared")


def parse(source: str) -> Program:
    """Parse Datalog source text into a Program. Raises ProgramError."""
    return _Parser(source).parse()
