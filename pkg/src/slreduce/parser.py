"""Text front end for entailment problems and rule sets.

Grammar (``#`` starts a comment when it begins a token)::

    problem := "fields" NUM ";" item* "entail" formula "|-" formula
    item    := rule | "pred" ID "/" NUM ";"
    rule    := ID "(" ID ("," ID)* ")" "<=" atom ("*" atom)* ";"
    formula := sheap ("\\/" sheap)*
    sheap   := ("exists" ID+ ".")? atom ("*" atom)*
    atom    := ID "=" ID | ID "!=" ID | ID "->" "(" term ("," term)* ")"
             | ID "(" ID ("," ID)* ")"

``pred p/n;`` declares a predicate without rules; the printer emits it for
generated rule sets in which some decorated predicate has no rule left.
Identifiers may contain ``#`` after their first character, which is how
generated fresh names such as ``z#1`` survive a print/parse round trip.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import (
    ArityMismatch,
    NilInEqualityOrPredicate,
    ParseError,
    RebindingError,
    UndefinedPredicate,
    WidthMismatch,
)
from .syntax import (
    NIL,
    Diseq,
    EntailmentProblem,
    Eq,
    Formula,
    PointsTo,
    PredCall,
    Rule,
    Sid,
    SymbolicHeap,
)

_TOKEN = re.compile(
    r"""(?P<ws>[ \t\r\n]+)
      | (?P<comment>\#[^\n]*)
      | (?P<sym><=|\|-|\\/|->|!=|=|\(|\)|,|;|\*|\.|/)
      | (?P<num>[0-9]+)
      | (?P<id>[A-Za-z_][A-Za-z0-9_#']*)
    """,
    re.VERBOSE,
)

KEYWORDS = {"fields", "entail", "exists", "nil", "pred"}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        tok = m.group()
        if kind not in ("ws", "comment"):
            out.append(Token(kind, tok, line, pos - line_start + 1))
        nl = tok.count("\n")
        if nl:
            line += nl
            line_start = pos + tok.rindex("\n") + 1
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.arities: dict[str, int] = {}
        self.declared: set[str] = set()
        self.width: int | None = None

    # -- token helpers
    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Token | None = None, cls=ParseError) -> ParseError:
        tok = tok or self.peek()
        return cls(msg, tok.line, tok.col)

    def accept(self, text: str) -> bool:
        t = self.peek()
        if t.kind in ("sym", "id") and t.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        t = self.peek()
        if not self.accept(text):
            raise self.error(f"expected {text!r}, found {t.text or 'end of input'!r}")
        return t

    def ident(self, allow_nil: bool = False, what: str = "identifier"):
        t = self.peek()
        if t.kind != "id":
            raise self.error(f"expected {what}, found {t.text or 'end of input'!r}")
        if t.text == "nil":
            if allow_nil:
                self.i += 1
                return NIL
            raise self.error(f"nil cannot occur in {what}", cls=NilInEqualityOrPredicate)
        if t.text in KEYWORDS:
            raise self.error(f"keyword {t.text!r} cannot be used as {what}")
        self.i += 1
        return t.text

    def number(self) -> int:
        t = self.peek()
        if t.kind != "num":
            raise self.error(f"expected a number, found {t.text!r}")
        self.i += 1
        return int(t.text)

    # -- structure
    def note_arity(self, pred: str, n: int, tok: Token) -> None:
        if self.arities.setdefault(pred, n) != n:
            raise self.error(f"{pred} has arity {self.arities[pred]}, used with {n}", tok, ArityMismatch)

    def header(self) -> None:
        self.expect("fields")
        self.width = self.number()
        self.expect(";")

    def items(self, stop_at_entail: bool) -> list[Rule]:
        rules: list[Rule] = []
        while True:
            t = self.peek()
            if t.kind == "eof" or (stop_at_entail and t.kind == "id" and t.text == "entail"):
                return rules
            if t.kind == "id" and t.text == "pred" and self.peek(1).kind == "id":
                self.i += 1
                name_tok = self.peek()
                name = self.ident(what="predicate name")
                self.expect("/")
                self.note_arity(name, self.number(), name_tok)
                self.declared.add(name)
                self.expect(";")
                continue
            rules.append(self.rule())

    def rule(self) -> Rule:
        head_tok = self.peek()
        pred = self.ident(what="predicate name")
        self.expect("(")
        params = self.id_list("a rule head")
        self.expect(")")
        if len(set(params)) != len(params):
            raise self.error(f"repeated parameter in head of {pred}", head_tok, RebindingError)
        self.note_arity(pred, len(params), head_tok)
        self.expect("<=")
        body = self.atoms()
        self.expect(";")
        return Rule(pred, tuple(params), tuple(body))

    def id_list(self, what: str) -> list[str]:
        out = [self.ident(what=what)]
        while self.accept(","):
            out.append(self.ident(what=what))
        return out

    def atoms(self) -> list:
        out = [self.atom()]
        while self.accept("*"):
            out.append(self.atom())
        return out

    def atom(self):
        t0 = self.peek()
        if t0.kind == "id" and t0.text == "nil":
            raise self.error("nil cannot start an atom", cls=NilInEqualityOrPredicate)
        x = self.ident(what="variable")
        if self.accept("="):
            return Eq(x, self.ident(what="an equality"))
        if self.accept("!="):
            return Diseq(x, self.ident(what="a disequality"))
        if self.accept("->"):
            if self.accept("("):
                fields = [self.ident(allow_nil=True, what="a field")]
                while self.accept(","):
                    fields.append(self.ident(allow_nil=True, what="a field"))
                self.expect(")")
            else:
                fields = [self.ident(allow_nil=True, what="a field")]
            if self.width is not None and len(fields) != self.width:
                raise self.error(f"points-to with {len(fields)} fields, expected {self.width}", t0, WidthMismatch)
            return PointsTo(x, tuple(fields))
        if self.accept("("):
            args = self.id_list("a predicate atom")
            self.expect(")")
            self.note_arity(x, len(args), t0)
            return PredCall(x, tuple(args))
        raise self.error(f"expected '=', '!=', '->' or '(' after {x!r}")

    def sheap(self) -> SymbolicHeap:
        bound: list[str] = []
        if self.accept("exists"):
            while True:
                t = self.peek()
                v = self.ident(what="a bound variable")
                if v in bound:
                    raise self.error(f"{v} bound twice", t, RebindingError)
                bound.append(v)
                self.accept(",")
                if self.accept("."):
                    break
        return SymbolicHeap(tuple(bound), tuple(self.atoms()))

    def formula(self) -> Formula:
        out = [self.sheap()]
        while self.accept("\\/"):
            out.append(self.sheap())
        return Formula(tuple(out))

    def finish(self) -> None:
        t = self.peek()
        if t.kind != "eof":
            raise self.error(f"unexpected {t.text!r} after end of input")

    def check_defined(self, rules: list[Rule], formulas: list[Formula]) -> None:
        defined = {r.pred for r in rules}
        declared = self.declared
        used = [a for r in rules for a in r.pred_calls()]
        used += [a for f in formulas for a in f.pred_calls()]
        for a in used:
            if a.pred not in defined and a.pred not in declared:
                raise UndefinedPredicate(f"predicate {a.pred} has no rule or declaration")


def _sid(p: _Parser, rules: list[Rule]) -> Sid:
    return Sid.build(p.width or 0, rules, p.arities)


def parse_sid(text: str) -> Sid:
    p = _Parser(text)
    p.header()
    rules = p.items(stop_at_entail=False)
    p.finish()
    return _sid(p, rules)


def parse_problem(text: str) -> EntailmentProblem:
    """Parse a full problem.

    Quantifiers on the antecedent are dropped: an entailment with an
    existential antecedent is valid iff it is valid with those variables
    free, and bound names are checked to be unused elsewhere.
    """
    p = _Parser(text)
    p.header()
    rules = p.items(stop_at_entail=True)
    entail_tok = p.expect("entail")
    lhs = p.formula()
    p.expect("|-")
    rhs = p.formula()
    p.finish()
    p.check_defined(rules, [lhs, rhs])
    _check_scopes(lhs, rhs, entail_tok)
    lhs = Formula(tuple(SymbolicHeap((), d.atoms) for d in lhs.disjuncts))
    free: dict[str, None] = {}
    for v in lhs.free_vars + rhs.free_vars:
        free.setdefault(v, None)
    return EntailmentProblem(lhs, rhs, _sid(p, rules), tuple(free))


def _check_scopes(lhs: Formula, rhs: Formula, tok: Token) -> None:
    lhs_vars = {v for d in lhs.disjuncts for v in d.vars()}
    for d in lhs.disjuncts:
        for v in d.bound:
            if v in rhs.free_vars:
                raise RebindingError(f"{v} is bound in the antecedent and free in the consequent",
                                     tok.line, tok.col)
    for d in rhs.disjuncts:
        for v in d.bound:
            if v in lhs_vars or v in rhs.free_vars:
                raise RebindingError(f"{v} is both bound and free", tok.line, tok.col)


def parse_formula(text: str, width: int | None = None) -> Formula:
    p = _Parser(text)
    p.width = width
    f = p.formula()
    p.finish()
    return f
