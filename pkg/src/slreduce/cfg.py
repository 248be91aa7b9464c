"""Entailment instances encoding inclusion of ``{0,1}+`` in a context-free language.

A grammar in Greibach normal form becomes an SID over records ``(digit, next)``:
each nonterminal ``A`` is a predicate ``A(x, y, hat0, hat1)`` describing a
list segment from ``x`` to ``y`` that spells a word derivable from ``A``.
The chain predicate ``T`` spells any nonempty word, so the generated
entailment is valid exactly when every nonempty binary word is in the
language.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache

from .errors import EpsilonInLanguage, NotGreibach, ParseError
from .semantics import Structure
from .syntax import Diseq, EntailmentProblem, Formula, PointsTo, PredCall, Rule, Sid, SymbolicHeap

HAT = ("hat0", "hat1")
_RULE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*->\s*(.*?)\s*$")


@dataclass(frozen=True)
class Production:
    head: str
    terminal: str
    tail: tuple[str, ...]

    def __str__(self) -> str:
        return " ".join((self.head, "->", self.terminal) + self.tail)


@dataclass(frozen=True)
class Grammar:
    start: str
    productions: tuple[Production, ...]

    @property
    def nonterminals(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for p in self.productions:
            seen.setdefault(p.head)
            for a in p.tail:
                seen.setdefault(a)
        return tuple(seen)

    def validate(self) -> None:
        heads = {p.head for p in self.productions}
        for p in self.productions:
            for a in p.tail:
                if a not in heads:
                    raise NotGreibach(f"nonterminal {a} has no productions")


def parse_grammar(text: str) -> Grammar:
    """One production per line, e.g. ``S -> 0 S``; ``#`` starts a comment.

    The first production's head is the start symbol.
    """
    prods: list[Production] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        m = _RULE.match(line)
        if not m:
            raise ParseError("expected 'A -> a B ...'", lineno, 1)
        head, rhs = m.group(1), m.group(2).split()
        if not rhs or rhs == ["eps"] or rhs == ["ε"]:
            start = prods[0].head if prods else head
            if head == start:
                raise EpsilonInLanguage(f"line {lineno}: {head} derives the empty word")
            raise NotGreibach(f"line {lineno}: empty production for {head}")
        if rhs[0] not in ("0", "1"):
            raise NotGreibach(f"line {lineno}: production must start with terminal 0 or 1")
        for sym in rhs[1:]:
            if sym in ("0", "1") or not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", sym):
                raise NotGreibach(f"line {lineno}: {sym!r} is not a nonterminal")
        prods.append(Production(head, rhs[0], tuple(rhs[1:])))
    if not prods:
        raise ParseError("grammar has no productions", 1, 1)
    g = Grammar(prods[0].head, tuple(prods))
    g.validate()
    return g


def chain_name(g: Grammar) -> str:
    name = "T"
    while name in g.nonterminals:
        name += "_"
    return name


def gen_cfg_instance(g: Grammar) -> EntailmentProblem:
    """``hat0 != hat1 * T(x, y, hat0, hat1) |- S(x, y, hat0, hat1)``."""
    g.validate()
    t = chain_name(g)
    head = ("x", "y") + HAT
    rules: list[Rule] = []
    for p in g.productions:
        digit = HAT[int(p.terminal)]
        mids = [f"x{i}" for i in range(1, len(p.tail) + 1)]
        nxt = mids[0] if mids else "y"
        body = [PointsTo("x", (digit, nxt))]
        stops = mids[1:] + ["y"]
        body += [PredCall(a, (src, dst) + HAT) for a, src, dst in zip(p.tail, mids, stops)]
        rules.append(Rule(p.head, head, tuple(body)))
    for digit in HAT:
        rules.append(Rule(t, head, (PointsTo("x", (digit, "z")), PredCall(t, ("z", "y") + HAT))))
        rules.append(Rule(t, head, (PointsTo("x", (digit, "y")),)))
    sid = Sid.build(2, rules)
    lhs = Formula((SymbolicHeap((), (Diseq(*HAT), PredCall(t, head))),))
    rhs = Formula((SymbolicHeap((), (PredCall(g.start, head),)),))
    return EntailmentProblem(lhs, rhs, sid, ("hat0", "hat1", "x", "y"))


def word_instance(g: Grammar, word: str) -> EntailmentProblem:
    """Antecedent is the explicit list spelling ``word``; valid iff ``word`` is in the language."""
    base = gen_cfg_instance(g)
    mids = [f"m{i}" for i in range(1, len(word))]
    cells = ["x"] + mids
    nxt = mids + ["y"]
    atoms = [Diseq(*HAT)] + [PointsTo(c, (HAT[int(d)], n)) for c, d, n in zip(cells, word, nxt)]
    lhs = Formula((SymbolicHeap(tuple(mids), tuple(atoms)),))
    return EntailmentProblem(lhs, base.rhs, base.sid, base.free_vars)


def decode_word(st: Structure) -> str:
    """Read the digit string on the list starting at ``x``."""
    s, h = st.store, st.heap
    digits = {s["hat0"]: "0", s["hat1"]: "1"}
    out = []
    loc, seen = s["x"], set()
    while loc in h.cells and loc not in seen:
        seen.add(loc)
        d, loc = h.cells[loc]
        out.append(digits.get(d, "?"))
    return "".join(out)


def member(g: Grammar, word: str) -> bool:
    """Membership by dynamic programming over (nonterminal, span), independent of the SID encoding."""
    by_head: dict[str, list[Production]] = {}
    for p in g.productions:
        by_head.setdefault(p.head, []).append(p)

    @lru_cache(maxsize=None)
    def derives(a: str, i: int, j: int) -> bool:
        return any(word[i] == p.terminal and seq(p.tail, i + 1, j) for p in by_head.get(a, ()))

    @lru_cache(maxsize=None)
    def seq(tail: tuple[str, ...], i: int, j: int) -> bool:
        if not tail:
            return i == j
        # every nonterminal derives at least one symbol
        return any(derives(tail[0], i, k) and seq(tail[1:], k, j)
                   for k in range(i + 1, j - len(tail) + 2))

    return bool(word) and derives(g.start, 0, len(word))
