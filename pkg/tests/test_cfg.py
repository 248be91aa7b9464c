import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slreduce.analysis import (
    established_witness,
    exact_established,
    is_connected,
    is_progressing,
    must_alloc_params,
)
from slreduce.cfg import (
    Grammar,
    Production,
    chain_name,
    decode_word,
    gen_cfg_instance,
    member,
    parse_grammar,
    word_instance,
)
from slreduce.errors import EpsilonInLanguage, NotGreibach, ParseError
from slreduce.semantics import Counterexample, Heap, Store, Structure, find_counterexample_bounded

UNIVERSAL = parse_grammar("S -> 0 S\nS -> 1 S\nS -> 0\nS -> 1\n")
ZEROS = parse_grammar("S -> 0 S\nS -> 0\n")
# words of the form 0^n 1^n
BALANCED = parse_grammar("S -> 0 B\nS -> 0 S B\nB -> 1\n")


class TestParse:
    def test_comments(self):
        g = parse_grammar("# header\nS -> 0 A  # first\nA -> 1\n")
        assert g.start == "S" and len(g.productions) == 2
        assert str(g.productions[0]) == "S -> 0 A"

    def test_epsilon_on_start(self):
        for rhs in ("", "eps", "ε"):
            with pytest.raises(EpsilonInLanguage):
                parse_grammar(f"S -> 0\nS -> {rhs}\n")

    def test_epsilon_elsewhere(self):
        with pytest.raises(NotGreibach):
            parse_grammar("S -> 0 A\nA -> eps\n")

    def test_leading_nonterminal(self):
        with pytest.raises(NotGreibach):
            parse_grammar("S -> S 0\n")

    def test_terminal_in_tail(self):
        with pytest.raises(NotGreibach):
            parse_grammar("S -> 0 1\n")

    def test_other_terminal(self):
        with pytest.raises(NotGreibach):
            parse_grammar("S -> a\n")

    def test_undefined_nonterminal(self):
        with pytest.raises(NotGreibach):
            parse_grammar("S -> 0 A\n")

    def test_malformed(self):
        with pytest.raises(ParseError):
            parse_grammar("S = 0\n")

    def test_empty(self):
        with pytest.raises(ParseError):
            parse_grammar("# nothing\n")


class TestEncoding:
    def test_shape(self):
        p = gen_cfg_instance(ZEROS)
        assert p.kappa == 2 and p.free_vars == ("hat0", "hat1", "x", "y")
        assert str(p.lhs) == "hat0 != hat1 * T(x, y, hat0, hat1)"
        assert str(p.rhs) == "S(x, y, hat0, hat1)"
        s1, s2 = p.sid.rules_for("S")
        assert str(s1) == "S(x, y, hat0, hat1) <= x -> (hat0, x1) * S(x1, y, hat0, hat1);"
        assert str(s2) == "S(x, y, hat0, hat1) <= x -> (hat0, y);"

    def test_midpoints(self):
        p = gen_cfg_instance(BALANCED)
        rule = p.sid.rules_for("S")[1]
        assert str(rule) == ("S(x, y, hat0, hat1) <= x -> (hat0, x1) * S(x1, x2, hat0, hat1)"
                             " * B(x2, y, hat0, hat1);")

    def test_chain_name_clash(self):
        g = parse_grammar("S -> 0 T\nT -> 1\n")
        assert chain_name(g) == "T_"
        assert "T_" in gen_cfg_instance(g).sid.preds

    @pytest.mark.parametrize("g", [UNIVERSAL, ZEROS, BALANCED])
    def test_rule_classes(self, g):
        p = gen_cfg_instance(g)
        must = must_alloc_params(p.sid)
        for r in p.sid.all_rules():
            assert is_progressing(r)
            assert established_witness(r, must) is None or exact_established(r, p.sid, 4) is None
        for r in p.sid.rules_for(chain_name(g)):
            assert is_connected(r)


class TestOracle:
    def test_universal(self):
        assert not isinstance(find_counterexample_bounded(gen_cfg_instance(UNIVERSAL), 5), Counterexample)

    def test_zeros(self):
        v = find_counterexample_bounded(gen_cfg_instance(ZEROS), 1)
        assert isinstance(v, Counterexample)
        assert decode_word(v.structure) == "1"

    def test_balanced_smallest_missing_word(self):
        v = find_counterexample_bounded(gen_cfg_instance(BALANCED), 2)
        assert isinstance(v, Counterexample)
        assert not member(BALANCED, decode_word(v.structure))

    @pytest.mark.parametrize("word", ["01", "0011", "001", "10"])
    def test_word_instances(self, word):
        v = find_counterexample_bounded(word_instance(BALANCED, word), len(word))
        assert isinstance(v, Counterexample) == (not member(BALANCED, word))


def test_decode():
    s = Structure(Store({"hat0": 7, "hat1": 8, "x": 1, "y": 3}), Heap(2, {1: (8, 2), 2: (7, 3)}))
    assert decode_word(s) == "10"


def test_decode_stops_on_cycle():
    s = Structure(Store({"hat0": 7, "hat1": 8, "x": 1, "y": 3}), Heap(2, {1: (8, 1)}))
    assert decode_word(s) == "1"


class TestMembership:
    def test_examples(self):
        assert member(BALANCED, "0011") and not member(BALANCED, "0101")
        assert not member(UNIVERSAL, "")
        assert all(member(ZEROS, "0" * n) for n in range(1, 6))


def _language(g: Grammar, max_len: int) -> set[str]:
    """Leftmost derivations, pruned by length (each nonterminal yields at least one symbol)."""
    out: set[str] = set()
    todo = [("", (g.start,))]
    while todo:
        done, form = todo.pop()
        if not form:
            out.add(done)
            continue
        head, rest = form[0], form[1:]
        for p in g.productions:
            if p.head == head and len(done) + 1 + len(p.tail) + len(rest) <= max_len:
                todo.append((done + p.terminal, p.tail + rest))
    return out


@st.composite
def grammars(draw):
    names = ["S", "A", "B"][:draw(st.integers(1, 3))]
    prods = []
    for n in names:
        for _ in range(draw(st.integers(1, 3))):
            tail = tuple(draw(st.lists(st.sampled_from(names), max_size=2)))
            prods.append(Production(n, draw(st.sampled_from("01")), tail))
    heads = {p.head for p in prods}
    prods = [p for p in prods if set(p.tail) <= heads]
    if not prods or prods[0].head != "S":
        prods.insert(0, Production("S", "1", ()))
    return Grammar("S", tuple(prods))


@settings(max_examples=150, deadline=None)
@given(grammars())
def test_membership_matches_derivations(g):
    lang = _language(g, 5)
    for n in range(1, 6):
        for w in map("".join, itertools.product("01", repeat=n)):
            assert member(g, w) == (w in lang), w
