import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slreduce.analysis import vargs
from slreduce.errors import (
    ArityMismatch,
    NilInEqualityOrPredicate,
    NotAPredicateAtom,
    ParseError,
    RebindingError,
    RuleHeadMismatch,
    UndefinedPredicate,
    WidthMismatch,
)
from slreduce.parser import parse_formula, parse_problem, parse_sid
from slreduce.semantics import Heap, Store, Structure, check_models, enumerate_structures
from slreduce.syntax import (
    NIL,
    Diseq,
    Eq,
    Exists,
    Formula,
    FreshNames,
    Or,
    PointsTo,
    PredCall,
    Rule,
    Sid,
    Star,
    SymbolicHeap,
    apply_substitution,
    format_problem,
    format_sid,
    measure,
    to_dnf,
    unfold_step,
)
from strategies import formulas, safe_problems, sheaps

LS = "fields 1; ls(x,y) <= x = y; ls(x,y) <= x -> (z) * ls(z,y); entail ls(a,b) |- ls(a,b)"


class TestParse:
    def test_list_segment_problem(self):
        p = parse_problem(LS)
        assert p.kappa == 1
        assert len(p.sid) == 2
        assert p.free_vars == ("a", "b")
        step = p.sid.rules_for("ls")[1]
        assert step.existentials == ("z",)

    def test_predicate_less_problem(self):
        p = parse_problem("fields 1; entail a = a |- a = a")
        assert len(p.sid) == 0 and p.sid.preds == ()
        assert p.free_vars == ("a",)

    def test_nil_in_equality(self):
        with pytest.raises(NilInEqualityOrPredicate):
            parse_problem("fields 1; p(x) <= x = nil; entail p(a) |- p(a)")

    def test_nil_in_predicate_argument(self):
        with pytest.raises(NilInEqualityOrPredicate):
            parse_problem("fields 1; p(x) <= x -> (nil); entail p(nil) |- p(a)")

    def test_arity_mismatch(self):
        with pytest.raises(ArityMismatch):
            parse_problem("fields 1; p(x) <= x -> (x); entail p(a, b) |- p(a)")

    def test_width_mismatch(self):
        with pytest.raises(WidthMismatch):
            parse_problem("fields 2; p(x) <= x -> (x); entail p(a) |- p(a)")

    def test_undefined_predicate(self):
        with pytest.raises(UndefinedPredicate):
            parse_problem("fields 1; entail q(a) |- a = a")

    def test_rebinding(self):
        with pytest.raises(RebindingError):
            parse_problem("fields 1; entail a = a |- exists x x . x = a")

    def test_bound_and_free(self):
        with pytest.raises(RebindingError):
            parse_problem("fields 1; entail a -> (b) |- a = b \\/ exists a . a -> (b)")

    def test_error_position(self):
        with pytest.raises(ParseError) as e:
            parse_problem("fields 1;\nentail a = |- a = a")
        assert (e.value.line, e.value.col) == (2, 12)

    def test_comments_and_disjunction(self):
        p = parse_problem("# header\nfields 1; # width\nentail a -> (b) |- a = b \\/ exists c . a -> (c)\n")
        assert len(p.rhs.disjuncts) == 2
        assert p.rhs.disjuncts[1].bound == ("c",)

    def test_antecedent_quantifiers_become_free(self):
        p = parse_problem("fields 1; entail exists c . a -> (c) |- a -> (b)")
        assert p.lhs.disjuncts[0].bound == ()
        assert set(p.free_vars) == {"a", "b", "c"}

    def test_pred_declaration(self):
        sid = parse_sid("fields 1; pred q/2; p(x) <= x -> (x) * q(x, x);")
        assert sid.arities["q"] == 2 and sid.rules_for("q") == ()

    def test_single_field_shorthand(self):
        f = parse_formula("x -> y")
        assert f.disjuncts[0].atoms == (PointsTo("x", ("y",)),)


class TestRoundTrip:
    def test_fresh_names_survive_printing(self):
        p = parse_problem(LS)
        sh = unfold_step(p.lhs.disjuncts[0], 0, p.sid.rules_for("ls")[1], FreshNames())
        assert str(sh) == "exists z#1 . a -> (z#1) * ls(z#1, b)"
        assert parse_formula(str(sh)).disjuncts[0] == sh

    @given(formulas(kappa=2, preds={"p": 2}))
    def test_formula(self, f):
        assert parse_formula(str(f), width=2) == f

    def test_problem(self):
        p = parse_problem(LS)
        assert parse_problem(format_problem(p)) == p

    def test_sid_header(self):
        sid = parse_problem(LS).sid
        text = format_sid(sid)
        assert text.startswith("fields 1;\n")
        assert parse_sid(text).rules == sid.rules


class TestSubstitution:
    def test_free_replacement(self):
        assert apply_substitution(PredCall("p", ("x", "y")), {"x": "w"}) == PredCall("p", ("w", "y"))

    def test_bound_untouched(self):
        sh = SymbolicHeap(("z",), (PointsTo("x", ("z",)),))
        assert apply_substitution(sh, {"z": "w"}) == sh

    def test_capture_avoided(self):
        sh = SymbolicHeap(("z",), (PointsTo("x", ("z",)),))
        out = apply_substitution(sh, {"x": "z"})
        (pt,) = out.atoms
        assert pt.src == "z" and pt.fields[0] != "z" and out.bound == pt.fields

    def test_vargs_example(self):
        assert vargs(apply_substitution(PredCall("p", ("x", "y")), {"y": "w"}), {"p": {2}}) == {"w"}

    @given(sheaps(kappa=1, preds={"p": 2, "q": 1}),
           st.dictionaries(st.sampled_from("abcd"), st.sampled_from("abcdw"), max_size=3),
           st.sets(st.integers(1, 2)), st.sets(st.integers(1, 1)))
    def test_vargs_stable(self, sh, sigma, lp, lq):
        profile = {"p": lp, "q": lq}
        free = {k: v for k, v in sigma.items() if k not in sh.bound}
        # capture renaming only touches bound names, which vargs of free atoms never hit
        if set(free.values()) & set(sh.bound):
            return
        before = {free.get(v, v) for v in vargs(sh, profile)}
        assert vargs(apply_substitution(sh, sigma), profile) == before


class TestUnfold:
    def setup_method(self):
        self.p = parse_problem(LS)
        self.base, self.step = self.p.sid.rules_for("ls")
        self.sh = self.p.lhs.disjuncts[0]

    def test_base(self):
        assert unfold_step(self.sh, 0, self.base, FreshNames()) == SymbolicHeap((), (Eq("a", "b"),))

    def test_step_fresh(self):
        out = unfold_step(self.sh, 0, self.step, FreshNames())
        (z,) = out.bound
        assert z not in self.sh.vars()
        assert out.atoms == (PointsTo("a", (z,)), PredCall("ls", (z, "b")))

    def test_not_a_predicate(self):
        with pytest.raises(NotAPredicateAtom):
            unfold_step(SymbolicHeap((), (Eq("a", "b"),)), 0, self.base, FreshNames())

    def test_head_mismatch(self):
        with pytest.raises(RuleHeadMismatch):
            unfold_step(SymbolicHeap((), (PredCall("q", ("a", "b")),)), 0, self.base, FreshNames())

    def test_repeated_unfolding_keeps_invariants(self):
        sh = self.sh
        for _ in range(4):
            sh = unfold_step(sh, len(sh.atoms) - 1, self.step, FreshNames())
            assert len(set(sh.bound)) == len(sh.bound)
            assert not set(sh.bound) & set(sh.free_vars)


def _tree_holds(t, store, heap, sid) -> bool:
    """Direct evaluation of a formula tree over split heaps, independent of to_dnf."""
    if isinstance(t, Or):
        return _tree_holds(t.left, store, heap, sid) or _tree_holds(t.right, store, heap, sid)
    if isinstance(t, Star):
        dom = sorted(heap.cells)
        for mask in range(2 ** len(dom)):
            left = {l: heap.cells[l] for i, l in enumerate(dom) if mask >> i & 1}
            right = {l: c for l, c in heap.cells.items() if l not in left}
            if (_tree_holds(t.left, store, Heap(heap.width, left), sid)
                    and _tree_holds(t.right, store, Heap(heap.width, right), sid)):
                return True
        return False
    if isinstance(t, Exists):
        seen = set(store.values()) | set(heap.cells) | {v for c in heap.cells.values() for v in c}
        pool = sorted(seen - {0}) + [max(seen | {0}) + 1]
        return any(_tree_holds(t.body, Store({**dict(store), **dict(zip(t.vars, vs))}), heap, sid)
                   for vs in itertools.product(pool, repeat=len(t.vars)))
    return check_models(Structure(store, heap), Formula((SymbolicHeap((), (t,)),)), sid)


@settings(max_examples=60, deadline=None)
@given(safe_problems(), st.lists(st.tuples(st.integers(0, 7), st.integers(0, 3)), max_size=6))
def test_unfolding_sequences_stay_symbolic_heaps(problem, steps):
    sh = problem.lhs.disjuncts[0]
    fresh = FreshNames(sh.vars())
    for pick, rule_pick in steps:
        calls = [i for i, a in enumerate(sh.atoms) if isinstance(a, PredCall)]
        if not calls:
            break
        i = calls[pick % len(calls)]
        rules = problem.sid.rules_for(sh.atoms[i].pred)
        if not rules:
            break
        sh = unfold_step(sh, i, rules[rule_pick % len(rules)], fresh)
        assert len(set(sh.bound)) == len(sh.bound)
        assert not set(sh.bound) & set(sh.free_vars)
        assert set(sh.free_vars) <= set(problem.lhs.disjuncts[0].free_vars)
        assert all(len(a.fields) == problem.kappa for a in sh.atoms if isinstance(a, PointsTo))


class TestDnf:
    def test_distribute(self):
        t = Star(Or(Eq("a", "b"), Diseq("a", "b")), PointsTo("c", ("d",)))
        f = to_dnf(t)
        assert [d.atoms for d in f.disjuncts] == [
            (Eq("a", "b"), PointsTo("c", ("d",))),
            (Diseq("a", "b"), PointsTo("c", ("d",))),
        ]

    def test_hoist(self):
        f = to_dnf(Star(Exists(("x",), PointsTo("x", ("y",))), PointsTo("z", ("y",))))
        assert f == Formula((SymbolicHeap(("x",), (PointsTo("x", ("y",)), PointsTo("z", ("y",)))),))

    def test_four_disjuncts(self):
        a, b, c, d = (PointsTo(v, ("a",)) for v in "abcd")
        assert len(to_dnf(Star(Or(a, b), Or(c, d))).disjuncts) == 4

    @settings(max_examples=15, deadline=None)
    @given(st.lists(st.sampled_from([Eq("a", "b"), Diseq("a", "b"), PointsTo("a", ("b",)),
                                     PointsTo("b", ("a",)), PointsTo("b", (NIL,))]),
                    min_size=4, max_size=4))
    def test_semantic_equivalence(self, xs):
        tree = Star(Or(xs[0], xs[1]), Or(xs[2], Exists(("b",), xs[3])))
        f = to_dnf(tree)
        sid = Sid.build(1, [])
        for s in enumerate_structures(["a", "b"], 1, 1):
            assert check_models(s, f, sid) == _tree_holds(tree, s.store, s.heap, sid)

    def test_scope_separation(self):
        f = to_dnf(Star(Exists(("x",), PointsTo("a", ("x",))), Exists(("x",), PointsTo("b", ("x",)))))
        (d,) = f.disjuncts
        assert len(d.bound) == 2 and len(set(d.bound)) == 2


class TestMeasure:
    def test_empty(self):
        m = measure(Sid.build(1, []))
        assert (m.size, m.width) == (0, 0)

    def test_single_rule(self):
        # x -> (x) counts 3 symbols, plus arity 1
        m = measure(Sid.build(1, [Rule("p", ("x",), (PointsTo("x", ("x",)),))]))
        assert (m.size, m.width) == (4, 4)

    def test_ls_problem(self):
        p = parse_problem(LS)
        # |a = b| ... rules: 3+2 = 5 and (3 + 3 + 1) + 2 = 9; formulas ls(a,b) = 3 each
        assert measure(p.sid).size == 14
        assert measure(p).width == max(3, 3, 9)
        assert measure(p).size == 20
