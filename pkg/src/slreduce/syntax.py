"""Abstract syntax of symbolic heaps and inductive definitions.

Variables are plain strings. ``NIL`` is the only constant. Every AST node
is an immutable value, so sharing nodes between formulas is safe.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence, Union

from .errors import (
    ArityMismatch,
    NilInEqualityOrPredicate,
    NotAPredicateAtom,
    RebindingError,
    RuleHeadMismatch,
    UndefinedPredicate,
    WidthMismatch,
)


class _Nil:
    _instance: "_Nil | None" = None

    def __new__(cls) -> "_Nil":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "nil"

    __str__ = __repr__

    def __reduce__(self):
        return (_Nil, ())


NIL = _Nil()

Term = Union[str, _Nil]


def _check_var(v: object, what: str) -> None:
    if v is NIL:
        raise NilInEqualityOrPredicate(f"nil cannot occur in {what}")
    if not isinstance(v, str):
        raise TypeError(f"variable expected, got {v!r}")


@dataclass(frozen=True)
class Eq:
    left: str
    right: str

    def __post_init__(self) -> None:
        _check_var(self.left, "an equality")
        _check_var(self.right, "an equality")

    def vars(self) -> tuple[str, ...]:
        return (self.left, self.right)

    def __str__(self) -> str:
        return f"{self.left} = {self.right}"


@dataclass(frozen=True)
class Diseq:
    left: str
    right: str

    def __post_init__(self) -> None:
        _check_var(self.left, "a disequality")
        _check_var(self.right, "a disequality")

    def vars(self) -> tuple[str, ...]:
        return (self.left, self.right)

    def __str__(self) -> str:
        return f"{self.left} != {self.right}"


@dataclass(frozen=True)
class PointsTo:
    src: str
    fields: tuple[Term, ...]

    def __post_init__(self) -> None:
        _check_var(self.src, "a points-to source")
        object.__setattr__(self, "fields", tuple(self.fields))

    def vars(self) -> tuple[str, ...]:
        return (self.src,) + tuple(t for t in self.fields if t is not NIL)

    def __str__(self) -> str:
        return f"{self.src} -> ({', '.join(str(t) for t in self.fields)})"


@dataclass(frozen=True)
class PredCall:
    pred: str
    args: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "args", tuple(self.args))
        for a in self.args:
            _check_var(a, "a predicate atom")

    def vars(self) -> tuple[str, ...]:
        return self.args

    def __str__(self) -> str:
        return f"{self.pred}({', '.join(self.args)})"


Atom = Union[Eq, Diseq, PointsTo, PredCall]


def ordered_vars(atoms: Iterable[Atom]) -> tuple[str, ...]:
    """Variables of ``atoms`` in first-occurrence order."""
    seen: dict[str, None] = {}
    for a in atoms:
        for v in a.vars():
            seen.setdefault(v, None)
    return tuple(seen)


@dataclass(frozen=True)
class SymbolicHeap:
    bound: tuple[str, ...]
    atoms: tuple[Atom, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "bound", tuple(self.bound))
        object.__setattr__(self, "atoms", tuple(self.atoms))
        if len(set(self.bound)) != len(self.bound):
            raise RebindingError(f"variable bound twice in {self.bound}")
        if not self.atoms:
            raise ValueError("a symbolic heap needs at least one atom")

    @property
    def free_vars(self) -> tuple[str, ...]:
        b = set(self.bound)
        return tuple(v for v in ordered_vars(self.atoms) if v not in b)

    def vars(self) -> set[str]:
        return set(self.bound) | set(ordered_vars(self.atoms))

    def pred_calls(self) -> list[PredCall]:
        return [a for a in self.atoms if isinstance(a, PredCall)]

    def is_predicate_less(self) -> bool:
        return not any(isinstance(a, PredCall) for a in self.atoms)

    def __str__(self) -> str:
        body = " * ".join(str(a) for a in self.atoms)
        if self.bound:
            return f"exists {' '.join(self.bound)} . {body}"
        return body


@dataclass(frozen=True)
class Formula:
    disjuncts: tuple[SymbolicHeap, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "disjuncts", tuple(self.disjuncts))
        if not self.disjuncts:
            raise ValueError("a formula needs at least one disjunct")

    @staticmethod
    def of(*atoms: Atom, bound: Sequence[str] = ()) -> "Formula":
        return Formula((SymbolicHeap(tuple(bound), atoms),))

    @property
    def free_vars(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for d in self.disjuncts:
            for v in d.free_vars:
                seen.setdefault(v, None)
        return tuple(seen)

    def pred_calls(self) -> list[PredCall]:
        return [a for d in self.disjuncts for a in d.pred_calls()]

    def __str__(self) -> str:
        return " \\/ ".join(str(d) for d in self.disjuncts)


def as_formula(x: "Formula | SymbolicHeap | Atom") -> Formula:
    if isinstance(x, Formula):
        return x
    if isinstance(x, SymbolicHeap):
        return Formula((x,))
    return Formula.of(x)


@dataclass(frozen=True)
class Rule:
    pred: str
    params: tuple[str, ...]
    body: tuple[Atom, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "params", tuple(self.params))
        object.__setattr__(self, "body", tuple(self.body))
        for p in self.params:
            _check_var(p, "a rule head")
        if len(set(self.params)) != len(self.params):
            raise RebindingError(f"repeated parameter in {self.pred}{self.params}")
        if not self.body:
            raise ValueError("a rule body needs at least one atom")

    @property
    def head(self) -> PredCall:
        return PredCall(self.pred, self.params)

    @property
    def existentials(self) -> tuple[str, ...]:
        ps = set(self.params)
        return tuple(v for v in ordered_vars(self.body) if v not in ps)

    def vars(self) -> set[str]:
        return set(self.params) | set(ordered_vars(self.body))

    def points_to(self) -> list[PointsTo]:
        return [a for a in self.body if isinstance(a, PointsTo)]

    def pred_calls(self) -> list[PredCall]:
        return [a for a in self.body if isinstance(a, PredCall)]

    def __str__(self) -> str:
        return f"{self.pred}({', '.join(self.params)}) <= {' * '.join(str(a) for a in self.body)};"


@dataclass(frozen=True, eq=True)
class Sid:
    """Rules grouped by predicate, in declaration order, with a fixed record width.

    ``arities`` also lists predicates that have no rule at all (they denote
    the empty set of models).
    """

    width: int
    rules: Mapping[str, tuple[Rule, ...]] = field(default_factory=dict)
    arities: Mapping[str, int] = field(default_factory=dict)

    __hash__ = None  # type: ignore[assignment]

    @staticmethod
    def build(width: int, rules: Iterable[Rule], arities: Mapping[str, int] | None = None) -> "Sid":
        ar: dict[str, int] = dict(arities or {})
        grouped: dict[str, list[Rule]] = {p: [] for p in ar}
        for r in rules:
            if ar.setdefault(r.pred, len(r.params)) != len(r.params):
                raise ArityMismatch(f"{r.pred} used with arities {ar[r.pred]} and {len(r.params)}")
            grouped.setdefault(r.pred, []).append(r)
        sid = Sid(width, {p: tuple(rs) for p, rs in grouped.items()}, ar)
        sid.validate()
        return sid

    def validate(self) -> None:
        for r in self.all_rules():
            for a in r.body:
                if isinstance(a, PointsTo) and len(a.fields) != self.width:
                    raise WidthMismatch(f"{a} has {len(a.fields)} fields, expected {self.width}")
                if isinstance(a, PredCall):
                    if a.pred not in self.arities:
                        raise UndefinedPredicate(f"{a.pred} is not declared")
                    if self.arities[a.pred] != len(a.args):
                        raise ArityMismatch(f"{a} does not match arity {self.arities[a.pred]}")

    @property
    def preds(self) -> tuple[str, ...]:
        return tuple(self.arities)

    def rules_for(self, pred: str) -> tuple[Rule, ...]:
        return self.rules.get(pred, ())

    def all_rules(self) -> Iterator[Rule]:
        for rs in self.rules.values():
            yield from rs

    def __len__(self) -> int:
        return sum(len(rs) for rs in self.rules.values())

    def restrict(self, preds: Iterable[str]) -> "Sid":
        keep = set(preds)
        return Sid(self.width,
                   {p: rs for p, rs in self.rules.items() if p in keep},
                   {p: a for p, a in self.arities.items() if p in keep})

    def __str__(self) -> str:
        return format_sid(self)


@dataclass(frozen=True, eq=True)
class EntailmentProblem:
    lhs: Formula
    rhs: Formula
    sid: Sid
    free_vars: tuple[str, ...]
    mu: int = 0

    __hash__ = None  # type: ignore[assignment]

    @property
    def kappa(self) -> int:
        return self.sid.width

    @property
    def nu(self) -> int:
        return len(self.free_vars)

    def __str__(self) -> str:
        return format_problem(self)


def root_points_to(rule: Rule) -> PointsTo | None:
    """The single points-to atom of a progressing rule, rooted at its first parameter."""
    pts = rule.points_to()
    if len(pts) == 1 and rule.params and pts[0].src == rule.params[0]:
        return pts[0]
    return None


def reachable_preds(sid: Sid, roots: Iterable[str]) -> list[str]:
    """Predicates reachable from ``roots`` through rule bodies, in discovery order."""
    seen: dict[str, None] = {}
    todo = list(roots)
    while todo:
        p = todo.pop(0)
        if p in seen:
            continue
        seen[p] = None
        for r in sid.rules_for(p):
            todo.extend(a.pred for a in r.pred_calls() if a.pred not in seen)
    return list(seen)


# ---------------------------------------------------------------- printing

def format_sid(sid: Sid, header: bool = True) -> str:
    lines = [f"fields {sid.width};"] if header else []
    for p, ar in sid.arities.items():
        if not sid.rules_for(p):
            lines.append(f"pred {p}/{ar};")
    lines.extend(str(r) for r in sid.all_rules())
    return "\n".join(lines) + "\n"


def format_problem(p: EntailmentProblem) -> str:
    return format_sid(p.sid) + f"entail {p.lhs} |- {p.rhs}\n"


# ---------------------------------------------------------- fresh names

class FreshNames:
    """Deterministic fresh-name source: ``z`` becomes ``z#1``, ``z#2``, ...

    Names already handed out or reserved are never produced again.
    """

    def __init__(self, avoid: Iterable[str] = ()):
        self._used: set[str] = set(avoid)
        self._next: dict[str, int] = {}

    def reserve(self, names: Iterable[str]) -> None:
        self._used.update(names)

    def copy(self) -> "FreshNames":
        other = FreshNames(self._used)
        other._next = dict(self._next)
        return other

    def __call__(self, name: str) -> str:
        base = name.split("#", 1)[0]
        k = self._next.get(base, 0)
        while True:
            k += 1
            cand = f"{base}#{k}"
            if cand not in self._used:
                break
        self._next[base] = k
        self._used.add(cand)
        return cand


# ---------------------------------------------------------- substitution

Substitution = Mapping[str, str]


def _sub_term(t: Term, sigma: Substitution) -> Term:
    return t if t is NIL else sigma.get(t, t)  # type: ignore[arg-type]


def subst_atom(a: Atom, sigma: Substitution) -> Atom:
    if isinstance(a, Eq):
        return Eq(sigma.get(a.left, a.left), sigma.get(a.right, a.right))
    if isinstance(a, Diseq):
        return Diseq(sigma.get(a.left, a.left), sigma.get(a.right, a.right))
    if isinstance(a, PointsTo):
        return PointsTo(sigma.get(a.src, a.src), tuple(_sub_term(t, sigma) for t in a.fields))
    return PredCall(a.pred, tuple(sigma.get(x, x) for x in a.args))


def _subst_sheap(sh: SymbolicHeap, sigma: Substitution) -> SymbolicHeap:
    sigma = {k: v for k, v in sigma.items() if k not in sh.bound}
    images = set(sigma.values())
    clash = [b for b in sh.bound if b in images]
    if clash:
        fresh = FreshNames(sh.vars() | images | set(sigma))
        renaming = {b: fresh(b) for b in clash}
        sh = SymbolicHeap(tuple(renaming.get(b, b) for b in sh.bound),
                          tuple(subst_atom(a, renaming) for a in sh.atoms))
    return SymbolicHeap(sh.bound, tuple(subst_atom(a, sigma) for a in sh.atoms))


def apply_substitution(target, sigma: Substitution):
    """Replace free occurrences of ``dom(sigma)``; bound variables are renamed on capture."""
    if isinstance(target, Formula):
        return Formula(tuple(_subst_sheap(d, sigma) for d in target.disjuncts))
    if isinstance(target, SymbolicHeap):
        return _subst_sheap(target, sigma)
    return subst_atom(target, sigma)


# ---------------------------------------------------------------- unfolding

def unfold_step(sh: SymbolicHeap, index: int, rule: Rule, fresh: FreshNames) -> SymbolicHeap:
    atom = sh.atoms[index]
    if not isinstance(atom, PredCall):
        raise NotAPredicateAtom(f"{atom} is not a predicate atom")
    if atom.pred != rule.pred or len(atom.args) != len(rule.params):
        raise RuleHeadMismatch(f"rule for {rule.pred}/{len(rule.params)} cannot unfold {atom}")
    fresh.reserve(sh.vars())
    new_bound = tuple(fresh(e) for e in rule.existentials)
    sigma = dict(zip(rule.params, atom.args))
    sigma.update(zip(rule.existentials, new_bound))
    body = tuple(subst_atom(a, sigma) for a in rule.body)
    return SymbolicHeap(sh.bound + new_bound, sh.atoms[:index] + body + sh.atoms[index + 1:])


# -------------------------------------------------------------- DNF trees

@dataclass(frozen=True)
class Star:
    left: object
    right: object


@dataclass(frozen=True)
class Or:
    left: object
    right: object


@dataclass(frozen=True)
class Exists:
    vars: tuple[str, ...]
    body: object


def _tree_vars(t) -> set[str]:
    if isinstance(t, (Star, Or)):
        return _tree_vars(t.left) | _tree_vars(t.right)
    if isinstance(t, Exists):
        return set(t.vars) | _tree_vars(t.body)
    if isinstance(t, Formula):
        return set().union(*(d.vars() for d in t.disjuncts))
    if isinstance(t, SymbolicHeap):
        return t.vars()
    return set(t.vars())


def to_dnf(tree) -> Formula:
    """Normalise a tree of ``Star``/``Or``/``Exists``/atoms into a disjunction of symbolic heaps."""
    fresh = FreshNames(_tree_vars(tree))

    def go(t) -> list[tuple[tuple[str, ...], tuple[Atom, ...]]]:
        if isinstance(t, Formula):
            return [(d.bound, d.atoms) for d in t.disjuncts]
        if isinstance(t, SymbolicHeap):
            return [(t.bound, t.atoms)]
        if isinstance(t, Or):
            return go(t.left) + go(t.right)
        if isinstance(t, Exists):
            out = []
            for b, atoms in go(t.body):
                out.append((tuple(t.vars) + tuple(v for v in b if v not in t.vars), atoms))
            return out
        if isinstance(t, Star):
            out = []
            for (b1, a1), (b2, a2) in itertools.product(go(t.left), go(t.right)):
                # keep the two scopes apart before merging them
                taken = set(ordered_vars(a2)) | set(b2)
                ren = {v: fresh(v) for v in b1 if v in taken}
                a1 = tuple(subst_atom(a, ren) for a in a1)
                b1 = tuple(ren.get(v, v) for v in b1)
                free1 = set(ordered_vars(a1)) - set(b1)
                ren2 = {v: fresh(v) for v in b2 if v in free1}
                a2 = tuple(subst_atom(a, ren2) for a in a2)
                b2 = tuple(ren2.get(v, v) for v in b2)
                out.append((b1 + b2, a1 + a2))
            return out
        return [((), (t,))]

    return Formula(tuple(SymbolicHeap(b, a) for b, a in go(tree)))


# ----------------------------------------------------------------- measures

def atom_size(a: Atom) -> int:
    # each variable, constant, connective and predicate symbol counts once
    if isinstance(a, (Eq, Diseq)):
        return 3
    if isinstance(a, PointsTo):
        return 2 + len(a.fields)
    return 1 + len(a.args)


def sheap_size(sh: SymbolicHeap) -> int:
    return sum(atom_size(a) for a in sh.atoms) + (len(sh.atoms) - 1) + 2 * len(sh.bound)


def formula_size(f: Formula) -> int:
    return sum(sheap_size(d) for d in f.disjuncts) + (len(f.disjuncts) - 1)


def rule_size(r: Rule) -> int:
    return sum(atom_size(a) for a in r.body) + (len(r.body) - 1) + len(r.params)


@dataclass(frozen=True)
class Measure:
    size: int
    width: int


def measure(x: "Sid | EntailmentProblem") -> Measure:
    """Symbol-occurrence size and width; a rule weighs its body size plus its arity."""
    if isinstance(x, Sid):
        sizes = [rule_size(r) for r in x.all_rules()]
        return Measure(sum(sizes), max(sizes, default=0))
    sid = measure(x.sid)
    l, r = formula_size(x.lhs), formula_size(x.rhs)
    return Measure(l + r + sid.size, max(l, r, sid.width))
