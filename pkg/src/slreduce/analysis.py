"""Static analyses over rule sets and the safe-class classifier."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .syntax import (
    Diseq,
    EntailmentProblem,
    Eq,
    Formula,
    NIL,
    PointsTo,
    PredCall,
    Rule,
    Sid,
    SymbolicHeap,
    as_formula,
    reachable_preds,
    root_points_to,
)

FvProfile = dict[str, frozenset[int]]
MustAllocSets = dict[str, frozenset[int]]


def preds_closure(phi, sid: Sid) -> set[str]:
    f = as_formula(phi)
    return set(reachable_preds(sid, [a.pred for a in f.pred_calls()]))


def _ordered_closure(phi, sid: Sid) -> list[str]:
    f = as_formula(phi)
    found = set(reachable_preds(sid, [a.pred for a in f.pred_calls()]))
    return [p for p in sid.preds if p in found]


# ------------------------------------------------------------ fv-profile

def vargs(phi, profile: Mapping[str, Iterable[int]]) -> set[str]:
    """Arguments found at profiled positions of predicate atoms."""
    if isinstance(phi, Rule):
        atoms = phi.body
    elif isinstance(phi, (Formula, SymbolicHeap)):
        atoms = [a for d in as_formula(phi).disjuncts for a in d.atoms]
    elif isinstance(phi, PredCall):
        atoms = [phi]
    else:
        atoms = list(phi)
    out: set[str] = set()
    for a in atoms:
        if isinstance(a, PredCall):
            for i in profile.get(a.pred, ()):
                out.add(a.args[i - 1])
    return out


def _cond1_violations(psi: Formula, lam: Mapping[str, set[int]]) -> list[tuple[str, int]]:
    out = []
    for d in psi.disjuncts:
        bound = set(d.bound)
        for a in d.pred_calls():
            for i in sorted(lam.get(a.pred, ())):
                if a.args[i - 1] in bound:
                    out.append((a.pred, i))
    return out


def _cond2_violations(sid: Sid, preds: Iterable[str], lam: Mapping[str, set[int]]) -> list[tuple[str, int]]:
    out = []
    for p in preds:
        for r in sid.rules_for(p):
            kept = {r.params[j - 1] for j in lam.get(p, ())}
            for a in r.pred_calls():
                for i in sorted(lam.get(a.pred, ())):
                    if a.args[i - 1] not in kept:
                        out.append((a.pred, i))
    return out


def compute_fv_profile(psi, sid: Sid, order: Iterable[str] | None = None) -> FvProfile:
    """Greatest profile whose tracked positions only ever receive free variables of ``psi``.

    ``order`` changes the sweep order over predicates; the result does not
    depend on it.
    """
    psi = as_formula(psi)
    lam: dict[str, set[int]] = {p: set(range(1, n + 1)) for p, n in sid.arities.items()}
    closure = preds_closure(psi, sid)
    sweep = [p for p in (order if order is not None else sid.preds) if p in closure]
    changed = True
    while changed:
        changed = False
        for q, i in _cond1_violations(psi, lam):
            if i in lam[q]:
                lam[q].discard(i)
                changed = True
        for p in sweep:
            for q, i in _cond2_violations(sid, [p], lam):
                if i in lam[q]:
                    lam[q].discard(i)
                    changed = True
    return {p: frozenset(s) for p, s in lam.items()}


def fv_profile_violations(psi, sid: Sid, profile: Mapping[str, Iterable[int]]) -> list[tuple[str, int]]:
    """Positions at which ``profile`` breaks one of the two profile conditions."""
    psi = as_formula(psi)
    lam = {p: set(s) for p, s in profile.items()}
    return _cond1_violations(psi, lam) + _cond2_violations(sid, _ordered_closure(psi, sid), lam)


# ------------------------------------------------------------ allocation

class _UnionFind:
    def __init__(self):
        self.parent: dict[str, str] = {}

    def find(self, v: str) -> str:
        self.parent.setdefault(v, v)
        while self.parent[v] != v:
            self.parent[v] = self.parent[self.parent[v]]
            v = self.parent[v]
        return v

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def _eq_closure(atoms, seeds: Iterable[str]) -> set[str]:
    uf = _UnionFind()
    names: set[str] = set()
    for a in atoms:
        names.update(a.vars())
        if isinstance(a, Eq):
            uf.union(a.left, a.right)
    names.update(seeds)
    roots = {uf.find(s) for s in seeds}
    return {v for v in names if uf.find(v) in roots}


def allocated_vars(sh) -> set[str]:
    atoms = sh.atoms if isinstance(sh, SymbolicHeap) else list(sh)
    return _eq_closure(atoms, [a.src for a in atoms if isinstance(a, PointsTo)])


def _body_closure(rule: Rule, sets: Mapping[str, Iterable[int]]) -> set[str]:
    seeds = [a.src for a in rule.body if isinstance(a, PointsTo)]
    for a in rule.pred_calls():
        seeds.extend(a.args[i - 1] for i in sets.get(a.pred, ()))
    return _eq_closure(rule.body, seeds)


def must_alloc_params(sid: Sid, preds: Iterable[str] | None = None) -> MustAllocSets:
    """Parameter positions allocated in every predicate-less unfolding (greatest fixpoint).

    Only variables linked by equalities to a points-to source, or to an
    argument sitting at an already-certified position of a body atom, count.
    """
    scope = sid.preds if preds is None else [p for p in sid.preds
                                             if p in set(reachable_preds(sid, preds))]
    sets: dict[str, set[int]] = {p: set(range(1, n + 1)) for p, n in sid.arities.items()}
    changed = True
    while changed:
        changed = False
        for p in scope:
            for r in sid.rules_for(p):
                closure = _body_closure(r, sets)
                keep = {i for i in sets[p] if r.params[i - 1] in closure}
                if keep != sets[p]:
                    sets[p] = keep
                    changed = True
    return {p: frozenset(sets[p]) for p in scope}


# -------------------------------------------------------- rule conditions

def is_progressing(rule: Rule) -> bool:
    return root_points_to(rule) is not None


def _fields(pt: PointsTo) -> set[str]:
    return {t for t in pt.fields if t is not NIL}


def connected_witness(rule: Rule) -> str | None:
    """None when the rule is connected, else the offending atom or reason."""
    pt = root_points_to(rule)
    if pt is None:
        return "not progressing"
    fields = _fields(pt)
    for a in rule.pred_calls():
        if a.args[0] not in fields:
            return str(a)
    return None


def is_connected(rule: Rule) -> bool:
    return connected_witness(rule) is None


def established_witness(rule: Rule, sets: Mapping[str, Iterable[int]]) -> str | None:
    closure = _body_closure(rule, sets)
    for z in rule.existentials:
        if z not in closure:
            return z
    return None


def head_vargs(rule: Rule, profile: Mapping[str, Iterable[int]]) -> set[str]:
    return {rule.params[i - 1] for i in profile.get(rule.pred, ())}


def lambda_connected_witness(rule: Rule, profile: Mapping[str, Iterable[int]]) -> str | None:
    pts = rule.points_to()
    if len(pts) != 1:
        return "not of the form x -> (...) * rho"
    allowed = head_vargs(rule, profile) | _fields(pts[0])
    for a in rule.pred_calls():
        if a.args[0] not in allowed:
            return str(a)
    return None


def restricted_witness(atoms, allowed: set[str], profile: Mapping[str, Iterable[int]]) -> str | None:
    """None when every disequality touches ``allowed`` and profiled arguments stay inside it."""
    atoms = list(atoms)
    for a in atoms:
        if isinstance(a, Diseq) and a.left not in allowed and a.right not in allowed:
            return str(a)
    for a in atoms:
        if isinstance(a, PredCall):
            for i in sorted(profile.get(a.pred, ())):
                if a.args[i - 1] not in allowed:
                    return f"{a.args[i - 1]} in {a}"
    return None


def lambda_restricted_witness(rule: Rule, profile: Mapping[str, Iterable[int]]) -> str | None:
    pts = rule.points_to()
    rho = [a for a in rule.body if not (len(pts) == 1 and a is pts[0])]
    return restricted_witness(rho, head_vargs(rule, profile), profile)


def formula_restricted_witness(phi, allowed: Iterable[str], profile) -> str | None:
    f = as_formula(phi)
    allowed = set(allowed)
    for d in f.disjuncts:
        w = restricted_witness(d.atoms, allowed, profile)
        if w is not None:
            return w
    return None


# ---------------------------------------------------------- establishment

def exact_established(rule: Rule, sid: Sid, depth: int) -> str | None:
    """Bounded search for an unfolding of the body that leaves an existential unallocated."""
    from .semantics import predicate_less_unfoldings

    start = SymbolicHeap((), rule.body)
    for unf in predicate_less_unfoldings(start, sid, depth):
        alloc = allocated_vars(unf)
        for z in rule.existentials:
            if z not in alloc:
                return z
    return None


# ---------------------------------------------------------- classification

CONDITIONS = ("progressing", "connected", "established", "lambda_connected", "lambda_restricted")


@dataclass
class Violation:
    side: str
    pred: str | None
    rule: int | None
    condition: str
    witness: str

    def to_json(self) -> dict:
        return {"side": self.side, "pred": self.pred, "rule": self.rule,
                "condition": self.condition, "witness": self.witness}


@dataclass
class ClassificationReport:
    left: dict[str, object]
    right: dict[str, object]
    profile_right: FvProfile
    profile_left: FvProfile
    rhs_restricted: bool
    all_progressing: bool
    safe: bool
    violations: list[Violation] = field(default_factory=list)

    def to_json(self) -> dict:
        def prof(p: FvProfile) -> dict:
            return {k: sorted(v) for k, v in p.items()}

        return {
            "left": dict(self.left),
            "right": dict(self.right),
            "rhs_restricted": self.rhs_restricted,
            "all_progressing": self.all_progressing,
            "safe": self.safe,
            "fv_profile": {"left": prof(self.profile_left), "right": prof(self.profile_right)},
            "violations": [v.to_json() for v in self.violations],
        }


def _side_flags(side: str, preds: list[str], sid: Sid, profile: FvProfile, sets: MustAllocSets,
                exact_depth: int | None, out: list[Violation]) -> dict[str, object]:
    flags: dict[str, object] = {c: True for c in CONDITIONS}
    for p in preds:
        for k, r in enumerate(sid.rules_for(p), 1):
            checks = {
                "progressing": None if is_progressing(r) else "expected exactly one points-to rooted at "
                + (r.params[0] if r.params else "?"),
                "connected": connected_witness(r),
                "lambda_connected": lambda_connected_witness(r, profile),
                "lambda_restricted": lambda_restricted_witness(r, profile),
            }
            est = established_witness(r, sets)
            est_flag: object = True
            if est is not None:
                est_flag = False
                if exact_depth is not None and exact_established(r, sid, exact_depth) is None:
                    est_flag = "unknown"
            for c, w in checks.items():
                if w is not None:
                    flags[c] = False
                    out.append(Violation(side, p, k, c, w))
            if est_flag is not True:
                if flags["established"] is True or est_flag is False:
                    flags["established"] = est_flag
                out.append(Violation(side, p, k, "established" if est_flag is False else "established_unknown",
                                     est))
    return flags


def classify_problem(problem: EntailmentProblem, exact_establishment: int | None = None) -> ClassificationReport:
    """Evaluate every structural condition on both sides and the safe-class conjunction.

    With ``exact_establishment=D`` a failed fixpoint check is re-examined on
    all predicate-less unfoldings up to depth ``D``; when no unallocated
    existential turns up the verdict becomes ``"unknown"``.
    """
    sid = problem.sid
    phi, psi = problem.lhs, problem.rhs
    prof_r = compute_fv_profile(psi, sid)
    prof_l = compute_fv_profile(phi, sid)
    sets = must_alloc_params(sid)
    violations: list[Violation] = []
    left = _side_flags("left", _ordered_closure(phi, sid), sid, prof_l, sets, exact_establishment, violations)
    right = _side_flags("right", _ordered_closure(psi, sid), sid, prof_r, sets, exact_establishment, violations)

    all_prog = True
    for p in sid.preds:
        for k, r in enumerate(sid.rules_for(p), 1):
            if not is_progressing(r):
                all_prog = False
                if not any(v.pred == p and v.rule == k and v.condition == "progressing" for v in violations):
                    violations.append(Violation("sid", p, k, "progressing", "not progressing"))
    w = formula_restricted_witness(psi, phi.free_vars, prof_r)
    rhs_ok = w is None
    if not rhs_ok:
        violations.append(Violation("right", None, None, "rhs_lambda_restricted", w))
    safe = all_prog and rhs_ok and right["lambda_connected"] is True and right["lambda_restricted"] is True
    return ClassificationReport(left, right, prof_r, prof_l, rhs_ok, all_prog, safe, violations)
