"""Reduction from safe entailment problems to progressing, connected, left-established ones.

Pipeline: ``normalize`` rewrites the input into the shape the construction
expects, ``build_right_sid`` and ``build_left_sid`` generate the decorated
rule sets, and ``reduce_safe_to_pce`` assembles one output instance per
decoration of the antecedent. Every candidate rule is logged together with
the choice that produced it and the reason it was kept or dropped.
"""

from __future__ import annotations

import itertools
import json
import os
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

from .analysis import ClassificationReport, classify_problem, compute_fv_profile, is_connected
from .errors import CombinatorialBudgetExceeded, NonProgressingSid, NotSafe
from .syntax import (
    NIL,
    Atom,
    EntailmentProblem,
    Eq,
    Formula,
    FreshNames,
    PointsTo,
    PredCall,
    Rule,
    Sid,
    SymbolicHeap,
    format_problem,
    format_sid,
    ordered_vars,
    reachable_preds,
    root_points_to,
    subst_atom,
)

BOTTOM_PRED = "bot__"
DEFAULT_BUDGET = 10 ** 6


def hat_name(pred: str) -> str:
    return f"{pred}__hat"


def deco_name(pred: str, claimed: Iterable[int], arity: int) -> str:
    s = set(claimed)
    return f"{pred}__X_{''.join('1' if i in s else '0' for i in range(1, arity + 1))}"


def decoration_of(name: str) -> tuple[str, frozenset[int]] | None:
    """Recover ``(base predicate, claimed positions)`` from a left-side name."""
    if name == BOTTOM_PRED:
        return name, frozenset({1})
    base, sep, bits = name.rpartition("__X_")
    if not sep or not bits or set(bits) - {"0", "1"}:
        return None
    return base, frozenset(i + 1 for i, b in enumerate(bits) if b == "1")


def subsets(n: int) -> Iterator[tuple[int, ...]]:
    """Subsets of ``{1..n}`` in binary-counter order."""
    for mask in range(1 << n):
        yield tuple(i + 1 for i in range(n) if mask >> i & 1)


def bottom_rule(width: int) -> Rule:
    return Rule(BOTTOM_PRED, ("x",), (PointsTo("x", (NIL,) * width),))


# ---------------------------------------------------------------- normalize

@dataclass
class NormalizedProblem:
    problem: EntailmentProblem
    source: EntailmentProblem
    left_preds: tuple[str, ...]
    right_preds: tuple[str, ...]
    mu: int
    w: tuple[str, ...]
    profile: dict
    report: ClassificationReport | None = None

    @property
    def kappa(self) -> int:
        return self.problem.sid.width

    @property
    def nu(self) -> int:
        return len(self.w)

    @property
    def sid(self) -> Sid:
        return self.problem.sid


def _unique(name: str, taken: set[str]) -> str:
    while name in taken:
        name += "_"
    taken.add(name)
    return name


def _rename_pred_calls(atoms: Iterable[Atom], mapping: Mapping[str, str]) -> tuple[Atom, ...]:
    return tuple(PredCall(mapping.get(a.pred, a.pred), a.args) if isinstance(a, PredCall) else a
                 for a in atoms)


def normalize(problem: EntailmentProblem, require_safe: bool = True) -> NormalizedProblem:
    """Bring a problem into the shape the decoration construction works on.

    Points-to atoms of both formulas become calls to dedicated predicates,
    predicates used on both sides are split into two copies, body atoms of
    antecedent rules never start with a head parameter, antecedent rules
    all get the same number of existentials, and at least one free variable
    exists. Consequent rules are not padded: their extra record fields are
    fresh variables, so their own existential count is irrelevant.
    """
    report = classify_problem(problem)
    if require_safe and not report.safe:
        raise NotSafe(report)
    sid = problem.sid
    kappa = sid.width
    phi, psi = problem.lhs, problem.rhs
    all_names: set[str] = set(problem.free_vars)
    for r in sid.all_rules():
        all_names |= r.vars()
    for d in phi.disjuncts + psi.disjuncts:
        all_names |= d.vars()
    w = list(problem.free_vars)
    if not w:
        dummy = "w" if "w" not in all_names else FreshNames(all_names)("w")
        all_names.add(dummy)
        w = [dummy]
        phi = Formula(tuple(SymbolicHeap(d.bound, d.atoms + (Eq(dummy, dummy),)) for d in phi.disjuncts))
    wset = set(w)

    def rename_away(rule: Rule) -> Rule:
        clash = rule.vars() & wset
        if not clash:
            return rule
        fr = FreshNames(rule.vars() | wset)
        ren = {v: fr(v) for v in sorted(clash)}
        return Rule(rule.pred, tuple(ren.get(v, v) for v in rule.params),
                    tuple(subst_atom(a, ren) for a in rule.body))

    rules: dict[str, list[Rule]] = {p: [rename_away(r) for r in sid.rules_for(p)] for p in sid.preds}
    arities = dict(sid.arities)
    taken = set(arities)

    # points-to atoms of the two formulas become predicate atoms
    pt_preds: dict[tuple[bool, ...], str] = {}

    def pt_call(a: PointsTo) -> PredCall:
        mask = tuple(t is NIL for t in a.fields)
        name = pt_preds.get(mask)
        if name is None:
            name = _unique("pt__" + "".join("n" if m else "v" for m in mask), taken)
            pt_preds[mask] = name
            ys = [f"y{i}" for i in range(1, kappa + 1) if not mask[i - 1]]
            it = iter(ys)
            body_fields = tuple(NIL if m else next(it) for m in mask)
            rules[name] = [Rule(name, ("x",) + tuple(ys), (PointsTo("x", body_fields),))]
            arities[name] = 1 + len(ys)
        return PredCall(name, (a.src,) + tuple(t for t in a.fields if t is not NIL))

    def strip_pts(f: Formula) -> Formula:
        return Formula(tuple(SymbolicHeap(d.bound, tuple(pt_call(a) if isinstance(a, PointsTo) else a
                                                         for a in d.atoms)) for d in f.disjuncts))

    phi, psi = strip_pts(phi), strip_pts(psi)
    base = Sid.build(kappa, [r for rs in rules.values() for r in rs], arities)
    left = reachable_preds(base, [a.pred for a in phi.pred_calls()])
    right = reachable_preds(base, [a.pred for a in psi.pred_calls()])
    shared = set(left) & set(right)
    lmap = {p: _unique(p + "__L", taken) for p in base.preds if p in shared}
    rmap = {p: _unique(p + "__R", taken) for p in base.preds if p in shared}

    left_rules: list[Rule] = []
    right_rules: list[Rule] = []
    new_ar: dict[str, int] = {}
    left_order = [p for p in base.preds if p in set(left)]
    right_order = [p for p in base.preds if p in set(right)]
    for p in left_order:
        name = lmap.get(p, p)
        new_ar[name] = base.arities[p]
        for r in base.rules_for(p):
            left_rules.append(Rule(name, r.params, _rename_pred_calls(r.body, lmap)))
    for p in right_order:
        name = rmap.get(p, p)
        new_ar[name] = base.arities[p]
        for r in base.rules_for(p):
            right_rules.append(Rule(name, r.params, _rename_pred_calls(r.body, rmap)))

    def rename_formula(f: Formula, mapping) -> Formula:
        return Formula(tuple(SymbolicHeap(d.bound, _rename_pred_calls(d.atoms, mapping)) for d in f.disjuncts))

    phi, psi = rename_formula(phi, lmap), rename_formula(psi, rmap)

    # antecedent rules: body atoms must not start with a head parameter
    def detach_roots(rule: Rule) -> Rule:
        params = set(rule.params)
        fr = FreshNames(rule.vars() | wset)
        body: list[Atom] = []
        extra: list[Atom] = []
        for a in rule.body:
            if isinstance(a, PredCall) and a.args[0] in params:
                z = fr("z")
                body.append(PredCall(a.pred, (z,) + a.args[1:]))
                extra.append(Eq(z, a.args[0]))
            else:
                body.append(a)
        return Rule(rule.pred, rule.params, tuple(body + extra))

    left_rules = [detach_roots(r) for r in left_rules]
    mu = max((len(r.existentials) for r in left_rules + right_rules), default=0)

    def pad(rule: Rule) -> Rule:
        missing = mu - len(rule.existentials)
        if missing <= 0:
            return rule
        fr = FreshNames(rule.vars() | wset)
        names = [fr("e") for _ in range(missing)]
        return Rule(rule.pred, rule.params, rule.body + tuple(Eq(e, e) for e in names))

    left_rules = [pad(r) for r in left_rules]
    nsid = Sid.build(kappa, left_rules + right_rules, new_ar)
    out = EntailmentProblem(phi, psi, nsid, tuple(w), mu)
    return NormalizedProblem(
        problem=out,
        source=problem,
        left_preds=tuple(lmap.get(p, p) for p in left_order),
        right_preds=tuple(rmap.get(p, p) for p in right_order),
        mu=mu,
        w=tuple(w),
        profile=compute_fv_profile(psi, nsid),
        report=report,
    )


# ------------------------------------------------------------- decorations

def decorate_consequent(psi, w: Sequence[str]) -> Formula:
    from .syntax import as_formula

    f = as_formula(psi)
    w = tuple(w)
    return Formula(tuple(
        SymbolicHeap(d.bound, tuple(PredCall(hat_name(a.pred), a.args + w) if isinstance(a, PredCall) else a
                                    for a in d.atoms))
        for d in f.disjuncts))


def enumerate_decorations(phi, w: Sequence[str]) -> list[Formula]:
    """All decorations of ``phi``: each predicate atom independently claims a subset of its positions."""
    from .syntax import as_formula

    f = as_formula(phi)
    w = tuple(w)
    occurrences = [(di, ai, a) for di, d in enumerate(f.disjuncts)
                   for ai, a in enumerate(d.atoms) if isinstance(a, PredCall)]
    out = []
    for choice in itertools.product(*[list(subsets(len(a.args))) for _, _, a in occurrences]):
        pick = {(di, ai): (a, X) for (di, ai, a), X in zip(occurrences, choice)}
        ds = []
        for di, d in enumerate(f.disjuncts):
            atoms = []
            for ai, a in enumerate(d.atoms):
                if (di, ai) in pick:
                    at, X = pick[(di, ai)]
                    atoms.append(PredCall(deco_name(at.pred, X, len(at.args)), at.args + w))
                else:
                    atoms.append(a)
            ds.append(SymbolicHeap(d.bound, tuple(atoms)))
        out.append(Formula(tuple(ds)))
    return out


def alloc_set_decorated(alpha) -> set[str]:
    """Variables allocated by a points-to atom or claimed by a decorated predicate atom.

    Equalities are deliberately not followed.
    """
    if isinstance(alpha, Rule):
        atoms = list(alpha.body)
    elif isinstance(alpha, (Formula, SymbolicHeap)):
        from .syntax import as_formula

        atoms = [a for d in as_formula(alpha).disjuncts for a in d.atoms]
    else:
        atoms = list(alpha)
    out: set[str] = set()
    for a in atoms:
        if isinstance(a, PointsTo):
            out.add(a.src)
        elif isinstance(a, PredCall):
            dec = decoration_of(a.pred)
            if dec is not None:
                out.update(a.args[i - 1] for i in dec[1])
    return out


def canonical_key(rule: Rule) -> tuple:
    """Rule identity up to renaming of existentials."""
    ren = {z: f"_{i}" for i, z in enumerate(rule.existentials)}
    return (rule.pred, rule.params, tuple(subst_atom(a, ren) for a in rule.body))


@dataclass
class Candidate:
    side: str
    rule: str
    sigma: dict[str, str]
    I: tuple[int, ...]
    X: tuple[int, ...] | None
    generated: Rule
    kept: bool
    reason: str

    def to_json(self) -> dict:
        return {"side": self.side, "rule": self.rule, "sigma": dict(self.sigma), "I": list(self.I),
                "X": None if self.X is None else list(self.X), "kept": self.kept,
                "reason": self.reason, "generated": str(self.generated)}


def _split_root(rule: Rule) -> tuple[PointsTo, list[Atom]]:
    pt = root_points_to(rule)
    if pt is None:
        raise NonProgressingSid(f"rule is not progressing: {rule}")
    return pt, [a for a in rule.body if a is not pt]


def _sub_term(t, sigma):
    return t if t is NIL else sigma.get(t, t)


def right_candidate_count(rule: Rule, nu: int, mu: int) -> int:
    pt, rho = _split_root(rule)
    dom = [v for v in ordered_vars(rho) if v != rule.params[0]]
    return (nu + 1) ** len(dom) * 2 ** mu


def build_right_sid(norm: NormalizedProblem, budget: int = DEFAULT_BUDGET) -> tuple[list[Rule], list[Candidate]]:
    """Decorated consequent rules; only connected candidates are kept."""
    sid, w, mu = norm.sid, list(norm.w), norm.mu
    kept: list[Rule] = []
    log: list[Candidate] = []
    seen: set = set()
    for p in norm.right_preds:
        for k, rule in enumerate(sid.rules_for(p), 1):
            count = right_candidate_count(rule, len(w), mu)
            if count > budget:
                raise CombinatorialBudgetExceeded(f"{p}#{k}: {count} candidates exceed budget {budget}")
            pt, rho = _split_root(rule)
            x1 = rule.params[0]
            dom = [v for v in ordered_vars(rho) if v != x1]
            fr = FreshNames(rule.vars() | set(w))
            zs = [fr("z") for _ in range(mu)]
            head = rule.params + tuple(w)
            rho_hat = [PredCall(hat_name(a.pred), a.args + tuple(w)) if isinstance(a, PredCall) else a
                       for a in rho]
            for images in itertools.product([None] + w, repeat=len(dom)):
                sigma = {v: c for v, c in zip(dom, images) if c is not None}
                fields = tuple(_sub_term(t, sigma) for t in pt.fields) + tuple(w) + tuple(zs)
                for I in subsets(mu):
                    body = [PointsTo(x1, fields)]
                    body += [subst_atom(a, sigma) for a in rho_hat]
                    body += [PredCall(BOTTOM_PRED, (zs[i - 1],)) for i in I]
                    body += [Eq(v, sigma[v]) for v in dom if v in sigma]
                    new = Rule(hat_name(p), head, tuple(body))
                    if not is_connected(new):
                        ok, why = False, "not connected"
                    else:
                        key = canonical_key(new)
                        if key in seen:
                            ok, why = False, "duplicate"
                        else:
                            seen.add(key)
                            ok, why = True, "connected"
                            kept.append(new)
                    log.append(Candidate("right", f"{p}#{k}", sigma, I, None, new, ok, why))
    return kept, log


def left_candidate_count(rule: Rule, arities: Mapping[str, int], nu: int, mu: int) -> int:
    pt, rho = _split_root(rule)
    n = len(rule.params)
    calls = sum(arities[a.pred] for a in rho if isinstance(a, PredCall))
    return 2 ** n * 2 ** calls * (n + nu + mu + 2) ** mu


def well_defined_reason(rule: Rule, claimed: Sequence[int], n_params: int, nu: int) -> str | None:
    """None if the decorated rule is well defined, else the first failed condition."""
    body_alloc = alloc_set_decorated(rule)
    if 1 not in claimed:
        return "first parameter not claimed"
    for i in claimed:
        if rule.params[i - 1] not in body_alloc:
            return f"claimed parameter {rule.params[i - 1]} not allocated by the body"
    allowed = body_alloc | set(rule.params[:n_params + nu])
    for v in ordered_vars(rule.body):
        if v not in allowed:
            return f"existential {v} not allocated"
    return None


def build_left_sid(norm: NormalizedProblem, budget: int = DEFAULT_BUDGET) -> tuple[list[Rule], list[Candidate]]:
    """Decorated antecedent rules; only well-defined candidates are kept."""
    sid, w, mu = norm.sid, list(norm.w), norm.mu
    kept: list[Rule] = []
    log: list[Candidate] = []
    seen: set = set()
    for p in norm.left_preds:
        for k, rule in enumerate(sid.rules_for(p), 1):
            count = left_candidate_count(rule, sid.arities, len(w), mu)
            if count > budget:
                raise CombinatorialBudgetExceeded(f"{p}#{k}: {count} candidates exceed budget {budget}")
            pt, rho = _split_root(rule)
            n = len(rule.params)
            zs = list(rule.existentials)
            if len(zs) != mu:
                raise ValueError(f"{p}#{k} has {len(zs)} existentials, expected {mu}")
            x1 = rule.params[0]
            head = rule.params + tuple(w)
            images_pool = [None] + list(rule.params) + w + zs
            for X in subsets(n):
                name = deco_name(p, X, n)
                for images in itertools.product(images_pool, repeat=mu):
                    sigma = {z: c for z, c in zip(zs, images) if c is not None}
                    rho_s = [subst_atom(a, sigma) for a in rho]
                    fields = (tuple(_sub_term(t, sigma) for t in pt.fields) + tuple(w)
                              + tuple(sigma.get(z, z) for z in zs))
                    call_pos = [i for i, a in enumerate(rho_s) if isinstance(a, PredCall)]
                    free_z = [i + 1 for i, z in enumerate(zs) if z not in sigma]
                    options = [list(subsets(len(rho_s[i].args))) for i in call_pos]
                    for decos in itertools.product(*options):
                        rho_d = list(rho_s)
                        for i, Y in zip(call_pos, decos):
                            a = rho_d[i]
                            rho_d[i] = PredCall(deco_name(a.pred, Y, len(a.args)), a.args + tuple(w))
                        for J in subsets(len(free_z)):
                            I = tuple(free_z[j - 1] for j in J)
                            body = [PointsTo(x1, fields)] + rho_d
                            body += [PredCall(BOTTOM_PRED, (zs[i - 1],)) for i in I]
                            new = Rule(name, head, tuple(body))
                            why = well_defined_reason(new, X, n, len(w))
                            if why is None:
                                key = canonical_key(new)
                                if key in seen:
                                    ok, why = False, "duplicate"
                                else:
                                    seen.add(key)
                                    ok, why = True, "well-defined"
                                    kept.append(new)
                            else:
                                ok = False
                            log.append(Candidate("left", f"{p}#{k}", sigma, I, X, new, ok, why))
    return kept, log


# --------------------------------------------------------------- assembly

@dataclass
class ReducedProblem:
    normalized: NormalizedProblem
    sid: Sid
    left_rules: list[Rule]
    right_rules: list[Rule]
    consequent: Formula
    instances: list[EntailmentProblem]
    candidates: list[Candidate]
    manifest: dict = field(default_factory=dict)


def size_bounds(norm: NormalizedProblem, left_log: list[Candidate], right_log: list[Candidate],
                n_decorations: int) -> dict:
    """Measured generation counts next to the closed-form bounds they are compared with."""
    sid = norm.sid
    card = len(sid)
    n = max(sid.arities.values(), default=0)
    nu, mu = norm.nu, norm.mu
    from .syntax import measure

    width = measure(norm.problem).width
    distinct_left = len({canonical_key(c.generated) for c in left_log})
    distinct_right = len({canonical_key(c.generated) for c in right_log})
    calls = norm.problem.lhs.pred_calls()
    phi_arity = max((len(a.args) for a in calls), default=0)
    return {
        "card_R": card,
        "max_arity": n,
        "width": width,
        "decor_R": {"measured": distinct_left, "candidates": len(left_log),
                    "bound": card * 2 ** mu * (n + nu + mu) ** nu},
        "right_R": {"measured": distinct_right, "candidates": len(right_log),
                    "bound": card * 2 ** mu * width ** nu},
        "decor_phi": {"measured": n_decorations, "bound": 2 ** (phi_arity * len(calls))},
    }


def per_rule_counts(log: list[Candidate]) -> dict:
    out: dict[str, dict[str, dict[str, int]]] = {"right": {}, "left": {}}
    for c in log:
        slot = out[c.side].setdefault(c.rule, {"generated": 0, "kept": 0})
        slot["generated"] += 1
        slot["kept"] += c.kept
    return out


def reduce_safe_to_pce(problem: EntailmentProblem, budget: int = DEFAULT_BUDGET,
                       require_safe: bool = True) -> ReducedProblem:
    norm = normalize(problem, require_safe=require_safe)
    w, mu = norm.w, norm.mu
    width = norm.kappa + norm.nu + mu
    psi_hat = decorate_consequent(norm.problem.rhs, w)
    right, right_log = build_right_sid(norm, budget)
    left, left_log = build_left_sid(norm, budget)
    decorations = enumerate_decorations(norm.problem.lhs, w)

    arities: dict[str, int] = {}
    for r in left + right:
        arities.setdefault(r.pred, len(r.params))
    for f in decorations + [psi_hat]:
        for a in f.pred_calls():
            arities.setdefault(a.pred, len(a.args))
    for r in left + right:
        for a in r.pred_calls():
            arities.setdefault(a.pred, len(a.args))
    arities.setdefault(BOTTOM_PRED, 1)
    rhat = Sid.build(width, left + right + [bottom_rule(width)], arities)
    instances = [EntailmentProblem(f, psi_hat, rhat, w, mu) for f in decorations]
    log = right_log + left_log
    manifest = {
        "kappa": norm.kappa,
        "nu": norm.nu,
        "mu": mu,
        "w": list(w),
        "left_preds": list(norm.left_preds),
        "right_preds": list(norm.right_preds),
        "counts": {
            "right_candidates": len(right_log),
            "right_kept": len(right),
            "left_candidates": len(left_log),
            "left_kept": len(left),
            "instances": len(instances),
            "per_rule": per_rule_counts(log),
        },
        "bounds": size_bounds(norm, left_log, right_log, len(decorations)),
        "candidates": [c.to_json() for c in log],
    }
    return ReducedProblem(norm, rhat, left, right, psi_hat, instances, log, manifest)


def write_reduction(reduced: ReducedProblem, out_dir: str) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    written = []
    path = os.path.join(out_dir, "rhat.sid")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_sid(reduced.sid))
    written.append(path)
    for k, inst in enumerate(reduced.instances):
        path = os.path.join(out_dir, f"instance_{k}.entail")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(format_problem(inst))
        written.append(path)
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(reduced.manifest, fh, indent=1)
        fh.write("\n")
    written.append(path)
    return written
