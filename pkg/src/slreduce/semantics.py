"""Finite structures, the satisfaction relation and bounded counterexample search.

Locations are non-negative integers and ``BOT`` (0) is the null location.
Two search strategies are offered: exhaustive enumeration of every
structure over a fixed location domain, and generation of the models of a
formula from its predicate-less unfoldings. Both are exact up to their
bound; the second is far faster because it never builds non-models.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence, Union

from .errors import NonProgressingSid, WidthMismatch
from .syntax import (
    NIL,
    Diseq,
    EntailmentProblem,
    Eq,
    FreshNames,
    PointsTo,
    PredCall,
    Sid,
    SymbolicHeap,
    as_formula,
    ordered_vars,
    reachable_preds,
    root_points_to,
    unfold_step,
)

BOT = 0


class Store(Mapping[str, int]):
    """Variable assignment; ``nil`` is implicitly mapped to ``BOT`` and nothing else is."""

    __slots__ = ("_values",)

    def __init__(self, values: Mapping[str, int] | Iterable[tuple[str, int]] = ()):
        vals = dict(values)
        vals.pop(NIL, None)  # type: ignore[call-overload]
        for k, v in vals.items():
            if not isinstance(k, str):
                raise TypeError(f"store keys are variables, got {k!r}")
            if not isinstance(v, int) or v <= BOT:
                raise ValueError(f"variable {k} must denote a non-null location, got {v!r}")
        self._values = vals

    def __getitem__(self, key) -> int:
        if key is NIL:
            return BOT
        return self._values[key]

    def __contains__(self, key) -> bool:
        return key is NIL or key in self._values

    def __iter__(self):
        return iter(self._values)

    def __len__(self) -> int:
        return len(self._values)

    def __eq__(self, other) -> bool:
        return isinstance(other, Store) and self._values == other._values

    def __hash__(self) -> int:
        return hash(frozenset(self._values.items()))

    def __repr__(self) -> str:
        return f"Store({self._values!r})"

    def as_dict(self) -> dict[str, int]:
        return dict(self._values)

    def image(self) -> set[int]:
        return set(self._values.values())


class Heap:
    """Finite map from non-null locations to tuples of a fixed width."""

    __slots__ = ("width", "cells", "_key")

    def __init__(self, width: int, cells: Mapping[int, Sequence[int]] | Iterable = ()):
        cs = {int(k): tuple(v) for k, v in dict(cells).items()}
        for k, v in cs.items():
            if k == BOT:
                raise ValueError("the null location cannot be allocated")
            if len(v) != width:
                raise ValueError(f"cell {k} has {len(v)} fields, expected {width}")
        self.width = width
        self.cells = cs
        self._key = (width, frozenset(cs.items()))

    def dom(self) -> frozenset[int]:
        return frozenset(self.cells)

    def locs(self) -> set[int]:
        out = set(self.cells)
        for v in self.cells.values():
            out.update(v)
        return out

    def restrict(self, dom: Iterable[int]) -> "Heap":
        return Heap(self.width, {k: self.cells[k] for k in dom})

    def __len__(self) -> int:
        return len(self.cells)

    def __eq__(self, other) -> bool:
        return isinstance(other, Heap) and self._key == other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def __repr__(self) -> str:
        return f"Heap({self.width}, {dict(sorted(self.cells.items()))!r})"


@dataclass(frozen=True)
class Structure:
    store: Store
    heap: Heap

    def format(self) -> str:
        st = " ".join(f"{k}->{v}" for k, v in self.store.items())
        store_line = f"store: {st} nil->0".replace("store:  ", "store: ")
        if self.heap.cells:
            cells = "; ".join(f"{k} -> ({', '.join(map(str, v))})"
                              for k, v in sorted(self.heap.cells.items()))
        else:
            cells = "emp"
        return f"{store_line}\nheap: {cells}"

    def to_json(self) -> dict:
        return {
            "store": {**self.store.as_dict(), "nil": BOT},
            "heap": {str(k): list(v) for k, v in sorted(self.heap.cells.items())},
        }

    @staticmethod
    def from_json(data: Mapping, width: int | None = None) -> "Structure":
        store = Store({k: v for k, v in data["store"].items() if k != "nil"})
        cells = {int(k): tuple(v) for k, v in data["heap"].items()}
        w = width if width is not None else (len(next(iter(cells.values()))) if cells else 0)
        return Structure(store, Heap(w, cells))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=False)


# ---------------------------------------------------------------- checking

def require_progressing(sid: Sid, preds: Iterable[str]) -> None:
    for p in reachable_preds(sid, preds):
        for k, r in enumerate(sid.rules_for(p), 1):
            if root_points_to(r) is None:
                raise NonProgressingSid(f"rule {k} of {p} is not progressing: {r}")


class ModelChecker:
    """Decides ``(s, h) |= phi`` for one fixed heap and any number of stores.

    Sub-results for predicate atoms depend only on the predicate, the
    argument locations and the sub-heap, so they are shared across stores.
    Existential witnesses range over the locations already in play plus
    fresh ones introduced one at a time; up to renaming of unseen
    locations this covers every assignment, so the check is exact.
    ``extra_fresh`` adds further fresh candidates, which must never change
    a verdict.
    """

    def __init__(self, sid: Sid, heap: Heap, extra_fresh: int = 0):
        if heap.width != sid.width:
            raise WidthMismatch(f"heap width {heap.width} differs from record width {sid.width}")
        self.sid = sid
        self.cells = heap.cells
        self.dom = heap.dom()
        self.heap_locs = heap.locs() - {BOT}
        self.extra_fresh = extra_fresh
        self._memo: dict = {}
        self._checked: set[str] = set()

    def holds(self, phi, store: Store) -> bool:
        f = as_formula(phi)
        todo = {a.pred for a in f.pred_calls()} - self._checked
        if todo:
            require_progressing(self.sid, todo)
            self._checked.update(reachable_preds(self.sid, todo))
        base = store.as_dict()
        for d in f.disjuncts:
            missing = [v for v in d.free_vars if v not in base]
            if missing:
                raise ValueError(f"free variables {missing} are not in the store")
            for a in d.atoms:
                if isinstance(a, PointsTo) and len(a.fields) != self.sid.width:
                    raise WidthMismatch(f"{a} does not have {self.sid.width} fields")
            env = {k: v for k, v in base.items() if k not in d.bound}
            if self._solve(d.atoms, env, self.dom):
                return True
        return False

    # -- internals

    def _candidates(self, env: Mapping[str, int]) -> list[int]:
        known = self.heap_locs | set(env.values())
        known.discard(BOT)
        top = max(known, default=BOT)
        return sorted(known) + list(range(top + 1, top + 2 + self.extra_fresh))

    def _solve(self, atoms: tuple, env: dict, dom: frozenset) -> bool:
        # propagate pure atoms as far as the current bindings allow
        changed = True
        copied = False
        while changed:
            changed = False
            rest = []
            for a in atoms:
                t = type(a)
                if t is Eq:
                    l, r = a.left in env, a.right in env
                    if l and r:
                        if env[a.left] != env[a.right]:
                            return False
                        continue
                    if l or r:
                        if not copied:
                            env, copied = dict(env), True
                        if l:
                            env[a.right] = env[a.left]
                        else:
                            env[a.left] = env[a.right]
                        changed = True
                        continue
                elif t is Diseq:
                    if a.left in env and a.right in env:
                        if env[a.left] == env[a.right]:
                            return False
                        continue
                rest.append(a)
            atoms = tuple(rest)

        spatial = [a for a in atoms if type(a) is not Eq and type(a) is not Diseq]
        if not spatial:
            if dom:
                return False
        elif not dom:
            return False

        for i, a in enumerate(atoms):
            if type(a) is PointsTo and a.src in env:
                loc = env[a.src]
                if loc not in dom:
                    return False
                cell = self.cells[loc]
                env2 = env
                for t, val in zip(a.fields, cell):
                    if t is NIL:
                        if val != BOT:
                            return False
                    elif t in env2:
                        if env2[t] != val:
                            return False
                    else:
                        if val == BOT:
                            return False
                        if env2 is env:
                            env2 = dict(env)
                        env2[t] = val
                return self._solve(atoms[:i] + atoms[i + 1:], env2, dom - {loc})

        var, cands = None, None
        for a in atoms:
            if type(a) is PointsTo:
                var, cands = a.src, sorted(dom)
                break
        if var is None:
            for a in atoms:
                if type(a) is PredCall and a.args[0] not in env:
                    var, cands = a.args[0], sorted(dom)
                    break
        if var is None:
            for a in atoms:
                for v in a.vars():
                    if v not in env:
                        var = v
                        break
                if var is not None:
                    break
            if var is not None:
                cands = self._candidates(env)
        if var is not None:
            for c in cands:
                env2 = dict(env)
                env2[var] = c
                if self._solve(atoms, env2, dom):
                    return True
            return False

        calls = [a for a in atoms if type(a) is PredCall]
        return self._split(calls, env, dom)

    def _split(self, calls: list, env: dict, dom: frozenset) -> bool:
        if not calls:
            return not dom
        roots = [env[c.args[0]] for c in calls]
        if len(set(roots)) != len(roots) or any(r not in dom for r in roots):
            return False
        first = calls[0]
        args = tuple(env[x] for x in first.args)
        if len(calls) == 1:
            return self._pred(first.pred, args, dom)
        free = sorted(dom - set(roots))
        for mask in range(1 << len(free)):
            part = frozenset([roots[0]] + [free[j] for j in range(len(free)) if mask >> j & 1])
            if self._pred(first.pred, args, part) and self._split(calls[1:], env, dom - part):
                return True
        return False

    def _pred(self, pred: str, args: tuple, part: frozenset) -> bool:
        key = (pred, args, part)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        self._memo[key] = False
        res = False
        for rule in self.sid.rules_for(pred):
            if self._solve(rule.body, dict(zip(rule.params, args)), part):
                res = True
                break
        self._memo[key] = res
        return res


def check_models(st: Structure, phi, sid: Sid) -> bool:
    return ModelChecker(sid, st.heap).holds(phi, st.store)


# ------------------------------------------------------------- enumeration

def location_domain_size(n_vars: int, max_heap: int, width: int) -> int:
    """Largest location index of the enumeration domain (``BOT`` excluded from the count)."""
    return n_vars + max_heap * (1 + width)


def enumerate_structures(vars: Sequence[str], max_heap: int, width: int) -> Iterator[Structure]:
    """Every structure over locations ``0..N`` with at most ``max_heap`` cells, N as above."""
    top = location_domain_size(len(vars), max_heap, width)
    locs = range(1, top + 1)
    values = range(0, top + 1)
    heaps: list[Heap] = []
    for k in range(max_heap + 1):
        for dom in itertools.combinations(locs, k):
            for tuples in itertools.product(itertools.product(values, repeat=width), repeat=k):
                heaps.append(Heap(width, dict(zip(dom, tuples))))
    for image in itertools.product(locs, repeat=len(vars)):
        store = Store(dict(zip(vars, image)))
        for h in heaps:
            yield Structure(store, h)


def predicate_less_unfoldings(atom, sid: Sid, max_depth: int) -> Iterator[SymbolicHeap]:
    """Predicate-less symbolic heaps reachable in at most ``max_depth`` unfolding steps.

    ``atom`` may be a single predicate atom or a whole symbolic heap; the
    leftmost predicate atom is always unfolded first.
    """
    start = atom if isinstance(atom, SymbolicHeap) else SymbolicHeap((), (atom,))

    def go(sh: SymbolicHeap, depth: int, fresh: FreshNames):
        idx = next((i for i, a in enumerate(sh.atoms) if isinstance(a, PredCall)), None)
        if idx is None:
            yield sh
            return
        if depth == max_depth:
            return
        for rule in sid.rules_for(sh.atoms[idx].pred):
            f = fresh.copy()
            yield from go(unfold_step(sh, idx, rule, f), depth + 1, f)

    yield from go(start, 0, FreshNames(start.vars()))


def _may_be_satisfiable(atoms, must: Mapping[str, frozenset[int]]) -> bool:
    """False when equalities force a violated disequality or a double allocation.

    Pending predicate atoms count as allocating their must-allocated
    arguments, which every predicate-less unfolding does.
    """
    parent: dict[str, str] = {}

    def find(v: str) -> str:
        parent.setdefault(v, v)
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for a in atoms:
        if isinstance(a, Eq):
            parent[find(a.left)] = find(a.right)
    taken: set[str] = set()
    for a in atoms:
        if isinstance(a, Diseq):
            if find(a.left) == find(a.right):
                return False
            continue
        if isinstance(a, PointsTo):
            srcs = [a.src]
        elif isinstance(a, PredCall):
            srcs = [a.args[i - 1] for i in must.get(a.pred, ()) | {1}]
        else:
            continue
        for v in srcs:
            r = find(v)
            if r in taken:
                return False
            taken.add(r)
    return True


def _cell_bounded_unfoldings(sh: SymbolicHeap, sid: Sid, cells: int, exact: bool,
                             must: Mapping[str, frozenset[int]] | None = None) -> Iterator[SymbolicHeap]:
    # progressing rules add one cell per unfolding step, so the number of
    # points-to atoms plus pending predicate atoms bounds the final heap size
    def go(cur: SymbolicHeap, fresh: FreshNames):
        if must is not None and not _may_be_satisfiable(cur.atoms, must):
            return
        n_pts = n_preds = 0
        idx = None
        for i, a in enumerate(cur.atoms):
            if isinstance(a, PointsTo):
                n_pts += 1
            elif isinstance(a, PredCall):
                n_preds += 1
                if idx is None:
                    idx = i
        if n_pts + n_preds > cells:
            return
        if idx is None:
            if not exact or n_pts == cells:
                yield cur
            return
        for rule in sid.rules_for(cur.atoms[idx].pred):
            f = fresh.copy()
            yield from go(unfold_step(cur, idx, rule, f), f)

    yield from go(sh, FreshNames(sh.vars()))


def _models_of_unfolding(sh: SymbolicHeap, vars: Sequence[str], width: int) -> Iterator[Structure]:
    """All structures (up to renaming of locations) of a predicate-less symbolic heap."""
    order = list(dict.fromkeys(list(vars) + list(ordered_vars(sh.atoms))))
    parent = {v: v for v in order}

    def find(v: str) -> str:
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for a in sh.atoms:
        if isinstance(a, Eq):
            ra, rb = find(a.left), find(a.right)
            if ra != rb:
                parent[rb] = ra
    cls_index: dict[str, int] = {}
    n = 0
    for v in order:
        r = find(v)
        if r not in cls_index:
            cls_index[r] = n
            n += 1
    cls = {v: cls_index[find(v)] for v in order}
    neq: list[set[int]] = [set() for _ in range(n)]

    def apart(i: int, j: int) -> bool:
        if i == j:
            return False
        neq[max(i, j)].add(min(i, j))
        return True

    for a in sh.atoms:
        if isinstance(a, Diseq) and not apart(cls[a.left], cls[a.right]):
            return
    pts = [a for a in sh.atoms if isinstance(a, PointsTo)]
    srcs = [cls[a.src] for a in pts]
    for i in range(len(srcs)):
        for j in range(i):
            if not apart(srcs[i], srcs[j]):
                return
    for a in pts:
        if len(a.fields) != width:
            raise WidthMismatch(f"{a} does not have {width} fields")

    values = [0] * n

    def assign(k: int, top: int):
        if k == n:
            yield values
            return
        for val in range(1, top + 2):
            if any(values[j] == val for j in neq[k]):
                continue
            values[k] = val
            yield from assign(k + 1, max(top, val))

    for vals in assign(0, 0):
        store = Store({v: vals[cls[v]] for v in vars})
        cells = {}
        for a in pts:
            cells[vals[cls[a.src]]] = tuple(BOT if t is NIL else vals[cls[t]] for t in a.fields)
        yield Structure(store, Heap(width, cells))


def generate_models(phi, sid: Sid, vars: Sequence[str], max_cells: int,
                    exact_cells: bool = False) -> Iterator[Structure]:
    """Models of ``phi`` with at most (or exactly) ``max_cells`` cells, one per isomorphism class or more.

    Every model within the bound is isomorphic to some generated
    structure (locations other than ``BOT`` may be renamed).
    """
    f = as_formula(phi)
    require_progressing(sid, {a.pred for a in f.pred_calls()})
    missing = set(f.free_vars) - set(vars)
    if missing:
        raise ValueError(f"free variables {sorted(missing)} are not among the store variables")
    from .analysis import must_alloc_params

    must = must_alloc_params(sid)
    seen: set = set()
    for d in f.disjuncts:
        for unf in _cell_bounded_unfoldings(d, sid, max_cells, exact_cells, must):
            for st in _models_of_unfolding(unf, vars, sid.width):
                key = (st.store, st.heap)
                if key not in seen:
                    seen.add(key)
                    yield st


# ------------------------------------------------------- counterexamples

@dataclass(frozen=True)
class NoCounterexampleUpTo:
    bound: int


@dataclass(frozen=True)
class Counterexample:
    structure: Structure


@dataclass(frozen=True)
class ResourceExceeded:
    steps: int


Verdict = Union[NoCounterexampleUpTo, Counterexample, ResourceExceeded]


class _RhsCache:
    def __init__(self, sid: Sid):
        self.sid = sid
        self.checkers: dict[Heap, ModelChecker] = {}

    def holds(self, phi, st: Structure) -> bool:
        mc = self.checkers.get(st.heap)
        if mc is None:
            if len(self.checkers) > 50000:
                self.checkers.clear()
            mc = self.checkers[st.heap] = ModelChecker(self.sid, st.heap)
        return mc.holds(phi, st.store)


def find_counterexample_bounded(problem: EntailmentProblem, max_heap: int,
                                max_steps: int | None = None,
                                strategy: str = "models") -> Verdict:
    """Search for a structure with at most ``max_heap`` cells satisfying the lhs but not the rhs.

    ``strategy="models"`` generates antecedent models by unfolding, smallest
    heaps first; ``strategy="enumerate"`` scans every structure of the
    enumeration domain and is only practical for tiny bounds.
    """
    vars = list(dict.fromkeys(list(problem.free_vars) + list(problem.lhs.free_vars)
                              + list(problem.rhs.free_vars)))
    sid = problem.sid
    require_progressing(sid, {a.pred for a in problem.rhs.pred_calls()})
    rhs = _RhsCache(sid)
    steps = 0
    if strategy == "enumerate":
        lhs = _RhsCache(sid)
        candidates: Iterable[Structure] = enumerate_structures(vars, max_heap, sid.width)
    elif strategy == "models":
        lhs = None
        candidates = itertools.chain.from_iterable(
            generate_models(problem.lhs, sid, vars, k, exact_cells=True) for k in range(max_heap + 1))
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    for st in candidates:
        steps += 1
        if max_steps is not None and steps > max_steps:
            return ResourceExceeded(steps - 1)
        if lhs is not None and not lhs.holds(problem.lhs, st):
            continue
        if not rhs.holds(problem.rhs, st):
            if not check_models(st, problem.lhs, sid):
                raise AssertionError("generated structure does not satisfy the antecedent")
            return Counterexample(st)
    return NoCounterexampleUpTo(max_heap)
