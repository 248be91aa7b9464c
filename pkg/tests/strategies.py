"""Hypothesis strategies for small formulas, structures and corpus problems."""

from __future__ import annotations

import random

from hypothesis import strategies as st

from corpus import admissible, random_problem
from slreduce.semantics import Heap, Store, Structure
from slreduce.syntax import NIL, Diseq, Eq, Formula, PointsTo, PredCall, SymbolicHeap

VARS = ["a", "b", "c", "d"]


def variables(pool=VARS):
    return st.sampled_from(pool)


def atoms(kappa: int = 1, preds: dict[str, int] | None = None, pool=VARS):
    v = variables(pool)
    term = st.one_of(v, st.just(NIL))
    options = [
        st.builds(Eq, v, v),
        st.builds(Diseq, v, v),
        st.builds(PointsTo, v, st.tuples(*[term] * kappa)),
    ]
    for p, n in (preds or {}).items():
        options.append(st.builds(PredCall, st.just(p), st.tuples(*[v] * n)))
    return st.one_of(options)


@st.composite
def sheaps(draw, kappa: int = 1, preds=None, max_atoms: int = 3, allow_bound: bool = True):
    body = draw(st.lists(atoms(kappa, preds), min_size=1, max_size=max_atoms))
    present = sorted({x for a in body for x in a.vars()})
    bound = draw(st.lists(st.sampled_from(present), unique=True, max_size=2)) if allow_bound else []
    return SymbolicHeap(tuple(bound), tuple(body))


@st.composite
def formulas(draw, kappa: int = 1, preds=None, max_disjuncts: int = 2, allow_bound: bool = True):
    ds = draw(st.lists(sheaps(kappa, preds, allow_bound=allow_bound), min_size=1, max_size=max_disjuncts))
    return Formula(tuple(ds))


@st.composite
def structures(draw, vars=("a", "b", "c"), width: int = 1, max_cells: int = 3, max_loc: int = 4):
    locs = st.integers(1, max_loc)
    store = Store({v: draw(locs) for v in vars})
    dom = draw(st.lists(locs, unique=True, max_size=max_cells))
    cells = {l: tuple(draw(st.integers(0, max_loc)) for _ in range(width)) for l in dom}
    return Structure(store, Heap(width, cells))


@st.composite
def safe_problems(draw):
    rng = random.Random(draw(st.integers(0, 2 ** 32 - 1)))
    for _ in range(200):
        p = random_problem(rng)
        if admissible(p):
            return p
    st.assume(False)
