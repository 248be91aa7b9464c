"""Location mappings, heap truncation and the expansion relation between wide and narrow heaps.

A wide heap has records of width ``kappa + nu + mu``: the original
``kappa`` fields, then the values of the free variables, then ``mu``
extra pointers. Cells whose record is all ``BOT`` are auxiliary.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

from .errors import NonInjectiveOnDomain, WidthMismatch
from .semantics import BOT, Heap, Store


@dataclass(frozen=True)
class LocMapping:
    """Total map on locations: the identity except on ``table``. ``BOT`` is always fixed."""

    table: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        t = dict(self.table)
        if t.get(BOT, BOT) != BOT:
            raise ValueError("a location mapping must fix BOT")
        object.__setattr__(self, "table", t)

    def __call__(self, loc: int) -> int:
        return self.table.get(loc, loc)

    def injective_on(self, locs) -> bool:
        locs = list(locs)
        return len({self(l) for l in locs}) == len(locs)


IDENTITY = LocMapping()


def apply_mapping(gamma: LocMapping, x):
    if isinstance(x, Store):
        return Store({k: gamma(v) for k, v in x.items()})
    if isinstance(x, Heap):
        if not gamma.injective_on(x.cells):
            raise NonInjectiveOnDomain("mapping merges two allocated locations")
        return Heap(x.width, {gamma(k): tuple(gamma(v) for v in vs) for k, vs in x.cells.items()})
    raise TypeError(f"cannot map {type(x).__name__}")


def is_null_record(rec: Sequence[int]) -> bool:
    return all(v == BOT for v in rec)


def truncate(wide: Heap, kappa: int) -> Heap:
    if wide.width < kappa:
        raise WidthMismatch(f"cannot truncate width {wide.width} to {kappa}")
    return Heap(kappa, {k: v[:kappa] for k, v in wide.cells.items() if not is_null_record(v)})


def split_main_aux(wide: Heap) -> tuple[Heap, Heap]:
    main = {k: v for k, v in wide.cells.items() if not is_null_record(v)}
    aux = {k: v for k, v in wide.cells.items() if is_null_record(v)}
    return Heap(wide.width, main), Heap(wide.width, aux)


@dataclass(frozen=True)
class ExpansionContext:
    kappa: int
    nu: int
    mu: int
    w: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "w", tuple(self.w))
        if len(self.w) != self.nu:
            raise ValueError("w must list exactly nu variables")

    @property
    def width(self) -> int:
        return self.kappa + self.nu + self.mu


@dataclass(frozen=True)
class ExpansionWitness:
    main: Heap
    aux: Heap
    connections: Mapping[int, int]


def check_expansion(store: Store, wide: Heap, narrow: Heap, gamma: LocMapping,
                    ctx: ExpansionContext) -> tuple[bool, ExpansionWitness | None]:
    """Decide whether ``wide`` expands ``narrow`` through ``gamma``.

    Main cells must carry ``(a, s(w), b)`` with ``gamma(a)`` equal to the
    narrow record at ``gamma(l)``; every all-``BOT`` cell must be one of the
    ``b`` pointers of some main cell (the smallest such cell is recorded).
    The ``b`` pointers themselves must be non-null: a variable can never
    denote ``BOT``, so a null extra pointer could not be described by any
    decorated rule.
    """
    if wide.width != ctx.width:
        raise WidthMismatch(f"wide heap has width {wide.width}, expected {ctx.width}")
    if narrow.width != ctx.kappa:
        raise WidthMismatch(f"narrow heap has width {narrow.width}, expected {ctx.kappa}")
    main, aux = split_main_aux(wide)
    if not gamma.injective_on(main.cells):
        return False, None
    if {gamma(l) for l in main.cells} != set(narrow.cells):
        return False, None
    ws = tuple(store[v] for v in ctx.w)
    k, n = ctx.kappa, ctx.nu
    for l, rec in main.cells.items():
        a, mid, b = rec[:k], rec[k:k + n], rec[k + n:]
        if mid != ws:
            return False, None
        if tuple(gamma(x) for x in a) != narrow.cells[gamma(l)]:
            return False, None
        if any(x == BOT for x in b):
            return False, None
    connections: dict[int, int] = {}
    for l in sorted(aux.cells):
        owner = next((m for m in sorted(main.cells) if l in main.cells[m][k + n:]), None)
        if owner is None:
            return False, None
        connections[l] = owner
    return True, ExpansionWitness(main, aux, connections)


def is_expansion(store: Store, wide: Heap, narrow: Heap, gamma: LocMapping, ctx: ExpansionContext) -> bool:
    return check_expansion(store, wide, narrow, gamma, ctx)[0]


def enumerate_id_expansions(store: Store, narrow: Heap, ctx: ExpansionContext) -> Iterator[Heap]:
    """Every identity expansion of ``(store, narrow)``, up to renaming of locations not yet in use.

    Extra pointers range over the locations already present plus fresh
    ones introduced in order; any subset of the pointed-to, unallocated,
    non-null locations may then be allocated as auxiliary cells.
    """
    if narrow.width != ctx.kappa:
        raise WidthMismatch("narrow heap width differs from kappa")
    ws = tuple(store[v] for v in ctx.w)
    known = sorted((narrow.locs() | store.image()) - {BOT})
    dom = sorted(narrow.cells)
    slots = len(dom) * ctx.mu
    null = (BOT,) * ctx.width

    def pointers(k: int, top: int, acc: list[int]):
        if k == slots:
            yield list(acc)
            return
        for v in known + list(range(max(known, default=0) + 1, top + 2)):
            acc.append(v)
            yield from pointers(k + 1, max(top, v), acc)
            acc.pop()

    base_top = max(known, default=0)
    for ptrs in pointers(0, base_top, []):
        cells = {}
        for i, l in enumerate(dom):
            cells[l] = narrow.cells[l] + ws + tuple(ptrs[i * ctx.mu:(i + 1) * ctx.mu])
        spare = sorted(set(ptrs) - set(dom))
        for r in range(len(spare) + 1):
            for chosen in itertools.combinations(spare, r):
                full = dict(cells)
                full.update({l: null for l in chosen})
                yield Heap(ctx.width, full)
