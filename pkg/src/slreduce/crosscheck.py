"""End-to-end comparison of the bounded oracle on a problem and on its reduction."""

from __future__ import annotations

from dataclasses import dataclass, field

from .expansion import truncate
from .reduction import DEFAULT_BUDGET, ReducedProblem, reduce_safe_to_pce
from .semantics import (
    Counterexample,
    NoCounterexampleUpTo,
    ResourceExceeded,
    Structure,
    Verdict,
    check_models,
    find_counterexample_bounded,
)
from .syntax import EntailmentProblem

EXIT_DISAGREE = 5


def reduced_bound(max_heap: int, mu: int) -> int:
    """Each source cell gains at most ``mu`` auxiliary cells."""
    return max_heap * (1 + mu) + mu


@dataclass
class InstanceResult:
    index: int
    verdict: Verdict
    truncated: Structure | None = None
    transfer_ok: bool | None = None

    def to_json(self) -> dict:
        out: dict = {"index": self.index, "verdict": type(self.verdict).__name__}
        if isinstance(self.verdict, Counterexample):
            out["counterexample"] = self.verdict.structure.to_json()
            out["truncated"] = self.truncated.to_json()
            out["transfer_ok"] = self.transfer_ok
        return out


@dataclass
class XCheckReport:
    max_heap: int
    bound: int
    source: Verdict
    instances: list[InstanceResult] = field(default_factory=list)
    reduced: ReducedProblem | None = None

    @property
    def source_invalid(self) -> bool:
        return isinstance(self.source, Counterexample)

    @property
    def reduced_invalid(self) -> bool:
        return any(isinstance(r.verdict, Counterexample) for r in self.instances)

    @property
    def transfer_ok(self) -> bool:
        return all(r.transfer_ok for r in self.instances if r.transfer_ok is not None)

    @property
    def resource_exceeded(self) -> bool:
        return isinstance(self.source, ResourceExceeded) or any(
            isinstance(r.verdict, ResourceExceeded) for r in self.instances)

    @property
    def agree(self) -> bool:
        """Verdicts agree, allowing a reduced counterexample whose truncation exceeds the source bound."""
        if self.source_invalid == self.reduced_invalid:
            return True
        if self.reduced_invalid and not self.source_invalid:
            return all(len(r.truncated.heap) > self.max_heap
                       for r in self.instances if r.truncated is not None)
        return False

    def exit_code(self) -> int:
        if not self.transfer_ok or not self.agree:
            return EXIT_DISAGREE
        if self.resource_exceeded:
            return 4
        return 1 if self.source_invalid or self.reduced_invalid else 0

    def to_json(self) -> dict:
        out = {
            "max_heap": self.max_heap,
            "reduced_bound": self.bound,
            "source": type(self.source).__name__,
            "instances": [r.to_json() for r in self.instances],
            "agree": self.agree,
            "transfer_ok": self.transfer_ok,
        }
        if isinstance(self.source, Counterexample):
            out["source_counterexample"] = self.source.structure.to_json()
        return out


def transfer(problem: EntailmentProblem, st: Structure, kappa: int) -> tuple[Structure, bool]:
    """Truncate a reduced-side counterexample and check it refutes the source problem."""
    narrow = Structure(st.store, truncate(st.heap, kappa))
    ok = check_models(narrow, problem.lhs, problem.sid) and not check_models(narrow, problem.rhs, problem.sid)
    return narrow, ok


def xcheck(problem: EntailmentProblem, max_heap: int, budget: int = DEFAULT_BUDGET,
           max_steps: int | None = None, bound: int | None = None,
           stop_at_first: bool = False) -> XCheckReport:
    reduced = reduce_safe_to_pce(problem, budget)
    mu = reduced.normalized.mu
    bound = reduced_bound(max_heap, mu) if bound is None else bound
    report = XCheckReport(max_heap, bound, find_counterexample_bounded(problem, max_heap, max_steps),
                          reduced=reduced)
    for k, inst in enumerate(reduced.instances):
        v = find_counterexample_bounded(inst, bound, max_steps)
        res = InstanceResult(k, v)
        if isinstance(v, Counterexample):
            res.truncated, res.transfer_ok = transfer(problem, v.structure, problem.kappa)
        report.instances.append(res)
        if stop_at_first and isinstance(v, Counterexample):
            break
    return report


__all__ = ["EXIT_DISAGREE", "InstanceResult", "NoCounterexampleUpTo", "XCheckReport",
           "reduced_bound", "transfer", "xcheck"]
