"""Exception hierarchy. Each error carries the CLI exit status it maps to."""

from __future__ import annotations


class SLError(Exception):
    exit_code = 4


class ParseError(SLError):
    exit_code = 2

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line is not None else ""
        super().__init__(where + message)


class ArityMismatch(ParseError):
    pass


class NilInEqualityOrPredicate(ParseError):
    pass


class RebindingError(ParseError):
    pass


class UndefinedPredicate(ParseError):
    pass


class WidthMismatch(ParseError):
    pass


class NotAPredicateAtom(SLError):
    pass


class RuleHeadMismatch(SLError):
    pass


class NonProgressingSid(SLError):
    exit_code = 3


class NonInjectiveOnDomain(SLError):
    pass


class NotSafe(SLError):
    exit_code = 3

    def __init__(self, report):
        self.report = report
        reasons = "; ".join(f"{v.pred or '-'}#{v.rule or '-'} {v.condition}: {v.witness}"
                            for v in report.violations)
        super().__init__("problem is not safe: " + (reasons or "unknown reason"))


class CombinatorialBudgetExceeded(SLError):
    exit_code = 4


class NotGreibach(ParseError):
    pass


class EpsilonInLanguage(ParseError):
    pass
