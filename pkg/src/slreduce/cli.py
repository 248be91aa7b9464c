"""Command-line front end.

Exit status: 0 success or no counterexample within the bound, 1 counterexample
found, 2 parse error, 3 classification gate failure, 4 resource bound
exceeded, 5 cross-check disagreement.
"""

from __future__ import annotations

import argparse
import json
import sys

from .analysis import classify_problem
from .cfg import decode_word, gen_cfg_instance, parse_grammar
from .crosscheck import xcheck
from .errors import SLError
from .parser import parse_problem
from .reduction import DEFAULT_BUDGET, reduce_safe_to_pce, write_reduction
from .semantics import Counterexample, NoCounterexampleUpTo, find_counterexample_bounded
from .syntax import format_problem


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as e:
        raise _InputError(f"cannot read {path}: {e.strerror}") from e


class _InputError(SLError):
    exit_code = 2


def _positive(text: str) -> int:
    n = int(text)
    if n < 0:
        raise argparse.ArgumentTypeError("must be a non-negative integer")
    return n


def _emit(args, data: dict, text: str) -> None:
    print(json.dumps(data, indent=1) if getattr(args, "json", False) else text)


def cmd_classify(args) -> int:
    report = classify_problem(parse_problem(_read(args.file)), exact_establishment=args.exact_establishment)
    lines = []
    for side, flags in (("left", report.left), ("right", report.right)):
        lines.append(f"{side}: " + " ".join(f"{k}={str(v).lower()}" for k, v in flags.items()))
    lines.append(f"all_progressing={str(report.all_progressing).lower()} "
                 f"rhs_restricted={str(report.rhs_restricted).lower()} safe={str(report.safe).lower()}")
    prof = ", ".join(f"{p}:{{{','.join(map(str, sorted(v)))}}}" for p, v in report.profile_right.items())
    lines.append(f"fv_profile(right): {prof}")
    for v in report.violations:
        lines.append(f"  {v.side} {v.pred or '-'}#{v.rule or '-'} {v.condition}: {v.witness}")
    _emit(args, report.to_json(), "\n".join(lines))
    return 0


def cmd_reduce(args) -> int:
    problem = parse_problem(_read(args.file))
    reduced = reduce_safe_to_pce(problem, budget=args.budget, require_safe=not args.force)
    files = write_reduction(reduced, args.out)
    c = reduced.manifest["counts"]
    text = (f"right: {c['right_candidates']} generated, {c['right_kept']} kept\n"
            f"left: {c['left_candidates']} generated, {c['left_kept']} kept\n"
            + "".join(f"  {side} {rule}: {n['generated']} generated, {n['kept']} kept\n"
                      for side in ("right", "left") for rule, n in c["per_rule"][side].items())
            + f"instances: {c['instances']}\n" + "\n".join(f"wrote {f}" for f in files))
    _emit(args, {"counts": c, "files": files}, text)
    return 0


def cmd_oracle(args) -> int:
    problem = parse_problem(_read(args.file))
    v = find_counterexample_bounded(problem, args.max_heap, args.timeout_steps)
    if isinstance(v, Counterexample):
        _emit(args, {"verdict": "counterexample", "structure": v.structure.to_json()},
              "counterexample\n" + v.structure.format())
        return 1
    if isinstance(v, NoCounterexampleUpTo):
        _emit(args, {"verdict": "no_counterexample", "bound": v.bound},
              f"no counterexample with at most {v.bound} cells")
        return 0
    _emit(args, {"verdict": "resource_exceeded", "steps": v.steps}, f"step budget exhausted after {v.steps} steps")
    return 4


def cmd_xcheck(args) -> int:
    problem = parse_problem(_read(args.file))
    rep = xcheck(problem, args.max_heap, budget=args.budget, max_steps=args.timeout_steps)
    lines = [f"source: {type(rep.source).__name__}"]
    for r in rep.instances:
        line = f"instance {r.index}: {type(r.verdict).__name__}"
        if r.transfer_ok is not None:
            line += f" transfer={'ok' if r.transfer_ok else 'FAILED'}"
        lines.append(line)
    lines.append(f"agree={str(rep.agree).lower()} bound={rep.bound}")
    _emit(args, rep.to_json(), "\n".join(lines))
    return rep.exit_code()


def cmd_gen_cfg(args) -> int:
    problem = gen_cfg_instance(parse_grammar(_read(args.grammar)))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(format_problem(problem))
    print(f"wrote {args.out}")
    return 0


def cmd_cfg_oracle(args) -> int:
    problem = gen_cfg_instance(parse_grammar(_read(args.grammar)))
    v = find_counterexample_bounded(problem, args.max_heap, args.timeout_steps)
    if isinstance(v, Counterexample):
        print(f"counterexample spelling {decode_word(v.structure)!r}\n" + v.structure.format())
        return 1
    if isinstance(v, NoCounterexampleUpTo):
        print(f"no counterexample with at most {v.bound} cells")
        return 0
    print(f"step budget exhausted after {v.steps} steps")
    return 4


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slreduce",
                                 description="Classify, reduce and test separation logic entailments.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="report structural conditions and safety")
    p.add_argument("file")
    p.add_argument("--json", action="store_true")
    p.add_argument("--exact-establishment", type=_positive, metavar="DEPTH", default=None,
                   help="re-check failed establishment on unfoldings up to DEPTH")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("reduce", help="write the reduced SID, instances and manifest")
    p.add_argument("file")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--force", action="store_true", help="skip the safety gate")
    p.add_argument("--budget", type=_positive, default=DEFAULT_BUDGET,
                   help="maximum candidates per source rule")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("oracle", help="bounded counterexample search")
    p.add_argument("file")
    p.add_argument("--max-heap", type=_positive, required=True)
    p.add_argument("--timeout-steps", type=_positive, default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("xcheck", help="compare oracle verdicts before and after reduction")
    p.add_argument("file")
    p.add_argument("--max-heap", type=_positive, required=True)
    p.add_argument("--timeout-steps", type=_positive, default=None)
    p.add_argument("--budget", type=_positive, default=DEFAULT_BUDGET)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_xcheck)

    p = sub.add_parser("gen-cfg", help="encode a Greibach grammar as an entailment")
    p.add_argument("grammar")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_gen_cfg)

    p = sub.add_parser("cfg-oracle", help="run the oracle on the encoding of a grammar")
    p.add_argument("grammar")
    p.add_argument("--max-heap", type=_positive, required=True)
    p.add_argument("--timeout-steps", type=_positive, default=None)
    p.set_defaults(func=cmd_cfg_oracle)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SLError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
