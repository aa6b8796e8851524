"""Command-line front end.

Subcommands: check, eval, translate, equiv, verify, demo. Exit codes:
0 success/pass, 1 rejection/fail, 2 usage or parse errors.
"""

from __future__ import annotations

import argparse
import sys

from .effects import (
    GLOBAL_FLOW,
    MODE_PNT,
    MODE_STATE_EXN,
    EffectPolicy,
    parse_effect,
    show_effect,
)
from .elaborate import capture
from .errors import CheckError
from .generate import ContextSpec
from .harness import (
    DISTINGUISHED,
    EQUIVALENT,
    check_l_equiv,
    check_state_exn_equiv,
    check_ts_equiv,
)
from .interp import DEFAULT_FUEL, is_value, run
from .labels import LatticeError, load_lattice
from .suites import SUITES, run_suite, suite_coproduct
from .syntax import (
    ParseError,
    Program,
    format_expr,
    format_type,
    parse_expr,
    parse_program,
)
from .typecheck import (
    EFFECT,
    PC,
    PURE,
    WEAK,
    check_program,
    desugar_effect,
    desugar_pc,
    desugar_pure,
    desugar_weak,
)

USAGE_ERROR = 2
REJECTED = 1


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _load_lattice(args):
    if not args.lattice:
        raise CliError("--lattice FILE is required", USAGE_ERROR)
    try:
        with open(args.lattice) as fh:
            return load_lattice(fh.read())
    except OSError as exc:
        raise CliError(f"cannot read lattice: {exc}", USAGE_ERROR)
    except LatticeError as exc:
        raise CliError(f"invalid lattice: {exc}", USAGE_ERROR)


def _load_program(path: str, lattice) -> Program:
    try:
        with open(path) as fh:
            return parse_program(fh.read(), lattice)
    except OSError as exc:
        raise CliError(f"cannot read program: {exc}", USAGE_ERROR)
    except (ParseError, LatticeError) as exc:
        raise CliError(str(exc), USAGE_ERROR)


def _build_policy(args, lattice, program: Program | None) -> EffectPolicy:
    fields = dict(program.policy_fields) if program else {}
    for kv in args.policy or []:
        k, eq, v = kv.partition("=")
        if not eq:
            raise CliError(f"--policy expects KEY=VAL, got {kv!r}", USAGE_ERROR)
        fields[k] = v
    mode = program.mode if program else MODE_STATE_EXN
    try:
        kw = {}
        for key, attr in (("lState", "l_state"), ("lExn", "l_exn"), ("lPnt", "l_pnt")):
            if key in fields:
                kw[attr] = lattice.label(fields[key])
        return EffectPolicy(
            lattice, mode, compose_mode=fields.get("mode", GLOBAL_FLOW), **kw
        )
    except LatticeError as exc:
        raise CliError(str(exc), USAGE_ERROR)


def _desugared(policy, program: Program, system: str, pc):
    gamma = dict(program.context)
    if system == PURE:
        return desugar_pure(policy, gamma, program.body)
    if system == PC:
        return desugar_pc(policy, gamma, pc, program.body, program.sigma)
    if system == WEAK:
        return desugar_weak(policy, gamma, program.body, program.sigma)
    return desugar_effect(policy, gamma, program.body, program.sigma)


def cmd_check(args) -> int:
    lattice = _load_lattice(args)
    program = _load_program(args.file, lattice)
    policy = _build_policy(args, lattice, program)
    pc = lattice.label(args.pc) if args.pc else None
    if args.system == PC and pc is None:
        raise CliError("--pc LABEL is required for the pc system", USAGE_ERROR)
    eps = None
    if args.effect:
        try:
            eps = parse_effect(args.effect, program.mode)
        except ValueError as exc:
            raise CliError(str(exc), USAGE_ERROR)
    try:
        judgment = check_program(policy, program, args.system, pc=pc, eps=eps)
    except CheckError as exc:
        print(f"REJECTED\t{exc.kind}\t{exc.message}")
        return REJECTED
    line = f"ACCEPTED\t{format_type(judgment.type)}"
    if judgment.effect is not None:
        line += f"\t{show_effect(judgment.effect)}"
    print(line)
    return 0


def cmd_eval(args) -> int:
    lattice = _load_lattice(args)
    program = _load_program(args.file, lattice)
    policy = _build_policy(args, lattice, program)
    state = None
    if args.state:
        state = parse_expr(args.state, lattice, program.mode)
        if not is_value(state):
            raise CliError("--state must be a value", USAGE_ERROR)
    try:
        if program.mode == MODE_STATE_EXN:
            if state is None:
                raise CliError("--state VALUE is required in state-exn mode", USAGE_ERROR)
            body = _desugared(policy, program, WEAK, None)
            outcome = run(_close_context(program, body), state, fuel=args.fuel)
        else:
            body = _desugared(policy, program, WEAK, None)
            outcome = run(_close_context(program, body), fuel=args.fuel)
    except CheckError as exc:
        print(f"REJECTED\t{exc.kind}\t{exc.message}")
        return REJECTED
    print(f"{outcome.kind}\t{outcome}\tsteps={outcome.steps}")
    return 0 if outcome.kind in ("value", "thrown") else REJECTED


def _close_context(program: Program, body):
    if program.context:
        raise CliError(
            "eval needs a closed program (no var lines)", USAGE_ERROR
        )
    return body


def cmd_translate(args) -> int:
    lattice = _load_lattice(args)
    program = _load_program(args.file, lattice)
    policy = _build_policy(args, lattice, program)
    gamma = dict(program.context)
    try:
        body = _desugared(policy, program, EFFECT, None)
        rho, t, eps = capture(policy, program.sigma, gamma, body)
    except CheckError as exc:
        print(f"REJECTED\t{exc.kind}\t{exc.message}")
        return REJECTED
    from .elaborate import monad_type, pure_type

    pure_t = monad_type(policy, program.sigma, eps, pure_type(policy, program.sigma, t))
    print(format_expr(rho))
    print(f": {format_type(pure_t)}")
    print(f"effect {show_effect(eps)}")
    return 0


def cmd_equiv(args) -> int:
    lattice = _load_lattice(args)
    p1 = _load_program(args.file1, lattice)
    p2 = _load_program(args.file2, lattice)
    policy = _build_policy(args, lattice, p1)
    if p1.context or p2.context:
        raise CliError("equiv compares closed programs", USAGE_ERROR)
    atk = lattice.label(args.attacker)
    fuel = args.fuel
    try:
        if args.defn == "2.1":
            b1 = _desugared(policy, p1, PURE, None)
            b2 = _desugared(policy, p2, PURE, None)
            t = check_program(policy, p1, PURE).type
            spec = ContextSpec(hole_type=t, output_label=atk, size_bound=args.bound)
            verdict = check_l_equiv(policy, b1, b2, atk, spec=spec, fuel=fuel)
        elif args.defn == "3.2":
            b1 = _desugared(policy, p1, WEAK, None)
            b2 = _desugared(policy, p2, WEAK, None)
            verdict = check_state_exn_equiv(
                policy, p1.sigma, b1, b2, atk, fuel=fuel,
                spec=None if args.bound is None else _spec_for(policy, p1, b1, atk, args.bound),
            )
        else:
            b1 = _desugared(policy, p1, WEAK, None)
            b2 = _desugared(policy, p2, WEAK, None)
            system = PURE if p1.mode != MODE_PNT else PC
            try:
                from .typecheck import check_pure

                check_pure(policy, {}, b1)
                system = PURE
            except CheckError:
                system = PC
            verdict = check_ts_equiv(policy, b1, b2, atk, fuel=fuel, system=system)
    except CheckError as exc:
        print(f"REJECTED\t{exc.kind}\t{exc.message}")
        return REJECTED
    print(
        f"{verdict.status}\tcontexts={verdict.contexts_tried}\t"
        f"timeouts={verdict.timeouts}"
        + ("\tevidence-grade" if verdict.evidence_grade else "")
    )
    if verdict.witness:
        print(f"witness\t{verdict.witness_text()}")
    return 0 if verdict.status != DISTINGUISHED else REJECTED


def _spec_for(policy, program, body, atk, bound):
    from .harness import _some_type

    t = _some_type(policy, body, program.sigma)
    return ContextSpec(hole_type=t, output_label=atk, size_bound=bound)


def cmd_verify(args) -> int:
    from .report import save_figure, write_report

    try:
        results = run_suite(args.suite, seed=args.seed, count=args.count)
    except KeyError as exc:
        raise CliError(str(exc), USAGE_ERROR)
    write_report(results, sys.stdout, witness_dir=args.out)
    if args.figures:
        import os

        os.makedirs(args.figures, exist_ok=True)
        save_figure(results, os.path.join(args.figures, f"verify_{args.suite}.png"))
    return 0 if all(r.ok for r in results) else REJECTED


def cmd_demo(args) -> int:
    from .report import write_report

    if args.what != "coproduct":
        raise CliError("demo knows: coproduct", USAGE_ERROR)
    results = suite_coproduct()
    write_report(results, sys.stdout)
    return 0 if all(r.ok for r in results) else REJECTED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sfl",
        description="Label-based information-flow workbench: checkers, "
        "elaboration, interpreters, verification suites.",
    )
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p):
        p.add_argument("--lattice", help="lattice description file")
        p.add_argument(
            "--policy",
            action="append",
            metavar="KEY=VAL",
            help="policy fields: lState, lExn, lPnt, mode (repeatable)",
        )

    p = sub.add_parser("check", help="type-check a program")
    common(p)
    p.add_argument("--system", choices=[PURE, PC, EFFECT, WEAK], required=True)
    p.add_argument("--pc", help="program-counter label (pc system)")
    p.add_argument("--effect", help="declared effect set, e.g. '{R,W}'")
    p.add_argument("file")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("eval", help="run a closed program")
    common(p)
    p.add_argument("--state", help="initial state value (state-exn mode)")
    p.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    p.add_argument("file")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("translate", help="capture an effectful program into pure form")
    common(p)
    p.add_argument("file")
    p.set_defaults(fn=cmd_translate)

    p = sub.add_parser("equiv", help="bounded contextual equivalence of two programs")
    common(p)
    p.add_argument("--def", dest="defn", choices=["2.1", "3.2", "4.1"], required=True)
    p.add_argument("--attacker", required=True)
    p.add_argument("--bound", type=int, default=7)
    p.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    p.add_argument("file1")
    p.add_argument("file2")
    p.set_defaults(fn=cmd_equiv)

    p = sub.add_parser("verify", help="run a named verification suite")
    p.add_argument("suite", choices=sorted(SUITES) + ["all"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--out", help="directory for witness files")
    p.add_argument("--figures", help="directory for summary figures")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("demo", help="runnable demonstrations")
    p.add_argument("what", choices=["coproduct"])
    p.set_defaults(fn=cmd_demo)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    except (ParseError, LatticeError) as exc:
        print(str(exc), file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
