"""Named verification suites over the shipped corpus and seeded random
corpora. Each suite returns one CaseResult per check; the CLI renders them
as a delimited report.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass

from .effects import (
    EMPTY,
    GLOBAL_FLOW,
    MODE_PNT,
    MODE_STATE_EXN,
    PARTIAL,
    EffectPolicy,
    check_galois,
    effect_label,
    parse_effect,
    show_effect,
    subsets,
    validate_policy,
)
from .elaborate import capture
from .errors import CheckError
from .generate import ContextSpec, GenProgram, ProgramGen, enum_values
from .harness import (
    DISTINGUISHED,
    ContextBank,
    Verdict,
    check_l_equiv,
    check_pc_bounded,
    check_pc_effect_lemmas,
    check_simulation,
    check_state_exn_equiv,
    check_ts_equiv,
    composite,
    composite_pure,
    captured_seq_paths,
    coproduct_counterexample_demo,
    observations_agree,
)
from .labels import Label, LabelLattice, load_lattice
from .syntax import (
    BOOLISH,
    Labeled,
    Type,
    format_expr,
    format_type,
    parse_program,
    parse_type,
)
from .typecheck import EFFECT, PC, PURE, WEAK, check_program, first_order

import random


@dataclass
class CaseResult:
    suite: str
    case_id: str
    ok: bool
    detail: str = ""
    witness: str | None = None


# ---------------------------------------------------------------------------
# Shipped fixtures
# ---------------------------------------------------------------------------


def corpus_text(name: str) -> str:
    return importlib.resources.files("sfl.corpus").joinpath(name).read_text()


def corpus_lattice(name: str) -> LabelLattice:
    return load_lattice(corpus_text(f"{name}.lat"))


SHIPPED_LATTICES = ("two_point", "diamond", "chain3")

CORPUS_PROGRAMS = (
    "write_leak",
    "exn_leak",
    "exn_write_leak",
    "read_or_throw",
    "labeled_read",
    "fix_loop",
    "fix_value",
    "lift_value",
)


def two_point() -> LabelLattice:
    return corpus_lattice("two_point")


def state_policy(lat: LabelLattice | None = None, compose_mode=GLOBAL_FLOW) -> EffectPolicy:
    lat = lat or two_point()
    lo = min(lat)
    return EffectPolicy(lat, MODE_STATE_EXN, l_state=lo, l_exn=lo, compose_mode=compose_mode)


def pnt_policy(lat: LabelLattice | None = None) -> EffectPolicy:
    lat = lat or two_point()
    return EffectPolicy(lat, MODE_PNT, l_pnt=min(lat))


def state_sigma(policy: EffectPolicy) -> Type:
    return Labeled(policy.l_state, BOOLISH)


# ---------------------------------------------------------------------------
# Golden corpus
# ---------------------------------------------------------------------------


def _parse_expect_line(line: str) -> dict:
    fields = {}
    for kv in line.split()[1:]:
        k, _, v = kv.partition("=")
        fields[k] = v
    return fields


def _expect_policy(fields: dict, mode: str) -> EffectPolicy:
    lat = corpus_lattice(fields.get("lattice", "two_point"))
    kw = {}
    if "lState" in fields:
        kw["l_state"] = lat.label(fields["lState"])
    if "lExn" in fields:
        kw["l_exn"] = lat.label(fields["lExn"])
    if "lPnt" in fields:
        kw["l_pnt"] = lat.label(fields["lPnt"])
    return EffectPolicy(lat, mode, compose_mode=fields.get("mode", GLOBAL_FLOW), **kw)


def run_expect_file(name: str) -> list[CaseResult]:
    out = []
    program_src = corpus_text(f"{name}.sfl")
    for i, raw in enumerate(corpus_text(f"{name}.expect").splitlines()):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = _parse_expect_line(line)
        case_id = f"{name}:{i + 1}"
        lat = corpus_lattice(fields.get("lattice", "two_point"))
        program = parse_program(program_src, lat)
        policy = _expect_policy(fields, program.mode)
        system = fields["system"]
        pc = lat.label(fields["pc"]) if "pc" in fields else None
        eps = parse_effect(fields["effect"], program.mode) if "effect" in fields else None
        try:
            judgment = check_program(policy, program, system, pc=pc, eps=eps)
            got = "accept"
            err = None
        except CheckError as exc:
            got = "reject"
            err = exc
        want = fields["expect"]
        ok = got == want
        detail = got
        if ok and want == "reject":
            detail = f"reject kind={err.kind}"
            if "kind" in fields and err.kind != fields["kind"]:
                ok = False
                detail += f" (wanted {fields['kind']})"
            if fields.get("at") == "unlabel" and "unlabel" not in str(err.args[0]).lower():
                # the violated premise must be the unlabel side condition
                if "flow to the body effect label" not in err.message:
                    ok = False
                    detail += " (not at the unlabel premise)"
        if ok and want == "accept":
            detail = f"accept type={format_type(judgment.type)}"
            if "type" in fields:
                expected_t = parse_type(fields["type"], lat, program.mode)
                if judgment.type != expected_t:
                    ok = False
                    detail += f" (wanted {fields['type']})"
            if "effect_out" in fields:
                expected_e = parse_effect(fields["effect_out"], program.mode)
                if judgment.effect != expected_e:
                    ok = False
                    detail += f" (wanted effect {fields['effect_out']})"
            elif judgment.effect is not None:
                detail += f" effect={show_effect(judgment.effect)}"
        out.append(CaseResult("golden", case_id, ok, detail))
    return out


def suite_golden() -> list[CaseResult]:
    out = []
    for name in CORPUS_PROGRAMS:
        out.extend(run_expect_file(name))
    out.extend(_golden_leak_demo())
    return out


def _golden_leak_demo() -> list[CaseResult]:
    """The may-throw-then-write program distinguishes its secret through the
    final state under the illegal policy, and is rejected under a legal one."""
    lat = two_point()
    pub, sec = lat.label("Pub"), lat.label("Sec")
    illegal = EffectPolicy(lat, MODE_STATE_EXN, l_state=pub, l_exn=sec)
    sigma = parse_type("L[Pub](unit+unit)", lat)
    program = parse_program(corpus_text("exn_write_leak.sfl"), lat)
    from .syntax import parse_expr
    from .typecheck import desugar_weak
    from .harness import _valid_pcs
    from .syntax import subst

    body = desugar_weak(illegal, dict(program.context), program.body, sigma)
    s_val = parse_expr("label[Pub](inr () : unit+unit)", lat)
    e = subst(body, "s", s_val)
    e1 = subst(e, "h", parse_expr("label[Sec](inl () : unit+unit)", lat))
    e2 = subst(e, "h", parse_expr("label[Sec](inr () : unit+unit)", lat))
    verdict = check_state_exn_equiv(illegal, sigma, e1, e2, l_atk=pub)
    out = [
        CaseResult(
            "golden",
            "exn_write_leak:state-leak-demo",
            verdict.status == DISTINGUISHED,
            f"illegal policy: {verdict.status} after {verdict.contexts_tried} contexts",
            verdict.witness_text() or None,
        )
    ]
    legal = EffectPolicy(lat, MODE_STATE_EXN, l_state=pub, l_exn=pub)
    rejected = not (_valid_pcs(legal, e1, sigma) or _valid_pcs(legal, e2, sigma))
    out.append(
        CaseResult(
            "golden",
            "exn_write_leak:legal-policy-rejected",
            rejected,
            "checker rejects the instantiated programs at every pc"
            if rejected
            else "unexpectedly typeable",
        )
    )
    return out


# ---------------------------------------------------------------------------
# Capture and simulation corpora
# ---------------------------------------------------------------------------


def _mode_setup(mode: str):
    if mode == MODE_STATE_EXN:
        pol = state_policy()
        return pol, state_sigma(pol)
    return pnt_policy(), None


def effect_corpus(mode: str, seed: int, count: int, size: int = 8) -> list[GenProgram]:
    policy, sigma = _mode_setup(mode)
    gen = ProgramGen(policy, sigma, EFFECT, seed=seed)
    out = []
    for i in range(count):
        gamma = {"a": BOOLISH} if i % 2 else {}
        out.append(gen.program(size, gamma=gamma))
    return out


def pc_corpus(mode: str, seed: int, count: int, size: int = 8) -> list[GenProgram]:
    policy, sigma = _mode_setup(mode)
    gen = ProgramGen(policy, sigma, PC, seed=seed)
    out = []
    for i in range(count):
        gamma = {"a": BOOLISH} if i % 2 else {}
        out.append(gen.program(size, gamma=gamma))
    return out


def suite_capture(seed: int = 0, count: int = 100) -> list[CaseResult]:
    out = []
    for mode in (MODE_STATE_EXN, MODE_PNT):
        policy, sigma = _mode_setup(mode)
        failures = 0
        detail = ""
        for i, prog in enumerate(effect_corpus(mode, seed, count)):
            try:
                capture(policy, sigma, prog.gamma, prog.body)
            except Exception as exc:  # InternalIllTyped or worse
                failures += 1
                if not detail:
                    detail = f"first failure at {i}: {exc}"
        out.append(
            CaseResult(
                "capture",
                f"{mode}:{count}",
                failures == 0,
                detail or f"{count} programs elaborate and re-check",
            )
        )
    return out


def suite_simulation(seed: int = 0, count: int = 100) -> list[CaseResult]:
    out = []
    for mode in (MODE_STATE_EXN, MODE_PNT):
        policy, sigma = _mode_setup(mode)
        cases = 0
        mism = None
        for prog in effect_corpus(mode, seed, count):
            rep = check_simulation(policy, sigma, prog.gamma, prog.body)
            cases += rep.cases
            if not rep.ok and mism is None:
                m = rep.mismatches[0]
                mism = f"{format_expr(m['expr'])} at state {m['state']}"
        out.append(
            CaseResult(
                "simulation",
                f"{mode}:{count}",
                mism is None,
                f"{cases} (program, state) pairs agree" if mism is None else mism,
            )
        )
    return out


def suite_lemmas(seed: int = 0, count: int = 100) -> list[CaseResult]:
    out = []
    for mode in (MODE_STATE_EXN, MODE_PNT):
        policy, sigma = _mode_setup(mode)
        corpus = pc_corpus(mode, seed, count)
        rep = check_pc_effect_lemmas(policy, sigma, corpus)
        lemma = "state-exn pc/effect" if mode == MODE_STATE_EXN else "pnt pc/effect"
        out.append(
            CaseResult(
                "lemmas",
                f"{mode}:{count}",
                rep.ok,
                f"{rep.cases} programs satisfy the {lemma} connection"
                if rep.ok
                else str(rep.violations[0]["why"]),
            )
        )
    return out


def suite_pcbound(seed: int = 0, count: int = 100) -> list[CaseResult]:
    out = []
    for mode in (MODE_STATE_EXN, MODE_PNT):
        policy, sigma = _mode_setup(mode)
        rep = check_pc_bounded(policy, sigma, pc_corpus(mode, seed, count))
        out.append(
            CaseResult(
                "pcbound",
                f"{mode}:{count}",
                rep.ok,
                f"pc flows to the effect label on {rep.cases} programs"
                if rep.ok
                else str(rep.violations[0]["why"]),
            )
        )
    out.append(suite_coproduct()[0])
    return out


def suite_coproduct() -> list[CaseResult]:
    demo = coproduct_counterexample_demo(two_point())
    detail = (
        f"write accepted at pc={demo.pc}, effect {show_effect(demo.effect)} "
        f"labeled {demo.effect_lab}; flows({demo.pc},{demo.effect_lab})="
        f"{demo.pc_to_eff}, flows({demo.effect_lab},{demo.pc})={demo.eff_to_pc}; "
        f"standard policy pc-bounded={demo.standard_bounded}"
    )
    return [CaseResult("coproduct-demo", "two_point", demo.ok, detail)]


def suite_galois(seed: int = 0, count: int = 100) -> list[CaseResult]:
    out = []
    rng = random.Random(seed)
    for name in SHIPPED_LATTICES:
        lat = corpus_lattice(name)
        for ls in lat:
            for le in lat:
                if not lat.flows(le, ls):
                    continue
                pol = EffectPolicy(lat, MODE_STATE_EXN, l_state=ls, l_exn=le)
                if validate_policy(pol):
                    continue
                rep = check_galois(pol)
                if not rep.ok:
                    out.append(
                        CaseResult(
                            "galois", f"{name}:{ls},{le}", False,
                            f"counterexample {rep.counterexamples[0]}",
                        )
                    )
        for lp in lat:
            pol = EffectPolicy(lat, MODE_PNT, l_pnt=lp)
            rep = check_galois(pol)
            if not rep.ok:
                out.append(
                    CaseResult("galois", f"{name}:pnt:{lp}", False, "fails")
                )
    out.append(CaseResult("galois", "shipped-lattices", not out, "exhaustive pass"))
    # random valid policies
    bad = 0
    for i in range(count):
        lat = corpus_lattice(rng.choice(SHIPPED_LATTICES))
        labs = list(lat)
        ls = rng.choice(labs)
        les = [l for l in labs if lat.flows(l, ls)]
        pol = EffectPolicy(lat, MODE_STATE_EXN, l_state=ls, l_exn=rng.choice(les))
        if validate_policy(pol):
            continue
        if not check_galois(pol).ok:
            bad += 1
    out.append(CaseResult("galois", f"random:{count}", bad == 0, f"{bad} failures"))
    # corrupted negative control: pretend writes are invisible
    lat = two_point()
    pub = lat.label("Pub")
    pol = EffectPolicy(lat, MODE_STATE_EXN, l_state=pub, l_exn=pub)

    def corrupted(policy, eps):
        if eps == frozenset({"W"}):
            return policy.lattice.top
        return effect_label(policy, eps)

    rep = check_galois(pol, label_fn=corrupted)
    witness = rep.counterexamples[0] if rep.counterexamples else None
    out.append(
        CaseResult(
            "galois",
            "corrupted-negative-control",
            not rep.ok and witness is not None,
            f"witness label={witness[0]} effect={show_effect(witness[1])}"
            if witness
            else "corruption went undetected",
        )
    )
    return out


# ---------------------------------------------------------------------------
# Noninterference suites
# ---------------------------------------------------------------------------


def _input_pairs(t: Type, limit: int = 3):
    vals = enum_values(t, limit=16)
    pairs = []
    for i in range(len(vals)):
        for j in range(i + 1, len(vals)):
            pairs.append((vals[i], vals[j]))
    return pairs[:limit]


def suite_ni(
    seed: int = 0,
    count: int = 100,
    bound: int = 7,
    modes=("pure", MODE_STATE_EXN, MODE_PNT),
) -> list[CaseResult]:
    out = []
    if "pure" in modes:
        out.append(_ni_pure(seed, count, bound))
    if MODE_STATE_EXN in modes:
        out.append(_ni_state(seed, count, bound))
    if MODE_PNT in modes:
        out.append(_ni_pnt(seed, count, bound))
    return out


def _ni_secret_type(rng, lat, secret: Label) -> Type:
    inner = rng.choice([BOOLISH, Labeled(min(lat), BOOLISH)])
    return Labeled(secret, inner)


def _ni_pure(seed, count, bound) -> CaseResult:
    policy = pnt_policy()
    lat = policy.lattice
    sec = lat.top
    rng = random.Random(seed)
    gen = ProgramGen(policy, None, PURE, seed=seed)
    bank = ContextBank(policy, None, PURE)
    cases = tried = 0
    for i in range(count):
        t1 = _ni_secret_type(rng, lat, sec)
        r = gen.program(size=7, gamma={"x": t1})
        attackers = [a for a in lat if not lat.flows(sec, a)]
        pairs = _input_pairs(t1)
        for p, q in pairs:
            e1, e2 = composite_pure(r, "x", p), composite_pure(r, "x", q)
            for atk in attackers:
                cases += 1
                spec = ContextSpec(hole_type=r.type, output_label=atk, size_bound=bound)
                v = check_l_equiv(policy, e1, e2, atk, spec=spec, bank=bank)
                tried += v.contexts_tried
                if v.status == DISTINGUISHED:
                    return CaseResult(
                        "ni", f"pure:{count}", False,
                        f"case {i} distinguished", v.witness_text(),
                    )
    return CaseResult(
        "ni", f"pure:{count}", True,
        f"{cases} composites indistinguishable ({tried} context runs)",
    )


def _ni_state(seed, count, bound) -> CaseResult:
    policy = state_policy()
    lat = policy.lattice
    sigma = state_sigma(policy)
    sec = lat.top
    rng = random.Random(seed)
    gen = ProgramGen(policy, sigma, PC, seed=seed)
    bank = ContextBank(policy, sigma, PC)
    cases = tried = 0
    for i in range(count):
        t1 = _ni_secret_type(rng, lat, sec)
        r = gen.program(size=7, gamma={"x": t1})
        attackers = [a for a in lat if not lat.flows(sec, a)]
        for p, q in _input_pairs(t1):
            e1, e2 = composite(r, "x", p), composite(r, "x", q)
            for atk in attackers:
                cases += 1
                spec = ContextSpec(hole_type=r.type, output_label=atk, size_bound=bound)
                v = check_state_exn_equiv(
                    policy, sigma, e1, e2, atk, spec=spec, bank=bank
                )
                tried += v.contexts_tried
                if v.status == DISTINGUISHED:
                    return CaseResult(
                        "ni", f"state-exn:{count}", False,
                        f"case {i} distinguished at {atk}: r={format_expr(r.body)}",
                        v.witness_text(),
                    )
    return CaseResult(
        "ni", f"state-exn:{count}", True,
        f"{cases} composites indistinguishable ({tried} context runs)",
    )


def _ni_pnt(seed, count, bound) -> CaseResult:
    policy = pnt_policy()
    lat = policy.lattice
    sec = lat.top
    rng = random.Random(seed)
    gen = ProgramGen(policy, None, PC, seed=seed)
    bank = ContextBank(policy, None, PC)
    cases = tried = 0
    for i in range(count):
        t1 = _ni_secret_type(rng, lat, sec)
        r = gen.program(size=7, gamma={"x": t1})
        attackers = [
            a
            for a in lat
            if lat.flows(policy.pnt_label(), a) and not lat.flows(sec, a)
        ]
        for p, q in _input_pairs(t1):
            e1, e2 = composite(r, "x", p), composite(r, "x", q)
            for atk in attackers:
                cases += 1
                spec = ContextSpec(hole_type=r.type, output_label=atk, size_bound=bound)
                v = check_ts_equiv(
                    policy, e1, e2, atk, spec=spec, system=PC, bank=bank, fuel=2000
                )
                tried += v.contexts_tried
                if v.status == DISTINGUISHED:
                    return CaseResult(
                        "ni", f"pnt:{count}", False,
                        f"case {i} distinguished at {atk}", v.witness_text(),
                    )
    return CaseResult(
        "ni", f"pnt:{count}", True,
        f"{cases} composites indistinguishable ({tried} context runs)",
    )


# ---------------------------------------------------------------------------
# CapturedSeq suite
# ---------------------------------------------------------------------------


def suite_seq(seed: int = 0, count: int = 500) -> list[CaseResult]:
    policy = state_policy()
    sigma = state_sigma(policy)
    gen = ProgramGen(policy, sigma, EFFECT, seed=seed)
    first_order_pool = [t for t in gen.pool if first_order(t)]
    agreed = skipped = 0
    for i in range(count):
        t1 = gen.rng.choice(first_order_pool)
        p1 = gen.program(size=6, target=t1)
        t2 = gen.rng.choice(first_order_pool)
        p2 = gen.program(size=6, gamma={"x": t1}, target=t2)
        rho_a, rho_b, eps, _ = captured_seq_paths(
            policy, sigma, p1.body, "x", t1, p2.body
        )
        ok, n, sk = observations_agree(policy, sigma, eps, rho_a, rho_b)
        skipped += sk
        if not ok:
            return [
                CaseResult(
                    "seq", f"state-exn:{count}", False,
                    f"pair {i} disagrees: p1={format_expr(p1.body)} "
                    f"p2={format_expr(p2.body)}",
                )
            ]
        agreed += n
    return [
        CaseResult(
            "seq", f"state-exn:{count}", True,
            f"{count} pairs agree on {agreed} state observations "
            f"({skipped} function-typed results skipped)",
        )
    ]


SUITES = {
    "golden": lambda seed, count: suite_golden(),
    "capture": lambda seed, count: suite_capture(seed, count),
    "simulation": lambda seed, count: suite_simulation(seed, count),
    "lemmas": lambda seed, count: suite_lemmas(seed, count),
    "galois": lambda seed, count: suite_galois(seed, count),
    "pcbound": lambda seed, count: suite_pcbound(seed, count),
    "coproduct-demo": lambda seed, count: suite_coproduct(),
    "ni": lambda seed, count: suite_ni(seed, count),
    "seq": lambda seed, count: suite_seq(seed, count),
}


def run_suite(name: str, seed: int = 0, count: int | None = None) -> list[CaseResult]:
    defaults = {
        "capture": 100,
        "simulation": 50,
        "lemmas": 100,
        "galois": 100,
        "pcbound": 100,
        "ni": 25,
        "seq": 100,
    }
    if name == "all":
        out = []
        for n in SUITES:
            out.extend(run_suite(n, seed, count))
        return out
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}")
    return SUITES[name](seed, count if count is not None else defaults.get(name, 100))