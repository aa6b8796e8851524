import itertools

import pytest

from sfl.effects import EMPTY, PARTIAL, EffectPolicy, effect_set, subsets
from sfl.errors import (
    EFFECT_COMPOSITION_FAIL,
    MISMATCH,
    NOT_POINTED,
    PC_TOO_HIGH,
    PROTECTION_FAIL,
    STATE_TYPE_INVALID,
    UNBOUND_VAR,
    WRONG_CALCULUS,
    CheckError,
)
from sfl.generate import ProgramGen
from sfl.labels import load_lattice
from sfl.syntax import (
    BOOLISH,
    UNIT,
    FunEff,
    FunPc,
    Labeled,
    Lift,
    parse_expr,
    parse_program,
    parse_type,
)
from sfl.typecheck import (
    Judgment,
    check_effect,
    check_pc,
    check_program,
    check_pure,
    check_weak,
    convert_pc_expr,
    infer_effect,
    is_pointed,
    pc_to_effect_type,
)

LAT = load_lattice("element Pub\nelement Sec\nflow Pub Sec\n")
PUB, SEC = LAT.label("Pub"), LAT.label("Sec")
SIGMA = parse_type("L[Pub](unit+unit)", LAT)


def pol(**kw):
    base = dict(l_state=PUB, l_exn=PUB)
    base.update(kw)
    mode = kw.pop("mode", "state-exn")
    if mode == "pnt":
        base = {k: v for k, v in base.items() if k not in ("l_state", "l_exn")}
    return EffectPolicy(LAT, mode, **base)


def pnt_pol(l_pnt=PUB):
    return EffectPolicy(LAT, "pnt", l_pnt=l_pnt)


def kind_of(fn, *args, **kw):
    with pytest.raises(CheckError) as exc:
        fn(*args, **kw)
    return exc.value.kind


# ---------------------------------------------------------------------------
# pointedness
# ---------------------------------------------------------------------------


def test_is_pointed_examples():
    assert is_pointed(Lift(UNIT))
    assert not is_pointed(UNIT)
    assert is_pointed(parse_type("unit -> Lift unit", LAT))
    assert is_pointed(parse_type("Lift unit * Lift unit", LAT))
    assert is_pointed(parse_type("L[Sec] Lift unit", LAT))
    assert not is_pointed(BOOLISH)
    with pytest.raises(CheckError):
        is_pointed(FunPc(UNIT, PUB, UNIT))


# ---------------------------------------------------------------------------
# pure system
# ---------------------------------------------------------------------------


def test_check_pure_examples():
    p = pol()
    assert check_pure(p, {}, parse_expr("label[Sec] ()", LAT)) == Labeled(SEC, UNIT)
    e = parse_expr("unlabel (label[Sec] ()) as x in x", LAT)
    assert kind_of(check_pure, p, {}, e) == PROTECTION_FAIL
    e2 = parse_expr("fix f : Lift unit = lift ()", LAT)
    assert check_pure(p, {}, e2) == Lift(UNIT)


def test_check_pure_rejections():
    p = pol()
    assert kind_of(check_pure, p, {}, parse_expr("read", LAT)) == WRONG_CALCULUS
    assert kind_of(check_pure, p, {}, parse_expr("x", LAT)) == UNBOUND_VAR
    assert kind_of(check_pure, p, {}, parse_expr("fix f : unit = ()", LAT)) == NOT_POINTED
    seq_bad = parse_expr("seq x = lift () in ()", LAT)
    assert kind_of(check_pure, p, {}, seq_bad) == NOT_POINTED
    seq_ok = parse_expr("seq x = lift () in lift x", LAT)
    assert check_pure(p, {}, seq_ok) == Lift(UNIT)


# ---------------------------------------------------------------------------
# pc system
# ---------------------------------------------------------------------------


def exn_write_leak_body():
    return parse_expr(
        "unlabel h as x in match x with inl a -> throw : L[Sec] unit "
        "| inr b -> label[Sec] ()",
        LAT,
    )


def test_check_pc_program_one():
    # under a legal policy, the raised pc forbids the throw
    p = pol()
    gamma = {"h": parse_type("L[Sec](unit+unit)", LAT), "s": SIGMA}
    leak = exn_write_leak_body()
    assert kind_of(check_pc, p, gamma, PUB, leak, SIGMA) == PC_TOO_HIGH
    # an illegal policy is rejected up front
    illegal = pol(l_exn=SEC)
    assert kind_of(check_pc, illegal, gamma, PUB, leak, SIGMA) == PROTECTION_FAIL


def test_check_pc_accepts_low_variant():
    # relabeling the secret to the exception level makes it acceptable
    p = pol()
    gamma = {"h": parse_type("L[Pub](unit+unit)", LAT)}
    e = parse_expr(
        "unlabel h as x in match x with inl a -> throw : L[Pub] unit "
        "| inr b -> label[Pub] ()",
        LAT,
    )
    assert check_pc(p, gamma, PUB, e, SIGMA) == Labeled(PUB, UNIT)


def test_check_pc_write_gate():
    p = pol()
    e = parse_expr("write (label[Pub](inl () : unit+unit))", LAT)
    assert check_pc(p, {}, PUB, e, SIGMA) == UNIT
    assert kind_of(check_pc, p, {}, SEC, e, SIGMA) == PC_TOO_HIGH


def test_check_pc_app_latent():
    p = pol()
    e = parse_expr("(fun [pc Sec] (x:unit) -> x) ()", LAT)
    assert check_pc(p, {}, PUB, e, SIGMA) == UNIT
    e2 = parse_expr("(fun [pc Pub] (x:unit) -> x) ()", LAT)
    assert kind_of(check_pc, p, {}, SEC, e2, SIGMA) == PC_TOO_HIGH


def test_check_pc_fix_and_recursive_var():
    p = pnt_pol(l_pnt=PUB)
    e = parse_expr("fix f : unit = f", LAT)
    assert check_pc(p, {}, PUB, e) == UNIT
    assert kind_of(check_pc, p, {}, SEC, e) == PC_TOO_HIGH
    # a recursive reference under a latent pc above lPnt is rejected
    risky = parse_expr("fix f : unit ->[pc Sec] unit = fun [pc Sec] (x:unit) -> f x", LAT)
    assert kind_of(check_pc, p, {}, PUB, risky) == PC_TOO_HIGH
    safe = parse_expr("fix f : unit ->[pc Pub] unit = fun [pc Pub] (x:unit) -> f x", LAT)
    assert check_pc(p, {}, PUB, safe) == FunPc(UNIT, PUB, UNIT)


def test_pc_variance_soundness_on_generated():
    p = pol()
    gen = ProgramGen(p, SIGMA, "pc", seed=21)
    for _ in range(80):
        prog = gen.program(8, gamma={"a": BOOLISH})
        for lower in LAT:
            if LAT.flows(lower, prog.pc):
                assert check_pc(p, prog.gamma, lower, prog.body, SIGMA) == prog.type


# ---------------------------------------------------------------------------
# effect system
# ---------------------------------------------------------------------------


def test_infer_effect_read_or_throw():
    p = pol()
    e = parse_expr(
        "match x with inl a -> read | inr b -> throw : L[Pub](unit+unit)", LAT
    )
    t, eps = infer_effect(p, {"x": BOOLISH}, e, SIGMA)
    assert t == SIGMA
    assert eps == effect_set("R", "E")


def test_infer_effect_labeled_read():
    p = pol()
    gamma = {"h": parse_type("L[Sec](unit+unit)", LAT)}
    e = parse_expr(
        "unlabel h as x in match x with inl a -> label[Sec] read "
        "| inr b -> label[Sec](label[Pub](inl () : unit+unit))",
        LAT,
    )
    t, eps = infer_effect(p, gamma, e, SIGMA)
    assert eps == effect_set("R")
    assert t == Labeled(SEC, SIGMA)


def test_infer_effect_fix():
    p = pnt_pol()
    e = parse_expr("fix f : unit+unit = inl () : unit+unit", LAT)
    t, eps = infer_effect(p, {}, e)
    assert t == BOOLISH
    assert eps == effect_set("PNT")


def test_infer_effect_unlabel_premise():
    p = pol()
    gamma = {"h": parse_type("L[Sec](unit+unit)", LAT)}
    leak = exn_write_leak_body()
    with pytest.raises(CheckError) as exc:
        infer_effect(p, gamma, leak, SIGMA)
    assert exc.value.kind == PROTECTION_FAIL
    assert "effect label" in exc.value.message


def test_trycatch_effects():
    p = pol()
    e = parse_expr("try throw : L[Pub] unit catch (label[Pub] ())", LAT)
    t, eps = infer_effect(p, {}, e, SIGMA)
    assert (t, eps) == (Labeled(PUB, UNIT), EMPTY)  # the exception is caught here
    bare = parse_expr("try throw : unit catch ()", LAT)
    assert kind_of(infer_effect, p, {}, bare, SIGMA) == PROTECTION_FAIL
    e2 = parse_expr("try (match x with inl a -> read | inr b -> throw : L[Pub](unit+unit)) catch (label[Pub](inr () : unit+unit))", LAT)
    t2, eps2 = infer_effect(p, {"x": BOOLISH}, e2, SIGMA)
    assert eps2 == effect_set("R")


def test_check_effect_examples():
    p = pol()
    read = parse_expr("read", LAT)
    assert check_effect(p, {}, read, effect_set("R", "W", "E"), SIGMA) == SIGMA
    assert kind_of(check_effect, p, {}, read, EMPTY, SIGMA) == MISMATCH
    w = parse_expr("write (label[Pub](inl () : unit+unit))", LAT)
    assert check_effect(p, {}, w, effect_set("W"), SIGMA) == UNIT


def test_effect_principality_exhaustive():
    p = pol()
    gen = ProgramGen(p, SIGMA, "effect", seed=22)
    for _ in range(60):
        prog = gen.program(7, gamma={"a": BOOLISH})
        _, principal = infer_effect(p, prog.gamma, prog.body, SIGMA)
        for eps in subsets(p.alphabet):
            try:
                check_effect(p, prog.gamma, prog.body, eps, SIGMA)
                accepted = True
            except CheckError:
                accepted = False
            assert accepted == (principal <= eps)


def test_latent_effect_annotation():
    p = pol()
    e = parse_expr("fun [eff {R,W}] (x:unit) -> ()", LAT)
    t, eps = infer_effect(p, {}, e, SIGMA)
    assert t == FunEff(UNIT, effect_set("R", "W"), UNIT)
    assert eps == EMPTY
    bad = parse_expr("fun [eff {}] (x:unit) -> read", LAT)
    assert kind_of(infer_effect, p, {}, bad, SIGMA) == MISMATCH


def test_partial_mode_composition_point():
    p = pol(l_exn=SEC, compose_mode=PARTIAL)
    # a may-throw first element poisons a writing second element
    e = parse_expr("(throw : unit, write (label[Pub](inl () : unit+unit)))", LAT)
    assert kind_of(infer_effect, p, {}, e, SIGMA) == EFFECT_COMPOSITION_FAIL
    # flipped order composes: the write happens first
    e2 = parse_expr("(write (label[Pub](inl () : unit+unit)), throw : unit)", LAT)
    t, eps = infer_effect(p, {}, e2, SIGMA)
    assert eps == effect_set("W", "E")


# ---------------------------------------------------------------------------
# weak baseline
# ---------------------------------------------------------------------------


def test_weak_accepts_leaks():
    p = pol()
    gamma = {"h": parse_type("L[Sec](unit+unit)", LAT)}
    assert check_weak(p, gamma, exn_write_leak_body(), SIGMA) == Labeled(SEC, UNIT)
    assert check_weak(p, {}, parse_expr("fix f : unit = ()", LAT), SIGMA) == UNIT


# ---------------------------------------------------------------------------
# type translation
# ---------------------------------------------------------------------------


def test_pc_to_effect_type_cases():
    p = pol()
    t = parse_type("unit ->[pc Pub] unit", LAT)
    assert pc_to_effect_type(p, t) == parse_type("unit ->[eff {R,W,E}] unit", LAT)
    t2 = parse_type("unit ->[pc Sec] unit", LAT)
    assert pc_to_effect_type(p, t2) == parse_type("unit ->[eff {R}] unit", LAT)
    mid = EffectPolicy(LAT, "state-exn", l_state=SEC, l_exn=PUB)
    assert pc_to_effect_type(mid, t2) == parse_type("unit ->[eff {R,W}] unit", LAT)
    lab = parse_type("L[Sec](unit ->[pc Pub] unit)", LAT)
    out = pc_to_effect_type(p, lab)
    assert out == parse_type("L[Sec](unit ->[eff {R,W,E}] unit)", LAT)


def test_pc_to_effect_type_pnt():
    p = pnt_pol(l_pnt=PUB)
    t = parse_type("unit ->[pc Sec] unit", LAT)
    assert pc_to_effect_type(p, t) == FunEff(UNIT, EMPTY, UNIT)
    t2 = parse_type("unit ->[pc Pub] unit", LAT)
    assert pc_to_effect_type(p, t2) == FunEff(UNIT, effect_set("PNT"), UNIT)


def test_convert_pc_expr_lemma_31_instances():
    p = pol()
    gen = ProgramGen(p, SIGMA, "pc", seed=23)
    for _ in range(60):
        prog = gen.program(8, gamma={"a": BOOLISH})
        gamma_e = {x: pc_to_effect_type(p, t) for x, t in prog.gamma.items()}
        body_e = convert_pc_expr(p, prog.gamma, prog.pc, prog.body, SIGMA)
        t, eps = infer_effect(p, gamma_e, body_e, SIGMA)
        assert t == pc_to_effect_type(p, prog.type)
        if not LAT.flows(prog.pc, p.l_state):
            assert "W" not in eps
        if not LAT.flows(prog.pc, p.l_exn):
            assert "E" not in eps


# ---------------------------------------------------------------------------
# whole programs
# ---------------------------------------------------------------------------


def test_check_program_sigma_validation():
    src = "mode state-exn\nsigma unit\nbody read\n"
    program = parse_program(src, LAT)
    assert kind_of(check_program, pol(), program, "pc", PUB) == STATE_TYPE_INVALID


def test_check_program_judgments():
    src = "mode state-exn\nsigma L[Pub](unit+unit)\nbody read\n"
    program = parse_program(src, LAT)
    j = check_program(pol(), program, "effect")
    assert j == Judgment("effect", SIGMA, effect_set("R"))
