import pytest

from sfl.effects import EffectPolicy, effect_set
from sfl.generate import ProgramGen, enum_values
from sfl.interp import (
    NOT_COMPARABLE,
    StuckStep,
    decompositions,
    is_value,
    run,
    step_pure,
    step_state,
    value_eq,
)
from sfl.labels import load_lattice
from sfl.syntax import (
    BOOLISH,
    UNIT,
    App,
    Inl,
    Inr,
    LabelE,
    Lam,
    LiftE,
    Pair,
    Throw,
    UnitVal,
    Var,
    Write,
    parse_expr,
    parse_type,
    subst,
)
from sfl.typecheck import check_pc, check_pure, infer_effect

LAT = load_lattice("element Pub\nelement Sec\nflow Pub Sec\n")
PUB, SEC = LAT.label("Pub"), LAT.label("Sec")
SIGMA = parse_type("L[Pub](unit+unit)", LAT)
POL = EffectPolicy(LAT, "state-exn", PUB, PUB)
PNT = EffectPolicy(LAT, "pnt", l_pnt=PUB)

S0 = parse_expr("label[Pub](inl () : unit+unit)", LAT)
S1 = parse_expr("label[Pub](inr () : unit+unit)", LAT)


def test_is_value():
    assert is_value(parse_expr("label[Sec] (lift ((), ()))", LAT))
    assert not is_value(parse_expr("label[Sec] read", LAT))
    assert not is_value(Throw(UNIT))


def test_step_pure_examples():
    e = parse_expr("unlabel (label[Sec] ()) as x in (x, x)", LAT)
    assert step_pure(e) == Pair(UnitVal(), UnitVal())
    beta = parse_expr("(fun (x:unit) -> x) ()", LAT)
    assert step_pure(beta) == UnitVal()
    fix = parse_expr("fix f : Lift unit = lift ()", LAT)
    assert step_pure(fix) == LiftE(UnitVal())
    assert step_pure(UnitVal()) is None


def test_step_pure_seq():
    e = parse_expr("seq x = lift () in lift (x, x)", LAT)
    out = run(e)
    assert out.kind == "value"
    assert out.value == LiftE(Pair(UnitVal(), UnitVal()))


def test_step_state_examples():
    w = Write(S1)
    assert step_state(w, S0) == (UnitVal(), S1)
    r = parse_expr("read", LAT)
    assert step_state(r, S0) == (S0, S0)
    tc = parse_expr("try throw : L[Pub] unit catch (label[Pub] ())", LAT)
    assert step_state(tc, S0) == (LabelE(PUB, UnitVal()), S0)
    tv = parse_expr("try label[Pub] () catch (label[Pub] ())", LAT)
    assert step_state(tv, S0) == (LabelE(PUB, UnitVal()), S0)


def test_throw_context_collapse():
    # write(throw) collapses to the bare throw in one step
    t = parse_expr("write (throw : L[Pub](unit+unit))", LAT)
    nxt, s = step_state(t, S0)
    assert isinstance(nxt, Throw)
    assert s == S0
    # terminal afterwards
    assert step_state(nxt, S0) is None


def test_throw_inside_try_stops_at_try():
    e = parse_expr(
        "try (fst (throw : L[Pub] unit * L[Pub] unit, label[Pub] ())) "
        "catch (label[Pub] ())",
        LAT,
    )
    e1, _ = step_state(e, S0)
    # collapse reaches the try frame, not the top
    assert e1 != parse_expr("throw : L[Pub] unit", LAT)
    e2, _ = step_state(e1, S0)
    assert e2 == LabelE(PUB, UnitVal())


def test_run_examples():
    loop = parse_expr("fix f : Lift unit = f", LAT)
    assert run(loop, fuel=100).kind == "timeout"
    v = parse_expr("label[Sec] ()", LAT)
    out = run(v)
    assert out.kind == "value" and out.steps == 0
    stuck = App(UnitVal(), UnitVal())
    assert run(stuck).kind == "stuck"


def test_run_program_one_throws_without_write():
    body = parse_expr(
        "fst ((unlabel h as x in match x with inl a -> throw : L[Sec] unit "
        "| inr b -> label[Sec] ()), write s)",
        LAT,
    )
    # h = inl: the throw happens and the write never executes
    e = subst(body, "h", parse_expr("label[Sec](inl () : unit+unit)", LAT))
    e = subst(e, "s", S1)
    out = run(e, initial_state=S0)
    assert out.kind == "thrown"
    assert value_eq(out.state, S0) is True
    # h = inr: the write goes through
    e2 = subst(body, "h", parse_expr("label[Sec](inr () : unit+unit)", LAT))
    e2 = subst(e2, "s", S1)
    out2 = run(e2, initial_state=S0)
    assert out2.kind == "value"
    assert value_eq(out2.state, S1) is True


def test_depth_guard_classifies_growing_divergence():
    grow = parse_expr("fix f : Lift unit = seq x = f in lift x", LAT)
    out = run(grow, fuel=50_000)
    assert out.kind == "timeout"
    assert out.steps < 50_000  # stopped by the depth guard, not fuel


def test_value_eq():
    assert value_eq(UnitVal(), UnitVal()) is True
    assert value_eq(parse_expr("inl () : unit+unit", LAT), parse_expr("inr () : unit+unit", LAT)) is False
    f = parse_expr("fun (x:unit) -> x", LAT)
    assert value_eq(f, f) is NOT_COMPARABLE
    # annotations are ignored
    a = Inl(UnitVal(), BOOLISH)
    b = Inl(UnitVal(), parse_type("unit + (unit+unit)", LAT))
    assert value_eq(a, b) is True
    assert value_eq(LabelE(PUB, UnitVal()), LabelE(SEC, UnitVal())) is False


# ---------------------------------------------------------------------------
# metatheory on generated programs
# ---------------------------------------------------------------------------


def test_preservation_and_progress_state():
    gen = ProgramGen(POL, SIGMA, "effect", seed=31)
    for _ in range(50):
        prog = gen.program(8)
        t0, _ = infer_effect(POL, {}, prog.body, SIGMA)
        for s in enum_values(SIGMA):
            cur, state, steps = prog.body, s, 0
            while steps < 300:
                nxt = step_state(cur, state)  # never raises StuckStep
                if nxt is None:
                    break
                cur, state = nxt
                steps += 1
                t, _ = infer_effect(POL, {}, cur, SIGMA, enforce_policy=False)
                if not isinstance(cur, Throw):
                    assert t == t0
                st = check_pure(POL, {}, state)
                assert st == SIGMA


def test_preservation_pure():
    gen = ProgramGen(POL, SIGMA, "pure", seed=32)
    for _ in range(50):
        prog = gen.program(8)
        t0 = check_pure(POL, {}, prog.body)
        cur, steps = prog.body, 0
        while steps < 200:
            nxt = step_pure(cur)
            if nxt is None:
                break
            cur = nxt
            steps += 1
            assert check_pure(POL, {}, cur) == t0


def test_determinism_unique_redex():
    gen = ProgramGen(POL, SIGMA, "effect", seed=33)
    for _ in range(40):
        prog = gen.program(8)
        cur, state, steps = prog.body, S0, 0
        while steps < 100:
            redexes = decompositions(cur, state_mode=True)
            nxt = step_state(cur, state)
            if nxt is None:
                assert not redexes
                break
            # exactly one redex, or none when a throw context collapses
            assert len(redexes) <= 1
            cur, state = nxt
            steps += 1
