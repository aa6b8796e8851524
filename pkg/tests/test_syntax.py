import pytest

from sfl.effects import EffectPolicy
from sfl.generate import ProgramGen
from sfl.labels import Label, UnknownLabel, load_lattice
from sfl.syntax import (
    BOOLISH,
    UNIT,
    App,
    Inl,
    Inr,
    LabelE,
    Lam,
    Let,
    Match,
    Pair,
    ParseError,
    Throw,
    UnitVal,
    Unlabel,
    Var,
    all_names,
    desugar,
    format_expr,
    format_type,
    free_vars,
    parse_expr,
    parse_program,
    parse_type,
    subst,
)
from sfl.typecheck import check_pure, desugar_pure

LAT = load_lattice("element Pub\nelement Sec\nflow Pub Sec\n")
POL = EffectPolicy(LAT, "state-exn", LAT.label("Pub"), LAT.label("Pub"))


def test_parse_label_expr():
    assert parse_expr("label[Sec] ()", LAT) == LabelE(Label("Sec"), UnitVal())


def test_parse_exception_leak_shape():
    e = parse_expr(
        "unlabel h as x in match x with inl a -> throw : L[Sec] unit "
        "| inr b -> label[Sec] ()",
        LAT,
    )
    assert isinstance(e, Unlabel)
    m = e.body
    assert isinstance(m, Match)
    assert m.left_body == Throw(parse_type("L[Sec] unit", LAT))
    assert m.right_body == LabelE(Label("Sec"), UnitVal())


def test_parse_let_is_sugar():
    e = parse_expr("let u = () in u", LAT)
    assert e == Let("u", UnitVal(), Var("u"))
    d = desugar_pure(POL, {}, e)
    assert d == App(Lam("u", UNIT, Var("u")), UnitVal())


def test_parse_types():
    assert parse_type("unit * unit + unit", LAT) == parse_type("(unit*unit)+unit", LAT)
    t = parse_type("unit ->[eff {R,W}] unit", LAT)
    assert format_type(t) == "unit ->[eff {R,W}] unit"
    assert format_type(parse_type("Lift unit", LAT)) == "Lift unit"
    # prefix binds tighter than sums
    assert parse_type("L[Sec] unit + unit", LAT) == parse_type("(L[Sec] unit) + unit", LAT)
    # arrows are right-associative
    assert parse_type("unit->unit->unit", LAT) == parse_type("unit->(unit->unit)", LAT)


def test_parse_errors_carry_position():
    with pytest.raises(ParseError) as exc:
        parse_expr("match () with", LAT)
    assert exc.value.line == 1
    with pytest.raises(UnknownLabel):
        parse_expr("label[Nope] ()", LAT)


def test_parser_renames_shadowed_binders():
    e = parse_expr("fun (x:unit) -> fun (x:unit) -> x", LAT)
    inner = e.body
    assert e.var != inner.var
    assert inner.body == Var(inner.var)


def test_print_examples():
    assert format_expr(Pair(UnitVal(), UnitVal())) == "((), ())"
    assert format_type(parse_type("unit ->[eff {R,W}] unit", LAT)) == "unit ->[eff {R,W}] unit"
    e = parse_expr("fun [pc Sec] (x:unit) -> x", LAT)
    assert format_expr(e).startswith("fun [pc Sec]")


def test_print_parse_roundtrip_on_generated(mode="state-exn"):
    sigma = parse_type("L[Pub](unit+unit)", LAT)
    for system in ("pure", "pc", "effect"):
        gen = ProgramGen(POL, sigma, system, seed=7)
        for i in range(60):
            p = gen.program(8, gamma={"a": BOOLISH})
            text = format_expr(p.body)
            again = parse_expr(text, LAT)
            assert again == p.body, text


def test_program_file_parsing_roundtrip():
    src = (
        "mode state-exn\n"
        "sigma L[Pub](unit+unit)\n"
        "var h : L[Sec](unit+unit)\n"
        "policy lState=Pub lExn=Pub\n"
        "body unlabel h as x in label[Sec] x\n"
    )
    p = parse_program(src, LAT)
    assert p.mode == "state-exn"
    assert p.sigma == parse_type("L[Pub](unit+unit)", LAT)
    assert p.context == (("h", parse_type("L[Sec](unit+unit)", LAT)),)
    assert dict(p.policy_fields) == {"lState": "Pub", "lExn": "Pub"}


def test_subst_examples():
    assert subst(Var("x"), "x", UnitVal()) == UnitVal()
    lam = Lam("x", UNIT, Var("x"))
    assert subst(lam, "x", UnitVal()) == lam
    # capture avoidance renames the binder
    lam2 = Lam("y", UNIT, Var("x"))
    out = subst(lam2, "x", Var("y"))
    assert isinstance(out, Lam)
    assert out.var != "y"
    assert out.body == Var("y")


def test_free_vars_subst_property():
    gen = ProgramGen(POL, None, "pure", seed=11)
    vals = [UnitVal(), LabelE(Label("Sec"), UnitVal())]
    for i in range(40):
        p = gen.program(7, gamma={"x": UNIT})
        v = vals[i % 2]
        out = subst(p.body, "x", v)
        assert free_vars(out) <= (free_vars(p.body) - {"x"}) | free_vars(v)


def test_subst_commutes_with_desugar():
    src = "let u = x in (u, x)"
    e = parse_expr(src, LAT)
    v = parse_expr("()", LAT)

    def synth(g, joins, expr):
        return check_pure(POL, {**{"x": UNIT}, **g}, expr)

    a = desugar(subst(e, "x", v), synth)
    b = subst(desugar(e, synth), "x", v)
    assert a == b


def test_all_names():
    e = parse_expr("fun (x:unit) -> y", LAT)
    assert all_names(e) == {"x", "y"}
