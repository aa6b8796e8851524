import itertools

import pytest

from sfl.effects import (
    EMPTY,
    GLOBAL_FLOW,
    MODE_PNT,
    MODE_STATE_EXN,
    PARTIAL,
    EffectPolicy,
    check_galois,
    compose,
    effect_label,
    effect_set,
    gamma,
    parse_effect,
    show_effect,
    subsets,
    validate_policy,
)
from sfl.labels import Label, load_lattice

TWO_POINT = "element Pub\nelement Sec\nflow Pub Sec\n"


def pol(l_state="Pub", l_exn="Pub", mode=MODE_STATE_EXN, compose_mode=GLOBAL_FLOW, l_pnt=None):
    lat = load_lattice(TWO_POINT)
    kw = {}
    if mode == MODE_STATE_EXN:
        kw = dict(l_state=lat.label(l_state), l_exn=lat.label(l_exn))
    if l_pnt:
        kw["l_pnt"] = lat.label(l_pnt)
    return EffectPolicy(lat, mode, compose_mode=compose_mode, **kw)


def test_parse_and_show():
    assert parse_effect("{R,W}") == effect_set("R", "W")
    assert parse_effect("{}") == EMPTY
    assert show_effect(effect_set("E", "R")) == "{R,E}"
    with pytest.raises(ValueError):
        parse_effect("{R}", MODE_PNT)


def test_effect_label_examples():
    p = pol()
    top = p.lattice.top
    assert effect_label(p, effect_set("R")) == top
    assert effect_label(p, EMPTY) == top
    assert effect_label(p, effect_set("W", "E")) == Label("Pub")


def test_effect_label_antitone():
    p = pol()
    subs = subsets(p.alphabet)
    for a in subs:
        for b in subs:
            if a <= b:
                assert p.lattice.flows(effect_label(p, b), effect_label(p, a))


def test_policy_validation():
    assert validate_policy(pol()) == []
    bad = pol(l_state="Pub", l_exn="Sec")
    assert any("lExn" in issue for issue in validate_policy(bad))
    # partial mode lifts the lExn/lState requirement
    assert validate_policy(pol(l_state="Pub", l_exn="Sec", compose_mode=PARTIAL)) == []


def test_compose_global_examples():
    p = pol()
    assert compose(p, [effect_set("R"), effect_set("E")], effect_set("R", "E"))
    for eps in subsets(p.alphabet):
        assert compose(p, [], eps)
    assert compose(p, [effect_set("R")], effect_set("R", "W"))
    assert not compose(p, [effect_set("W")], effect_set("R"))


def test_compose_partial_rules():
    # a may-throw prefix only composes with suffixes whose effects the
    # exception observer can see
    p = pol(l_state="Pub", l_exn="Sec", compose_mode=PARTIAL)
    assert not compose(p, [effect_set("E"), effect_set("W")], effect_set("W", "E"))
    # E-free prefixes always compose
    assert compose(p, [effect_set("W"), effect_set("E")], effect_set("W", "E"))
    # suffix visible to exception observers composes
    p2 = pol(l_state="Pub", l_exn="Pub", compose_mode=PARTIAL)
    assert compose(p2, [effect_set("E"), effect_set("W")], effect_set("W", "E"))


def test_compose_monotone_in_whole():
    p = pol()
    subs = subsets(p.alphabet)
    for ps in itertools.product(subs, repeat=2):
        for w in subs:
            if compose(p, list(ps), w):
                for w2 in subs:
                    if w <= w2:
                        assert compose(p, list(ps), w2)


def test_compose_effector_laws():
    # identity and associativity instances, both modes
    for p in (pol(), pol(compose_mode=PARTIAL), pol(l_state="Pub", l_exn="Sec", compose_mode=PARTIAL)):
        subs = subsets(p.alphabet)
        for eps in subs:
            assert compose(p, [eps], eps)
        for e1, e2, e3 in itertools.product(subs, repeat=3):
            whole = e1 | e2 | e3
            # composing stepwise left or in one go agrees
            step = compose(p, [e1, e2], e1 | e2) and compose(p, [e1 | e2, e3], whole)
            flat = compose(p, [e1, e2, e3], whole)
            assert step == flat


def test_gamma_examples():
    p = pol()
    sec, pub = p.lattice.label("Sec"), p.lattice.label("Pub")
    assert gamma(p, sec) == effect_set("R")
    assert gamma(p, pub) == effect_set("R", "W", "E")
    for lab in p.lattice:
        assert "R" in gamma(p, lab)


def test_gamma_pnt():
    p = pol(mode=MODE_PNT, l_pnt="Pub")
    assert gamma(p, Label("Pub")) == effect_set("PNT")
    assert gamma(p, Label("Sec")) == EMPTY


def test_galois_two_point():
    rep = check_galois(pol())
    assert rep.ok
    assert rep.cases == 2 * 8


def test_galois_pnt():
    rep = check_galois(pol(mode=MODE_PNT, l_pnt="Pub"))
    assert rep.ok
    assert rep.cases == 2 * 2


def test_galois_corrupted_negative_control():
    p = pol()

    def corrupted(policy, eps):
        if eps == effect_set("W"):
            return policy.lattice.top
        return effect_label(policy, eps)

    rep = check_galois(p, label_fn=corrupted)
    assert not rep.ok
    assert (Label("Sec"), effect_set("W")) == rep.counterexamples[0][:2]
