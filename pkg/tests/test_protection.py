import random

import pytest

from sfl.effects import EffectPolicy, effect_label, effect_set
from sfl.errors import CheckError
from sfl.generate import ProgramGen
from sfl.labels import load_lattice
from sfl.protection import protects_eff, protects_pc, protects_pure
from sfl.syntax import (
    BOOLISH,
    UNIT,
    FunEff,
    FunPc,
    FunPure,
    Labeled,
    Lift,
    Prod,
    Sum,
    parse_type,
)
from sfl.typecheck import pc_to_effect_type
from sfl.elaborate import monad_type, pure_type

LAT = load_lattice("element Pub\nelement Sec\nflow Pub Sec\n")
PUB, SEC = LAT.label("Pub"), LAT.label("Sec")


def pol(**kw):
    base = dict(l_state=PUB, l_exn=PUB)
    base.update(kw)
    return EffectPolicy(LAT, "state-exn", **base)


def test_protects_pure_examples():
    p = pol()
    assert protects_pure(p, PUB, parse_type("L[Sec] unit", LAT))
    assert not protects_pure(p, SEC, UNIT)
    lifted = Lift(Labeled(SEC, UNIT))
    assert not protects_pure(pol(l_pnt=PUB), SEC, lifted)
    assert protects_pure(pol(l_pnt=SEC), SEC, lifted)


def test_protects_pure_structure():
    p = pol()
    assert not protects_pure(p, PUB, Sum(UNIT, UNIT))  # sums are never protected
    assert protects_pure(p, SEC, Prod(Labeled(SEC, UNIT), Labeled(SEC, UNIT)))
    assert protects_pure(p, SEC, FunPure(UNIT, Labeled(SEC, UNIT)))
    with pytest.raises(CheckError):
        protects_pure(p, SEC, FunPc(UNIT, PUB, UNIT))


def test_protects_pc_examples():
    p = pol()
    assert not protects_pc(p, SEC, FunPc(UNIT, PUB, Labeled(SEC, UNIT)))
    assert protects_pc(p, PUB, FunPc(UNIT, SEC, Labeled(PUB, UNIT)))
    for l in LAT:
        assert protects_pc(p, l, Labeled(l, UNIT))


def test_protects_eff_examples():
    p = pol()
    assert not protects_eff(p, SEC, FunEff(UNIT, effect_set("W"), Labeled(SEC, UNIT)))
    for l in LAT:
        assert protects_eff(p, l, FunEff(UNIT, effect_set("R"), Labeled(l, UNIT)))
    t1, t2 = Labeled(SEC, UNIT), Labeled(SEC, BOOLISH)
    assert protects_eff(p, SEC, Prod(t1, t2)) == (
        protects_eff(p, SEC, t1) and protects_eff(p, SEC, t2)
    )


def _random_types(rng, system, depth=4, n=200):
    labs = list(LAT)

    def go(d):
        choices = ["unit", "sum", "prod", "labeled", "arrow"]
        if system == "pure":
            choices.append("lift")
        kind = rng.choice(choices if d > 0 else ["unit", "labeled"])
        if kind == "unit":
            return UNIT
        if kind == "labeled":
            return Labeled(rng.choice(labs), go(d - 1))
        if kind == "sum":
            return Sum(go(d - 1), go(d - 1))
        if kind == "prod":
            return Prod(go(d - 1), go(d - 1))
        if kind == "lift":
            return Lift(go(d - 1))
        if system == "pure":
            return FunPure(go(d - 1), go(d - 1))
        if system == "pc":
            return FunPc(go(d - 1), rng.choice(labs), go(d - 1))
        return FunEff(go(d - 1), frozenset(a for a in "RWE" if rng.random() < 0.4), go(d - 1))

    return [go(depth) for _ in range(n)]


def test_monotonicity():
    rng = random.Random(5)
    p = pol(l_pnt=SEC)
    checks = {
        "pure": protects_pure,
        "pc": protects_pc,
        "effect": protects_eff,
    }
    for system, fn in checks.items():
        for t in _random_types(rng, system):
            for hi in LAT:
                if fn(p, hi, t):
                    for lo in LAT:
                        if LAT.flows(lo, hi):
                            assert fn(p, lo, t)


def test_protect_trans_direction():
    # pc protection implies effect protection of the translated type
    rng = random.Random(6)
    p = pol()
    for t in _random_types(rng, "pc"):
        te = pc_to_effect_type(p, t)
        for l in LAT:
            if protects_pc(p, l, t):
                assert protects_eff(p, l, te)


def test_protect_capture_instance():
    # label below the effect label plus effect protection gives pure
    # protection of the monadic type
    rng = random.Random(7)
    p = pol()
    sigma = Labeled(PUB, BOOLISH)
    for t in _random_types(rng, "effect", depth=3, n=150):
        try:
            tp = pure_type(p, sigma, t)
        except CheckError:
            continue
        for l in LAT:
            for eps in [effect_set(), effect_set("R"), effect_set("W", "E"),
                        effect_set("R", "W", "E")]:
                if LAT.flows(l, effect_label(p, eps)) and protects_eff(p, l, t):
                    assert protects_pure(p, l, monad_type(p, sigma, eps, tp))
