import itertools

import pytest

from sfl.labels import (
    COPRODUCT_TOP_NAME,
    DanglingEdge,
    DuplicateElement,
    Label,
    MissingJoin,
    NoMeet,
    NoTop,
    UnknownLabel,
    coproduct_with_top,
    inl,
    inr,
    load_lattice,
)

TWO_POINT = "element Pub\nelement Sec\nflow Pub Sec\n"
DIAMOND = """
element Lo
element A
element B
element Hi
flow Lo A
flow Lo B
flow A Hi
flow B Hi
"""


def test_load_two_point():
    lat = load_lattice(TWO_POINT)
    assert lat.top == Label("Sec")
    assert lat.flows(Label("Pub"), Label("Sec"))
    assert not lat.flows(Label("Sec"), Label("Pub"))


def test_load_singleton():
    lat = load_lattice("element A\n")
    a = Label("A")
    assert lat.top == a
    assert lat.join(a, a) == a


def test_missing_join():
    with pytest.raises(MissingJoin):
        load_lattice("element A\nelement B\n")


def test_duplicate_element():
    with pytest.raises(DuplicateElement):
        load_lattice("element A\nelement A\n")


def test_dangling_edge():
    with pytest.raises(DanglingEdge):
        load_lattice("element A\nflow A B\n")


def test_empty_lattice():
    with pytest.raises(NoTop):
        load_lattice("# nothing\n")


def test_unknown_label():
    lat = load_lattice(TWO_POINT)
    with pytest.raises(UnknownLabel):
        lat.flows(Label("Pub"), Label("Nope"))
    with pytest.raises(UnknownLabel):
        lat.label("Nope")


def test_join_examples():
    lat = load_lattice(TWO_POINT)
    pub, sec = lat.label("Pub"), lat.label("Sec")
    assert lat.join(pub, sec) == sec
    for l in lat:
        assert lat.join(l, l) == l
        assert lat.join(l, lat.top) == lat.top


def test_meet_examples():
    lat = load_lattice(TWO_POINT)
    pub, sec = lat.label("Pub"), lat.label("Sec")
    assert lat.meet([sec]) == sec
    assert lat.meet([pub, sec]) == pub
    # incomparable pair with only a common upper bound has no meet
    nolow = load_lattice("element A\nelement B\nelement T\nflow A T\nflow B T\n")
    with pytest.raises(NoMeet):
        nolow.meet([Label("A"), Label("B")])
    with pytest.raises(NoMeet):
        lat.meet([])


@pytest.mark.parametrize("text", [TWO_POINT, DIAMOND])
def test_lattice_laws_exhaustive(text):
    lat = load_lattice(text)
    labs = list(lat)
    assert len(labs) <= 8
    for a in labs:
        assert lat.flows(a, a)
        assert lat.flows(a, lat.top)
    for a, b, c in itertools.product(labs, repeat=3):
        if lat.flows(a, b) and lat.flows(b, c):
            assert lat.flows(a, c)
    for a, b in itertools.product(labs, repeat=2):
        assert lat.join(a, b) == lat.join(b, a)
        assert lat.flows(a, b) == (lat.join(a, b) == b)
    for a, b, c in itertools.product(labs, repeat=3):
        assert lat.join(lat.join(a, b), c) == lat.join(a, lat.join(b, c))


def test_coproduct_examples():
    lat = load_lattice(TWO_POINT)
    pub, sec = lat.label("Pub"), lat.label("Sec")
    cop = coproduct_with_top(lat)
    assert not cop.flows(inl(pub), inr(pub))
    assert not cop.flows(inr(pub), inl(pub))
    assert cop.join(inl(pub), inr(sec)) == Label(COPRODUCT_TOP_NAME)
    assert cop.flows(inl(pub), inl(sec))
    assert cop.top == Label(COPRODUCT_TOP_NAME)


def test_coproduct_injections_are_order_embeddings():
    lat = load_lattice(DIAMOND)
    cop = coproduct_with_top(lat)  # construction revalidates the lattice
    for a in lat:
        for b in lat:
            assert cop.flows(inl(a), inl(b)) == lat.flows(a, b)
            assert cop.flows(inr(a), inr(b)) == lat.flows(a, b)
            assert not cop.flows(inl(a), inr(b))
            assert not cop.flows(inr(a), inl(b))
