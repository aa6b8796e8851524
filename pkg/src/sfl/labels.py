"""Finite join-semilattices of information-flow labels.

A lattice is described by a set of named elements and directed flow edges.
Loading computes the reflexive-transitive closure, the full join table
(rejecting the description when some pair has no unique least upper bound),
and the top element.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable


class LatticeError(Exception):
    """A lattice description failed validation."""


class DuplicateElement(LatticeError):
    pass


class DanglingEdge(LatticeError):
    pass


class MissingJoin(LatticeError):
    pass


class NoTop(LatticeError):
    pass


class UnknownLabel(LatticeError):
    pass


class NoMeet(LatticeError):
    pass


@dataclass(frozen=True, order=True, slots=True)
class Label:
    name: str

    def __str__(self) -> str:
        return self.name

    def __repr__(self) -> str:
        return f"Label({self.name!r})"


COPRODUCT_TOP_NAME = "TOP*"


def inl(label: Label) -> Label:
    """Left injection into a coproduct lattice."""
    return Label(f"inl({label.name})")


def inr(label: Label) -> Label:
    """Right injection into a coproduct lattice."""
    return Label(f"inr({label.name})")


class LabelLattice:
    """Immutable finite join-semilattice over interned labels.

    `flows` is the reflexive-transitive closure of the declared edges; the
    join table is total (checked at construction) and top is the join of
    all elements.
    """

    def __init__(self, elements: Iterable[str], edges: Iterable[tuple[str, str]]):
        names = list(elements)
        if not names:
            raise NoTop("empty lattice has no top element")
        seen = set()
        for n in names:
            if n in seen:
                raise DuplicateElement(f"element {n!r} declared twice")
            seen.add(n)
        for a, b in edges:
            if a not in seen or b not in seen:
                raise DanglingEdge(f"flow {a} -> {b} mentions an undeclared element")

        self._names = tuple(names)
        self.elements = frozenset(Label(n) for n in names)
        self._flows = self._close(names, edges)
        self._join = self._build_joins()
        self.top = self._find_top()

    @staticmethod
    def _close(names, edges):
        reach = {n: {n} for n in names}
        for a, b in edges:
            reach[a].add(b)
        changed = True
        while changed:
            changed = False
            for a in names:
                extra = set()
                for b in reach[a]:
                    extra |= reach[b]
                if not extra <= reach[a]:
                    reach[a] |= extra
                    changed = True
        return frozenset((Label(a), Label(b)) for a in names for b in reach[a])

    def _build_joins(self):
        table = {}
        labs = sorted(self.elements)
        for a in labs:
            for b in labs:
                ubs = [c for c in labs if self.flows(a, c) and self.flows(b, c)]
                lubs = [u for u in ubs if all(self.flows(u, c) for c in ubs)]
                if len(lubs) != 1:
                    raise MissingJoin(
                        f"elements {a} and {b} have no unique least upper bound"
                    )
                table[(a, b)] = lubs[0]
        return table

    def _find_top(self):
        tops = [t for t in sorted(self.elements) if all(self.flows(a, t) for a in self.elements)]
        if len(tops) != 1:
            raise NoTop("no unique top element")
        return tops[0]

    def __contains__(self, label: Label) -> bool:
        return label in self.elements

    def __iter__(self):
        return iter(sorted(self.elements))

    def __len__(self) -> int:
        return len(self.elements)

    def label(self, name: str) -> Label:
        lab = Label(name)
        if lab not in self.elements:
            raise UnknownLabel(f"label {name!r} is not in the lattice")
        return lab

    def _check(self, *labels: Label) -> None:
        for lab in labels:
            if lab not in self.elements:
                raise UnknownLabel(f"label {lab.name!r} is not in the lattice")

    def flows(self, a: Label, b: Label) -> bool:
        self._check(a, b)
        return (a, b) in self._flows

    def join(self, a: Label, b: Label) -> Label:
        self._check(a, b)
        return self._join[(a, b)]

    def meet(self, labels: Iterable[Label]) -> Label:
        """Greatest lower bound of a nonempty set, or NoMeet."""
        labs = list(labels)
        if not labs:
            raise NoMeet("meet of an empty set is not defined")
        self._check(*labs)
        lbs = [c for c in sorted(self.elements) if all(self.flows(c, x) for x in labs)]
        glbs = [g for g in lbs if all(self.flows(c, g) for c in lbs)]
        if len(glbs) != 1:
            raise NoMeet(f"labels {[str(x) for x in labs]} have no greatest lower bound")
        return glbs[0]


def load_lattice(text: str) -> LabelLattice:
    """Parse a lattice description: `element NAME` and `flow A B` lines."""
    elements: list[str] = []
    edges: list[tuple[str, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "element" and len(parts) == 2:
            elements.append(parts[1])
        elif parts[0] == "flow" and len(parts) == 3:
            edges.append((parts[1], parts[2]))
        else:
            raise LatticeError(f"line {lineno}: expected `element NAME` or `flow A B`")
    return LabelLattice(elements, edges)


def coproduct_with_top(lat: LabelLattice) -> LabelLattice:
    """Two disjoint order-embedded copies of `lat` under a fresh top.

    inl(a) flows to inl(b) iff a flows to b (likewise inr); cross-side pairs
    join only at the new top.
    """
    names = [inl(a).name for a in lat] + [inr(a).name for a in lat] + [COPRODUCT_TOP_NAME]
    edges = []
    for a in lat:
        for b in lat:
            if lat.flows(a, b):
                edges.append((inl(a).name, inl(b).name))
                edges.append((inr(a).name, inr(b).name))
        edges.append((inl(a).name, COPRODUCT_TOP_NAME))
        edges.append((inr(a).name, COPRODUCT_TOP_NAME))
    return LabelLattice(names, edges)
