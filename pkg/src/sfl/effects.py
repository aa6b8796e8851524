"""Effect alphabets, effect sets, effect labels, composition, and the
label/effect Galois connection.

Two alphabets exist: the state-and-exceptions alphabet {R, W, E} and the
possible-nontermination alphabet {PNT}. Effect sets are frozensets of atoms;
a policy assigns observer labels to the non-read atoms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .labels import Label, LabelLattice, NoMeet

MODE_STATE_EXN = "state-exn"
MODE_PNT = "pnt"

ALPHABETS = {
    MODE_STATE_EXN: frozenset({"R", "W", "E"}),
    MODE_PNT: frozenset({"PNT"}),
}

_ATOM_ORDER = {"R": 0, "W": 1, "E": 2, "PNT": 3}

GLOBAL_FLOW = "global"
PARTIAL = "partial"

EMPTY: frozenset = frozenset()


def effect_set(*atoms: str) -> frozenset:
    return frozenset(atoms)


def show_effect(eps: frozenset) -> str:
    return "{" + ",".join(sorted(eps, key=_ATOM_ORDER.__getitem__)) + "}"


def parse_effect(text: str, mode: str = MODE_STATE_EXN) -> frozenset:
    body = text.strip()
    if body.startswith("{") and body.endswith("}"):
        body = body[1:-1]
    atoms = [a.strip() for a in body.split(",") if a.strip()]
    alphabet = ALPHABETS[mode]
    for a in atoms:
        if a not in alphabet:
            raise ValueError(f"effect atom {a!r} is not in the {mode} alphabet")
    return frozenset(atoms)


def subsets(alphabet: frozenset) -> list[frozenset]:
    """All subsets of the alphabet, smallest first (deterministic order)."""
    atoms = sorted(alphabet, key=_ATOM_ORDER.__getitem__)
    out = []
    for mask in range(1 << len(atoms)):
        out.append(frozenset(a for i, a in enumerate(atoms) if mask >> i & 1))
    return sorted(out, key=lambda s: (len(s), sorted(_ATOM_ORDER[a] for a in s)))


@dataclass(frozen=True)
class EffectPolicy:
    """Observer-label assignment for one effect alphabet.

    `pc_state`/`pc_exn`/`pc_pnt` override the labels the pc checker compares
    against at write/throw/fix; they default to the effect labels and exist
    for the split-lattice counterexample construction.
    """

    lattice: LabelLattice
    mode: str = MODE_STATE_EXN
    l_state: Label | None = None
    l_exn: Label | None = None
    l_pnt: Label | None = None
    compose_mode: str = GLOBAL_FLOW
    pc_state: Label | None = field(default=None, compare=False)
    pc_exn: Label | None = field(default=None, compare=False)
    pc_pnt: Label | None = field(default=None, compare=False)

    @property
    def alphabet(self) -> frozenset:
        return ALPHABETS[self.mode]

    def pc_state_bound(self) -> Label:
        return self.pc_state if self.pc_state is not None else self.l_state

    def pc_exn_bound(self) -> Label:
        return self.pc_exn if self.pc_exn is not None else self.l_exn

    def pc_pnt_bound(self) -> Label:
        return self.pc_pnt if self.pc_pnt is not None else self.pnt_label()

    def pnt_label(self) -> Label:
        # Unset l_pnt means termination-insensitive: top.
        return self.l_pnt if self.l_pnt is not None else self.lattice.top


def atom_label(policy: EffectPolicy, atom: str) -> Label:
    if atom == "R":
        return policy.lattice.top
    if atom == "W":
        return policy.l_state
    if atom == "E":
        return policy.l_exn
    if atom == "PNT":
        return policy.pnt_label()
    raise ValueError(f"unknown effect atom {atom!r}")


def effect_label(policy: EffectPolicy, eps: frozenset) -> Label:
    """Greatest lower bound of the observer labels of the atoms in eps.

    Reads contribute top, so the empty set and {R} both map to top.
    Antitone in eps.
    """
    contributions = [atom_label(policy, a) for a in eps if a != "R"]
    if not contributions:
        return policy.lattice.top
    return policy.lattice.meet(contributions)


def validate_policy(policy: EffectPolicy) -> list[str]:
    """Return the list of validity violations (empty means valid)."""
    issues = []
    lat = policy.lattice
    if policy.mode == MODE_STATE_EXN:
        for name, lab in (("lState", policy.l_state), ("lExn", policy.l_exn)):
            if lab is None:
                issues.append(f"{name} is required in state-exn mode")
            elif lab not in lat:
                issues.append(f"{name}={lab} is not a lattice element")
        if (
            policy.compose_mode == GLOBAL_FLOW
            and policy.l_state in lat.elements
            and policy.l_exn in lat.elements
            and not lat.flows(policy.l_exn, policy.l_state)
        ):
            issues.append("global composition requires lExn to flow to lState")
    elif policy.mode == MODE_PNT:
        if policy.l_pnt is not None and policy.l_pnt not in lat:
            issues.append(f"lPnt={policy.l_pnt} is not a lattice element")
    else:
        issues.append(f"unknown mode {policy.mode!r}")
    if policy.compose_mode not in (GLOBAL_FLOW, PARTIAL):
        issues.append(f"unknown composition mode {policy.compose_mode!r}")
    if not issues:
        for eps in subsets(policy.alphabet):
            try:
                effect_label(policy, eps)
            except NoMeet:
                issues.append(
                    f"effect label of {show_effect(eps)} is undefined (no meet)"
                )
    return issues


def _compose2(policy: EffectPolicy, e1: frozenset, e2: frozenset, whole: frozenset) -> bool:
    if not (e1 | e2) <= whole:
        return False
    if policy.compose_mode == GLOBAL_FLOW:
        return True
    # Partial mode: a possibly-throwing prefix poisons the suffix unless
    # every effect of the suffix is visible to exception observers.
    if "E" not in e1:
        return True
    return policy.lattice.flows(policy.l_exn, effect_label(policy, e2))


def compose(policy: EffectPolicy, parts: list[frozenset], whole: frozenset) -> bool:
    """The effector composition relation <parts> >= whole.

    Global mode: union of parts contained in whole. Partial mode: the left
    fold of the binary relation, with intermediate sets the running unions.
    Nullary composition always holds; unary is containment.
    """
    for eps in list(parts) + [whole]:
        if not eps <= policy.alphabet:
            raise ValueError(f"effect set {show_effect(eps)} outside the alphabet")
    if not parts:
        return True
    if len(parts) == 1:
        return parts[0] <= whole
    if policy.compose_mode == GLOBAL_FLOW:
        union = frozenset().union(*parts)
        return union <= whole
    acc = parts[0]
    for nxt in parts[1:]:
        if not _compose2(policy, acc, nxt, acc | nxt):
            return False
        acc = acc | nxt
    return acc <= whole


def gamma(policy: EffectPolicy, label: Label) -> frozenset:
    """Largest effect set whose label sits above `label` (Galois companion)."""
    lat = policy.lattice
    if policy.mode == MODE_STATE_EXN:
        out = {"R"}
        if lat.flows(label, policy.l_state):
            out.add("W")
        if lat.flows(label, policy.l_exn):
            out.add("E")
        return frozenset(out)
    return frozenset({"PNT"}) if lat.flows(label, policy.pnt_label()) else frozenset()


@dataclass
class GaloisReport:
    ok: bool
    cases: int
    counterexamples: list


def check_galois(policy: EffectPolicy, label_fn=None) -> GaloisReport:
    """Exhaustively check: label flows to effect_label(eps) iff eps <= gamma(label)."""
    if label_fn is None:
        label_fn = effect_label
    lat = policy.lattice
    bad = []
    cases = 0
    for lab in lat:
        g = gamma(policy, lab)
        for eps in subsets(policy.alphabet):
            cases += 1
            lhs = lat.flows(lab, label_fn(policy, eps))
            rhs = eps <= g
            if lhs != rhs:
                bad.append((lab, eps, lhs, rhs))
    return GaloisReport(ok=not bad, cases=cases, counterexamples=bad)
