"""Executable property suites: bounded contextual equivalence at a label,
simulation between machine evaluation and captured pure evaluation, the
pc/effect connection lemmas, pc-boundedness, and the split-lattice
counterexample.

Equivalence verdicts from bounded context enumeration are sound refuters and
incomplete verifiers; verdicts record how many contexts were tried, and any
verdict that leaned on a fuel timeout is marked evidence-grade.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .effects import (
    EMPTY,
    MODE_PNT,
    MODE_STATE_EXN,
    EffectPolicy,
    effect_label,
    show_effect,
)
from .elaborate import capture, coerce, bind, norm_eff, monad_type, pure_type
from .errors import CheckError
from .generate import (
    HOLE,
    ContextSpec,
    ContextEnumerator,
    GenProgram,
    NotEnumerable,
    combinator_pool,
    count_values,
    enum_values,
)
from .interp import (
    DEFAULT_FUEL,
    NOT_COMPARABLE,
    Outcome,
    run,
    value_eq,
)
from .labels import Label, LabelLattice, coproduct_with_top, inl, inr
from .syntax import (
    BOOLISH,
    UNIT,
    App,
    Expr,
    Inl,
    Inr,
    Labeled,
    LabelE,
    Lam,
    LiftE,
    Match,
    Pair,
    Proj,
    Prod,
    Type,
    Unlabel,
    UnitVal,
    Var,
    Write,
    format_expr,
    format_type,
    free_vars,
    subst,
)
from .typecheck import (
    EFFECT,
    PC,
    PURE,
    check_pc,
    check_pure,
    convert_pc_expr,
    first_order,
    infer_effect,
    pc_to_effect_type,
)


class DecodeShapeError(Exception):
    pass


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------

EQUIVALENT = "equivalent"
DISTINGUISHED = "distinguished"
INCONCLUSIVE = "inconclusive"


@dataclass
class Verdict:
    status: str
    contexts_tried: int
    witness: dict | None = None
    timeouts: int = 0
    evidence_grade: bool = False

    def witness_text(self) -> str:
        if not self.witness:
            return ""
        parts = [f"context: {format_expr(self.witness['context'])}"]
        if self.witness.get("state") is not None:
            parts.append(f"state: {format_expr(self.witness['state'])}")
        o1, o2 = self.witness["observations"]
        parts.append(f"left: {o1}")
        parts.append(f"right: {o2}")
        return "; ".join(parts)


# ---------------------------------------------------------------------------
# Prepared contexts (cached typability data)
# ---------------------------------------------------------------------------


@dataclass
class PreparedContext:
    expr: Expr
    # pc system only: pairs (entry pc, pc at the hole occurrence)
    entries: tuple = ()


def _hole_pc(policy, gamma, pc, e, sigma):
    """The pc at which the hole variable is looked up (None if no hole)."""
    lat = policy.lattice
    found = []

    def walk(g, p, x):
        from .syntax import (
            Fix, Inl, Inr, LabelE, Lam, Match, Pair, Proj, Read, Seq, Throw,
            TryCatch, Unlabel, UnitVal, Var, Write, App, LiftE,
        )
        if isinstance(x, Var):
            if x.name == HOLE:
                found.append(p)
            return
        if isinstance(x, (UnitVal, Read, Throw)):
            return
        if isinstance(x, (Inl, Inr, LabelE, Proj, Write, LiftE)):
            walk(g, p, x.body)
            return
        if isinstance(x, Pair):
            walk(g, p, x.fst)
            walk(g, p, x.snd)
            return
        if isinstance(x, Match):
            walk(g, p, x.scrutinee)
            st = check_pc(policy, g, p, x.scrutinee, sigma, enforce_policy=False)
            walk({**g, x.left_var: st.left}, p, x.left_body)
            walk({**g, x.right_var: st.right}, p, x.right_body)
            return
        if isinstance(x, Lam):
            latent = x.latent_pc if x.latent_pc is not None else p
            walk({**g, x.var: x.var_type}, latent, x.body)
            return
        if isinstance(x, App):
            walk(g, p, x.fn)
            walk(g, p, x.arg)
            return
        if isinstance(x, Unlabel):
            walk(g, p, x.labeled)
            lt = check_pc(policy, g, p, x.labeled, sigma, enforce_policy=False)
            walk({**g, x.var: lt.body}, lat.join(p, lt.label), x.body)
            return
        if isinstance(x, TryCatch):
            walk(g, p, x.try_body)
            walk(g, p, x.catch_body)
            return
        if isinstance(x, (Fix, Seq)):
            walk({**g, x.var: getattr(x, "annot", UNIT)}, p, x.body)
            return
        raise TypeError(x)

    walk(dict(gamma), pc, e)
    return found


class ContextBank:
    """Enumerates and type-prepares contexts once per (hole type, attacker),
    lazily, so refutation runs stop at the first witness while full sweeps
    reuse the cached prefix.

    For the pc system, typability of a plugged program is compositional:
    the context must check with the hole as a variable at some entry pc, and
    the plugged program must check at the pc the hole occurrence sees.
    """

    def __init__(self, policy: EffectPolicy, sigma: Type | None, system: str):
        self.policy = policy
        self.sigma = sigma
        self.system = system
        self.cache: dict = {}

    def _prepare(self, spec: ContextSpec, ctx):
        gamma = {HOLE: spec.hole_type}
        target = Labeled(spec.output_label, BOOLISH)
        if self.system == PURE:
            try:
                if check_pure(self.policy, gamma, ctx) == target:
                    return PreparedContext(ctx)
            except CheckError:
                return None
            return None
        entries = []
        for pc in self.policy.lattice:
            try:
                if check_pc(
                    self.policy, gamma, pc, ctx, self.sigma, enforce_policy=False
                ) != target:
                    continue
            except CheckError:
                continue
            occs = _hole_pc(self.policy, gamma, pc, ctx, self.sigma)
            entries.append((pc, tuple(occs)))
        if entries:
            return PreparedContext(ctx, tuple(entries))
        return None

    def prepared(self, spec: ContextSpec):
        """Iterate prepared contexts, extending the cached prefix on demand."""
        state = self.cache.get(spec)
        if state is None:
            enum = ContextEnumerator(self.policy, self.sigma, self.system, spec)
            state = ([], enum.contexts())
            self.cache[spec] = state
        done, source = state
        yield from done
        for ctx in source:
            prep = self._prepare(spec, ctx)
            if prep is None:
                continue
            done.append(prep)
            yield prep


def _valid_pcs(policy, e, sigma) -> frozenset:
    """All pcs at which a closed expression checks (empty if none)."""
    ok = []
    for pc in policy.lattice:
        try:
            check_pc(policy, {}, pc, e, sigma, enforce_policy=False)
            ok.append(pc)
        except CheckError:
            continue
    return frozenset(ok)


def _usable(prep: PreparedContext, valid: frozenset) -> bool:
    if not prep.entries:
        return False
    for _, occs in prep.entries:
        if all(o in valid for o in occs):
            return True
    return False


# ---------------------------------------------------------------------------
# Equivalence checkers
# ---------------------------------------------------------------------------


def check_l_equiv(
    policy: EffectPolicy,
    e1: Expr,
    e2: Expr,
    l_atk: Label,
    spec: ContextSpec | None = None,
    fuel: int = DEFAULT_FUEL,
    bank: ContextBank | None = None,
) -> Verdict:
    """Bounded Definition-2.1 check in the pure language: attacker contexts
    only constrain runs where both sides reach a value."""
    t1 = check_pure(policy, {}, e1)
    t2 = check_pure(policy, {}, e2)
    if t1 != t2:
        raise ValueError("compared programs must share a type")
    if spec is None:
        spec = ContextSpec(hole_type=t1, output_label=l_atk)
    bank = bank or ContextBank(policy, None, PURE)
    tried = timeouts = 0
    for prep in bank.prepared(spec):
        tried += 1
        o1 = run(subst(prep.expr, HOLE, e1), fuel=fuel)
        o2 = run(subst(prep.expr, HOLE, e2), fuel=fuel)
        if o1.kind == "timeout" or o2.kind == "timeout":
            timeouts += 1
            continue
        if o1.kind == "value" and o2.kind == "value":
            if value_eq(o1.value, o2.value) is False:
                return Verdict(
                    DISTINGUISHED, tried,
                    {"context": prep.expr, "state": None, "observations": (o1, o2)},
                    timeouts,
                )
    if timeouts:
        return Verdict(INCONCLUSIVE, tried, timeouts=timeouts, evidence_grade=True)
    return Verdict(EQUIVALENT, tried)


def check_state_exn_equiv(
    policy: EffectPolicy,
    sigma: Type,
    e1: Expr,
    e2: Expr,
    l_atk: Label,
    spec: ContextSpec | None = None,
    fuel: int = DEFAULT_FUEL,
    bank: ContextBank | None = None,
    state_limit: int = 16,
) -> Verdict:
    """Bounded Definition-3.2 check: run plugged programs from every state;
    outputs are compared when exception observers include the attacker, final
    states when state observers do."""
    lat = policy.lattice
    see_out = lat.flows(policy.l_exn, l_atk)
    see_state = lat.flows(policy.l_state, l_atk)
    if spec is None:
        t1 = _some_type(policy, e1, sigma)
        spec = ContextSpec(hole_type=t1, output_label=l_atk)
    bank = bank or ContextBank(policy, sigma, PC)
    states = enum_values(sigma, limit=state_limit)
    v1 = _valid_pcs(policy, e1, sigma)
    v2 = _valid_pcs(policy, e2, sigma)
    tried = timeouts = 0
    for prep in bank.prepared(spec):
        if not (_usable(prep, v1) and _usable(prep, v2)):
            continue
        tried += 1
        c1 = subst(prep.expr, HOLE, e1)
        c2 = subst(prep.expr, HOLE, e2)
        for s in states:
            o1 = run(c1, initial_state=s, fuel=fuel)
            o2 = run(c2, initial_state=s, fuel=fuel)
            if o1.kind == "timeout" or o2.kind == "timeout":
                timeouts += 1
                continue
            bad = False
            if see_out:
                if o1.kind != o2.kind:
                    bad = True
                elif o1.kind == "value" and value_eq(o1.value, o2.value) is False:
                    bad = True
            if see_state and value_eq(o1.state, o2.state) is False:
                bad = True
            if bad:
                return Verdict(
                    DISTINGUISHED, tried,
                    {"context": prep.expr, "state": s, "observations": (o1, o2)},
                    timeouts,
                )
    if timeouts:
        return Verdict(INCONCLUSIVE, tried, timeouts=timeouts, evidence_grade=True)
    return Verdict(EQUIVALENT, tried)


def check_ts_equiv(
    policy: EffectPolicy,
    e1: Expr,
    e2: Expr,
    l_atk: Label,
    spec: ContextSpec | None = None,
    fuel: int = DEFAULT_FUEL,
    system: str = PURE,
    bank: ContextBank | None = None,
) -> Verdict:
    """Bounded Definition-4.1 check: termination class is observable.
    Timeouts stand in for divergence, so any verdict that depends on one is
    evidence-grade."""
    if spec is None:
        if system == PURE:
            t1 = check_pure(policy, {}, e1)
        else:
            t1 = _some_type(policy, e1, None)
        spec = ContextSpec(hole_type=t1, output_label=l_atk)
    bank = bank or ContextBank(policy, None, system)
    evidence = False
    tried = 0
    if system != PURE:
        v1 = _valid_pcs(policy, e1, None)
        v2 = _valid_pcs(policy, e2, None)
    for prep in bank.prepared(spec):
        if system != PURE and not (_usable(prep, v1) and _usable(prep, v2)):
            continue
        tried += 1
        o1 = run(subst(prep.expr, HOLE, e1), fuel=fuel)
        o2 = run(subst(prep.expr, HOLE, e2), fuel=fuel)
        if o1.kind == "timeout" and o2.kind == "timeout":
            evidence = True
            continue
        if (o1.kind == "timeout") != (o2.kind == "timeout"):
            return Verdict(
                DISTINGUISHED, tried,
                {"context": prep.expr, "state": None, "observations": (o1, o2)},
                evidence_grade=True,
            )
        if o1.kind == "value" and o2.kind == "value":
            if value_eq(o1.value, o2.value) is False:
                return Verdict(
                    DISTINGUISHED, tried,
                    {"context": prep.expr, "state": None, "observations": (o1, o2)},
                )
    return Verdict(EQUIVALENT, tried, evidence_grade=evidence)


def _some_type(policy, e, sigma):
    last = None
    for pc in policy.lattice:
        try:
            return check_pc(policy, {}, pc, e, sigma, enforce_policy=False)
        except CheckError as exc:
            last = exc
    raise last


# ---------------------------------------------------------------------------
# Simulation and decoding
# ---------------------------------------------------------------------------


def decode(
    policy: EffectPolicy,
    sigma: Type | None,
    eps: frozenset,
    value: Expr,
    state: Expr | None = None,
    fuel: int = DEFAULT_FUEL,
) -> Outcome:
    """Invert the monadic encoding of an evaluated capture result."""
    n = norm_eff(policy.mode, eps)
    if n == EMPTY:
        return Outcome("value", value=value, state=state)
    if n == frozenset({"PNT"}):
        if isinstance(value, LiftE):
            return Outcome("value", value=value.body)
        raise DecodeShapeError(format_expr(value))
    if n == frozenset({"E"}):
        return _decode_exn(policy, value, state)
    applied = run(App(value, state), fuel=fuel)
    if applied.kind != "value":
        return applied
    v = applied.value
    if n == frozenset({"R"}):
        return Outcome("value", value=v, state=state)
    if n == frozenset({"R", "W"}):
        if isinstance(v, Pair):
            return Outcome("value", value=v.fst, state=v.snd)
        raise DecodeShapeError(format_expr(v))
    if n == frozenset({"R", "E"}):
        return _decode_exn(policy, v, state)
    if n == frozenset({"R", "W", "E"}):
        if isinstance(v, Pair):
            return _decode_exn(policy, v.fst, v.snd)
        raise DecodeShapeError(format_expr(v))
    raise DecodeShapeError(show_effect(eps))


def _decode_exn(policy, v, state):
    if isinstance(v, LabelE) and v.label == policy.l_exn:
        if isinstance(v.body, Inl):
            return Outcome("thrown", state=state)
        if isinstance(v.body, Inr):
            return Outcome("value", value=v.body.body, state=state)
    raise DecodeShapeError(format_expr(v))


@dataclass
class SimReport:
    cases: int = 0
    skipped: int = 0
    mismatches: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches


def _closings(gamma: dict, limit: int = 32):
    """All instantiations of a context: first-order variables by value
    enumeration, function-typed ones from the combinator pool."""
    items = sorted(gamma.items())
    combos: list[dict] = [{}]
    for name, t in items:
        try:
            vals = enum_values(t, limit=limit)
        except NotEnumerable:
            vals = combinator_pool(t)
        combos = [{**c, name: v} for c in combos for v in vals]
        if len(combos) > limit:
            combos = combos[:limit]
    return combos


def _close(e: Expr, closing: dict) -> Expr:
    for name, v in closing.items():
        e = subst(e, name, v)
    return e


def check_simulation(
    policy: EffectPolicy,
    sigma: Type | None,
    gamma: dict,
    e: Expr,
    fuel: int = DEFAULT_FUEL,
    state_limit: int = 16,
) -> SimReport:
    """Machine evaluation and decoded pure evaluation agree on every
    (closing, state) pair."""
    report = SimReport()
    states = enum_values(sigma, limit=state_limit) if sigma is not None else [None]
    # First-order closings substitute the same values on both sides of the
    # translation, so one capture of the open program serves every closing.
    shared = None
    if all(first_order(t) for t in gamma.values()):
        shared = capture(policy, sigma, gamma, e)
    for closing in _closings(gamma):
        closed = _close(e, closing)
        if shared is not None:
            rho0, _, eps = shared
            rho = _close(rho0, closing)
        else:
            rho, _, eps = capture(policy, sigma, {}, closed)
        rho_out = run(rho, fuel=fuel)
        for s in states:
            report.cases += 1
            if policy.mode == MODE_STATE_EXN:
                machine = run(closed, initial_state=s, fuel=fuel)
            else:
                machine = run(closed, fuel=fuel)
            if rho_out.kind == "timeout":
                decoded = rho_out
            else:
                decoded = decode(policy, sigma, eps, rho_out.value, s, fuel=fuel)
            ok, why = _outcomes_agree(machine, decoded, policy.mode)
            if why == "skip":
                report.skipped += 1
            elif not ok:
                report.mismatches.append(
                    {
                        "expr": closed,
                        "state": s,
                        "machine": machine,
                        "decoded": decoded,
                    }
                )
    return report


def _outcomes_agree(machine: Outcome, decoded: Outcome, mode: str):
    if machine.kind != decoded.kind:
        return False, "kind"
    if machine.kind == "timeout":
        return True, "evidence"
    if machine.kind == "thrown":
        if mode == MODE_STATE_EXN:
            eq = value_eq(machine.state, decoded.state)
            return (eq is True), ("skip" if eq is NOT_COMPARABLE else "state")
        return True, ""
    eqv = value_eq(machine.value, decoded.value)
    if eqv is NOT_COMPARABLE:
        return True, "skip"
    if eqv is not True:
        return False, "value"
    if mode == MODE_STATE_EXN:
        eqs = value_eq(machine.state, decoded.state)
        if eqs is NOT_COMPARABLE:
            return True, "skip"
        return (eqs is True), "state"
    return True, ""


# ---------------------------------------------------------------------------
# Lemma suites, pc-boundedness, split-lattice demo
# ---------------------------------------------------------------------------


@dataclass
class LemmaReport:
    cases: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _converted(policy, prog: GenProgram, sigma):
    gamma_e = {x: pc_to_effect_type(policy, t) for x, t in prog.gamma.items()}
    body_e = convert_pc_expr(policy, prog.gamma, prog.pc, prog.body, sigma)
    return gamma_e, body_e


def check_pc_effect_lemmas(
    policy: EffectPolicy,
    sigma: Type | None,
    corpus: list[GenProgram],
    fuel: int = DEFAULT_FUEL,
) -> LemmaReport:
    """Every pc-well-typed program also effect-checks after conversion, and
    its principal effect respects the pc bounds (no W above lState, no E
    above lExn, empty and terminating above lPnt)."""
    lat = policy.lattice
    report = LemmaReport()
    for prog in corpus:
        report.cases += 1
        gamma_e, body_e = _converted(policy, prog, sigma)
        try:
            t, eps = infer_effect(policy, gamma_e, body_e, sigma, enforce_policy=False)
        except CheckError as exc:
            report.violations.append({"prog": prog, "why": f"conversion fails: {exc}"})
            continue
        if t != pc_to_effect_type(policy, prog.type):
            report.violations.append({"prog": prog, "why": "translated type differs"})
            continue
        if policy.mode == MODE_STATE_EXN:
            if not lat.flows(prog.pc, policy.l_state) and "W" in eps:
                report.violations.append({"prog": prog, "why": "W above lState"})
            if not lat.flows(prog.pc, policy.l_exn) and "E" in eps:
                report.violations.append({"prog": prog, "why": "E above lExn"})
        else:
            if not lat.flows(prog.pc, policy.pnt_label()):
                if eps != EMPTY:
                    report.violations.append({"prog": prog, "why": "PNT above lPnt"})
                    continue
                for closing in _closings(prog.gamma):
                    out = run(_close(prog.body, closing), fuel=fuel)
                    if out.kind == "timeout":
                        report.violations.append(
                            {"prog": prog, "why": "diverged though pc above lPnt"}
                        )
                        break
    return report


def check_pc_bounded(
    policy: EffectPolicy, sigma: Type | None, corpus: list[GenProgram]
) -> LemmaReport:
    """pc flows to the label of the principal effect (standard policies)."""
    report = LemmaReport()
    for prog in corpus:
        report.cases += 1
        gamma_e, body_e = _converted(policy, prog, sigma)
        t, eps = infer_effect(policy, gamma_e, body_e, sigma, enforce_policy=False)
        if not policy.lattice.flows(prog.pc, effect_label(policy, eps)):
            report.violations.append(
                {"prog": prog, "why": f"pc {prog.pc} above {effect_label(policy, eps)}"}
            )
    return report


@dataclass
class CoproductDemo:
    lattice: LabelLattice
    policy: EffectPolicy
    program: Expr
    pc: Label
    accepted: bool
    effect: frozenset
    effect_lab: Label
    pc_to_eff: bool
    eff_to_pc: bool
    standard_bounded: bool

    @property
    def ok(self) -> bool:
        return (
            self.accepted
            and not self.pc_to_eff
            and not self.eff_to_pc
            and self.standard_bounded
        )


def coproduct_counterexample_demo(base: LabelLattice) -> CoproductDemo:
    """Split the label space into a data side and an effect side: a write
    accepted at pc=inl(l) carries effect label inr(l), incomparable in both
    directions, while the same program under the standard policy is
    pc-bounded."""
    cop = coproduct_with_top(base)
    lo = min(base)
    data = cop.label(inl(lo).name)
    eff = cop.label(inr(lo).name)
    pol = EffectPolicy(
        cop,
        MODE_STATE_EXN,
        l_state=eff,
        l_exn=eff,
        pc_state=data,
        pc_exn=data,
    )
    sigma = UNIT
    program = Write(UnitVal())
    accepted = True
    try:
        check_pc(pol, {}, data, program, sigma)
    except CheckError:
        accepted = False
    _, eps = infer_effect(pol, {}, program, sigma)
    lab = effect_label(pol, eps)
    std = EffectPolicy(base, MODE_STATE_EXN, l_state=lo, l_exn=lo)
    check_pc(std, {}, lo, program, sigma)
    _, eps_std = infer_effect(std, {}, program, sigma)
    return CoproductDemo(
        lattice=cop,
        policy=pol,
        program=program,
        pc=data,
        accepted=accepted,
        effect=eps,
        effect_lab=lab,
        pc_to_eff=cop.flows(data, lab),
        eff_to_pc=cop.flows(lab, data),
        standard_bounded=base.flows(lo, effect_label(std, eps_std)),
    )


# ---------------------------------------------------------------------------
# Noninterference composites
# ---------------------------------------------------------------------------


def composite(r_prog: GenProgram, x: str, value: Expr) -> Expr:
    """`let x = value in r`, desugared, with the lambda latent at r's pc."""
    t1 = r_prog.gamma[x]
    lam = Lam(x, t1, r_prog.body, latent_pc=r_prog.pc)
    return App(lam, value)


def composite_pure(r_prog: GenProgram, x: str, value: Expr) -> Expr:
    t1 = r_prog.gamma[x]
    return App(Lam(x, t1, r_prog.body), value)


def captured_seq_paths(
    policy: EffectPolicy,
    sigma: Type | None,
    p1: Expr,
    x: str,
    t1: Type,
    p2: Expr,
):
    """The two elaboration routes for `let x = p1 in p2`: capture of the
    whole sequence, and the composite built from the parts with bind and
    coercions. Returns (route_a, route_b, effect, result_type)."""
    _, e1 = infer_effect(policy, {}, p1, sigma)
    t2, e2 = infer_effect(policy, {x: t1}, p2, sigma)
    eps = e1 | e2
    whole = App(Lam(x, t1, p2), p1)
    rho_a, _, eps_a = capture(policy, sigma, {}, whole)
    assert eps_a == eps
    rho1, _, _ = capture(policy, sigma, {}, p1)
    rho2, _, _ = capture(policy, sigma, {x: t1}, p2)
    t1p = pure_type(policy, sigma, t1)
    t2p = pure_type(policy, sigma, t2)

    def co(efrom, eto, tau, m):
        if norm_eff(policy.mode, efrom) == norm_eff(policy.mode, eto):
            return m
        return App(coerce(policy, sigma, efrom, eto, tau), m)

    if norm_eff(policy.mode, eps) == EMPTY:
        rho_b = App(Lam(x, t1p, rho2), rho1)
    else:
        rho_b = App(
            App(bind(policy, sigma, eps, t1p, t2p), co(e1, eps, t1p, rho1)),
            Lam(x, t1p, co(e2, eps, t2p, rho2)),
        )
    return rho_a, rho_b, eps, t2


def observations_agree(
    policy: EffectPolicy,
    sigma: Type | None,
    eps: frozenset,
    rho_a: Expr,
    rho_b: Expr,
    fuel: int = DEFAULT_FUEL,
    state_limit: int = 16,
):
    """Observational equality of two captured terms: evaluate, decode against
    every state, compare first-order results. Returns (agree, n, skipped)."""
    states = enum_values(sigma, limit=state_limit) if sigma is not None else [None]
    oa = run(rho_a, fuel=fuel)
    ob = run(rho_b, fuel=fuel)
    if oa.kind == "timeout" or ob.kind == "timeout":
        return oa.kind == ob.kind, len(states), 0
    checked = skipped = 0
    for s in states:
        da = decode(policy, sigma, eps, oa.value, s, fuel=fuel)
        db = decode(policy, sigma, eps, ob.value, s, fuel=fuel)
        ok, why = _outcomes_agree(da, db, policy.mode)
        if why == "skip":
            skipped += 1
            continue
        checked += 1
        if not ok:
            return False, checked, skipped
    return True, checked, skipped
