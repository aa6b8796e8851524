"""Algorithmic typing for the three calculi.

All checkers are synthesis-only: annotations on inl/inr/throw/fix (and the
optional latent markers on lambdas) make every rule syntax-directed. The pc
checker threads the program-counter label downward, raising it at unlabel;
the effect checker returns the principal (smallest) effect.

A fourth checker, `check_weak`, implements the naive effectful system with
no pc and no effect accounting; it exists as the insecure baseline that the
refined systems are measured against.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import protection
from .effects import (
    EMPTY,
    GLOBAL_FLOW,
    MODE_PNT,
    MODE_STATE_EXN,
    EffectPolicy,
    effect_label,
    compose,
    show_effect,
)
from .errors import (
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
from .labels import Label
from .syntax import (
    UNIT,
    App,
    Expr,
    Fix,
    FunEff,
    FunPc,
    FunPure,
    Inl,
    Inr,
    Labeled,
    LabelE,
    Lam,
    Let,
    Lift,
    LiftE,
    Match,
    Pair,
    Proj,
    Program,
    Prod,
    Read,
    Seq,
    Sum,
    Throw,
    TryCatch,
    Type,
    Unit,
    Unlabel,
    UnitVal,
    Var,
    Write,
    desugar,
    format_type,
)

PURE = "pure"
PC = "pc"
EFFECT = "effect"
WEAK = "weak"

PNT_SET = frozenset({"PNT"})


@dataclass(frozen=True)
class Judgment:
    system: str
    type: Type
    effect: frozenset | None = None


def _lookup(gamma: dict, name: str, pos) -> Type:
    try:
        return gamma[name]
    except KeyError:
        raise CheckError(UNBOUND_VAR, f"variable {name!r} is not bound", pos) from None


def _expect_eq(actual: Type, expected: Type, what: str, pos) -> None:
    if actual != expected:
        raise CheckError(
            MISMATCH,
            f"{what}: expected {format_type(expected)}, got {format_type(actual)}",
            pos,
        )


def validate_annotation(system: str, t: Type, policy: EffectPolicy | None = None) -> None:
    """Reject annotation types that belong to another calculus."""
    if isinstance(t, Unit):
        return
    if isinstance(t, (Sum, Prod)):
        validate_annotation(system, t.left, policy)
        validate_annotation(system, t.right, policy)
        return
    if isinstance(t, Labeled):
        validate_annotation(system, t.body, policy)
        return
    if isinstance(t, FunPure):
        if system not in (PURE, WEAK):
            raise CheckError(WRONG_CALCULUS, f"pure arrow type in the {system} system")
        validate_annotation(system, t.arg, policy)
        validate_annotation(system, t.res, policy)
        return
    if isinstance(t, FunPc):
        if system != PC:
            raise CheckError(WRONG_CALCULUS, f"pc arrow type in the {system} system")
        validate_annotation(system, t.arg, policy)
        validate_annotation(system, t.res, policy)
        return
    if isinstance(t, FunEff):
        if system != EFFECT:
            raise CheckError(WRONG_CALCULUS, f"effect arrow type in the {system} system")
        if policy is not None and not t.eff <= policy.alphabet:
            raise CheckError(
                WRONG_CALCULUS, f"latent effect {show_effect(t.eff)} outside the alphabet"
            )
        validate_annotation(system, t.arg, policy)
        validate_annotation(system, t.res, policy)
        return
    if isinstance(t, Lift):
        if system != PURE:
            raise CheckError(WRONG_CALCULUS, f"Lift type in the {system} system")
        validate_annotation(system, t.body, policy)
        return
    raise TypeError(f"not a type: {t!r}")


def first_order(t: Type) -> bool:
    if isinstance(t, Unit):
        return True
    if isinstance(t, (Sum, Prod)):
        return first_order(t.left) and first_order(t.right)
    if isinstance(t, Labeled):
        return first_order(t.body)
    return False


def is_pointed(t: Type) -> bool:
    """Derivability of the pointedness judgment for pure types."""
    if isinstance(t, Lift):
        return True
    if isinstance(t, Prod):
        return is_pointed(t.left) and is_pointed(t.right)
    if isinstance(t, Labeled):
        return is_pointed(t.body)
    if isinstance(t, FunPure):
        return is_pointed(t.res)
    if isinstance(t, (Unit, Sum)):
        return False
    if isinstance(t, (FunPc, FunEff)):
        raise CheckError(WRONG_CALCULUS, "pointedness is defined on pure types only")
    raise TypeError(f"not a type: {t!r}")


def _no_sugar(e: Expr) -> None:
    if isinstance(e, Let):
        raise CheckError(WRONG_CALCULUS, "let must be desugared before checking", e.pos)


# ---------------------------------------------------------------------------
# Pure system (with pointed types, lift, seq, fix)
# ---------------------------------------------------------------------------


def check_pure(policy: EffectPolicy, gamma: dict, e: Expr) -> Type:
    _no_sugar(e)
    if isinstance(e, Var):
        return _lookup(gamma, e.name, e.pos)
    if isinstance(e, UnitVal):
        return UNIT
    if isinstance(e, Pair):
        return Prod(check_pure(policy, gamma, e.fst), check_pure(policy, gamma, e.snd))
    if isinstance(e, Proj):
        t = check_pure(policy, gamma, e.body)
        if not isinstance(t, Prod):
            raise CheckError(MISMATCH, f"projection from non-product {format_type(t)}", e.pos)
        return t.left if e.index == 1 else t.right
    if isinstance(e, (Inl, Inr)):
        validate_annotation(PURE, e.annot)
        if not isinstance(e.annot, Sum):
            raise CheckError(MISMATCH, "injection annotation must be a sum type", e.pos)
        side = e.annot.left if isinstance(e, Inl) else e.annot.right
        _expect_eq(check_pure(policy, gamma, e.body), side, "injection payload", e.pos)
        return e.annot
    if isinstance(e, Match):
        st = check_pure(policy, gamma, e.scrutinee)
        if not isinstance(st, Sum):
            raise CheckError(MISMATCH, f"match on non-sum {format_type(st)}", e.pos)
        lt = check_pure(policy, {**gamma, e.left_var: st.left}, e.left_body)
        rt = check_pure(policy, {**gamma, e.right_var: st.right}, e.right_body)
        _expect_eq(rt, lt, "match branches", e.pos)
        return lt
    if isinstance(e, Lam):
        validate_annotation(PURE, e.var_type)
        body = check_pure(policy, {**gamma, e.var: e.var_type}, e.body)
        return FunPure(e.var_type, body)
    if isinstance(e, App):
        ft = check_pure(policy, gamma, e.fn)
        if not isinstance(ft, FunPure):
            raise CheckError(MISMATCH, f"application of non-function {format_type(ft)}", e.pos)
        _expect_eq(check_pure(policy, gamma, e.arg), ft.arg, "application argument", e.pos)
        return ft.res
    if isinstance(e, LabelE):
        return Labeled(e.label, check_pure(policy, gamma, e.body))
    if isinstance(e, Unlabel):
        lt = check_pure(policy, gamma, e.labeled)
        if not isinstance(lt, Labeled):
            raise CheckError(MISMATCH, f"unlabel of unlabeled {format_type(lt)}", e.pos)
        body = check_pure(policy, {**gamma, e.var: lt.body}, e.body)
        if not protection.protects_pure(policy, lt.label, body):
            raise CheckError(
                PROTECTION_FAIL,
                f"label {lt.label} is not protected by {format_type(body)}",
                e.pos,
            )
        return body
    if isinstance(e, Fix):
        validate_annotation(PURE, e.annot)
        if not is_pointed(e.annot):
            raise CheckError(NOT_POINTED, f"{format_type(e.annot)} is not pointed", e.pos)
        body = check_pure(policy, {**gamma, e.var: e.annot}, e.body)
        _expect_eq(body, e.annot, "fix body", e.pos)
        return e.annot
    if isinstance(e, LiftE):
        return Lift(check_pure(policy, gamma, e.body))
    if isinstance(e, Seq):
        ft = check_pure(policy, gamma, e.first)
        if not isinstance(ft, Lift):
            raise CheckError(MISMATCH, f"seq of non-lifted {format_type(ft)}", e.pos)
        body = check_pure(policy, {**gamma, e.var: ft.body}, e.body)
        if not is_pointed(body):
            raise CheckError(NOT_POINTED, f"{format_type(body)} is not pointed", e.pos)
        return body
    if isinstance(e, (Read, Write, Throw, TryCatch)):
        raise CheckError(WRONG_CALCULUS, "effectful construct in the pure system", e.pos)
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# pc system
# ---------------------------------------------------------------------------


def _require_policy_flow(policy: EffectPolicy) -> None:
    # The global-composition state-exn system is only sound when exception
    # observers can also observe state; reject programs checked under a
    # policy that violates it (partial composition lifts the restriction).
    if (
        policy.mode == MODE_STATE_EXN
        and policy.compose_mode == GLOBAL_FLOW
        and not policy.lattice.flows(policy.l_exn, policy.l_state)
    ):
        raise CheckError(
            PROTECTION_FAIL,
            f"policy requires lExn={policy.l_exn} to flow to lState={policy.l_state}",
        )


def check_pc(
    policy: EffectPolicy,
    gamma: dict,
    pc: Label,
    e: Expr,
    sigma: Type | None = None,
    fixvars: frozenset = frozenset(),
    enforce_policy: bool = True,
) -> Type:
    if enforce_policy:
        _require_policy_flow(policy)
    return _check_pc(policy, gamma, pc, e, sigma, fixvars)


def _check_pc(policy, gamma, pc, e, sigma, fixvars) -> Type:
    lat = policy.lattice
    _no_sugar(e)

    def rec(g, p, x, fv=fixvars):
        return _check_pc(policy, g, p, x, sigma, fv)

    if isinstance(e, Var):
        t = _lookup(gamma, e.name, e.pos)
        if e.name in fixvars and not lat.flows(pc, policy.pc_pnt_bound()):
            # A recursive reference may diverge; it is only safe where the
            # context may already observe nontermination.
            raise CheckError(
                PC_TOO_HIGH,
                f"recursive variable {e.name!r} used at pc {pc} above lPnt",
                e.pos,
            )
        return t
    if isinstance(e, UnitVal):
        return UNIT
    if isinstance(e, Pair):
        return Prod(rec(gamma, pc, e.fst), rec(gamma, pc, e.snd))
    if isinstance(e, Proj):
        t = rec(gamma, pc, e.body)
        if not isinstance(t, Prod):
            raise CheckError(MISMATCH, f"projection from non-product {format_type(t)}", e.pos)
        return t.left if e.index == 1 else t.right
    if isinstance(e, (Inl, Inr)):
        validate_annotation(PC, e.annot, policy)
        if not isinstance(e.annot, Sum):
            raise CheckError(MISMATCH, "injection annotation must be a sum type", e.pos)
        side = e.annot.left if isinstance(e, Inl) else e.annot.right
        _expect_eq(rec(gamma, pc, e.body), side, "injection payload", e.pos)
        return e.annot
    if isinstance(e, Match):
        st = rec(gamma, pc, e.scrutinee)
        if not isinstance(st, Sum):
            raise CheckError(MISMATCH, f"match on non-sum {format_type(st)}", e.pos)
        lt = rec({**gamma, e.left_var: st.left}, pc, e.left_body, fixvars - {e.left_var})
        rt = rec({**gamma, e.right_var: st.right}, pc, e.right_body, fixvars - {e.right_var})
        _expect_eq(rt, lt, "match branches", e.pos)
        return lt
    if isinstance(e, Lam):
        validate_annotation(PC, e.var_type, policy)
        latent = e.latent_pc if e.latent_pc is not None else pc
        body = rec({**gamma, e.var: e.var_type}, latent, e.body, fixvars - {e.var})
        return FunPc(e.var_type, latent, body)
    if isinstance(e, App):
        ft = rec(gamma, pc, e.fn)
        if not isinstance(ft, FunPc):
            raise CheckError(MISMATCH, f"application of non-function {format_type(ft)}", e.pos)
        _expect_eq(rec(gamma, pc, e.arg), ft.arg, "application argument", e.pos)
        if not lat.flows(pc, ft.pc):
            raise CheckError(
                PC_TOO_HIGH, f"call at pc {pc} to a function latent at {ft.pc}", e.pos
            )
        return ft.res
    if isinstance(e, LabelE):
        return Labeled(e.label, rec(gamma, pc, e.body))
    if isinstance(e, Unlabel):
        lt = rec(gamma, pc, e.labeled)
        if not isinstance(lt, Labeled):
            raise CheckError(MISMATCH, f"unlabel of unlabeled {format_type(lt)}", e.pos)
        raised = lat.join(pc, lt.label)
        body = rec({**gamma, e.var: lt.body}, raised, e.body, fixvars - {e.var})
        if not protection.protects_pc(policy, lt.label, body):
            raise CheckError(
                PROTECTION_FAIL,
                f"label {lt.label} is not protected by {format_type(body)}",
                e.pos,
            )
        return body
    if isinstance(e, Read):
        if policy.mode != MODE_STATE_EXN:
            raise CheckError(WRONG_CALCULUS, "read outside state-exn mode", e.pos)
        if sigma is None:
            raise CheckError(STATE_TYPE_INVALID, "no state type in scope", e.pos)
        return sigma
    if isinstance(e, Write):
        if policy.mode != MODE_STATE_EXN:
            raise CheckError(WRONG_CALCULUS, "write outside state-exn mode", e.pos)
        if sigma is None:
            raise CheckError(STATE_TYPE_INVALID, "no state type in scope", e.pos)
        _expect_eq(rec(gamma, pc, e.body), sigma, "written value", e.pos)
        if not lat.flows(pc, policy.pc_state_bound()):
            raise CheckError(PC_TOO_HIGH, f"write at pc {pc} above lState", e.pos)
        return UNIT
    if isinstance(e, Throw):
        if policy.mode != MODE_STATE_EXN:
            raise CheckError(WRONG_CALCULUS, "throw outside state-exn mode", e.pos)
        validate_annotation(PC, e.annot, policy)
        if not lat.flows(pc, policy.pc_exn_bound()):
            raise CheckError(PC_TOO_HIGH, f"throw at pc {pc} above lExn", e.pos)
        return e.annot
    if isinstance(e, TryCatch):
        if policy.mode != MODE_STATE_EXN:
            raise CheckError(WRONG_CALCULUS, "try/catch outside state-exn mode", e.pos)
        tt = rec(gamma, pc, e.try_body)
        ct = rec(gamma, pc, e.catch_body)
        _expect_eq(ct, tt, "try and catch branches", e.pos)
        if not protection.protects_pc(policy, policy.l_exn, tt):
            raise CheckError(
                PROTECTION_FAIL,
                f"lExn={policy.l_exn} is not protected by {format_type(tt)}",
                e.pos,
            )
        return tt
    if isinstance(e, Fix):
        if policy.mode != MODE_PNT:
            raise CheckError(WRONG_CALCULUS, "fix outside pnt mode", e.pos)
        validate_annotation(PC, e.annot, policy)
        if not lat.flows(pc, policy.pc_pnt_bound()):
            raise CheckError(PC_TOO_HIGH, f"fix at pc {pc} above lPnt", e.pos)
        body = rec({**gamma, e.var: e.annot}, pc, e.body, fixvars | {e.var})
        _expect_eq(body, e.annot, "fix body", e.pos)
        return e.annot
    if isinstance(e, (LiftE, Seq)):
        raise CheckError(WRONG_CALCULUS, "lift/seq belong to the pure target", e.pos)
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Type-and-effect system
# ---------------------------------------------------------------------------


def infer_effect(
    policy: EffectPolicy,
    gamma: dict,
    e: Expr,
    sigma: Type | None = None,
    fixvars: frozenset = frozenset(),
    enforce_policy: bool = True,
) -> tuple[Type, frozenset]:
    if enforce_policy and policy.compose_mode == GLOBAL_FLOW:
        _require_policy_flow(policy)
    return _infer(policy, gamma, e, sigma, fixvars)


def _combine(policy, parts: list[frozenset], pos) -> frozenset:
    whole = frozenset().union(*parts) if parts else EMPTY
    if not compose(policy, parts, whole):
        shown = ", ".join(show_effect(p) for p in parts)
        raise CheckError(
            EFFECT_COMPOSITION_FAIL, f"effects <{shown}> do not compose", pos
        )
    return whole


def _infer(policy, gamma, e, sigma, fixvars) -> tuple[Type, frozenset]:
    _no_sugar(e)

    def rec(g, x, fv=fixvars):
        return _infer(policy, g, x, sigma, fv)

    if isinstance(e, Var):
        t = _lookup(gamma, e.name, e.pos)
        if e.name in fixvars:
            return t, PNT_SET  # recursive references may diverge
        return t, EMPTY
    if isinstance(e, UnitVal):
        return UNIT, EMPTY
    if isinstance(e, Pair):
        lt, le = rec(gamma, e.fst)
        rt, re_ = rec(gamma, e.snd)
        return Prod(lt, rt), _combine(policy, [le, re_], e.pos)
    if isinstance(e, Proj):
        t, eff = rec(gamma, e.body)
        if not isinstance(t, Prod):
            raise CheckError(MISMATCH, f"projection from non-product {format_type(t)}", e.pos)
        return (t.left if e.index == 1 else t.right), eff
    if isinstance(e, (Inl, Inr)):
        validate_annotation(EFFECT, e.annot, policy)
        if not isinstance(e.annot, Sum):
            raise CheckError(MISMATCH, "injection annotation must be a sum type", e.pos)
        side = e.annot.left if isinstance(e, Inl) else e.annot.right
        t, eff = rec(gamma, e.body)
        _expect_eq(t, side, "injection payload", e.pos)
        return e.annot, eff
    if isinstance(e, Match):
        st, se = rec(gamma, e.scrutinee)
        if not isinstance(st, Sum):
            raise CheckError(MISMATCH, f"match on non-sum {format_type(st)}", e.pos)
        lt, le = rec({**gamma, e.left_var: st.left}, e.left_body, fixvars - {e.left_var})
        rt, re_ = rec({**gamma, e.right_var: st.right}, e.right_body, fixvars - {e.right_var})
        _expect_eq(rt, lt, "match branches", e.pos)
        branches = le | re_
        return lt, _combine(policy, [se, branches], e.pos)
    if isinstance(e, Lam):
        validate_annotation(EFFECT, e.var_type, policy)
        bt, be = rec({**gamma, e.var: e.var_type}, e.body, fixvars - {e.var})
        latent = be
        if e.latent_eff is not None:
            if not e.latent_eff <= policy.alphabet:
                raise CheckError(WRONG_CALCULUS, "latent effect outside the alphabet", e.pos)
            if not compose(policy, [be], e.latent_eff):
                raise CheckError(
                    MISMATCH,
                    f"body effect {show_effect(be)} exceeds declared latent "
                    f"{show_effect(e.latent_eff)}",
                    e.pos,
                )
            latent = e.latent_eff
        return FunEff(e.var_type, latent, bt), EMPTY
    if isinstance(e, App):
        ft, fe = rec(gamma, e.fn)
        if not isinstance(ft, FunEff):
            raise CheckError(MISMATCH, f"application of non-function {format_type(ft)}", e.pos)
        at, ae = rec(gamma, e.arg)
        _expect_eq(at, ft.arg, "application argument", e.pos)
        return ft.res, _combine(policy, [fe, ae, ft.eff], e.pos)
    if isinstance(e, LabelE):
        t, eff = rec(gamma, e.body)
        return Labeled(e.label, t), eff
    if isinstance(e, Unlabel):
        lt, le = rec(gamma, e.labeled)
        if not isinstance(lt, Labeled):
            raise CheckError(MISMATCH, f"unlabel of unlabeled {format_type(lt)}", e.pos)
        bt, be = rec({**gamma, e.var: lt.body}, e.body, fixvars - {e.var})
        if not protection.protects_eff(policy, lt.label, bt):
            raise CheckError(
                PROTECTION_FAIL,
                f"label {lt.label} is not protected by {format_type(bt)}",
                e.pos,
            )
        if not policy.lattice.flows(lt.label, effect_label(policy, be)):
            raise CheckError(
                PROTECTION_FAIL,
                f"label {lt.label} does not flow to the body effect label "
                f"{effect_label(policy, be)} (effect {show_effect(be)})",
                e.pos,
            )
        return bt, _combine(policy, [le, be], e.pos)
    if isinstance(e, Read):
        if policy.mode != MODE_STATE_EXN:
            raise CheckError(WRONG_CALCULUS, "read outside state-exn mode", e.pos)
        if sigma is None:
            raise CheckError(STATE_TYPE_INVALID, "no state type in scope", e.pos)
        return sigma, frozenset({"R"})
    if isinstance(e, Write):
        if policy.mode != MODE_STATE_EXN:
            raise CheckError(WRONG_CALCULUS, "write outside state-exn mode", e.pos)
        if sigma is None:
            raise CheckError(STATE_TYPE_INVALID, "no state type in scope", e.pos)
        t, eff = rec(gamma, e.body)
        _expect_eq(t, sigma, "written value", e.pos)
        return UNIT, _combine(policy, [eff, frozenset({"W"})], e.pos)
    if isinstance(e, Throw):
        if policy.mode != MODE_STATE_EXN:
            raise CheckError(WRONG_CALCULUS, "throw outside state-exn mode", e.pos)
        validate_annotation(EFFECT, e.annot, policy)
        return e.annot, frozenset({"E"})
    if isinstance(e, TryCatch):
        if policy.mode != MODE_STATE_EXN:
            raise CheckError(WRONG_CALCULUS, "try/catch outside state-exn mode", e.pos)
        tt, te = rec(gamma, e.try_body)
        ct, ce = rec(gamma, e.catch_body)
        _expect_eq(ct, tt, "try and catch branches", e.pos)
        if not protection.protects_eff(policy, policy.l_exn, tt):
            raise CheckError(
                PROTECTION_FAIL,
                f"lExn={policy.l_exn} is not protected by {format_type(tt)}",
                e.pos,
            )
        # The exception, if any, is caught here: only the non-E part of the
        # try block's effect escapes, plus whatever the handler does.
        return tt, (te - {"E"}) | ce
    if isinstance(e, Fix):
        if policy.mode != MODE_PNT:
            raise CheckError(WRONG_CALCULUS, "fix outside pnt mode", e.pos)
        validate_annotation(EFFECT, e.annot, policy)
        bt, _ = rec({**gamma, e.var: e.annot}, e.body, fixvars | {e.var})
        _expect_eq(bt, e.annot, "fix body", e.pos)
        return e.annot, PNT_SET
    if isinstance(e, (LiftE, Seq)):
        raise CheckError(WRONG_CALCULUS, "lift/seq belong to the pure target", e.pos)
    raise TypeError(f"not an expression: {e!r}")


def check_effect(
    policy: EffectPolicy,
    gamma: dict,
    e: Expr,
    eps: frozenset,
    sigma: Type | None = None,
) -> Type:
    """Check e against a declared effect: infer the principal effect and
    subsume (containment under global composition, unary composition under
    partial)."""
    t, principal = infer_effect(policy, gamma, e, sigma)
    if not compose(policy, [principal], eps):
        raise CheckError(
            MISMATCH,
            f"principal effect {show_effect(principal)} is not within "
            f"{show_effect(eps)}",
        )
    return t


# ---------------------------------------------------------------------------
# Weak baseline: effectful operations with no pc and no effect accounting
# ---------------------------------------------------------------------------


def check_weak(
    policy: EffectPolicy, gamma: dict, e: Expr, sigma: Type | None = None
) -> Type:
    _no_sugar(e)

    def rec(g, x):
        return check_weak(policy, g, x, sigma)

    if isinstance(e, Var):
        return _lookup(gamma, e.name, e.pos)
    if isinstance(e, UnitVal):
        return UNIT
    if isinstance(e, Pair):
        return Prod(rec(gamma, e.fst), rec(gamma, e.snd))
    if isinstance(e, Proj):
        t = rec(gamma, e.body)
        if not isinstance(t, Prod):
            raise CheckError(MISMATCH, f"projection from non-product {format_type(t)}", e.pos)
        return t.left if e.index == 1 else t.right
    if isinstance(e, (Inl, Inr)):
        validate_annotation(WEAK, e.annot)
        if not isinstance(e.annot, Sum):
            raise CheckError(MISMATCH, "injection annotation must be a sum type", e.pos)
        side = e.annot.left if isinstance(e, Inl) else e.annot.right
        _expect_eq(rec(gamma, e.body), side, "injection payload", e.pos)
        return e.annot
    if isinstance(e, Match):
        st = rec(gamma, e.scrutinee)
        if not isinstance(st, Sum):
            raise CheckError(MISMATCH, f"match on non-sum {format_type(st)}", e.pos)
        lt = rec({**gamma, e.left_var: st.left}, e.left_body)
        rt = rec({**gamma, e.right_var: st.right}, e.right_body)
        _expect_eq(rt, lt, "match branches", e.pos)
        return lt
    if isinstance(e, Lam):
        validate_annotation(WEAK, e.var_type)
        return FunPure(e.var_type, rec({**gamma, e.var: e.var_type}, e.body))
    if isinstance(e, App):
        ft = rec(gamma, e.fn)
        if not isinstance(ft, FunPure):
            raise CheckError(MISMATCH, f"application of non-function {format_type(ft)}", e.pos)
        _expect_eq(rec(gamma, e.arg), ft.arg, "application argument", e.pos)
        return ft.res
    if isinstance(e, LabelE):
        return Labeled(e.label, rec(gamma, e.body))
    if isinstance(e, Unlabel):
        lt = rec(gamma, e.labeled)
        if not isinstance(lt, Labeled):
            raise CheckError(MISMATCH, f"unlabel of unlabeled {format_type(lt)}", e.pos)
        body = rec({**gamma, e.var: lt.body}, e.body)
        if not protection.protects_pure(policy, lt.label, body):
            raise CheckError(
                PROTECTION_FAIL,
                f"label {lt.label} is not protected by {format_type(body)}",
                e.pos,
            )
        return body
    if isinstance(e, Read):
        if sigma is None:
            raise CheckError(STATE_TYPE_INVALID, "no state type in scope", e.pos)
        return sigma
    if isinstance(e, Write):
        if sigma is None:
            raise CheckError(STATE_TYPE_INVALID, "no state type in scope", e.pos)
        _expect_eq(rec(gamma, e.body), sigma, "written value", e.pos)
        return UNIT
    if isinstance(e, Throw):
        validate_annotation(WEAK, e.annot)
        return e.annot
    if isinstance(e, TryCatch):
        tt = rec(gamma, e.try_body)
        _expect_eq(rec(gamma, e.catch_body), tt, "try and catch branches", e.pos)
        return tt
    if isinstance(e, Fix):
        validate_annotation(WEAK, e.annot)
        body = rec({**gamma, e.var: e.annot}, e.body)
        _expect_eq(body, e.annot, "fix body", e.pos)
        return e.annot
    if isinstance(e, (LiftE, Seq)):
        raise CheckError(WRONG_CALCULUS, "lift/seq belong to the pure target", e.pos)
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Translation from pc types to effect types
# ---------------------------------------------------------------------------


def pc_effect_cases(policy: EffectPolicy, pc: Label) -> frozenset:
    """The latent effect assigned to a pc arrow by the type translation."""
    lat = policy.lattice
    if policy.mode == MODE_STATE_EXN:
        if lat.flows(pc, policy.l_exn):
            return frozenset({"R", "W", "E"})
        if lat.flows(pc, policy.l_state):
            return frozenset({"R", "W"})
        return frozenset({"R"})
    return PNT_SET if lat.flows(pc, policy.pnt_label()) else EMPTY


def pc_to_effect_type(policy: EffectPolicy, t: Type) -> Type:
    if isinstance(t, Unit):
        return t
    if isinstance(t, Sum):
        return Sum(pc_to_effect_type(policy, t.left), pc_to_effect_type(policy, t.right))
    if isinstance(t, Prod):
        return Prod(pc_to_effect_type(policy, t.left), pc_to_effect_type(policy, t.right))
    if isinstance(t, Labeled):
        return Labeled(t.label, pc_to_effect_type(policy, t.body))
    if isinstance(t, FunPc):
        return FunEff(
            pc_to_effect_type(policy, t.arg),
            pc_effect_cases(policy, t.pc),
            pc_to_effect_type(policy, t.res),
        )
    raise CheckError(WRONG_CALCULUS, f"{format_type(t)} is not a pc-calculus type")


def convert_pc_expr(
    policy: EffectPolicy,
    gamma: dict,
    pc: Label,
    e: Expr,
    sigma: Type | None = None,
) -> Expr:
    """Convert a pc-checked expression's annotations to effect-system types.

    Lambdas get the latent effect the type translation assigns to their
    latent pc; computing the pc at each point requires re-threading it the
    way the checker does (the unlabel raise needs the scrutinee's type).
    """
    lat = policy.lattice
    conv_t = lambda t: pc_to_effect_type(policy, t)

    def walk(g, p, x):
        if isinstance(x, (Var, UnitVal, Read)):
            return x
        if isinstance(x, Pair):
            return Pair(walk(g, p, x.fst), walk(g, p, x.snd))
        if isinstance(x, Proj):
            return Proj(x.index, walk(g, p, x.body))
        if isinstance(x, Inl):
            return Inl(walk(g, p, x.body), conv_t(x.annot))
        if isinstance(x, Inr):
            return Inr(walk(g, p, x.body), conv_t(x.annot))
        if isinstance(x, Match):
            st = _check_pc(policy, g, p, x.scrutinee, sigma, frozenset())
            return Match(
                walk(g, p, x.scrutinee),
                x.left_var,
                walk({**g, x.left_var: st.left}, p, x.left_body),
                x.right_var,
                walk({**g, x.right_var: st.right}, p, x.right_body),
            )
        if isinstance(x, Lam):
            latent = x.latent_pc if x.latent_pc is not None else p
            body = walk({**g, x.var: x.var_type}, latent, x.body)
            return Lam(x.var, conv_t(x.var_type), body,
                       latent_eff=pc_effect_cases(policy, latent))
        if isinstance(x, App):
            return App(walk(g, p, x.fn), walk(g, p, x.arg))
        if isinstance(x, LabelE):
            return LabelE(x.label, walk(g, p, x.body))
        if isinstance(x, Unlabel):
            lt = _check_pc(policy, g, p, x.labeled, sigma, frozenset())
            raised = lat.join(p, lt.label)
            body = walk({**g, x.var: lt.body}, raised, x.body)
            return Unlabel(walk(g, p, x.labeled), x.var, body)
        if isinstance(x, Write):
            return Write(walk(g, p, x.body))
        if isinstance(x, Throw):
            return Throw(conv_t(x.annot))
        if isinstance(x, TryCatch):
            return TryCatch(walk(g, p, x.try_body), walk(g, p, x.catch_body))
        if isinstance(x, Fix):
            body = walk({**g, x.var: x.annot}, p, x.body)
            return Fix(x.var, conv_t(x.annot), body)
        raise CheckError(WRONG_CALCULUS, "cannot convert this construct", x.pos)

    return walk(dict(gamma), pc, e)


# ---------------------------------------------------------------------------
# Desugaring wrappers and whole-program checking
# ---------------------------------------------------------------------------


def desugar_pure(policy: EffectPolicy, gamma: dict, e: Expr) -> Expr:
    def synth(g, joins, x):
        return check_pure(policy, {**gamma, **g}, x)

    return desugar(e, synth)


def desugar_pc(
    policy: EffectPolicy, gamma: dict, pc: Label, e: Expr, sigma: Type | None = None
) -> Expr:
    lat = policy.lattice

    def synth(g, joins, x):
        p = pc
        for lab in joins:
            p = lat.join(p, lab)
        return _check_pc(policy, {**gamma, **g}, p, x, sigma, frozenset())

    return desugar(e, synth)


def desugar_effect(
    policy: EffectPolicy, gamma: dict, e: Expr, sigma: Type | None = None
) -> Expr:
    def synth(g, joins, x):
        return _infer(policy, {**gamma, **g}, x, sigma, frozenset())[0]

    return desugar(e, synth)


def desugar_weak(
    policy: EffectPolicy, gamma: dict, e: Expr, sigma: Type | None = None
) -> Expr:
    def synth(g, joins, x):
        return check_weak(policy, {**gamma, **g}, x, sigma)

    return desugar(e, synth)


def validate_sigma(policy: EffectPolicy, sigma: Type, strict: bool = True) -> None:
    if not first_order(sigma):
        raise CheckError(
            STATE_TYPE_INVALID, f"state type {format_type(sigma)} contains a function"
        )
    if strict and not protection.protects_pure(policy, policy.l_state, sigma):
        raise CheckError(
            STATE_TYPE_INVALID,
            f"state type {format_type(sigma)} does not protect lState={policy.l_state}",
        )


def check_program(
    policy: EffectPolicy,
    program: Program,
    system: str,
    pc: Label | None = None,
    eps: frozenset | None = None,
) -> Judgment:
    """Desugar and check a whole program in the given system."""
    gamma = dict(program.context)
    for _, t in program.context:
        validate_annotation(system, t, policy)
    sigma = program.sigma
    if program.mode == MODE_STATE_EXN:
        if sigma is None:
            raise CheckError(STATE_TYPE_INVALID, "state-exn program without a sigma line")
        validate_sigma(policy, sigma, strict=system != WEAK)
    if system == PURE:
        body = desugar_pure(policy, gamma, program.body)
        return Judgment(PURE, check_pure(policy, gamma, body))
    if system == PC:
        if pc is None:
            raise ValueError("pc system needs a pc label")
        body = desugar_pc(policy, gamma, pc, program.body, sigma)
        return Judgment(PC, check_pc(policy, gamma, pc, body, sigma))
    if system == EFFECT:
        body = desugar_effect(policy, gamma, program.body, sigma)
        if eps is not None:
            return Judgment(EFFECT, check_effect(policy, gamma, body, eps, sigma), eps)
        t, principal = infer_effect(policy, gamma, body, sigma)
        return Judgment(EFFECT, t, principal)
    if system == WEAK:
        body = desugar_weak(policy, gamma, program.body, sigma)
        return Judgment(WEAK, check_weak(policy, gamma, body, sigma))
    raise ValueError(f"unknown system {system!r}")
