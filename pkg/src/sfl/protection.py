"""The three protection relations: a label is protected by a type when the
type's values are at least as sensitive as the label.

All three share the label/product rules; they differ on arrows (pure arrows
protect through the result, pc arrows additionally bound the label by the
latent pc, effect arrows by the latent effect's label) and on whether Lift
is in the calculus.
"""

from __future__ import annotations

from .effects import EffectPolicy, effect_label
from .errors import WRONG_CALCULUS, CheckError
from .labels import Label
from .syntax import FunEff, FunPc, FunPure, Labeled, Lift, Prod, Sum, Type, Unit

PURE = "pure"
PC = "pc"
EFFECT = "effect"


def _protects(policy: EffectPolicy, system: str, label: Label, t: Type, memo: dict) -> bool:
    key = (label, t)
    if key in memo:
        return memo[key]
    lat = policy.lattice
    if isinstance(t, (Unit, Sum)):
        # No rule concludes protection for unit, and sums are deliberately
        # unprotected (matching the rule set's omission).
        out = False
    elif isinstance(t, Labeled):
        out = lat.flows(label, t.label) or _protects(policy, system, label, t.body, memo)
    elif isinstance(t, Prod):
        out = _protects(policy, system, label, t.left, memo) and _protects(
            policy, system, label, t.right, memo
        )
    elif isinstance(t, FunPure):
        if system != PURE:
            raise CheckError(WRONG_CALCULUS, f"pure arrow in {system} protection")
        out = _protects(policy, system, label, t.res, memo)
    elif isinstance(t, FunPc):
        if system != PC:
            raise CheckError(WRONG_CALCULUS, f"pc arrow in {system} protection")
        out = _protects(policy, system, label, t.res, memo) and lat.flows(label, t.pc)
    elif isinstance(t, FunEff):
        if system != EFFECT:
            raise CheckError(WRONG_CALCULUS, f"effect arrow in {system} protection")
        out = _protects(policy, system, label, t.res, memo) and lat.flows(
            label, effect_label(policy, t.eff)
        )
    elif isinstance(t, Lift):
        if system != PURE:
            raise CheckError(WRONG_CALCULUS, f"Lift in {system} protection")
        out = lat.flows(label, policy.pnt_label()) and _protects(
            policy, system, label, t.body, memo
        )
    else:
        raise TypeError(f"not a type: {t!r}")
    memo[key] = out
    return out


def protects_pure(policy: EffectPolicy, label: Label, t: Type) -> bool:
    return _protects(policy, PURE, label, t, {})


def protects_pc(policy: EffectPolicy, label: Label, t: Type) -> bool:
    return _protects(policy, PC, label, t, {})


def protects_eff(policy: EffectPolicy, label: Label, t: Type) -> bool:
    return _protects(policy, EFFECT, label, t, {})


def protects(policy: EffectPolicy, system: str, label: Label, t: Type) -> bool:
    return _protects(policy, system, label, t, {})
