"""Typed program generation and enumeration.

Random programs are built by walking a typing derivation top-down, so every
emitted program is checker-accepted (and re-checked before being returned).
Context enumeration is exhaustive and size-indexed: all terms of a target
type with a distinguished free hole variable, deduplicated by construction
through canonical binder names.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import protection
from .effects import (
    EMPTY,
    MODE_PNT,
    MODE_STATE_EXN,
    EffectPolicy,
    gamma as effect_gamma,
)
from .errors import CheckError
from .labels import Label
from .syntax import (
    BOOLISH,
    free_vars,
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
    Lift,
    LiftE,
    Match,
    Pair,
    Proj,
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
)
from .typecheck import (
    EFFECT,
    PC,
    PURE,
    check_pc,
    check_pure,
    infer_effect,
    is_pointed,
)

HOLE = "hole"


class GenerationExhausted(Exception):
    pass


class NotEnumerable(Exception):
    pass


# ---------------------------------------------------------------------------
# Value enumeration
# ---------------------------------------------------------------------------


def count_values(t: Type) -> int:
    if isinstance(t, Unit):
        return 1
    if isinstance(t, Sum):
        return count_values(t.left) + count_values(t.right)
    if isinstance(t, Prod):
        return count_values(t.left) * count_values(t.right)
    if isinstance(t, Labeled):
        return count_values(t.body)
    if isinstance(t, Lift):
        return count_values(t.body)
    raise NotEnumerable(f"values of {t} are not enumerable")


def enum_values(t: Type, limit: int | None = None) -> list[Expr]:
    """All values of a first-order (possibly lifted) type, in a fixed order."""
    if limit is not None and count_values(t) > limit:
        raise NotEnumerable(f"{t} has more than {limit} values")
    if isinstance(t, Unit):
        return [UnitVal()]
    if isinstance(t, Sum):
        return [Inl(v, t) for v in enum_values(t.left)] + [
            Inr(v, t) for v in enum_values(t.right)
        ]
    if isinstance(t, Prod):
        return [Pair(a, b) for a in enum_values(t.left) for b in enum_values(t.right)]
    if isinstance(t, Labeled):
        return [LabelE(t.label, v) for v in enum_values(t.body)]
    if isinstance(t, Lift):
        return [LiftE(v) for v in enum_values(t.body)]
    raise NotEnumerable(f"values of {t} are not enumerable")


def canonical_value(t: Type) -> Expr:
    """A fixed closed value of any type (arrows keep their latent markers).

    Binder names are numbered so nested arrows never shadow each other."""
    counter = [0]

    def go(t: Type) -> Expr:
        if isinstance(t, Unit):
            return UnitVal()
        if isinstance(t, Sum):
            return Inl(go(t.left), t)
        if isinstance(t, Prod):
            return Pair(go(t.left), go(t.right))
        if isinstance(t, Labeled):
            return LabelE(t.label, go(t.body))
        if isinstance(t, Lift):
            return LiftE(go(t.body))
        if isinstance(t, (FunPure, FunPc, FunEff)):
            counter[0] += 1
            name = f"cv{counter[0]}"
            if isinstance(t, FunPc):
                return Lam(name, t.arg, go(t.res), latent_pc=t.pc)
            if isinstance(t, FunEff):
                return Lam(name, t.arg, go(t.res), latent_eff=t.eff)
            return Lam(name, t.arg, go(t.res))
        raise TypeError(f"not a type: {t!r}")

    return go(t)


def combinator_pool(t: Type) -> list[Expr]:
    """Closed inhabitants used to instantiate function-typed free variables."""
    out = [canonical_value(t)]
    if isinstance(t, FunPure) and t.arg == t.res:
        out.append(Lam("cv1", t.arg, Var("cv1")))
    if isinstance(t, FunPc) and t.arg == t.res:
        out.append(Lam("cv1", t.arg, Var("cv1"), latent_pc=t.pc))
    if isinstance(t, FunEff) and t.arg == t.res:
        out.append(Lam("cv1", t.arg, Var("cv1"), latent_eff=t.eff))
    return out


# ---------------------------------------------------------------------------
# Random generation by derivation
# ---------------------------------------------------------------------------


@dataclass
class GenProgram:
    system: str
    gamma: dict
    body: Expr
    type: Type
    effect: frozenset | None = None
    pc: Label | None = None


@dataclass
class _Ctx:
    pc: Label | None = None  # pc system: current program counter
    allowed: frozenset | None = None  # effect system: effects permitted here
    fixvars: frozenset = frozenset()


class ProgramGen:
    """Seeded generator of checker-accepted programs for one system."""

    def __init__(
        self,
        policy: EffectPolicy,
        sigma: Type | None,
        system: str,
        seed: int = 0,
        type_pool: list[Type] | None = None,
    ):
        self.policy = policy
        self.sigma = sigma
        self.system = system
        self.rng = random.Random(seed)
        self.coverage: dict[str, int] = {}
        self.pool = type_pool if type_pool is not None else self.default_pool()
        self._var = 0

    def default_pool(self) -> list[Type]:
        labs = list(self.policy.lattice)[:3]
        pool = [UNIT, BOOLISH, Prod(UNIT, BOOLISH)]
        for lab in labs:
            pool.append(Labeled(lab, UNIT))
            pool.append(Labeled(lab, BOOLISH))
        if self.policy.mode == MODE_STATE_EXN and self.sigma is not None:
            pool.append(self.sigma)
        if self.system == PURE:
            pool.append(Lift(UNIT))
        out = []
        for t in pool:
            if t not in out:
                out.append(t)
        return out

    def fresh_var(self) -> str:
        self._var += 1
        return f"g{self._var}"

    def _hit(self, rule: str) -> None:
        self.coverage[rule] = self.coverage.get(rule, 0) + 1

    def pick_type(self) -> Type:
        return self.rng.choice(self.pool)

    # -- gating ---------------------------------------------------------------

    def _flows(self, a, b):
        return self.policy.lattice.flows(a, b)

    def _can_write(self, ctx: _Ctx) -> bool:
        if self.policy.mode != MODE_STATE_EXN or self.sigma is None:
            return False
        if self.system == PC:
            return self._flows(ctx.pc, self.policy.pc_state_bound())
        if self.system == EFFECT:
            return "W" in ctx.allowed
        return False

    def _can_throw(self, ctx: _Ctx) -> bool:
        if self.policy.mode != MODE_STATE_EXN:
            return False
        if self.system == PC:
            return self._flows(ctx.pc, self.policy.pc_exn_bound())
        if self.system == EFFECT:
            return "E" in ctx.allowed
        return False

    def _can_read(self, ctx: _Ctx) -> bool:
        if self.policy.mode != MODE_STATE_EXN or self.sigma is None:
            return False
        if self.system == EFFECT:
            return "R" in ctx.allowed
        return self.system == PC

    def _can_fix(self, ctx: _Ctx) -> bool:
        if self.system == PURE:
            return True
        if self.policy.mode != MODE_PNT:
            return False
        if self.system == PC:
            return self._flows(ctx.pc, self.policy.pc_pnt_bound())
        return "PNT" in ctx.allowed

    def _protects(self, lab: Label, t: Type) -> bool:
        sysname = {PURE: protection.PURE, PC: protection.PC, EFFECT: protection.EFFECT}
        try:
            return protection.protects(self.policy, sysname[self.system], lab, t)
        except CheckError:
            return False

    def _arrow(self, arg: Type, res: Type, ctx: _Ctx):
        """An arrow type from arg to res that is callable in this context."""
        if self.system == PURE:
            return FunPure(arg, res)
        if self.system == PC:
            ups = [l for l in self.policy.lattice if self._flows(ctx.pc, l)]
            return FunPc(arg, self.rng.choice(ups), res)
        members = sorted(ctx.allowed)
        latent = frozenset(a for a in members if self.rng.random() < 0.5)
        return FunEff(arg, latent, res)

    def _body_ctx(self, arrow: Type, ctx: _Ctx) -> _Ctx:
        if isinstance(arrow, FunPc):
            return _Ctx(pc=arrow.pc, fixvars=ctx.fixvars)
        if isinstance(arrow, FunEff):
            return _Ctx(allowed=arrow.eff, fixvars=ctx.fixvars)
        return _Ctx(fixvars=ctx.fixvars)

    # -- generation ------------------------------------------------------------

    def gen(self, gamma: dict, target: Type, budget: int, ctx: _Ctx) -> Expr:
        rng = self.rng
        candidates: list[tuple[float, str]] = []

        usable_vars = [
            n
            for n, t in gamma.items()
            if t == target
            and (
                n not in ctx.fixvars
                or (self.system == EFFECT and "PNT" in ctx.allowed)
                or (self.system == PC and self._flows(ctx.pc, self.policy.pc_pnt_bound()))
            )
        ]
        if usable_vars:
            candidates.append((3.0, "var"))
        candidates.append((0.6, "canonical"))

        if budget > 0:
            if isinstance(target, Sum):
                candidates.append((2.0, "inj"))
            if isinstance(target, Prod):
                candidates.append((2.0, "pair"))
            if isinstance(target, Labeled):
                candidates.append((2.5, "label"))
            if isinstance(target, (FunPure, FunPc, FunEff)):
                candidates.append((3.0, "lam"))
            if isinstance(target, Lift) and self.system == PURE:
                candidates.append((2.0, "lift"))
            if target == self.sigma and self._can_read(ctx):
                candidates.append((1.5, "read"))
            if target == UNIT and self._can_write(ctx):
                candidates.append((1.5, "write"))
            if self._can_throw(ctx):
                candidates.append((0.8, "throw"))
            if budget > 1:
                candidates.append((1.0, "match"))
                candidates.append((0.8, "app"))
                candidates.append((0.5, "proj"))
                if self._unlabel_choices(target):
                    candidates.append((1.2, "unlabel"))
                if self.policy.mode == MODE_STATE_EXN and self._protects(
                    self.policy.l_exn, target
                ) and self.system in (PC, EFFECT):
                    candidates.append((0.7, "try"))
                if self._can_fix(ctx) and self._fix_ok(target):
                    candidates.append((0.6, "fix"))
                if self.system == PURE and self._seq_ok(target):
                    candidates.append((0.5, "seq"))

        weights = [w for w, _ in candidates]
        rule = rng.choices([r for _, r in candidates], weights=weights)[0]
        self._hit(rule)

        if rule == "var":
            return Var(rng.choice(sorted(usable_vars)))
        if rule == "canonical":
            return canonical_value(target)
        if rule == "inj":
            if rng.random() < 0.5:
                return Inl(self.gen(gamma, target.left, budget - 1, ctx), target)
            return Inr(self.gen(gamma, target.right, budget - 1, ctx), target)
        if rule == "pair":
            b1 = (budget - 1) // 2
            return Pair(
                self.gen(gamma, target.left, b1, ctx),
                self.gen(gamma, target.right, budget - 1 - b1, ctx),
            )
        if rule == "label":
            return LabelE(target.label, self.gen(gamma, target.body, budget - 1, ctx))
        if rule == "lam":
            x = self.fresh_var()
            bctx = self._body_ctx(target, ctx)
            body = self.gen({**gamma, x: target.arg}, target.res, budget - 1, bctx)
            if isinstance(target, FunPc):
                return Lam(x, target.arg, body, latent_pc=target.pc)
            if isinstance(target, FunEff):
                return Lam(x, target.arg, body, latent_eff=target.eff)
            return Lam(x, target.arg, body)
        if rule == "lift":
            return LiftE(self.gen(gamma, target.body, budget - 1, ctx))
        if rule == "read":
            return Read()
        if rule == "write":
            return Write(self.gen(gamma, self.sigma, budget - 1, ctx))
        if rule == "throw":
            return Throw(target)
        if rule == "match":
            scrut_t = rng.choice([t for t in self.pool if isinstance(t, Sum)] or [BOOLISH])
            b = (budget - 1) // 3
            scrut = self.gen(gamma, scrut_t, b, ctx)
            xl, xr = self.fresh_var(), self.fresh_var()
            lb = self.gen({**gamma, xl: scrut_t.left}, target, b, ctx)
            rb = self.gen({**gamma, xr: scrut_t.right}, target, budget - 1 - 2 * b, ctx)
            return Match(scrut, xl, lb, xr, rb)
        if rule == "app":
            arg_t = self.pick_type()
            arrow = self._arrow(arg_t, target, ctx)
            b = (budget - 1) // 2
            fn = self.gen(gamma, arrow, b, ctx)
            arg = self.gen(gamma, arg_t, budget - 1 - b, ctx)
            return App(fn, arg)
        if rule == "proj":
            other = self.pick_type()
            index = rng.choice([1, 2])
            prod = Prod(target, other) if index == 1 else Prod(other, target)
            return Proj(index, self.gen(gamma, prod, budget - 1, ctx))
        if rule == "unlabel":
            lab, inner_t = rng.choice(self._unlabel_choices(target))
            b = (budget - 1) // 2
            scrut = self.gen(gamma, Labeled(lab, inner_t), b, ctx)
            x = self.fresh_var()
            bctx = self._raise_ctx(ctx, lab)
            body = self.gen({**gamma, x: inner_t}, target, budget - 1 - b, bctx)
            return Unlabel(scrut, x, body)
        if rule == "try":
            b = (budget - 1) // 2
            tctx = ctx
            if self.system == EFFECT:
                tctx = _Ctx(allowed=ctx.allowed | {"E"}, fixvars=ctx.fixvars)
            tb = self.gen(gamma, target, b, tctx)
            cb = self.gen(gamma, target, budget - 1 - b, ctx)
            return TryCatch(tb, cb)
        if rule == "fix":
            f = self.fresh_var()
            body = self.gen(
                {**gamma, f: target},
                target,
                budget - 1,
                _Ctx(ctx.pc, ctx.allowed, ctx.fixvars | {f}),
            )
            return Fix(f, target, body)
        if rule == "seq":
            inner = rng.choice([t for t in self.pool if not isinstance(t, Lift)])
            b = (budget - 1) // 2
            first = self.gen(gamma, Lift(inner), b, ctx)
            x = self.fresh_var()
            body = self.gen({**gamma, x: inner}, target, budget - 1 - b, ctx)
            return Seq(x, first, body)
        raise AssertionError(rule)

    def _raise_ctx(self, ctx: _Ctx, lab: Label) -> _Ctx:
        if self.system == PC:
            return _Ctx(pc=self.policy.lattice.join(ctx.pc, lab), fixvars=ctx.fixvars)
        if self.system == EFFECT:
            return _Ctx(
                allowed=ctx.allowed & effect_gamma(self.policy, lab), fixvars=ctx.fixvars
            )
        return ctx

    def _unlabel_choices(self, target: Type):
        inners = [t for t in self.pool if not isinstance(t, (FunPure, FunPc, FunEff))]
        out = []
        for lab in self.policy.lattice:
            if self._protects(lab, target):
                for t in inners[:3]:
                    out.append((lab, t))
        return out

    def _fix_ok(self, target: Type) -> bool:
        if self.system == PURE:
            try:
                return is_pointed(target)
            except CheckError:
                return False
        return True

    def _seq_ok(self, target: Type) -> bool:
        try:
            return is_pointed(target)
        except CheckError:
            return False

    # -- entry points -----------------------------------------------------------

    def program(
        self,
        size: int,
        gamma: dict | None = None,
        target: Type | None = None,
        pc: Label | None = None,
        attempts: int = 40,
    ) -> GenProgram:
        gamma = dict(gamma or {})
        for _ in range(attempts):
            tgt = target if target is not None else self.pick_type()
            the_pc = pc
            if self.system == PC and the_pc is None:
                the_pc = self.rng.choice(list(self.policy.lattice))
            if self.system == PC:
                ctx = _Ctx(pc=the_pc)
            elif self.system == EFFECT:
                ctx = _Ctx(allowed=self.policy.alphabet)
            else:
                ctx = _Ctx()
            try:
                body = self.gen(gamma, tgt, size, ctx)
            except (CheckError, NotEnumerable):
                continue
            try:
                if self.system == PURE:
                    t = check_pure(self.policy, gamma, body)
                    return GenProgram(PURE, gamma, body, t)
                if self.system == PC:
                    t = check_pc(self.policy, gamma, the_pc, body, self.sigma)
                    return GenProgram(PC, gamma, body, t, pc=the_pc)
                t, eff = infer_effect(self.policy, gamma, body, self.sigma)
                return GenProgram(EFFECT, gamma, body, t, effect=eff)
            except CheckError:
                continue
        raise GenerationExhausted(
            f"could not generate a {self.system} program of size {size}"
        )


def random_program(
    seed: int,
    size: int,
    system: str,
    policy: EffectPolicy,
    sigma: Type | None = None,
    gamma: dict | None = None,
    target: Type | None = None,
    pc: Label | None = None,
) -> GenProgram:
    gen = ProgramGen(policy, sigma, system, seed=seed)
    return gen.program(size, gamma=gamma, target=target, pc=pc)


# ---------------------------------------------------------------------------
# Context enumeration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContextSpec:
    """Shape of the attacker-context search space.

    Grammar modes:
      * "attack" (default): hole-linear contexts; subterms off the hole path
        are capped at `offpath_bound` nodes. Covers the standard observation
        idioms (unlabel-and-branch, pair/projection sequencing, state probes,
        try-masking) while staying enumerable at the default size bound.
      * "firstorder": exhaustive over the first-order grammar (no lambdas);
        only feasible at small bounds.
      * "full": adds lambda abstraction and application over universe arrows.
    """

    hole_type: Type
    output_label: Label
    size_bound: int = 7
    grammar: str = "attack"
    offpath_bound: int = 2


def _subterm_types(t: Type) -> set[Type]:
    out = {t}
    for attr in ("left", "right", "body", "arg", "res"):
        child = getattr(t, attr, None)
        if isinstance(child, Type):
            out |= _subterm_types(child)
    return out


class ContextEnumerator:
    """Exhaustive enumeration of typed observation contexts.

    Contexts are represented as expressions over one distinguished free
    variable (the hole); plugging is substitution. Binder names are assigned
    canonically by context depth, so structurally distinct results are
    exactly the alpha-distinct contexts.
    """

    def __init__(
        self,
        policy: EffectPolicy,
        sigma: Type | None,
        system: str,
        spec: ContextSpec,
        universe: list[Type] | None = None,
    ):
        self.policy = policy
        self.sigma = sigma
        self.system = system
        self.spec = spec
        self.memo: dict = {}
        if universe is None:
            out_t = Labeled(spec.output_label, BOOLISH)
            us = {UNIT, BOOLISH, out_t}
            us |= _subterm_types(spec.hole_type)
            if sigma is not None:
                us.add(sigma)
            # pair-projection is the first-order sequencing idiom: run the
            # first component for its effects, keep the second
            us.add(Prod(spec.hole_type, out_t))
            us.add(Prod(UNIT, out_t))
            universe = sorted(us, key=repr)
        self.universe = universe
        self.sums = [t for t in self.universe if isinstance(t, Sum)]
        self.prods = [t for t in self.universe if isinstance(t, Prod)]
        self.labeled = [t for t in self.universe if isinstance(t, Labeled)]
        self.arrows = [t for t in self.universe if isinstance(t, (FunPure, FunPc, FunEff))]

    def _state_ops(self) -> bool:
        return self.policy.mode == MODE_STATE_EXN and self.system in (PC, EFFECT)

    def _protects_fo(self, lab: Label, t: Type) -> bool:
        try:
            sysname = {PURE: protection.PURE, PC: protection.PC, EFFECT: protection.EFFECT}
            return protection.protects(self.policy, sysname[self.system], lab, t)
        except CheckError:
            return False

    def size_of(self, e: Expr) -> int:
        if isinstance(e, (Var, UnitVal, Read)):
            return 0
        if isinstance(e, Throw):
            return 1
        total = 1
        for attr in ("fst", "snd", "body", "scrutinee", "left_body", "right_body",
                     "fn", "arg", "labeled", "try_body", "catch_body", "first"):
            child = getattr(e, attr, None)
            if isinstance(child, Expr):
                total += self.size_of(child)
        return total

    # -- off-path terms (attack grammar): a curated small set ---------------

    def off_terms(self, gamma: tuple, t: Type, max_n: int, depth: int = 1):
        """Hole-free terms of type t with size <= max_n: variables, a few
        values, state probes, and one level of elimination of in-scope
        variables. Returns (expr, size) pairs."""
        key = ("off", gamma, t, max_n, depth)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        out: list[tuple[Expr, int]] = []
        seen = set()

        def add(e, n):
            if n <= max_n and e not in seen:
                seen.add(e)
                out.append((e, n))

        for name, ty in gamma:
            if ty == t and name != HOLE:
                add(Var(name), 0)
        try:
            for v in enum_values(t, limit=16)[:2]:
                add(v, self.size_of(v))
        except NotEnumerable:
            pass
        if self._state_ops():
            if t == self.sigma:
                add(Read(), 0)
            add(Throw(t), 1)
            if t == UNIT and self.sigma is not None and max_n >= 1:
                for a, n in self.off_terms(gamma, self.sigma, max_n - 1, 0):
                    add(Write(a), 1 + n)
        if isinstance(t, Labeled) and max_n >= 1:
            for a, n in self.off_terms(gamma, t.body, max_n - 1, depth):
                add(LabelE(t.label, a), 1 + n)
        if isinstance(t, Sum) and max_n >= 1:
            for name, ty in gamma:
                if name == HOLE:
                    continue
                if ty == t.left:
                    add(Inl(Var(name), t), 1)
                if ty == t.right:
                    add(Inr(Var(name), t), 1)
        if isinstance(t, Prod) and max_n >= 2:
            for a, n1 in self.off_terms(gamma, t.left, max_n - 1, 0):
                for b, n2 in self.off_terms(gamma, t.right, max_n - 1 - n1, 0):
                    add(Pair(a, b), 1 + n1 + n2)
        if depth > 0 and max_n >= 2:
            bind_name = f"b{len(gamma)}"
            sources = [(Var(name), ty, 0) for name, ty in gamma if name != HOLE]
            if self._state_ops() and self.sigma is not None:
                sources.append((Read(), self.sigma, 0))
            for src_e, ty, src_n in sources:
                if isinstance(ty, Sum):
                    g2 = gamma + ((bind_name, ty.left),)
                    g3 = gamma + ((bind_name, ty.right),)
                    for lb, n1 in self.off_terms(g2, t, max_n - 1 - src_n, depth - 1):
                        for rb, n2 in self.off_terms(g3, t, max_n - 1 - src_n - n1, depth - 1):
                            add(Match(src_e, bind_name, lb, bind_name, rb), 1 + src_n + n1 + n2)
                if isinstance(ty, Labeled) and self._protects_fo(ty.label, t):
                    g2 = gamma + ((bind_name, ty.body),)
                    for b, n1 in self.off_terms(g2, t, max_n - 1 - src_n, depth - 1):
                        add(Unlabel(src_e, bind_name, b), 1 + src_n + n1)
                if isinstance(ty, Prod):
                    if ty.left == t:
                        add(Proj(1, src_e), 1 + src_n)
                    if ty.right == t:
                        add(Proj(2, src_e), 1 + src_n)
        self.memo[key] = out
        return out

    @staticmethod
    def _not_constant(pairs):
        """Filter out closed values: eliminating a constant is always noise."""
        from .interp import is_value

        return [
            (e, n)
            for e, n in pairs
            if not (is_value(e) and not free_vars(e))
        ]

    # -- hole-path terms (attack grammar) ------------------------------------

    def path_terms(self, gamma: tuple, t: Type, n: int) -> list[Expr]:
        """Terms of type t of exactly size n containing the hole once."""
        key = ("path", gamma, t, n)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        out: list[Expr] = []
        cap = self.spec.offpath_bound

        def offs(g, ty, budget):
            return self.off_terms(g, ty, min(budget, cap))

        if n == 0:
            for name, ty in gamma:
                if ty == t and name == HOLE:
                    out.append(Var(name))
        else:
            bind_name = f"b{len(gamma)}"
            if isinstance(t, Prod):
                # the hole runs first; the kept component may observe after
                for k in range(n):
                    for h in self.path_terms(gamma, t.left, k):
                        for o, m in offs(gamma, t.right, n - 1 - k):
                            if k + m == n - 1:
                                out.append(Pair(h, o))
            if isinstance(t, Labeled):
                for e in self.path_terms(gamma, t.body, n - 1):
                    out.append(LabelE(t.label, e))
            if self._state_ops():
                if t == UNIT:
                    for e in self.path_terms(gamma, self.sigma, n - 1):
                        out.append(Write(e))
                if self._protects_fo(self.policy.l_exn, t):
                    # the hole sits in the try block; a hole-free try never
                    # reaches the catch in an interesting way
                    for k in range(n):
                        for h in self.path_terms(gamma, t, k):
                            for o, m in offs(gamma, t, n - 1 - k):
                                if k + m == n - 1:
                                    out.append(TryCatch(h, o))
            for pt in self.prods:
                if pt.left == t:
                    for e in self.path_terms(gamma, pt, n - 1):
                        out.append(Proj(1, e))
                if pt.right == t:
                    for e in self.path_terms(gamma, pt, n - 1):
                        out.append(Proj(2, e))
            canon = canonical_value(t)
            canon_n = self.size_of(canon)
            for st in self.sums:
                g2 = gamma + ((bind_name, st.left),)
                g3 = gamma + ((bind_name, st.right),)
                # hole in the scrutinee; branches vary one at a time against
                # the canonical value (keeps the set linear in the off pool)
                for k in range(n):
                    for h in self.path_terms(gamma, st, k):
                        rest = n - 1 - k
                        for lb, m1 in offs(g2, t, rest - canon_n):
                            if k + m1 + canon_n == n - 1:
                                out.append(Match(h, bind_name, lb, bind_name, canon))
                        for rb, m2 in offs(g3, t, rest - canon_n):
                            if k + canon_n + m2 == n - 1:
                                out.append(Match(h, bind_name, canon, bind_name, rb))

            for lt in self.labeled:
                if not self._protects_fo(lt.label, t):
                    continue
                g2 = gamma + ((bind_name, lt.body),)
                for k in range(n):
                    for h in self.path_terms(gamma, lt, k):
                        for o, m in offs(g2, t, n - 1 - k):
                            if k + m == n - 1:
                                out.append(Unlabel(h, bind_name, o))
        self.memo[key] = out
        return out

    # -- exhaustive grammar (firstorder / full modes) -------------------------

    def terms(self, gamma: tuple, t: Type, n: int) -> list[Expr]:
        key = (gamma, t, n)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        out: list[Expr] = []
        if n == 0:
            for name, ty in gamma:
                if ty == t:
                    out.append(Var(name))
            if t == UNIT:
                out.append(UnitVal())
            if self._state_ops() and t == self.sigma:
                out.append(Read())
        else:
            bind_name = f"b{len(gamma)}"
            if isinstance(t, Sum):
                for e in self.terms(gamma, t.left, n - 1):
                    out.append(Inl(e, t))
                for e in self.terms(gamma, t.right, n - 1):
                    out.append(Inr(e, t))
            if isinstance(t, Prod):
                for k in range(n):
                    for a in self.terms(gamma, t.left, k):
                        for b in self.terms(gamma, t.right, n - 1 - k):
                            out.append(Pair(a, b))
            if isinstance(t, Labeled):
                for e in self.terms(gamma, t.body, n - 1):
                    out.append(LabelE(t.label, e))
            if self._state_ops():
                if t == UNIT:
                    for e in self.terms(gamma, self.sigma, n - 1):
                        out.append(Write(e))
                if n == 1:
                    out.append(Throw(t))
                if self._protects_fo(self.policy.l_exn, t):
                    for k in range(n):
                        for a in self.terms(gamma, t, k):
                            for b in self.terms(gamma, t, n - 1 - k):
                                out.append(TryCatch(a, b))
            for pt in self.prods:
                if pt.left == t:
                    for e in self.terms(gamma, pt, n - 1):
                        out.append(Proj(1, e))
                if pt.right == t:
                    for e in self.terms(gamma, pt, n - 1):
                        out.append(Proj(2, e))
            for st in self.sums:
                g2 = gamma + ((bind_name, st.left),)
                g3 = gamma + ((bind_name, st.right),)
                for k in range(n):
                    rest = n - 1 - k
                    for b1 in range(rest + 1):
                        for scrut in self.terms(gamma, st, k):
                            for lb in self.terms(g2, t, b1):
                                for rb in self.terms(g3, t, rest - b1):
                                    out.append(Match(scrut, bind_name, lb, bind_name, rb))
            for lt in self.labeled:
                if not self._protects_fo(lt.label, t):
                    continue
                g2 = gamma + ((bind_name, lt.body),)
                for k in range(n):
                    for scrut in self.terms(gamma, lt, k):
                        for body in self.terms(g2, t, n - 1 - k):
                            out.append(Unlabel(scrut, bind_name, body))
            if self.spec.grammar == "full":
                for arrow in self.arrows:
                    if arrow.res != t:
                        continue
                    for k in range(n):
                        for fn in self.terms(gamma, arrow, k):
                            for arg in self.terms(gamma, arrow.arg, n - 1 - k):
                                out.append(App(fn, arg))
                if isinstance(t, (FunPure, FunPc, FunEff)):
                    g2 = gamma + ((bind_name, t.arg),)
                    for body in self.terms(g2, t.res, n - 1):
                        if isinstance(t, FunPc):
                            out.append(Lam(bind_name, t.arg, body, latent_pc=t.pc))
                        elif isinstance(t, FunEff):
                            out.append(Lam(bind_name, t.arg, body, latent_eff=t.eff))
                        else:
                            out.append(Lam(bind_name, t.arg, body))
        self.memo[key] = out
        return out

    def contexts(self):
        """Stream all contexts up to the size bound, smallest first.

        The attack grammar streams hole-using contexts, then the hole-free
        observations (which exist but never distinguish)."""
        spec = self.spec
        base = ((HOLE, spec.hole_type),)
        target = Labeled(spec.output_label, BOOLISH)
        if spec.grammar == "attack":
            for n in range(spec.size_bound + 1):
                yield from self.path_terms(base, target, n)
            for e, _ in self.off_terms(base, target, min(spec.size_bound, spec.offpath_bound)):
                yield e
        else:
            for n in range(spec.size_bound + 1):
                yield from self.terms(base, target, n)


def enumerate_contexts(
    policy: EffectPolicy,
    sigma: Type | None,
    system: str,
    spec: ContextSpec,
    universe: list[Type] | None = None,
):
    return ContextEnumerator(policy, sigma, system, spec, universe).contexts()
