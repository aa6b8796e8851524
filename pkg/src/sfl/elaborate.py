"""Monadic elaboration: the effect-indexed monad (type constructor, unit,
bind, coercions) and the type-directed capture translation from the
type-and-effect calculi into the pure language.

The write-flavoured effect sets share the state monad ({W} with {R,W},
{W,E} with {R,W,E}); `norm_eff` is the single normalization map used by the
monad table, the coercions, and capture.

Capture applies the per-node clauses literally, with two cosmetic
reductions so outputs stay readable: identity coercions are omitted, and
binds at the empty effect are emitted in beta-reduced form (the identity
monad's bind is plain application).
"""

from __future__ import annotations

from .effects import EMPTY, MODE_PNT, MODE_STATE_EXN, EffectPolicy, show_effect
from .errors import CheckError
from .labels import Label
from .syntax import (
    UNIT,
    App,
    Expr,
    Fix,
    FreshNames,
    FunEff,
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
    format_expr,
    format_type,
    all_names,
    free_vars,
    subst,
)
from .typecheck import (
    PNT_SET,
    check_pure,
    infer_effect,
    validate_sigma,
)

R = frozenset({"R"})
E = frozenset({"E"})
RW = frozenset({"R", "W"})
RE = frozenset({"R", "E"})
RWE = frozenset({"R", "W", "E"})


class InvalidCoercion(Exception):
    pass


class InternalIllTyped(Exception):
    """The translation produced a pure term that fails its own type check."""


def norm_eff(mode: str, eps: frozenset) -> frozenset:
    """Monad-sharing normalization: a write without a read still uses the
    state monad."""
    if mode == MODE_STATE_EXN and "W" in eps:
        return eps | R
    return eps


def _exn_sum(policy: EffectPolicy, tau: Type) -> Type:
    return Labeled(policy.l_exn, Sum(UNIT, tau))


def monad_type(policy: EffectPolicy, sigma: Type | None, eps: frozenset, tau: Type) -> Type:
    """Pure type of a captured computation of type tau and effect eps."""
    n = norm_eff(policy.mode, eps)
    if n == EMPTY:
        return tau
    if n == PNT_SET:
        return Lift(tau)
    if sigma is None and n not in (E,):
        raise CheckError("StateTypeInvalid", "state monads need a state type")
    if n == R:
        return FunPure(sigma, tau)
    if n == E:
        return _exn_sum(policy, tau)
    if n == RW:
        return FunPure(sigma, Prod(tau, sigma))
    if n == RE:
        return FunPure(sigma, _exn_sum(policy, tau))
    if n == RWE:
        return FunPure(sigma, Prod(_exn_sum(policy, tau), sigma))
    raise ValueError(f"no monad for effect {show_effect(eps)}")


def pure_type(policy: EffectPolicy, sigma: Type | None, t: Type) -> Type:
    """Translate an effect-calculus type to its pure counterpart."""
    if isinstance(t, Unit):
        return t
    if isinstance(t, Sum):
        return Sum(pure_type(policy, sigma, t.left), pure_type(policy, sigma, t.right))
    if isinstance(t, Prod):
        return Prod(pure_type(policy, sigma, t.left), pure_type(policy, sigma, t.right))
    if isinstance(t, Labeled):
        return Labeled(t.label, pure_type(policy, sigma, t.body))
    if isinstance(t, FunEff):
        return FunPure(
            pure_type(policy, sigma, t.arg),
            monad_type(policy, sigma, t.eff, pure_type(policy, sigma, t.res)),
        )
    raise CheckError("WrongCalculus", "not an effect-calculus type")


def _inr(policy, tau, x):
    return LabelE(policy.l_exn, Inr(x, Sum(UNIT, tau)))


def _inl_throw(policy, tau):
    return LabelE(policy.l_exn, Inl(UnitVal(), Sum(UNIT, tau)))


def eta(policy: EffectPolicy, sigma: Type | None, eps: frozenset, tau: Type) -> Expr:
    """The unit of the eps-monad at pure type tau."""
    n = norm_eff(policy.mode, eps)
    v, s = Var("v"), Var("s")
    if n == EMPTY:
        return Lam("v", tau, v)
    if n == PNT_SET:
        return Lam("v", tau, LiftE(v))
    if n == E:
        return Lam("v", tau, _inr(policy, tau, v))
    if n == R:
        return Lam("v", tau, Lam("s", sigma, v))
    if n == RW:
        return Lam("v", tau, Lam("s", sigma, Pair(v, s)))
    if n == RE:
        return Lam("v", tau, Lam("s", sigma, _inr(policy, tau, v)))
    if n == RWE:
        return Lam("v", tau, Lam("s", sigma, Pair(_inr(policy, tau, v), s)))
    raise ValueError(f"no monad for effect {show_effect(eps)}")


def bind(policy: EffectPolicy, sigma: Type | None, eps: frozenset, t1: Type, t2: Type) -> Expr:
    """Monadic bind at M_eps(t1) -> (t1 -> M_eps(t2)) -> M_eps(t2)."""
    n = norm_eff(policy.mode, eps)
    m1 = monad_type(policy, sigma, n, t1)
    m2 = monad_type(policy, sigma, n, t2)
    k = FunPure(t1, m2)
    v, f, s, x, y, z, p = (Var(n_) for n_ in "vfsxyzp")
    if n == EMPTY:
        return Lam("v", t1, Lam("f", k, App(f, v)))
    if n == PNT_SET:
        return Lam("v", m1, Lam("f", k, Seq("x", v, App(f, x))))
    if n == E:
        body = Unlabel(
            v, "x",
            Match(x, "y", _inl_throw(policy, t2), "z", App(f, z)),
        )
        return Lam("v", m1, Lam("f", k, body))
    if n == R:
        return Lam("v", m1, Lam("f", k, Lam("s", sigma, App(App(f, App(v, s)), s))))
    if n == RW:
        split = Lam("p", Prod(t1, sigma), App(App(f, Proj(1, p)), Proj(2, p)))
        return Lam("v", m1, Lam("f", k, Lam("s", sigma, App(split, App(v, s)))))
    if n == RE:
        body = Unlabel(
            App(v, s), "x",
            Match(x, "y", _inl_throw(policy, t2), "z", App(App(f, z), s)),
        )
        return Lam("v", m1, Lam("f", k, Lam("s", sigma, body)))
    if n == RWE:
        inner = Unlabel(
            Proj(1, p), "x",
            Match(
                x,
                "y", Pair(_inl_throw(policy, t2), Proj(2, p)),
                "z", App(App(f, z), Proj(2, p)),
            ),
        )
        split = Lam("p", Prod(_exn_sum(policy, t1), sigma), inner)
        return Lam("v", m1, Lam("f", k, Lam("s", sigma, App(split, App(v, s)))))
    raise ValueError(f"no monad for effect {show_effect(eps)}")


def coerce(
    policy: EffectPolicy,
    sigma: Type | None,
    eps_from: frozenset,
    eps_to: frozenset,
    tau: Type,
) -> Expr:
    """Monad inclusion M_{eps_from}(tau) -> M_{eps_to}(tau) for contained
    (normalized) effect sets."""
    n1 = norm_eff(policy.mode, eps_from)
    n2 = norm_eff(policy.mode, eps_to)
    if not n1 <= n2:
        raise InvalidCoercion(
            f"{show_effect(eps_from)} does not embed into {show_effect(eps_to)}"
        )
    m1 = monad_type(policy, sigma, n1, tau)
    v, s, p = Var("v"), Var("s"), Var("p")
    if n1 == n2:
        return Lam("v", m1, v)
    if n1 == EMPTY:
        return eta(policy, sigma, n2, tau)
    pair = (n1, n2)
    if pair == (R, RW):
        return Lam("v", m1, Lam("s", sigma, Pair(App(v, s), s)))
    if pair == (R, RE):
        return Lam("v", m1, Lam("s", sigma, _inr(policy, tau, App(v, s))))
    if pair == (R, RWE):
        return Lam("v", m1, Lam("s", sigma, Pair(_inr(policy, tau, App(v, s)), s)))
    if pair == (E, RE):
        return Lam("v", m1, Lam("s", sigma, v))
    if pair == (E, RWE):
        return Lam("v", m1, Lam("s", sigma, Pair(v, s)))
    if pair == (RW, RWE):
        relabel = Lam(
            "p", Prod(tau, sigma), Pair(_inr(policy, tau, Proj(1, p)), Proj(2, p))
        )
        return Lam("v", m1, Lam("s", sigma, App(relabel, App(v, s))))
    if pair == (RE, RWE):
        return Lam("v", m1, Lam("s", sigma, Pair(App(v, s), s)))
    raise InvalidCoercion(
        f"no coercion from {show_effect(eps_from)} to {show_effect(eps_to)}"
    )


def map_label(label: Label, p: Expr, x: str, t_in: Type, t_out: Type) -> Expr:
    """Wrap a program over x:t_in into one over x:L[label]t_in that unlabels,
    runs, and relabels."""
    namer = FreshNames()
    inner = namer.fresh(x, free_vars(p) | {x})
    return Unlabel(Var(x), inner, LabelE(label, subst(p, x, Var(inner))))


# ---------------------------------------------------------------------------
# Capture
# ---------------------------------------------------------------------------


class _Capture:
    def __init__(self, policy: EffectPolicy, sigma: Type | None, avoid: frozenset):
        self.policy = policy
        self.sigma = sigma
        self.namer = FreshNames()
        self.avoid = avoid

    def fresh(self, base: str) -> str:
        return self.namer.fresh(base, self.avoid)

    def pure(self, t: Type) -> Type:
        return pure_type(self.policy, self.sigma, t)

    def mt(self, eps: frozenset, t: Type) -> Type:
        return monad_type(self.policy, self.sigma, eps, t)

    def _coerce_app(self, e_from, e_to, tau: Type, m: Expr) -> Expr:
        if norm_eff(self.policy.mode, e_from) == norm_eff(self.policy.mode, e_to):
            return m
        return App(coerce(self.policy, self.sigma, e_from, e_to, tau), m)

    def _eta_app(self, eps, tau: Type, v: Expr) -> Expr:
        if norm_eff(self.policy.mode, eps) == EMPTY:
            return v
        return App(eta(self.policy, self.sigma, eps, tau), v)

    def _bind(self, eps, t1: Type, t2: Type, m: Expr, var: str, body: Expr) -> Expr:
        k = Lam(var, t1, body)
        if norm_eff(self.policy.mode, eps) == EMPTY:
            return App(k, m)
        return App(App(bind(self.policy, self.sigma, eps, t1, t2), m), k)

    def cap(self, gamma: dict, fixvars: frozenset, e: Expr):
        """Translate; returns (pure expr, source type, principal effect)."""
        rec = self.cap
        policy, sigma = self.policy, self.sigma
        if isinstance(e, Var):
            t = gamma[e.name]
            if e.name in fixvars:
                return Var(e.name), t, PNT_SET
            return Var(e.name), t, EMPTY
        if isinstance(e, UnitVal):
            return UnitVal(), UNIT, EMPTY
        if isinstance(e, (Inl, Inr)):
            m, tb, eps = rec(gamma, fixvars, e.body)
            annot_p = self.pure(e.annot)
            x = self.fresh("x")
            inj = Inl(Var(x), annot_p) if isinstance(e, Inl) else Inr(Var(x), annot_p)
            body = self._eta_app(eps, annot_p, inj)
            return (
                self._bind(eps, self.pure(tb), annot_p, m, x, body),
                e.annot,
                eps,
            )
        if isinstance(e, Pair):
            m1, t1, e1 = rec(gamma, fixvars, e.fst)
            m2, t2, e2 = rec(gamma, fixvars, e.snd)
            eps = e1 | e2
            tp = Prod(self.pure(t1), self.pure(t2))
            v1 = self.fresh("v")
            v2 = self.fresh("v")
            inner = self._bind(
                eps,
                self.pure(t2),
                tp,
                self._coerce_app(e2, eps, self.pure(t2), m2),
                v2,
                self._eta_app(eps, tp, Pair(Var(v1), Var(v2))),
            )
            outer = self._bind(
                eps, self.pure(t1), tp, self._coerce_app(e1, eps, self.pure(t1), m1), v1, inner
            )
            return outer, Prod(t1, t2), eps
        if isinstance(e, Proj):
            m, t, eps = rec(gamma, fixvars, e.body)
            ti = t.left if e.index == 1 else t.right
            x = self.fresh("x")
            body = self._eta_app(eps, self.pure(ti), Proj(e.index, Var(x)))
            return self._bind(eps, self.pure(t), self.pure(ti), m, x, body), ti, eps
        if isinstance(e, Match):
            ms, ts, e1 = rec(gamma, fixvars, e.scrutinee)
            ml, tl, el = rec(
                {**gamma, e.left_var: ts.left}, fixvars - {e.left_var}, e.left_body
            )
            mr, _, er = rec(
                {**gamma, e.right_var: ts.right}, fixvars - {e.right_var}, e.right_body
            )
            e2 = el | er
            eps = e1 | e2
            tlp = self.pure(tl)
            z = self.fresh("z")
            inner = Match(
                Var(z),
                e.left_var,
                self._coerce_app(el, e2, tlp, ml),
                e.right_var,
                self._coerce_app(er, e2, tlp, mr),
            )
            body = self._coerce_app(e2, eps, tlp, inner)
            return (
                self._bind(
                    eps, self.pure(ts), tlp,
                    self._coerce_app(e1, eps, self.pure(ts), ms), z, body,
                ),
                tl,
                eps,
            )
        if isinstance(e, Lam):
            mb, tb, eb = rec(
                {**gamma, e.var: e.var_type}, fixvars - {e.var}, e.body
            )
            latent = e.latent_eff if e.latent_eff is not None else eb
            body = self._coerce_app(eb, latent, self.pure(tb), mb)
            src = FunEff(e.var_type, latent, tb)
            return Lam(e.var, self.pure(e.var_type), body), src, EMPTY
        if isinstance(e, App):
            mf, tf, e2 = rec(gamma, fixvars, e.fn)
            ma, _, e3 = rec(gamma, fixvars, e.arg)
            e1 = tf.eff
            eps = e1 | e2 | e3
            argp = self.pure(tf.arg)
            resp = self.pure(tf.res)
            f = self.fresh("f")
            x = self.fresh("x")
            inner = self._bind(
                eps, argp, resp,
                self._coerce_app(e3, eps, argp, ma),
                x,
                self._coerce_app(e1, eps, resp, App(Var(f), Var(x))),
            )
            outer = self._bind(
                eps, self.pure(tf), resp,
                self._coerce_app(e2, eps, self.pure(tf), mf), f, inner,
            )
            return outer, tf.res, eps
        if isinstance(e, LabelE):
            m, t, eps = rec(gamma, fixvars, e.body)
            out = Labeled(e.label, t)
            x = self.fresh("x")
            body = self._eta_app(eps, self.pure(out), LabelE(e.label, Var(x)))
            return self._bind(eps, self.pure(t), self.pure(out), m, x, body), out, eps
        if isinstance(e, Unlabel):
            m1, lt, e1 = rec(gamma, fixvars, e.labeled)
            m2, t2, e2 = rec({**gamma, e.var: lt.body}, fixvars - {e.var}, e.body)
            eps = e1 | e2
            v = self.fresh("v")
            body = self._coerce_app(
                e2, eps, self.pure(t2), Unlabel(Var(v), e.var, m2)
            )
            return (
                self._bind(
                    eps, self.pure(lt), self.pure(t2),
                    self._coerce_app(e1, eps, self.pure(lt), m1), v, body,
                ),
                t2,
                eps,
            )
        if isinstance(e, Read):
            return Lam("s", sigma, Var("s")), sigma, R
        if isinstance(e, Write):
            m, _, eb = rec(gamma, fixvars, e.body)
            eps = eb | frozenset({"W"})
            x = self.fresh("x")
            cell = Lam("s", sigma, Pair(UnitVal(), Var(x)))
            body = self._coerce_app(frozenset({"W"}), eps, UNIT, cell)
            return self._bind(eps, sigma, UNIT, self._coerce_app(eb, eps, sigma, m), x, body), UNIT, eps
        if isinstance(e, Throw):
            return _inl_throw(policy, self.pure(e.annot)), e.annot, E
        if isinstance(e, TryCatch):
            m1, t, e1 = rec(gamma, fixvars, e.try_body)
            m2, _, e2 = rec(gamma, fixvars, e.catch_body)
            eps_min = (e1 - {"E"}) | e2
            tp = self.pure(t)
            d = norm_eff(policy.mode, e1 | {"E"})
            x = self.fresh("x")
            y = self.fresh("y")
            v = self.fresh("v")
            if d == E:
                m1c = self._coerce_app(e1, E, tp, m1)
                body = Match(Var(x), y, m2, v, self._eta_app(e2, tp, Var(v)))
                return Unlabel(m1c, x, body), t, eps_min
            if d == RE:
                res = e2 | R
                m1c = self._coerce_app(e1, RE, tp, m1)
                s = self.fresh("s")
                branch_l = App(self._coerce_app(e2, res, tp, m2), Var(s))
                branch_r = App(self._eta_app(res, tp, Var(v)), Var(s))
                body = Unlabel(
                    App(m1c, Var(s)), x, Match(Var(x), y, branch_l, v, branch_r)
                )
                return Lam(s, sigma, body), t, eps_min
            if d == RWE:
                res = e2 | RW
                m1c = self._coerce_app(e1, RWE, tp, m1)
                s = self.fresh("s")
                pv = self.fresh("p")
                branch_l = App(self._coerce_app(e2, res, tp, m2), Proj(2, Var(pv)))
                branch_r = App(self._eta_app(res, tp, Var(v)), Proj(2, Var(pv)))
                inner = Unlabel(
                    Proj(1, Var(pv)), x, Match(Var(x), y, branch_l, v, branch_r)
                )
                split = Lam(pv, Prod(_exn_sum(policy, tp), sigma), inner)
                return Lam(s, sigma, App(split, App(m1c, Var(s)))), t, eps_min
            raise ValueError(f"no try/catch clause for {show_effect(d)}")
        if isinstance(e, Fix):
            mb, _, eb = rec({**gamma, e.var: e.annot}, fixvars | {e.var}, e.body)
            tp = self.pure(e.annot)
            body = self._coerce_app(eb, PNT_SET, tp, mb)
            return Fix(e.var, Lift(tp), body), e.annot, PNT_SET
        raise CheckError("WrongCalculus", f"capture cannot translate {format_expr(e)}", getattr(e, "pos", None))


def capture(
    policy: EffectPolicy, sigma: Type | None, gamma: dict, e: Expr
) -> tuple[Expr, Type, frozenset]:
    """Translate a well-typed effectful expression into pure form.

    Returns (pure expression, source type, principal effect); the output is
    re-checked in the pure system at the corresponding monad type and a
    failure raises InternalIllTyped.
    """
    if policy.mode == MODE_STATE_EXN and sigma is not None:
        validate_sigma(policy, sigma)
    src_t, src_eps = infer_effect(policy, gamma, e, sigma)
    avoid = all_names(e) | set(gamma)
    tr = _Capture(policy, sigma, frozenset(avoid))
    rho, t, eps = tr.cap(dict(gamma), frozenset(), e)
    if (t, eps) != (src_t, src_eps):
        raise InternalIllTyped(
            f"capture derived ({format_expr(e)}) at effect {show_effect(eps)} "
            f"but inference says {show_effect(src_eps)}"
        )
    pure_gamma = {x: pure_type(policy, sigma, tx) for x, tx in gamma.items()}
    expected = monad_type(policy, sigma, eps, pure_type(policy, sigma, t))
    try:
        actual = check_pure(policy, pure_gamma, rho)
    except CheckError as exc:
        raise InternalIllTyped(f"capture output ill-typed: {exc}") from exc
    if actual != expected:
        raise InternalIllTyped(
            f"capture output has type {format_type(actual)} "
            f"but expected {format_type(expected)}"
        )
    return rho, t, eps
