"""Fuel-bounded small-step evaluation: the pure language (with lift, seq and
fix unrolling) and the state-and-exceptions machine over <expression, cell>
configurations.

Call-by-value, leftmost-innermost. Computation happens under label and in
unlabel's first position, never in unlabel's body or a try's handler. Throws
propagate by collapsing the surrounding throw context (everything except try
frames) in one step.
"""

from __future__ import annotations

from dataclasses import dataclass

from .syntax import (
    App,
    Expr,
    Fix,
    Inl,
    Inr,
    LabelE,
    Lam,
    Let,
    LiftE,
    Match,
    Pair,
    Proj,
    Read,
    Seq,
    Throw,
    TryCatch,
    Unlabel,
    UnitVal,
    Var,
    Write,
    format_expr,
    subst,
)

DEFAULT_FUEL = 10_000

# Fixpoint unrolling copies the whole fix into itself, so a diverging
# recursion grows the term without bound; terminating recursions in this
# calculus descend on bounded first-order data and stay shallow. Runs whose
# terms outgrow this bound are classified as timeouts.
DEPTH_CAP = 800
_DEPTH_CHECK_EVERY = 16


class StuckStep(Exception):
    """No rule applies to a non-value configuration."""


class NotComparable:
    def __repr__(self):
        return "NotComparable"


NOT_COMPARABLE = NotComparable()


@dataclass(frozen=True)
class Outcome:
    kind: str  # 'value' | 'thrown' | 'timeout' | 'stuck'
    value: Expr | None = None
    state: Expr | None = None
    steps: int = 0

    def __str__(self) -> str:
        if self.kind == "value":
            s = format_expr(self.value)
            if self.state is not None:
                s += f" / state {format_expr(self.state)}"
            return s
        if self.kind == "thrown":
            s = "throw"
            if self.state is not None:
                s += f" / state {format_expr(self.state)}"
            return s
        return self.kind


def is_value(e: Expr) -> bool:
    stack = [e]
    while stack:
        x = stack.pop()
        if isinstance(x, (UnitVal, Lam)):
            continue
        if isinstance(x, Pair):
            stack.append(x.fst)
            stack.append(x.snd)
        elif isinstance(x, (Inl, Inr, LabelE, LiftE)):
            stack.append(x.body)
        else:
            return False
    return True


_CHILD_ATTRS = (
    "fst", "snd", "body", "scrutinee", "left_body", "right_body",
    "fn", "arg", "labeled", "try_body", "catch_body", "first", "bound",
)


def term_depth(e: Expr) -> int:
    worst = 0
    stack = [(e, 0)]
    while stack:
        x, d = stack.pop()
        if d > worst:
            worst = d
        for attr in _CHILD_ATTRS:
            child = getattr(x, attr, None)
            if isinstance(child, Expr):
                stack.append((child, d + 1))
    return worst


def contains_lambda(v: Expr) -> bool:
    if isinstance(v, Lam):
        return True
    if isinstance(v, Pair):
        return contains_lambda(v.fst) or contains_lambda(v.snd)
    if isinstance(v, (Inl, Inr, LabelE, LiftE)):
        return contains_lambda(v.body)
    return False


def value_eq(v1: Expr, v2: Expr):
    """Structural equality of first-order values, ignoring annotations.

    Returns NOT_COMPARABLE when either side contains a lambda.
    """
    if contains_lambda(v1) or contains_lambda(v2):
        return NOT_COMPARABLE
    return _veq(v1, v2)


def _veq(a: Expr, b: Expr) -> bool:
    if isinstance(a, UnitVal):
        return isinstance(b, UnitVal)
    if isinstance(a, Pair):
        return isinstance(b, Pair) and _veq(a.fst, b.fst) and _veq(a.snd, b.snd)
    if isinstance(a, Inl):
        return isinstance(b, Inl) and _veq(a.body, b.body)
    if isinstance(a, Inr):
        return isinstance(b, Inr) and _veq(a.body, b.body)
    if isinstance(a, LabelE):
        return isinstance(b, LabelE) and a.label == b.label and _veq(a.body, b.body)
    if isinstance(a, LiftE):
        return isinstance(b, LiftE) and _veq(a.body, b.body)
    return False


# ---------------------------------------------------------------------------
# Pure stepper
# ---------------------------------------------------------------------------


def step_pure(e: Expr) -> Expr | None:
    """One leftmost-innermost step; None when e is a value."""
    if is_value(e):
        return None
    return _sp(e)


def _sp(e: Expr) -> Expr:
    if isinstance(e, Pair):
        if not is_value(e.fst):
            return Pair(_sp(e.fst), e.snd)
        return Pair(e.fst, _sp(e.snd))
    if isinstance(e, Proj):
        if not is_value(e.body):
            return Proj(e.index, _sp(e.body))
        if isinstance(e.body, Pair):
            return e.body.fst if e.index == 1 else e.body.snd
        raise StuckStep(f"projection from {format_expr(e.body)}")
    if isinstance(e, Inl):
        return Inl(_sp(e.body), e.annot)
    if isinstance(e, Inr):
        return Inr(_sp(e.body), e.annot)
    if isinstance(e, Match):
        if not is_value(e.scrutinee):
            return Match(_sp(e.scrutinee), e.left_var, e.left_body, e.right_var, e.right_body)
        if isinstance(e.scrutinee, Inl):
            return subst(e.left_body, e.left_var, e.scrutinee.body)
        if isinstance(e.scrutinee, Inr):
            return subst(e.right_body, e.right_var, e.scrutinee.body)
        raise StuckStep(f"match on {format_expr(e.scrutinee)}")
    if isinstance(e, App):
        if not is_value(e.fn):
            return App(_sp(e.fn), e.arg)
        if not is_value(e.arg):
            return App(e.fn, _sp(e.arg))
        if isinstance(e.fn, Lam):
            return subst(e.fn.body, e.fn.var, e.arg)
        raise StuckStep(f"application of {format_expr(e.fn)}")
    if isinstance(e, LabelE):
        return LabelE(e.label, _sp(e.body))
    if isinstance(e, Unlabel):
        if not is_value(e.labeled):
            return Unlabel(_sp(e.labeled), e.var, e.body)
        if isinstance(e.labeled, LabelE):
            return subst(e.body, e.var, e.labeled.body)
        raise StuckStep(f"unlabel of {format_expr(e.labeled)}")
    if isinstance(e, Fix):
        return subst(e.body, e.var, e)
    if isinstance(e, LiftE):
        return LiftE(_sp(e.body))
    if isinstance(e, Seq):
        if not is_value(e.first):
            return Seq(e.var, _sp(e.first), e.body)
        if isinstance(e.first, LiftE):
            return subst(e.body, e.var, e.first.body)
        raise StuckStep(f"seq of {format_expr(e.first)}")
    if isinstance(e, Var):
        raise StuckStep(f"free variable {e.name}")
    if isinstance(e, Let):
        raise StuckStep("let must be desugared before evaluation")
    raise StuckStep(f"no pure rule for {format_expr(e)}")


# ---------------------------------------------------------------------------
# State machine
# ---------------------------------------------------------------------------

_STEP = "step"
_THROW = "throw"


def step_state(e: Expr, state: Expr) -> tuple[Expr, Expr] | None:
    """One machine step; None when the configuration is terminal (a value or
    a bare top-level throw)."""
    if is_value(e) or isinstance(e, Throw):
        return None
    tag, a, b = _sst(e, state)
    if tag == _STEP:
        return a, b
    # e is a maximal throw context around a throw: collapse it in one step.
    return a, state


def _sst(e: Expr, s: Expr):
    """Returns ('step', e', s') or ('throw', throw_node, None).

    A 'throw' result means e is T[throw] for the maximal throw context T not
    crossing a try frame; the caller decides whether a try catches it.
    """

    def child(c: Expr, rebuild):
        # One evaluation-position child: step it, or propagate its throw.
        if isinstance(c, Throw):
            return _THROW, c, None
        tag, a, b = _sst(c, s)
        if tag == _STEP:
            return _STEP, rebuild(a), b
        return _THROW, a, None

    if isinstance(e, Pair):
        if not is_value(e.fst):
            return child(e.fst, lambda c: Pair(c, e.snd))
        return child(e.snd, lambda c: Pair(e.fst, c))
    if isinstance(e, Proj):
        if not is_value(e.body):
            return child(e.body, lambda c: Proj(e.index, c))
        if isinstance(e.body, Pair):
            return _STEP, (e.body.fst if e.index == 1 else e.body.snd), s
        raise StuckStep(f"projection from {format_expr(e.body)}")
    if isinstance(e, Inl):
        return child(e.body, lambda c: Inl(c, e.annot))
    if isinstance(e, Inr):
        return child(e.body, lambda c: Inr(c, e.annot))
    if isinstance(e, Match):
        if not is_value(e.scrutinee):
            return child(
                e.scrutinee,
                lambda c: Match(c, e.left_var, e.left_body, e.right_var, e.right_body),
            )
        if isinstance(e.scrutinee, Inl):
            return _STEP, subst(e.left_body, e.left_var, e.scrutinee.body), s
        if isinstance(e.scrutinee, Inr):
            return _STEP, subst(e.right_body, e.right_var, e.scrutinee.body), s
        raise StuckStep(f"match on {format_expr(e.scrutinee)}")
    if isinstance(e, App):
        if not is_value(e.fn):
            return child(e.fn, lambda c: App(c, e.arg))
        if not is_value(e.arg):
            return child(e.arg, lambda c: App(e.fn, c))
        if isinstance(e.fn, Lam):
            return _STEP, subst(e.fn.body, e.fn.var, e.arg), s
        raise StuckStep(f"application of {format_expr(e.fn)}")
    if isinstance(e, LabelE):
        return child(e.body, lambda c: LabelE(e.label, c))
    if isinstance(e, Unlabel):
        if not is_value(e.labeled):
            return child(e.labeled, lambda c: Unlabel(c, e.var, e.body))
        if isinstance(e.labeled, LabelE):
            return _STEP, subst(e.body, e.var, e.labeled.body), s
        raise StuckStep(f"unlabel of {format_expr(e.labeled)}")
    if isinstance(e, Read):
        return _STEP, s, s
    if isinstance(e, Write):
        if not is_value(e.body):
            return child(e.body, lambda c: Write(c))
        return _STEP, UnitVal(), e.body
    if isinstance(e, TryCatch):
        t = e.try_body
        if is_value(t):
            return _STEP, t, s
        if isinstance(t, Throw):
            return _STEP, e.catch_body, s
        tag, a, b = _sst(t, s)
        if tag == _STEP:
            return _STEP, TryCatch(a, e.catch_body), b
        # The inner throw context collapses up to this try frame.
        return _STEP, TryCatch(a, e.catch_body), s
    if isinstance(e, Fix):
        return _STEP, subst(e.body, e.var, e), s
    if isinstance(e, Var):
        raise StuckStep(f"free variable {e.name}")
    if isinstance(e, (LiftE, Seq)):
        raise StuckStep("lift/seq are not state-machine constructs")
    if isinstance(e, Let):
        raise StuckStep("let must be desugared before evaluation")
    raise StuckStep(f"no machine rule for {format_expr(e)}")


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------


def run(e: Expr, initial_state: Expr | None = None, fuel: int = DEFAULT_FUEL) -> Outcome:
    """Iterate the appropriate stepper up to `fuel` times and classify."""
    steps = 0
    if initial_state is None:
        cur = e
        while steps < fuel:
            try:
                nxt = step_pure(cur)
            except StuckStep:
                return Outcome("stuck", steps=steps)
            if nxt is None:
                return Outcome("value", value=cur, steps=steps)
            cur = nxt
            steps += 1
            if steps % _DEPTH_CHECK_EVERY == 0 and term_depth(cur) > DEPTH_CAP:
                return Outcome("timeout", steps=steps)
        return Outcome("timeout", steps=steps)
    cur, state = e, initial_state
    while steps < fuel:
        try:
            nxt = step_state(cur, state)
        except StuckStep:
            return Outcome("stuck", state=state, steps=steps)
        if nxt is None:
            if isinstance(cur, Throw):
                return Outcome("thrown", state=state, steps=steps)
            return Outcome("value", value=cur, state=state, steps=steps)
        cur, state = nxt
        steps += 1
        if steps % _DEPTH_CHECK_EVERY == 0 and term_depth(cur) > DEPTH_CAP:
            return Outcome("timeout", state=state, steps=steps)
    return Outcome("timeout", state=state, steps=steps)


# ---------------------------------------------------------------------------
# Redex uniqueness (used by the determinism test)
# ---------------------------------------------------------------------------


def decompositions(e: Expr, state_mode: bool = False) -> list[Expr]:
    """All redexes reachable by the evaluation-context grammar.

    The discipline admits at most one; the test asserts it.
    """
    out = []

    def walk(x: Expr):
        if _is_redex(x, state_mode):
            out.append(x)
        for c, ok in _eval_children(x, state_mode):
            if ok:
                walk(c)

    walk(e)
    return out


def _is_redex(x: Expr, state_mode: bool) -> bool:
    if isinstance(x, App):
        return is_value(x.fn) and is_value(x.arg) and isinstance(x.fn, Lam)
    if isinstance(x, Proj):
        return is_value(x.body) and isinstance(x.body, Pair)
    if isinstance(x, Match):
        return is_value(x.scrutinee) and isinstance(x.scrutinee, (Inl, Inr))
    if isinstance(x, Unlabel):
        return is_value(x.labeled) and isinstance(x.labeled, LabelE)
    if isinstance(x, Fix):
        return True
    if isinstance(x, Seq) and not state_mode:
        return is_value(x.first) and isinstance(x.first, LiftE)
    if state_mode:
        if isinstance(x, Read):
            return True
        if isinstance(x, Write):
            return is_value(x.body)
        if isinstance(x, TryCatch):
            return is_value(x.try_body) or isinstance(x.try_body, Throw)
    return False


def _eval_children(x: Expr, state_mode: bool):
    if isinstance(x, Pair):
        return [(x.fst, not is_value(x.fst)), (x.snd, is_value(x.fst) and not is_value(x.snd))]
    if isinstance(x, (Inl, Inr, LabelE, LiftE, Proj, Write)):
        body = x.body
        return [(body, not is_value(body))]
    if isinstance(x, Match):
        return [(x.scrutinee, not is_value(x.scrutinee))]
    if isinstance(x, App):
        return [(x.fn, not is_value(x.fn)), (x.arg, is_value(x.fn) and not is_value(x.arg))]
    if isinstance(x, Unlabel):
        return [(x.labeled, not is_value(x.labeled))]
    if isinstance(x, Seq):
        return [(x.first, not is_value(x.first))]
    if isinstance(x, TryCatch) and state_mode:
        t = x.try_body
        return [(t, not (is_value(t) or isinstance(t, Throw)))]
    return []
