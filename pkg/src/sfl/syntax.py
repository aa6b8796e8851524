"""Shared AST, surface syntax, parser, printer, substitution, and let-desugaring
for the three calculi (pure, pc-labeled, type-and-effect).

Surface grammar (one expression language; checkers reject out-of-calculus
constructs):

    types   T ::= unit | T+T | T*T | T->T | T ->[pc L] T | T ->[eff {R,W,E}] T
                | L[lab] T | Lift T
    exprs   e ::= () | (e,e) | fst e | snd e | inl e : T | inr e : T
                | match e with inl x -> e | inr y -> e
                | fun (x:T) -> e | fun [pc L] (x:T) -> e | fun [eff {..}] (x:T) -> e
                | e e | label[lab] e | unlabel e as x in e
                | read | write e | throw : T | try e catch e
                | fix f : T = e | lift e | seq x = e in e | let x = e in e

Prefix type operators (L[..], Lift) bind tighter than * and +; arrows are
right-associative and bind loosest. Prefix expression keywords (fst, snd,
write, lift, label[..]) consume the longest following application chain.

Program files: `mode state-exn|pnt`, `sigma T` (state-exn only), zero or more
`var NAME : T` lines, an optional `policy k=v ...` line, then `body e`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .labels import Label, LabelLattice, UnknownLabel
from .effects import MODE_PNT, MODE_STATE_EXN, parse_effect, show_effect


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        self.line = line
        self.col = col
        super().__init__(f"parse error at line {line}, column {col}: {message}")


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Type:
    pass


@dataclass(frozen=True, slots=True)
class Unit(Type):
    pass


@dataclass(frozen=True, slots=True)
class Sum(Type):
    left: Type
    right: Type


@dataclass(frozen=True, slots=True)
class Prod(Type):
    left: Type
    right: Type


@dataclass(frozen=True, slots=True)
class FunPure(Type):
    arg: Type
    res: Type


@dataclass(frozen=True, slots=True)
class FunPc(Type):
    arg: Type
    pc: Label
    res: Type


@dataclass(frozen=True, slots=True)
class FunEff(Type):
    arg: Type
    eff: frozenset
    res: Type


@dataclass(frozen=True, slots=True)
class Labeled(Type):
    label: Label
    body: Type


@dataclass(frozen=True, slots=True)
class Lift(Type):
    body: Type


UNIT = Unit()
BOOLISH = Sum(UNIT, UNIT)  # the observation type unit+unit


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Expr:
    pass


def _pos_field():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True, slots=True)
class Var(Expr):
    name: str
    pos: tuple | None = _pos_field()


@dataclass(frozen=True, slots=True)
class UnitVal(Expr):
    pos: tuple | None = _pos_field()


@dataclass(frozen=True, slots=True)
class Pair(Expr):
    fst: Expr
    snd: Expr
    pos: tuple | None = _pos_field()


@dataclass(frozen=True, slots=True)
class Proj(Expr):
    index: int  # 1 or 2
    body: Expr
    pos: tuple | None = _pos_field()


@dataclass(frozen=True, slots=True)
class Inl(Expr):
    body: Expr
    annot: Type  # the whole sum type
    pos: tuple | None = _pos_field()


@dataclass(frozen=True, slots=True)
class Inr(Expr):
    body: Expr
    annot: Type
    pos: tuple | None = _pos_field()


@dataclass(frozen=True, slots=True)
class Match(Expr):
    scrutinee: Expr
    left_var: str
    left_body: Expr
    right_var: str
    right_body: Expr
    pos: tuple | None = _pos_field()


@dataclass(frozen=True, slots=True)
class Lam(Expr):
    var: str
    var_type: Type
    body: Expr
    latent_pc: Label | None = None
    latent_eff: frozenset | None = None
    pos: tuple | None = _pos_field()


@dataclass(frozen=True, slots=True)
class App(Expr):
    fn: Expr
    arg: Expr
    pos: tuple | None = _pos_field()


@dataclass(frozen=True, slots=True)
class LabelE(Expr):
    label: Label
    body: Expr
    pos: tuple | None = _pos_field()


@dataclass(frozen=True, slots=True)
class Unlabel(Expr):
    labeled: Expr
    var: str
    body: Expr
    pos: tuple | None = _pos_field()


@dataclass(frozen=True, slots=True)
class Read(Expr):
    pos: tuple | None = _pos_field()


@dataclass(frozen=True, slots=True)
class Write(Expr):
    body: Expr
    pos: tuple | None = _pos_field()


@dataclass(frozen=True, slots=True)
class Throw(Expr):
    annot: Type
    pos: tuple | None = _pos_field()


@dataclass(frozen=True, slots=True)
class TryCatch(Expr):
    try_body: Expr
    catch_body: Expr
    pos: tuple | None = _pos_field()


@dataclass(frozen=True, slots=True)
class Fix(Expr):
    var: str
    annot: Type
    body: Expr
    pos: tuple | None = _pos_field()


@dataclass(frozen=True, slots=True)
class LiftE(Expr):
    body: Expr
    pos: tuple | None = _pos_field()


@dataclass(frozen=True, slots=True)
class Seq(Expr):
    var: str
    first: Expr
    body: Expr
    pos: tuple | None = _pos_field()


@dataclass(frozen=True, slots=True)
class Let(Expr):
    var: str
    bound: Expr
    body: Expr
    pos: tuple | None = _pos_field()


@dataclass(frozen=True, slots=True)
class Program:
    mode: str
    sigma: Type | None
    context: tuple  # of (name, Type)
    body: Expr
    policy_fields: tuple = ()  # of (key, value) raw strings


# ---------------------------------------------------------------------------
# Fresh names
# ---------------------------------------------------------------------------


class FreshNames:
    """Deterministic fresh-name supply: base name plus a running counter."""

    def __init__(self):
        self._n = 0

    def fresh(self, base: str, avoid=frozenset()) -> str:
        base = base.split("_")[0] or "x"
        while True:
            self._n += 1
            cand = f"{base}_{self._n}"
            if cand not in avoid:
                return cand


_NAMER = FreshNames()


def reset_fresh_names() -> None:
    global _NAMER
    _NAMER = FreshNames()


# ---------------------------------------------------------------------------
# Free variables and substitution
# ---------------------------------------------------------------------------


def free_vars(e: Expr) -> frozenset:
    if isinstance(e, Var):
        return frozenset({e.name})
    if isinstance(e, (UnitVal, Read, Throw)):
        return frozenset()
    if isinstance(e, Pair):
        return free_vars(e.fst) | free_vars(e.snd)
    if isinstance(e, (Proj, Inl, Inr, LabelE, Write, LiftE)):
        return free_vars(e.body)
    if isinstance(e, Match):
        return (
            free_vars(e.scrutinee)
            | (free_vars(e.left_body) - {e.left_var})
            | (free_vars(e.right_body) - {e.right_var})
        )
    if isinstance(e, Lam):
        return free_vars(e.body) - {e.var}
    if isinstance(e, App):
        return free_vars(e.fn) | free_vars(e.arg)
    if isinstance(e, Unlabel):
        return free_vars(e.labeled) | (free_vars(e.body) - {e.var})
    if isinstance(e, TryCatch):
        return free_vars(e.try_body) | free_vars(e.catch_body)
    if isinstance(e, Fix):
        return free_vars(e.body) - {e.var}
    if isinstance(e, Seq):
        return free_vars(e.first) | (free_vars(e.body) - {e.var})
    if isinstance(e, Let):
        return free_vars(e.bound) | (free_vars(e.body) - {e.var})
    raise TypeError(f"not an expression: {e!r}")


def all_names(e: Expr) -> frozenset:
    """Every variable name occurring in e, free or bound."""
    names: set[str] = set()

    def walk(x: Expr):
        if isinstance(x, Var):
            names.add(x.name)
            return
        for attr in ("left_var", "right_var", "var"):
            bound = getattr(x, attr, None)
            if isinstance(bound, str):
                names.add(bound)
        for attr in (
            "fst", "snd", "body", "scrutinee", "left_body", "right_body",
            "fn", "arg", "labeled", "try_body", "catch_body", "first", "bound",
        ):
            child = getattr(x, attr, None)
            if isinstance(child, Expr):
                walk(child)

    walk(e)
    return frozenset(names)


def _subst_binder(binder: str, body: Expr, x: str, v: Expr, v_free: frozenset):
    """Substitute under one binder, renaming it if it would capture."""
    if binder == x:
        return binder, body
    if binder in v_free and x in free_vars(body):
        avoid = v_free | free_vars(body) | {x}
        fresh = _NAMER.fresh(binder, avoid)
        body = subst(body, binder, Var(fresh))
        binder = fresh
    return binder, subst(body, x, v)


def subst(e: Expr, x: str, v: Expr) -> Expr:
    """Capture-avoiding substitution of v for x in e."""
    v_free = free_vars(v)
    if isinstance(e, Var):
        return v if e.name == x else e
    if isinstance(e, (UnitVal, Read, Throw)):
        return e
    if isinstance(e, Pair):
        return Pair(subst(e.fst, x, v), subst(e.snd, x, v))
    if isinstance(e, Proj):
        return Proj(e.index, subst(e.body, x, v))
    if isinstance(e, Inl):
        return Inl(subst(e.body, x, v), e.annot)
    if isinstance(e, Inr):
        return Inr(subst(e.body, x, v), e.annot)
    if isinstance(e, LabelE):
        return LabelE(e.label, subst(e.body, x, v))
    if isinstance(e, Write):
        return Write(subst(e.body, x, v))
    if isinstance(e, LiftE):
        return LiftE(subst(e.body, x, v))
    if isinstance(e, Match):
        lv, lb = _subst_binder(e.left_var, e.left_body, x, v, v_free)
        rv, rb = _subst_binder(e.right_var, e.right_body, x, v, v_free)
        return Match(subst(e.scrutinee, x, v), lv, lb, rv, rb)
    if isinstance(e, Lam):
        var, body = _subst_binder(e.var, e.body, x, v, v_free)
        return Lam(var, e.var_type, body, e.latent_pc, e.latent_eff)
    if isinstance(e, App):
        return App(subst(e.fn, x, v), subst(e.arg, x, v))
    if isinstance(e, Unlabel):
        var, body = _subst_binder(e.var, e.body, x, v, v_free)
        return Unlabel(subst(e.labeled, x, v), var, body)
    if isinstance(e, TryCatch):
        return TryCatch(subst(e.try_body, x, v), subst(e.catch_body, x, v))
    if isinstance(e, Fix):
        var, body = _subst_binder(e.var, e.body, x, v, v_free)
        return Fix(var, e.annot, body)
    if isinstance(e, Seq):
        var, body = _subst_binder(e.var, e.body, x, v, v_free)
        return Seq(var, subst(e.first, x, v), body)
    if isinstance(e, Let):
        var, body = _subst_binder(e.var, e.body, x, v, v_free)
        return Let(var, subst(e.bound, x, v), body)
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Desugaring
# ---------------------------------------------------------------------------


def desugar(e: Expr, synth) -> Expr:
    """Rewrite every Let into an application of an annotated lambda.

    `synth(gamma, joined_labels, expr)` must return the type of `expr` under
    the bindings collected so far; `joined_labels` lists the labels of the
    enclosing unlabel scrutinees (a pc-aware synthesizer joins them onto its
    base pc). The walk is inside-out, so nested lets in bound expressions are
    eliminated before their types are synthesized.
    """

    def walk(gamma: dict, joins: tuple, e: Expr) -> Expr:
        if isinstance(e, (Var, UnitVal, Read, Throw)):
            return e
        if isinstance(e, Pair):
            return Pair(walk(gamma, joins, e.fst), walk(gamma, joins, e.snd))
        if isinstance(e, Proj):
            return Proj(e.index, walk(gamma, joins, e.body))
        if isinstance(e, Inl):
            return Inl(walk(gamma, joins, e.body), e.annot)
        if isinstance(e, Inr):
            return Inr(walk(gamma, joins, e.body), e.annot)
        if isinstance(e, LabelE):
            return LabelE(e.label, walk(gamma, joins, e.body))
        if isinstance(e, Write):
            return Write(walk(gamma, joins, e.body))
        if isinstance(e, LiftE):
            return LiftE(walk(gamma, joins, e.body))
        if isinstance(e, Match):
            scrut = walk(gamma, joins, e.scrutinee)
            st = synth(gamma, joins, scrut)
            if not isinstance(st, Sum):
                lt = rt = UNIT  # ill-typed either way; let the checker report it
            else:
                lt, rt = st.left, st.right
            lb = walk({**gamma, e.left_var: lt}, joins, e.left_body)
            rb = walk({**gamma, e.right_var: rt}, joins, e.right_body)
            return Match(scrut, e.left_var, lb, e.right_var, rb)
        if isinstance(e, Lam):
            body = walk({**gamma, e.var: e.var_type}, joins, e.body)
            return Lam(e.var, e.var_type, body, e.latent_pc, e.latent_eff)
        if isinstance(e, App):
            return App(walk(gamma, joins, e.fn), walk(gamma, joins, e.arg))
        if isinstance(e, Unlabel):
            lab = walk(gamma, joins, e.labeled)
            lt = synth(gamma, joins, lab)
            if isinstance(lt, Labeled):
                inner, joined = lt.body, joins + (lt.label,)
            else:
                inner, joined = UNIT, joins
            body = walk({**gamma, e.var: inner}, joined, e.body)
            return Unlabel(lab, e.var, body)
        if isinstance(e, TryCatch):
            return TryCatch(walk(gamma, joins, e.try_body), walk(gamma, joins, e.catch_body))
        if isinstance(e, Fix):
            body = walk({**gamma, e.var: e.annot}, joins, e.body)
            return Fix(e.var, e.annot, body)
        if isinstance(e, Seq):
            first = walk(gamma, joins, e.first)
            ft = synth(gamma, joins, first)
            inner = ft.body if isinstance(ft, Lift) else UNIT
            return Seq(e.var, first, walk({**gamma, e.var: inner}, joins, e.body))
        if isinstance(e, Let):
            bound = walk(gamma, joins, e.bound)
            bt = synth(gamma, joins, bound)
            body = walk({**gamma, e.var: bt}, joins, e.body)
            return App(Lam(e.var, bt, body), bound)
        raise TypeError(f"not an expression: {e!r}")

    return walk({}, (), e)


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

# Type precedence: 0 arrow, 1 sum, 2 prod, 3 prefix/atom.


def format_type(t: Type, prec: int = 0) -> str:
    if isinstance(t, Unit):
        return "unit"
    if isinstance(t, Sum):
        s = f"{format_type(t.left, 2)} + {format_type(t.right, 2)}"
        return f"({s})" if prec > 1 else s
    if isinstance(t, Prod):
        s = f"{format_type(t.left, 3)} * {format_type(t.right, 3)}"
        return f"({s})" if prec > 2 else s
    if isinstance(t, FunPure):
        s = f"{format_type(t.arg, 1)} -> {format_type(t.res, 0)}"
        return f"({s})" if prec > 0 else s
    if isinstance(t, FunPc):
        s = f"{format_type(t.arg, 1)} ->[pc {t.pc}] {format_type(t.res, 0)}"
        return f"({s})" if prec > 0 else s
    if isinstance(t, FunEff):
        s = f"{format_type(t.arg, 1)} ->[eff {show_effect(t.eff)}] {format_type(t.res, 0)}"
        return f"({s})" if prec > 0 else s
    if isinstance(t, Labeled):
        return f"L[{t.label}] {format_type(t.body, 3)}"
    if isinstance(t, Lift):
        return f"Lift {format_type(t.body, 3)}"
    raise TypeError(f"not a type: {t!r}")


# Expression precedence: 0 open forms, 1 annotated, 2 prefix, 3 application,
# 4 atom.


def format_expr(e: Expr, prec: int = 0) -> str:
    def wrap(s: str, at: int) -> str:
        return f"({s})" if prec > at else s

    if isinstance(e, Var):
        return e.name
    if isinstance(e, UnitVal):
        return "()"
    if isinstance(e, Read):
        return "read"
    if isinstance(e, Pair):
        return f"({format_expr(e.fst, 0)}, {format_expr(e.snd, 0)})"
    if isinstance(e, Proj):
        kw = "fst" if e.index == 1 else "snd"
        return wrap(f"{kw} {format_expr(e.body, 2)}", 2)
    if isinstance(e, Write):
        return wrap(f"write {format_expr(e.body, 2)}", 2)
    if isinstance(e, LiftE):
        return wrap(f"lift {format_expr(e.body, 2)}", 2)
    if isinstance(e, LabelE):
        return wrap(f"label[{e.label}] {format_expr(e.body, 2)}", 2)
    if isinstance(e, Inl):
        return wrap(f"inl {format_expr(e.body, 3)} : {format_type(e.annot)}", 1)
    if isinstance(e, Inr):
        return wrap(f"inr {format_expr(e.body, 3)} : {format_type(e.annot)}", 1)
    if isinstance(e, Throw):
        return wrap(f"throw : {format_type(e.annot)}", 1)
    if isinstance(e, App):
        return wrap(f"{format_expr(e.fn, 3)} {format_expr(e.arg, 4)}", 3)
    if isinstance(e, Lam):
        marker = ""
        if e.latent_pc is not None:
            marker = f"[pc {e.latent_pc}] "
        elif e.latent_eff is not None:
            marker = f"[eff {show_effect(e.latent_eff)}] "
        s = f"fun {marker}({e.var}:{format_type(e.var_type)}) -> {format_expr(e.body, 0)}"
        return wrap(s, 0)
    if isinstance(e, Match):
        s = (
            f"match {format_expr(e.scrutinee, 1)} with "
            f"inl {e.left_var} -> {format_expr(e.left_body, 1)} "
            f"| inr {e.right_var} -> {format_expr(e.right_body, 0)}"
        )
        return wrap(s, 0)
    if isinstance(e, Unlabel):
        s = f"unlabel {format_expr(e.labeled, 1)} as {e.var} in {format_expr(e.body, 0)}"
        return wrap(s, 0)
    if isinstance(e, TryCatch):
        s = f"try {format_expr(e.try_body, 1)} catch {format_expr(e.catch_body, 0)}"
        return wrap(s, 0)
    if isinstance(e, Fix):
        s = f"fix {e.var} : {format_type(e.annot)} = {format_expr(e.body, 0)}"
        return wrap(s, 0)
    if isinstance(e, Seq):
        s = f"seq {e.var} = {format_expr(e.first, 1)} in {format_expr(e.body, 0)}"
        return wrap(s, 0)
    if isinstance(e, Let):
        s = f"let {e.var} = {format_expr(e.bound, 1)} in {format_expr(e.body, 0)}"
        return wrap(s, 0)
    raise TypeError(f"not an expression: {e!r}")


def format_program(p: Program) -> str:
    lines = [f"mode {p.mode}"]
    if p.sigma is not None:
        lines.append(f"sigma {format_type(p.sigma)}")
    for name, t in p.context:
        lines.append(f"var {name} : {format_type(t)}")
    if p.policy_fields:
        lines.append("policy " + " ".join(f"{k}={v}" for k, v in p.policy_fields))
    lines.append(f"body {format_expr(p.body)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<arrow>->)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[()\[\]{},:=|+*])
    """,
    re.VERBOSE,
)

KEYWORDS = {
    "unit", "Lift", "L", "fun", "pc", "eff", "match", "with", "inl", "inr",
    "label", "unlabel", "as", "in", "read", "write", "throw", "try", "catch",
    "fix", "lift", "seq", "let", "fst", "snd",
}


@dataclass(frozen=True, slots=True)
class Token:
    kind: str  # 'ident', 'kw', 'punct', 'arrow', 'eof'
    text: str
    line: int
    col: int


def tokenize(text: str, line_offset: int = 0) -> list[Token]:
    tokens = []
    line, col = 1 + line_offset, 1
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise ParseError(f"unexpected character {text[i]!r}", line, col)
        kind = m.lastgroup
        s = m.group()
        if kind not in ("ws", "comment"):
            if kind == "ident":
                kind = "kw" if s in KEYWORDS else "ident"
            tokens.append(Token(kind, s, line, col))
        nl = s.count("\n")
        if nl:
            line += nl
            col = len(s) - s.rfind("\n")
        else:
            col += len(s)
        i = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[Token], lattice: LabelLattice | None, mode: str):
        self.toks = tokens
        self.i = 0
        self.lattice = lattice
        self.mode = mode
        self.scope: list[str] = []
        self.renames: dict[str, list[str]] = {}
        self.namer = FreshNames()

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.peek()
        self.i += 1
        return t

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.peek()
        raise ParseError(msg, tok.line, tok.col)

    def expect(self, kind: str, text: str | None = None) -> Token:
        t = self.peek()
        if t.kind != kind or (text is not None and t.text != text):
            want = text or kind
            self.error(f"expected {want!r}, found {t.text or 'end of input'!r}")
        return self.next()

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.peek()
        return t.kind == kind and (text is None or t.text == text)

    # -- labels -------------------------------------------------------------

    def parse_label(self) -> Label:
        t = self.expect("ident")
        if self.lattice is not None:
            try:
                return self.lattice.label(t.text)
            except UnknownLabel:
                raise UnknownLabel(
                    f"label {t.text!r} at line {t.line}, column {t.col} "
                    "is not in the lattice"
                ) from None
        return Label(t.text)

    def parse_effect_set(self) -> frozenset:
        t = self.expect("punct", "{")
        atoms = []
        while not self.at("punct", "}"):
            atoms.append(self.expect("ident").text)
            if self.at("punct", ","):
                self.next()
        self.expect("punct", "}")
        try:
            return parse_effect(",".join(atoms), self.mode)
        except ValueError as exc:
            raise ParseError(str(exc), t.line, t.col) from None

    # -- types ---------------------------------------------------------------

    def parse_type(self) -> Type:
        left = self.parse_type_sum()
        if self.at("arrow"):
            self.next()
            if self.at("punct", "["):
                self.next()
                kw = self.expect("kw")
                if kw.text == "pc":
                    pc = self.parse_label()
                    self.expect("punct", "]")
                    return FunPc(left, pc, self.parse_type())
                if kw.text == "eff":
                    eff = self.parse_effect_set()
                    self.expect("punct", "]")
                    return FunEff(left, eff, self.parse_type())
                self.error("expected 'pc' or 'eff' after '->['", kw)
            return FunPure(left, self.parse_type())
        return left

    def parse_type_sum(self) -> Type:
        t = self.parse_type_prod()
        while self.at("punct", "+"):
            self.next()
            t = Sum(t, self.parse_type_prod())
        return t

    def parse_type_prod(self) -> Type:
        t = self.parse_type_prefix()
        while self.at("punct", "*"):
            self.next()
            t = Prod(t, self.parse_type_prefix())
        return t

    def parse_type_prefix(self) -> Type:
        if self.at("kw", "L"):
            self.next()
            self.expect("punct", "[")
            lab = self.parse_label()
            self.expect("punct", "]")
            return Labeled(lab, self.parse_type_prefix())
        if self.at("kw", "Lift"):
            self.next()
            return Lift(self.parse_type_prefix())
        if self.at("kw", "unit"):
            self.next()
            return UNIT
        if self.at("punct", "("):
            self.next()
            t = self.parse_type()
            self.expect("punct", ")")
            return t
        self.error("expected a type")

    # -- binder scope (shadowing is resolved by renaming at parse) ----------

    def bind(self, name: str) -> str:
        actual = self.namer.fresh(name, frozenset(self.scope)) if name in self.scope else name
        self.scope.append(actual)
        self.renames.setdefault(name, []).append(actual)
        return actual

    def unbind(self, name: str) -> None:
        actual = self.renames[name].pop()
        self.scope.remove(actual)

    def resolve(self, name: str) -> str:
        stack = self.renames.get(name)
        return stack[-1] if stack else name

    # -- expressions ---------------------------------------------------------

    def parse_expr(self) -> Expr:
        t = self.peek()
        pos = (t.line, t.col)
        if self.at("kw", "fun"):
            self.next()
            latent_pc = latent_eff = None
            if self.at("punct", "["):
                self.next()
                kw = self.expect("kw")
                if kw.text == "pc":
                    latent_pc = self.parse_label()
                elif kw.text == "eff":
                    latent_eff = self.parse_effect_set()
                else:
                    self.error("expected 'pc' or 'eff' in fun marker", kw)
                self.expect("punct", "]")
            self.expect("punct", "(")
            name = self.expect("ident").text
            self.expect("punct", ":")
            vt = self.parse_type()
            self.expect("punct", ")")
            self.expect("arrow")
            actual = self.bind(name)
            body = self.parse_expr()
            self.unbind(name)
            return Lam(actual, vt, body, latent_pc, latent_eff, pos=pos)
        if self.at("kw", "match"):
            self.next()
            scrut = self.parse_expr()
            self.expect("kw", "with")
            self.expect("kw", "inl")
            lname = self.expect("ident").text
            self.expect("arrow")
            lactual = self.bind(lname)
            lbody = self.parse_expr()
            self.unbind(lname)
            self.expect("punct", "|")
            self.expect("kw", "inr")
            rname = self.expect("ident").text
            self.expect("arrow")
            ractual = self.bind(rname)
            rbody = self.parse_expr()
            self.unbind(rname)
            return Match(scrut, lactual, lbody, ractual, rbody, pos=pos)
        if self.at("kw", "unlabel"):
            self.next()
            lab = self.parse_expr()
            self.expect("kw", "as")
            name = self.expect("ident").text
            self.expect("kw", "in")
            actual = self.bind(name)
            body = self.parse_expr()
            self.unbind(name)
            return Unlabel(lab, actual, body, pos=pos)
        if self.at("kw", "let") or self.at("kw", "seq"):
            kw = self.next().text
            name = self.expect("ident").text
            self.expect("punct", "=")
            first = self.parse_expr()
            self.expect("kw", "in")
            actual = self.bind(name)
            body = self.parse_expr()
            self.unbind(name)
            cls = Let if kw == "let" else Seq
            return cls(actual, first, body, pos=pos)
        if self.at("kw", "fix"):
            self.next()
            name = self.expect("ident").text
            self.expect("punct", ":")
            annot = self.parse_type()
            self.expect("punct", "=")
            actual = self.bind(name)
            body = self.parse_expr()
            self.unbind(name)
            return Fix(actual, annot, body, pos=pos)
        if self.at("kw", "try"):
            self.next()
            tb = self.parse_expr()
            self.expect("kw", "catch")
            return TryCatch(tb, self.parse_expr(), pos=pos)
        if self.at("kw", "throw"):
            self.next()
            self.expect("punct", ":")
            return Throw(self.parse_type(), pos=pos)
        if self.at("kw", "inl") or self.at("kw", "inr"):
            kw = self.next().text
            body = self.parse_app()
            self.expect("punct", ":")
            annot = self.parse_type()
            cls = Inl if kw == "inl" else Inr
            return cls(body, annot, pos=pos)
        return self.parse_app()

    def parse_app(self) -> Expr:
        t = self.peek()
        pos = (t.line, t.col)
        if t.kind == "kw" and t.text in ("fst", "snd", "write", "lift", "label"):
            self.next()
            if t.text == "label":
                self.expect("punct", "[")
                lab = self.parse_label()
                self.expect("punct", "]")
                return LabelE(lab, self.parse_app(), pos=pos)
            operand = self.parse_app()
            if t.text == "fst":
                return Proj(1, operand, pos=pos)
            if t.text == "snd":
                return Proj(2, operand, pos=pos)
            if t.text == "write":
                return Write(operand, pos=pos)
            return LiftE(operand, pos=pos)
        e = self.parse_atom()
        while self.starts_atom():
            arg = self.parse_atom()
            e = App(e, arg, pos=pos)
        return e

    def starts_atom(self) -> bool:
        t = self.peek()
        return t.kind == "ident" or (t.kind == "punct" and t.text == "(") or (
            t.kind == "kw" and t.text == "read"
        )

    def parse_atom(self) -> Expr:
        t = self.peek()
        pos = (t.line, t.col)
        if t.kind == "ident":
            self.next()
            return Var(self.resolve(t.text), pos=pos)
        if self.at("kw", "read"):
            self.next()
            return Read(pos=pos)
        if self.at("punct", "("):
            self.next()
            if self.at("punct", ")"):
                self.next()
                return UnitVal(pos=pos)
            e = self.parse_expr()
            if self.at("punct", ","):
                self.next()
                e2 = self.parse_expr()
                self.expect("punct", ")")
                return Pair(e, e2, pos=pos)
            self.expect("punct", ")")
            return e
        self.error("expected an expression")


def parse_type(text: str, lattice: LabelLattice | None = None, mode: str = MODE_STATE_EXN) -> Type:
    p = _Parser(tokenize(text), lattice, mode)
    t = p.parse_type()
    p.expect("eof")
    return t


def parse_expr(
    text: str,
    lattice: LabelLattice | None = None,
    mode: str = MODE_STATE_EXN,
    line_offset: int = 0,
) -> Expr:
    p = _Parser(tokenize(text, line_offset), lattice, mode)
    e = p.parse_expr()
    p.expect("eof")
    return e


def parse_program(text: str, lattice: LabelLattice | None = None) -> Program:
    """Parse a program file: mode/sigma/var/policy header lines, then `body`."""
    mode = None
    sigma = None
    context: list[tuple[str, Type]] = []
    policy_fields: list[tuple[str, str]] = []
    lines = text.splitlines()
    body_src = None
    body_line = 0
    for idx, raw in enumerate(lines):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        if head == "mode":
            mode = rest.strip()
            if mode not in (MODE_STATE_EXN, MODE_PNT):
                raise ParseError(f"unknown mode {mode!r}", idx + 1, 1)
        elif head == "sigma":
            sigma = parse_type(rest, lattice, mode or MODE_STATE_EXN)
        elif head == "var":
            name, _, ty = rest.partition(":")
            if not name.strip() or not ty.strip():
                raise ParseError("expected `var NAME : TYPE`", idx + 1, 1)
            context.append((name.strip(), parse_type(ty, lattice, mode or MODE_STATE_EXN)))
        elif head == "policy":
            for kv in rest.split():
                k, eq, v = kv.partition("=")
                if not eq:
                    raise ParseError("expected `policy key=value ...`", idx + 1, 1)
                policy_fields.append((k, v))
        elif head == "body":
            body_src = "\n".join([rest] + lines[idx + 1 :])
            body_line = idx
            break
        else:
            raise ParseError(f"unknown header line {head!r}", idx + 1, 1)
    if mode is None:
        raise ParseError("missing `mode` line", 1, 1)
    if body_src is None:
        raise ParseError("missing `body` line", len(lines), 1)
    body = parse_expr(body_src, lattice, mode, line_offset=body_line)
    return Program(mode, sigma, tuple(context), body, tuple(policy_fields))
