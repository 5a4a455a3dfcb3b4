"""Typed first-order term language: parsing, printing, typing, navigation, substitution.

Terms are immutable. Surface syntax is ASCII with declared unicode aliases;
application is either call syntax ``f(a, b)`` or juxtaposition ``y x``, lists
are written ``[a, b, c]`` and derivatives ``d/d x expr``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence, Tuple, Union

from .errors import InvalidPath, TermSyntaxError, TermTypeError, UnknownSymbol

# ---------------------------------------------------------------------------
# Types


@dataclass(frozen=True)
class BaseType:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class FunType:
    dom: "Type"
    cod: "Type"

    def __str__(self):
        dom = f"({self.dom})" if isinstance(self.dom, FunType) else str(self.dom)
        return f"{dom} -> {self.cod}"


Type = Union[BaseType, FunType]

REAL = BaseType("Real")
BOOL = BaseType("Bool")
LIST = BaseType("List")


def fun_type(*types: Type) -> Type:
    """Right-fold a curried function type: fun_type(a, b, r) == a -> b -> r."""
    if not types:
        raise ValueError("fun_type needs at least one type")
    result = types[-1]
    for t in reversed(types[:-1]):
        result = FunType(t, result)
    return result


def arg_types(t: Type) -> Tuple[Tuple[Type, ...], Type]:
    """Split a curried FunType into (argument types, result type)."""
    args = []
    while isinstance(t, FunType):
        args.append(t.dom)
        t = t.cod
    return tuple(args), t


def parse_type(text: str) -> Type:
    parts = [p.strip() for p in text.split("->")]
    return fun_type(*[BaseType(p) for p in parts])


# ---------------------------------------------------------------------------
# Terms

Span = Tuple[int, int]

LIST_CONS = "[]"  # internal head symbol for list literals
DERIV = "d/d"  # internal head symbol for derivatives


@dataclass(frozen=True)
class Const:
    name: str
    type: Optional[Type] = None
    span: Optional[Span] = field(default=None, compare=False)
    link: Optional[Tuple[str, str]] = field(default=None, compare=False)


@dataclass(frozen=True)
class NumLit:
    value: Fraction
    span: Optional[Span] = field(default=None, compare=False)

    def __post_init__(self):
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))


@dataclass(frozen=True)
class Var:
    name: str
    type: Optional[Type] = None
    bound: bool = False
    span: Optional[Span] = field(default=None, compare=False)


@dataclass(frozen=True)
class App:
    head: "Term"
    args: Tuple["Term", ...]
    span: Optional[Span] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))


Term = Union[Const, NumLit, Var, App]


def num(value) -> NumLit:
    return NumLit(Fraction(value))


def app(head: Term, *args: Term) -> App:
    return App(head, tuple(args))


def is_list(t: Term) -> bool:
    return isinstance(t, App) and isinstance(t.head, Const) and t.head.name == LIST_CONS


def list_term(elems: Sequence[Term]) -> App:
    return App(Const(LIST_CONS, fun_type(REAL, LIST)), tuple(elems))


def free_vars(t: Term) -> set:
    """Names of all variables occurring in t."""
    out = set()
    stack = [t]
    while stack:
        x = stack.pop()
        if isinstance(x, Var):
            out.add(x.name)
        elif isinstance(x, App):
            stack.append(x.head)
            stack.extend(x.args)
    return out


def contains_var(t: Term, name: str) -> bool:
    return name in free_vars(t)


# ---------------------------------------------------------------------------
# Signature table


@dataclass(frozen=True)
class Fixity:
    kind: str  # "infix" | "prefix"
    prec: int
    assoc: str = "left"  # "left" | "right"


DEFAULT_FIXITY = {
    "^": Fixity("infix", 80, "right"),
    "*": Fixity("infix", 70, "left"),
    "/": Fixity("infix", 70, "left"),
    "+": Fixity("infix", 60, "left"),
    "-": Fixity("infix", 60, "left"),
    "=": Fixity("infix", 40, "left"),
    "<": Fixity("infix", 40, "left"),
    ">": Fixity("infix", 40, "left"),
    "<=": Fixity("infix", 40, "left"),
    ">=": Fixity("infix", 40, "left"),
    "!=": Fixity("infix", 40, "left"),
    "&": Fixity("infix", 30, "left"),
    "|": Fixity("infix", 25, "left"),
}

DEFAULT_ALIASES = {
    "∧": "&",  # ∧
    "∨": "|",  # ∨
    "≠": "!=",  # ≠
    "≤": "<=",  # ≤
    "≥": ">=",  # ≥
    "·": "*",  # ·
}

ARITH_CONSTANTS = {
    "^": fun_type(REAL, REAL, REAL),
    "*": fun_type(REAL, REAL, REAL),
    "/": fun_type(REAL, REAL, REAL),
    "+": fun_type(REAL, REAL, REAL),
    "-": fun_type(REAL, REAL, REAL),
    "=": fun_type(REAL, REAL, BOOL),
    "<": fun_type(REAL, REAL, BOOL),
    ">": fun_type(REAL, REAL, BOOL),
    "<=": fun_type(REAL, REAL, BOOL),
    ">=": fun_type(REAL, REAL, BOOL),
    "!=": fun_type(REAL, REAL, BOOL),
    "&": fun_type(BOOL, BOOL, BOOL),
    "|": fun_type(BOOL, BOOL, BOOL),
    "true": BOOL,
    "false": BOOL,
    LIST_CONS: fun_type(REAL, LIST),
    DERIV: fun_type(REAL, REAL, REAL),
}


class SignatureTable:
    """Declared constants with their types, fixity and knowledge links.

    Immutable by convention after construction; `extended` returns a copy with
    additional declarations (used when theories import each other).
    """

    def __init__(
        self,
        constants: Optional[Mapping[str, Type]] = None,
        fixity: Optional[Mapping[str, Fixity]] = None,
        aliases: Optional[Mapping[str, str]] = None,
        poly_consts: Optional[Iterable[str]] = None,
        links: Optional[Mapping[str, Tuple[str, str]]] = None,
    ):
        self.constants = dict(ARITH_CONSTANTS)
        if constants:
            self.constants.update(constants)
        self.fixity = dict(DEFAULT_FIXITY)
        if fixity:
            self.fixity.update(fixity)
        self.aliases = dict(DEFAULT_ALIASES)
        if aliases:
            self.aliases.update(aliases)
        # symbols whose argument types are not enforced (meta predicates, list ops)
        self.poly_consts = {LIST_CONS} | set(poly_consts or ())
        self.links = dict(links or {})

    def extended(self, other: "SignatureTable") -> "SignatureTable":
        sig = SignatureTable()
        sig.constants = {**self.constants, **other.constants}
        sig.fixity = {**self.fixity, **other.fixity}
        sig.aliases = {**self.aliases, **other.aliases}
        sig.poly_consts = self.poly_consts | other.poly_consts
        sig.links = {**self.links, **other.links}
        return sig

    def declare(self, name: str, type: Type, fixity: Optional[Fixity] = None,
                poly: bool = False, link: Optional[Tuple[str, str]] = None):
        self.constants[name] = type
        if fixity:
            self.fixity[name] = fixity
        if poly:
            self.poly_consts.add(name)
        if link:
            self.links[name] = link

    def is_infix(self, name: str) -> bool:
        fx = self.fixity.get(name)
        return fx is not None and fx.kind == "infix"

    def const(self, name: str, span: Optional[Span] = None) -> Const:
        return Const(name, self.constants[name], span=span, link=self.links.get(name))


# ---------------------------------------------------------------------------
# Lexer

_TOKEN_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_']*")
_TOKEN_NUM = re.compile(r"\d+")


@dataclass
class Token:
    kind: str  # "num" | "ident" | "op" | "punct" | "ddx" | "end"
    text: str
    pos: int


def _lex(text: str, sig: SignatureTable) -> list:
    ops = sorted(
        set(sig.fixity) | set(sig.aliases) | {"-"},
        key=len,
        reverse=True,
    )
    toks = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if text.startswith("d/d", i):
            # derivative token: d/dx or d/d x — but not the identifier 'd'
            # followed by ordinary division (e.g. "d/denom" would be ambiguous;
            # the corpus always means a derivative here).
            toks.append(Token("ddx", "d/d", i))
            i += 3
            continue
        m = _TOKEN_NUM.match(text, i)
        if m:
            toks.append(Token("num", m.group(), i))
            i = m.end()
            continue
        m = _TOKEN_IDENT.match(text, i)
        if m:
            toks.append(Token("ident", m.group(), i))
            i = m.end()
            continue
        if c in "()[],":
            toks.append(Token("punct", c, i))
            i += 1
            continue
        for op in ops:
            if text.startswith(op, i):
                toks.append(Token("op", sig.aliases.get(op, op), i))
                i += len(op)
                break
        else:
            raise TermSyntaxError(i, f"a token (got {c!r})")
    toks.append(Token("end", "", n))
    return toks


# ---------------------------------------------------------------------------
# Parser (Pratt, precedence-driven from the signature table)

JUXTA_PREC = 90


class _Parser:
    def __init__(self, text: str, sig: SignatureTable, strict: bool = False):
        self.text = text
        self.sig = sig
        self.strict = strict
        self.toks = _lex(text, sig)
        self.i = 0

    def peek(self) -> Token:
        return self.toks[self.i]

    def next(self) -> Token:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        tok = self.peek()
        if tok.kind != kind or (text is not None and tok.text != text):
            raise TermSyntaxError(tok.pos, text or kind)
        return self.next()

    # -- grammar -----------------------------------------------------------

    def parse(self) -> Term:
        t = self.expr(0)
        tok = self.peek()
        if tok.kind != "end":
            raise TermSyntaxError(tok.pos, "end of input")
        return t

    def expr(self, min_prec: int) -> Term:
        left = self.prefix()
        while True:
            tok = self.peek()
            name = tok.text
            if tok.kind == "op" or (tok.kind == "ident" and self.sig.is_infix(name)):
                fx = self.sig.fixity.get(name)
                if fx is None or fx.kind != "infix" or fx.prec < min_prec:
                    break
                self.next()
                nxt = fx.prec + (0 if fx.assoc == "right" else 1)
                right = self.expr(nxt)
                start = left.span[0] if left.span else tok.pos
                end = right.span[1] if right.span else tok.pos + len(name)
                if (name == "/" and isinstance(left, NumLit) and isinstance(right, NumLit)
                        and right.value != 0):
                    # rational literal syntax: 1/2 is a number, not a quotient
                    left = NumLit(left.value / right.value, span=(start, end))
                else:
                    left = App(self.sig.const(name, (tok.pos, tok.pos + len(name))),
                               (left, right), span=(start, end))
            else:
                break
        return left

    def prefix(self) -> Term:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.next()
            operand = self.juxta()
            if isinstance(operand, NumLit):
                return NumLit(-operand.value, span=(tok.pos, operand.span[1]))
            start = tok.pos
            end = operand.span[1] if operand.span else tok.pos
            return App(self.sig.const("*"), (NumLit(Fraction(-1), span=(tok.pos, tok.pos + 1)), operand),
                       span=(start, end))
        return self.juxta()

    def juxta(self) -> Term:
        """An atom optionally applied to further atoms by juxtaposition."""
        head = self.atom()
        args = []
        while True:
            tok = self.peek()
            if isinstance(head, NumLit):
                break
            if tok.kind == "num":
                args.append(self.atom())
            elif tok.kind == "ident" and not self.sig.is_infix(tok.text):
                args.append(self.atom())
            elif tok.kind == "punct" and tok.text == "[":
                args.append(self.atom())
            elif tok.kind == "punct" and tok.text == "(" and args == [] and not isinstance(head, (NumLit,)):
                # call syntax f(a, b); only directly after the head
                self.next()
                if self.peek().kind == "punct" and self.peek().text == ")":
                    end = self.next().pos
                    head = App(head, (), span=(_start(head, tok), end + 1))
                    continue
                call_args = [self.expr(0)]
                while self.peek().kind == "punct" and self.peek().text == ",":
                    self.next()
                    call_args.append(self.expr(0))
                end = self.expect("punct", ")").pos
                head = App(head, tuple(call_args), span=(_start(head, tok), end + 1))
            else:
                break
        if args:
            start = head.span[0] if head.span else 0
            end = args[-1].span[1] if args[-1].span else start
            return App(head, tuple(args), span=(start, end))
        return head

    def atom(self) -> Term:
        tok = self.peek()
        if tok.kind == "num":
            self.next()
            return NumLit(Fraction(int(tok.text)), span=(tok.pos, tok.pos + len(tok.text)))
        if tok.kind == "ddx":
            self.next()
            var_tok = self.expect("ident")
            v = Var(var_tok.text, REAL, span=(var_tok.pos, var_tok.pos + len(var_tok.text)))
            operand = self.juxta()
            end = operand.span[1] if operand.span else var_tok.pos
            return App(self.sig.const(DERIV, (tok.pos, tok.pos + 3)), (v, operand),
                       span=(tok.pos, end))
        if tok.kind == "ident":
            self.next()
            span = (tok.pos, tok.pos + len(tok.text))
            if tok.text in self.sig.constants:
                return self.sig.const(tok.text, span)
            if self.strict:
                raise UnknownSymbol(tok.text, tok.pos)
            return Var(tok.text, None, span=span)
        if tok.kind == "punct" and tok.text == "(":
            self.next()
            inner = self.expr(0)
            end = self.expect("punct", ")").pos
            return replace(inner, span=(tok.pos, end + 1))
        if tok.kind == "punct" and tok.text == "[":
            self.next()
            elems = []
            if not (self.peek().kind == "punct" and self.peek().text == "]"):
                elems.append(self.expr(0))
                while self.peek().kind == "punct" and self.peek().text == ",":
                    self.next()
                    elems.append(self.expr(0))
            end = self.expect("punct", "]").pos
            return App(self.sig.const(LIST_CONS, (tok.pos, tok.pos + 1)), tuple(elems),
                       span=(tok.pos, end + 1))
        raise TermSyntaxError(tok.pos, "an expression")


def _start(head: Term, tok: Token) -> int:
    return head.span[0] if head.span else tok.pos


def parse(text: str, sig: SignatureTable, strict: bool = False,
          var_types: Optional[dict] = None, expected: Optional[Type] = None) -> Term:
    """Parse and typecheck surface syntax into a Term.

    `var_types` (name -> Type) seeds and collects inferred types for free
    variables; pass a shared dict to keep variable types consistent across
    several related terms.
    """
    t = _Parser(text, sig, strict=strict).parse()
    env = var_types if var_types is not None else {}
    _, t = infer(t, sig, env, expected)
    return t


# ---------------------------------------------------------------------------
# Typechecking (with lightweight inference for free variables)


def infer(t: Term, sig: SignatureTable, env: dict, expected: Optional[Type] = None):
    """Return (type, term) with variable types resolved against env.

    env maps variable names to Types and is updated with fresh inferences.
    Raises TermTypeError on conflicts.
    """
    if isinstance(t, NumLit):
        if expected is not None and expected != REAL:
            raise TermTypeError(t.span, expected, REAL)
        return REAL, t
    if isinstance(t, Const):
        ty = sig.constants.get(t.name)
        if ty is None:
            raise UnknownSymbol(t.name, t.span[0] if t.span else 0)
        if expected is not None and ty != expected and t.name not in sig.poly_consts:
            raise TermTypeError(t.span, expected, ty)
        return ty, replace(t, type=ty) if t.type != ty else t
    if isinstance(t, Var):
        ty = t.type or env.get(t.name)
        if ty is None:
            ty = expected or REAL
            env[t.name] = ty
        elif expected is not None and ty != expected:
            raise TermTypeError(t.span, expected, ty)
        env.setdefault(t.name, ty)
        return ty, replace(t, type=ty) if t.type != ty else t
    if isinstance(t, App):
        return _infer_app(t, sig, env, expected)
    raise TypeError(f"not a Term: {t!r}")


def _infer_app(t: App, sig: SignatureTable, env: dict, expected: Optional[Type]):
    head = t.head
    if not isinstance(head, (Const, Var)):
        raise TermTypeError(t.span, "a function head", type(head).__name__)
    poly = isinstance(head, Const) and head.name in sig.poly_consts
    head_ty = None
    if isinstance(head, Const):
        head_ty = sig.constants.get(head.name)
        if head_ty is None:
            raise UnknownSymbol(head.name, head.span[0] if head.span else 0)
        head = replace(head, type=head_ty)
    elif isinstance(head, Var):
        head_ty = head.type or env.get(head.name)

    if poly:
        # list constructor and meta predicates: args typed independently
        new_args = []
        elem_ty = None
        for a in t.args:
            aty, a2 = infer(t=a, sig=sig, env=env, expected=None)
            if isinstance(head, Const) and head.name == LIST_CONS:
                if elem_ty is None:
                    elem_ty = aty
                elif aty != elem_ty:
                    raise TermTypeError(a.span, elem_ty, aty)
            new_args.append(a2)
        result = arg_types(head_ty)[1] if head_ty else LIST
        if isinstance(head, Const) and head.name == LIST_CONS:
            result = LIST
        return result, App(head, tuple(new_args), span=t.span)

    if head_ty is None:
        # unknown function variable: infer argument types bottom-up, then bind
        new_args = []
        atys = []
        for a in t.args:
            aty, a2 = infer(a, sig, env, None)
            atys.append(aty)
            new_args.append(a2)
        result = expected or REAL
        fty = fun_type(*atys, result)
        env[head.name] = fty
        head = replace(head, type=fty)
        return result, App(head, tuple(new_args), span=t.span)

    params, result = arg_types(head_ty)
    if len(t.args) > len(params):
        raise TermTypeError(t.span, head_ty, f"{len(t.args)} arguments")
    new_args = []
    for a, pty in zip(t.args, params):
        _, a2 = infer(a, sig, env, pty)
        new_args.append(a2)
    if len(t.args) < len(params):
        result = fun_type(*params[len(t.args):], result)
    if expected is not None and result != expected:
        raise TermTypeError(t.span, expected, result)
    if isinstance(head, Var) and head.type is None:
        head = replace(head, type=head_ty)
    return result, App(head, tuple(new_args), span=t.span)


def typecheck(t: Term, sig: SignatureTable, env: Optional[dict] = None) -> Type:
    """Type of t; raises TermTypeError / UnknownSymbol on failure."""
    ty, _ = infer(t, sig, dict(env or {}))
    return ty


# ---------------------------------------------------------------------------
# Rendering (minimal parenthesization; parse(render(t)) == t)


def render(t: Term, sig: SignatureTable) -> str:
    return _render(t, sig, 0)


def _render(t: Term, sig: SignatureTable, ctx_prec: int, right_of: Optional[str] = None) -> str:
    if isinstance(t, NumLit):
        v = t.value
        if v.denominator == 1:
            s = str(v.numerator)
        else:
            s = f"{v.numerator}/{v.denominator}"
            if ctx_prec > 70:
                s = f"({s})"
                return s
        if v < 0 and ctx_prec > 0 and right_of is not None:
            # negative literal as a right operand keeps its sign readable:
            # "a * -1" parses back fine, but "a ^ -1 ^ b" would not — parens
            # are only needed when another operator could capture the sign.
            return s
        return s
    if isinstance(t, Const):
        return t.name
    if isinstance(t, Var):
        return t.name
    if isinstance(t, App):
        head = t.head
        if isinstance(head, Const):
            if head.name == LIST_CONS:
                return "[" + ", ".join(_render(a, sig, 0) for a in t.args) + "]"
            if head.name == DERIV and len(t.args) == 2:
                v, body = t.args
                inner = _render(body, sig, JUXTA_PREC + 1)
                s = f"d/d {_render(v, sig, JUXTA_PREC)} {inner}"
                if ctx_prec > JUXTA_PREC:
                    s = f"({s})"
                return s
            fx = sig.fixity.get(head.name)
            if fx is not None and fx.kind == "infix" and len(t.args) == 2:
                lp = fx.prec + (1 if fx.assoc == "right" else 0)
                rp = fx.prec + (1 if fx.assoc == "left" else 0)
                left = _render(t.args[0], sig, lp)
                right = _render(t.args[1], sig, rp, right_of=head.name)
                s = f"{left} {head.name} {right}"
                if ctx_prec > fx.prec:
                    s = f"({s})"
                return s
        # application: juxtaposition for simple atoms, call syntax otherwise
        head_s = _render(head, sig, JUXTA_PREC + 1)
        if len(t.args) == 1 and _is_atomic(t.args[0]):
            s = f"{head_s} {_render(t.args[0], sig, JUXTA_PREC + 1)}"
        else:
            s = head_s + "(" + ", ".join(_render(a, sig, 0) for a in t.args) + ")"
        if ctx_prec > JUXTA_PREC:
            s = f"({s})"
        return s
    raise TypeError(f"not a Term: {t!r}")


def _is_atomic(t: Term) -> bool:
    if isinstance(t, (Var, Const)):
        return True
    if isinstance(t, NumLit):
        return t.value >= 0 and t.value.denominator == 1
    return False


# ---------------------------------------------------------------------------
# Paths, substitution

Path = Sequence[int]


def subterm_at(t: Term, p: Path) -> Term:
    """Child-index path: 0 is the head of an App, 1..n its arguments."""
    for idx in p:
        if not isinstance(t, App):
            raise InvalidPath(p, t)
        if idx == 0:
            t = t.head
        elif 1 <= idx <= len(t.args):
            t = t.args[idx - 1]
        else:
            raise InvalidPath(p, t)
    return t


def replace_at(t: Term, p: Path, s: Term) -> Term:
    if not p:
        return s
    if not isinstance(t, App):
        raise InvalidPath(p, t)
    idx = p[0]
    if idx == 0:
        return App(replace_at(t.head, p[1:], s), t.args, span=t.span)
    if 1 <= idx <= len(t.args):
        args = list(t.args)
        args[idx - 1] = replace_at(args[idx - 1], p[1:], s)
        return App(t.head, tuple(args), span=t.span)
    raise InvalidPath(p, t)


def all_paths(t: Term):
    """Yield every valid path into t, preorder, root first."""
    yield ()
    if isinstance(t, App):
        for sub in all_paths(t.head):
            yield (0,) + sub
        for i, a in enumerate(t.args, start=1):
            for sub in all_paths(a):
                yield (i,) + sub


def substitute(t: Term, bindings: Mapping[str, Term]) -> Term:
    """Simultaneous substitution of variables by name."""
    if not bindings:
        return t
    if isinstance(t, Var):
        return bindings.get(t.name, t)
    if isinstance(t, App):
        return App(substitute(t.head, bindings), tuple(substitute(a, bindings) for a in t.args),
                   span=t.span)
    return t


def term_size(t: Term) -> int:
    if isinstance(t, App):
        return 1 + term_size(t.head) + sum(term_size(a) for a in t.args)
    return 1


def term_key(t: Term):
    """Total structural order on terms (used by ordering rewrite rules)."""
    if isinstance(t, NumLit):
        return (0, t.value, "")
    if isinstance(t, Const):
        return (1, 0, t.name)
    if isinstance(t, Var):
        return (2, 0, t.name)
    if isinstance(t, App):
        return (3, 0, "", term_key(t.head), len(t.args), tuple(term_key(a) for a in t.args))
    raise TypeError(repr(t))


def strip_spans(t: Term) -> Term:
    """Copy of t with no source spans (useful for golden comparisons)."""
    if isinstance(t, App):
        return App(strip_spans(t.head), tuple(strip_spans(a) for a in t.args))
    return replace(t, span=None)
