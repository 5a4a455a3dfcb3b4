"""The tactic-program DSL: parsing, rendering, guards, formal arguments.

A program is a purely functional expression over tactics.  `@@` chains
term-to-term transformers, `let` names the result of a sub-problem, and
`SubProblem` delegates to another specification/method pair.  Try, Repeat
and If are reserved words without semantics in this version.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import (
    ArityMismatch,
    DanglingReference,
    GuardFailed,
    NotFound,
    StepBudgetExceeded,
    TermSyntaxError,
)
from .rewrite import eval_pred
from .terms import (
    LIST,
    SignatureTable,
    Term,
    Type,
    free_vars,
    parse,
    parse_type,
    render,
    substitute,
)

RESERVED = {"Try", "Repeat", "If"}


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Take:
    term: Term


@dataclass(frozen=True)
class Substitute:
    ref: Optional[str] = None  # let-bound name holding a list of equations
    names: Tuple[str, ...] = ()  # explicit unknowns, surfaced form


@dataclass(frozen=True)
class Rewrite:
    rule: str
    inst: Optional[Tuple[str, str]] = None  # (bdv placeholder, param name)


@dataclass(frozen=True)
class RewriteSet:
    ruleset: str


@dataclass(frozen=True)
class RewriteSetInst:
    inst: Tuple[str, str]  # (bdv placeholder, param name)
    ruleset: str


Tactic = object  # Take | Substitute | Rewrite | RewriteSet | RewriteSetInst


@dataclass(frozen=True)
class SubProblemExpr:
    theory: str
    problem_key: Tuple[str, ...]
    method_key: Tuple[str, ...]
    args: Tuple[Term, ...]


@dataclass(frozen=True)
class TacticApp:
    tactic: Tactic


@dataclass(frozen=True)
class Seq:
    left: "ProgExpr"
    right: "ProgExpr"


@dataclass(frozen=True)
class Let:
    name: str
    bound: "ProgExpr"
    body: "ProgExpr"


@dataclass(frozen=True)
class Ref:
    name: str


ProgExpr = object  # Seq | Let | TacticApp | SubProblemExpr | Ref


@dataclass
class TacticProgram:
    name: str
    params: List[Tuple[str, Type]]
    guard_key: Optional[str]
    body: ProgExpr
    source: str = ""


# ---------------------------------------------------------------------------
# Lexer

_TOKEN = re.compile(r"@@|[A-Za-z_][A-Za-z0-9_']*|[()\[\],:=]|\S")


@dataclass
class _Tok:
    text: str
    pos: int


def _lex(text: str) -> List[_Tok]:
    toks = []
    for m in _TOKEN.finditer(text):
        toks.append(_Tok(m.group(), m.start()))
    toks.append(_Tok("", len(text)))
    return toks


class _P:
    def __init__(self, text: str, sig: SignatureTable):
        self.text = text
        self.sig = sig
        self.toks = _lex(text)
        self.i = 0
        self.var_types: Dict[str, Type] = {}

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.next()
        if t.text != text:
            raise TermSyntaxError(t.pos, repr(text))
        return t

    def ident(self) -> str:
        t = self.next()
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_']*", t.text):
            raise TermSyntaxError(t.pos, "identifier")
        return t.text

    # -- term slices -------------------------------------------------------

    def term_until(self, stops: Sequence[str]) -> Term:
        """Parse a term extending to the next top-level stop token."""
        start = self.toks[self.i].pos
        depth = 0
        while True:
            t = self.peek()
            if t.text == "":
                break
            if depth == 0 and t.text in stops:
                break
            if t.text in ("(", "["):
                depth += 1
            elif t.text in (")", "]"):
                if depth == 0:
                    break
                depth -= 1
            self.next()
        end = self.peek().pos
        snippet = self.text[start:end].strip()
        if not snippet:
            raise TermSyntaxError(start, "term")
        return parse(snippet, self.sig, var_types=self.var_types)

    def key_list(self) -> Tuple[str, ...]:
        self.expect("[")
        keys = [self.ident()]
        while self.peek().text == ",":
            self.next()
            keys.append(self.ident())
        self.expect("]")
        return tuple(keys)

    # -- grammar -----------------------------------------------------------

    def program(self) -> TacticProgram:
        self.expect("program")
        name = self.ident()
        self.expect("(")
        params: List[Tuple[str, Type]] = []
        if self.peek().text != ")":
            while True:
                pname = self.ident()
                self.expect(":")
                tstart = self.peek().pos
                while self.peek().text not in (",", ")"):
                    self.next()
                params.append((pname, parse_type(self.text[tstart:self.peek().pos].strip())))
                if self.peek().text == ")":
                    break
                self.expect(",")
        self.expect(")")
        guard_key = None
        if self.peek().text == "where":
            self.next()
            guard_key = self.ident()
        self.expect("=")
        self.var_types = {n: t for n, t in params}
        body = self.expr()
        if self.peek().text != "":
            raise TermSyntaxError(self.peek().pos, "end of program")
        return TacticProgram(name, params, guard_key, body, source=self.text)

    def expr(self) -> ProgExpr:
        left = self.simple()
        while self.peek().text == "@@":
            self.next()
            left = Seq(left, self.simple())
        return left

    def simple(self) -> ProgExpr:
        t = self.peek()
        if t.text == "let":
            self.next()
            name = self.ident()
            self.expect("=")
            bound = self.expr()
            self.expect("in")
            self.var_types.setdefault(name, LIST)
            body = self.expr()
            return Let(name, bound, body)
        if t.text == "SubProblem":
            self.next()
            self.expect("(")
            theory = self.ident()
            self.expect(",")
            pkey = self.key_list()
            self.expect(",")
            mkey = self.key_list()
            self.expect(",")
            self.expect("[")
            args: List[Term] = []
            if self.peek().text != "]":
                while True:
                    args.append(self.term_until((",", "]")))
                    if self.peek().text == "]":
                        break
                    self.expect(",")
            self.expect("]")
            self.expect(")")
            return SubProblemExpr(theory, pkey, mkey, tuple(args))
        if t.text == "Take":
            self.next()
            return TacticApp(Take(self.term_until(("@@", "in"))))
        if t.text == "Substitute":
            self.next()
            if self.peek().text == "[":
                self.next()
                names = [self.ident()]
                while self.peek().text == ",":
                    self.next()
                    names.append(self.ident())
                self.expect("]")
                return TacticApp(Substitute(names=tuple(names)))
            return TacticApp(Substitute(ref=self.ident()))
        if t.text == "Rewrite":
            self.next()
            rule = self.ident()
            inst = None
            if self.peek().text == "with":
                self.next()
                self.expect("(")
                bdv = self.ident()
                self.expect(",")
                var = self.ident()
                self.expect(")")
                inst = (bdv, var)
            return TacticApp(Rewrite(rule, inst))
        if t.text == "Rewrite_Set":
            self.next()
            return TacticApp(RewriteSet(self.ident()))
        if t.text == "Rewrite_Set_Inst":
            self.next()
            self.expect("(")
            self.expect("(")
            bdv = self.ident()
            self.expect(",")
            var = self.ident()
            self.expect(")")
            self.expect(",")
            rs = self.ident()
            self.expect(")")
            return TacticApp(RewriteSetInst((bdv, var), rs))
        if t.text == "(":
            self.next()
            e = self.expr()
            self.expect(")")
            return e
        if t.text in RESERVED:
            raise TermSyntaxError(t.pos, f"{t.text} is reserved but not implemented")
        name = self.ident()
        return Ref(name)


def parse_program(text: str, sig: SignatureTable) -> TacticProgram:
    return _P(text, sig).program()


def parse_tactic(text: str, sig: SignatureTable) -> Tactic:
    """A single surfaced tactic, e.g. ``Rewrite_Set norm_poly``."""
    p = _P(text, sig)
    e = p.simple()
    if not isinstance(e, TacticApp) or p.peek().text != "":
        raise TermSyntaxError(p.peek().pos, "a single tactic")
    return e.tactic


# ---------------------------------------------------------------------------
# Rendering (parse . render is identity on the corpus)


def render_tactic(tac: Tactic, sig: SignatureTable) -> str:
    if isinstance(tac, Take):
        return f"Take {render(tac.term, sig)}"
    if isinstance(tac, Substitute):
        if tac.ref is not None:
            return f"Substitute {tac.ref}"
        return "Substitute [" + ", ".join(tac.names) + "]"
    if isinstance(tac, Rewrite):
        out = f"Rewrite {tac.rule}"
        if tac.inst:
            out += f" with ({tac.inst[0]}, {tac.inst[1]})"
        return out
    if isinstance(tac, RewriteSet):
        return f"Rewrite_Set {tac.ruleset}"
    if isinstance(tac, RewriteSetInst):
        return f"Rewrite_Set_Inst (({tac.inst[0]}, {tac.inst[1]}), {tac.ruleset})"
    raise TypeError(f"not a tactic: {tac!r}")


def render_expr(e: ProgExpr, sig: SignatureTable) -> str:
    if isinstance(e, Seq):
        return f"{render_expr(e.left, sig)} @@ {render_expr(e.right, sig)}"
    if isinstance(e, Let):
        return (f"let {e.name} = {render_expr(e.bound, sig)} in\n"
                f"  {render_expr(e.body, sig)}")
    if isinstance(e, TacticApp):
        return render_tactic(e.tactic, sig)
    if isinstance(e, SubProblemExpr):
        return ("SubProblem(" + e.theory + ", ["
                + ", ".join(e.problem_key) + "], ["
                + ", ".join(e.method_key) + "], ["
                + ", ".join(render(a, sig) for a in e.args) + "])")
    if isinstance(e, Ref):
        return e.name
    raise TypeError(f"not a program expression: {e!r}")


def render_program(p: TacticProgram, sig: SignatureTable) -> str:
    params = ", ".join(f"{n}: {t}" for n, t in p.params)
    head = f"program {p.name}({params})"
    if p.guard_key:
        head += f" where {p.guard_key}"
    return head + " =\n  " + render_expr(p.body, sig)


# ---------------------------------------------------------------------------
# Static checks


def walk(e: ProgExpr):
    yield e
    if isinstance(e, Seq):
        yield from walk(e.left)
        yield from walk(e.right)
    elif isinstance(e, Let):
        yield from walk(e.bound)
        yield from walk(e.body)


def resolve_program(prog: TacticProgram, kb) -> None:
    """Cross-reference the program against the knowledge base.

    Raises DanglingReference or ArityMismatch; also rejects free names that
    are neither parameters nor let-bound.
    """
    bound = {n for n, _ in prog.params}
    for e in walk(prog.body):
        if isinstance(e, Let):
            bound.add(e.name)
    for e in walk(prog.body):
        if isinstance(e, Ref) and e.name not in bound:
            raise DanglingReference("name", e.name)
        if isinstance(e, SubProblemExpr):
            if tuple(e.problem_key) not in kb.problems:
                raise DanglingReference("problem", e.problem_key)
            method = kb.methods.get(tuple(e.method_key))
            if method is None:
                raise DanglingReference("method", e.method_key)
            if len(e.args) != len(method.params):
                raise ArityMismatch(f"SubProblem {'.'.join(e.method_key)}",
                                    len(method.params), len(e.args))
            for a in e.args:
                for v in free_vars(a):
                    if v not in bound:
                        raise DanglingReference("name", v)
        if isinstance(e, TacticApp):
            tac = e.tactic
            if isinstance(tac, Rewrite) and tac.rule not in kb.rules:
                raise DanglingReference("rule", tac.rule)
            if isinstance(tac, (RewriteSet, RewriteSetInst)) and tac.ruleset not in kb.rulesets:
                raise DanglingReference("ruleset", tac.ruleset)
            if isinstance(tac, RewriteSetInst) and tac.inst[1] not in bound:
                raise DanglingReference("name", tac.inst[1])
            if isinstance(tac, Take):
                for v in free_vars(tac.term):
                    if v not in bound:
                        raise DanglingReference("name", v)
            if isinstance(tac, Substitute) and tac.ref is not None and tac.ref not in bound:
                raise DanglingReference("name", tac.ref)


def lint_program(prog: TacticProgram) -> List[str]:
    """Static findings: unused let bindings (dead code) and shadowing."""
    findings = []
    used = set()
    for e in walk(prog.body):
        if isinstance(e, Ref):
            used.add(e.name)
        elif isinstance(e, SubProblemExpr):
            for a in e.args:
                used |= free_vars(a)
        elif isinstance(e, TacticApp):
            tac = e.tactic
            if isinstance(tac, Take):
                used |= free_vars(tac.term)
            elif isinstance(tac, Substitute) and tac.ref:
                used.add(tac.ref)
            elif isinstance(tac, RewriteSetInst):
                used.add(tac.inst[1])
            elif isinstance(tac, Rewrite) and tac.inst:
                used.add(tac.inst[1])
    seen = set()
    for e in walk(prog.body):
        if isinstance(e, Let):
            if e.name in seen or any(e.name == n for n, _ in prog.params):
                findings.append(f"shadowed binding {e.name!r} in program {prog.name}")
            seen.add(e.name)
            if e.name not in used:
                findings.append(f"unused binding {e.name!r} in program {prog.name}")
    return findings


# ---------------------------------------------------------------------------
# Guards and formal arguments


def formal_args(kb, method_key: Sequence[str]) -> List[Tuple[str, Type, Optional[str]]]:
    """The interface the specification phase must fill: (name, type, descriptor)."""
    method = kb.methods.get(tuple(method_key))
    if method is None:
        raise NotFound(tuple(method_key))
    return [(p.name, p.type, p.descriptor) for p in method.params]


def check_guard(kb, method_key: Sequence[str], env: Dict[str, Term],
                assumptions: Sequence[Term] = (),
                pred_ruleset: str = "eval_predicates") -> Optional[bool]:
    """Evaluate the method's guard under the given argument bindings.

    Returns True / False / None (unknown).  A parameter without a binding is
    a precondition violation and raises GuardFailed.
    """
    method = kb.methods.get(tuple(method_key))
    if method is None:
        raise NotFound(tuple(method_key))
    for p in method.params:
        if p.name not in env:
            raise GuardFailed(tuple(method_key), f"missing binding for {p.name!r}")
    rs = kb.rulesets[pred_ruleset]
    verdict: Optional[bool] = True
    for clause in method.guard_where:
        inst_clause = substitute(clause, env)
        try:
            res = eval_pred(rs, inst_clause, assumptions=assumptions)
        except StepBudgetExceeded:
            res = None
        if res is False:
            return False
        if res is None:
            verdict = None
    return verdict
