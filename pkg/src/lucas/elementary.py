"""Elementary methods: builtin solvers sitting behind leaf sub-problems.

Each builtin takes the method's argument bindings and returns a result term
(usually a list of equations).  They are deliberately small: integration and
differentiation are delegated to rule sets, only the glue lives here.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import NotApplicable, NotLinear, Unsolvable
from .rewrite import (
    RuleSet,
    normalize,
    product_factors,
    structural_eq,
    sum_terms,
)
from .terms import (
    App,
    Const,
    DERIV,
    NumLit,
    Term,
    Var,
    free_vars,
    list_term,
    num,
    render,
    substitute,
)


def _op(name: str, a: Term, b: Term, sig) -> Term:
    return App(sig.const(name), (a, b))


def _contains_symbol(t: Term, name: str) -> bool:
    if isinstance(t, Const):
        return t.name == name
    if isinstance(t, App):
        return _contains_symbol(t.head, name) or any(_contains_symbol(a, name) for a in t.args)
    return False


# ---------------------------------------------------------------------------
# Integration of a constant line load up to the bending line


def aus_belastung(kb, method, env: Dict[str, Term], assumptions: Sequence[Term] = ()) -> Term:
    """Integrate the load q four times: V, M_b, y' and y with constants
    c, c_2, c_3, c_4 (one per integration)."""
    q, v = env["q"], env["v"]
    if not isinstance(v, Var):
        raise NotApplicable("no-match", "integration variable must be a variable")
    sig = kb.sig
    norm_rs = kb.rulesets[method.rulesets["norm"]]
    int_rs = kb.rulesets[method.rulesets.get("integrate", "integrieren")]

    def integrate(t: Term) -> Term:
        res = normalize(int_rs, {"bdv": v.name}, App(sig.const("Integrate"), (t,)),
                        assumptions=assumptions).result
        if _contains_symbol(res, "Integrate"):
            raise NotApplicable("no-match", f"cannot integrate {render(t, sig)}")
        return res

    def norm(t: Term) -> Term:
        return normalize(norm_rs, None, t, assumptions=assumptions).result

    c, c2, c3, c4 = Var("c"), Var("c_2"), Var("c_3"), Var("c_4")
    minus_one_over_EI = _op("/", num(-1), sig.const("EI"), sig)

    v_rhs = norm(_op("+", c, integrate(_op("*", num(-1), q, sig)), sig))
    m_rhs = norm(_op("+", c2, integrate(v_rhs), sig))
    dy_rhs = norm(_op("+", c3, _op("*", minus_one_over_EI, integrate(m_rhs), sig), sig))
    y_rhs = norm(_op("+", c4, integrate(dy_rhs), sig))

    y = Var("y")
    eq = lambda lhs, rhs: _op("=", lhs, rhs, sig)
    return list_term([
        eq(App(sig.const("V"), (v,)), v_rhs),
        eq(App(sig.const("M_b"), (v,)), m_rhs),
        eq(App(sig.const(DERIV), (v, App(y, (v,)))), dy_rhs),
        eq(App(y, (v,)), y_rhs),
    ])


# ---------------------------------------------------------------------------
# Instantiating boundary conditions against the derived function equations

# boundary conditions talk about the shear force Q, the calculation derives V
FUNCTION_ALIASES = {"Q": "V"}


def _fun_head(t: Term) -> Optional[Tuple[str, str]]:
    """(kind, name) of a function-equation lhs: plain application or d/d."""
    if isinstance(t, App) and isinstance(t.head, (Const, Var)) and len(t.args) == 1:
        return ("app", t.head.name)
    if (isinstance(t, App) and isinstance(t.head, Const) and t.head.name == DERIV
            and len(t.args) == 2 and isinstance(t.args[1], App)
            and isinstance(t.args[1].head, (Const, Var))):
        return ("deriv", t.args[1].head.name)
    return None


def setze_randbedingungen(kb, method, env: Dict[str, Term],
                          assumptions: Sequence[Term] = ()) -> Term:
    """Turn each boundary condition `F a = val` into an equation over the
    integration constants by instantiating the matching function equation."""
    funs, conds = env["funs"], env["b"]
    sig = kb.sig
    norm_rs = kb.rulesets[method.rulesets["norm"]]

    indexed: Dict[Tuple[str, str], Tuple[Var, Term]] = {}
    for fun_eq in funs.args:
        if not (isinstance(fun_eq, App) and isinstance(fun_eq.head, Const)
                and fun_eq.head.name == "=" and len(fun_eq.args) == 2):
            raise NotApplicable("no-match", "function list must contain equations")
        head = _fun_head(fun_eq.args[0])
        if head is None:
            raise NotApplicable("no-match", f"unrecognized lhs {render(fun_eq.args[0], sig)}")
        lhs = fun_eq.args[0]
        fvar = lhs.args[0] if head[0] == "app" else lhs.args[1].args[0]
        if not isinstance(fvar, Var):
            raise NotApplicable("no-match", "function equations must be in one variable")
        indexed[head] = (fvar, fun_eq.args[1])

    out: List[Term] = []
    for cond in conds.args:
        if not (isinstance(cond, App) and isinstance(cond.head, Const)
                and cond.head.name == "=" and len(cond.args) == 2):
            raise NotApplicable("no-match", "boundary conditions must be equations")
        lhs, val = cond.args
        head = _fun_head(lhs)
        if head is None:
            raise NotApplicable("no-match", f"unrecognized condition {render(cond, sig)}")
        kind, name = head
        name = FUNCTION_ALIASES.get(name, name)
        entry = indexed.get((kind, name))
        if entry is None:
            raise NotApplicable("no-match", f"no function equation for {name}")
        fvar, rhs = entry
        at = lhs.args[0] if kind == "app" else lhs.args[1].args[0]
        instantiated = normalize(norm_rs, None, substitute(rhs, {fvar.name: at}),
                                 assumptions=assumptions).result
        out.append(_op("=", normalize(norm_rs, None, val).result, instantiated, sig))
    return list_term(out)


# ---------------------------------------------------------------------------
# Linear-system solving by isolate-and-substitute


def _linear_split(t: Term, unknown: str, unknowns: Sequence[str], sig) -> Tuple[List[Term], List[Term]]:
    """Split a normalized sum into coefficient monomials of `unknown` and rest.

    Raises NotLinear when the unknown occurs non-linearly or multiplied with
    another unknown.
    """
    coeff: List[Term] = []
    rest: List[Term] = []
    for mono in sum_terms(t):
        factors = product_factors(mono)
        hits = [f for f in factors if isinstance(f, Var) and f.name == unknown]
        deep = [f for f in factors if unknown in free_vars(f)
                and not (isinstance(f, Var) and f.name == unknown)]
        if deep or len(hits) > 1:
            raise NotLinear(t)
        if hits:
            others = [f for f in factors if not (isinstance(f, Var) and f.name == unknown)]
            if any(u in free_vars(f) for f in others for u in unknowns):
                raise NotLinear(t)
            coeff.append(_product(others, sig))
        else:
            rest.append(mono)
    return coeff, rest


def _product(factors: Sequence[Term], sig) -> Term:
    if not factors:
        return num(1)
    out = factors[-1]
    for f in reversed(factors[:-1]):
        out = _op("*", f, out, sig)
    return out


def _sum(terms: Sequence[Term], sig) -> Term:
    if not terms:
        return num(0)
    out = terms[-1]
    for t in reversed(terms[:-1]):
        out = _op("+", t, out, sig)
    return out


def solve_linear_system(equations: Sequence[Term], unknowns: Sequence[str],
                        norm_rs: RuleSet, sig,
                        assumptions: Sequence[Term] = ()) -> Dict[str, Term]:
    """Triangularize by repeatedly isolating an unknown and substituting.

    Coefficients must be free of the unknowns.  Raises Unsolvable for
    underdetermined or inconsistent systems, NotLinear for nonlinear ones.
    """
    def norm(t: Term) -> Term:
        return normalize(norm_rs, None, t, assumptions=assumptions).result

    residuals: List[Term] = []
    for eq in equations:
        if not (isinstance(eq, App) and isinstance(eq.head, Const)
                and eq.head.name == "=" and len(eq.args) == 2):
            raise Unsolvable(f"not an equation: {render(eq, sig)}")
        residuals.append(norm(_op("-", eq.args[0], eq.args[1], sig)))

    bindings: Dict[str, Term] = {}
    bind_order: List[str] = []
    open_unknowns = list(unknowns)
    while open_unknowns:
        progress = False
        # prefer equations with a single open unknown, fall back to isolating
        # one unknown in terms of the others (Gaussian elimination)
        for max_present in (1, len(open_unknowns)):
            for i, res in enumerate(residuals):
                if res is None:
                    continue
                present = [u for u in open_unknowns if u in free_vars(res)]
                if not present:
                    if isinstance(res, NumLit) and res.value != 0:
                        raise Unsolvable("inconsistent")
                    if not isinstance(res, NumLit) or res.value == 0:
                        residuals[i] = None
                    continue
                if len(present) > max_present:
                    continue
                for u in present:
                    coeff, rest = _linear_split(res, u, [w for w in unknowns if w != u], sig)
                    a = norm(_sum(coeff, sig))
                    if isinstance(a, NumLit) and a.value == 0:
                        continue
                    if any(w in free_vars(a) for w in unknowns):
                        continue
                    b = _sum(rest, sig)
                    value = norm(_op("/", _op("*", num(-1), b, sig), a, sig))
                    bindings[u] = value
                    bind_order.append(u)
                    open_unknowns.remove(u)
                    residuals[i] = None
                    residuals = [norm(substitute(r, {u: value})) if r is not None else None
                                 for r in residuals]
                    progress = True
                    break
                if progress:
                    break
            if progress:
                break
        if not progress:
            raise Unsolvable("underdetermined")
    # consistency of leftover equations
    for res in residuals:
        if res is None:
            continue
        final = norm(substitute(res, bindings))
        if isinstance(final, NumLit) and final.value != 0:
            raise Unsolvable("inconsistent")
    # back-substitution: a value bound early may mention unknowns bound later
    finalized: Dict[str, Term] = {}
    for u in reversed(bind_order):
        finalized[u] = norm(substitute(bindings[u], finalized))
    return finalized


def solve_linear_system_elementary(kb, method, env: Dict[str, Term],
                                   assumptions: Sequence[Term] = ()) -> Term:
    es, s = env["es"], env["s"]
    norm_rs = kb.rulesets[method.rulesets["norm"]]
    unknowns = []
    for u in s.args:
        if not isinstance(u, Var):
            raise Unsolvable(f"unknown must be a variable: {render(u, kb.sig)}")
        unknowns.append(u.name)
    bindings = solve_linear_system(list(es.args), unknowns, norm_rs, kb.sig,
                                   assumptions=assumptions)
    return list_term([_op("=", Var(u), bindings[u], kb.sig) for u in unknowns])


# ---------------------------------------------------------------------------
# Single-equation solvers for the refinement tree's leaves


def _eq_parts(e: Term, sig) -> Tuple[Term, Term]:
    if not (isinstance(e, App) and isinstance(e.head, Const)
            and e.head.name == "=" and len(e.args) == 2):
        raise NotApplicable("no-match", "expected an equation")
    return e.args[0], e.args[1]


def solve_linear(kb, method, env: Dict[str, Term],
                 assumptions: Sequence[Term] = ()) -> Term:
    e, v = env["e"], env["v"]
    if not isinstance(v, Var):
        raise NotApplicable("no-match", "unknown must be a variable")
    norm_rs = kb.rulesets[method.rulesets["norm"]]
    bindings = solve_linear_system([e], [v.name], norm_rs, kb.sig, assumptions)
    return list_term([_op("=", v, bindings[v.name], kb.sig)])


def _exact_sqrt(f: Fraction) -> Optional[Fraction]:
    if f < 0:
        return None
    n, d = math.isqrt(f.numerator), math.isqrt(f.denominator)
    if n * n == f.numerator and d * d == f.denominator:
        return Fraction(n, d)
    return None


def solve_quadratic(kb, method, env: Dict[str, Term],
                    assumptions: Sequence[Term] = ()) -> Term:
    """Roots via the quadratic formula; exact when the discriminant is a
    rational square, otherwise left under sqrt."""
    e, v = env["e"], env["v"]
    if not isinstance(v, Var):
        raise NotApplicable("no-match", "unknown must be a variable")
    sig = kb.sig
    norm_rs = kb.rulesets[method.rulesets["norm"]]

    def norm(t: Term) -> Term:
        return normalize(norm_rs, None, t, assumptions=assumptions).result

    lhs, rhs = _eq_parts(e, sig)
    residual = norm(_op("-", lhs, rhs, sig))
    by_power: Dict[int, List[Term]] = {0: [], 1: [], 2: []}
    for mono in sum_terms(residual):
        factors = product_factors(mono)
        power = 0
        others = []
        for f in factors:
            if isinstance(f, Var) and f.name == v.name:
                power += 1
            elif (isinstance(f, App) and isinstance(f.head, Const) and f.head.name == "^"
                  and isinstance(f.args[0], Var) and f.args[0].name == v.name
                  and isinstance(f.args[1], NumLit) and f.args[1].value == 2):
                power += 2
            elif v.name in free_vars(f):
                raise NotApplicable("no-match", "not a quadratic polynomial")
            else:
                others.append(f)
        if power > 2:
            raise NotApplicable("no-match", "degree exceeds 2")
        by_power[power].append(_product(others, sig))
    a = norm(_sum(by_power[2], sig))
    b = norm(_sum(by_power[1], sig))
    c = norm(_sum(by_power[0], sig))
    if isinstance(a, NumLit) and a.value == 0:
        raise NotApplicable("no-match", "not a quadratic equation")
    disc = norm(_op("-", _op("^", b, num(2), sig), _op("*", num(4), _op("*", a, c, sig), sig), sig))
    root: Term
    if isinstance(disc, NumLit):
        exact = _exact_sqrt(disc.value)
        if exact is None:
            if disc.value < 0:
                return list_term([])
            root = App(sig.const("sqrt"), (disc,))
        else:
            root = num(exact)
    else:
        root = App(sig.const("sqrt"), (disc,))
    two_a = _op("*", num(2), a, sig)
    sols = []
    for sign in (1, -1):
        numer = _op("+", _op("*", num(-1), b, sig), _op("*", num(sign), root, sig), sig)
        sols.append(norm(_op("/", numer, two_a, sig)))
    if structural_eq(sols[0], sols[1]):
        sols = sols[:1]
    return list_term([_op("=", v, s, sig) for s in sols])


ELEMENTARY = {
    "aus_belastung": aus_belastung,
    "setze_randbedingungen": setze_randbedingungen,
    "solve_linear_system": solve_linear_system_elementary,
    "solve_linear": solve_linear,
    "solve_quadratic": solve_quadratic,
}
