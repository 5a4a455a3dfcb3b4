"""Matching, conditional rewriting and rule-set normalization with traces.

The engine applies rules leftmost-innermost in rule-set order, interleaved
with evaluation hooks (exact rational arithmetic, list access, structural
meta predicates used by ordering rules).  Every application is recorded in a
trace that can be replayed step by step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from .errors import NotApplicable, StepBudgetExceeded
from .terms import (
    App, Const, NumLit, Term, Var,
    BOOL, LIST_CONS, DERIV,
    all_paths, free_vars, replace_at, substitute, subterm_at, term_key,
)

TRUE = Const("true", BOOL)
FALSE = Const("false", BOOL)

# ---------------------------------------------------------------------------
# Rules


@dataclass(frozen=True)
class Rule:
    name: str
    lhs: Term
    rhs: Term
    conditions: Tuple[Term, ...] = ()
    bdvs: Tuple[str, ...] = ()  # placeholder names instantiated at application time
    fixed: Tuple[str, ...] = ()  # concrete variables that match only themselves

    @property
    def pattern_vars(self) -> frozenset:
        return frozenset(free_vars(self.lhs)) - set(self.bdvs) - set(self.fixed)

    def check_wellformed(self):
        if isinstance(self.lhs, Var):
            raise ValueError(f"rule {self.name}: lhs is a lone variable")
        allowed = set(free_vars(self.lhs)) | set(self.bdvs)
        for t in (self.rhs, *self.conditions):
            extra = free_vars(t) - allowed
            if extra:
                raise ValueError(f"rule {self.name}: unbound variables {sorted(extra)} on rhs/conditions")


@dataclass
class RuleSet:
    name: str
    rules: List[Rule] = field(default_factory=list)
    hooks: Tuple[str, ...] = ("arith",)
    max_steps: int = 2000

    def instantiated(self, inst: Optional[Mapping[str, str]]) -> List[Rule]:
        """Rules with bdv placeholders replaced by concrete variables."""
        if not inst:
            return [r for r in self.rules if not r.bdvs]
        out = []
        for r in self.rules:
            if not r.bdvs:
                out.append(r)
                continue
            if not all(b in inst for b in r.bdvs):
                continue
            binding = {b: Var(inst[b]) for b in r.bdvs}
            out.append(Rule(
                r.name,
                substitute(r.lhs, binding),
                substitute(r.rhs, binding),
                tuple(substitute(c, binding) for c in r.conditions),
                bdvs=(),
                fixed=tuple(sorted({inst[b] for b in r.bdvs})),
            ))
        return out


@dataclass(frozen=True)
class ErrorPattern:
    id: str
    lhs: Term
    rhs: Term
    feedback: str


# ---------------------------------------------------------------------------
# Structural equality (ignores spans, links and variable type annotations)


def structural_eq(a: Term, b: Term) -> bool:
    if isinstance(a, NumLit):
        return isinstance(b, NumLit) and a.value == b.value
    if isinstance(a, Const):
        return isinstance(b, Const) and a.name == b.name
    if isinstance(a, Var):
        return isinstance(b, Var) and a.name == b.name
    if isinstance(a, App):
        return (isinstance(b, App) and len(a.args) == len(b.args)
                and structural_eq(a.head, b.head)
                and all(structural_eq(x, y) for x, y in zip(a.args, b.args)))
    return False


# ---------------------------------------------------------------------------
# First-order matching


def match(pattern: Term, t: Term, pattern_vars: Optional[frozenset] = None) -> Optional[Dict[str, Term]]:
    """Most general substitution sigma with sigma(pattern) == t, or None.

    If pattern_vars is None, every variable in the pattern is a pattern
    variable.  Non-pattern variables match only themselves.
    """
    binding: Dict[str, Term] = {}

    def go(p: Term, s: Term) -> bool:
        if isinstance(p, Var):
            if pattern_vars is None or p.name in pattern_vars:
                if p.name in binding:
                    return structural_eq(binding[p.name], s)
                binding[p.name] = s
                return True
            return isinstance(s, Var) and s.name == p.name
        if isinstance(p, NumLit):
            return isinstance(s, NumLit) and p.value == s.value
        if isinstance(p, Const):
            return isinstance(s, Const) and p.name == s.name
        if isinstance(p, App):
            return (isinstance(s, App) and len(p.args) == len(s.args)
                    and go(p.head, s.head)
                    and all(go(a, b) for a, b in zip(p.args, s.args)))
        return False

    return binding if go(pattern, t) else None


# ---------------------------------------------------------------------------
# Evaluation hooks


def _as_num(t: Term) -> Optional[Fraction]:
    return t.value if isinstance(t, NumLit) else None


def _bool(b: bool) -> Const:
    return TRUE if b else FALSE


def arith_hook(t: Term) -> Optional[Term]:
    """Exact rational arithmetic on ground operator applications."""
    if not (isinstance(t, App) and isinstance(t.head, Const) and len(t.args) == 2):
        return None
    op = t.head.name
    a, b = (_as_num(x) for x in t.args)
    if a is None or b is None:
        if op == "&":
            # partial conjunction on literal truth values
            x, y = t.args
            for lit, other in ((x, y), (y, x)):
                if structural_eq(lit, TRUE):
                    return other
                if structural_eq(lit, FALSE):
                    return FALSE
        if op == "|":
            x, y = t.args
            for lit, other in ((x, y), (y, x)):
                if structural_eq(lit, TRUE):
                    return TRUE
                if structural_eq(lit, FALSE):
                    return other
        return None
    if op == "+":
        return NumLit(a + b)
    if op == "-":
        return NumLit(a - b)
    if op == "*":
        return NumLit(a * b)
    if op == "/":
        return NumLit(a / b) if b != 0 else None
    if op == "^":
        if b.denominator == 1:
            e = b.numerator
            if a == 0 and e <= 0:
                return None
            return NumLit(a ** e if e >= 0 else Fraction(1) / (a ** -e))
        return None
    if op == "=":
        return _bool(a == b)
    if op == "!=":
        return _bool(a != b)
    if op == "<":
        return _bool(a < b)
    if op == ">":
        return _bool(a > b)
    if op == "<=":
        return _bool(a <= b)
    if op == ">=":
        return _bool(a >= b)
    return None


def list_hook(t: Term) -> Optional[Term]:
    """Access helpers on list literals: last(l), nth(l, i)."""
    if not (isinstance(t, App) and isinstance(t.head, Const)):
        return None
    name = t.head.name
    if name == "last" and len(t.args) == 1:
        lst = t.args[0]
        if isinstance(lst, App) and isinstance(lst.head, Const) and lst.head.name == LIST_CONS and lst.args:
            return lst.args[-1]
    if name == "nth" and len(t.args) == 2:
        lst, i = t.args
        n = _as_num(i)
        if (n is not None and n.denominator == 1 and isinstance(lst, App)
                and isinstance(lst.head, Const) and lst.head.name == LIST_CONS
                and 1 <= n.numerator <= len(lst.args)):
            return lst.args[n.numerator - 1]
    return None


# --- structural meta predicates (used in rule conditions) ------------------


def factor_base(t: Term) -> Term:
    if isinstance(t, App) and isinstance(t.head, Const) and t.head.name == "^" and len(t.args) == 2:
        return t.args[0]
    return t


def product_factors(t: Term) -> List[Term]:
    """Fully flattened factors of a (possibly nested) product."""
    if isinstance(t, App) and isinstance(t.head, Const) and t.head.name == "*" and len(t.args) == 2:
        return product_factors(t.args[0]) + product_factors(t.args[1])
    return [t]


def sum_terms(t: Term) -> List[Term]:
    """Fully flattened summands of a (possibly nested) sum."""
    if isinstance(t, App) and isinstance(t.head, Const) and t.head.name == "+" and len(t.args) == 2:
        return sum_terms(t.args[0]) + sum_terms(t.args[1])
    return [t]


def monomial_key(t: Term):
    """Order key of a summand: its symbolic part, numerals smallest."""
    factors = [f for f in product_factors(t) if not isinstance(f, NumLit)]
    if not factors:
        return ()
    return tuple(term_key(f) for f in factors)


def factor_key(t: Term):
    return term_key(factor_base(t))


def is_num(t: Term) -> bool:
    return isinstance(t, NumLit)


def is_atom(t: Term) -> bool:
    return isinstance(t, (Var, Const))


def _eqn_sides(t: Term) -> List[Term]:
    if isinstance(t, App) and isinstance(t.head, Const) and t.head.name == "=" and len(t.args) == 2:
        return list(t.args)
    return [t]


def poly_degree(t: Term, v: str) -> Optional[int]:
    """Degree of t as a polynomial in v, or None if t is not polynomial in v."""
    if isinstance(t, Var):
        return 1 if t.name == v else 0
    if isinstance(t, (NumLit, Const)):
        return 0
    if isinstance(t, App) and isinstance(t.head, Const):
        op = t.head.name
        if op in ("+", "-") and len(t.args) == 2:
            degs = [poly_degree(a, v) for a in t.args]
            return None if None in degs else max(degs)
        if op == "*" and len(t.args) == 2:
            degs = [poly_degree(a, v) for a in t.args]
            return None if None in degs else sum(degs)
        if op == "/" and len(t.args) == 2:
            num_deg = poly_degree(t.args[0], v)
            den_deg = poly_degree(t.args[1], v)
            if num_deg is None or den_deg != 0:
                return None
            return num_deg
        if op == "^" and len(t.args) == 2:
            base_deg = poly_degree(t.args[0], v)
            e = _as_num(t.args[1])
            if base_deg is None or e is None or e.denominator != 1 or e < 0:
                return None
            return base_deg * e.numerator
        if v not in free_vars(t):
            return 0
        return None
    return 0 if v not in free_vars(t) else None


def equation_degree(t: Term, v: str) -> Optional[int]:
    degs = [poly_degree(s, v) for s in _eqn_sides(t)]
    return None if None in degs else max(degs)


def has_root_in(t: Term, v: str) -> bool:
    """Does t contain sqrt applied to a subterm containing v?"""
    if isinstance(t, App):
        if (isinstance(t.head, Const) and t.head.name == "sqrt"
                and any(v in free_vars(a) for a in t.args)):
            return True
        return has_root_in(t.head, v) or any(has_root_in(a, v) for a in t.args)
    return False


def meta_hook(t: Term) -> Optional[Term]:
    if not (isinstance(t, App) and isinstance(t.head, Const)):
        return None
    name = t.head.name
    args = t.args
    if name == "is_num" and len(args) == 1:
        return _bool(is_num(args[0]))
    if name == "is_atom" and len(args) == 1:
        return _bool(is_atom(args[0]))
    if name == "not_num" and len(args) == 1:
        return _bool(not is_num(args[0]))
    if name == "not_sum" and len(args) == 1:
        a = args[0]
        return _bool(not (isinstance(a, App) and isinstance(a.head, Const) and a.head.name == "+"))
    if name == "not_prod" and len(args) == 1:
        a = args[0]
        return _bool(not (isinstance(a, App) and isinstance(a.head, Const) and a.head.name == "*"))
    if name == "ord_lt" and len(args) == 2:
        return _bool(factor_key(args[0]) < factor_key(args[1]))
    if name == "key_lt" and len(args) == 2:
        return _bool(monomial_key(args[0]) < monomial_key(args[1]))
    if name == "key_eq" and len(args) == 2:
        return _bool(monomial_key(args[0]) == monomial_key(args[1]))
    if name == "free_of" and len(args) == 2 and isinstance(args[1], Var):
        return _bool(args[1].name not in free_vars(args[0]))
    if name == "occurs_in" and len(args) == 2 and isinstance(args[0], Var):
        return _bool(any(args[0].name in free_vars(s) for s in _eqn_sides(args[1])))
    if name == "is_poly_in" and len(args) == 2 and isinstance(args[1], Var):
        return _bool(equation_degree(args[0], args[1].name) is not None)
    if name == "degree_in" and len(args) == 2 and isinstance(args[1], Var):
        deg = equation_degree(args[0], args[1].name)
        return None if deg is None else NumLit(Fraction(deg))
    if name == "has_root_in" and len(args) == 2 and isinstance(args[1], Var):
        return _bool(has_root_in(args[0], args[1].name))
    return None


HOOKS: Dict[str, Callable[[Term], Optional[Term]]] = {
    "arith": arith_hook,
    "list": list_hook,
    "meta": meta_hook,
}


# ---------------------------------------------------------------------------
# Condition evaluation (hooks only; terminating by construction)

_COND_HOOKS = (arith_hook, meta_hook, list_hook)


def _eval_ground(t: Term, assumptions: Sequence[Term] = ()) -> Term:
    """Fixpoint of hook evaluation, innermost."""
    for _ in range(200):
        done = True
        for p in all_paths(t):
            sub = subterm_at(t, p)
            for hook in _COND_HOOKS:
                new = hook(sub)
                if new is not None:
                    t = replace_at(t, p, new)
                    done = False
                    break
            if not done:
                break
        if done:
            break
    for a in assumptions:
        if structural_eq(t, a):
            return TRUE
    return t


def check_condition(cond: Term, assumptions: Sequence[Term] = ()) -> bool:
    return structural_eq(_eval_ground(cond, assumptions), TRUE)


# ---------------------------------------------------------------------------
# Rewriting


def rewrite_at(rule: Rule, inst: Optional[Mapping[str, str]], t: Term, p: Sequence[int],
               assumptions: Sequence[Term] = ()):
    """Apply rule at path p.  Returns (result, conditions_proved).

    Raises NotApplicable('no-match') or NotApplicable('condition-failed', cond).
    """
    lhs, rhs, conditions = rule.lhs, rule.rhs, rule.conditions
    if rule.bdvs:
        if not inst or not all(b in inst for b in rule.bdvs):
            raise NotApplicable("no-match", f"rule {rule.name} needs bdv instantiation")
        binding = {b: Var(inst[b]) for b in rule.bdvs}
        lhs = substitute(lhs, binding)
        rhs = substitute(rhs, binding)
        conditions = tuple(substitute(c, binding) for c in conditions)
        pattern_vars = frozenset(free_vars(lhs)) - {v.name for v in binding.values()}
    else:
        pattern_vars = rule.pattern_vars
    sub = subterm_at(t, p)
    sigma = match(lhs, sub, pattern_vars)
    if sigma is None:
        raise NotApplicable("no-match")
    proved = []
    for cond in conditions:
        c = substitute(cond, sigma)
        if not check_condition(c, assumptions):
            raise NotApplicable("condition-failed", c)
        proved.append(c)
    return replace_at(t, p, substitute(rhs, sigma)), proved


# ---------------------------------------------------------------------------
# Normalization with trace

HOOK_RULE_PREFIX = "#"


@dataclass(frozen=True)
class TraceEntry:
    rule: str
    path: Tuple[int, ...]
    before: Term  # whole term before this application
    after: Term  # whole term after


@dataclass
class NormResult:
    result: Term
    trace: List[TraceEntry]


def _try_step(sub: Term, rules: List[Rule], hooks: Sequence[str],
              assumptions: Sequence[Term]):
    """One applicable hook or rule at this subterm: (name, new_subterm) or None."""
    for hname in hooks:
        new = HOOKS[hname](sub)
        if new is not None and not structural_eq(new, sub):
            return HOOK_RULE_PREFIX + hname, new
    for rule in rules:
        sigma = match(rule.lhs, sub, rule.pattern_vars)
        if sigma is None:
            continue
        ok = True
        for cond in rule.conditions:
            if not check_condition(substitute(cond, sigma), assumptions):
                ok = False
                break
        if not ok:
            continue
        new_sub = substitute(rule.rhs, sigma)
        if structural_eq(new_sub, sub):
            continue  # refuse silent no-ops (would loop forever)
        return rule.name, new_sub
    return None


def normalize(rs: RuleSet, inst: Optional[Mapping[str, str]], t: Term,
              assumptions: Sequence[Term] = (), max_steps: Optional[int] = None,
              extra_rules: Sequence[Rule] = ()) -> NormResult:
    """Repeatedly rewrite t (leftmost-innermost, rules in order) to a fixpoint.

    Raises StepBudgetExceeded if the budget is exhausted first.
    """
    rules = list(extra_rules) + rs.instantiated(inst)
    budget = max_steps if max_steps is not None else rs.max_steps
    trace: List[TraceEntry] = []
    cur = t
    steps = 0

    def search(node: Term, path: Tuple[int, ...]):
        if isinstance(node, App):
            for i, a in enumerate(node.args, start=1):
                found = search(a, path + (i,))
                if found is not None:
                    return found
        hit = _try_step(node, rules, rs.hooks, assumptions)
        if hit is not None:
            return path, hit
        return None

    while True:
        found = search(cur, ())
        if found is None:
            return NormResult(cur, trace)
        steps += 1
        if steps > budget:
            raise StepBudgetExceeded(budget, cur)
        path, (rule_name, new_sub) = found
        new_term = replace_at(cur, path, new_sub)
        trace.append(TraceEntry(rule_name, path, cur, new_term))
        cur = new_term


def replay_trace(t: Term, trace: Sequence[TraceEntry], rules_by_name: Mapping[str, Rule],
                 hooks: Sequence[str] = ("arith", "list", "meta"),
                 assumptions: Sequence[Term] = ()) -> Term:
    """Re-apply each trace entry from t; raises if any step diverges."""
    cur = t
    for entry in trace:
        if not structural_eq(cur, entry.before):
            raise NotApplicable("no-match", f"trace diverged before {entry.rule} at {entry.path}")
        if entry.rule.startswith(HOOK_RULE_PREFIX):
            hook = HOOKS[entry.rule[len(HOOK_RULE_PREFIX):]]
            sub = subterm_at(cur, entry.path)
            new = hook(sub)
            if new is None:
                raise NotApplicable("no-match", f"hook {entry.rule} at {entry.path}")
            cur = replace_at(cur, entry.path, new)
        else:
            rule = rules_by_name[entry.rule]
            cur, _ = rewrite_at(rule, None, cur, entry.path, assumptions)
        if not structural_eq(cur, entry.after):
            raise NotApplicable("no-match", f"trace step {entry.rule} at {entry.path} produced a different term")
    return cur


# ---------------------------------------------------------------------------
# Predicate evaluation


def assumption_rules(assumptions: Sequence[Term]) -> List[Rule]:
    out = []
    for i, a in enumerate(assumptions):
        if structural_eq(a, TRUE):
            continue
        out.append(Rule(f"assumption_{i}", a, TRUE, bdvs=()))
    return out


def eval_pred(rs: RuleSet, pred: Term, assumptions: Sequence[Term] = (),
              inst: Optional[Mapping[str, str]] = None) -> Optional[bool]:
    """True / False / None (unknown) for a Bool-typed term.

    Assumptions are available as rewrite-to-true facts.
    """
    extra = assumption_rules(assumptions)
    result = normalize(rs, inst, pred, assumptions=assumptions, extra_rules=extra).result
    if structural_eq(result, TRUE):
        return True
    if structural_eq(result, FALSE):
        return False
    return None


# ---------------------------------------------------------------------------
# Error patterns


def detect_error_pattern(patterns: Sequence[ErrorPattern], frm: Term, to: Term,
                         norm_rs: RuleSet, inst: Optional[Mapping[str, str]] = None) -> Optional[ErrorPattern]:
    """First pattern whose buggy rule turns frm into to (modulo normalization)."""
    try:
        to_norm = normalize(norm_rs, inst, to).result
    except StepBudgetExceeded:
        return None
    for ep in patterns:
        rule = Rule(f"buggy:{ep.id}", ep.lhs, ep.rhs)
        for p in all_paths(frm):
            try:
                result, _ = rewrite_at(rule, None, frm, p)
            except NotApplicable:
                continue
            if structural_eq(result, frm):
                continue
            try:
                if structural_eq(normalize(norm_rs, inst, result).result, to_norm):
                    return ep
            except StepBudgetExceeded:
                continue
    return None
