import random
from fractions import Fraction

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from lucas.errors import NotApplicable, StepBudgetExceeded
from lucas.rewrite import (
    ErrorPattern,
    Rule,
    arith_hook,
    check_condition,
    detect_error_pattern,
    eval_pred,
    list_hook,
    match,
    meta_hook,
    normalize,
    replay_trace,
    rewrite_at,
    structural_eq,
)
from lucas.terms import (
    App,
    NumLit,
    SignatureTable,
    Var,
    num,
    parse,
    render,
    strip_spans,
)


@pytest.fixture(scope="module")
def sig():
    return SignatureTable()


def norm_rs(kb):
    return kb.rulesets["norm_poly"]


# -- matching ----------------------------------------------------------------


def test_match_binds_consistently(sig):
    pattern = parse("a + a", sig)
    assert match(pattern, parse("x * y + x * y", sig)) is not None
    assert match(pattern, parse("x + y", sig)) is None


def test_match_non_pattern_var_literal(sig):
    pattern = parse("x + b", sig)
    sigma = match(pattern, parse("x + 3", sig), frozenset({"b"}))
    assert sigma is not None and sigma["b"].value == 3
    assert match(pattern, parse("y + 3", sig), frozenset({"b"})) is None


def test_match_numerals_and_consts(sig):
    assert match(parse("a + 0", sig), parse("x + 0", sig)) is not None
    assert match(parse("a + 0", sig), parse("x + 1", sig)) is None


# -- hooks vs brute-force oracle ---------------------------------------------


def _frac_eval(t):
    """Independent arithmetic oracle over Fractions; None when not ground."""
    if isinstance(t, NumLit):
        return t.value
    if isinstance(t, App) and len(t.args) == 2:
        a, b = _frac_eval(t.args[0]), _frac_eval(t.args[1])
        if a is None or b is None:
            return None
        op = t.head.name
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            return a / b if b != 0 else None
        if op == "^":
            if b.denominator == 1 and not (a == 0 and b <= 0):
                return a ** int(b)
            return None
    return None


@settings(max_examples=300, deadline=None)
@given(st.integers(-9, 9), st.integers(-9, 9), st.integers(-9, 9),
       st.sampled_from(["+", "-", "*", "/", "^"]), st.sampled_from(["+", "-", "*"]))
def test_arith_hook_matches_fraction_oracle(x, y, z, op1, op2):
    sig = SignatureTable()
    s = f"({x} {op1} {y}) {op2} {z}"
    try:
        t = parse(s, sig)
    except Exception:
        return
    expected = _frac_eval(t)
    res = normalize(__import__("lucas.rewrite", fromlist=["RuleSet"]).RuleSet("h", [], ("arith",)),
                    None, t).result
    if expected is None:
        return
    assert isinstance(res, NumLit) and res.value == expected


def test_arith_hook_leaves_division_by_zero(sig):
    assert arith_hook(parse("1 / 0", sig)) is None


def test_list_hook_last_and_nth(kb):
    assert render(list_hook(parse("last([a, b, c])", kb.sig)), kb.sig) == "c"
    assert render(list_hook(parse("nth([a, b, c], 2)", kb.sig)), kb.sig) == "b"
    assert list_hook(parse("nth([a], 5)", kb.sig)) is None


def test_meta_hook_predicates(kb):
    TRUE = parse("true", kb.sig)
    assert structural_eq(meta_hook(parse("is_num(3)", kb.sig)), TRUE)
    assert structural_eq(meta_hook(parse("free_of(a + b, c)", kb.sig)), TRUE)
    assert structural_eq(meta_hook(parse("not_sum(a * b)", kb.sig)), TRUE)
    assert structural_eq(meta_hook(parse("not_sum(a + b)", kb.sig)), parse("false", kb.sig))


# -- rewrite_at --------------------------------------------------------------


def _rule(sig, name, lhs, rhs, conds=(), bdvs=()):
    env = {}
    return Rule(name, parse(lhs, sig, var_types=env), parse(rhs, sig, var_types=env),
                tuple(parse(c, sig, var_types=env) for c in conds), tuple(bdvs))


def test_rewrite_at_path(sig):
    r = _rule(sig, "comm", "a + b", "b + a")
    t = parse("x * (p + q)", sig)
    out, proved = rewrite_at(r, None, t, (2,))
    assert render(out, sig) == "x * (q + p)"
    assert proved == []


def test_rewrite_at_condition_failure(sig):
    r = _rule(sig, "div", "a / n", "a * (1 / n)", conds=["n != 0"])
    with pytest.raises(NotApplicable):
        rewrite_at(r, None, parse("x / 0", sig), ())


def test_rewrite_bdv_instantiation(sig):
    r = _rule(sig, "dvar", "d/d bdv bdv", "1", bdvs=["bdv"])
    out, _ = rewrite_at(r, {"bdv": "x"}, parse("d/d x x", sig), ())
    assert render(out, sig) == "1"
    with pytest.raises(NotApplicable):
        rewrite_at(r, {"bdv": "x"}, parse("d/d x q", sig), ())
    with pytest.raises(NotApplicable):
        rewrite_at(r, None, parse("d/d x x", sig), ())


def test_condition_discharged_by_assumption(sig):
    assumption = parse("L > 0", sig)
    assert check_condition(parse("L > 0", sig), [assumption])
    assert not check_condition(parse("M > 0", sig), [assumption])


# -- normalization against sympy oracle --------------------------------------


def _random_poly_string(rng, depth=0):
    if depth > 3 or rng.random() < 0.35:
        return rng.choice(["x", "y", "z", str(rng.randint(0, 9))])
    op = rng.choice(["+", "-", "*", "*", "+"])
    if rng.random() < 0.15:
        return f"({_random_poly_string(rng, depth + 1)}) ^ {rng.randint(0, 3)}"
    a = _random_poly_string(rng, depth + 1)
    b = _random_poly_string(rng, depth + 1)
    return f"({a} {op} {b})"


def _sympy_equal(s1, s2):
    x, y, z = sympy.symbols("x y z")
    env = {"x": x, "y": y, "z": z}
    return sympy.simplify(
        sympy.sympify(s1.replace("^", "**"), env) - sympy.sympify(s2.replace("^", "**"), env)
    ) == 0


def test_normalize_agrees_with_sympy(kb):
    rng = random.Random(7)
    rs = norm_rs(kb)
    for _ in range(60):
        s = _random_poly_string(rng)
        t = parse(s, kb.sig)
        res = normalize(rs, None, t).result
        assert _sympy_equal(s, render(res, kb.sig))


def test_normalize_idempotent(kb):
    rng = random.Random(11)
    rs = norm_rs(kb)
    for _ in range(60):
        t = parse(_random_poly_string(rng), kb.sig)
        once = normalize(rs, None, t).result
        twice = normalize(rs, None, once).result
        assert structural_eq(once, twice)


def test_normalize_canonical_for_equal_polys(kb):
    rs = norm_rs(kb)
    pairs = [
        ("(x + 1) * (x + 1)", "x ^ 2 + 2 * x + 1"),
        ("x * y + y * x", "2 * (x * y)"),
        ("(x + y) * (x + y)", "x ^ 2 + 2 * x * y + y ^ 2"),
    ]
    for a, b in pairs:
        na = normalize(rs, None, parse(a, kb.sig)).result
        nb = normalize(rs, None, parse(b, kb.sig)).result
        assert structural_eq(na, nb), (render(na, kb.sig), render(nb, kb.sig))


def test_trace_replays_exactly(kb):
    rng = random.Random(23)
    rs = norm_rs(kb)
    rules = {r.name: r for r in rs.rules}
    for _ in range(100):
        t = parse(_random_poly_string(rng), kb.sig)
        res = normalize(rs, None, t)
        replayed = replay_trace(t, res.trace, rules)
        assert structural_eq(replayed, res.result)


def test_step_budget_exceeded(kb):
    rs = norm_rs(kb)
    t = parse("(x + 1) * (x + 2) * (x + 3)", kb.sig)
    with pytest.raises(StepBudgetExceeded):
        normalize(rs, None, t, max_steps=3)


def test_rule_order_priority(sig):
    first = _rule(sig, "to_one", "a + a", "1")
    second = _rule(sig, "to_two", "a + a", "2")
    from lucas.rewrite import RuleSet

    rs = RuleSet("prio", [first, second], hooks=())
    res = normalize(rs, None, parse("q + q", sig)).result
    assert res.value == 1


# -- predicates and error patterns -------------------------------------------


def test_eval_pred_three_valued(kb):
    rs = kb.rulesets["eval_predicates"]
    assert eval_pred(rs, parse("occurs_in(x, x + 1 = 2)", kb.sig)) is True
    assert eval_pred(rs, parse("occurs_in(z, x + 1 = 2)", kb.sig)) is False
    assert eval_pred(rs, parse("L > 0", kb.sig)) is None
    assert eval_pred(rs, parse("L > 0", kb.sig), assumptions=[parse("L > 0", kb.sig)]) is True


def test_detect_square_of_sum(kb):
    frm = parse("(a + b) ^ 2", kb.sig)
    to = parse("a ^ 2 + b ^ 2", kb.sig)
    hit = detect_error_pattern(kb.error_patterns, frm, to, norm_rs(kb))
    assert hit is not None and hit.id == "square_of_sum"
    ok = parse("a ^ 2 + 2 * a * b + b ^ 2", kb.sig)
    assert detect_error_pattern(kb.error_patterns, frm, ok, norm_rs(kb)) is None
