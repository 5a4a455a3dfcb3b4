import pytest

from lucas.errors import (
    ArityMismatch,
    DanglingReference,
    GuardFailed,
    TermSyntaxError,
)
from lucas.program import (
    Let,
    Ref,
    RewriteSet,
    RewriteSetInst,
    Seq,
    SubProblemExpr,
    Substitute,
    TacticApp,
    Take,
    check_guard,
    formal_args,
    lint_program,
    parse_program,
    parse_tactic,
    render_program,
    render_tactic,
    resolve_program,
)
from lucas.terms import SignatureTable, parse, render


def test_parse_program_shape(kb):
    prog = kb.programs["biegelinie"]
    assert [n for n, _ in prog.params] == ["l", "q", "v", "b", "s"]
    assert prog.guard_key == "Biegelinien"
    assert isinstance(prog.body, Let)


def test_biegelinie_program_structure(kb):
    prog = kb.programs["biegelinie"]
    lets = []
    body = prog.body
    while isinstance(body, Let):
        lets.append(body)
        body = body.body
    assert [l.name for l in lets] == ["funs", "es", "sol"]
    assert all(isinstance(l.bound, SubProblemExpr) for l in lets)
    assert isinstance(body, Seq)


def test_render_parse_fixpoint(kb):
    for prog in kb.programs.values():
        text = render_program(prog, kb.sig)
        again = parse_program(text, kb.sig)
        assert render_program(again, kb.sig) == text


def test_parse_tactic_variants(kb):
    assert isinstance(parse_tactic("Take x + 1", kb.sig), Take)
    assert parse_tactic("Rewrite_Set norm_poly", kb.sig) == RewriteSet("norm_poly")
    t = parse_tactic("Rewrite_Set_Inst ((bdv, x), diff_rules)", kb.sig)
    assert t == RewriteSetInst(("bdv", "x"), "diff_rules")
    assert parse_tactic("Substitute sol", kb.sig) == Substitute(ref="sol")
    assert parse_tactic("Substitute [c, c_2]", kb.sig) == Substitute(names=("c", "c_2"))


def test_parse_tactic_rejects_sequences(kb):
    with pytest.raises(TermSyntaxError):
        parse_tactic("Take x @@ Rewrite_Set norm_poly", kb.sig)
    with pytest.raises(TermSyntaxError):
        parse_tactic("let a = Take x in a", kb.sig)


def test_reserved_words_rejected():
    sig = SignatureTable()
    with pytest.raises(TermSyntaxError):
        parse_program("program p(x: Real) = Try Take x", sig)


def test_render_tactic_round_trip(kb):
    for s in ["Take d/d x (y x)",
              "Rewrite diff_sum with (bdv, x)",
              "Rewrite_Set norm_poly",
              "Rewrite_Set_Inst ((bdv, x), diff_rules)",
              "Substitute sol"]:
        assert render_tactic(parse_tactic(s, kb.sig), kb.sig) == s


# -- static checks -----------------------------------------------------------


def test_resolve_dangling_ruleset(kb):
    prog = parse_program("program p(x: Real) = Take x @@ Rewrite_Set no_such_set",
                         kb.sig)
    with pytest.raises(DanglingReference):
        resolve_program(prog, kb)


def test_resolve_dangling_rule(kb):
    prog = parse_program("program p(x: Real) = Take x @@ Rewrite no_such_rule", kb.sig)
    with pytest.raises(DanglingReference):
        resolve_program(prog, kb)


def test_resolve_unbound_name(kb):
    prog = parse_program("program p(x: Real) = Take y", kb.sig)
    with pytest.raises(DanglingReference):
        resolve_program(prog, kb)


def test_resolve_subproblem_arity(kb):
    prog = parse_program(
        "program p(x: Real) = let s = SubProblem(Equation,"
        " [equation, univariate, polynomial, linear], [PolyEq, solve_linear],"
        " [x = 1]) in Take x @@ Substitute s",
        kb.sig)
    with pytest.raises(ArityMismatch):
        resolve_program(prog, kb)


def test_resolve_corpus_programs_clean(kb):
    for prog in kb.programs.values():
        resolve_program(prog, kb)


def test_lint_unused_binding(kb):
    prog = parse_program(
        "program p(x: Real) = let s = Take x in Take x", kb.sig)
    assert any("unused binding 's'" in f for f in lint_program(prog))


def test_lint_shadowed_binding(kb):
    prog = parse_program(
        "program p(x: Real) = let x = Take x in Take x @@ Substitute x", kb.sig)
    assert any("shadowed binding 'x'" in f for f in lint_program(prog))


# -- guards and formal arguments ---------------------------------------------


def test_formal_args_interface(kb):
    args = formal_args(kb, ("Biegelinien",))
    names = [n for n, _, _ in args]
    assert names == ["l", "q", "v", "b", "s"]
    by_name = {n: d for n, _, d in args}
    assert by_name["l"] == "Traegerlaenge"
    assert by_name["q"] == "Streckenlast"


def test_check_guard_true_false(kb):
    env_ok = {"e": parse("2 * x + 3 = 7", kb.sig), "v": parse("x", kb.sig)}
    assert check_guard(kb, ("PolyEq", "solve_linear"), env_ok) is True
    env_bad = {"e": parse("2 * x + 3 = 7", kb.sig), "v": parse("z", kb.sig)}
    assert check_guard(kb, ("PolyEq", "solve_linear"), env_bad) is False


def test_check_guard_missing_binding(kb):
    with pytest.raises(GuardFailed):
        check_guard(kb, ("PolyEq", "solve_linear"), {"e": parse("x = 1", kb.sig)})


def test_check_guard_unknown_with_assumption(kb, biegelinie):
    env = {name: t for name, t in biegelinie.args.items()}
    assert check_guard(kb, ("Biegelinien",), env) is None
    assert check_guard(kb, ("Biegelinien",), env,
                       assumptions=biegelinie.assumptions) is True
