import json
import random
from pathlib import Path

import pytest

from lucas.errors import GuardFailed, LucasError, NotApplicable, PhaseError
from lucas.interpreter import (
    ProblemBlock,
    Session,
    Step,
    compile_body,
    item_from_json,
    item_to_json,
    replay_calc,
    tree_to_json_str,
    view,
)
from lucas.knowledge import load_instance
from lucas.program import parse_program, parse_tactic
from lucas.specification import Model, ProblemInstance
from lucas.terms import parse, render

GOLDEN = Path(__file__).parent / "golden"

GOLDEN_Y = ("y x = -1/6 * (EI ^ -1 * (L * (q_0 * x ^ 3))) + "
            "(1/24 * (EI ^ -1 * (q_0 * x ^ 4)) + "
            "1/4 * (EI ^ -1 * (L ^ 2 * (q_0 * x ^ 2))))")


def _fresh(kb, instance):
    return Session(kb, instance, skip_specification=True)


# -- golden calculations -----------------------------------------------------


@pytest.mark.parametrize("name", ["biegelinie", "diff"])
def test_golden_calculation_byte_stable(kb, name):
    instance = load_instance(f"instances/{name}.json", kb)
    tree = _fresh(kb, instance).auto_solve()
    assert tree_to_json_str(tree, kb.sig) == (GOLDEN / f"{name}.calc.json").read_text()


@pytest.mark.parametrize("name", ["biegelinie", "diff"])
def test_golden_replays_clean(kb, name):
    instance = load_instance(f"instances/{name}.json", kb)
    tree = item_from_json(json.loads((GOLDEN / f"{name}.calc.json").read_text()), kb.sig)
    assert replay_calc(kb, tree, instance.assumptions) == []


def test_json_round_trip_byte_identical(kb, diff_instance):
    tree = _fresh(kb, diff_instance).auto_solve()
    txt = tree_to_json_str(tree, kb.sig)
    again = item_from_json(json.loads(txt), kb.sig)
    assert tree_to_json_str(again, kb.sig) == txt


def test_replay_flags_tampered_step(kb, diff_instance):
    tree = _fresh(kb, diff_instance).auto_solve()
    data = json.loads(tree_to_json_str(tree, kb.sig))
    for item in data["items"]:
        if item["kind"] == "step" and item["tactic"]["kind"] == "Rewrite_Set_Inst":
            item["term"] = "1 + 3 * (x * cos(x ^ 2))"
    tampered = item_from_json(data, kb.sig)
    assert replay_calc(kb, tampered, diff_instance.assumptions) != []


# -- phases ------------------------------------------------------------------


def test_model_phase_flow(kb, diff_instance):
    s = Session(kb, diff_instance)
    fb = s.add_model_item("given", parse("Funktionsterm (x + sin(x ^ 2))", kb.sig))
    assert not fb.complete and s.phase == "model"
    s.add_model_item("given", parse("FunktionsVariable x", kb.sig))
    fb = s.add_model_item("find", parse("Abgeleitet d_d", kb.sig))
    assert fb.complete and s.phase == "specify"

    res = s.set_refs(theory="Diff", problem=("Baustatik", "Biegelinien"))
    assert res["verdicts"] == {"theory": "correct", "problem": "incorrect"}
    res = s.set_refs(problem=("Ableitungen",), method=("Diff", "differenzieren"))
    assert res["complete"] and s.phase == "solve"


def test_refs_rejected_during_model(kb, diff_instance):
    s = Session(kb, diff_instance)
    with pytest.raises(PhaseError):
        s.set_refs(theory="Diff")


def test_model_rejected_after_specify(kb, diff_instance):
    s = _fresh(kb, diff_instance)
    with pytest.raises(PhaseError):
        s.add_model_item("given", parse("FunktionsVariable x", kb.sig))


def test_guard_failure_blocks_solve(kb):
    formal = Model()
    formal.given = [parse("equality (x + 1 = 2)", kb.sig), parse("solveFor z", kb.sig)]
    formal.find = [parse("solutions L_L", kb.sig)]
    instance = ProblemInstance(
        id="bad_guard", statement="", formalisation=formal,
        refs={"theory": "Equation",
              "problem": ("equation", "univariate", "polynomial", "linear"),
              "method": ("PolyEq", "solve_linear")},
        args={"e": parse("x + 1 = 2", kb.sig), "v": parse("z", kb.sig)})
    with pytest.raises(GuardFailed):
        _fresh(kb, instance)


# -- stepping ----------------------------------------------------------------


def test_next_step_sequence_diff(kb, diff_instance):
    s = _fresh(kb, diff_instance)
    kinds = []
    while s.phase == "solve":
        kinds.append(s.next_step().tactic["kind"])
    assert kinds == ["Take", "Rewrite_Set_Inst", "Rewrite_Set"]
    assert s.phase == "done"
    assert render(s.root.result, kb.sig) == "1 + 2 * (x * cos(x ^ 2))"
    assert s.root.postcond is True
    with pytest.raises(PhaseError):
        s.next_step()


def test_chain_rule_single_step(kb, diff_instance):
    s = _fresh(kb, diff_instance)
    s.next_step()  # Take
    proposal = s.next_step()  # the differentiation rule set
    assert proposal.tactic == {"kind": "Rewrite_Set_Inst", "ruleset": "diff_rules",
                               "bdv": ["bdv", "x"]}
    # the hidden detail holds the single-rule applications, chain rule included
    rules = [d.tactic["rule"] for d in proposal.item.detail]
    assert "diff_sum" in rules
    assert "diff_sin" in rules  # the chain-rule step: cos(x^2) times the inner derivative
    assert "diff_pow" in rules


def test_subproblems_appear_as_blocks(kb, biegelinie):
    s = _fresh(kb, biegelinie)
    tree = s.auto_solve()
    blocks = [i for i in tree.items if isinstance(i, ProblemBlock)]
    assert [b.problem_key[-1] for b in blocks] == \
        ["Biegelinien", "Biegelinien", "solveSystem"]
    assert render(blocks[-1].result, kb.sig) == \
        "[c = L * q_0, c_2 = -1/2 * (L ^ 2 * q_0), c_3 = 0, c_4 = 0]"
    assert render(tree.result, kb.sig).startswith("y x = ")
    assert tree.postcond is True


def test_compile_body_rejects_non_subproblem_let(kb):
    prog = parse_program("program p(x: Real) = let a = Take x in Take x @@ Substitute a",
                         kb.sig)
    with pytest.raises(LucasError):
        compile_body(prog.body)


# -- input checking ----------------------------------------------------------


def test_input_term_one_step_ahead(kb, diff_instance):
    s = _fresh(kb, diff_instance)
    s.next_step()  # Take
    res = s.check_input_term(parse("1 + cos(x ^ 2) * (2 * x)", kb.sig))
    assert res.accepted
    # the step keeps the user's words but carries the engine's tactic
    assert render(res.item.term, kb.sig) == "1 + cos(x ^ 2) * (2 * x)"
    assert res.item.tactic["kind"] == "Rewrite_Set_Inst"
    assert res.item.detail  # replaying details for the jumped-over rules


def test_input_term_multi_step_ahead_materializes_details(kb, biegelinie):
    s = _fresh(kb, biegelinie)
    res = s.check_input_term(parse(GOLDEN_Y.replace(
        "-1/6 * (EI ^ -1 * (L * (q_0 * x ^ 3)))",
        "-1 * (L * q_0 * x ^ 3) / (6 * EI)"), kb.sig))
    assert res.accepted
    assert res.item.tactic["kind"] == "Derived"
    assert res.item.tactic["steps"] == 5
    assert len(res.item.detail) == 5
    assert sum(isinstance(d, ProblemBlock) for d in res.item.detail) == 3


def test_input_term_wrong_rejected(kb, diff_instance):
    s = _fresh(kb, diff_instance)
    s.next_step()
    res = s.check_input_term(parse("1 + 3 * (x * cos(x ^ 2))", kb.sig))
    assert not res.accepted
    assert res.error_pattern is None
    assert "not derivable" in res.reason


def test_input_term_mutation_fuzz(kb, diff_instance):
    rng = random.Random(17)
    correct = "1 + 2 * (x * cos(x ^ 2))"
    tokens = correct.split(" ")
    swaps = {"+": "-", "-": "+", "*": "^", "1": "4", "2": "5", "x": "q_0"}
    for _ in range(20):
        i = rng.choice([j for j, t in enumerate(tokens) if t in swaps])
        mutated = " ".join(swaps[t] if j == i else t for j, t in enumerate(tokens))
        s = _fresh(kb, diff_instance)
        s.next_step()
        try:
            res = s.check_input_term(parse(mutated, kb.sig))
        except LucasError:
            continue
        assert not res.accepted, mutated


def test_input_error_pattern_square_of_sum(kb):
    formal = Model()
    formal.given = [parse("Funktionsterm ((x + 2) ^ 2)", kb.sig),
                    parse("FunktionsVariable x", kb.sig)]
    formal.find = [parse("Abgeleitet d_d", kb.sig)]
    inst = ProblemInstance(
        id="sq", statement="", formalisation=formal,
        refs={"theory": "Diff", "problem": ("Ableitungen",),
              "method": ("Diff", "differenzieren")},
        args={"t": parse("(x + 2) ^ 2", kb.sig), "v": parse("x", kb.sig)})
    s = _fresh(kb, inst)
    s.next_step()  # Take d/d x ((x + 2) ^ 2)
    res = s.check_input_term(parse("d/d x (x ^ 2 + 2 ^ 2)", kb.sig))
    assert not res.accepted
    assert res.error_pattern is not None
    assert res.error_pattern["id"] == "square_of_sum"


def test_input_tactic_match_and_skip(kb, diff_instance):
    s = _fresh(kb, diff_instance)
    s.next_step()
    res = s.check_input_tactic(parse_tactic("Rewrite_Set norm_poly", kb.sig))
    assert res.accepted and res.done
    # the skipped differentiation step is preserved as detail
    assert any(d.tactic.get("kind") == "Rewrite_Set_Inst" for d in res.item.detail)


def test_input_tactic_unknown_ruleset(kb, diff_instance):
    s = _fresh(kb, diff_instance)
    s.next_step()
    with pytest.raises(NotApplicable):
        s.check_input_tactic(parse_tactic("Rewrite_Set no_such_set", kb.sig))


def test_input_tactic_not_upcoming(kb, diff_instance):
    s = _fresh(kb, diff_instance)
    s.next_step()
    res = s.check_input_tactic(parse_tactic("Rewrite_Set_Inst ((bdv, x), integrieren)",
                                            kb.sig))
    assert not res.accepted


def test_input_rejected_outside_solve(kb, diff_instance):
    s = Session(kb, diff_instance)
    with pytest.raises(PhaseError):
        s.check_input_term(parse("x", kb.sig))


# -- view --------------------------------------------------------------------


def test_view_expansion_levels(kb, diff_instance):
    s = _fresh(kb, diff_instance)
    tree = s.auto_solve()
    collapsed = view(tree, set(), kb.sig)
    assert collapsed.startswith("Problem: Ableitungen")
    assert "[Take]" not in collapsed

    expanded = view(tree, {tree.id}, kb.sig)
    assert "[Take]" in expanded
    assert "Result: 1 + 2 * (x * cos(x ^ 2))" in expanded

    step = next(i for i in tree.items if isinstance(i, Step) and i.detail)
    deep = view(tree, {tree.id, step.id}, kb.sig)
    assert len(deep.splitlines()) > len(expanded.splitlines())


def test_view_deterministic(kb, biegelinie):
    t1 = _fresh(kb, biegelinie).auto_solve()
    t2 = _fresh(kb, biegelinie).auto_solve()
    ids = {t1.id} | {i.id for i in t1.items}
    assert view(t1, ids, kb.sig) == view(t2, ids, kb.sig)


def test_item_to_json_shape(kb, diff_instance):
    tree = _fresh(kb, diff_instance).auto_solve()
    data = item_to_json(tree, kb.sig)
    assert data["kind"] == "problem"
    assert data["problem"] == ["Ableitungen"]
    assert data["postcond"] is True
    assert all(i["kind"] in ("step", "problem") for i in data["items"])
