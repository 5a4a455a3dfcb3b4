import pytest

from lucas.errors import NoMatch
from lucas.knowledge import load_instance
from lucas.specification import (
    GraphEdge,
    GraphNode,
    Model,
    SubProblemGraph,
    check_postcondition,
    match_model,
    match_pattern_model,
    node_matches,
    refine,
    validate_graph,
)
from lucas.terms import parse

GOLDEN_Y = ("y x = -1/6 * (EI ^ -1 * (L * (q_0 * x ^ 3))) + "
            "(1/24 * (EI ^ -1 * (q_0 * x ^ 4)) + "
            "1/4 * (EI ^ -1 * (L ^ 2 * (q_0 * x ^ 2))))")
MUTANT_Y = ("y x = 1/6 * (EI ^ -1 * (L * (q_0 * x ^ 3))) + "
            "(1/24 * (EI ^ -1 * (q_0 * x ^ 4)) + "
            "1/4 * (EI ^ -1 * (L ^ 2 * (q_0 * x ^ 2))))")


def _model(kb, **fields):
    m = Model()
    for fld, items in fields.items():
        for s in items:
            m.items(fld).append(parse(s, kb.sig))
    return m


# -- match_model -------------------------------------------------------------


def test_match_model_verdicts(kb, biegelinie):
    pattern = kb.problems[("Baustatik", "Biegelinien")].model
    user = _model(kb,
                  given=["Traegerlaenge L", "Streckenlast (2 * q_0)", "Biegelinie q_0"],
                  find=["Biegelinie y"])
    fb = match_model(pattern, user, biegelinie.formalisation, kb.rulesets["norm_poly"])
    verdicts = {(f.field, f.verdict) for f in fb.items}
    assert ("given", "correct") in verdicts
    assert ("given", "incorrect") in verdicts
    assert ("given", "superfluous") in verdicts
    assert ("find", "correct") in verdicts
    assert ("relate", "missing") in verdicts
    assert not fb.complete


def test_match_model_complete(kb, biegelinie):
    pattern = kb.problems[("Baustatik", "Biegelinien")].model
    fb = match_model(pattern, biegelinie.formalisation, biegelinie.formalisation,
                     kb.rulesets["norm_poly"])
    assert fb.complete
    assert all(f.verdict == "correct" for f in fb.items)


def test_match_model_up_to_normalization(kb, biegelinie):
    pattern = kb.problems[("Baustatik", "Biegelinien")].model
    user = _model(kb, given=["Traegerlaenge (1 * L + 0)", "Streckenlast q_0"])
    fb = match_model(pattern, user, biegelinie.formalisation, kb.rulesets["norm_poly"])
    by_field = [f for f in fb.items if f.field == "given" and f.term is not None]
    assert all(f.verdict == "correct" for f in by_field)


# -- pattern matching over models --------------------------------------------


def test_match_pattern_model_binds(kb, biegelinie):
    pattern = kb.problems[("Baustatik", "Biegelinien")].model
    sigma = match_pattern_model(pattern, biegelinie.formalisation)
    assert sigma is not None
    assert sigma["l_"].name == "L"
    assert sigma["q_"].name == "q_0"


def test_match_pattern_model_rejects_wrong_shape(kb):
    pattern = kb.problems[("equation",)].model
    concrete = _model(kb, given=["solveFor x"], find=["solutions L_L"])
    assert match_pattern_model(pattern, concrete) is None


# -- refinement with a brute-force oracle ------------------------------------

EQ_CASES = [
    ("eq_linear", ("equation", "univariate", "polynomial", "linear")),
    ("eq_quadratic", ("equation", "univariate", "polynomial", "quadratic")),
    ("eq_cubic", ("equation", "univariate", "polynomial")),
    ("eq_sin", ("equation", "univariate")),
    ("eq_root", ("equation", "univariate", "root_equation")),
    ("eq_multivariate", ("equation",)),
]


def _brute_force_deepest(kb, instance, root_key):
    """Enumerate every chain of matching nodes; deepest wins, leftmost on ties."""
    pred_rs = kb.rulesets["eval_predicates"]
    root = kb.problems[tuple(root_key)]
    if not node_matches(kb, root, instance, pred_rs):
        return None
    candidates = []

    def walk(node, depth, idx_path):
        candidates.append((depth, idx_path, node.key))
        for i, child in enumerate(node.children):
            if node_matches(kb, child, instance, pred_rs):
                walk(child, depth + 1, idx_path + (i,))

    walk(root, 0, ())
    deepest = max(d for d, _, _ in candidates)
    return min((p, k) for d, p, k in candidates if d == deepest)[1]


@pytest.mark.parametrize("instance_id,expected", EQ_CASES)
def test_refine_matches_oracle(kb, instance_id, expected):
    instance = load_instance(f"instances/{instance_id}.json", kb)
    got = refine(kb, instance, ("equation",))
    assert got == expected
    assert got == _brute_force_deepest(kb, instance, ("equation",))


def test_refine_deterministic(kb):
    instance = load_instance("instances/eq_quadratic.json", kb)
    results = {refine(kb, instance, ("equation",)) for _ in range(5)}
    assert len(results) == 1


def test_refine_no_match_raises(kb, biegelinie):
    with pytest.raises(NoMatch):
        refine(kb, biegelinie, ("equation",))


def test_refine_biegelinie_root(kb, biegelinie):
    assert refine(kb, biegelinie, ("Baustatik",)) == ("Baustatik", "Biegelinien")


# -- sub-problem graphs ------------------------------------------------------


def _beam_graph(order=("aus", "setze", "solve")):
    nodes = {
        "aus": GraphNode("aus", inputs=("q", "v"), outputs=("funs",)),
        "setze": GraphNode("setze", inputs=("funs", "rb"), outputs=("eqs",)),
        "solve": GraphNode("solve", inputs=("eqs",), outputs=("sol",)),
    }
    edges = [
        GraphEdge("aus", "funs", "setze", "funs"),
        GraphEdge("setze", "eqs", "solve", "eqs"),
    ]
    return SubProblemGraph([nodes[k] for k in order], edges)


def test_validate_graph_ok():
    res = validate_graph(_beam_graph(), root_given=("q", "v", "rb"))
    assert res.ok
    assert res.order == ["aus", "setze", "solve"]


def test_validate_graph_swapped_nodes_unfed():
    res = validate_graph(_beam_graph(order=("setze", "aus", "solve")),
                         root_given=("q", "v", "rb"))
    assert not res.ok
    assert any(v.startswith("UnfedInput(setze") for v in res.violations)


def test_validate_graph_missing_given():
    res = validate_graph(_beam_graph(), root_given=("q", "v"))
    assert not res.ok
    assert "UnfedInput(setze,rb)" in res.violations


def test_validate_graph_cycle():
    g = _beam_graph()
    g.edges.append(GraphEdge("solve", "sol", "aus", "q"))
    res = validate_graph(g, root_given=("q", "v", "rb"))
    assert not res.ok
    assert any(v.startswith("Cycle(") for v in res.violations)


def test_validate_graph_multiply_fed():
    g = _beam_graph()
    g.edges.append(GraphEdge("aus", "funs", "solve", "eqs"))
    res = validate_graph(g, root_given=("q", "v", "rb"))
    assert not res.ok
    assert "MultiplyFed(solve,eqs)" in res.violations


# -- post-condition checking -------------------------------------------------


def test_postcondition_golden_true(kb, biegelinie):
    solution = [parse(GOLDEN_Y, kb.sig)]
    assert check_postcondition(kb, biegelinie, solution) is True


def test_postcondition_mutant_false(kb, biegelinie):
    solution = [parse(MUTANT_Y, kb.sig)]
    assert check_postcondition(kb, biegelinie, solution) is False


def test_postcondition_empty_solution_not_true(kb, biegelinie):
    assert check_postcondition(kb, biegelinie, []) is not True


def test_postcondition_undecidable_is_unknown(kb, biegelinie):
    from lucas.specification import ProblemInstance

    inst = ProblemInstance(
        id="synthetic", statement="",
        formalisation=_model(kb, relate=["M > 0"]))
    assert check_postcondition(kb, inst, []) is None
