import json

import pytest

from lucas.cli import main


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_emits_calculation(capsys):
    code, out, err = _run(capsys, "solve", "instances/diff.json")
    assert code == 0
    data = json.loads(out)
    assert data["kind"] == "problem"
    assert data["result"] == "1 + 2 * (x * cos(x ^ 2))"
    assert data["postcond"] is True


def test_solve_trace_goes_to_stderr(capsys):
    code, out, err = _run(capsys, "solve", "instances/diff.json", "--trace")
    assert code == 0
    json.loads(out)  # stdout stays machine-readable
    assert "Problem: Ableitungen" in err


def test_solve_then_check_self_consistent(capsys, tmp_path):
    code, out, _ = _run(capsys, "solve", "instances/biegelinie.json")
    assert code == 0
    calc = tmp_path / "calc.json"
    calc.write_text(out)
    code, out, _ = _run(capsys, "check", str(calc),
                        "--instance", "instances/biegelinie.json")
    assert code == 0
    assert json.loads(out) == {"ok": True, "divergences": []}


def test_check_flags_mutated_calculation(capsys, tmp_path):
    code, out, _ = _run(capsys, "solve", "instances/diff.json")
    data = json.loads(out)
    for item in data["items"]:
        if item["kind"] == "step" and item["tactic"]["kind"] == "Rewrite_Set":
            item["term"] = "2 + 2 * (x * cos(x ^ 2))"
    calc = tmp_path / "bad.json"
    calc.write_text(json.dumps(data))
    code, out, err = _run(capsys, "check", str(calc))
    assert code == 1
    body = json.loads(out)
    assert body["ok"] is False and body["divergences"]
    assert "divergence" in err


def test_refine_reports_deepest_key(capsys):
    code, out, _ = _run(capsys, "refine", "instances/eq_quadratic.json",
                        "--root", "equation")
    assert code == 0
    assert json.loads(out) == {
        "key": ["equation", "univariate", "polynomial", "quadratic"]}


def test_refine_no_match_is_usage_error(capsys):
    code, _, err = _run(capsys, "refine", "instances/biegelinie.json",
                        "--root", "equation")
    assert code == 2
    assert "NoMatch" in err


def test_prereq_orders_prerequisites_first(capsys):
    code, out, _ = _run(capsys, "prereq", "Baustatik/Biegelinien")
    assert code == 0
    closure = json.loads(out)["closure"]
    keys = [(n["kind"], tuple(n["key"]) if isinstance(n["key"], list) else n["key"])
            for n in closure]
    root = ("problem", "Baustatik/Biegelinien")
    assert keys[-1] == root or keys.index(("ruleset", "integrieren")) < keys.index(root)


def test_lint_clean_kb(capsys):
    code, out, _ = _run(capsys, "lint", "kb")
    assert code == 0
    assert json.loads(out) == {"ok": True, "findings": []}


def test_lint_broken_kb(capsys, tmp_path):
    tdir = tmp_path / "A"
    tdir.mkdir()
    (tdir / "theory.json").write_text(json.dumps({
        "imports": [],
        "theorems": {"bad": {"lhs": "a + b", "rhs": "a = b"}},
    }))
    code, out, _ = _run(capsys, "lint", str(tmp_path))
    assert code == 1
    assert not json.loads(out)["ok"]


def test_missing_file_is_usage_error(capsys):
    code, _, err = _run(capsys, "solve", "instances/absent.json")
    assert code == 2
    assert err.strip()


def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 2
