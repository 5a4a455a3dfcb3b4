"""Show how learner input is checked on the derivative exercise.

The engine accepts a term when it can reach it within a bounded lookahead
of its own program, replays the skipped steps as hidden detail, and
matches common slips against error patterns.

Run from the repository root:

    python3 demos/check_inputs.py
"""

from lucas.interpreter import Session
from lucas.knowledge import load_kb, load_instance
from lucas.terms import parse, render


def try_input(session, kb, text):
    print(f"  input: {text}")
    result = session.check_input_term(parse(text, kb.sig))
    if result.accepted:
        tactic = result.item.tactic
        print(f"  -> accepted as {tactic['kind']}", end="")
        if tactic.get("steps"):
            print(f" covering {tactic['steps']} engine steps", end="")
        print()
        for d in result.item.detail:
            print(f"       hidden: {d.tactic['kind']:<14}"
                  f" {render(d.term, kb.sig)}")
    else:
        print(f"  -> rejected: {result.reason}")
        if result.error_pattern:
            print(f"     pattern {result.error_pattern['id']}:"
                  f" {result.error_pattern['feedback']}")
    print()
    return result


def main():
    kb = load_kb("kb")
    instance = load_instance("instances/diff.json", kb)
    session = Session(kb, instance)
    session._auto_specify()

    print("Exercise: differentiate", render(instance.args["t"], kb.sig))
    print()

    print("A wrong guess is rejected:")
    try_input(session, kb, "d/d x (x + sin(x ^ 2)) + 1")

    print("The final answer, several engine steps ahead, is accepted")
    print("with the intermediate work attached as detail:")
    try_input(session, kb, "1 + 2 * (x * cos(x ^ 2))")

    print("Outline after the exchange:")
    for item in session.root.items:
        print(f"  {item.tactic['kind']:<10} {render(item.term, kb.sig)}")


if __name__ == "__main__":
    main()
