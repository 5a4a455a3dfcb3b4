"""Walk the bending-line problem end to end, narrating every step.

Run from the repository root:

    python3 demos/solve_biegelinie.py
"""

from lucas.interpreter import Session, Step, view
from lucas.knowledge import load_kb, load_instance
from lucas.terms import render


def main():
    kb = load_kb("kb")
    instance = load_instance("instances/biegelinie.json", kb)
    session = Session(kb, instance)
    session._auto_specify()

    print("Problem:", "/".join(instance.refs["problem"]))
    print("Method: ", "/".join(instance.refs["method"]))
    print()

    while session.phase == "solve":
        proposal = session.next_step()
        tactic = proposal.tactic
        label = tactic["kind"]
        for extra in ("name", "ruleset", "problem"):
            if extra in tactic:
                label += " " + (
                    "/".join(tactic[extra]) if isinstance(tactic[extra], list)
                    else tactic[extra])
                break
        if isinstance(proposal.item, Step):
            print(f"{label:<44} {render(proposal.item.term, kb.sig)}")
        else:
            print(f"{label:<44} (sub-problem, {len(proposal.item.items)} steps)")

    print()
    print("Result:       ", render(session.root.result, kb.sig))
    print("Postcondition:", session.root.postcond)
    print()
    print("Collapsed outline:")
    print(view(session.root, set(), kb.sig))


if __name__ == "__main__":
    main()
