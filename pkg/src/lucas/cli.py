"""Batch command line: solve, check, refine, prereq, lint, serve.

Machine-readable JSON goes to stdout, human diagnostics to stderr.
Exit codes: 0 success, 1 verification failure, 2 usage or knowledge errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import LucasError
from .interpreter import Session, item_from_json, replay_calc, tree_to_json_str
from .knowledge import lint, load_instance, load_kb, resolve_problem_key, knowledge_closure
from .specification import refine


def _kb_dir(args) -> str:
    return args.kb or os.environ.get("LUCAS_KB", "kb")


def _load(args):
    return load_kb(_kb_dir(args))


def cmd_solve(args) -> int:
    kb = _load(args)
    inst = load_instance(args.instance, kb)
    session = Session(kb, inst, skip_specification=True)
    session.auto_solve()
    sys.stdout.write(tree_to_json_str(session.root, kb.sig))
    if args.trace:
        from .interpreter import view
        ids = set(range(10000))
        sys.stderr.write(view(session.root, ids, kb.sig) + "\n")
    return 0


def cmd_check(args) -> int:
    kb = _load(args)
    with open(args.calc) as f:
        tree = item_from_json(json.load(f), kb.sig)
    assumptions = []
    if args.instance:
        assumptions = load_instance(args.instance, kb).assumptions
    divergences = replay_calc(kb, tree, assumptions)
    json.dump({"ok": not divergences, "divergences": divergences},
              sys.stdout, indent=1, sort_keys=True)
    sys.stdout.write("\n")
    if divergences:
        sys.stderr.write(f"first divergence: {divergences[0]}\n")
        return 1
    return 0


def cmd_refine(args) -> int:
    kb = _load(args)
    inst = load_instance(args.instance, kb)
    root = resolve_problem_key(kb, args.root)
    key = refine(kb, inst, root)
    json.dump({"key": list(key)}, sys.stdout)
    sys.stdout.write("\n")
    return 0


def cmd_prereq(args) -> int:
    kb = _load(args)
    keys = [resolve_problem_key(kb, k) for k in args.keys]
    closure = knowledge_closure(kb, keys)
    json.dump({"closure": [{"kind": kind, "key": list(key) if isinstance(key, tuple) else key}
                           for kind, key in closure]},
              sys.stdout, indent=1, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def cmd_lint(args) -> int:
    kb = load_kb(args.kb_dir)
    findings = lint(kb)
    json.dump({"ok": not findings, "findings": findings},
              sys.stdout, indent=1, sort_keys=True)
    sys.stdout.write("\n")
    return 1 if findings else 0


def cmd_serve(args) -> int:
    from .service import serve
    serve(kb_dir=_kb_dir(args),
          store_dir=args.store or os.environ.get("LUCAS_STORE", "store"),
          instances_dir=args.instances or os.environ.get("LUCAS_INSTANCES", "instances"),
          port=args.port or int(os.environ.get("LUCAS_PORT", "8000")))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lucas")
    p.add_argument("--kb", help="knowledge base directory (default ./kb)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="auto-solve an instance, emit the calculation")
    s.add_argument("instance")
    s.add_argument("--trace", action="store_true")
    s.set_defaults(fn=cmd_solve)

    s = sub.add_parser("check", help="replay a calculation, report divergences")
    s.add_argument("calc")
    s.add_argument("--instance", help="instance file providing assumptions")
    s.set_defaults(fn=cmd_check)

    s = sub.add_parser("refine", help="deepest matching problem for an instance")
    s.add_argument("instance")
    s.add_argument("--root", required=True)
    s.set_defaults(fn=cmd_refine)

    s = sub.add_parser("prereq", help="prerequisite-ordered knowledge closure")
    s.add_argument("keys", nargs="+")
    s.set_defaults(fn=cmd_prereq)

    s = sub.add_parser("lint", help="check a knowledge base directory")
    s.add_argument("kb_dir")
    s.set_defaults(fn=cmd_lint)

    s = sub.add_parser("serve", help="start the session service")
    s.add_argument("--store")
    s.add_argument("--instances")
    s.add_argument("--port", type=int)
    s.set_defaults(fn=cmd_serve)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except LucasError as e:
        sys.stderr.write(f"{type(e).__name__}: {e}\n")
        return 2
    except FileNotFoundError as e:
        sys.stderr.write(f"not found: {e.filename}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
