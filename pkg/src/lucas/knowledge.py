"""Knowledge base: theories, definitions, rule sets, problems, methods.

On-disk layout under a KB root directory:

    <root>/<theory>/theory.json     constants, definitions, theorems,
                                    rulesets, error patterns, imports
    <root>/<theory>/problems.json   refinement-tree fragments
    <root>/<theory>/methods.json    method interfaces and guards
    <root>/<theory>/programs/*.prog tactic programs (DSL text)
    <root>/dialog_rules.json        dialogue policy (optional)

All terms are stored as surface-syntax strings.  The loaded KnowledgeBase is
immutable by convention and shared read-only across sessions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from . import program as prog_mod
from .errors import (
    CyclicImports,
    DanglingReference,
    KBParseError,
    LucasError,
    NotFound,
)
from .rewrite import ErrorPattern, Rule, RuleSet, HOOKS
from .specification import (
    ProblemInstance,
    ProblemNode,
    model_from_strings,
)
from .terms import (
    App,
    Const,
    Fixity,
    SignatureTable,
    Term,
    Type,
    parse,
    parse_type,
    typecheck,
)


@dataclass
class Definition:
    name: str
    symbol: str
    formal: Optional[Term]
    explanation: str
    theory: str
    file: str = ""


@dataclass
class MethodParam:
    name: str
    type: Type
    descriptor: Optional[str] = None


@dataclass
class Method:
    key: Tuple[str, ...]
    params: List[MethodParam]
    guard_where: List[Term]
    program: Optional[str] = None
    elementary: Optional[str] = None
    rulesets: Dict[str, str] = field(default_factory=dict)
    theory: str = ""


@dataclass
class Theory:
    name: str
    imports: List[str]
    sig: SignatureTable  # closure over imports
    definitions: Dict[str, Definition] = field(default_factory=dict)
    theorems: Dict[str, Rule] = field(default_factory=dict)
    rulesets: Dict[str, RuleSet] = field(default_factory=dict)
    error_patterns: List[ErrorPattern] = field(default_factory=list)
    path: str = ""


class KnowledgeBase:
    def __init__(self, root: str):
        self.root = str(root)
        self.theories: Dict[str, Theory] = {}
        self.sig = SignatureTable()
        self.definitions: Dict[str, Definition] = {}  # keyed by defined symbol
        self.definitions_by_name: Dict[str, Definition] = {}
        self.rules: Dict[str, Rule] = {}
        self.rule_theory: Dict[str, str] = {}
        self.rulesets: Dict[str, RuleSet] = {}
        self.ruleset_theory: Dict[str, str] = {}
        self.error_patterns: List[ErrorPattern] = []
        self.problems: Dict[Tuple[str, ...], ProblemNode] = {}
        self.problem_roots: List[ProblemNode] = []
        self.problem_theory: Dict[Tuple[str, ...], str] = {}
        self.methods: Dict[Tuple[str, ...], Method] = {}
        self.programs: Dict[str, prog_mod.TacticProgram] = {}
        self.dialog_rules: List[dict] = []


# ---------------------------------------------------------------------------
# Loading


def _topo_theories(raw: Dict[str, dict]) -> List[str]:
    order: List[str] = []
    state: Dict[str, int] = {}  # 1 visiting, 2 done

    def visit(name: str, stack: List[str]):
        if state.get(name) == 2:
            return
        if state.get(name) == 1:
            raise CyclicImports(stack[stack.index(name):] + [name])
        if name not in raw:
            raise DanglingReference("theory-import", name)
        state[name] = 1
        stack.append(name)
        for imp in raw[name].get("imports", []):
            visit(imp, stack)
        stack.pop()
        state[name] = 2
        order.append(name)

    for name in sorted(raw):
        visit(name, [])
    return order


def _parse_term(text: str, sig: SignatureTable, file: str, var_types=None) -> Term:
    try:
        return parse(text, sig, var_types=var_types)
    except LucasError as e:
        raise KBParseError(file, f"in {text!r}: {e}") from e


def _load_theory(kb: KnowledgeBase, name: str, raw: dict, path: Path):
    tfile = str(path / "theory.json")
    sig = SignatureTable()
    for imp in raw.get("imports", []):
        sig = sig.extended(kb.theories[imp].sig)

    # constants first, then knowledge links, so parsed Consts carry them
    for cname, spec in raw.get("constants", {}).items():
        try:
            ctype = parse_type(spec["type"])
        except Exception as e:
            raise KBParseError(tfile, f"constant {cname}: {e}") from e
        fx = None
        if "fixity" in spec:
            f = spec["fixity"]
            fx = Fixity(f.get("kind", "infix"), f["prec"], f.get("assoc", "left"))
        sig.declare(cname, ctype, fixity=fx, poly=bool(spec.get("poly")))
    for dname, spec in raw.get("definitions", {}).items():
        sig.links[spec.get("symbol", dname)] = (name, dname)

    theory = Theory(name, list(raw.get("imports", [])), sig, path=str(path))

    for dname, spec in raw.get("definitions", {}).items():
        formal = None
        if spec.get("formal"):
            formal = _parse_term(spec["formal"], sig, tfile)
        symbol = spec.get("symbol", dname)
        d = Definition(dname, symbol, formal, spec.get("explanation", ""), name, tfile)
        theory.definitions[dname] = d
        kb.definitions.setdefault(symbol, d)
        kb.definitions_by_name[dname] = d

    for rname, spec in raw.get("theorems", {}).items():
        var_types: Dict[str, Type] = {}
        rule = Rule(
            rname,
            _parse_term(spec["lhs"], sig, tfile, var_types),
            _parse_term(spec["rhs"], sig, tfile, var_types),
            tuple(_parse_term(c, sig, tfile, var_types) for c in spec.get("conditions", [])),
            tuple(spec.get("bdvs", [])),
        )
        try:
            rule.check_wellformed()
        except ValueError as e:
            raise KBParseError(tfile, str(e)) from e
        if rname in kb.rules:
            raise KBParseError(tfile, f"duplicate theorem name {rname!r}")
        theory.theorems[rname] = rule
        kb.rules[rname] = rule
        kb.rule_theory[rname] = name

    for rsname, spec in raw.get("rulesets", {}).items():
        rules = []
        for rn in spec.get("rules", []):
            if rn not in kb.rules:
                raise DanglingReference("rule", rn)
            rules.append(kb.rules[rn])
        hooks = tuple(spec.get("hooks", ["arith"]))
        for h in hooks:
            if h not in HOOKS:
                raise DanglingReference("hook", h)
        rs = RuleSet(rsname, rules, hooks=hooks, max_steps=int(spec.get("max_steps", 2000)))
        theory.rulesets[rsname] = rs
        if rsname in kb.rulesets:
            raise KBParseError(tfile, f"duplicate ruleset name {rsname!r}")
        kb.rulesets[rsname] = rs
        kb.ruleset_theory[rsname] = name

    for spec in raw.get("error_patterns", []):
        var_types = {}
        ep = ErrorPattern(
            spec["id"],
            _parse_term(spec["lhs"], sig, tfile, var_types),
            _parse_term(spec["rhs"], sig, tfile, var_types),
            spec.get("feedback", ""),
        )
        theory.error_patterns.append(ep)
        kb.error_patterns.append(ep)

    kb.theories[name] = theory
    kb.sig = kb.sig.extended(sig)


def _load_problems(kb: KnowledgeBase, theory: Theory):
    pfile = Path(theory.path) / "problems.json"
    if not pfile.exists():
        return
    try:
        raw = json.loads(pfile.read_text())
    except json.JSONDecodeError as e:
        raise KBParseError(str(pfile), str(e)) from e

    def build(spec: dict, parent: Optional[ProblemNode]) -> ProblemNode:
        key = tuple(spec["key"])
        if parent is not None and key[:len(parent.key)] != parent.key:
            raise KBParseError(str(pfile), f"child key {key} does not extend {parent.key}")
        model = model_from_strings(
            spec.get("model_pattern", {}), theory.sig,
            lambda s, sig: _parse_term(s, sig, str(pfile)))
        if parent is not None:
            # tighter pre-conditions: a child inherits the parent's where-clauses
            from .rewrite import structural_eq
            for w in parent.model.where:
                if not any(structural_eq(w, w2) for w2 in model.where):
                    model.where.insert(0, w)
        node = ProblemNode(key, model, [tuple(m) for m in spec.get("methods", [])])
        if key in kb.problems:
            raise KBParseError(str(pfile), f"duplicate problem key {key}")
        kb.problems[key] = node
        kb.problem_theory[key] = theory.name
        for child in spec.get("children", []):
            node.children.append(build(child, node))
        return node

    for spec in raw.get("problems", []):
        kb.problem_roots.append(build(spec, None))


def _load_methods(kb: KnowledgeBase, theory: Theory):
    mfile = Path(theory.path) / "methods.json"
    if not mfile.exists():
        return
    try:
        raw = json.loads(mfile.read_text())
    except json.JSONDecodeError as e:
        raise KBParseError(str(mfile), str(e)) from e
    for spec in raw.get("methods", []):
        key = tuple(spec["key"])
        params = []
        var_types: Dict[str, Type] = {}
        for p in spec.get("params", []):
            ptype = parse_type(p.get("type", "Real"))
            params.append(MethodParam(p["name"], ptype, p.get("descriptor")))
            var_types[p["name"]] = ptype
        guard_where = [_parse_term(s, theory.sig, str(mfile), var_types)
                       for s in spec.get("guard_where", [])]
        method = Method(key, params, guard_where,
                        program=spec.get("program"),
                        elementary=spec.get("elementary"),
                        rulesets=dict(spec.get("rulesets", {})),
                        theory=theory.name)
        if key in kb.methods:
            raise KBParseError(str(mfile), f"duplicate method key {key}")
        kb.methods[key] = method


def _load_programs(kb: KnowledgeBase, theory: Theory):
    pdir = Path(theory.path) / "programs"
    if not pdir.is_dir():
        return
    for pfile in sorted(pdir.glob("*.prog")):
        try:
            prog = prog_mod.parse_program(pfile.read_text(), theory.sig)
        except LucasError as e:
            raise KBParseError(str(pfile), str(e)) from e
        if prog.name in kb.programs:
            raise KBParseError(str(pfile), f"duplicate program name {prog.name!r}")
        kb.programs[prog.name] = prog


def load_kb(root) -> KnowledgeBase:
    """Load, cross-reference and check a knowledge-base directory."""
    rootp = Path(root)
    kb = KnowledgeBase(str(rootp))
    raw: Dict[str, dict] = {}
    paths: Dict[str, Path] = {}
    if rootp.is_dir():
        for sub in sorted(rootp.iterdir()):
            tfile = sub / "theory.json"
            if sub.is_dir() and tfile.exists():
                try:
                    raw[sub.name] = json.loads(tfile.read_text())
                except json.JSONDecodeError as e:
                    raise KBParseError(str(tfile), str(e)) from e
                paths[sub.name] = sub

    for name in _topo_theories(raw):
        _load_theory(kb, name, raw[name], paths[name])
    for name in _topo_theories(raw):
        theory = kb.theories[name]
        _load_problems(kb, theory)
        _load_methods(kb, theory)
    for name in _topo_theories(raw):
        _load_programs(kb, kb.theories[name])

    # cross-reference problems -> methods and methods -> programs/rulesets
    for node in kb.problems.values():
        for mkey in node.methods:
            if mkey not in kb.methods:
                raise DanglingReference("method", mkey)
    for method in kb.methods.values():
        if method.program is not None and method.program not in kb.programs:
            raise DanglingReference("program", method.program)
        for rsname in method.rulesets.values():
            if rsname not in kb.rulesets:
                raise DanglingReference("ruleset", rsname)
    for prog in kb.programs.values():
        prog_mod.resolve_program(prog, kb)

    dfile = rootp / "dialog_rules.json"
    if dfile.exists():
        try:
            kb.dialog_rules = json.loads(dfile.read_text())
        except json.JSONDecodeError as e:
            raise KBParseError(str(dfile), str(e)) from e
    return kb


# ---------------------------------------------------------------------------
# Lookup (click-to-definition)


def lookup_definition(kb: KnowledgeBase, key: str) -> dict:
    """Resolve a symbol, theorem, ruleset or definition name to its source.

    Returns a payload with kind, origin theory, formal statement and
    explanation; raises NotFound for declared-but-undefined symbols.
    """
    from .terms import render

    if key in kb.definitions_by_name or key in kb.definitions:
        d = kb.definitions_by_name.get(key) or kb.definitions[key]
        return {
            "kind": "definition",
            "name": d.name,
            "symbol": d.symbol,
            "theory": d.theory,
            "formal": render(d.formal, kb.sig) if d.formal is not None else None,
            "explanation": d.explanation,
            "file": d.file,
        }
    if key in kb.rules:
        r = kb.rules[key]
        payload = {
            "kind": "theorem",
            "name": r.name,
            "theory": kb.rule_theory[r.name],
            "formal": f"{render(r.lhs, kb.sig)} = {render(r.rhs, kb.sig)}",
            "conditions": [render(c, kb.sig) for c in r.conditions],
            "explanation": "",
        }
        return payload
    if key in kb.rulesets:
        rs = kb.rulesets[key]
        return {
            "kind": "ruleset",
            "name": rs.name,
            "theory": kb.ruleset_theory[rs.name],
            "rules": [r.name for r in rs.rules],
            "hooks": list(rs.hooks),
            "max_steps": rs.max_steps,
            "explanation": "",
        }
    raise NotFound(key)


# ---------------------------------------------------------------------------
# Prerequisite-knowledge closure


def resolve_problem_key(kb: KnowledgeBase, key) -> Tuple[str, ...]:
    """Accept a full key path (tuple, list or slash string) or a last
    component; an ambiguous component resolves to the first key in knowledge
    base load order."""
    if isinstance(key, (list, tuple)):
        k = tuple(key)
        if k in kb.problems:
            return k
        raise NotFound(k)
    if "/" in key:
        k = tuple(key.split("/"))
        if k in kb.problems:
            return k
        raise NotFound(key)
    if (key,) in kb.problems:
        return (key,)
    hits = [k for k in kb.problems if k[-1] == key]
    if hits:
        return hits[0]
    raise NotFound(key)


def _method_deps(kb: KnowledgeBase, method: Method):
    """Prerequisite node ids of a method: rulesets, sub-problem keys."""
    deps = []
    for rsname in method.rulesets.values():
        deps.append(("ruleset", rsname))
    if method.program is not None:
        prog = kb.programs[method.program]
        for e in prog_mod.walk(prog.body):
            if isinstance(e, prog_mod.SubProblemExpr):
                deps.append(("problem", "/".join(e.problem_key)))
                deps.append(("method", "/".join(e.method_key)))
            if isinstance(e, prog_mod.TacticApp):
                tac = e.tactic
                if isinstance(tac, (prog_mod.RewriteSet, prog_mod.RewriteSetInst)):
                    deps.append(("ruleset", tac.ruleset))
    return deps


def _ruleset_deps(kb: KnowledgeBase, rs: RuleSet):
    """Definitions for symbols used inside the rule set's rules."""
    deps = []
    seen = set()
    for rule in rs.rules:
        for t in (rule.lhs, rule.rhs, *rule.conditions):
            for sym in _const_names(t):
                if sym in kb.definitions and sym not in seen:
                    seen.add(sym)
                    deps.append(("definition", sym))
    return deps


def _const_names(t: Term):
    if isinstance(t, Const):
        yield t.name
    elif isinstance(t, App):
        yield from _const_names(t.head)
        for a in t.args:
            yield from _const_names(a)


def knowledge_closure(kb: KnowledgeBase, problem_keys: Sequence) -> List[Tuple[str, str]]:
    """Transitive prerequisites of the given problems, prerequisites first.

    Nodes are (kind, key) pairs with kind in problem/method/ruleset/definition;
    the order is topological with a lexicographic tie-break, so it is
    deterministic and monotone in the input set.
    """
    targets = [("problem", "/".join(resolve_problem_key(kb, k))) for k in problem_keys]

    def deps_of(node):
        kind, key = node
        if kind == "problem":
            pnode = kb.problems[tuple(key.split("/"))]
            return [("method", "/".join(m)) for m in pnode.methods]
        if kind == "method":
            return _method_deps(kb, kb.methods[tuple(key.split("/"))])
        if kind == "ruleset":
            return _ruleset_deps(kb, kb.rulesets[key])
        return []

    # collect the closure, then order with Kahn's algorithm
    closure = set()
    frontier = list(targets)
    while frontier:
        node = frontier.pop()
        if node in closure:
            continue
        closure.add(node)
        frontier.extend(deps_of(node))

    order: List[Tuple[str, str]] = []
    placed = set()
    while len(order) < len(closure):
        ready = sorted(n for n in closure
                       if n not in placed and all(d in placed for d in deps_of(n) if d in closure))
        if not ready:
            raise LucasError("cyclic prerequisite graph")
        order.append(ready[0])
        placed.add(ready[0])
    return order


# ---------------------------------------------------------------------------
# Lint


def lint(kb: KnowledgeBase) -> List[str]:
    """KB health report: dangling links, ill-typed rules, dead program code."""
    findings: List[str] = []

    def check_links(t: Term, where: str):
        for sym in _const_names(t):
            if sym not in kb.definitions:
                findings.append(f"dangling knowledge link: {sym!r} in {where}")

    for rname, rule in kb.rules.items():
        for t in (rule.lhs, rule.rhs, *rule.conditions):
            check_links(t, f"theorem {rname}")
        try:
            lt = typecheck(rule.lhs, kb.sig)
            rt = typecheck(rule.rhs, kb.sig)
            if lt != rt:
                findings.append(f"ill-typed theorem {rname}: lhs {lt}, rhs {rt}")
        except LucasError as e:
            findings.append(f"ill-typed theorem {rname}: {e}")

    for d in kb.definitions_by_name.values():
        if d.formal is not None:
            check_links(d.formal, f"definition {d.name}")
        if d.symbol not in kb.sig.constants:
            findings.append(f"definition {d.name} defines undeclared symbol {d.symbol!r}")

    for ep in kb.error_patterns:
        try:
            lt = typecheck(ep.lhs, kb.sig)
            rt = typecheck(ep.rhs, kb.sig)
            if lt != rt:
                findings.append(f"ill-typed error pattern {ep.id}: lhs {lt}, rhs {rt}")
        except LucasError as e:
            findings.append(f"ill-typed error pattern {ep.id}: {e}")

    for prog in kb.programs.values():
        findings.extend(prog_mod.lint_program(prog))

    for method in kb.methods.values():
        if method.program is None and method.elementary is None:
            findings.append(f"method {'/'.join(method.key)} has neither program nor elementary")
    return findings


# ---------------------------------------------------------------------------
# Problem instances


def load_instance(path, kb: KnowledgeBase) -> ProblemInstance:
    p = Path(path)
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise KBParseError(str(p), str(e)) from e
    sig = kb.sig
    form = model_from_strings(raw.get("formalisation", {}), sig,
                              lambda s, sg: _parse_term(s, sg, str(p)))
    assumptions = [_parse_term(s, sig, str(p)) for s in raw.get("assumptions", [])]
    refs = dict(raw.get("refs", {}))
    for k in ("problem", "method"):
        if k in refs and isinstance(refs[k], list):
            refs[k] = tuple(refs[k])
    args = {name: _parse_term(s, sig, str(p))
            for name, s in raw.get("args", {}).items()}
    return ProblemInstance(
        id=raw.get("id", p.stem),
        statement=raw.get("statement", ""),
        formalisation=form,
        refs=refs,
        args=args,
        assumptions=assumptions,
    )
