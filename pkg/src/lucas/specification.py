"""Problem specifications: models, refinement trees, sub-problem graphs.

A Model carries the four fields Given/Where/Find/Relate.  Problem trees
refine a coarse specification towards one with tighter pre-conditions;
sub-problem graphs wire the outputs of one specification to the inputs of
the next.  The post-condition checker closes the loop: it substitutes a
solution into the Relate items and evaluates them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .errors import NoMatch, NotFound, StepBudgetExceeded
from .rewrite import (
    RuleSet,
    eval_pred,
    match,
    normalize,
    structural_eq,
)
from .terms import (
    App,
    Const,
    DERIV,
    LIST_CONS,
    SignatureTable,
    Term,
    Var,
    free_vars,
    render,
    substitute,
)

MODEL_FIELDS = ("given", "where", "find", "relate")


@dataclass
class Model:
    """Given/Where/Find/Relate, each a list of terms.

    Given and Find items are descriptor-tagged (`Traegerlaenge L`); Where and
    Relate items are Bool-typed.
    """

    given: List[Term] = field(default_factory=list)
    where: List[Term] = field(default_factory=list)
    find: List[Term] = field(default_factory=list)
    relate: List[Term] = field(default_factory=list)

    def items(self, fld: str) -> List[Term]:
        return getattr(self, fld)

    def all_items(self):
        for fld in MODEL_FIELDS:
            for t in self.items(fld):
                yield fld, t


@dataclass
class ProblemNode:
    key: Tuple[str, ...]
    model: Model
    methods: List[Tuple[str, ...]] = field(default_factory=list)
    children: List["ProblemNode"] = field(default_factory=list)


@dataclass
class ProblemInstance:
    id: str
    statement: str
    formalisation: Model
    refs: Dict[str, object] = field(default_factory=dict)  # theory, problem, method
    args: Dict[str, Term] = field(default_factory=dict)
    assumptions: List[Term] = field(default_factory=list)


def descriptor_of(t: Term) -> Optional[str]:
    """Leading descriptor constant of a tagged item, if any."""
    if isinstance(t, App) and isinstance(t.head, Const) and t.head.name not in ("=", LIST_CONS):
        return t.head.name
    return None


# ---------------------------------------------------------------------------
# Model-item checking


@dataclass
class ItemFeedback:
    field: str
    term: Optional[Term]  # None for missing items
    verdict: str  # "correct" | "incorrect" | "superfluous" | "missing"
    expected: Optional[Term] = None  # the formalisation item involved, if any


@dataclass
class ModelFeedback:
    items: List[ItemFeedback]
    complete: bool


def match_model(pattern: Model, user: Model, formalisation: Model,
                norm_rs: RuleSet) -> ModelFeedback:
    """Classify every user item against the hidden formalisation.

    An item is correct when it normalizes equal to a formalisation item of the
    same field, incorrect when only its descriptor matches, superfluous when
    nothing in the formalisation relates to it.  Completeness requires every
    formalisation item to be matched correct.
    """
    feedback: List[ItemFeedback] = []
    matched: Dict[Tuple[str, int], bool] = {}

    def norm(t: Term) -> Term:
        try:
            return normalize(norm_rs, None, t).result
        except StepBudgetExceeded:
            return t

    for fld in MODEL_FIELDS:
        targets = [(i, norm(t)) for i, t in enumerate(formalisation.items(fld))]
        for u in user.items(fld):
            un = norm(u)
            hit = next((i for i, tn in targets
                        if (fld, i) not in matched and structural_eq(un, tn)), None)
            if hit is not None:
                matched[(fld, hit)] = True
                feedback.append(ItemFeedback(fld, u, "correct", formalisation.items(fld)[hit]))
                continue
            desc = descriptor_of(u)
            partner = next((t for t in formalisation.items(fld)
                            if desc is not None and descriptor_of(t) == desc), None)
            if partner is not None:
                feedback.append(ItemFeedback(fld, u, "incorrect", partner))
            else:
                feedback.append(ItemFeedback(fld, u, "superfluous"))
        for i, t in enumerate(formalisation.items(fld)):
            if (fld, i) not in matched:
                feedback.append(ItemFeedback(fld, None, "missing", t))

    complete = all(fb.verdict != "missing" for fb in feedback) and all(
        fb.verdict == "correct" for fb in feedback if fb.term is not None)
    return ModelFeedback(feedback, complete)


# ---------------------------------------------------------------------------
# Refinement


def match_pattern_model(pattern: Model, concrete: Model) -> Optional[Dict[str, Term]]:
    """One consistent substitution taking every pattern item to a concrete item.

    Items are matched per field, injectively, in order of appearance.
    Returns the combined substitution or None.
    """
    binding: Dict[str, Term] = {}

    def try_items(p_items: Sequence[Term], c_items: Sequence[Term], used: set) -> bool:
        if not p_items:
            return True
        p = p_items[0]
        pvars = frozenset(free_vars(p))
        for i, c in enumerate(c_items):
            if i in used:
                continue
            sigma = match(substitute(p, binding), c,
                          pvars - set(binding))
            if sigma is None:
                continue
            saved = dict(binding)
            binding.update(sigma)
            if try_items(p_items[1:], c_items, used | {i}):
                return True
            binding.clear()
            binding.update(saved)
        return False

    for fld in ("given", "find", "relate"):
        if not try_items(pattern.items(fld), concrete.items(fld), set()):
            return None
    return binding


def node_matches(kb, node: ProblemNode, instance: ProblemInstance,
                 pred_rs: RuleSet) -> bool:
    sigma = match_pattern_model(node.model, instance.formalisation)
    if sigma is None:
        return False
    for clause in node.model.where:
        inst_clause = substitute(clause, sigma)
        try:
            if eval_pred(pred_rs, inst_clause, assumptions=instance.assumptions) is not True:
                return False
        except StepBudgetExceeded:
            return False
    return True


def refine(kb, instance: ProblemInstance, root_key: Sequence[str],
           pred_ruleset: str = "eval_predicates") -> Tuple[str, ...]:
    """Descend the problem tree towards tighter pre-conditions.

    Starting at the root (which must match), repeatedly move to the leftmost
    matching child; the resulting key is the deepest node on that branch.
    """
    root_key = tuple(root_key)
    node = kb.problems.get(root_key)
    if node is None:
        raise NotFound(root_key)
    pred_rs = kb.rulesets[pred_ruleset]
    if not node_matches(kb, node, instance, pred_rs):
        raise NoMatch(root_key)
    while True:
        nxt = next((c for c in node.children
                    if node_matches(kb, c, instance, pred_rs)), None)
        if nxt is None:
            return node.key
        node = nxt


# ---------------------------------------------------------------------------
# Sub-problem graphs


@dataclass(frozen=True)
class GraphNode:
    key: str
    inputs: Tuple[str, ...]
    outputs: Tuple[str, ...]


@dataclass(frozen=True)
class GraphEdge:
    producer: str
    output: str
    consumer: str
    input: str


@dataclass
class SubProblemGraph:
    nodes: List[GraphNode]
    edges: List[GraphEdge]


@dataclass
class GraphResult:
    ok: bool
    order: List[str]
    violations: List[str]


def validate_graph(g: SubProblemGraph, root_given: Sequence[str] = ()) -> GraphResult:
    """Check acyclicity and full input coverage; return a topological order.

    Every input of every node must be fed either by exactly one edge or by an
    item of the root instance's Given.
    """
    violations: List[str] = []
    by_key = {n.key: n for n in g.nodes}
    given = set(root_given)

    for e in g.edges:
        if e.producer not in by_key or e.consumer not in by_key:
            violations.append(f"UnknownNode({e.producer if e.producer not in by_key else e.consumer})")
            continue
        if e.output not in by_key[e.producer].outputs:
            violations.append(f"UnknownOutput({e.producer},{e.output})")
        if e.input not in by_key[e.consumer].inputs:
            violations.append(f"UnknownInput({e.consumer},{e.input})")

    producers: Dict[Tuple[str, str], List[GraphEdge]] = {}
    for e in g.edges:
        producers.setdefault((e.consumer, e.input), []).append(e)
    # the node list is the proposed sequencing: an input whose producer runs
    # later is not available when the consumer starts
    pos = {n.key: i for i, n in enumerate(g.nodes)}
    for e in g.edges:
        if e.producer in pos and e.consumer in pos and pos[e.producer] >= pos[e.consumer]:
            violations.append(f"UnfedInput({e.consumer},{e.input})")
    for n in g.nodes:
        for inp in n.inputs:
            feeds = producers.get((n.key, inp), [])
            if len(feeds) > 1:
                violations.append(f"MultiplyFed({n.key},{inp})")
            elif not feeds and inp not in given:
                violations.append(f"UnfedInput({n.key},{inp})")

    # Kahn's algorithm over node dependencies, leftmost-first tie-break.
    deps: Dict[str, set] = {n.key: set() for n in g.nodes}
    for e in g.edges:
        if e.producer in deps and e.consumer in deps:
            deps[e.consumer].add(e.producer)
    order: List[str] = []
    remaining = [n.key for n in g.nodes]
    while remaining:
        ready = [k for k in remaining if deps[k] <= set(order)]
        if not ready:
            violations.append(f"Cycle({sorted(remaining)})")
            break
        order.append(ready[0])
        remaining.remove(ready[0])

    return GraphResult(not violations, order if not violations else [], violations)


# ---------------------------------------------------------------------------
# Post-condition checking


def _closed_forms(kb, solution: Sequence[Term], diff_rs: RuleSet,
                  norm_rs: RuleSet) -> Dict[str, Tuple[str, Term]]:
    """Map function name -> (argument variable, closed-form body).

    Seeded from solution equations `F v = body`; extended on demand from
    theory definitions (`M_b x = ...`, `Q x = ...`) by unfolding known
    functions and discharging derivatives with the differentiation rule set.
    """
    closed: Dict[str, Tuple[str, Term]] = {}
    for eq in solution:
        if (isinstance(eq, App) and isinstance(eq.head, Const) and eq.head.name == "="
                and isinstance(eq.args[0], App) and len(eq.args[0].args) == 1
                and isinstance(eq.args[0].args[0], Var)):
            head = eq.args[0].head
            if isinstance(head, (Const, Var)):
                closed[head.name] = (eq.args[0].args[0].name, eq.args[1])

    def expand(t: Term) -> Term:
        if isinstance(t, App):
            head = expand(t.head)
            args = [expand(a) for a in t.args]
            if (isinstance(head, Const) and head.name == DERIV and len(args) == 2
                    and isinstance(args[0], Var)):
                inner = args[1]
                deriv = App(head, (args[0], inner))
                return normalize(diff_rs, {"bdv": args[0].name}, deriv).result
            if isinstance(head, (Const, Var)) and len(args) == 1:
                got = resolve(head.name)
                if got is not None:
                    v, body = got
                    return substitute(body, {v: args[0]})
            return App(head, tuple(args))
        return t

    def resolve(name: str) -> Optional[Tuple[str, Term]]:
        if name in closed:
            return closed[name]
        defn = kb.definitions.get(name)
        if defn is None or defn.formal is None:
            return None
        eq = defn.formal
        if not (isinstance(eq, App) and isinstance(eq.head, Const) and eq.head.name == "="
                and isinstance(eq.args[0], App) and len(eq.args[0].args) == 1
                and isinstance(eq.args[0].args[0], Var)):
            return None
        v = eq.args[0].args[0].name
        body = expand(eq.args[1])
        if any(isinstance(s, App) and isinstance(s.head, Const) and s.head.name == DERIV
               for _, s in _subterms(body)):
            return None  # some derivative could not be discharged
        closed[name] = (v, normalize(norm_rs, None, body).result)
        return closed[name]

    # expose both seeding and lazy resolution to the caller
    closed["__resolve__"] = resolve  # type: ignore[assignment]
    return closed


def _subterms(t: Term, path=()):
    yield path, t
    if isinstance(t, App):
        for i, a in enumerate(t.args, start=1):
            yield from _subterms(a, path + (i,))


def check_postcondition(kb, instance: ProblemInstance, solution: Sequence[Term],
                        norm_ruleset: str = "norm_poly",
                        diff_ruleset: str = "diff_rules") -> Optional[bool]:
    """Substitute the solution into every Relate item and evaluate it.

    Returns True / False / None (unknown).  Function symbols in the
    conditions are resolved to closed forms, using the solution bindings and
    the theory's definitions (derivatives discharged by rewriting).
    """
    norm_rs = kb.rulesets[norm_ruleset]
    diff_rs = kb.rulesets[diff_ruleset]
    closed = _closed_forms(kb, solution, diff_rs, norm_rs)
    resolve = closed.pop("__resolve__")

    def value_of(t: Term) -> Optional[Term]:
        if isinstance(t, App) and isinstance(t.head, (Const, Var)) and len(t.args) == 1:
            got = resolve(t.head.name)
            if got is not None:
                v, body = got
                return substitute(body, {v: t.args[0]})
        if (isinstance(t, App) and isinstance(t.head, Const) and t.head.name == DERIV
                and len(t.args) == 2 and isinstance(t.args[0], Var)
                and isinstance(t.args[1], App) and len(t.args[1].args) == 1):
            inner = t.args[1]
            if isinstance(inner.head, (Const, Var)):
                got = resolve(inner.head.name)
                if got is not None:
                    v, body = got
                    deriv = App(t.head, (Var(v), body))
                    dbody = normalize(diff_rs, {"bdv": v}, deriv).result
                    return substitute(dbody, {v: inner.args[0]})
        return t

    def eval_condition(cond: Term) -> Optional[bool]:
        if not (isinstance(cond, App) and isinstance(cond.head, Const)
                and cond.head.name == "=" and len(cond.args) == 2):
            res = eval_pred(norm_rs, cond, assumptions=instance.assumptions)
            return res
        sides = []
        for side in cond.args:
            val = value_of(side)
            if val is None:
                return None
            try:
                sides.append(normalize(norm_rs, None, val,
                                       assumptions=instance.assumptions).result)
            except StepBudgetExceeded:
                return None
        return structural_eq(sides[0], sides[1])

    verdicts: List[Optional[bool]] = []
    for item in instance.formalisation.relate:
        conds: List[Term]
        if (isinstance(item, App) and descriptor_of(item) is not None
                and len(item.args) == 1 and isinstance(item.args[0], App)
                and isinstance(item.args[0].head, Const)
                and item.args[0].head.name == LIST_CONS):
            conds = list(item.args[0].args)
        else:
            conds = [item]
        for cond in conds:
            try:
                verdicts.append(eval_condition(cond))
            except StepBudgetExceeded:
                verdicts.append(None)
    if any(v is False for v in verdicts):
        return False
    if all(v is True for v in verdicts):
        return True
    return None


# ---------------------------------------------------------------------------
# Loading helpers (used by the knowledge module)


def model_from_strings(raw: Mapping[str, Sequence[str]], sig: SignatureTable,
                       parse_fn) -> Model:
    m = Model()
    for fld in MODEL_FIELDS:
        for s in raw.get(fld, []):
            m.items(fld).append(parse_fn(s, sig))
    return m


def model_to_strings(m: Model, sig: SignatureTable) -> Dict[str, List[str]]:
    return {fld: [render(t, sig) for t in m.items(fld)] for fld in MODEL_FIELDS}
