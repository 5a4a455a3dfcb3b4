"""Stepping tactic programs: calculation trees, next-step proposals,
input checking with hidden derivations, replay.

A Session owns one calculation.  It moves through the phases model ->
specify -> solve -> done; during solve it executes the method's program one
instruction at a time.  Sub-problems run to completion when encountered and
appear as nested blocks, mirroring the indentation of a worked calculation.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

from . import program as prog_mod
from .elementary import ELEMENTARY
from .errors import (
    AtEnd,
    GuardFailed,
    LucasError,
    NotApplicable,
    NotFound,
    PhaseError,
    StepBudgetExceeded,
)
from .knowledge import KnowledgeBase, Method
from .rewrite import (
    HOOK_RULE_PREFIX,
    HOOKS,
    RuleSet,
    normalize,
    rewrite_at,
    structural_eq,
    detect_error_pattern,
)
from .specification import (
    Model,
    ProblemInstance,
    check_postcondition,
    match_model,
    model_from_strings,
    model_to_strings,
)
from .terms import (
    App,
    Const,
    Term,
    Var,
    is_list,
    parse,
    render,
    substitute,
)

LOOKAHEAD = 5

# rule set used to evaluate tactic arguments such as `last(funs)`
_ARG_EVAL = RuleSet("tactic-args", [], hooks=("list",), max_steps=200)


@dataclass
class Step:
    id: int
    term: Term
    tactic: dict
    detail: List["CalcItem"] = field(default_factory=list)


@dataclass
class ProblemBlock:
    id: int
    theory: str
    problem_key: Tuple[str, ...]
    method_key: Tuple[str, ...]
    statement: str = ""
    model: Optional[Model] = None
    env_args: Dict[str, Term] = field(default_factory=dict)
    items: List["CalcItem"] = field(default_factory=list)
    result: Optional[Term] = None
    postcond: Optional[bool] = None


CalcItem = Union[Step, ProblemBlock]


@dataclass
class Frame:
    method: Method
    instrs: List
    pc: int
    env: Dict[str, Term]
    current: Optional[Term]
    block: ProblemBlock


@dataclass
class StepProposal:
    tactic: dict
    item: CalcItem
    done: bool


@dataclass
class CheckResult:
    accepted: bool
    item: Optional[CalcItem] = None
    reason: str = ""
    error_pattern: Optional[dict] = None
    done: bool = False


# ---------------------------------------------------------------------------
# Program linearization


def compile_body(e) -> List:
    """Flatten a program body into (kind, ...) instructions in
    evaluation order."""
    if isinstance(e, prog_mod.Let):
        if not isinstance(e.bound, prog_mod.SubProblemExpr):
            raise LucasError("let may only bind a SubProblem result")
        return [("bind", e.name, e.bound)] + compile_body(e.body)
    if isinstance(e, prog_mod.Seq):
        return compile_body(e.left) + compile_body(e.right)
    if isinstance(e, prog_mod.TacticApp):
        return [("tactic", e.tactic)]
    if isinstance(e, prog_mod.SubProblemExpr):
        return [("bind", None, e)]
    if isinstance(e, prog_mod.Ref):
        return [("ref", e.name)]
    raise LucasError(f"cannot compile {e!r}")


# ---------------------------------------------------------------------------
# Session


class Session:
    def __init__(self, kb: KnowledgeBase, instance: ProblemInstance,
                 mode: str = "exercise", skip_specification: bool = False,
                 lookahead: int = LOOKAHEAD):
        self.kb = kb
        self.instance = instance
        self.mode = mode
        self.lookahead = lookahead
        self.phase = "model"
        self.user_model = Model()
        self.refs: Dict[str, object] = {}
        self.assumptions: List[Term] = list(instance.assumptions)
        self.root: Optional[ProblemBlock] = None
        self.frame: Optional[Frame] = None
        self._next_id = 1
        if skip_specification:
            self._auto_specify()

    # -- ids ---------------------------------------------------------------

    def _id(self, scratch: bool = False) -> int:
        if scratch:
            return -1
        nid = self._next_id
        self._next_id += 1
        return nid

    # -- phases ------------------------------------------------------------

    def add_model_item(self, fld: str, term: Term):
        if self.phase != "model":
            raise PhaseError("model", self.phase)
        self.user_model.items(fld).append(term)
        feedback = self.model_feedback()
        if feedback.complete:
            self.phase = "specify"
        return feedback

    def model_feedback(self):
        norm_rs = self.kb.rulesets["norm_model"]
        return match_model(self.instance.formalisation, self.user_model,
                           self.instance.formalisation, norm_rs)

    def set_refs(self, theory: Optional[str] = None, problem=None, method=None):
        if self.phase not in ("model", "specify"):
            raise PhaseError("specify", self.phase)
        if self.phase == "model":
            raise PhaseError("specify", self.phase)
        verdicts = {}
        for key, value in (("theory", theory), ("problem", problem), ("method", method)):
            if value is None:
                continue
            if key in ("problem", "method"):
                value = tuple(value)
            expected = self.instance.refs.get(key)
            if expected == value:
                self.refs[key] = value
                verdicts[key] = "correct"
            else:
                verdicts[key] = "incorrect"
        complete = all(k in self.refs for k in ("theory", "problem", "method"))
        if complete:
            self._enter_solve()
        return {"verdicts": verdicts, "complete": complete, "phase": self.phase}

    def _auto_specify(self):
        self.user_model = copy.deepcopy(self.instance.formalisation)
        self.refs = dict(self.instance.refs)
        self._enter_solve()

    def _enter_solve(self):
        if self.instance.refs.get("method") is None:
            raise NotFound("method")
        method_key = tuple(self.instance.refs["method"])
        method = self.kb.methods.get(method_key)
        if method is None:
            raise NotFound(method_key)
        env = dict(self.instance.args)
        guard = prog_mod.check_guard(self.kb, method_key, env,
                                     assumptions=self.assumptions)
        if guard is False:
            raise GuardFailed(method_key)
        self.root = ProblemBlock(
            self._id(),
            self.instance.refs.get("theory", ""),
            tuple(self.instance.refs["problem"]),
            method_key,
            statement=self.instance.statement,
            model=self.instance.formalisation,
            env_args=dict(env),
        )
        self.frame = self._make_frame(method, env, self.root)
        self.phase = "solve"

    def _make_frame(self, method: Method, env: Dict[str, Term],
                    block: ProblemBlock) -> Frame:
        if method.program is None:
            # an elementary method solves in one engine step
            return Frame(method, [("elementary",)], 0, env, None, block)
        prog = self.kb.programs[method.program]
        return Frame(method, compile_body(prog.body), 0, env, None, block)

    # -- rule-set helpers --------------------------------------------------

    def _check_rs(self, frame: Frame) -> RuleSet:
        name = frame.method.rulesets.get("check", frame.method.rulesets.get("norm", "norm_poly"))
        return self.kb.rulesets[name]

    def _norm(self, rs: RuleSet, t: Term) -> Term:
        return normalize(rs, None, t, assumptions=self.assumptions).result

    # -- execution ---------------------------------------------------------

    def _eval_arg(self, frame: Frame, t: Term) -> Term:
        return normalize(_ARG_EVAL, None, substitute(t, frame.env)).result

    def _run_method(self, theory: str, problem_key: Tuple[str, ...],
                    method: Method, env: Dict[str, Term], scratch: bool) -> ProblemBlock:
        block = ProblemBlock(self._id(scratch), theory, problem_key, method.key,
                             env_args=dict(env))
        if method.elementary is not None:
            fn = ELEMENTARY.get(method.elementary)
            if fn is None:
                raise NotFound(method.elementary)
            result = fn(self.kb, method, env, self.assumptions)
            block.items.append(Step(self._id(scratch), result,
                                    {"kind": "Elementary", "name": method.elementary}))
            block.result = result
        else:
            frame = self._make_frame(method, env, block)
            while True:
                try:
                    item = self._exec_instr(frame, scratch)
                except AtEnd:
                    break
                block.items.append(item)
            block.result = frame.current
        return block

    def _exec_instr(self, frame: Frame, scratch: bool = False) -> CalcItem:
        """Execute the instruction at the frame position; returns the produced
        calculation item without appending it anywhere."""
        if frame.pc >= len(frame.instrs):
            raise AtEnd()
        instr = frame.instrs[frame.pc]
        kind = instr[0]
        if kind == "ref":
            name = instr[1]
            frame.current = frame.env[name]
            frame.pc += 1
            raise AtEnd()
        if kind == "elementary":
            fn = ELEMENTARY.get(frame.method.elementary)
            if fn is None:
                raise NotFound(frame.method.elementary)
            result = fn(self.kb, frame.method, frame.env, self.assumptions)
            frame.current = result
            frame.pc += 1
            return Step(self._id(scratch), result,
                        {"kind": "Elementary", "name": frame.method.elementary})
        if kind == "bind":
            _, name, sp = instr
            method = self.kb.methods[tuple(sp.method_key)]
            args = [self._eval_arg(frame, a) for a in sp.args]
            env = {p.name: a for p, a in zip(method.params, args)}
            guard = prog_mod.check_guard(self.kb, method.key, env,
                                         assumptions=self.assumptions)
            if guard is False:
                raise GuardFailed(method.key)
            block = self._run_method(sp.theory, tuple(sp.problem_key), method, env, scratch)
            if name is not None:
                frame.env[name] = block.result
            frame.pc += 1
            return block
        tac = instr[1]
        term, tacdict, detail = self._apply_tactic(frame, tac, scratch)
        frame.current = term
        frame.pc += 1
        return Step(self._id(scratch), term, tacdict, detail)

    def _resolve_substitute(self, frame: Frame, tac: prog_mod.Substitute) -> Dict[str, Term]:
        source: Optional[Term] = None
        if tac.ref is not None:
            source = frame.env.get(tac.ref)
        else:
            # surfaced form: find a bound equation list covering the names
            for value in frame.env.values():
                if is_list(value):
                    lhs_names = {eq.args[0].name for eq in value.args
                                 if isinstance(eq, App) and isinstance(eq.args[0], Var)}
                    if set(tac.names) <= lhs_names:
                        source = value
                        break
        if source is None or not is_list(source):
            raise NotApplicable("no-match", "no equation list to substitute")
        bindings = {}
        for eq in source.args:
            if (isinstance(eq, App) and isinstance(eq.head, Const) and eq.head.name == "="
                    and isinstance(eq.args[0], Var)):
                bindings[eq.args[0].name] = eq.args[1]
        return bindings

    def _apply_tactic(self, frame: Frame, tac, scratch: bool):
        sig = self.kb.sig
        if isinstance(tac, prog_mod.Take):
            term = self._eval_arg(frame, tac.term)
            return term, {"kind": "Take", "term": render(term, sig)}, []
        if frame.current is None:
            raise NotApplicable("no-match", "no current term; expected Take first")
        if isinstance(tac, prog_mod.Substitute):
            bindings = self._resolve_substitute(frame, tac)
            term = substitute(frame.current, bindings)
            eqs = [f"{n} = {render(bindings[n], sig)}" for n in sorted(bindings)]
            return term, {"kind": "Substitute", "eqs": eqs}, []
        if isinstance(tac, prog_mod.Rewrite):
            rule = self.kb.rules.get(tac.rule)
            if rule is None:
                raise NotApplicable("no-match", f"unknown rule {tac.rule}")
            inst = None
            if tac.inst is not None:
                bound = frame.env.get(tac.inst[1], Var(tac.inst[1]))
                inst = {tac.inst[0]: bound.name if isinstance(bound, Var) else tac.inst[1]}
            for p in _innermost_paths(frame.current):
                try:
                    result, _ = rewrite_at(rule, inst, frame.current, p, self.assumptions)
                except NotApplicable:
                    continue
                tacdict = {"kind": "Rewrite", "rule": tac.rule, "path": list(p)}
                if inst is not None:
                    key = next(iter(inst))
                    tacdict["bdv"] = [key, inst[key]]
                return result, tacdict, []
            raise NotApplicable("no-match", f"rule {tac.rule} applies nowhere")
        if isinstance(tac, (prog_mod.RewriteSet, prog_mod.RewriteSetInst)):
            rs = self.kb.rulesets.get(tac.ruleset)
            if rs is None:
                raise NotApplicable("no-match", f"unknown ruleset {tac.ruleset}")
            inst = None
            tacdict = {"kind": "Rewrite_Set", "ruleset": tac.ruleset}
            if isinstance(tac, prog_mod.RewriteSetInst):
                bound = frame.env.get(tac.inst[1], Var(tac.inst[1]))
                if not isinstance(bound, Var):
                    raise NotApplicable("no-match", "bdv must instantiate to a variable")
                inst = {tac.inst[0]: bound.name}
                tacdict = {"kind": "Rewrite_Set_Inst", "ruleset": tac.ruleset,
                           "bdv": [tac.inst[0], bound.name]}
            res = normalize(rs, inst, frame.current, assumptions=self.assumptions)
            detail = [Step(self._id(scratch), e.after,
                           {"kind": "Rewrite", "rule": e.rule, "path": list(e.path)})
                      for e in res.trace]
            return res.result, tacdict, detail
        raise NotApplicable("no-match", f"unsupported tactic {tac!r}")

    # -- public stepping ---------------------------------------------------

    def next_step(self) -> StepProposal:
        if self.phase != "solve":
            raise PhaseError("solve", self.phase)
        item = self._exec_instr(self.frame)
        self.frame.block.items.append(item)
        done = self._maybe_finish()
        tactic = item.tactic if isinstance(item, Step) else {
            "kind": "SubProblem",
            "problem": list(item.problem_key),
            "method": list(item.method_key),
        }
        return StepProposal(tactic, item, done)

    def _maybe_finish(self) -> bool:
        if self.frame.pc < len(self.frame.instrs):
            return False
        self.root.result = self.frame.current
        solution = list(self.root.result.args) if is_list(self.root.result) \
            else [self.root.result]
        try:
            self.root.postcond = check_postcondition(
                self.kb, self.instance, solution,
                norm_ruleset=self.frame.method.rulesets.get("norm", "norm_poly"))
        except LucasError:
            self.root.postcond = None
        self.phase = "done"
        return True

    def auto_solve(self) -> ProblemBlock:
        if self.phase in ("model", "specify"):
            self._auto_specify()
        while self.phase == "solve":
            self.next_step()
        return self.root

    # -- input checking ----------------------------------------------------

    def _clone_frame(self) -> Frame:
        f = self.frame
        return Frame(f.method, f.instrs, f.pc, dict(f.env), f.current,
                     ProblemBlock(-1, "", f.block.problem_key, f.block.method_key))

    def check_input_term(self, t: Term) -> CheckResult:
        if self.phase != "solve":
            raise PhaseError("solve", self.phase)
        frame = self.frame
        check_rs = self._check_rs(frame)
        try:
            tnorm = self._norm(check_rs, t)
        except StepBudgetExceeded:
            return CheckResult(False, reason="input too large to check")

        # (b) equal to the current term up to the checking rule set
        if frame.current is not None:
            try:
                if structural_eq(tnorm, self._norm(check_rs, frame.current)) \
                        and not structural_eq(t, frame.current):
                    step = Step(self._id(), t, {"kind": "Derived", "steps": 0})
                    frame.block.items.append(step)
                    return CheckResult(True, step, done=self._maybe_finish())
            except StepBudgetExceeded:
                pass

        # (a) equal to the program's own state k steps ahead
        clone = self._clone_frame()
        for k in range(1, self.lookahead + 1):
            try:
                item = self._exec_instr(clone, scratch=True)
            except AtEnd:
                break
            except (NotApplicable, GuardFailed, StepBudgetExceeded):
                break
            if clone.current is None:
                continue
            try:
                if not structural_eq(tnorm, self._norm(check_rs, clone.current)):
                    continue
            except StepBudgetExceeded:
                continue
            # accept: materialize the k engine steps, hide them as detail
            produced = [self._exec_instr(self.frame) for _ in range(k)]
            if k == 1 and isinstance(produced[0], Step):
                inner = produced[0]
                step = Step(inner.id, t, inner.tactic, inner.detail)
            else:
                step = Step(self._id(), t, {"kind": "Derived", "steps": k},
                            detail=produced)
            self.frame.block.items.append(step)
            return CheckResult(True, step, done=self._maybe_finish())

        ep = None
        if frame.current is not None:
            found = detect_error_pattern(self.kb.error_patterns, frame.current, t,
                                         check_rs)
            if found is not None:
                ep = {"id": found.id, "feedback": found.feedback}
        return CheckResult(False, reason="not derivable from the current step",
                           error_pattern=ep)

    def _tactic_matches(self, frame: Frame, engine_tac, user_tac) -> bool:
        if type(engine_tac) is not type(user_tac):
            return False
        if isinstance(engine_tac, prog_mod.Take):
            check_rs = self._check_rs(frame)
            try:
                a = self._norm(check_rs, self._eval_arg(frame, engine_tac.term))
                b = self._norm(check_rs, self._eval_arg(frame, user_tac.term))
            except (StepBudgetExceeded, KeyError):
                return False
            return structural_eq(a, b)
        if isinstance(engine_tac, prog_mod.Substitute):
            try:
                a = self._resolve_substitute(frame, engine_tac)
                b = self._resolve_substitute(frame, user_tac)
            except NotApplicable:
                return False
            return set(a) == set(b)
        if isinstance(engine_tac, prog_mod.Rewrite):
            return engine_tac.rule == user_tac.rule
        if isinstance(engine_tac, (prog_mod.RewriteSet, prog_mod.RewriteSetInst)):
            return engine_tac.ruleset == user_tac.ruleset
        return False

    def check_input_tactic(self, tac) -> CheckResult:
        if self.phase != "solve":
            raise PhaseError("solve", self.phase)
        if isinstance(tac, (prog_mod.RewriteSet, prog_mod.RewriteSetInst)) \
                and tac.ruleset not in self.kb.rulesets:
            raise NotApplicable("no-match", f"unknown ruleset {tac.ruleset}")
        if isinstance(tac, prog_mod.Rewrite) and tac.rule not in self.kb.rules:
            raise NotApplicable("no-match", f"unknown rule {tac.rule}")

        clone = self._clone_frame()
        for j in range(self.lookahead):
            pc = clone.pc
            if pc >= len(clone.instrs):
                break
            instr = clone.instrs[pc]
            if instr[0] == "tactic" and self._tactic_matches(clone, instr[1], tac):
                produced = [self._exec_instr(self.frame) for _ in range(j + 1)]
                if j == 0:
                    step = produced[0]
                else:
                    step = Step(self._id(), produced[-1].term,
                                produced[-1].tactic, detail=produced[:-1] + produced[-1].detail)
                self.frame.block.items.append(step)
                return CheckResult(True, step, done=self._maybe_finish())
            try:
                self._exec_instr(clone, scratch=True)
            except (AtEnd, NotApplicable, GuardFailed, StepBudgetExceeded):
                break
        return CheckResult(False, reason="tactic not found within the lookahead window")


def _innermost_paths(t: Term):
    """All paths, innermost (deepest, leftmost) first."""
    def go(node, path):
        if isinstance(node, App):
            for i, a in enumerate(node.args, start=1):
                yield from go(a, path + (i,))
        yield path
    yield from go(t, ())


# ---------------------------------------------------------------------------
# Rendering the outline


def view(tree: ProblemBlock, expansion, sig) -> str:
    """Deterministic indented outline; collapsed nodes show the header only."""
    lines: List[str] = []

    def emit_block(b: ProblemBlock, depth: int):
        ind = "  " * depth
        lines.append(f"{ind}Problem: {'/'.join(b.problem_key)}  (#{b.id})")
        if b.model is not None:
            for fld, items in model_to_strings(b.model, sig).items():
                for s in items:
                    lines.append(f"{ind}  {fld.capitalize()}: {s}")
        if b.id in expansion:
            for item in b.items:
                emit_item(item, depth + 1)
            if b.result is not None:
                lines.append(f"{ind}  Result: {render(b.result, sig)}")

    def emit_item(item: CalcItem, depth: int):
        if isinstance(item, ProblemBlock):
            emit_block(item, depth)
            return
        ind = "  " * depth
        lines.append(f"{ind}{render(item.term, sig)}  "
                     f"[{item.tactic.get('kind', '?')}]  (#{item.id})")
        if item.id in expansion:
            for d in item.detail:
                emit_item(d, depth + 1)

    emit_block(tree, 0)
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Serialization


def item_to_json(item: CalcItem, sig) -> dict:
    if isinstance(item, ProblemBlock):
        return {
            "kind": "problem",
            "id": item.id,
            "theory": item.theory,
            "problem": list(item.problem_key),
            "method": list(item.method_key),
            "statement": item.statement,
            "model": model_to_strings(item.model, sig) if item.model is not None else None,
            "env_args": {k: render(v, sig) for k, v in sorted(item.env_args.items())},
            "items": [item_to_json(i, sig) for i in item.items],
            "result": render(item.result, sig) if item.result is not None else None,
            "postcond": item.postcond,
        }
    return {
        "kind": "step",
        "id": item.id,
        "term": render(item.term, sig),
        "tactic": item.tactic,
        "detail": [item_to_json(d, sig) for d in item.detail],
    }


def tree_to_json_str(tree: ProblemBlock, sig) -> str:
    return json.dumps(item_to_json(tree, sig), sort_keys=True, indent=1) + "\n"


def item_from_json(data: dict, sig) -> CalcItem:
    if data["kind"] == "problem":
        return ProblemBlock(
            data["id"], data["theory"], tuple(data["problem"]), tuple(data["method"]),
            statement=data.get("statement", ""),
            model=(model_from_strings(data["model"], sig, lambda s, sg: parse(s, sg))
                   if data.get("model") is not None else None),
            env_args={k: parse(v, sig) for k, v in data.get("env_args", {}).items()},
            items=[item_from_json(i, sig) for i in data["items"]],
            result=parse(data["result"], sig) if data.get("result") else None,
            postcond=data.get("postcond"),
        )
    return Step(
        data["id"], parse(data["term"], sig), data["tactic"],
        [item_from_json(d, sig) for d in data.get("detail", [])],
    )


# ---------------------------------------------------------------------------
# Replay verification


def replay_calc(kb: KnowledgeBase, tree: ProblemBlock,
                assumptions: Sequence[Term] = ()) -> List[str]:
    """Re-derive every step from its predecessor; returns divergences."""
    divergences: List[str] = []
    sig = kb.sig

    def norm(rs_name: str, t: Term) -> Term:
        return normalize(kb.rulesets[rs_name], None, t, assumptions=assumptions).result

    def check_step(step: Step, current: Optional[Term], method: Optional[Method]) -> Optional[Term]:
        tac = step.tactic
        kind = tac.get("kind")
        if kind == "Take":
            expected = parse(tac["term"], sig)
            if not structural_eq(expected, step.term):
                divergences.append(f"step #{step.id}: Take term differs")
            return step.term
        if kind == "Elementary":
            return step.term  # verified at block level via the method rerun
        if current is None:
            divergences.append(f"step #{step.id}: no predecessor term")
            return step.term
        if kind == "Substitute":
            bindings = {}
            for eq_s in tac.get("eqs", []):
                eq = parse(eq_s, sig)
                if isinstance(eq, App) and isinstance(eq.args[0], Var):
                    bindings[eq.args[0].name] = eq.args[1]
            result = substitute(current, bindings)
            if not structural_eq(result, step.term):
                divergences.append(f"step #{step.id}: Substitute result differs")
            return step.term
        if kind in ("Rewrite_Set", "Rewrite_Set_Inst"):
            rs = kb.rulesets.get(tac["ruleset"])
            if rs is None:
                divergences.append(f"step #{step.id}: unknown ruleset {tac['ruleset']}")
                return step.term
            inst = None
            if "bdv" in tac:
                inst = {tac["bdv"][0]: tac["bdv"][1]}
            try:
                result = normalize(rs, inst, current, assumptions=assumptions).result
            except StepBudgetExceeded:
                divergences.append(f"step #{step.id}: rewrite budget exceeded")
                return step.term
            if not structural_eq(result, step.term):
                divergences.append(f"step #{step.id}: Rewrite_Set result differs")
            _check_rewrite_detail(step, current, inst)
            return step.term
        if kind == "Rewrite":
            rule = kb.rules.get(tac["rule"])
            if rule is None:
                divergences.append(f"step #{step.id}: unknown rule {tac['rule']}")
                return step.term
            inst = None
            if "bdv" in tac:
                inst = {tac["bdv"][0]: tac["bdv"][1]}
            try:
                result, _ = rewrite_at(rule, inst, current, tuple(tac.get("path", ())),
                                       assumptions)
            except LucasError as e:
                divergences.append(f"step #{step.id}: {e}")
                return step.term
            if not structural_eq(result, step.term):
                divergences.append(f"step #{step.id}: Rewrite result differs")
            return step.term
        if kind == "Derived":
            inner: Optional[Term] = current
            for d in step.detail:
                inner = walk_item(d, inner, method)
            rs_name = (method.rulesets.get("check", method.rulesets.get("norm", "norm_poly"))
                       if method else "norm_poly")
            try:
                if inner is not None and not structural_eq(norm(rs_name, inner),
                                                           norm(rs_name, step.term)):
                    divergences.append(f"step #{step.id}: derived term does not normalize equal")
            except StepBudgetExceeded:
                divergences.append(f"step #{step.id}: derived check budget exceeded")
            return step.term
        divergences.append(f"step #{step.id}: unknown tactic kind {kind!r}")
        return step.term

    def _check_rewrite_detail(step: Step, start: Term, inst=None):
        cur = start
        for d in step.detail:
            if not isinstance(d, Step) or d.tactic.get("kind") != "Rewrite":
                return
            rule_name = d.tactic["rule"]
            path = tuple(d.tactic.get("path", ()))
            if rule_name.startswith(HOOK_RULE_PREFIX):
                hook = HOOKS.get(rule_name[len(HOOK_RULE_PREFIX):])
                if hook is None:
                    divergences.append(f"detail #{d.id}: unknown hook {rule_name}")
                    return
                from .terms import replace_at, subterm_at
                new = hook(subterm_at(cur, path))
                if new is None:
                    divergences.append(f"detail #{d.id}: hook does not apply")
                    return
                cur = replace_at(cur, path, new)
            else:
                rule = kb.rules.get(rule_name)
                if rule is None:
                    divergences.append(f"detail #{d.id}: unknown rule {rule_name}")
                    return
                try:
                    cur, _ = rewrite_at(rule, inst, cur, path, assumptions)
                except LucasError as e:
                    divergences.append(f"detail #{d.id}: {e}")
                    return
            if not structural_eq(cur, d.term):
                divergences.append(f"detail #{d.id}: trace step diverges")
                return

    def walk_item(item: CalcItem, current: Optional[Term],
                  method: Optional[Method]) -> Optional[Term]:
        if isinstance(item, ProblemBlock):
            check_block(item)
            return current
        return check_step(item, current, method)

    def check_block(block: ProblemBlock):
        method = kb.methods.get(block.method_key)
        if method is None:
            divergences.append(f"block #{block.id}: unknown method {block.method_key}")
            return
        if method.elementary is not None:
            fn = ELEMENTARY.get(method.elementary)
            if fn is None:
                divergences.append(f"block #{block.id}: unknown elementary {method.elementary}")
                return
            try:
                result = fn(kb, method, block.env_args, assumptions)
            except LucasError as e:
                divergences.append(f"block #{block.id}: {e}")
                return
            if block.result is None or not structural_eq(result, block.result):
                divergences.append(f"block #{block.id}: elementary result differs")
            return
        current: Optional[Term] = None
        for item in block.items:
            current = walk_item(item, current, method)
        if block.result is not None and current is not None \
                and not structural_eq(block.result, current):
            divergences.append(f"block #{block.id}: recorded result differs from replay")

    check_block(tree)
    return divergences
