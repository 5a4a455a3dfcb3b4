"""Dialogue policy: a small user model plus declarative first-match rules.

The engine only keeps counters and applies the configured rules; it does not
try to guess what a student needs.  Rules live in ``dialog_rules.json`` next
to the knowledge base and are ordered: the first rule whose ``when`` clause
matches the current request decides the action.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

MODES = ("exercise", "explore", "exam")

GRANT = {"kind": "grant"}


@dataclass
class UserModel:
    mode: str = "exercise"
    attempts: Dict[Tuple[str, ...], int] = field(default_factory=dict)
    completions: Dict[Tuple[str, ...], int] = field(default_factory=dict)
    next_step_requests: Dict[Tuple[str, ...], int] = field(default_factory=dict)
    rejected_inputs: Dict[Tuple[str, ...], int] = field(default_factory=dict)
    ruleset_successes: Dict[str, int] = field(default_factory=dict)
    black_boxed: Set[Tuple[str, ...]] = field(default_factory=set)
    # consecutive help requests on the problem key last asked about
    consecutive_help: int = 0
    last_help_key: Optional[Tuple[str, ...]] = None


@dataclass(frozen=True)
class DialogRule:
    id: str
    when: dict
    action: dict


def load_rules(raw) -> List[DialogRule]:
    """Accepts either a bare list or an object with a ``rules`` list."""
    if isinstance(raw, dict):
        raw = raw.get("rules", [])
    return [DialogRule(r.get("id", f"rule{i}"), dict(r.get("when", {})),
                       dict(r.get("action", {"kind": "grant"})))
            for i, r in enumerate(raw)]


DEFAULT_RULES = load_rules([
    {"id": "blackbox", "when": {"request": "next_step", "blackboxed": True},
     "action": {"kind": "auto_blackbox"}},
    {"id": "too_many_hints",
     "when": {"mode": "exercise", "request": "next_step", "min_consecutive_help": 3},
     "action": {"kind": "counter_request", "demand": "input_term"}},
    {"id": "default", "when": {}, "action": {"kind": "grant"}},
])


def _bump(counter: Dict[Tuple[str, ...], int], key: Tuple[str, ...]):
    counter[key] = counter.get(key, 0) + 1


def _matches(rule: DialogRule, um: UserModel, request: dict) -> bool:
    w = rule.when
    if "mode" in w and w["mode"] != um.mode:
        return False
    if "request" in w and w["request"] != request.get("kind"):
        return False
    if "phase" in w and w["phase"] != request.get("phase"):
        return False
    key = tuple(request.get("problem_key") or ())
    if "min_consecutive_help" in w:
        count = um.consecutive_help if um.last_help_key == key else 0
        if count < w["min_consecutive_help"]:
            return False
    if "blackboxed" in w:
        target = tuple(request.get("target_key") or request.get("problem_key") or ())
        boxed = target in um.black_boxed and not request.get("is_root", False)
        if boxed != bool(w["blackboxed"]):
            return False
    return True


def decide(rules: Sequence[DialogRule], um: UserModel, request: dict) -> dict:
    """First-match action for a request.

    A request is a dict with ``kind`` (next_step | input_term | input_tactic),
    ``problem_key``, ``phase`` and ``is_root``.  Falls back to grant when no
    rule matches, so an empty rule list never blocks the student.
    """
    for rule in rules:
        if _matches(rule, um, request):
            return dict(rule.action)
    return dict(GRANT)


def update(um: UserModel, event: dict) -> UserModel:
    """Adjust counters for a session event; returns um for chaining."""
    kind = event.get("kind")
    key = tuple(event.get("problem_key") or ())
    if kind == "help_requested":
        _bump(um.next_step_requests, key)
        if um.last_help_key == key:
            um.consecutive_help += 1
        else:
            um.last_help_key = key
            um.consecutive_help = 1
    elif kind == "step_accepted":
        _bump(um.attempts, key)
        um.consecutive_help = 0
        ruleset = event.get("ruleset")
        if ruleset:
            um.ruleset_successes[ruleset] = um.ruleset_successes.get(ruleset, 0) + 1
    elif kind == "step_rejected":
        _bump(um.attempts, key)
        _bump(um.rejected_inputs, key)
    elif kind == "problem_completed":
        _bump(um.completions, key)
        um.consecutive_help = 0
    return um


def user_model_to_json(um: UserModel) -> dict:
    return {
        "mode": um.mode,
        "attempts": {"/".join(k): v for k, v in sorted(um.attempts.items())},
        "completions": {"/".join(k): v for k, v in sorted(um.completions.items())},
        "next_step_requests": {"/".join(k): v for k, v in sorted(um.next_step_requests.items())},
        "rejected_inputs": {"/".join(k): v for k, v in sorted(um.rejected_inputs.items())},
        "ruleset_successes": dict(sorted(um.ruleset_successes.items())),
        "black_boxed": sorted("/".join(k) for k in um.black_boxed),
        "consecutive_help": um.consecutive_help,
        "last_help_key": "/".join(um.last_help_key) if um.last_help_key else None,
    }


def user_model_from_json(data: dict) -> UserModel:
    split = lambda s: tuple(s.split("/")) if s else ()
    return UserModel(
        mode=data.get("mode", "exercise"),
        attempts={split(k): v for k, v in data.get("attempts", {}).items()},
        completions={split(k): v for k, v in data.get("completions", {}).items()},
        next_step_requests={split(k): v for k, v in data.get("next_step_requests", {}).items()},
        rejected_inputs={split(k): v for k, v in data.get("rejected_inputs", {}).items()},
        ruleset_successes=dict(data.get("ruleset_successes", {})),
        black_boxed={split(k) for k in data.get("black_boxed", [])},
        consecutive_help=data.get("consecutive_help", 0),
        last_help_key=split(data["last_help_key"]) if data.get("last_help_key") else None,
    )
