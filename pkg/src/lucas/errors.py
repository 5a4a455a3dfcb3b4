"""Exception types shared across the engine."""

from __future__ import annotations


class LucasError(Exception):
    """Base class for all engine errors."""


class TermSyntaxError(LucasError):
    def __init__(self, position: int, expected: str):
        self.position = position
        self.expected = expected
        super().__init__(f"syntax error at {position}: expected {expected}")


class UnknownSymbol(LucasError):
    def __init__(self, name: str, position: int):
        self.name = name
        self.position = position
        super().__init__(f"unknown symbol {name!r} at {position}")


class TermTypeError(LucasError):
    def __init__(self, where, expected, found):
        self.where = where  # position or path, depending on caller
        self.expected = expected
        self.found = found
        super().__init__(f"type error at {where}: expected {expected}, found {found}")


class InvalidPath(LucasError):
    def __init__(self, path, term=None):
        self.path = path
        super().__init__(f"invalid path {path}")


class NotApplicable(LucasError):
    """A rule or tactic does not apply; `reason` is 'no-match' or 'condition-failed'."""

    def __init__(self, reason: str, detail=None):
        self.reason = reason
        self.detail = detail
        super().__init__(f"not applicable: {reason}" + (f" ({detail})" if detail else ""))


class StepBudgetExceeded(LucasError):
    def __init__(self, max_steps: int, last_term=None):
        self.max_steps = max_steps
        self.last_term = last_term
        super().__init__(f"rewrite step budget {max_steps} exceeded")


class NotFound(LucasError):
    def __init__(self, key):
        self.key = key
        super().__init__(f"not found: {key}")


class DanglingReference(LucasError):
    def __init__(self, kind: str, key):
        self.kind = kind
        self.key = key
        super().__init__(f"dangling {kind} reference: {key}")


class CyclicImports(LucasError):
    def __init__(self, names):
        self.names = list(names)
        super().__init__(f"cyclic theory imports: {self.names}")


class KBParseError(LucasError):
    def __init__(self, file, detail):
        self.file = file
        self.detail = detail
        super().__init__(f"{file}: {detail}")


class ArityMismatch(LucasError):
    def __init__(self, what, expected: int, found: int):
        self.what = what
        self.expected = expected
        self.found = found
        super().__init__(f"{what}: expected {expected} argument(s), found {found}")


class Unsolvable(LucasError):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(f"unsolvable system: {reason}")


class NotLinear(LucasError):
    def __init__(self, term):
        self.term = term
        super().__init__("equation is not linear in the unknowns")


class GuardFailed(LucasError):
    def __init__(self, key, clause=None):
        self.key = key
        self.clause = clause
        super().__init__(f"guard failed for {key}" + (f": {clause}" if clause else ""))


class AtEnd(LucasError):
    def __init__(self):
        super().__init__("calculation is complete; no further step")


class PhaseError(LucasError):
    def __init__(self, expected: str, found: str):
        self.expected = expected
        self.found = found
        super().__init__(f"operation requires phase {expected!r}, session is in {found!r}")


class NoMatch(LucasError):
    def __init__(self, key):
        self.key = key
        super().__init__(f"no specification matches under {key}")
