"""Exception types raised across the pipeline."""

from __future__ import annotations


class RustportError(Exception):
    """Base class for all pipeline errors."""


class ParseError(RustportError):
    def __init__(self, file: str, position: tuple[int, int], message: str):
        self.file = file
        self.position = position
        super().__init__(f"{file}:{position[0]}:{position[1]}: {message}")


class EmptyProject(RustportError):
    pass


class MissingDependency(RustportError):
    def __init__(self, fragment_id: str):
        self.fragment_id = fragment_id
        super().__init__(f"dependency {fragment_id} is neither translated nor mocked")


class ParseViolation(RustportError):
    """Generated target code did not parse."""


class RuleViolation(RustportError):
    def __init__(self, rule_id: str, detail: str):
        self.rule_id = rule_id
        self.detail = detail
        super().__init__(f"{rule_id}: {detail}")


class SignatureMismatch(RustportError):
    pass


class BudgetExhausted(RustportError):
    def __init__(self, fragment_id: str, violations: list):
        self.fragment_id = fragment_id
        self.violations = violations
        super().__init__(f"requery budget exhausted for {fragment_id}: {violations}")


class ProviderUnavailable(RustportError):
    pass


class ReplayExhausted(RustportError):
    pass


class ReplayMismatch(RustportError):
    def __init__(self, expected_hash: str, got_hash: str):
        self.expected_hash = expected_hash
        self.got_hash = got_hash
        super().__init__(f"replay log expects prompt {expected_hash}, got {got_hash}")


class UnsupportedConstruct(RustportError):
    pass


class IOFailure(RustportError):
    pass


class UnresolvedItem(RustportError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"referenced fragment {name} has no target code yet")


class NoMapping(RustportError):
    def __init__(self, path: str):
        self.path = path
        super().__init__(f"no target package mapping for import {path!r}")


class ToolchainMissing(RustportError):
    pass


class RepairExhausted(RustportError):
    pass


class OutOfScopeEdit(RustportError):
    """A repair attempted to modify a fragment other than the named one."""


class InstrumentationFailure(RustportError):
    def __init__(self, file: str, reason: str):
        self.file = file
        self.reason = reason
        super().__init__(f"{file}: {reason}")


class TestSuiteFailure(RustportError):
    pass


class DecodeError(RustportError):
    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        super().__init__(f"snapshot line {line_no}: {reason}")


class ProbeBuildFailure(RustportError):
    pass


class UnmarshalableSlot(RustportError):
    def __init__(self, type_text: str):
        self.type_text = type_text
        super().__init__(f"no codec for slot type {type_text!r}")


class HarnessCrash(RustportError):
    """The equivalence harness failed for a reason other than an assertion."""


class TranslationAborted(RustportError):
    def __init__(self, fragment_id: str, reason: str = ""):
        self.fragment_id = fragment_id
        super().__init__(f"translation aborted at {fragment_id}" + (f": {reason}" if reason else ""))
