"""Test cases, test suites, suite files and coverage reports."""

from __future__ import annotations

import json
import os
import tempfile
import warnings
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .statemodel import StateMachine

FORMAT_VERSION = 1


class SuiteFormatError(ValueError):
    pass


class DigestMismatchError(ValueError):
    pass


class DigestMismatchWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TestCase:
    id: str
    path: Tuple[str, ...]
    transition: str
    guard: str
    desired: bool
    i_in: Dict[str, Any]
    i_out: Dict[str, Any]
    f_in: float
    f_out: float
    expected_end_state: str
    covered_transitions: Tuple[str, ...]
    evaluations: int = 0

    __test__ = False  # keep pytest from collecting this class

    @property
    def predicate(self) -> Tuple[str, bool]:
        return (self.transition, self.desired)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "path": list(self.path),
            "target": {"transition": self.transition, "guard": self.guard, "desired": self.desired},
            "i_in": dict(self.i_in),
            "i_out": dict(self.i_out),
            "f_in": self.f_in,
            "f_out": self.f_out,
            "evaluations": self.evaluations,
            "expected_end_state": self.expected_end_state,
            "coverage": {
                "transitions": list(self.covered_transitions),
                "predicate": {"transition": self.transition, "outcome": self.desired},
            },
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "TestCase":
        target = d["target"]
        return cls(
            id=d["id"],
            path=tuple(d["path"]),
            transition=target["transition"],
            guard=target["guard"],
            desired=bool(target["desired"]),
            i_in=dict(d["i_in"]),
            i_out=dict(d["i_out"]),
            f_in=d["f_in"],
            f_out=d["f_out"],
            evaluations=d.get("evaluations", 0),
            expected_end_state=d["expected_end_state"],
            covered_transitions=tuple(d["coverage"]["transitions"]),
        )


@dataclass(frozen=True)
class FailedTarget:
    transition: str
    guard: str
    desired: bool
    path: Tuple[str, ...]
    reason: str
    best_f: Optional[float]
    evaluations: int
    restarts: int
    violated_step: Optional[int] = None
    violated_transition: Optional[str] = None

    @property
    def predicate(self) -> Tuple[str, bool]:
        return (self.transition, self.desired)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "transition": self.transition,
            "guard": self.guard,
            "desired": self.desired,
            "path": list(self.path),
            "reason": self.reason,
            "best_f": self.best_f,
            "evaluations": self.evaluations,
            "restarts": self.restarts,
            "most_violated": None
            if self.violated_step is None
            else {"step": self.violated_step, "transition": self.violated_transition},
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "FailedTarget":
        mv = d.get("most_violated")
        return cls(
            d["transition"],
            d["guard"],
            bool(d["desired"]),
            tuple(d["path"]),
            d["reason"],
            d["best_f"],
            d["evaluations"],
            d["restarts"],
            None if mv is None else mv["step"],
            None if mv is None else mv["transition"],
        )


@dataclass(frozen=True)
class TestSuite:
    model_name: str
    model_digest: str
    config: Dict[str, Any]
    cases: Tuple[TestCase, ...]
    failed_targets: Tuple[FailedTarget, ...] = ()
    skipped_targets: Tuple[str, ...] = ()
    reduction: Optional[Dict[str, Any]] = None

    __test__ = False

    def __post_init__(self):
        ids = [c.id for c in self.cases]
        if len(ids) != len(set(ids)):
            raise ValueError("test case ids must be unique")

    def __len__(self) -> int:
        return len(self.cases)

    def case(self, cid: str) -> TestCase:
        for c in self.cases:
            if c.id == cid:
                return c
        raise KeyError(cid)

    def with_cases(self, cases: Sequence[TestCase], **changes) -> "TestSuite":
        return replace(self, cases=tuple(cases), **changes)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format_version": FORMAT_VERSION,
            "model": {"name": self.model_name, "digest": self.model_digest},
            "config": dict(self.config),
            "cases": [c.to_dict() for c in self.cases],
            "failed_targets": [f.to_dict() for f in self.failed_targets],
            "skipped_targets": list(self.skipped_targets),
            "reduction": self.reduction,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "TestSuite":
        version = d.get("format_version")
        if version != FORMAT_VERSION:
            raise SuiteFormatError(
                f"unsupported suite format_version {version!r} (this tool reads version {FORMAT_VERSION})"
            )
        try:
            return cls(
                model_name=d["model"]["name"],
                model_digest=d["model"]["digest"],
                config=dict(d["config"]),
                cases=tuple(TestCase.from_dict(c) for c in d["cases"]),
                failed_targets=tuple(FailedTarget.from_dict(f) for f in d.get("failed_targets", [])),
                skipped_targets=tuple(d.get("skipped_targets", [])),
                reduction=d.get("reduction"),
            )
        except (KeyError, TypeError) as exc:
            raise SuiteFormatError(f"malformed suite: missing or invalid field {exc}") from None


def dumps_suite(suite: TestSuite) -> str:
    return json.dumps(suite.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def loads_suite(text: str) -> TestSuite:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SuiteFormatError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise SuiteFormatError("suite must be a JSON object")
    return TestSuite.from_dict(data)


def atomic_write_text(path, text: str) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_suite(suite: TestSuite, destination) -> None:
    atomic_write_text(destination, dumps_suite(suite))


def read_suite(source, machine: Optional[StateMachine] = None) -> TestSuite:
    """Read a suite file; warn if it was generated from a different model."""
    with open(source, "r", encoding="utf-8") as fh:
        suite = loads_suite(fh.read())
    if machine is not None and suite.model_digest != machine.digest:
        warnings.warn(
            f"{source}: suite was generated from a different model "
            f"({suite.model_digest} != {machine.digest})",
            DigestMismatchWarning,
            stacklevel=2,
        )
    return suite


def check_digest(suite: TestSuite, machine: StateMachine) -> None:
    if suite.model_digest != machine.digest:
        raise DigestMismatchError(
            f"suite digest {suite.model_digest} does not match model {machine.name!r} ({machine.digest})"
        )


# --- coverage --------------------------------------------------------------


@dataclass(frozen=True)
class CoverageReport:
    guarded_total: int
    guarded_covered: int
    pairs_total: int
    pairs_covered: int
    uncovered_transitions: Tuple[str, ...] = ()
    uncovered_pairs: Tuple[Tuple[str, bool], ...] = ()
    failed: Tuple[Tuple[str, bool], ...] = ()
    skipped: Tuple[str, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "guarded_transitions": {"total": self.guarded_total, "covered": self.guarded_covered},
            "predicate_outcomes": {"total": self.pairs_total, "covered": self.pairs_covered},
            "uncovered_transitions": list(self.uncovered_transitions),
            "uncovered_pairs": [{"transition": t, "outcome": o} for t, o in self.uncovered_pairs],
            "failed_targets": [{"transition": t, "outcome": o} for t, o in self.failed],
            "skipped_targets": list(self.skipped),
        }

    def format_text(self, title: str = "coverage") -> str:
        rows = [
            ("guarded transitions", self.guarded_covered, self.guarded_total),
            ("predicate outcomes", self.pairs_covered, self.pairs_total),
        ]
        width = max(len(r[0]) for r in rows)
        lines = [title, f"  {'category':<{width}}  covered  total"]
        for name, cov, tot in rows:
            lines.append(f"  {name:<{width}}  {cov:>7}  {tot:>5}")
        if self.uncovered_pairs:
            pairs = ", ".join(f"{t}:{str(o).lower()}" for t, o in self.uncovered_pairs)
            lines.append(f"  uncovered: {pairs}")
        if self.failed:
            pairs = ", ".join(f"{t}:{str(o).lower()}" for t, o in self.failed)
            lines.append(f"  failed: {pairs}")
        if self.skipped:
            lines.append(f"  skipped (unreachable): {', '.join(self.skipped)}")
        return "\n".join(lines)


def coverage(suite: TestSuite, machine: StateMachine) -> CoverageReport:
    check_digest(suite, machine)
    guarded = [t.id for t in machine.guarded]
    traversed = set()
    pairs = set()
    for case in suite.cases:
        traversed.update(case.covered_transitions)
        pairs.add(case.predicate)
    all_pairs = [(t, o) for t in guarded for o in (True, False)]
    uncovered_t = tuple(t for t in guarded if t not in traversed)
    uncovered_p = tuple(p for p in all_pairs if p not in pairs)
    return CoverageReport(
        guarded_total=len(guarded),
        guarded_covered=len(guarded) - len(uncovered_t),
        pairs_total=len(all_pairs),
        pairs_covered=len(all_pairs) - len(uncovered_p),
        uncovered_transitions=uncovered_t,
        uncovered_pairs=uncovered_p,
        failed=tuple(f.predicate for f in suite.failed_targets),
        skipped=tuple(suite.skipped_targets),
    )
