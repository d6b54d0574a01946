"""Flat guarded state machines: data model, JSON loader and validation."""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

from . import guardlang as gl
from .guardlang import ActionStmt, GuardExpr, GuardSyntaxError, INTEGER, REAL

ERROR = "error"
WARNING = "warning"

_TOP_KEYS = {"name", "states", "initial", "variables", "transitions"}
_VAR_KEYS = {"name", "kind", "domain", "unit_step"}
_TRANSITION_KEYS = {"id", "source", "target", "guard", "actions", "event"}


@dataclass(frozen=True)
class Diagnostic:
    code: str
    location: str
    message: str
    severity: str = ERROR

    def __str__(self) -> str:
        return f"{self.severity}: {self.location}: [{self.code}] {self.message}"

    def as_dict(self) -> Dict[str, str]:
        return {
            "code": self.code,
            "location": self.location,
            "message": self.message,
            "severity": self.severity,
        }


class ModelError(ValueError):
    """A model document failed to load.  Carries every error diagnostic."""

    def __init__(self, diagnostics: List[Diagnostic], source: str = "<model>"):
        self.diagnostics = diagnostics
        self.source = source
        lines = "\n".join(f"{source}: {d}" for d in diagnostics)
        super().__init__(lines or f"{source}: invalid model")


@dataclass(frozen=True)
class VariableDecl:
    name: str
    kind: str
    lo: gl.Number
    hi: gl.Number
    unit_step: gl.Number = 1

    @property
    def span(self) -> gl.Number:
        return self.hi - self.lo

    def contains(self, value: gl.Number) -> bool:
        return self.lo <= value <= self.hi


@dataclass(frozen=True)
class Transition:
    id: str
    source: str
    target: str
    guard: Optional[GuardExpr] = None
    actions: Tuple[ActionStmt, ...] = ()
    event: Optional[str] = None


@dataclass(frozen=True)
class StateMachine:
    name: str
    states: Tuple[str, ...]
    initial: str
    variables: Tuple[VariableDecl, ...]
    transitions: Tuple[Transition, ...]

    def variable(self, name: str) -> VariableDecl:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def transition(self, tid: str) -> Transition:
        for t in self.transitions:
            if t.id == tid:
                return t
        raise KeyError(tid)

    def outgoing(self, state: str) -> List[Transition]:
        return [t for t in self.transitions if t.source == state]

    @property
    def kinds(self) -> Dict[str, str]:
        return {v.name: v.kind for v in self.variables}

    @property
    def guarded(self) -> List[Transition]:
        return [t for t in self.transitions if t.guard is not None]

    @property
    def digest(self) -> str:
        """SHA-256 of the canonical serialization."""
        return "sha256:" + hashlib.sha256(dump_model(self).encode("utf-8")).hexdigest()


# --- validation ------------------------------------------------------------


def _check_expr_vars(node, declared, location, out: List[Diagnostic]) -> None:
    for var in gl.iter_vars(node):
        if var.name not in declared:
            out.append(
                Diagnostic(
                    "UNDECLARED_VARIABLE",
                    f"{location}@{var.pos}" if var.pos >= 0 else location,
                    f"variable {var.name!r} is not declared",
                )
            )


def reachable_states(machine: StateMachine) -> set:
    seen = {machine.initial}
    queue = deque([machine.initial])
    while queue:
        s = queue.popleft()
        for t in machine.outgoing(s):
            if t.target not in seen:
                seen.add(t.target)
                queue.append(t.target)
    return seen


def validate(machine: StateMachine) -> List[Diagnostic]:
    """Check every structural invariant; an empty list means the model is clean."""
    out: List[Diagnostic] = []
    states = set()
    for i, s in enumerate(machine.states):
        if s in states:
            out.append(Diagnostic("DUPLICATE_STATE", f"states[{i}]", f"state {s!r} declared twice"))
        states.add(s)
    if machine.initial not in states:
        out.append(
            Diagnostic("UNKNOWN_STATE", "initial", f"initial state {machine.initial!r} is not declared")
        )

    kinds: Dict[str, str] = {}
    for i, v in enumerate(machine.variables):
        loc = f"variables[{i}]"
        if v.name in kinds:
            out.append(Diagnostic("DUPLICATE_VARIABLE", loc, f"variable {v.name!r} declared twice"))
        if v.kind not in (INTEGER, REAL):
            out.append(Diagnostic("BAD_KIND", f"{loc}.kind", f"unknown kind {v.kind!r}"))
            continue
        kinds[v.name] = v.kind
        if v.kind == INTEGER and not all(
            isinstance(x, int) and not isinstance(x, bool) for x in (v.lo, v.hi, v.unit_step)
        ):
            out.append(
                Diagnostic("KIND_MISMATCH", loc, f"integer variable {v.name!r} needs integer bounds and step")
            )
        if v.lo > v.hi:
            out.append(Diagnostic("DOMAIN_EMPTY", f"{loc}.domain", f"domain [{v.lo}, {v.hi}] is empty"))
        if not v.unit_step > 0:
            out.append(Diagnostic("BAD_STEP", f"{loc}.unit_step", "unit_step must be positive"))

    ids = set()
    for i, t in enumerate(machine.transitions):
        loc = f"transitions[{i}]"
        if t.id in ids:
            out.append(Diagnostic("DUPLICATE_ID", f"{loc}.id", f"transition id {t.id!r} used twice"))
        ids.add(t.id)
        for end in ("source", "target"):
            s = getattr(t, end)
            if s not in states:
                out.append(Diagnostic("UNKNOWN_STATE", f"{loc}.{end}", f"state {s!r} is not declared"))
        if t.guard is not None:
            _check_expr_vars(t.guard.lhs, kinds, f"{loc}.guard", out)
            _check_expr_vars(t.guard.rhs, kinds, f"{loc}.guard", out)
        for j, a in enumerate(t.actions):
            aloc = f"{loc}.actions[{j}]"
            if a.target not in kinds:
                out.append(
                    Diagnostic("UNDECLARED_VARIABLE", aloc, f"assignment to undeclared variable {a.target!r}")
                )
            before = len(out)
            _check_expr_vars(a.expr, kinds, aloc, out)
            if a.target in kinds and len(out) == before:
                if kinds[a.target] == INTEGER and gl.infer_kind(a.expr, kinds) == REAL:
                    out.append(
                        Diagnostic("TYPE_MISMATCH", aloc, f"real expression assigned to integer {a.target!r}")
                    )

    if machine.initial in states and not machine.outgoing(machine.initial):
        out.append(
            Diagnostic("NO_INITIAL_EXIT", "initial", "no transition leaves the initial state", WARNING)
        )
    if machine.initial in states:
        reach = reachable_states(machine)
        for i, s in enumerate(machine.states):
            if s not in reach:
                out.append(
                    Diagnostic("REACHABILITY", f"states[{i}]", f"state {s!r} is unreachable from {machine.initial!r}", WARNING)
                )
    return out


def errors(diagnostics: List[Diagnostic]) -> List[Diagnostic]:
    return [d for d in diagnostics if d.severity == ERROR]


# --- loading ---------------------------------------------------------------


def _is_number(x: Any) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _unknown_keys(obj: Mapping, allowed: set, loc: str, out: List[Diagnostic]) -> None:
    for key in obj:
        if key not in allowed:
            out.append(Diagnostic("UNKNOWN_KEY", f"{loc}.{key}" if loc else key, f"unknown key {key!r}"))


def _require(obj: Mapping, key: str, loc: str, out: List[Diagnostic]) -> bool:
    if key not in obj:
        out.append(Diagnostic("MISSING_KEY", f"{loc}.{key}" if loc else key, f"missing key {key!r}"))
        return False
    return True


def _parse_variable(raw: Any, loc: str, out: List[Diagnostic]) -> Optional[VariableDecl]:
    if not isinstance(raw, dict):
        out.append(Diagnostic("FORMAT", loc, "variable must be an object"))
        return None
    _unknown_keys(raw, _VAR_KEYS, loc, out)
    if not all(_require(raw, k, loc, out) for k in ("name", "kind", "domain")):
        return None
    domain = raw["domain"]
    if not (isinstance(domain, list) and len(domain) == 2 and all(map(_is_number, domain))):
        out.append(Diagnostic("FORMAT", f"{loc}.domain", "domain must be [lo, hi]"))
        return None
    step = raw.get("unit_step", 1)
    if not _is_number(step):
        out.append(Diagnostic("FORMAT", f"{loc}.unit_step", "unit_step must be a number"))
        return None
    kind = raw["kind"]
    lo, hi = domain
    if kind == REAL:
        lo, hi, step = float(lo), float(hi), float(step)
    return VariableDecl(str(raw["name"]), kind, lo, hi, step)


def _parse_transition(raw: Any, loc: str, out: List[Diagnostic]) -> Optional[Transition]:
    if not isinstance(raw, dict):
        out.append(Diagnostic("FORMAT", loc, "transition must be an object"))
        return None
    _unknown_keys(raw, _TRANSITION_KEYS, loc, out)
    if not all(_require(raw, k, loc, out) for k in ("id", "source", "target")):
        return None
    guard = None
    if raw.get("guard") is not None:
        try:
            guard = gl.parse_guard(str(raw["guard"]))
        except GuardSyntaxError as exc:
            out.append(Diagnostic("GUARD_SYNTAX", f"{loc}.guard@{exc.offset}", exc.reason))
    actions = []
    raw_actions = raw.get("actions", [])
    if not isinstance(raw_actions, list):
        out.append(Diagnostic("FORMAT", f"{loc}.actions", "actions must be an array of strings"))
        raw_actions = []
    for j, text in enumerate(raw_actions):
        try:
            actions.append(gl.parse_action(str(text)))
        except GuardSyntaxError as exc:
            out.append(Diagnostic("ACTION_SYNTAX", f"{loc}.actions[{j}]@{exc.offset}", exc.reason))
    event = raw.get("event")
    return Transition(
        str(raw["id"]),
        str(raw["source"]),
        str(raw["target"]),
        guard,
        tuple(actions),
        None if event is None else str(event),
    )


def load_model(document: Union[str, bytes, Mapping], source: str = "<model>") -> StateMachine:
    """Parse and validate a model document.

    Raises ModelError listing every error found.  Warnings do not stop
    loading; call :func:`validate` to see them.
    """
    if isinstance(document, (str, bytes)):
        try:
            raw = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ModelError(
                [Diagnostic("FORMAT", f"line {exc.lineno} column {exc.colno}", exc.msg)], source
            ) from None
    else:
        raw = document
    if not isinstance(raw, dict):
        raise ModelError([Diagnostic("FORMAT", "", "model must be a JSON object")], source)

    out: List[Diagnostic] = []
    _unknown_keys(raw, _TOP_KEYS, "", out)
    for key in ("name", "states", "initial", "transitions"):
        _require(raw, key, "", out)
    if out:
        raise ModelError(out, source)

    states = []
    raw_states = raw["states"] if isinstance(raw["states"], list) else []
    if not isinstance(raw["states"], list):
        out.append(Diagnostic("FORMAT", "states", "states must be an array"))
    for i, s in enumerate(raw_states):
        if isinstance(s, str):
            states.append(s)
        elif isinstance(s, dict):
            out.append(
                Diagnostic("NESTED_STATE", f"states[{i}]", "composite or nested states are not supported; flatten the machine")
            )
        else:
            out.append(Diagnostic("FORMAT", f"states[{i}]", "state must be a string"))

    variables = []
    for i, rv in enumerate(raw.get("variables", [])):
        v = _parse_variable(rv, f"variables[{i}]", out)
        if v is not None:
            variables.append(v)

    transitions = []
    raw_transitions = raw["transitions"] if isinstance(raw["transitions"], list) else []
    for i, rt in enumerate(raw_transitions):
        t = _parse_transition(rt, f"transitions[{i}]", out)
        if t is not None:
            transitions.append(t)

    machine = StateMachine(
        str(raw["name"]), tuple(states), str(raw["initial"]), tuple(variables), tuple(transitions)
    )
    out.extend(errors(validate(machine)))
    if out:
        raise ModelError(out, source)
    return machine


def load_model_file(path) -> StateMachine:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return load_model(text, source=str(path))


def model_to_dict(machine: StateMachine) -> Dict[str, Any]:
    def transition(t: Transition) -> Dict[str, Any]:
        d: Dict[str, Any] = {"id": t.id, "source": t.source, "target": t.target}
        if t.guard is not None:
            d["guard"] = gl.format_guard(t.guard)
        if t.actions:
            d["actions"] = [gl.format_action(a) for a in t.actions]
        if t.event is not None:
            d["event"] = t.event
        return d

    return {
        "name": machine.name,
        "states": list(machine.states),
        "initial": machine.initial,
        "variables": [
            {"name": v.name, "kind": v.kind, "domain": [v.lo, v.hi], "unit_step": v.unit_step}
            for v in machine.variables
        ],
        "transitions": [transition(t) for t in machine.transitions],
    }


def dump_model(machine: StateMachine) -> str:
    """Canonical serialization; ``load_model(dump_model(m)) == m``."""
    return json.dumps(model_to_dict(machine), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
