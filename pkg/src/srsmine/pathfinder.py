"""Predicate selection by traversal of the state machine.

Every guarded transition reachable from the initial state yields two
targets, one per desired outcome, both on the first path that reaches it.
A transition may occur at most once per path and paths are bounded by
``max_depth``, which keeps the traversal finite on cyclic machines.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

from . import guardlang as gl
from .guardlang import ActionStmt, EvaluationError, GuardExpr
from .statemodel import StateMachine, Transition

DEFAULT_MAX_DEPTH = 16
DFS = "dfs"
BFS = "bfs"


@dataclass(frozen=True)
class PrefixConstraint:
    transition: str
    guard: Optional[GuardExpr]
    actions: Tuple[ActionStmt, ...] = ()


@dataclass(frozen=True)
class PredicateTarget:
    path: Tuple[str, ...]
    predicate: GuardExpr
    desired: bool
    prefix: Tuple[PrefixConstraint, ...]

    @property
    def transition(self) -> str:
        return self.path[-1]

    def describe(self) -> str:
        return f"{self.transition} [{gl.format_guard(self.predicate)}] -> {str(self.desired).lower()}"


@dataclass
class TargetList:
    """Targets in emission order plus guarded transitions never reached."""

    targets: List[PredicateTarget] = field(default_factory=list)
    skipped: List[str] = field(default_factory=list)

    def __iter__(self):
        return iter(self.targets)

    def __len__(self) -> int:
        return len(self.targets)

    def __getitem__(self, i):
        return self.targets[i]


class PrefixEvaluationError(EvaluationError):
    def __init__(self, step: int, cause: EvaluationError):
        self.step = step
        self.cause = cause
        super().__init__(f"prefix step {step}: {cause.reason}", cause.offset)


def _first_paths_dfs(machine: StateMachine, max_depth: int, wanted: int) -> Dict[str, Tuple[str, ...]]:
    found: Dict[str, Tuple[str, ...]] = {}
    by_source: Dict[str, List[Transition]] = {s: machine.outgoing(s) for s in machine.states}

    def visit(state: str, path: List[str], used: set) -> bool:
        if len(path) >= max_depth:
            return False
        for t in by_source.get(state, ()):
            if t.id in used:
                continue
            path.append(t.id)
            if t.guard is not None and t.id not in found:
                found[t.id] = tuple(path)
                if len(found) == wanted:
                    return True
            used.add(t.id)
            done = visit(t.target, path, used)
            used.discard(t.id)
            path.pop()
            if done:
                return True
        return False

    if wanted:
        visit(machine.initial, [], set())
    return found


def _first_paths_bfs(machine: StateMachine, max_depth: int, wanted: int) -> Dict[str, Tuple[str, ...]]:
    found: Dict[str, Tuple[str, ...]] = {}
    by_source = {s: machine.outgoing(s) for s in machine.states}
    queue = deque([(machine.initial, ())])
    while queue and len(found) < wanted:
        state, path = queue.popleft()
        if len(path) >= max_depth:
            continue
        for t in by_source.get(state, ()):
            if t.id in path:
                continue
            new = path + (t.id,)
            if t.guard is not None and t.id not in found:
                found[t.id] = new
            queue.append((t.target, new))
    return found


def enumerate_targets(
    machine: StateMachine, max_depth: int = DEFAULT_MAX_DEPTH, strategy: str = DFS
) -> TargetList:
    if max_depth < 1:
        raise ValueError("max_depth must be positive")
    wanted = len(machine.guarded)
    if strategy == DFS:
        found = _first_paths_dfs(machine, max_depth, wanted)
    elif strategy == BFS:
        found = _first_paths_bfs(machine, max_depth, wanted)
    else:
        raise ValueError(f"unknown traversal strategy {strategy!r}")

    transitions = {t.id: t for t in machine.transitions}
    result = TargetList()
    for tid, path in found.items():
        prefix = tuple(
            PrefixConstraint(p, transitions[p].guard, transitions[p].actions) for p in path[:-1]
        )
        guard = transitions[tid].guard
        for desired in (True, False):
            result.targets.append(PredicateTarget(path, guard, desired, prefix))
    result.skipped = [t.id for t in machine.guarded if t.id not in found]
    return result


def replay_prefix(
    machine: StateMachine, target: PredicateTarget, inputs: Mapping[str, gl.Number]
) -> Tuple[gl.Env, Optional[int]]:
    """Walk the prefix from ``inputs``.

    Returns the environment in force at the target predicate and the index
    of the first prefix guard that does not hold (``None`` if the whole
    prefix is traversable).  Arithmetic failures raise
    PrefixEvaluationError carrying the step index.
    """
    kinds = machine.kinds
    env: gl.Env = dict(inputs)
    for i, step in enumerate(target.prefix):
        try:
            if step.guard is not None and not gl.eval_guard(step.guard, env):
                return env, i
            for action in step.actions:
                gl.apply_action(action, env, kinds.get(action.target))
        except PrefixEvaluationError:
            raise
        except EvaluationError as exc:
            raise PrefixEvaluationError(i, exc) from None
    return env, None


def end_state(machine: StateMachine, target: PredicateTarget, outcome: bool) -> str:
    """State the machine is in once the target predicate evaluated to ``outcome``."""
    t = machine.transition(target.transition)
    return t.target if outcome else t.source
