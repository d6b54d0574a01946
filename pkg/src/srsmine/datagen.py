"""Boundary test data by predicate-function minimisation.

Each target predicate ``E1 op E2`` is turned into a predicate function F,
an oriented difference of its two sides that is positive while the
predicate has the wrong outcome.  F is minimised one input variable at a
time (alternating variable method): an exploratory move of one unit step
in each direction, then pattern moves that double the step after every
success and halve it after a failure.  Once the outcome flips, the last
point before the flip and the flipped point are bisected down to adjacent
lattice points, giving the ON/OFF pair (I_in, I_out).

Every variable moves on a lattice ``anchor + k * unit``.  For integers
the unit is the variable's unit step; for reals it is the refinement
floor, ``unit_step * 2**-20``, so that pattern moves start at one unit
step and bisection can go down to the floor.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import guardlang as gl
from .guardlang import EvaluationError, GuardExpr, INTEGER
from .pathfinder import (
    DEFAULT_MAX_DEPTH,
    DFS,
    PredicateTarget,
    end_state,
    enumerate_targets,
    replay_prefix,
)
from .statemodel import StateMachine, VariableDecl
from .suite import FailedTarget, TestCase, TestSuite

E1_MINUS_E2 = "E1-E2"
E2_MINUS_E1 = "E2-E1"
ABS_DIFF = "|E1-E2|"

REAL_FLOOR_EXPONENT = 20


@dataclass(frozen=True)
class PredicateFunction:
    guard: GuardExpr
    desired: bool
    orientation: str

    def value(self, lhs: gl.Number, rhs: gl.Number) -> gl.Number:
        if self.orientation == E1_MINUS_E2:
            return lhs - rhs
        if self.orientation == E2_MINUS_E1:
            return rhs - lhs
        return abs(lhs - rhs)

    def __call__(self, env: Mapping[str, gl.Number]) -> gl.Number:
        return self.value(*gl.eval_sides(self.guard, env))


def orientation_for(op: str, desired: bool) -> str:
    """Orientation of F that is non-negative whenever ``op`` lacks ``desired``."""
    if op in (">", ">="):
        return E2_MINUS_E1 if desired else E1_MINUS_E2
    if op in ("<", "<="):
        return E1_MINUS_E2 if desired else E2_MINUS_E1
    if op in ("==", "!="):
        return ABS_DIFF
    raise ValueError(f"unknown relational operator {op!r}")


def build_predicate_function(guard: GuardExpr, env0: Mapping[str, gl.Number], desired: bool) -> PredicateFunction:
    """Predicate function for driving ``guard`` toward ``desired`` from ``env0``.

    ``env0`` is the environment at the predicate (prefix already replayed).
    For the inequality operators this picks whichever difference is
    positive at ``env0``; when both sides are equal the operator and the
    desired outcome decide.  Seeking ``E1 != E2`` from a point where the
    sides are equal gives F == 0 there; the search then relies on the
    outcome check alone.
    """
    if gl.eval_guard(guard, env0) == desired:
        raise ValueError("predicate already has the desired outcome at env0")
    return PredicateFunction(guard, desired, orientation_for(guard.op, desired))


@dataclass(frozen=True)
class SearchConfig:
    seed: int = 0
    max_evaluations: int = 10_000
    max_restarts: int = 10
    initial: Optional[Dict[str, gl.Number]] = None

    def __post_init__(self):
        if self.max_evaluations < 1:
            raise ValueError("max_evaluations must be at least 1")
        if self.max_restarts < 0:
            raise ValueError("max_restarts must be non-negative")

    def echo(self) -> Dict[str, object]:
        return {
            "seed": self.seed,
            "max_evaluations": self.max_evaluations,
            "max_restarts": self.max_restarts,
        }


def refinement_floor(var: VariableDecl) -> gl.Number:
    if var.kind == INTEGER:
        return var.unit_step
    return var.unit_step * 2.0 ** -REAL_FLOOR_EXPONENT


@dataclass(frozen=True)
class BoundaryPair:
    i_in: Dict[str, gl.Number]
    i_out: Dict[str, gl.Number]
    f_in: gl.Number
    f_out: gl.Number
    evaluations_used: int
    variable: str
    restarts: int = 0


@dataclass(frozen=True)
class SearchFailure:
    target: PredicateTarget
    reason: str
    best_f: Optional[float]
    evaluations_used: int
    restarts: int
    violated_step: Optional[int] = None
    violated_transition: Optional[str] = None

    def to_failed_target(self) -> FailedTarget:
        t = self.target
        return FailedTarget(
            transition=t.transition,
            guard=gl.format_guard(t.predicate),
            desired=t.desired,
            path=t.path,
            reason=self.reason,
            best_f=self.best_f,
            evaluations=self.evaluations_used,
            restarts=self.restarts,
            violated_step=self.violated_step,
            violated_transition=self.violated_transition,
        )


class SearchFailed(Exception):
    def __init__(self, failure: SearchFailure):
        self.failure = failure
        super().__init__(f"{failure.target.describe()}: {failure.reason}")


class _Exhausted(Exception):
    pass


@dataclass
class _Probe:
    feasible: bool
    outcome: bool = False
    lhs: gl.Number = 0
    rhs: gl.Number = 0
    violation: Optional[int] = None
    # prefix distance: (steps still to pass, branch distance at the blocking guard)
    prefix_distance: Tuple[float, float] = (0.0, 0.0)


def branch_distance(guard: GuardExpr, env: Mapping[str, gl.Number]) -> float:
    """Distance from making ``guard`` true; zero iff it already holds."""
    a, b = gl.eval_sides(guard, env)
    if gl.compare(guard.op, a, b):
        return 0.0
    op = guard.op
    if op == ">":
        return float(b - a) + 1.0
    if op == ">=":
        return float(b - a)
    if op == "<":
        return float(a - b) + 1.0
    if op == "<=":
        return float(a - b)
    if op == "==":
        return float(abs(a - b))
    return 1.0


class _Lattice:
    """Per-variable lattice coordinates ``value = anchor + k * unit``."""

    def __init__(self, var: VariableDecl):
        self.var = var
        self.unit = refinement_floor(var)
        self.base_step = 1 if var.kind == INTEGER else 2 ** REAL_FLOOR_EXPONENT
        self.anchor: gl.Number = var.lo

    def value(self, k: int) -> gl.Number:
        if self.var.kind == INTEGER:
            return self.anchor + k * self.unit
        return float(self.anchor + k * self.unit)

    def in_domain(self, k: int) -> bool:
        return self.var.contains(self.value(k))

    def random_k(self, rng: np.random.Generator) -> int:
        var = self.var
        self.anchor = var.lo
        if var.kind == INTEGER:
            top = (var.hi - var.lo) // var.unit_step
        else:
            top = int(math.floor((var.hi - var.lo) / self.unit))
            while top > 0 and var.lo + top * self.unit > var.hi:
                top -= 1
        if top >= 2 ** 62:
            return int(rng.random() * top)
        return int(rng.integers(0, top + 1))


class _Search:
    def __init__(self, machine: StateMachine, target: PredicateTarget, config: SearchConfig,
                 stream: int, trace: Optional[list]):
        self.machine = machine
        self.target = target
        self.config = config
        self.stream = stream
        self.trace = trace
        self.vars = list(machine.variables)
        self.lat = [_Lattice(v) for v in self.vars]
        self.evaluations = 0
        self.restarts = 0
        self.cache: Dict[Tuple, _Probe] = {}
        self.violations: Counter = Counter()
        self.best_f: Optional[float] = None
        self.phase = 0

    # -- evaluation ---------------------------------------------------------

    def inputs(self, ks: Sequence[int]) -> Dict[str, gl.Number]:
        return {v.name: lat.value(k) for v, lat, k in zip(self.vars, self.lat, ks)}

    def probe(self, ks: Sequence[int]) -> _Probe:
        env = self.inputs(ks)
        key = tuple(env.values())
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        if self.evaluations >= self.config.max_evaluations:
            raise _Exhausted()
        self.evaluations += 1
        result = self._evaluate(env)
        self.cache[key] = result
        if result.violation is not None:
            self.violations[result.violation] += 1
        return result

    def _evaluate(self, env: Dict[str, gl.Number]) -> _Probe:
        n = len(self.target.prefix)
        try:
            at, violation = replay_prefix(self.machine, self.target, env)
        except EvaluationError:
            return _Probe(False, prefix_distance=(math.inf, math.inf))
        if violation is not None:
            step = self.target.prefix[violation]
            try:
                d = branch_distance(step.guard, at)
            except EvaluationError:
                d = math.inf
            return _Probe(False, violation=violation, prefix_distance=(float(n - violation), d))
        try:
            a, b = gl.eval_sides(self.target.predicate, at)
        except EvaluationError:
            return _Probe(False, prefix_distance=(0.0, math.inf))
        return _Probe(True, gl.compare(self.target.predicate.op, a, b), a, b)

    # -- the alternating variable method --------------------------------------

    def avm(self, start: List[int], objective: Callable[[_Probe], Optional[object]],
            goal: Callable[[_Probe], bool], monitor: bool):
        """Minimise ``objective`` from ``start``.

        Returns ``(before, after, i)`` when a move reaches ``goal``, where
        ``before``/``after`` differ only in variable ``i``; returns None at
        a local minimum over all variables.
        """
        cur = list(start)
        f_cur = objective(self.probe(cur))
        idle = 0
        i = 0
        nvars = len(self.vars)
        while idle < nvars:
            lat = self.lat[i]
            self.phase += 1
            accepted_f = [f_cur] if monitor else None
            moved = False

            def attempt(delta: int):
                nonlocal cur, f_cur
                k = cur[i] + delta
                if not lat.in_domain(k):
                    return False
                cand = list(cur)
                cand[i] = k
                p = self.probe(cand)
                if goal(p):
                    raise _Reached(list(cur), cand, i)
                f = objective(p)
                if f is None or not f < f_cur:
                    return False
                if monitor:
                    assert f < accepted_f[-1], "predicate function failed to decrease"
                    accepted_f.append(f)
                    self._record(i, f)
                cur, f_cur = cand, f
                return True

            while True:
                # exploratory moves: unit step first, then finer steps down to the floor
                direction = 0
                probe_step = lat.base_step
                while probe_step >= 1 and not direction:
                    for d in (1, -1):
                        if attempt(d * probe_step):
                            direction = d
                            break
                    else:
                        probe_step //= 2
                if not direction:
                    break
                moved = True
                step = probe_step * 2
                while step >= 1:
                    if attempt(direction * step):
                        step *= 2
                    else:
                        step //= 2
            idle = 0 if moved else idle + 1
            i = (i + 1) % nvars
        return None

    def _record(self, i: int, f) -> None:
        fv = float(f)
        if self.best_f is None or fv < self.best_f:
            self.best_f = fv
        if self.trace is not None:
            self.trace.append((self.restarts, self.phase, self.vars[i].name, f))

    def refine(self, inside: List[int], outside: List[int], i: int, outcome_in: bool):
        """Bisect between a point with ``outcome_in`` and one without it."""
        a, b = inside[i], outside[i]

        def at(k):
            ks = list(inside)
            ks[i] = k
            return ks

        while abs(b - a) > 1:
            m = a + (b - a) // 2 if b > a else a - (a - b) // 2
            p = self.probe(at(m))
            if not p.feasible:
                return self._scan(at, a, b, outcome_in)
            if p.outcome == outcome_in:
                a = m
            else:
                b = m
        return at(a), at(b)

    def _scan(self, at, a: int, b: int, outcome_in: bool):
        # bisection hit an infeasible point; walk the interval for any adjacent straddle
        d = 1 if b > a else -1
        prev_k, prev = a, self.probe(at(a))
        k = a
        while k != b:
            k += d
            p = self.probe(at(k))
            if p.feasible and prev is not None and prev.feasible and p.outcome != prev.outcome:
                if prev.outcome == outcome_in:
                    return at(prev_k), at(k)
                return at(k), at(prev_k)
            prev_k, prev = k, p
        return None

    # -- driver ---------------------------------------------------------------

    def start_point(self) -> List[int]:
        if self.restarts == 0 and self.config.initial is not None:
            ks = []
            for v, lat in zip(self.vars, self.lat):
                value = self.config.initial[v.name]
                if v.kind == INTEGER and not isinstance(value, int):
                    raise TypeError(f"initial value for integer {v.name!r} must be an integer")
                if not v.contains(value):
                    raise ValueError(f"initial value {value!r} for {v.name!r} is outside its domain")
                lat.anchor = value if v.kind == INTEGER else float(value)
                ks.append(0)
            return ks
        ss = np.random.SeedSequence(self.config.seed & (2 ** 64 - 1), spawn_key=(self.stream, self.restarts))
        rng = np.random.default_rng(ss)
        return [lat.random_k(rng) for lat in self.lat]

    def run(self) -> BoundaryPair:
        target = self.target
        op = target.predicate.op
        if not self.vars:
            return self._fail("model declares no input variables")
        try:
            while True:
                found = self._attempt(op)
                if found is not None:
                    return found
                if self.restarts >= self.config.max_restarts:
                    return self._fail(f"no boundary found after {self.restarts} restarts")
                self.restarts += 1
        except _Exhausted:
            return self._fail("evaluation budget exhausted")

    def _attempt(self, op: str) -> Optional[BoundaryPair]:
        ks = self.start_point()
        p = self.probe(ks)
        if not p.feasible:
            try:
                reached = self.avm(ks, lambda q: q.prefix_distance, lambda q: q.feasible, monitor=False)
            except _Reached as r:
                reached = r
            if reached is None:
                return None
            ks = reached.after
            p = self.probe(ks)
        outcome0 = p.outcome
        guard = self.target.predicate
        pf = PredicateFunction(guard, not outcome0, orientation_for(op, not outcome0))
        f0 = float(pf.value(p.lhs, p.rhs))
        if self.best_f is None or f0 < self.best_f:
            self.best_f = f0
        objective = lambda q: pf.value(q.lhs, q.rhs) if q.feasible else None
        goal = lambda q: q.feasible and q.outcome != outcome0
        try:
            reached = self.avm(ks, objective, goal, monitor=True)
        except _Reached as r:
            reached = r
        if reached is None:
            return None
        pair = self.refine(reached.before, reached.after, reached.index, outcome0)
        if pair is None:
            return None
        inside, outside = pair
        if outcome0 == self.target.desired:
            inside, outside = outside, inside
        i_in, i_out = self.inputs(inside), self.inputs(outside)
        target_pf = PredicateFunction(guard, self.target.desired, orientation_for(op, self.target.desired))
        pin, pout = self.probe(inside), self.probe(outside)
        return BoundaryPair(
            i_in=i_in,
            i_out=i_out,
            f_in=target_pf.value(pin.lhs, pin.rhs),
            f_out=target_pf.value(pout.lhs, pout.rhs),
            evaluations_used=self.evaluations,
            variable=self.vars[reached.index].name,
            restarts=self.restarts,
        )

    def _fail(self, reason: str):
        step = trans = None
        if self.violations:
            step = self.violations.most_common(1)[0][0]
            trans = self.target.prefix[step].transition
        raise SearchFailed(
            SearchFailure(self.target, reason, self.best_f, self.evaluations, self.restarts, step, trans)
        )


class _Reached(Exception):
    def __init__(self, before: List[int], after: List[int], index: int):
        self.before = before
        self.after = after
        self.index = index


def alternating_variable_search(
    machine: StateMachine,
    target: PredicateTarget,
    config: SearchConfig = SearchConfig(),
    stream: int = 0,
    trace: Optional[list] = None,
) -> BoundaryPair:
    """Find the ON/OFF pair for ``target``.

    ``stream`` selects the random substream (the target's index in the
    suite).  ``trace``, if given, collects ``(restart, phase, variable, F)``
    for every accepted move of the main minimisation.

    Raises SearchFailed with a diagnostic report when no boundary is found
    within the evaluation and restart budgets.
    """
    return _Search(machine, target, config, stream, trace).run()


def _covered(target: PredicateTarget, outcome: bool) -> Tuple[str, ...]:
    return target.path if outcome else target.path[:-1]


def generate_for_target(
    machine: StateMachine,
    target: PredicateTarget,
    config: SearchConfig = SearchConfig(),
    stream: int = 0,
    case_id: Optional[str] = None,
) -> List[TestCase]:
    pair = alternating_variable_search(machine, target, config, stream)
    # the replay is the oracle for every emitted input
    env_in, v_in = replay_prefix(machine, target, pair.i_in)
    env_out, v_out = replay_prefix(machine, target, pair.i_out)
    if v_in is not None or v_out is not None:
        raise AssertionError(f"{target.describe()}: boundary input violates the prefix")
    if gl.eval_guard(target.predicate, env_in) == target.desired or \
            gl.eval_guard(target.predicate, env_out) != target.desired:
        raise AssertionError(f"{target.describe()}: boundary pair does not straddle the predicate")
    case = TestCase(
        id=case_id or f"TC{stream + 1:04d}",
        path=target.path,
        transition=target.transition,
        guard=gl.format_guard(target.predicate),
        desired=target.desired,
        i_in=pair.i_in,
        i_out=pair.i_out,
        f_in=pair.f_in,
        f_out=pair.f_out,
        expected_end_state=end_state(machine, target, target.desired),
        covered_transitions=_covered(target, target.desired),
        evaluations=pair.evaluations_used,
    )
    return [case]


def _run_one(args):
    machine, target, config, index = args
    try:
        return generate_for_target(machine, target, config, index)
    except SearchFailed as exc:
        return exc.failure.to_failed_target()


def generate_suite(
    machine: StateMachine,
    config: SearchConfig = SearchConfig(),
    max_depth: int = DEFAULT_MAX_DEPTH,
    strategy: str = DFS,
    jobs: int = 1,
) -> TestSuite:
    """Generate boundary test cases for every reachable guarded transition.

    Each target searches on its own random substream, so ``jobs > 1``
    produces exactly the same suite as a serial run.
    """
    targets = enumerate_targets(machine, max_depth, strategy)
    work = [(machine, t, config, i) for i, t in enumerate(targets)]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, work))
    else:
        results = [_run_one(w) for w in work]
    cases: List[TestCase] = []
    failed: List[FailedTarget] = []
    for r in results:
        if isinstance(r, FailedTarget):
            failed.append(r)
        else:
            cases.extend(r)
    echo = dict(config.echo(), max_depth=max_depth, strategy=strategy)
    return TestSuite(
        model_name=machine.name,
        model_digest=machine.digest,
        config=echo,
        cases=tuple(cases),
        failed_targets=tuple(failed),
        skipped_targets=tuple(targets.skipped),
    )
