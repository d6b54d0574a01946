import json
from collections import deque

import pytest
from hypothesis import given, settings, strategies as st

from srsmine import guardlang as gl
from srsmine.statemodel import (
    ModelError,
    StateMachine,
    Transition,
    VariableDecl,
    dump_model,
    errors,
    load_model,
    validate,
)

from oracles import ivar, model, random_model_dict
import random


def two_state(guard="x > 10"):
    return model([ivar("x", 0, 100)], [{"id": "t1", "source": "A", "target": "B", "guard": guard}], states=("A", "B"))


def codes(diags):
    return [d.code for d in diags]


def test_load_two_state():
    m = two_state()
    assert m.states == ("A", "B")
    assert len(m.guarded) == 1
    assert m.transition("t1").guard == gl.parse_guard("x > 10")


def test_undeclared_state_is_named():
    with pytest.raises(ModelError) as info:
        model([ivar("x", 0, 1)], [{"id": "t1", "source": "A", "target": "Z"}], states=("A", "B"))
    assert "Z" in str(info.value)
    assert "UNKNOWN_STATE" in codes(info.value.diagnostics)


def test_self_loop_accepted():
    m = model([ivar("x", 0, 5)], [{"id": "t1", "source": "A", "target": "A", "guard": "x < 3", "actions": ["x := x + 1"]}],
              states=("A",))
    assert m.transition("t1").source == m.transition("t1").target == "A"


def test_validate_minimal_clean():
    assert validate(two_state()) == []


def test_domain_empty_diagnostic():
    m = StateMachine("m", ("A", "B"), "A", (VariableDecl("x", "integer", 5, 3),), (Transition("t", "A", "B"),))
    assert "DOMAIN_EMPTY" in codes(validate(m))


def test_unreachable_state_warning_matches_bfs():
    m = StateMachine(
        "m", ("A", "B", "C", "D"), "A", (),
        (Transition("t1", "A", "B"), Transition("t2", "C", "D"), Transition("t3", "D", "C")),
    )
    # independent BFS from the initial state
    seen, queue = {"A"}, deque(["A"])
    while queue:
        s = queue.popleft()
        for t in m.transitions:
            if t.source == s and t.target not in seen:
                seen.add(t.target)
                queue.append(t.target)
    unreachable = {s for s in m.states if s not in seen}
    diags = [d for d in validate(m) if d.code == "REACHABILITY"]
    assert unreachable == {"C", "D"}
    assert {m.states[int(d.location[7:-1])] for d in diags} == unreachable
    assert all(d.severity == "warning" for d in diags)


def test_no_exit_from_initial_warns():
    m = StateMachine("m", ("A", "B"), "A", (), (Transition("t1", "B", "A"),))
    diags = validate(m)
    assert "NO_INITIAL_EXIT" in codes(diags)
    assert errors(diags) == []


def test_duplicate_ids_and_variables():
    doc = {
        "name": "m", "states": ["A", "B"], "initial": "A",
        "variables": [ivar("x", 0, 1), ivar("x", 0, 2)],
        "transitions": [{"id": "t", "source": "A", "target": "B"}, {"id": "t", "source": "B", "target": "A"}],
    }
    with pytest.raises(ModelError) as info:
        load_model(json.dumps(doc))
    assert {"DUPLICATE_ID", "DUPLICATE_VARIABLE"} <= set(codes(info.value.diagnostics))


def test_undeclared_variable_in_guard_has_location():
    with pytest.raises(ModelError) as info:
        two_state("y > 1")
    d = info.value.diagnostics[0]
    assert d.code == "UNDECLARED_VARIABLE"
    assert d.location == "transitions[0].guard@0"


def test_guard_syntax_error_location():
    with pytest.raises(ModelError) as info:
        two_state("x >")
    d = info.value.diagnostics[0]
    assert d.code == "GUARD_SYNTAX" and d.location.endswith("@3")


def test_unknown_keys_rejected():
    doc = json.loads(dump_model(two_state()))
    doc["colour"] = "blue"
    with pytest.raises(ModelError) as info:
        load_model(json.dumps(doc))
    assert codes(info.value.diagnostics) == ["UNKNOWN_KEY"]


def test_nested_states_rejected():
    doc = json.loads(dump_model(two_state()))
    doc["states"].append({"name": "Composite", "substates": ["X"]})
    with pytest.raises(ModelError) as info:
        load_model(json.dumps(doc))
    assert "NESTED_STATE" in codes(info.value.diagnostics)


def test_format_error_has_line_and_column():
    with pytest.raises(ModelError) as info:
        load_model('{"name": "m",\n  "states": [}', source="bad.json")
    assert "line 2" in str(info.value) and "bad.json" in str(info.value)


def test_integer_kind_needs_integer_bounds():
    with pytest.raises(ModelError) as info:
        model([{"name": "x", "kind": "integer", "domain": [0, 1.5], "unit_step": 1}], [], states=("A",))
    assert "KIND_MISMATCH" in codes(info.value.diagnostics)


def test_type_mismatch_real_into_integer():
    with pytest.raises(ModelError) as info:
        model([ivar("x", 0, 9)], [{"id": "t", "source": "A", "target": "A", "actions": ["x := x * 0.5"]}], states=("A",))
    assert "TYPE_MISMATCH" in codes(info.value.diagnostics)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_serialize_round_trip(seed):
    m = load_model(json.dumps(random_model_dict(random.Random(seed))))
    text = dump_model(m)
    assert load_model(text) == m
    assert dump_model(load_model(text)) == text


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6), st.randoms(use_true_random=False))
def test_clean_model_evaluates_under_any_full_env(seed, rnd):
    m = load_model(json.dumps(random_model_dict(random.Random(seed))))
    env = {v.name: rnd.randint(v.lo, v.hi) for v in m.variables}
    for t in m.transitions:
        if t.guard is not None:
            gl.eval_guard(t.guard, env)
        for a in t.actions:
            gl.eval_arith(a.expr, env)
