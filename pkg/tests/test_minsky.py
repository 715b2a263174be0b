import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as O
from diffideal.errors import ValidationError
from diffideal.minsky import (
    ACYCLIC,
    BUNDLED,
    CYCLIC,
    Command,
    Config,
    Machine,
    Outcome,
    check_acyclic_bounded,
    load_machine,
    machine_from_json,
    machine_to_json,
    parse_config,
    run,
    step,
)
from strategies import commands

HALT_ONE = Machine(1, (Command(1, 1, 1, 0, 0, 0),))


def test_command_validation():
    with pytest.raises(ValidationError):
        Command(1, 1, 0, 1, -1, 0)
    with pytest.raises(ValidationError):
        Command(1, 0, 1, 1, 0, -1)
    with pytest.raises(ValidationError):
        Command(0, 0, 0, 1)
    with pytest.raises(ValidationError):
        Command(1, 2, 0, 1)
    with pytest.raises(ValidationError):
        Command(1, 0, 0, 1, 2, 0)
    assert str(Command(1, 0, 1, 1, -1, 0)) == "q1 0 1 -> q1 T-1 T0"


def test_machine_determinism_and_range():
    with pytest.raises(ValidationError):
        Machine(1, (Command(1, 1, 1, 0), Command(1, 1, 1, 1)))
    with pytest.raises(ValidationError):
        Machine(1, (Command(1, 1, 1, 2),))


def test_step_examples():
    assert step(HALT_ONE, Config(0, 5, 5)) is Outcome.HALTED
    assert step(HALT_ONE, Config(1, 0, 0)) == Config(0, 0, 0)
    assert step(HALT_ONE, Config(1, 1, 0)) is Outcome.STUCK
    m = Machine(2, (Command(1, 1, 0, 2, 1, -1),))
    t = 4
    assert step(m, Config(1, 0, t + 1)) == Config(2, 1, t)


def test_run_examples():
    tr = run(HALT_ONE, Config(1, 0, 0), 10)
    assert tr.status is Outcome.HALTED and len(tr.configs) == 2
    loop = Machine(1, (Command(1, 1, 1, 1, 0, 0),))
    tr = run(loop, Config(1, 0, 0), 10)
    assert tr.status is Outcome.CYCLE and tr.steps == 1 and tr.cycle_start == 0
    # a lone (q1,1,1) -> (q1,1,1) command gets stuck after one step: nothing covers [1,1,1]
    lone = Machine(1, (Command(1, 1, 1, 1, 1, 1),))
    assert run(lone, Config(1, 0, 0), 10).status is Outcome.STUCK
    tr = run(BUNDLED["inc_forever"], Config(1, 0, 0), 10)
    assert tr.status is Outcome.BUDGET and tr.steps == 10
    assert [c for c in tr.configs[:3]] == [Config(1, 0, 0), Config(1, 1, 1), Config(1, 2, 2)]


@pytest.mark.parametrize("k", [0, 1, 7, 50, 100])
def test_dec1_halts_in_k_plus_one_steps(k):
    tr = run(BUNDLED["dec1"], Config(1, k, 0), 1000)
    assert tr.halted and tr.final == Config(0, 0, 0) and tr.steps == k + 1


@pytest.mark.parametrize("k", range(12))
def test_even_machine(k):
    tr = run(BUNDLED["even"], Config(1, k, 0), 200)
    if k % 2 == 0:
        assert tr.halted and tr.final == Config(0, 1, 0)
    else:
        assert tr.status is Outcome.BUDGET


@pytest.mark.parametrize("k", range(8))
def test_transfer_machine(k):
    tr = run(BUNDLED["transfer"], Config(1, k, 0), 200)
    assert tr.halted and tr.final == Config(0, 1, 0) and tr.steps == (2 * k + 2 if k else 1)
    assert tr.max_counters() == (max(k, 1), k)


def test_bundled_cycle_reports():
    starts = [Config(1, k, 0) for k in range(51)]
    for name in ACYCLIC:
        reports = check_acyclic_bounded(BUNDLED[name], starts, 300)
        assert not any(r.cycle_found for r in reports), name
    assert check_acyclic_bounded(BUNDLED["dec1"], starts, 300)[50].status is Outcome.HALTED
    for name in CYCLIC:
        assert check_acyclic_bounded(BUNDLED[name], [Config(1, 0, 0)], 50)[0].cycle_found


@settings(max_examples=80, deadline=None)
@given(st.lists(commands(2, nonzero=False), max_size=8), st.integers(1, 2), st.integers(0, 4), st.integers(0, 4))
def test_run_matches_reference(cmds, s, c1, c2):
    table = {}
    for c in cmds:
        table.setdefault(c.key, c)
    m = Machine(2, tuple(table.values()))
    tr = run(m, Config(s, c1, c2), 40)
    status, trace = O.simulate([tuple(c.to_dict().values()) for c in m.commands], (s, c1, c2), 40)
    assert tr.status.value == status
    assert [tuple(c) for c in tr.configs] == trace
    assert all(c.c1 >= 0 and c.c2 >= 0 for c in tr.configs)


def test_config_parsing():
    assert parse_config("[1,3,0]") == Config(1, 3, 0)
    assert parse_config(" 2, 0, 4 ") == Config(2, 0, 4)
    with pytest.raises(ValidationError):
        parse_config("1,2")
    with pytest.raises(ValidationError):
        parse_config("1,-2,0")


def test_machine_file_round_trip(tmp_path):
    for name, m in BUNDLED.items():
        text = machine_to_json(m)
        assert machine_from_json(text) == m
        assert machine_to_json(machine_from_json(text)) == text
        path = tmp_path / f"{name}.json"
        path.write_text(text)
        assert load_machine(path) == m
    assert load_machine("bundled:dec1") == BUNDLED["dec1"]


def test_machine_file_diagnostics():
    text = '{\n  "n": 1,\n  "commands": [\n    {"i": 1, "eps": 0, "sigma": 1, "j": 1, "alpha": -1, "beta": 0},\n' \
           '    {"i": 1, "eps": 1, "sigma": 1, "j": 0, "alpha": -1, "beta": 0}\n  ]\n}\n'
    with pytest.raises(ValidationError, match=r"m\.json:5: command 1"):
        machine_from_json(text, "m.json")
    dup = json.dumps({"n": 1, "commands": [
        {"i": 1, "eps": 1, "sigma": 1, "j": 0, "alpha": 0, "beta": 0},
        {"i": 1, "eps": 1, "sigma": 1, "j": 1, "alpha": 0, "beta": 0}]}, indent=1)
    with pytest.raises(ValidationError, match="duplicate key"):
        machine_from_json(dup)
    with pytest.raises(ValidationError, match=":1:"):
        machine_from_json("{\"n\": 1}")
    with pytest.raises(ValidationError, match=":2: invalid JSON"):
        machine_from_json("{\n  oops\n}")
    with pytest.raises(ValidationError, match="state out of range"):
        machine_from_json(json.dumps({"n": 1, "commands": [
            {"i": 1, "eps": 1, "sigma": 1, "j": 3, "alpha": 0, "beta": 0}]}))
    with pytest.raises(ValidationError):
        load_machine("/nonexistent/machine.json")
    with pytest.raises(ValidationError):
        load_machine("bundled:nope")
