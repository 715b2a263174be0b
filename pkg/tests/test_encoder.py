import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffideal.algebra import Algebra, Deg, Mode, deg, is_homogeneous
from diffideal.encoder import (
    B_QQ,
    DEFAULT_EXPONENT_BUDGET,
    compile_command,
    compile_machine,
    config_element,
    config_of,
    format_generator_file,
    j_generators,
    lift_from_quotient,
    membership_target,
    parse_generator_file,
    test_element as g_m,
    to_quotient,
)
from diffideal.errors import ResourceError, UsageError, ValidationError
from diffideal.minsky import BUNDLED, Command, Config, Machine
from diffideal.rings import GF2
from strategies import A, B, commands, polys


def test_compile_command_examples():
    g = compile_command(Command(2, 1, 0, 3, 1, 1))
    assert g == B.parse("x1[0,0]^1 * q2[0,1]^1 - x1[0,0]^1 * q3[1,2]^1")
    g = compile_command(Command(1, 1, 1, 0, 0, 0))
    assert g == B.parse("x1[0,0]^1 * x2[0,0]^1 * q1[0,0]^1 - x1[0,0]^1 * x2[0,0]^1 * q0[0,0]^1")
    g = compile_command(Command(1, 0, 0, 2, -1, 1))
    assert g == B.parse("q1[1,1]^1 - q2[0,2]^1")


def test_dec1_generators_by_hand():
    enc = compile_machine(BUNDLED["dec1"])
    assert [str(g) for g in enc.polys()] == [
        "x2[0,0]^1 * q1[1,0]^1 - x2[0,0]^1 * q1[0,0]^1",
        "x1[0,0]^1 * x2[0,0]^1 * q1[0,0]^1 - x1[0,0]^1 * x2[0,0]^1 * q0[0,0]^1",
    ]


def test_compile_machine_counts():
    enc = compile_machine(Machine(2, ()))
    assert enc.generators == () and len(enc.j_generators) == 2
    for m in BUNDLED.values():
        enc = compile_machine(m)
        assert len(enc.generators) == len(m.commands)
        keys = [c.key for c in enc.commands()]
        assert keys == sorted(keys)


@settings(max_examples=60, deadline=None)
@given(commands())
def test_generator_invariants(c):
    g = compile_command(c)
    assert deg(g) == 1 + c.eps + c.sigma
    for grading in ("Deg", "xvars", "qgroup", "groups"):
        assert is_homogeneous(g, grading)


def test_j_generators():
    assert [str(j) for j in j_generators()] == ["x2[1,0]^1", "x1[0,1]^1"]
    with pytest.raises(UsageError):
        j_generators(B_QQ)


def test_test_element_examples():
    assert g_m(0) == B.parse("x1[0,0]^1 * x2[0,0]^1 * q1[2,0]^1 - x1[0,0]^1 * x2[0,0]^1 * q0[1,0]^1")
    assert max(v.theta[0] for m in g_m(2).terms for v, _ in m) == 16
    assert Deg(g_m(1)) == (1, 1) and deg(g_m(1)) == 3
    assert config_element(Config(0, 1, 0)) == B.parse("x1[0,0]^1 * x2[0,0]^1 * q0[1,0]^1")
    assert g_m(1, A) == A.parse("x1[0,0]^1 * x2[0,0]^1 * q1[4,0]^1 - x1[0,0]^1 * x2[0,0]^1 * q0[1,0]^1")
    assert g_m(1) == membership_target(Config(1, 4, 0), Config(0, 1, 0))


def test_exponent_budget():
    with pytest.raises(ResourceError):
        g_m(3, budget=100)
    with pytest.raises(ResourceError):
        g_m(5)  # 2^32 > default budget
    assert DEFAULT_EXPONENT_BUDGET == 2 ** 16
    g_m(4)
    with pytest.raises(ResourceError):
        config_element(Config(1, 10 ** 6, 0))
    with pytest.raises(ValidationError):
        g_m(-1)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 4), st.integers(0, 9), st.integers(0, 9), st.integers(0, 3), st.integers(0, 3))
def test_config_element_bijection(state, c1, c2, a, b):
    u = config_element(Config(state, c1, c2), prefactor=(a, b))
    (mono,) = u.terms
    assert config_of(mono) == (Config(state, c1, c2), (a, b))
    assert Deg(u) == (a + 1, b + 1)


def test_config_of_rejects_other_shapes():
    for text in ["x1[0,0]^1 * q1[0,0]^1", "x1[0,0]^2 * x2[0,0]^1 * q1[0,0]^1",
                 "x1[0,0]^1 * x2[0,0]^1 * q1[0,0]^1 * q2[0,0]^1"]:
        assert config_of(B.parse(text).monomials()[0]) is None


@settings(max_examples=60, deadline=None)
@given(polys(A), polys(A))
def test_quotient_map_is_a_ring_map(a, b):
    assert to_quotient(a * b, B) == to_quotient(a, B) * to_quotient(b, B)
    assert to_quotient(a + b, B) == to_quotient(a, B) + to_quotient(b, B)
    for i in (1, 2):
        assert to_quotient(a.derive(i), B) == to_quotient(a, B).derive(i)


@settings(max_examples=40, deadline=None)
@given(polys(B))
def test_lift_is_a_section(b):
    assert to_quotient(lift_from_quotient(b, A), B) == b


@pytest.mark.parametrize("name", sorted(BUNDLED))
def test_generator_file_round_trip(name):
    enc = compile_machine(BUNDLED[name])
    text = format_generator_file(enc)
    back = parse_generator_file(text)
    assert back.polys() == enc.polys()
    assert back.machine == enc.machine
    assert format_generator_file(back) == text


def test_generator_file_over_gf2():
    enc = compile_machine(BUNDLED["even"], Algebra(GF2, Mode.B))
    text = format_generator_file(enc)
    assert "# field GF(2)" in text
    assert parse_generator_file(text).alg.ring == GF2


def test_generator_file_diagnostics():
    text = format_generator_file(compile_machine(BUNDLED["dec1"]))
    lines = text.splitlines()
    with pytest.raises(ValidationError, match="header"):
        parse_generator_file("\n".join(lines[1:]))
    tampered = list(lines)
    tampered[-1] = tampered[-1].replace("q0", "q1")
    with pytest.raises(ValidationError, match=f"g.txt:{len(lines)}: generator does not match"):
        parse_generator_file("\n".join(tampered), source="g.txt")
    with pytest.raises(ValidationError, match="without a preceding command"):
        parse_generator_file("\n".join(lines[:4] + ["q1[0,0]^1"]))
