"""End-to-end acceptance suite.

Each criterion runs under its wall-clock limit and prints one ``PASS``/``FAIL``
line, printed straight to the terminal (it bypasses output capture).
"""

import json
import functools
import random
import time
from fractions import Fraction
from contextlib import contextmanager

import pytest
import oracles as O
from diffideal.algebra import X1, X2, Algebra, DerivOp, DiffVar, Mode, Monomial, apply_theta, derive, highest_part, q
from diffideal.encoder import (
    compile_command,
    compile_machine,
    format_generator_file,
    lift_from_quotient,
    membership_target,
    parse_generator_file,
    test_element,
)
from diffideal.enveloping import EnvOperator, format_operator, parse_operator
from diffideal.membership import (
    Certificate,
    OracleProblem,
    Verdict,
    certificate_from_dict,
    certify,
    combine,
    decide_membership,
    oracle_member,
    solution_in_w,
    step_correspondence,
    verify_certificate,
)
from diffideal.minsky import (
    ACYCLIC,
    BUNDLED,
    CYCLIC,
    Command,
    Config,
    Machine,
    machine_from_json,
    machine_to_json,
    run,
    step,
)
from diffideal.rings import GF2
from diffideal.subalgebra import (
    expr_from_json,
    expr_to_json,
    from_encoded,
    lift_to_subalgebra,
    refute_tf_membership_bounded,
    verify_lift,
    witness_from_quotient,
)
from strategies import A, B

RESULTS = {}


@contextmanager
def criterion(number, title, limit, capsys):
    t0 = time.perf_counter()
    ok = False
    try:
        yield
        ok = True
    finally:
        elapsed = time.perf_counter() - t0
        passed = ok and elapsed < limit
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {title} ({elapsed:.2f}s, limit {limit}s)"
        RESULTS[number] = passed
        with capsys.disabled():
            print("\n" + line)
    assert elapsed < limit, f"criterion {number} took {elapsed:.2f}s (limit {limit}s)"


def _cmd_tuple(c):
    return (c.i, c.eps, c.sigma, c.j, c.alpha, c.beta)


# --- 1. closed form for the highest part of derived generators ------------------------------

def random_commands(rng, per_pattern=6):
    out = []
    for eps in (0, 1):
        for sigma in (0, 1):
            while sum(1 for c in out if (c.eps, c.sigma) == (eps, sigma)) < per_pattern:
                c = Command(rng.randint(1, 4), eps, sigma, rng.randint(0, 4),
                            rng.randint(0 if eps else -1, 1), rng.randint(0 if sigma else -1, 1))
                if (c.i, c.alpha, c.beta) != (c.j, 0, 0) and c not in out:
                    out.append(c)
    return out


def test_criterion_1_closed_form(capsys):
    cmds = random_commands(random.Random(20240601))
    assert len(cmds) >= 20
    with criterion(1, "highest part of d1^s d2^t g matches the closed form", 5, capsys):
        checked = 0
        for c in cmds:
            g = compile_command(c)
            for s in range(6):
                for t in range(6):
                    expected = O.closed_form(*_cmd_tuple(c), s, t)
                    # independent expansion agrees with the closed form...
                    assert O.highest(O.theta(O.generator(*_cmd_tuple(c)), s, t)) == expected
                    # ...and so does the library
                    assert highest_part(apply_theta(g, (s, t))) == O.to_library(expected, B)
                    checked += 1
        assert checked == len(cmds) * 36


# --- 2. halting gives a verified certificate ------------------------------------------------

CERT_BUDGET = 1000


def halting_starts(name, bound=20):
    m = BUNDLED[name]
    cmds = [_cmd_tuple(c) for c in m.commands]
    for state in range(1, m.n + 1):
        for c1 in range(bound + 1):
            for c2 in range(bound + 1):
                status, _ = O.simulate(cmds, (state, c1, c2), CERT_BUDGET)
                if status == "halted":
                    yield Config(state, c1, c2)


def test_criterion_2_certificates(capsys):
    expected = {name: set(halting_starts(name)) for name in ACYCLIC}
    assert sum(1 for starts in expected.values() if starts) >= 3
    with criterion(2, "every halting start yields a certificate that verifies", 10, capsys):
        total = 0
        for name in ACYCLIC:
            m = BUNDLED[name]
            sys = compile_machine(m)
            for state in range(1, m.n + 1):
                for c1 in range(21):
                    for c2 in range(21):
                        start = Config(state, c1, c2)
                        got = certify(m, start, CERT_BUDGET)
                        assert isinstance(got, Certificate) == (start in expected[name]), (name, start)
                        if not isinstance(got, Certificate):
                            continue
                        assert verify_certificate(sys, got).accepted
                        telescoped = sys.alg.zero()
                        for s in got.steps:
                            telescoped = telescoped + apply_theta(
                                sys.generator(s.command.key), (s.w.i, s.w.j)
                            ).mul_monomial(s.w.prefactor())
                        assert telescoped == got.target == membership_target(start, got.steps[-1].dst)
                        total += 1
        assert total >= 500


# --- 3. the bounded oracle recovers halting and refutes non-halting ---------------------------

MAX_ORDER = 8


def member_targets():
    """Halting targets whose runs stay inside the oracle's derivative-order bound."""
    out = []
    for name in ACYCLIC:
        m = BUNDLED[name]
        for c1 in range(7):
            tr = run(m, Config(1, c1, 0), CERT_BUDGET)
            if tr.halted and max(max(c.c1, c.c2) for c in tr.configs) <= MAX_ORDER:
                out.append((name, Config(1, c1, 0), tr.final))
    return out


NON_HALTING = [
    ("inc_forever", Config(1, 0, 0), Config(0, 1, 0)),
    ("inc_forever", Config(1, 2, 0), Config(0, 1, 0)),
    ("even", Config(1, 3, 0), Config(0, 1, 0)),
]

@functools.lru_cache(maxsize=None)
def oracle_members():
    """Oracle results on the halting targets, shared between criteria 3 and 7."""
    out = []
    for name, start, halt in member_targets():
        sys = compile_machine(BUNDLED[name])
        target = membership_target(start, halt)
        out.append((name, target, oracle_member(OracleProblem(target, tuple(sys.polys()), max_order=MAX_ORDER))))
    return tuple(out)


def test_criterion_3_oracle(capsys):
    targets = member_targets()
    assert {name for name, _, _ in targets} >= {"dec1", "even", "transfer"}
    for name, start, _ in NON_HALTING:
        assert not run(BUNDLED[name], start, CERT_BUDGET).halted
    with criterion(3, "oracle: W-family members for halting, refutations for non-halting", 60, capsys):
        for name, target, res in oracle_members():
            sys = compile_machine(BUNDLED[name])
            assert res.verdict is Verdict.MEMBER, (name, str(target))
            assert solution_in_w(res, sys.polys())
            assert combine(B, sys.polys(), res.coefficients) == target
        certified = 0
        for name, start, halt in NON_HALTING:
            sys = compile_machine(BUNDLED[name])
            res = oracle_member(OracleProblem(membership_target(start, halt), tuple(sys.polys()),
                                              max_order=MAX_ORDER))
            assert res.verdict in (Verdict.CERTIFIED_NON_MEMBER, Verdict.NOT_MEMBER_WITHIN_BOUNDS)
            if res.verdict is Verdict.CERTIFIED_NON_MEMBER:
                assert "grading obstruction" in res.reason
                certified += 1
        assert certified >= 1


# --- 4. independence of leading elements ------------------------------------------------------

def test_criterion_4_independence(capsys):
    from diffideal.membership import independence_check

    with criterion(4, "acyclic machines full rank, cyclic machines dependent", 60, capsys):
        for name in ACYCLIC:
            rep = independence_check(compile_machine(BUNDLED[name]), 5)
            assert rep.count >= 100 and rep.full_rank, name
        for name in CYCLIC:
            sys = compile_machine(BUNDLED[name])
            rep = independence_check(sys, 5)
            assert not rep.full_rank and rep.dependence, name
            # the witness only uses commands on the cycle
            assert {cmd.key for _, cmd, _ in rep.dependence} <= set(sys.machine.table)


# --- 5. characteristic two ---------------------------------------------------------------------

def test_criterion_5_characteristic_two(capsys):
    b2 = Algebra(GF2, Mode.B)
    rng = random.Random(5)
    cmds = random_commands(rng, per_pattern=5)
    with criterion(5, "GF(2) accepts both orientations, QQ only the forward one", 5, capsys):
        from diffideal.encoder import config_element

        for c in cmds:
            for _ in range(4):
                c1 = 0 if c.eps else rng.randint(1, 6)
                c2 = 0 if c.sigma else rng.randint(1, 6)
                src = Config(c.i, c1, c2)
                dst = step(Machine(4, (c,)), src)
                u, v = config_element(src), config_element(dst)
                assert step_correspondence(c, u, v) is not None
                assert step_correspondence(c, v, u) is None
                u2, v2 = config_element(src, b2), config_element(dst, b2)
                assert step_correspondence(c, u2, v2) is not None
                assert step_correspondence(c, v2, u2) is not None


# --- 6. the test elements f_0, f_1 -------------------------------------------------------------

def test_criterion_6_test_elements(capsys):
    m = BUNDLED["even"]
    sys = compile_machine(m)
    with criterion(6, "test elements established by certificate and oracle; no false member", 120, capsys):
        for m_index, start in ((0, Config(1, 2, 0)), (1, Config(1, 4, 0))):
            f = test_element(m_index)
            cert = certify(m, start, CERT_BUDGET)
            assert isinstance(cert, Certificate) and cert.target == f
            assert verify_certificate(sys, cert).accepted
            res = oracle_member(OracleProblem(f, tuple(sys.polys()), max_order=MAX_ORDER))
            assert res.verdict is Verdict.MEMBER and combine(B, sys.polys(), res.coefficients) == f
            d = decide_membership(sys, f, max_order=MAX_ORDER)
            assert d.verdict is Verdict.MEMBER and d.certificate is not None
        for start in (Config(1, 3, 0), Config(1, 5, 0)):
            assert not run(m, start, CERT_BUDGET).halted
            d = decide_membership(sys, membership_target(start, Config(0, 1, 0)),
                                  max_steps=CERT_BUDGET, max_order=MAX_ORDER)
            assert d.verdict in (Verdict.UNKNOWN, Verdict.NOT_MEMBER_WITHIN_BOUNDS)


# --- 7. lifting ideal witnesses into the subalgebra -------------------------------------------

def test_criterion_7_subalgebra_round_trip(capsys):
    members = [(name, target, res) for name, target, res in oracle_members() if res.verdict is Verdict.MEMBER]
    assert members
    with criterion(7, "members lift into S_I and verify; non-members refuted alike", 60, capsys):
        for name, target, res in members:
            enc = compile_machine(BUNDLED[name])
            sub = from_encoded(enc)
            f = lift_from_quotient(target, A)
            witness = witness_from_quotient(enc, res, f)
            expr = lift_to_subalgebra(sub, witness, f)
            assert verify_lift(sub, expr, f).accepted, (name, str(target))
        for name, start, halt in NON_HALTING:
            enc = compile_machine(BUNDLED[name])
            target = membership_target(start, halt)
            ideal = oracle_member(OracleProblem(target, tuple(enc.polys()), max_order=MAX_ORDER))
            got = refute_tf_membership_bounded(from_encoded(enc), lift_from_quotient(target, A),
                                               max_order=MAX_ORDER)
            assert got.verdict is ideal.verdict and got.expression is None


# --- 8. kernel properties and byte-exact formats -------------------------------------------------

def random_var(rng, mode):
    kind = rng.choice(["x1", "x2", "q"])
    i, j = rng.randint(0, 3), rng.randint(0, 3)
    if kind == "x1":
        return DiffVar(X1, DerivOp((i, 0 if mode is Mode.B else j)))
    if kind == "x2":
        return DiffVar(X2, DerivOp((0 if mode is Mode.B else i, j)))
    return DiffVar(q(rng.randint(0, 2)), DerivOp((i, j)))


def random_mono(rng, mode, max_factors=3):
    return Monomial([(random_var(rng, mode), rng.randint(1, 2)) for _ in range(rng.randint(0, max_factors))])


def random_poly(rng, alg, max_terms=4):
    p = alg.zero()
    for _ in range(rng.randint(0, max_terms)):
        c = Fraction(rng.randint(-5, 5), rng.randint(1, 4))
        p = p + alg.monomial(random_mono(rng, alg.mode), c)
    return p


def test_criterion_8_kernel_and_formats(capsys):
    rng = random.Random(8)
    with criterion(8, "1000 Leibniz/commutation checks and byte-exact round trips", 10, capsys):
        checks = 0
        for _ in range(250):
            alg = rng.choice([A, B])
            a, b = random_poly(rng, alg, 3), random_poly(rng, alg, 3)
            k = rng.randint(1, 2)
            theta = (rng.randint(0, 2), rng.randint(0, 2))
            assert derive(a * b, k) == derive(a, k) * b + a * derive(b, k)
            # the multinomial route agrees with repeated single steps
            assert apply_theta(a, (2, 1)) == derive(derive(derive(a, 1), 1), 2)
            assert derive(derive(a, 1), 2) == derive(derive(a, 2), 1)
            assert apply_theta(apply_theta(a, theta), (1, 1)) == apply_theta(apply_theta(a, (1, 1)), theta)
            checks += 4
        assert checks >= 1000

        for _ in range(200):
            for alg in (A, B):
                p = random_poly(rng, alg)
                text = str(p)
                assert alg.parse(text) == p and str(alg.parse(text)) == text
            op = EnvOperator.identity(A)
            for _ in range(rng.randint(0, 3)):
                op = op + EnvOperator.term(A, random_mono(rng, Mode.A, 2),
                                           (rng.randint(0, 2), rng.randint(0, 2)), rng.randint(-3, 3))
            text = format_operator(op)
            assert format_operator(parse_operator(text, A)) == text

        for name, m in sorted(BUNDLED.items()):
            text = machine_to_json(m)
            assert machine_to_json(machine_from_json(text)) == text
            enc = compile_machine(m)
            gen_text = format_generator_file(enc)
            assert format_generator_file(parse_generator_file(gen_text)) == gen_text
            if name in ACYCLIC and name != "inc_forever":
                cert = certify(m, Config(1, 4, 0), CERT_BUDGET)
                cert_text = cert.to_json()
                assert certificate_from_dict(json.loads(cert_text)).to_json() == cert_text
        enc = compile_machine(BUNDLED["dec1"])
        sub = from_encoded(enc)
        target = membership_target(Config(1, 3, 0), Config(0, 0, 0))
        res = oracle_member(OracleProblem(target, tuple(enc.polys()), max_order=4))
        f = lift_from_quotient(target, A)
        expr = lift_to_subalgebra(sub, witness_from_quotient(enc, res, f), f)
        expr_text = json.dumps(expr_to_json(expr), sort_keys=True)
        assert json.dumps(expr_to_json(expr_from_json(json.loads(expr_text))), sort_keys=True) == expr_text


def test_summary(capsys):
    if len(RESULTS) < 8:
        pytest.skip("only part of the acceptance suite ran")
    with capsys.disabled():
        print("\n" + " ".join(f"[{n}:{'PASS' if ok else 'FAIL'}]" for n, ok in sorted(RESULTS.items())))
    assert len(RESULTS) == 8 and all(RESULTS.values())
