"""Ideal membership as subalgebra membership.

Given ideal generators ``f_1..f_r`` over the variables of ``A``, adjoin one
more differential variable ``t`` and let ``S_I`` be the differential
subalgebra generated by the variables, the first derivatives ``d_i(t)`` and
the products ``t * f_k``.  Then ``f`` is in the ideal iff ``t * f`` is in
``S_I``.  The forward direction is constructive: an ideal witness
``f = sum lam * m * theta(f_k)`` turns into an explicit expression tree over
the generators of ``S_I``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from math import comb, prod
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

from .algebra import (
    Algebra,
    Base,
    DerivOp,
    DiffPoly,
    Inhomogeneous,
    Mode,
    Monomial,
    T,
    X1,
    X2,
    apply_theta,
    base,
)
from .encoder import EncodedSystem, forbidden_var, to_quotient
from .errors import ValidationError
from .membership import (
    CheckResult,
    OracleProblem,
    OracleResult,
    Verdict,
    oracle_member,
)

# (lambda, multiplier monomial, derivative operator, 0-based generator index)
WitnessTerm = Tuple[object, Monomial, DerivOp, int]


def deg_t(a: DiffPoly):
    """Degree in ``t``; :class:`Inhomogeneous` if mixed, ``None`` for the zero polynomial."""
    if not a:
        return None
    degrees = {m.t_degree() for m in a.terms}
    if len(degrees) == 1:
        return degrees.pop()
    return Inhomogeneous(max(degrees))


# --- expression trees ------------------------------------------------------------------

@dataclass(frozen=True)
class Gen:
    """``theta`` applied to the named generator of ``S_I``."""

    name: str
    theta: DerivOp


@dataclass(frozen=True)
class Const:
    value: object


@dataclass(frozen=True)
class Add:
    args: Tuple["Expr", ...]


@dataclass(frozen=True)
class Mul:
    args: Tuple["Expr", ...]


@dataclass(frozen=True)
class Scale:
    coeff: object
    arg: "Expr"


Expr = Union[Gen, Const, Add, Mul, Scale]


def expr_to_json(e: Expr):
    if isinstance(e, Gen):
        return {"op": "gen", "name": e.name, "theta": list(e.theta)}
    if isinstance(e, Const):
        return {"op": "const", "value": str(e.value)}
    if isinstance(e, Scale):
        return {"op": "scale", "coeff": str(e.coeff), "arg": expr_to_json(e.arg)}
    kind = "add" if isinstance(e, Add) else "mul"
    return {"op": kind, "args": [expr_to_json(a) for a in e.args]}


def expr_from_json(d) -> Expr:
    try:
        op = d["op"]
        if op == "gen":
            return Gen(d["name"], DerivOp(d["theta"]))
        if op == "const":
            return Const(Fraction(d["value"]))
        if op == "scale":
            return Scale(Fraction(d["coeff"]), expr_from_json(d["arg"]))
        if op in ("add", "mul"):
            args = tuple(expr_from_json(a) for a in d["args"])
            return Add(args) if op == "add" else Mul(args)
    except (KeyError, TypeError, ValueError) as e:
        raise ValidationError(f"malformed expression node {d!r}: {e}") from None
    raise ValidationError(f"unknown expression op {op!r}")


def leaves(e: Expr) -> List[Gen]:
    if isinstance(e, Gen):
        return [e]
    if isinstance(e, Const):
        return []
    if isinstance(e, Scale):
        return leaves(e.arg)
    return [leaf for a in e.args for leaf in leaves(a)]


# --- the subalgebra system ----------------------------------------------------------------

@dataclass(frozen=True)
class SubalgebraSystem:
    alg: Algebra
    base_generators: Tuple[DiffPoly, ...]
    variables: Tuple[Base, ...]
    ideal_oracle: Optional[Callable[[DiffPoly], Tuple[OracleResult, List[WitnessTerm]]]] = field(
        default=None, compare=False, repr=False)

    def generators(self) -> Dict[str, DiffPoly]:
        alg = self.alg
        gens = {str(b): alg.var(b) for b in self.variables}
        for i in range(1, alg.nderiv + 1):
            gens[f"dt{i}"] = alg.var(T, DerivOp.unit(i, alg.nderiv))
        t = alg.var(T)
        for k, f in enumerate(self.base_generators, start=1):
            gens[f"tf{k}"] = t * f
        return gens

    def t_generator_names(self) -> List[str]:
        return [str(b) for b in self.variables] + [f"dt{i}" for i in range(1, self.alg.nderiv + 1)]

    def embed(self, f: DiffPoly) -> DiffPoly:
        """Move a t-free polynomial into this system's algebra."""
        if f.alg == self.alg:
            g = f
        else:
            g = DiffPoly(self.alg, {m: self.alg.ring(c) for m, c in f.terms.items()})
        if any(b.group == 2 for b in g.bases()):
            raise ValidationError("expected a polynomial without t")
        return g


def build_system(base_generators: Sequence[DiffPoly], variables: Sequence[Union[str, Base]] = None,
                 ideal_oracle=None) -> SubalgebraSystem:
    if not base_generators and variables is None:
        raise ValidationError("need generators or an explicit variable list")
    src = base_generators[0].alg if base_generators else None
    ring = src.ring if src else None
    nderiv = src.nderiv if src else 2
    if src is not None and src.mode is Mode.B:
        raise ValidationError("base generators must live in a free algebra (A- or S-mode)")
    alg = Algebra(ring, Mode.S, nderiv) if ring else Algebra(mode=Mode.S, nderiv=nderiv)
    gens = []
    found = set()
    for f in base_generators:
        g = DiffPoly(alg, {m: c for m, c in f.terms.items()})
        if any(b.group == 2 for b in g.bases()):
            raise ValidationError("base generators must not involve t")
        found |= g.bases()
        gens.append(g)
    if variables is None:
        vars_ = tuple(sorted(found))
    else:
        vars_ = tuple(sorted(base(v) if isinstance(v, str) else v for v in variables))
        missing = found - set(vars_)
        if missing:
            raise ValidationError(f"generators use variables outside the list: {sorted(map(str, missing))}")
    return SubalgebraSystem(alg, tuple(gens), vars_, ideal_oracle)


def evaluate(expr: Expr, sys: SubalgebraSystem, _gens: Dict[str, DiffPoly] = None) -> DiffPoly:
    gens = _gens if _gens is not None else sys.generators()
    alg = sys.alg
    if isinstance(expr, Gen):
        if expr.name not in gens:
            raise ValidationError(f"unknown generator {expr.name!r}")
        return apply_theta(gens[expr.name], expr.theta)
    if isinstance(expr, Const):
        return alg.const(expr.value)
    if isinstance(expr, Scale):
        return evaluate(expr.arg, sys, gens).scale(expr.coeff)
    if isinstance(expr, Add):
        total = alg.zero()
        for a in expr.args:
            total = total + evaluate(a, sys, gens)
        return total
    if isinstance(expr, Mul):
        out = alg.one()
        for a in expr.args:
            out = out * evaluate(a, sys, gens)
        return out
    raise ValidationError(f"not an expression: {expr!r}")


def monomial_expr(m: Monomial) -> Expr:
    """A monomial in the variables as a product of (derived) variable generators."""
    factors = tuple(Gen(str(v.base), v.theta) for v, e in m for _ in range(e))
    if not factors:
        return Const(1)
    return factors[0] if len(factors) == 1 else Mul(factors)


def poly_expr(p: DiffPoly) -> Expr:
    terms = []
    for m, c in p:
        body = monomial_expr(m)
        terms.append(body if c == 1 else Scale(c, body))
    if not terms:
        return Const(0)
    return terms[0] if len(terms) == 1 else Add(tuple(terms))


def _t_power(mu: DerivOp) -> Gen:
    # mu != 0, so t^mu = (mu / d_i)(d_i t) for the first i with mu_i > 0
    i = next(k for k, e in enumerate(mu) if e) + 1
    return Gen(f"dt{i}", mu.quotient(DerivOp.unit(i, len(mu))))


def theta_tf_decompose(theta: DerivOp, f: DiffPoly, sys: SubalgebraSystem) -> Tuple[DiffPoly, Expr]:
    """Split ``theta(t f)`` into ``t * theta(f)`` plus an explicit element of ``T``."""
    f = sys.embed(f)
    alg = sys.alg
    principal = alg.var(T) * apply_theta(f, theta)
    parts = []
    for mu in product(*(range(k + 1) for k in theta)):
        mu = DerivOp(mu)
        if mu.is_identity():
            continue
        rest = apply_theta(f, theta.quotient(mu))
        if not rest:
            continue
        weight = prod(comb(n, k) for n, k in zip(theta, mu))
        body = Mul((_t_power(mu), poly_expr(rest)))
        parts.append(body if weight == 1 else Scale(weight, body))
    if not parts:
        return principal, Const(0)
    return principal, parts[0] if len(parts) == 1 else Add(tuple(parts))


def expand_witness(sys: SubalgebraSystem, witness: Sequence[WitnessTerm]) -> DiffPoly:
    total = sys.alg.zero()
    for lam, m, th, idx in witness:
        total = total + apply_theta(sys.base_generators[idx], th).mul_monomial(m, lam)
    return total


def lift_to_subalgebra(sys: SubalgebraSystem, witness: Sequence[WitnessTerm], f: DiffPoly = None) -> Expr:
    """Turn ``f = sum lam * m * theta(f_k)`` into an expression for ``t * f`` over ``S_I``."""
    for lam, m, th, idx in witness:
        if not 0 <= idx < len(sys.base_generators):
            raise ValidationError(f"witness refers to generator {idx}, have {len(sys.base_generators)}")
        if any(v.base.group == 2 for v, _ in m):
            raise ValidationError("witness multipliers must not involve t")
        stray = {v.base for v, _ in m} - set(sys.variables)
        if stray:
            raise ValidationError(f"witness multiplier uses {sorted(map(str, stray))}, not variables of the system")
    if f is not None and expand_witness(sys, witness) != sys.embed(f):
        raise ValidationError("witness does not reproduce f")
    terms = []
    for lam, m, th, idx in witness:
        mult = monomial_expr(m)
        main = Gen(f"tf{idx + 1}", th)
        main = main if not m else Mul((mult, main))
        terms.append(main if lam == 1 else Scale(lam, main))
        _, rem = theta_tf_decompose(th, sys.base_generators[idx], sys)
        if rem != Const(0):
            corr = rem if not m else Mul((mult, rem))
            terms.append(Scale(-lam, corr))
    if not terms:
        return Const(0)
    return terms[0] if len(terms) == 1 else Add(tuple(terms))


def verify_lift(sys: SubalgebraSystem, expr: Expr, f: DiffPoly) -> CheckResult:
    """Evaluate ``expr`` over the generators of ``S_I`` and compare with ``t * f``."""
    gens = sys.generators()
    for leaf in leaves(expr):
        if leaf.name not in gens:
            return CheckResult(False, f"leaf {leaf.name!r} is not a generator of the subalgebra")
        if len(leaf.theta) != sys.alg.nderiv:
            return CheckResult(False, f"leaf {leaf.name!r} has a malformed derivative operator")
    try:
        value = evaluate(expr, sys, gens)
        want = sys.alg.var(T) * sys.embed(f)
    except ValidationError as e:
        return CheckResult(False, str(e))
    if value != want:
        return CheckResult(False, "expression does not evaluate to t*f")
    return CheckResult(True)


@dataclass
class TfResult:
    verdict: Verdict
    expression: Optional[Expr] = None
    oracle: Optional[OracleResult] = None
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "reason": self.reason,
            "oracle": None if self.oracle is None else self.oracle.to_dict(),
        }


def _generic_oracle(sys: SubalgebraSystem, f: DiffPoly, **bounds):
    res = oracle_member(OracleProblem(f, sys.base_generators, **bounds))
    witness = [(lam, v, th, idx) for lam, idx, v, th in res.coefficients]
    return res, witness


def refute_tf_membership_bounded(sys: SubalgebraSystem, f: DiffPoly, **bounds) -> TfResult:
    """Settle ``t f in S_I`` as far as the bounded ideal oracle on ``f`` allows.

    A member comes back with a verified expression; a grading obstruction is
    a certified refutation; anything else is a refutation within bounds only.
    """
    f = sys.embed(f)
    if not f:
        return TfResult(Verdict.MEMBER, Const(0), None, "f = 0")
    if sys.ideal_oracle is not None:
        res, witness = sys.ideal_oracle(f, **bounds)
    else:
        res, witness = _generic_oracle(sys, f, **bounds)
    if res.verdict is Verdict.MEMBER:
        expr = lift_to_subalgebra(sys, witness, f)
        check = verify_lift(sys, expr, f)
        assert check.accepted, check.reason
        return TfResult(Verdict.MEMBER, expr, res, "ideal witness lifted and verified")
    if res.verdict is Verdict.CERTIFIED_NON_MEMBER:
        return TfResult(res.verdict, None, res, f"t*f not in S_I: f not in I ({res.reason})")
    return TfResult(res.verdict, None, res,
                    f"t*f not in S_I within bounds {res.bounds}: no ideal witness for f")


# --- encoded machines ---------------------------------------------------------------------

def witness_from_quotient(enc: EncodedSystem, result: OracleResult, f: DiffPoly) -> List[WitnessTerm]:
    """Translate a witness found modulo J into one over the free algebra.

    Generators are ordered as in :meth:`EncodedSystem.a_mode_generators`:
    the command generators, then ``d1(x2)`` and ``d2(x1)``.
    """
    a_alg = Algebra(enc.alg.ring, Mode.A)
    a_gens = enc.a_mode_generators()
    n = len(enc.generators)
    f = DiffPoly(a_alg, dict(f.terms))
    witness: List[WitnessTerm] = [(lam, v, th, idx) for lam, idx, v, th in result.coefficients]
    excess = -f
    for lam, v, th, idx in witness:
        excess = excess + apply_theta(a_gens[idx], th).mul_monomial(v, lam)
    for mono, c in excess:
        bad = next((var for var, _ in mono if forbidden_var(var)), None)
        if bad is None:
            raise ValidationError("quotient witness does not lift: residue outside J")
        rest = mono.quotient(Monomial([(bad, 1)]))
        if bad.base == X2:
            witness.append((-c, rest, bad.theta.quotient(DerivOp((1, 0))), n))
        else:
            witness.append((-c, rest, bad.theta.quotient(DerivOp((0, 1))), n + 1))
    return witness


def from_encoded(enc: EncodedSystem) -> SubalgebraSystem:
    """The subalgebra system of the encoded ideal ``I + J`` over ``x1, x2, q0..qn``."""
    a_gens = enc.a_mode_generators()
    variables = [X1, X2] + [Base(1, k) for k in range(enc.machine.n + 1)]

    def oracle(f: DiffPoly, **bounds):
        a_alg = Algebra(enc.alg.ring, Mode.A)
        f_a = DiffPoly(a_alg, dict(f.terms))
        f_b = to_quotient(f_a, enc.alg)
        res = oracle_member(OracleProblem(f_b, tuple(enc.polys()), **bounds))
        if res.verdict is not Verdict.MEMBER:
            return res, []
        return res, witness_from_quotient(enc, res, f_a)

    return build_system(a_gens, variables, oracle)
