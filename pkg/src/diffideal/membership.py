"""Membership in the encoded differential ideal.

Two independent routes are provided:

* the simulation route: run the machine and emit a telescoping certificate
  (one operator application per step), checked by :func:`verify_certificate`;
* the algebra route: :func:`oracle_member` searches a bounded family of
  operators, applies them to the generators and solves the resulting exact
  linear system.

Neither route is a decision procedure; bounded failure is reported as such.
"""

from __future__ import annotations

import enum
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations_with_replacement, product
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .algebra import (
    X1,
    X2,
    Algebra,
    DerivOp,
    DiffPoly,
    DiffVar,
    Mode,
    Monomial,
    ONE_MONO,
    apply_theta,
    graded_parts,
    highest_part,
    is_homogeneous,
)
from .encoder import EncodedSystem, compile_command, config_element, config_of
from .enveloping import VOperator, WOperator, apply, w_to_operator
from .errors import ResourceError, UsageError, ValidationError
from .linalg import SparseEchelon
from .minsky import Command, Config, Machine, Outcome, run, step
from .rings import ring_from_name


class Verdict(str, enum.Enum):
    MEMBER = "member"
    CERTIFIED_NON_MEMBER = "certified-non-member"
    NOT_MEMBER_WITHIN_BOUNDS = "not-member-within-bounds"
    UNKNOWN = "unknown"


# --- certificates -----------------------------------------------------------------

@dataclass(frozen=True)
class CertStep:
    w: WOperator
    command: Command
    src: Config
    dst: Config

    def to_dict(self) -> dict:
        return {"w": self.w.to_dict(), "command": self.command.to_dict(),
                "from": list(self.src), "to": list(self.dst)}


@dataclass(frozen=True)
class Certificate:
    steps: Tuple[CertStep, ...]
    target: DiffPoly

    def to_dict(self) -> dict:
        return {
            "format": "diffideal-certificate-v1",
            "field": str(self.target.alg.ring),
            "target": str(self.target),
            "steps": [s.to_dict() for s in self.steps],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"


@dataclass(frozen=True)
class NoCertificate:
    """The run did not halt within budget (or got stuck / cycled); membership unknown."""

    status: Outcome
    steps: int


def certificate_from_dict(data: dict, alg: Optional[Algebra] = None) -> Certificate:
    if alg is None:
        alg = Algebra(ring_from_name(data.get("field", "QQ")), Mode.B)
    try:
        target = alg.parse(data["target"])
        raw_steps = data["steps"]
    except KeyError as e:
        raise ValidationError(f"certificate is missing {e}") from None
    steps = []
    for k, s in enumerate(raw_steps):
        try:
            w = WOperator(**{key: int(s["w"][key]) for key in ("eps", "sigma", "i", "j")})
            cmd = Command.from_dict(s["command"])
            src, dst = Config(*map(int, s["from"])), Config(*map(int, s["to"]))
        except (KeyError, TypeError, ValueError) as e:
            err = ValidationError(f"step {k}: {e}")
            err.step = k
            raise err from None
        steps.append(CertStep(w, cmd, src, dst))
    return Certificate(tuple(steps), target)


def step_operator(c: Config) -> WOperator:
    """The W-family operator whose application to the firing generator is ``u(c) - u(next)``."""
    eps, sigma = c.observed
    return WOperator(eps, sigma, 0 if eps else c.c1 - 1, 0 if sigma else c.c2 - 1)


def certify(m: Machine, start: Config, max_steps: int, alg: Algebra = None) -> Union[Certificate, NoCertificate]:
    if start.state < 1:
        raise UsageError("certify needs a start configuration in a non-terminal state")
    if alg is None:
        from .encoder import B_QQ
        alg = B_QQ
    tr = run(m, start, max_steps)
    if not tr.halted:
        return NoCertificate(tr.status, tr.steps)
    steps = tuple(
        CertStep(step_operator(src), cmd, src, dst)
        for src, dst, cmd in zip(tr.configs, tr.configs[1:], tr.commands)
    )
    target = config_element(start, alg) - config_element(tr.final, alg)
    return Certificate(steps, target)


@dataclass(frozen=True)
class CheckResult:
    accepted: bool
    reason: str = "ok"
    step: Optional[int] = None

    def to_dict(self) -> dict:
        return {"status": "accept" if self.accepted else "reject", "reason": self.reason, "step": self.step}


def verify_certificate(sys: EncodedSystem, cert: Certificate) -> CheckResult:
    """Recompute every step symbolically and compare the telescoped sum to the target."""
    alg = sys.alg
    if cert.target.alg != alg:
        return CheckResult(False, f"target lives in {cert.target.alg}, system in {alg}")
    total = alg.zero()
    for k, st in enumerate(cert.steps):
        cmd = st.command
        if sys.machine.table.get(cmd.key) != cmd:
            return CheckResult(False, f"command {cmd} is not part of the machine", k)
        if (st.src.state,) + st.src.observed != cmd.key:
            return CheckResult(False, f"command {cmd} does not fire at {st.src}", k)
        if k and st.src != cert.steps[k - 1].dst:
            return CheckResult(False, f"chain broken: {cert.steps[k - 1].dst} then {st.src}", k)
        if step(sys.machine, st.src) != st.dst:
            return CheckResult(False, f"{st.src} does not step to {st.dst}", k)
        if (st.w.eps, st.w.sigma) != (cmd.eps, cmd.sigma):
            return CheckResult(False, "w is not in the W family of the command", k)
        contribution = apply(w_to_operator(st.w, alg), sys.generator(cmd.key))
        expected = config_element(st.src, alg) - config_element(st.dst, alg)
        if contribution != expected:
            return CheckResult(False, "w applied to the generator is not u(from) - u(to)", k)
        total = total + contribution
    if cert.steps and cert.steps[-1].dst.state != 0:
        return CheckResult(False, "chain does not end in the terminal state", len(cert.steps) - 1)
    if total != cert.target:
        return CheckResult(False, "telescoped sum differs from the target")
    return CheckResult(True)


# --- the bounded oracle ------------------------------------------------------------

@dataclass(frozen=True)
class OracleProblem:
    target: DiffPoly
    generators: Tuple[DiffPoly, ...]
    max_order: int = 4
    max_xdeg: int = 1
    strict: bool = False
    max_mult_deg: int = 1
    cap: int = 250_000
    jobs: int = 1

    def bounds(self) -> dict:
        return {"max_order": self.max_order, "max_xdeg": self.max_xdeg,
                "strict": self.strict, "max_mult_deg": self.max_mult_deg}


Term = Tuple[object, int, Monomial, DerivOp]


@dataclass
class OracleResult:
    verdict: Verdict
    # (lambda, generator index, multiplier monomial, derivative operator)
    coefficients: List[Term] = field(default_factory=list)
    bounds: dict = field(default_factory=dict)
    reason: str = ""
    operators: int = 0

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "reason": self.reason,
            "bounds": self.bounds,
            "operators_searched": self.operators,
            "coefficients": [
                {"coeff": _fmt(c), "generator": g, "multiplier": str(v), "theta": list(th)}
                for c, g, v, th in self.coefficients
            ],
        }


def _fmt(c) -> str:
    return str(c)


def _key_minus(big, small) -> Optional[Dict[str, int]]:
    out = dict(big)
    for label, n in small:
        left = out.get(label, 0) - n
        if left < 0:
            return None
        if left:
            out[label] = left
        else:
            out.pop(label, None)
    return out


def _label(b) -> str:
    return "q" if b.group == 1 else str(b)


def grading_obstruction(component: DiffPoly, generators: Sequence[DiffPoly]) -> Optional[str]:
    """A reason why a group-homogeneous component cannot lie in the ideal, or ``None``.

    Requires every generator to be homogeneous in each variable group.  The
    component of an ideal element can only contain variables of the used
    generators plus variables of the groups a multiplier must supply.
    """
    if not component:
        return None
    key = next(iter(component.terms)).group_key()
    reachable = set()
    usable = False
    for g in generators:
        if not g:
            continue
        rest = _key_minus(key, next(iter(g.terms)).group_key())
        if rest is None:
            continue
        usable = True
        reachable |= {str(b) for b in g.bases()}
        reachable |= {f"group:{label}" for label in rest}
    if not usable:
        return "no generator fits the variable-group degrees of the target"
    for mono in component.terms:
        for b in mono.bases():
            if str(b) not in reachable and f"group:{_label(b)}" not in reachable:
                return f"{b} absent: no generator mentions it and no multiplier can supply it"
    return None


def _multiplier_vars(alg: Algebra, bases, max_xdeg: int) -> Dict[str, List[DiffVar]]:
    """Candidate multiplier variables, grouped by label, with orders bounded by ``max_xdeg``."""
    out: Dict[str, List[DiffVar]] = {}
    for b in sorted(bases):
        if alg.mode is Mode.B and b == X1:
            thetas = [DerivOp((a, 0)) for a in range(max_xdeg + 1)]
        elif alg.mode is Mode.B and b == X2:
            thetas = [DerivOp((0, a)) for a in range(max_xdeg + 1)]
        else:
            thetas = [DerivOp(t) for t in product(range(max_xdeg + 1), repeat=alg.nderiv)]
        out.setdefault(_label(b), []).extend(DiffVar(b, th) for th in thetas)
    return out


def _monomials_by_key(vars_by_label: Dict[str, List[DiffVar]], key: Dict[str, int]) -> Optional[List[Monomial]]:
    choices = []
    for label, n in sorted(key.items()):
        pool = vars_by_label.get(label)
        if not pool:
            return None
        choices.append([Monomial((v, 1) for v in combo) for combo in combinations_with_replacement(pool, n)])
    out = []
    for parts in product(*choices):
        m = ONE_MONO
        for p in parts:
            m = m.mul(p)
        out.append(m)
    return out


def _monomials_by_degree(pool: List[DiffVar], degrees: Iterable[int]) -> List[Monomial]:
    out = []
    for d in degrees:
        out.extend(Monomial((v, 1) for v in combo) for combo in combinations_with_replacement(pool, d))
    return out


def _columns(task):
    g, theta, multipliers = task
    tg = apply_theta(g, theta)
    if not tg:
        return []
    return [(v, tg.mul_monomial(v)) for v in multipliers]


def _grading(p: OracleProblem) -> str:
    gens = [g for g in p.generators if g]
    if all(is_homogeneous(g, "groups") for g in gens):
        return "groups"
    if all(is_homogeneous(g, "deg") for g in gens):
        return "deg"
    return "none"


def oracle_member(p: OracleProblem) -> OracleResult:
    """Bounded search for ``target = sum lam * v * theta(g)``."""
    target = p.target
    alg = target.alg
    for g in p.generators:
        if g.alg != alg:
            raise UsageError("oracle generators and target live in different algebras")
    bounds = p.bounds()
    if not target:
        return OracleResult(Verdict.MEMBER, [], bounds, "zero target")
    grading = _grading(p)
    comps = list(graded_parts(target, grading).values()) if grading != "none" else [target]
    if grading == "groups":
        for comp in comps:
            why = grading_obstruction(comp, p.generators)
            if why:
                return OracleResult(Verdict.CERTIFIED_NON_MEMBER, [], bounds, f"grading obstruction: {why}")

    bases = set(target.bases())
    for g in p.generators:
        bases |= g.bases()
    pool_by_label = _multiplier_vars(alg, bases, p.max_xdeg)
    pool = [v for vs in pool_by_label.values() for v in vs]
    thetas = [DerivOp(t) for t in product(range(p.max_order + 1), repeat=alg.nderiv)]

    coefficients: List[Term] = []
    searched = 0
    for comp in comps:
        tasks = []
        size = 0
        for idx, g in enumerate(p.generators):
            if not g:
                continue
            gmono = next(iter(g.terms))
            if grading == "groups" and not p.strict:
                rest = _key_minus(next(iter(comp.terms)).group_key(), gmono.group_key())
                mults = None if rest is None else _monomials_by_key(pool_by_label, rest)
            elif grading in ("groups", "deg"):
                d = next(iter(comp.terms)).degree() - gmono.degree()
                mults = _monomials_by_degree(pool, [d]) if d >= 0 else None
            else:
                mults = _monomials_by_degree(pool, range(p.max_mult_deg + 1))
            if not mults:
                continue
            size += len(mults) * len(thetas)
            if size > p.cap:
                raise ResourceError(
                    f"oracle search space exceeds cap {p.cap} (>= {size} operators at {bounds}); "
                    "lower max_order/max_xdeg or raise the cap")
            tasks.extend((idx, th, mults) for th in thetas)
        searched += size
        ech = SparseEchelon(alg.ring)
        work = [(p.generators[idx], th, mults) for idx, th, mults in tasks]
        if p.jobs > 1 and len(work) > 1:
            with ProcessPoolExecutor(max_workers=p.jobs) as pool_exec:
                results = list(pool_exec.map(_columns, work, chunksize=max(1, len(work) // (4 * p.jobs))))
        else:
            results = map(_columns, work)
        for (idx, th, _), cols in zip(tasks, results):
            for v, col in cols:
                if col:
                    ech.add(col.terms, (idx, v, th))
        sol = ech.solve(comp.terms)
        if sol is None:
            return OracleResult(Verdict.NOT_MEMBER_WITHIN_BOUNDS, [], bounds,
                                "no combination within bounds", searched)
        for (idx, v, th), lam in sorted(sol.items(), key=lambda kv: (kv[0][0], kv[0][2], kv[0][1])):
            if alg.ring.kind == "ZZ" and getattr(lam, "denominator", 1) != 1:
                raise ResourceError("only a non-integral combination was found over ZZ; rerun over QQ")
            coefficients.append((alg.ring(lam), idx, v, th))
    check = combine(alg, p.generators, coefficients)
    assert check == target, "oracle solution failed re-expansion"
    return OracleResult(Verdict.MEMBER, coefficients, bounds, "exact combination found", searched)


def combine(alg: Algebra, generators: Sequence[DiffPoly], terms: Iterable[Term]) -> DiffPoly:
    total = alg.zero()
    for lam, idx, v, th in terms:
        total = total + apply_theta(generators[idx], th).mul_monomial(v, lam)
    return total


def in_w_family(g: DiffPoly, v: Monomial, theta: DerivOp) -> bool:
    """Whether ``v * theta`` is the W-family operator matching generator ``g``."""
    xs = dict(next(iter(g.terms)).x_part())
    ident = DerivOp.identity(2)
    eps = xs.get(DiffVar(X1, ident), 0)
    sigma = xs.get(DiffVar(X2, ident), 0)
    try:
        w = WOperator(eps, sigma, theta[0], theta[1])
    except ValidationError:
        return False
    return w.prefactor() == v


def solution_in_w(result: OracleResult, generators: Sequence[DiffPoly]) -> bool:
    return all(in_w_family(generators[idx], v, th) for _, idx, v, th in result.coefficients)


# --- independence of leading elements --------------------------------------------------------

def v_operators(eps: int, sigma: int, bound: int) -> List[VOperator]:
    a_range = range(bound + 1) if eps == 0 else (0,)
    b_range = range(bound + 1) if sigma == 0 else (0,)
    return [VOperator(eps, sigma, a, b, s, t)
            for a in a_range for b in b_range for s in range(bound + 1) for t in range(bound + 1)]


@dataclass
class IndependenceReport:
    rank: int
    count: int
    # vanishing combination: (coeff, command, operator)
    dependence: List[Tuple[object, Command, VOperator]] = field(default_factory=list)

    @property
    def full_rank(self) -> bool:
        return self.rank == self.count

    def to_dict(self) -> dict:
        return {
            "status": "full-rank" if self.full_rank else "dependence",
            "rank": self.rank,
            "elements": self.count,
            "witness": [
                {"coeff": str(c), "command": cmd.to_dict(),
                 "v": {"eps": v.eps, "sigma": v.sigma, "a": v.a, "b": v.b, "s": v.s, "t": v.t}}
                for c, cmd, v in self.dependence
            ],
        }


def leading_element(sys: EncodedSystem, cmd: Command, v: VOperator) -> DiffPoly:
    g = sys.generator(cmd.key)
    out = apply(w_to_operator(v, sys.alg), g)
    return highest_part(out) if out else out


def independence_check(sys: EncodedSystem, bound: int) -> IndependenceReport:
    ech = SparseEchelon(sys.alg.ring)
    count = 0
    witness = None
    for cmd in sys.commands():
        for v in v_operators(cmd.eps, cmd.sigma, bound):
            count += 1
            elem = leading_element(sys, cmd, v)
            dep = ech.add(elem.terms, (cmd, v))
            if dep is not None and witness is None:
                witness = [(c, tag[0], tag[1]) for tag, c in sorted(dep.items(), key=lambda kv: (kv[0][0], str(kv[0][1])))]
    report = IndependenceReport(ech.rank, count, witness or [])
    if witness:
        total = sys.alg.zero()
        for c, cmd, v in witness:
            total = total + leading_element(sys, cmd, v).scale(c)
        assert not total, "dependence witness does not vanish"
    return report


def _v_candidates(cmd: Command, diff: DiffPoly) -> List[VOperator]:
    """V-family operators whose leading element could contain a monomial of ``diff``.

    The leading element of ``w g`` is the prefactor of ``w`` times the closed
    form for ``d1^s d2^t g``, so the x factors and the q derivative orders of
    either of its two monomials pin down ``(a, b, s, t)``.
    """
    e, sg = cmd.eps, cmd.sigma
    out = set()
    for m in diff.terms:
        x1 = [v.theta[0] for v, k in m for _ in range(k) if v.base == X1]
        x2 = [v.theta[1] for v, k in m for _ in range(k) if v.base == X2]
        qs = [v for v, _ in m if v.base.group == 1]
        if len(x1) != 1 or len(x2) != 1 or len(qs) != 1:
            continue
        c1, c2 = qs[0].theta
        for da, db in ((0, 0), (cmd.alpha, cmd.beta)):
            s = x1[0] if e else c1 - da - 1
            t = x2[0] if sg else c2 - db - 1
            a = 0 if e else x1[0]
            b = 0 if sg else x2[0]
            if min(a, b, s, t) >= 0:
                out.add(VOperator(e, sg, a, b, s, t))
    return sorted(out, key=lambda w: (w.a, w.b, w.s, w.t))


def step_correspondence(cmd: Command, u: DiffPoly, v: DiffPoly, bound: Optional[int] = None) -> Optional[VOperator]:
    """Find ``w`` in the V family with ``u - v`` equal to the highest part of ``w g``, if any.

    ``bound`` optionally caps ``a, b, s, t``.
    """
    alg = u.alg
    g = compile_command(cmd, alg)
    diff = u - v
    if not diff or not g:
        return None
    for w in _v_candidates(cmd, diff):
        if bound is not None and max(w.a, w.b, w.s, w.t) > bound:
            continue
        out = apply(w_to_operator(w, alg), g)
        if out and highest_part(out) == diff:
            return w
    return None


# --- combined decision ---------------------------------------------------------------

@dataclass
class Decision:
    verdict: Verdict
    certificate: Optional[Certificate] = None
    oracle: Optional[OracleResult] = None
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "certificate_steps": None if self.certificate is None else len(self.certificate.steps),
            "oracle": None if self.oracle is None else self.oracle.to_dict(),
            "notes": self.notes,
        }


def config_pair(target: DiffPoly) -> Optional[Tuple[Config, Config]]:
    """``(start, halt)`` if the target is ``c * (u(start) - u(halt))`` with x-part ``x1 x2``."""
    if len(target) != 2:
        return None
    (m1, c1), (m2, c2) = sorted(target.terms.items())
    if c1 + c2 != 0 and target.alg.ring.characteristic != 2:
        return None
    got1, got2 = config_of(m1), config_of(m2)
    if not got1 or not got2 or got1[1] != (0, 0) or got2[1] != (0, 0):
        return None
    if c1 == 1 or target.alg.ring.characteristic == 2:
        return got1[0], got2[0]
    return got2[0], got1[0]


def _decide_component(sys: EncodedSystem, target: DiffPoly, max_steps: int, problem_kw: dict) -> Decision:
    notes = []
    cert = None
    pair = config_pair(target)
    if pair:
        start, halt = pair
        for a, b in ((start, halt), (halt, start)):
            if a.state < 1:
                continue
            got = certify(sys.machine, a, max_steps, sys.alg)
            if isinstance(got, Certificate):
                if got.steps[-1].dst == b:
                    check = verify_certificate(sys, got)
                    assert check.accepted, check.reason
                    cert = got
                    scale = target.coeff(next(iter(config_element(a, sys.alg).terms)))
                    notes.append(f"simulation: {a} reaches {b} in {len(got.steps)} steps")
                    if scale != 1:
                        notes.append(f"target = {scale} * certificate target")
                    break
                notes.append(f"simulation: {a} halts at {got.steps[-1].dst}, not {b}")
            else:
                notes.append(f"simulation from {a}: {got.status.value} after {got.steps} steps")
    else:
        notes.append("target is not a configuration difference; simulation route skipped")
    try:
        res = oracle_member(OracleProblem(target, tuple(sys.polys()), **problem_kw))
    except ResourceError as e:
        res = None
        notes.append(f"oracle skipped: {e}")
    if res is not None:
        notes.append(f"oracle: {res.verdict.value} ({res.reason})")
    if cert is not None:
        if res is not None and res.verdict is Verdict.CERTIFIED_NON_MEMBER:
            raise AssertionError("certificate contradicts a grading obstruction")
        if res is not None and res.verdict is not Verdict.MEMBER:
            notes.append("oracle bounds do not cover the halting run")
        return Decision(Verdict.MEMBER, cert, res, notes)
    if res is not None and res.verdict is not Verdict.UNKNOWN:
        return Decision(res.verdict, None, res, notes)
    return Decision(Verdict.UNKNOWN, None, res, notes)


def decide_membership(sys: EncodedSystem, target: DiffPoly, max_steps: int = 10_000,
                      max_order: int = 4, max_xdeg: int = 1, strict: bool = False,
                      cap: int = 250_000, jobs: int = 1) -> Decision:
    """Run both routes; ``UNKNOWN`` is an honest outcome."""
    kw = dict(max_order=max_order, max_xdeg=max_xdeg, strict=strict, cap=cap, jobs=jobs)
    if not target:
        return Decision(Verdict.MEMBER, None, None, ["zero target"])
    parts = list(graded_parts(target, "groups").values())
    if len(parts) == 1:
        return _decide_component(sys, target, max_steps, kw)
    decisions = [_decide_component(sys, comp, max_steps, kw) for comp in parts]
    notes = [f"target split into {len(parts)} group-homogeneous components"]
    for k, d in enumerate(decisions):
        notes += [f"component {k}: {d.verdict.value}"] + [f"  {n}" for n in d.notes]
    verdicts = {d.verdict for d in decisions}
    if Verdict.CERTIFIED_NON_MEMBER in verdicts:
        overall = Verdict.CERTIFIED_NON_MEMBER
    elif verdicts == {Verdict.MEMBER}:
        overall = Verdict.MEMBER
    elif Verdict.UNKNOWN not in verdicts:
        overall = Verdict.NOT_MEMBER_WITHIN_BOUNDS
    else:
        overall = Verdict.UNKNOWN
    return Decision(overall, None, None, notes)
