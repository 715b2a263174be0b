"""Command-line front end.

Structured results go to stdout as JSON, a one-line human summary to stderr.

Exit codes:
  0  an established result (halted / cycle / stuck run, member, certified
     non-member, accepted certificate or lift, independence report)
  1  malformed input, usage error, or a rejected certificate / lift
  2  budget exhausted or no verdict within the search bounds
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .algebra import Algebra, DiffPoly, Mode
from .encoder import (
    DEFAULT_EXPONENT_BUDGET,
    EncodedSystem,
    compile_machine,
    format_generator_file,
    membership_target,
    parse_generator_file,
)
from .errors import DiffIdealError, ResourceError, UsageError, ValidationError
from .membership import (
    Certificate,
    OracleProblem,
    Verdict,
    certificate_from_dict,
    certify,
    decide_membership,
    independence_check,
    oracle_member,
    verify_certificate,
)
from .minsky import Outcome, load_machine, parse_config, run
from .rings import ring_from_name
from .subalgebra import (
    expr_from_json,
    expr_to_json,
    from_encoded,
    refute_tf_membership_bounded,
    verify_lift,
)

OK, FAIL, UNKNOWN = 0, 1, 2
ENV_PREFIX = "DIFFIDEAL_"
LIFT_FORMAT = "diffideal-lift-v1"

ESTABLISHED = (Verdict.MEMBER, Verdict.CERTIFIED_NON_MEMBER)


def _env(name: str, default):
    raw = os.environ.get(ENV_PREFIX + name.upper())
    if raw is None:
        return default
    if isinstance(default, bool):
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        try:
            return int(raw)
        except ValueError:
            raise UsageError(f"{ENV_PREFIX}{name.upper()}={raw!r} is not an integer") from None
    return raw


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _emit(obj, summary: str, out: Optional[str] = None) -> None:
    text = obj if isinstance(obj, str) else json.dumps(obj, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    print(summary, file=sys.stderr)


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise ValidationError(f"{path}: {e.strerror}") from None


def _alg(args, mode: Mode = Mode.B) -> Algebra:
    return Algebra(ring_from_name(args.field), mode)


def _load_system(args) -> EncodedSystem:
    alg = _alg(args) if args.field_given else None
    return parse_generator_file(_read(args.generators), alg, args.generators)


def _check_budget(p: DiffPoly, budget: int) -> None:
    top = max((max(v.theta) for m in p.terms for v, _ in m), default=0)
    if top > budget:
        raise ResourceError(f"derivative exponent {top} exceeds the exponent budget {budget}")


def _target(args, alg: Algebra) -> DiffPoly:
    if args.config:
        start, halt = (parse_config(c) for c in args.config)
        return membership_target(start, halt, alg, args.exponent_budget)
    if args.target is None:
        raise UsageError("give a target polynomial or --config START HALT")
    p = alg.parse(args.target)
    _check_budget(p, args.exponent_budget)
    return p


def _bounds(args) -> dict:
    return dict(max_order=args.max_order, max_xdeg=args.max_xdeg, strict=args.strict_oracle, jobs=args.jobs)


# --- subcommands ---------------------------------------------------------------------

def cmd_run(args) -> int:
    m = load_machine(args.machine)
    start = parse_config(args.start)
    tr = run(m, start, args.max_steps)
    _emit(tr.to_dict(), f"{tr.status.value} after {tr.steps} steps at {tr.final}")
    return UNKNOWN if tr.status is Outcome.BUDGET else OK


def cmd_compile(args) -> int:
    m = load_machine(args.machine)
    enc = compile_machine(m, _alg(args))
    _emit(format_generator_file(enc), f"compiled {len(enc.generators)} generators", args.output)
    return OK


def cmd_certify(args) -> int:
    m = load_machine(args.machine)
    start = parse_config(args.start)
    got = certify(m, start, args.max_steps, _alg(args))
    if not isinstance(got, Certificate):
        _emit({"status": got.status.value, "steps": got.steps},
              f"no certificate: run from {start} ended with {got.status.value} after {got.steps} steps")
        return UNKNOWN
    final = got.steps[-1].dst if got.steps else start
    if args.halt is not None and parse_config(args.halt) != final:
        raise ValidationError(f"{start} halts at {final}, not at {args.halt}")
    _emit(got.to_json(), f"certificate with {len(got.steps)} steps: {start} -> {final}", args.output)
    return OK


def cmd_verify(args) -> int:
    enc = _load_system(args)
    try:
        data = json.loads(_read(args.certificate))
    except json.JSONDecodeError as e:
        raise ValidationError(f"{args.certificate}:{e.lineno}: invalid JSON: {e.msg}") from None
    cert = certificate_from_dict(data, enc.alg)
    res = verify_certificate(enc, cert)
    where = "" if res.step is None else f" at step {res.step}"
    _emit(res.to_dict(), f"{'accept' if res.accepted else 'reject'}{where}: {res.reason}")
    return OK if res.accepted else FAIL


def cmd_oracle(args) -> int:
    enc = _load_system(args)
    target = _target(args, enc.alg)
    res = oracle_member(OracleProblem(target, tuple(enc.polys()), **_bounds(args)))
    _emit(res.to_dict(), f"{res.verdict.value} ({res.reason})")
    return OK if res.verdict in ESTABLISHED else UNKNOWN


def cmd_decide(args) -> int:
    m = load_machine(args.machine)
    enc = compile_machine(m, _alg(args))
    target = _target(args, enc.alg)
    d = decide_membership(enc, target, args.max_steps, **_bounds(args))
    _emit(d.to_dict(), d.verdict.value)
    return OK if d.verdict in ESTABLISHED else UNKNOWN


def cmd_independence(args) -> int:
    enc = _load_system(args)
    rep = independence_check(enc, args.bound)
    _emit(rep.to_dict(), f"rank {rep.rank} of {rep.count} elements"
                         + ("" if rep.full_rank else "; vanishing combination found"))
    return OK


def cmd_subalg_lift(args) -> int:
    enc = _load_system(args)
    sub = from_encoded(enc)
    f = _target(args, sub.alg)
    res = refute_tf_membership_bounded(sub, f, **_bounds(args))
    if res.verdict is not Verdict.MEMBER:
        _emit(res.to_dict(), f"no lift: {res.reason}")
        return OK if res.verdict is Verdict.CERTIFIED_NON_MEMBER else UNKNOWN
    doc = {"format": LIFT_FORMAT, "f": str(f), "expression": expr_to_json(res.expression)}
    _emit(doc, "lift of t*f over the subalgebra generators", args.output)
    return OK


def cmd_subalg_verify(args) -> int:
    enc = _load_system(args)
    sub = from_encoded(enc)
    try:
        doc = json.loads(_read(args.lift))
    except json.JSONDecodeError as e:
        raise ValidationError(f"{args.lift}:{e.lineno}: invalid JSON: {e.msg}") from None
    if not isinstance(doc, dict) or doc.get("format") != LIFT_FORMAT:
        raise ValidationError(f"{args.lift}: not a {LIFT_FORMAT} file")
    try:
        f = sub.alg.parse(doc["f"])
        expr = expr_from_json(doc["expression"])
    except KeyError as e:
        raise ValidationError(f"{args.lift}: missing {e}") from None
    res = verify_lift(sub, expr, f)
    _emit(res.to_dict(), f"{'accept' if res.accepted else 'reject'}: {res.reason}")
    return OK if res.accepted else FAIL


def cmd_subalg_refute(args) -> int:
    enc = _load_system(args)
    sub = from_encoded(enc)
    f = _target(args, sub.alg)
    res = refute_tf_membership_bounded(sub, f, **_bounds(args))
    _emit(res.to_dict(), f"{res.verdict.value}: {res.reason}")
    return OK if res.verdict in ESTABLISHED else UNKNOWN


# --- parser --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="diffideal",
        description="Minsky machines, their encoded differential ideals, and bounded membership tools.",
        epilog="Exit codes: 0 established result, 1 error or rejection, 2 budget exhausted / unknown.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--field", default=None, help="coefficient field: Q, GF2, Zp(p) (default Q)")
    p.add_argument("--max-steps", type=_positive, default=None, help="simulation step budget")
    p.add_argument("--max-order", type=_positive, default=None, help="oracle: max derivative order")
    p.add_argument("--max-xdeg", type=_positive, default=None, help="oracle: max order of x factors in multipliers")
    p.add_argument("--exponent-budget", type=_positive, default=None, help="largest derivative exponent accepted")
    p.add_argument("--jobs", type=_positive, default=None, help="worker processes for oracle assembly")
    p.add_argument("--strict-oracle", action="store_true", default=None,
                   help="search all multipliers up to the degree bound, not only those of the target's grading")
    sub = p.add_subparsers(dest="command", required=True)

    def target_args(sp):
        sp.add_argument("target", nargs="?", help="target polynomial in canonical text form")
        sp.add_argument("--config", nargs=2, metavar=("START", "HALT"),
                        help="use u(START) - u(HALT) as the target, configs written i,c1,c2")

    sp = sub.add_parser("run", help="simulate a machine")
    sp.add_argument("machine", help="machine JSON file or bundled:<name>")
    sp.add_argument("start", help="start configuration i,c1,c2")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("compile", help="write the generator file of a machine")
    sp.add_argument("machine")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_compile)

    sp = sub.add_parser("certify", help="emit a membership certificate for a halting run")
    sp.add_argument("machine")
    sp.add_argument("start")
    sp.add_argument("--halt", help="expected halting configuration")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_certify)

    sp = sub.add_parser("verify", help="check a certificate against a generator file")
    sp.add_argument("generators")
    sp.add_argument("certificate")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("oracle", help="bounded linear-algebra membership search")
    sp.add_argument("generators")
    target_args(sp)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("decide", help="simulation plus oracle on a machine")
    sp.add_argument("machine")
    target_args(sp)
    sp.set_defaults(func=cmd_decide)

    sp = sub.add_parser("independence", help="rank of the leading elements up to a bound")
    sp.add_argument("generators")
    sp.add_argument("--bound", type=_positive, default=5)
    sp.set_defaults(func=cmd_independence)

    sp = sub.add_parser("subalg", help="subalgebra membership of t*f")
    ssub = sp.add_subparsers(dest="action", required=True)
    lp = ssub.add_parser("lift", help="lift an ideal witness for f to an expression for t*f")
    lp.add_argument("generators")
    target_args(lp)
    lp.add_argument("-o", "--output")
    lp.set_defaults(func=cmd_subalg_lift)
    vp = ssub.add_parser("verify", help="evaluate a lift file and compare with t*f")
    vp.add_argument("generators")
    vp.add_argument("lift")
    vp.set_defaults(func=cmd_subalg_verify)
    rp = ssub.add_parser("refute", help="bounded refutation of t*f in the subalgebra")
    rp.add_argument("generators")
    target_args(rp)
    rp.set_defaults(func=cmd_subalg_refute)
    return p


DEFAULTS = {
    "field": "Q",
    "max_steps": 10_000,
    "max_order": 4,
    "max_xdeg": 1,
    "exponent_budget": DEFAULT_EXPONENT_BUDGET,
    "jobs": 1,
    "strict_oracle": False,
}


def _resolve(args) -> None:
    """Flags beat environment variables, which beat built-in defaults."""
    args.field_given = args.field is not None or ENV_PREFIX + "FIELD" in os.environ
    for name, default in DEFAULTS.items():
        if getattr(args, name) is None:
            setattr(args, name, _env(name, default))
    for name in ("max_steps", "max_order", "max_xdeg", "exponent_budget", "jobs"):
        if getattr(args, name) < 1:
            raise UsageError(f"{name.replace('_', '-')} must be positive")
    ring_from_name(args.field)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _resolve(args)
        return args.func(args)
    except ResourceError as e:
        print(f"budget: {e}", file=sys.stderr)
        return UNKNOWN
    except DiffIdealError as e:
        print(f"error: {e}", file=sys.stderr)
        return FAIL


if __name__ == "__main__":
    sys.exit(main())
