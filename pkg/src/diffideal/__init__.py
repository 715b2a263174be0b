"""Minsky machines and membership in differential ideals and subalgebras."""

__version__ = "0.1.0"

from .algebra import Algebra, DerivOp, DiffPoly, Mode, Monomial, apply_theta, derive
from .encoder import EncodedSystem, compile_machine, config_element, membership_target, test_element
from .enveloping import EnvOperator, VOperator, WOperator, apply
from .errors import DiffIdealError, ResourceError, UsageError, ValidationError
from .membership import (
    Certificate,
    OracleProblem,
    Verdict,
    certify,
    decide_membership,
    independence_check,
    oracle_member,
    verify_certificate,
)
from .minsky import BUNDLED, Command, Config, Machine, load_machine, run
from .rings import GF2, QQ, ZZ, CoeffRing, prime_field

__all__ = [
    "Algebra", "DerivOp", "DiffPoly", "Mode", "Monomial", "apply_theta", "derive",
    "EncodedSystem", "compile_machine", "config_element", "membership_target", "test_element",
    "EnvOperator", "VOperator", "WOperator", "apply",
    "DiffIdealError", "ResourceError", "UsageError", "ValidationError",
    "Certificate", "OracleProblem", "Verdict", "certify", "decide_membership",
    "independence_check", "oracle_member", "verify_certificate",
    "BUNDLED", "Command", "Config", "Machine", "load_machine", "run",
    "GF2", "QQ", "ZZ", "CoeffRing", "prime_field",
]
