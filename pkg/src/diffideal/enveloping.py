"""Operators of the universal enveloping ring and their action on polynomials.

Every operator is kept in the normal form ``sum c * v * theta`` with the
monomial ``v`` to the left of the derivative operator ``theta``.  Products are
normalised with ``d_i r = r d_i + d_i(r)``, i.e. ``theta r = sum_mu
binom(theta, mu) mu(r) (theta / mu)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from math import comb, prod
from itertools import product
from typing import Dict, Iterable, Tuple, Union

from .algebra import (
    ONE_MONO,
    X1,
    X2,
    Algebra,
    DerivOp,
    DiffPoly,
    DiffVar,
    Monomial,
    apply_theta,
    parse_poly,
)
from .errors import UsageError, ValidationError
from .rings import Coeff

Key = Tuple[Monomial, DerivOp]


class EnvOperator:
    """A finite sum of ``coeff * v * theta`` terms acting on an :class:`Algebra`."""

    __slots__ = ("alg", "terms")

    def __init__(self, alg: Algebra, terms: Dict[Key, Coeff] = None):
        self.alg = alg
        ring = alg.ring
        clean = {}
        for (v, th), c in (terms or {}).items():
            c = ring(c)
            if c:
                clean[(v, th)] = c
        self.terms = clean

    @classmethod
    def identity(cls, alg: Algebra) -> "EnvOperator":
        return cls(alg, {(ONE_MONO, DerivOp.identity(alg.nderiv)): 1})

    @classmethod
    def derivation(cls, alg: Algebra, theta: Iterable[int]) -> "EnvOperator":
        return cls(alg, {(ONE_MONO, DerivOp(theta)): 1})

    @classmethod
    def multiplier(cls, p: DiffPoly) -> "EnvOperator":
        """Left multiplication by the polynomial ``p``."""
        ident = DerivOp.identity(p.alg.nderiv)
        return cls(p.alg, {(m, ident): c for m, c in p.terms.items()})

    @classmethod
    def term(cls, alg: Algebra, v: Monomial, theta: Iterable[int], coeff=1) -> "EnvOperator":
        return cls(alg, {(v, DerivOp(theta)): coeff})

    def _check(self, other: "EnvOperator") -> None:
        if other.alg != self.alg:
            raise UsageError(f"operators over {self.alg} and {other.alg}")

    def __add__(self, other: "EnvOperator") -> "EnvOperator":
        self._check(other)
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0) + c
        return EnvOperator(self.alg, out)

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "EnvOperator":
        return EnvOperator(self.alg, {k: a * c for k, a in self.terms.items()})

    def __mul__(self, other: "EnvOperator") -> "EnvOperator":
        """Composition ``self o other``."""
        if not isinstance(other, EnvOperator):
            return self.scale(other)
        self._check(other)
        alg = self.alg
        out: Dict[Key, Coeff] = {}
        for (v1, th1), c1 in self.terms.items():
            for (v2, th2), c2 in other.terms.items():
                v2poly = DiffPoly(alg, {v2: 1}, _trusted=True)
                for mu in product(*(range(k + 1) for k in th1)):
                    weight = c1 * c2 * prod(comb(n, k) for n, k in zip(th1, mu))
                    moved = apply_theta(v2poly, mu)
                    rest = th1.quotient(DerivOp(mu)).compose(th2)
                    for m, c in moved.terms.items():
                        key = (v1.mul(m), rest)
                        out[key] = out.get(key, 0) + weight * c
        return EnvOperator(alg, out)

    def apply(self, a: DiffPoly) -> DiffPoly:
        return apply(self, a)

    def __eq__(self, other):
        if not isinstance(other, EnvOperator):
            return NotImplemented
        return self.alg == other.alg and self.terms == other.terms

    def __hash__(self):
        return hash((self.alg, frozenset(self.terms.items())))

    def is_zero(self) -> bool:
        return not self.terms

    def by_theta(self) -> Dict[DerivOp, DiffPoly]:
        groups: Dict[DerivOp, Dict[Monomial, Coeff]] = {}
        for (v, th), c in self.terms.items():
            groups.setdefault(th, {})[v] = c
        return {th: DiffPoly(self.alg, groups[th], _trusted=True) for th in sorted(groups)}

    def __str__(self):
        return format_operator(self)

    def __repr__(self):
        return f"EnvOperator({format_operator(self)!r})"


def apply(op: EnvOperator, a: DiffPoly) -> DiffPoly:
    """Act with ``op`` on ``a``: ``sum coeff * v * theta(a)``."""
    if op.alg != a.alg:
        raise UsageError(f"operator over {op.alg} applied to element of {a.alg}")
    alg = a.alg
    total = alg.zero()
    for th, coeff_poly in op.by_theta().items():
        total = total + coeff_poly * apply_theta(a, th)
    return total


def format_operator(op: EnvOperator) -> str:
    if op.is_zero():
        return "0"
    return "; ".join(f"{p} :: [{','.join(map(str, th))}]" for th, p in op.by_theta().items())


_CLAUSE_RE = re.compile(r"^(.*)::\s*\[(\d+(?:,\d+)*)\]$")


def parse_operator(text: str, alg: Algebra) -> EnvOperator:
    text = text.strip()
    if text == "0":
        return EnvOperator(alg)
    out: Dict[Key, Coeff] = {}
    for clause in text.split(";"):
        m = _CLAUSE_RE.match(clause.strip())
        if not m:
            raise ValidationError(f"malformed operator clause {clause!r}")
        th = DerivOp(int(x) for x in m.group(2).split(","))
        if len(th) != alg.nderiv:
            raise ValidationError(f"clause {clause!r}: expected {alg.nderiv} exponents")
        for mono, c in parse_poly(m.group(1), alg).terms.items():
            out[(mono, th)] = out.get((mono, th), 0) + c
    return EnvOperator(alg, out)


def _bit(name: str, value: int) -> None:
    if value not in (0, 1):
        raise ValidationError(f"{name} must be 0 or 1, got {value}")


@dataclass(frozen=True)
class WOperator:
    """``x1^(1-eps) x2^(1-sigma) d1^i d2^j`` with ``i = 0`` if eps = 1 and ``j = 0`` if sigma = 1."""

    eps: int
    sigma: int
    i: int = 0
    j: int = 0

    def __post_init__(self):
        _bit("eps", self.eps)
        _bit("sigma", self.sigma)
        if self.i < 0 or self.j < 0:
            raise ValidationError(f"{self}: negative derivative exponent")
        if self.eps == 1 and self.i:
            raise ValidationError(f"{self}: i must be 0 when eps = 1")
        if self.sigma == 1 and self.j:
            raise ValidationError(f"{self}: j must be 0 when sigma = 1")

    def prefactor(self) -> Monomial:
        ident = DerivOp.identity(2)
        return Monomial([(DiffVar(X1, ident), 1 - self.eps), (DiffVar(X2, ident), 1 - self.sigma)])

    @property
    def theta(self) -> DerivOp:
        return DerivOp((self.i, self.j))

    def to_dict(self) -> dict:
        return {"eps": self.eps, "sigma": self.sigma, "i": self.i, "j": self.j}


@dataclass(frozen=True)
class VOperator:
    """``(d1^a(x1))^(1-eps) (d2^b(x2))^(1-sigma) d1^s d2^t``.

    ``a`` (resp. ``b``) is pinned to 0 when its factor is absent so each
    operator has one representation.
    """

    eps: int
    sigma: int
    a: int = 0
    b: int = 0
    s: int = 0
    t: int = 0

    def __post_init__(self):
        _bit("eps", self.eps)
        _bit("sigma", self.sigma)
        if min(self.a, self.b, self.s, self.t) < 0:
            raise ValidationError(f"{self}: negative exponent")
        if self.eps == 1 and self.a:
            raise ValidationError(f"{self}: a must be 0 when eps = 1")
        if self.sigma == 1 and self.b:
            raise ValidationError(f"{self}: b must be 0 when sigma = 1")

    def prefactor(self) -> Monomial:
        return Monomial([
            (DiffVar(X1, DerivOp((self.a, 0))), 1 - self.eps),
            (DiffVar(X2, DerivOp((0, self.b))), 1 - self.sigma),
        ])

    @property
    def theta(self) -> DerivOp:
        return DerivOp((self.s, self.t))

    def in_w(self) -> bool:
        """Whether this operator also lies in the matching W family."""
        return (self.a == 0 and self.b == 0
                and (self.eps == 0 or self.s == 0) and (self.sigma == 0 or self.t == 0))


def w_to_operator(w: Union[WOperator, VOperator], alg: Algebra) -> EnvOperator:
    if not isinstance(w, (WOperator, VOperator)):
        raise ValidationError(f"not a W/V operator: {w!r}")
    return EnvOperator(alg, {(w.prefactor(), w.theta): 1})
