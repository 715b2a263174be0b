"""Exact coefficient rings: the rationals, the integers and prime fields GF(p)."""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .errors import UsageError

Coeff = Union[int, Fraction]

_COEFF_RE = re.compile(r"^[+-]?\d+(/\d+)?$")


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p % 2 == 0:
        return p == 2
    k = 3
    while k * k <= p:
        if p % k == 0:
            return False
        k += 2
    return True


@dataclass(frozen=True)
class CoeffRing:
    """A coefficient ring. ``kind`` is one of ``"QQ"``, ``"ZZ"``, ``"GF"``."""

    kind: str
    p: int = 0

    def __post_init__(self):
        if self.kind not in ("QQ", "ZZ", "GF"):
            raise UsageError(f"unknown coefficient ring kind {self.kind!r}")
        if self.kind == "GF" and not _is_prime(self.p):
            raise UsageError(f"GF(p) needs a prime p, got {self.p}")
        if self.kind != "GF" and self.p:
            raise UsageError("p is only meaningful for prime fields")

    @property
    def is_field(self) -> bool:
        return self.kind != "ZZ"

    @property
    def characteristic(self) -> int:
        return self.p if self.kind == "GF" else 0

    def __call__(self, value) -> Coeff:
        """Coerce ``value`` into its canonical representative."""
        if isinstance(value, str):
            return self.parse(value)
        if self.kind == "GF":
            if isinstance(value, Fraction):
                return (value.numerator * pow(value.denominator, -1, self.p)) % self.p
            return int(value) % self.p
        if isinstance(value, Fraction):
            if value.denominator == 1:
                return value.numerator
            if self.kind == "ZZ":
                raise ValueError(f"{value} is not an integer")
            return value
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeError(f"cannot coerce {value!r} into {self}")
        return value

    def inv(self, c: Coeff) -> Coeff:
        if c == 0:
            raise ZeroDivisionError("inverse of zero")
        if self.kind == "GF":
            return pow(int(c), -1, self.p)
        if self.kind == "ZZ":
            if c in (1, -1):
                return c
            raise ValueError(f"{c} is not a unit in ZZ")
        return self(Fraction(1) / c)

    def parse(self, text: str) -> Coeff:
        text = text.strip()
        if not _COEFF_RE.match(text):
            raise ValueError(f"malformed coefficient {text!r}")
        return self(Fraction(text))

    def __str__(self):
        if self.kind == "GF":
            return f"GF({self.p})"
        return self.kind


QQ = CoeffRing("QQ")
ZZ = CoeffRing("ZZ")
GF2 = CoeffRing("GF", 2)


def prime_field(p: int) -> CoeffRing:
    return CoeffRing("GF", p)


def ring_from_name(name: str) -> CoeffRing:
    """Parse ``Q``, ``QQ``, ``Z``, ``ZZ``, ``GF2``, ``GF(7)``, ``Zp(7)`` or ``Zp:7``."""
    key = name.strip().upper().replace(" ", "")
    if key in ("Q", "QQ"):
        return QQ
    if key in ("Z", "ZZ"):
        return ZZ
    m = re.fullmatch(r"(?:GF|ZP)(?:\((\d+)\)|:(\d+)|(\d+))", key)
    if m:
        return prime_field(int(next(g for g in m.groups() if g)))
    raise UsageError(f"unknown field {name!r}")
