"""Incremental sparse row echelon form with exact arithmetic.

Vectors are dicts from comparable keys (monomials) to coefficients.  Over
QQ and ZZ rows are kept integral and reduced fraction-free (cross
multiplication followed by content removal); over GF(p) pivots are monic.
Each stored row remembers which combination of the inserted vectors it is,
so dependencies and solutions come back as explicit combinations.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd, lcm
from typing import Dict, Hashable, Optional, Tuple

from .rings import CoeffRing

Vec = Dict[Hashable, object]

_TARGET = object()


def _content(values) -> int:
    g = 0
    for v in values:
        g = gcd(g, v)
        if g == 1:
            break
    return g


class SparseEchelon:
    def __init__(self, ring: CoeffRing):
        self.ring = ring
        self.modular = ring.kind == "GF"
        self.p = ring.p
        # lead key -> (row, combination of inserted tags)
        self.rows: Dict[Hashable, Tuple[Vec, Dict[Hashable, object]]] = {}
        self.inserted = 0

    @property
    def rank(self) -> int:
        return len(self.rows)

    def _prepare(self, vec: Vec, tag) -> Tuple[Vec, Dict[Hashable, object]]:
        if self.modular:
            p = self.p
            row = {k: int(v) % p for k, v in vec.items() if int(v) % p}
            return row, {tag: 1}
        den = lcm(*(Fraction(v).denominator for v in vec.values())) if vec else 1
        row = {k: int(Fraction(v) * den) for k, v in vec.items() if v}
        return row, {tag: den}

    def _reduce(self, row: Vec, combo: Dict[Hashable, object]):
        rows = self.rows
        if self.modular:
            p = self.p
            while row:
                lead = max(row)
                hit = rows.get(lead)
                if hit is None:
                    break
                prow, pcombo = hit
                f = row[lead]
                for k, v in prow.items():
                    nv = (row.get(k, 0) - f * v) % p
                    if nv:
                        row[k] = nv
                    else:
                        row.pop(k, None)
                for k, v in pcombo.items():
                    nv = (combo.get(k, 0) - f * v) % p
                    if nv:
                        combo[k] = nv
                    else:
                        combo.pop(k, None)
            return row, combo
        while row:
            lead = max(row)
            hit = rows.get(lead)
            if hit is None:
                break
            prow, pcombo = hit
            a, b = row[lead], prow[lead]
            g = gcd(a, b)
            a, b = a // g, b // g
            new = {}
            for k in row.keys() | prow.keys():
                v = b * row.get(k, 0) - a * prow.get(k, 0)
                if v:
                    new[k] = v
            newc = {}
            for k in combo.keys() | pcombo.keys():
                v = b * combo.get(k, 0) - a * pcombo.get(k, 0)
                if v:
                    newc[k] = v
            c = _content(new.values())
            if c > 1:
                new = {k: v // c for k, v in new.items()}
                newc = {k: Fraction(v, c) for k, v in newc.items()}
            row, combo = new, newc
        return row, combo

    def _store(self, row: Vec, combo) -> None:
        lead = max(row)
        if self.modular:
            inv = pow(row[lead], -1, self.p)
            row = {k: v * inv % self.p for k, v in row.items()}
            combo = {k: v * inv % self.p for k, v in combo.items()}
        elif row[lead] < 0:
            row = {k: -v for k, v in row.items()}
            combo = {k: -v for k, v in combo.items()}
        self.rows[lead] = (row, combo)

    def add(self, vec: Vec, tag: Hashable) -> Optional[Dict[Hashable, object]]:
        """Insert ``vec``.  Returns ``None`` if it was independent, else a vanishing combination."""
        self.inserted += 1
        row, combo = self._reduce(*self._prepare(vec, tag))
        if row:
            self._store(row, combo)
            return None
        return self._normalize(combo)

    def _normalize(self, combo: Dict[Hashable, object]) -> Dict[Hashable, object]:
        if self.modular:
            return combo
        den = lcm(*(Fraction(v).denominator for v in combo.values())) if combo else 1
        ints = {k: int(Fraction(v) * den) for k, v in combo.items()}
        c = _content(ints.values()) or 1
        return {k: v // c for k, v in ints.items()}

    def solve(self, vec: Vec) -> Optional[Dict[Hashable, object]]:
        """Coefficients ``lam`` with ``vec = sum lam[tag] * inserted[tag]``, or ``None``."""
        if not vec:
            return {}
        row, combo = self._reduce(*self._prepare(vec, _TARGET))
        if row:
            return None
        s = combo.pop(_TARGET)
        if self.modular:
            inv = pow(s, -1, self.p)
            return {k: (-v * inv) % self.p for k, v in combo.items()}
        return {k: self.ring(Fraction(-v) / s) if self.ring.kind == "QQ" else Fraction(-v) / s
                for k, v in combo.items()}
