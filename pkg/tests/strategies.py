"""Hypothesis strategies for random differential polynomials, commands and machines."""

from fractions import Fraction

from hypothesis import strategies as st

from diffideal.algebra import X1, X2, Algebra, DerivOp, DiffPoly, DiffVar, Mode, Monomial, q
from diffideal.minsky import Command
from diffideal.rings import GF2, QQ

small = st.integers(0, 3)


def diffvars(mode: Mode, nq: int = 3):
    def build(kind, i, j, k):
        if kind == "x1":
            return DiffVar(X1, DerivOp((i, 0 if mode is Mode.B else j)))
        if kind == "x2":
            return DiffVar(X2, DerivOp((0 if mode is Mode.B else i, j)))
        return DiffVar(q(k), DerivOp((i, j)))

    return st.builds(build, st.sampled_from(["x1", "x2", "q"]), small, small, st.integers(0, nq - 1))


def monomials(mode: Mode, max_factors: int = 3):
    return st.lists(st.tuples(diffvars(mode), st.integers(1, 2)), max_size=max_factors).map(Monomial)


coeffs = st.one_of(st.integers(-5, 5), st.fractions(min_value=-3, max_value=3, max_denominator=4))


def polys(alg: Algebra, max_terms: int = 4):
    def build(pairs):
        terms = {}
        for m, c in pairs:
            terms[m] = terms.get(m, 0) + Fraction(c)
        return DiffPoly(alg, {m: c for m, c in terms.items()})

    c = coeffs if alg.ring.kind == "QQ" else st.integers(-5, 5)
    return st.lists(st.tuples(monomials(alg.mode), c), max_size=max_terms).map(build)


B = Algebra(QQ, Mode.B)
A = Algebra(QQ, Mode.A)
B2 = Algebra(GF2, Mode.B)


@st.composite
def commands(draw, max_state: int = 3, nonzero: bool = True):
    while True:
        eps = draw(st.integers(0, 1))
        sigma = draw(st.integers(0, 1))
        c = Command(
            draw(st.integers(1, max_state)), eps, sigma, draw(st.integers(0, max_state)),
            draw(st.integers(0 if eps else -1, 1)), draw(st.integers(0 if sigma else -1, 1)),
        )
        if not nonzero or (c.i, c.alpha, c.beta) != (c.j, 0, 0):
            return c
