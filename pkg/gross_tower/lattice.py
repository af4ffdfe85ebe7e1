"""Full-rank Z-lattices in Q^n with a canonical Hermite normal form.

Quaternion orders and ideals are rank-4 lattices in coordinates (1, i, j, ij);
ideals of imaginary quadratic orders are rank-2 lattices. Short vectors of
positive definite forms come from sympy's exact LLL on an integral model of
the form, followed by Fincke-Pohst enumeration.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from math import ceil, floor, isqrt, lcm
from typing import Callable, Iterator, Sequence

from sympy.polys.domains import QQ, ZZ
from sympy.polys.matrices import DM
from sympy.solvers.diophantine.diophantine import sum_of_four_squares

from gross_tower import linalg
from gross_tower.exceptions import InvalidInputError

logger = logging.getLogger(__name__)

Vector = tuple[Fraction, ...]


@dataclass(frozen=True)
class QuatLattice:
    """A full-rank lattice, stored by its HNF basis (unique per lattice).

    Basis vector k is zero after position k and has a positive entry there.
    """

    basis: tuple[Vector, ...]

    @classmethod
    def from_generators(cls, generators: Sequence[Sequence]) -> "QuatLattice":
        gens = [tuple(Fraction(e) for e in g) for g in generators]
        if not gens:
            raise InvalidInputError("a lattice needs generators")
        n = len(gens[0])
        d = 1
        for g in gens:
            for e in g:
                d = lcm(d, e.denominator)
        rows = linalg.hnf([[int(e * d) for e in g] for g in gens])
        if len(rows) != n:
            raise InvalidInputError(f"generators span rank {len(rows)} < {n}")
        return cls(tuple(tuple(Fraction(e, d) for e in r) for r in rows))

    @property
    def dim(self) -> int:
        return len(self.basis)

    def rows(self) -> list[Vector]:
        return list(self.basis)

    def coordinates(self, v: Sequence) -> list[Fraction]:
        """Coefficients of v in the HNF basis (triangular solve from the last entry)."""
        rest = [Fraction(e) for e in v]
        coeffs = [Fraction(0)] * self.dim
        for i in range(self.dim - 1, -1, -1):
            row = self.basis[i]
            c = rest[i] / row[i]
            coeffs[i] = c
            if c:
                rest = [a - c * b for a, b in zip(rest, row)]
        return coeffs

    def __contains__(self, v: Sequence) -> bool:
        return all(c.denominator == 1 for c in self.coordinates(v))

    def contains_lattice(self, other: "QuatLattice") -> bool:
        return all(row in self for row in other.basis)

    def __add__(self, other: "QuatLattice") -> "QuatLattice":
        return QuatLattice.from_generators(self.rows() + other.rows())

    def scale(self, c) -> "QuatLattice":
        c = Fraction(c)
        return QuatLattice.from_generators([[c * e for e in row] for row in self.basis])

    def dual(self) -> "QuatLattice":
        """Dual with respect to the standard dot product."""
        return QuatLattice.from_generators(linalg.transpose(linalg.inverse(self.rows())))

    def intersection(self, other: "QuatLattice") -> "QuatLattice":
        return (self.dual() + other.dual()).dual()

    @property
    def covolume(self) -> Fraction:
        out = Fraction(1)
        for i, row in enumerate(self.basis):
            out *= row[i]
        return out

    def index_in(self, other: "QuatLattice") -> Fraction:
        """[other : self] as a rational (an integer when self ⊂ other)."""
        return self.covolume / other.covolume

    def combination(self, coeffs: Sequence) -> Vector:
        out = [Fraction(0)] * self.dim
        for c, row in zip(coeffs, self.basis):
            if c:
                out = [a + c * b for a, b in zip(out, row)]
        return tuple(out)

    def congruence_kernel(self, values: Sequence[Sequence[int]], modulus: int) -> "QuatLattice":
        """Sublattice of x with every functional ≡ 0 mod modulus.

        ``values[i][j]`` is the j-th functional evaluated on the i-th basis
        vector, reduced to an integer.
        """
        n = self.dim
        r = len(values[0]) if values and values[0] else 0
        if r == 0:
            return self
        rows = []
        for i in range(n):
            rows.append([int(i == k) for k in range(n)] + [int(v) % modulus for v in values[i]])
        for j in range(r):
            rows.append([0] * n + [modulus * int(j == k) for k in range(r)])
        kernel = [row[:n] for row in linalg.hnf(rows) if not any(row[n:])]
        if len(kernel) != n:
            raise InvalidInputError("congruence kernel is not of full rank")
        return QuatLattice.from_generators([self.combination(c) for c in kernel])

    def gram(self, form: Callable[[Vector, Vector], Fraction]) -> list[list[Fraction]]:
        return [[Fraction(form(u, v)) for v in self.basis] for u in self.basis]


# ─── Reduction and enumeration ────────────────────────────────────────────────


def ldl(gram: Sequence[Sequence]) -> tuple[list[list[Fraction]], list[Fraction]]:
    """(L, d) with G = L·diag(d)·Lᵀ and L unit lower triangular; d > 0 is enforced."""
    lower, diag = linalg.to_sympy(gram).LDLdecomposition(hermitian=False)
    d = [linalg.from_sympy_scalar(diag[i, i]) for i in range(diag.rows)]
    if any(x <= 0 for x in d):
        raise InvalidInputError("form is not positive definite")
    return linalg.from_sympy(lower), d


def integral_model(gram: Sequence[Sequence]) -> tuple[list[list[int]], int]:
    """Integer rows B and a scale s with B·Bᵀ = s²·G.

    Each pivot d = a/b of the LDL factorization is written as ab/b², and ab
    as a sum of four squares, so every pivot contributes four coordinates.
    """
    lower, d = ldl(gram)
    n = len(d)
    rows: list[list[Fraction]] = [[] for _ in range(n)]
    for k, pivot in enumerate(d):
        squares = [int(s) for s in sum_of_four_squares(pivot.numerator * pivot.denominator)]
        for i in range(n):
            rows[i].extend(lower[i][k] * s / pivot.denominator for s in squares)
    scale = 1
    for row in rows:
        for e in row:
            scale = lcm(scale, e.denominator)
    return [[int(e * scale) for e in row] for row in rows], scale


def lll_gram(gram: Sequence[Sequence], delta: Fraction = Fraction(3, 4)) -> tuple[list[list[Fraction]], list[list[int]]]:
    """LLL on a positive definite Gram matrix.

    Returns (reduced Gram, T) with T unimodular and reduced = T·G·Tᵀ.
    """
    g0 = linalg.to_fractions(gram)
    basis, _ = integral_model(g0)
    _, transform = DM(basis, ZZ).lll_transform(delta=QQ(delta.numerator, delta.denominator))
    T = [[int(v) for v in row] for row in transform.to_Matrix().tolist()]
    return linalg.mat_mul(linalg.mat_mul(T, g0), linalg.transpose(T)), T


def enumerate_vectors(gram: Sequence[Sequence], bound) -> Iterator[tuple[tuple[int, ...], Fraction]]:
    """All integer x with x·G·xᵀ ≤ bound (zero included), with their values."""
    bound = Fraction(bound)
    lower, d = ldl(gram)
    n = len(d)
    x = [0] * n

    # x·G·xᵀ = Σ_i d_i·(x_i + Σ_{j>i} L[j][i]·x_j)²
    def rec(i: int, remaining: Fraction) -> Iterator[tuple[tuple[int, ...], Fraction]]:
        center = -sum((lower[j][i] * x[j] for j in range(i + 1, n)), Fraction(0))
        radius = remaining / d[i]
        s = isqrt(floor(radius)) + 1
        for xi in range(floor(center) - s, ceil(center) + s + 1):
            diff = xi - center
            used = d[i] * diff * diff
            if used > remaining:
                continue
            x[i] = xi
            if i == 0:
                yield tuple(x), bound - (remaining - used)
            else:
                yield from rec(i - 1, remaining - used)
        x[i] = 0

    yield from rec(n - 1, bound)


def short_vectors(gram: Sequence[Sequence], bound, *, include_zero: bool = False) -> list[tuple[tuple[int, ...], Fraction]]:
    """Coefficient vectors of norm ≤ bound in the original basis, sorted."""
    reduced, T = lll_gram(gram)
    found = []
    for y, value in enumerate_vectors(reduced, bound):
        if not include_zero and not any(y):
            continue
        xvec = tuple(sum(y[k] * T[k][c] for k in range(len(y))) for c in range(len(y)))
        found.append((xvec, value))
    found.sort(key=lambda item: (item[1], item[0]))
    logger.debug("enumerated %d vectors of norm <= %s", len(found), bound)
    return found
