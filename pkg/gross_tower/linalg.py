"""Exact linear algebra over Q, Z and Z/p^k.

Matrices are lists (or tuples) of rows of Fractions or ints. The heavy lifting
is sympy's: ``Matrix`` over the rationals, and ``DomainMatrix`` over ZZ and
GF(p). Values are converted back to ``int``/``Fraction`` on the way out so
that gmpy2 integers never leak into Fraction arithmetic.
"""

from __future__ import annotations

from fractions import Fraction
from typing import List, Sequence

from sympy import Matrix as SymMatrix, Rational
from sympy.polys.domains import GF, ZZ
from sympy.polys.matrices import DM
from sympy.polys.matrices.normalforms import hermite_normal_form

from gross_tower.exceptions import InvalidInputError

Matrix = List[List[Fraction]]


def to_fractions(m: Sequence[Sequence]) -> Matrix:
    return [[Fraction(e) for e in row] for row in m]


def to_sympy(m: Sequence[Sequence]) -> SymMatrix:
    return SymMatrix([[Rational(f.numerator, f.denominator) for f in row] for row in to_fractions(m)])


def from_sympy_scalar(x) -> Fraction:
    x = Rational(x)
    return Fraction(int(x.p), int(x.q))


def from_sympy(m: SymMatrix) -> Matrix:
    return [[from_sympy_scalar(m[r, c]) for c in range(m.cols)] for r in range(m.rows)]


def transpose(m: Sequence[Sequence]) -> list:
    return [list(col) for col in zip(*m)]


def mat_mul(x: Sequence[Sequence], y: Sequence[Sequence]) -> list:
    cols = list(zip(*y))
    return [[sum((a * b for a, b in zip(row, col)), Fraction(0)) for col in cols] for row in x]


def vec_mat(v: Sequence, m: Sequence[Sequence]) -> list:
    """Row vector times matrix."""
    n = len(m[0])
    return [sum((v[i] * m[i][j] for i in range(len(v))), Fraction(0)) for j in range(n)]


def det(m: Sequence[Sequence]) -> Fraction:
    return from_sympy_scalar(to_sympy(m).det())


def rref(m: Sequence[Sequence]) -> tuple[Matrix, list[int]]:
    reduced, pivots = to_sympy(m).rref()
    return from_sympy(reduced), list(pivots)


def _invertible(m: Sequence[Sequence]) -> SymMatrix:
    a = to_sympy(m)
    if not a.is_square or a.det() == 0:
        raise InvalidInputError("matrix is singular")
    return a


def inverse(m: Sequence[Sequence]) -> Matrix:
    return from_sympy(_invertible(m).inv())


def solve(m: Sequence[Sequence], rhs: Sequence) -> list[Fraction]:
    """Solve m·x = rhs for square invertible m."""
    x = _invertible(m).LUsolve(to_sympy([[e] for e in rhs]))
    return [row[0] for row in from_sympy(x)]


def nullspace(m: Sequence[Sequence]) -> Matrix:
    """Basis of {x : m·x = 0} over Q."""
    return [[row[0] for row in from_sympy(v)] for v in to_sympy(m).nullspace()]


def left_nullspace(m: Sequence[Sequence]) -> Matrix:
    """Basis of {v : v·m = 0} over Q."""
    return nullspace(transpose(m))


def hnf(rows: Sequence[Sequence[int]]) -> list[list[int]]:
    """Canonical basis of the Z-span of integer rows.

    The rows come back ordered by pivot: row k is zero after its pivot entry,
    the pivot is positive, and later rows are reduced modulo each earlier
    pivot. A full-rank n-dimensional span therefore gives a lower triangular
    n×n basis.
    """
    gens = [[int(v) for v in r] for r in rows if any(r)]
    if not gens:
        return []
    W = hermite_normal_form(DM(transpose(gens), ZZ)).to_Matrix()
    return [[int(W[r, c]) for r in range(W.rows)] for c in range(W.cols)]


# ─── Z/p^k ────────────────────────────────────────────────────────────────────


def mat_mul_mod(x: Sequence[Sequence[int]], y: Sequence[Sequence[int]], modulus: int) -> list[list[int]]:
    cols = list(zip(*y))
    return [[sum(a * b for a, b in zip(row, col)) % modulus for col in cols] for row in x]


def mat_pow_mod(x: Sequence[Sequence[int]], e: int, modulus: int) -> list[list[int]]:
    n = len(x)
    result = [[int(r == c) % modulus for c in range(n)] for r in range(n)]
    base = [[int(v) % modulus for v in row] for row in x]
    while e:
        if e & 1:
            result = mat_mul_mod(result, base, modulus)
        base = mat_mul_mod(base, base, modulus)
        e >>= 1
    return result


def vec_mat_mod(v: Sequence[int], m: Sequence[Sequence[int]], modulus: int) -> list[int]:
    n = len(m[0])
    return [sum(v[i] * m[i][j] for i in range(len(v))) % modulus for j in range(n)]


def rank_mod_p(m: Sequence[Sequence[int]], p: int) -> int:
    """Rank over F_p."""
    rows = [[int(v) % p for v in row] for row in m]
    if not rows or not rows[0]:
        return 0
    return DM(rows, GF(p)).rank()
