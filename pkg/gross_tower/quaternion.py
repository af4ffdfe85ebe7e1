"""Exact arithmetic in rational quaternion algebras (a, b / Q).

Elements are coordinate 4-tuples in the basis 1, i, j, ij with i^2 = a,
j^2 = b and ij = -ji. Ramification is decided with Hilbert symbols, and
local splittings B_p ≅ M_2(Q_p) are built by Hensel lifting.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Iterable, Optional, Sequence, Tuple, Union

from sympy import factorint, legendre_symbol, primerange

from gross_tower import linalg
from gross_tower.config import working_precision
from gross_tower.exceptions import InternalInvariantError, InvalidInputError
from gross_tower.padic import (
    IDENTITY,
    Mat2,
    hensel_sqrt,
    is_unit_square,
    mat,
    mat_add,
    mat_det,
    mat_inv,
    mat_mod,
    mat_mul,
    mat_prod,
    mat_scale,
    mat_valuation,
    mod_pk,
    valuation,
)

logger = logging.getLogger(__name__)

Rational = Union[int, Fraction]
Place = Union[int, str]
INFINITY = "inf"


# ─── Hilbert symbols ──────────────────────────────────────────────────────────


def squarefree_class(x: Rational) -> int:
    """The squarefree integer representing x in Q^x / (Q^x)^2."""
    x = Fraction(x)
    if x == 0:
        raise InvalidInputError("zero has no square class")
    n = x.numerator * x.denominator
    sign = -1 if n < 0 else 1
    out = 1
    for q, e in factorint(abs(n)).items():
        if e % 2:
            out *= q
    return sign * out


def _eps(u: int) -> int:
    return ((u - 1) // 2) % 2


def _omega(u: int) -> int:
    return ((u * u - 1) // 8) % 2


def _hilbert_formula(a: int, b: int, p: int) -> int:
    alpha, beta = valuation(a, p), valuation(b, p)
    u, v = a // p**alpha, b // p**beta
    if p == 2:
        e = (_eps(u) * _eps(v) + alpha * _omega(v) + beta * _omega(u)) % 2
        return -1 if e else 1
    sign = -1 if (alpha * beta * ((p - 1) // 2)) % 2 else 1
    if beta % 2:
        sign *= legendre_symbol(u % p, p)
    if alpha % 2:
        sign *= legendre_symbol(v % p, p)
    return sign


def _hilbert_two_by_search(a: int, b: int) -> int:
    k = 3 + valuation(a, 2) + valuation(b, 2)
    modulus = 2**k
    for x, y, z in product(range(modulus), repeat=3):
        if x % 2 == 0 and y % 2 == 0 and z % 2 == 0:
            continue
        if (z * z - a * x * x - b * y * y) % modulus == 0:
            return 1
    return -1


@lru_cache(maxsize=4096)
def _hilbert_int(a: int, b: int, place: Place) -> int:
    if place == INFINITY:
        return -1 if a < 0 and b < 0 else 1
    p = int(place)
    if p == 2:
        searched = _hilbert_two_by_search(a, b)
        if searched != _hilbert_formula(a, b, 2):
            raise InternalInvariantError(
                "Hilbert symbol at 2 disagrees with the closed formula", details={"a": a, "b": b}
            )
        return searched
    if a % p and b % p:
        return 1
    return _hilbert_formula(a, b, p)


def hilbert_symbol(a: Rational, b: Rational, place: Place) -> int:
    """(a, b)_v: +1 iff z^2 = a x^2 + b y^2 has a nontrivial solution over Q_v."""
    if Fraction(a) == 0 or Fraction(b) == 0:
        raise InvalidInputError("Hilbert symbol needs nonzero arguments")
    return _hilbert_int(squarefree_class(a), squarefree_class(b), place)


def relevant_places(a: Rational, b: Rational) -> list[Place]:
    primes = set(factorint(abs(2 * squarefree_class(a) * squarefree_class(b))))
    return sorted(primes) + [INFINITY]


# ─── Algebras and elements ────────────────────────────────────────────────────


@dataclass(frozen=True)
class QuaternionAlgebra:
    """The algebra (a, b / Q) with its finite ramification."""

    a: Fraction
    b: Fraction
    ramified_finite: frozenset = field(default_factory=frozenset)
    definite: bool = True

    @classmethod
    def from_pair(cls, a: Rational, b: Rational) -> "QuaternionAlgebra":
        ramified = frozenset(
            v for v in relevant_places(a, b) if v != INFINITY and hilbert_symbol(a, b, v) == -1
        )
        definite = hilbert_symbol(a, b, INFINITY) == -1
        return cls(Fraction(a), Fraction(b), ramified, definite)

    @property
    def discriminant(self) -> int:
        out = 1
        for q in self.ramified_finite:
            out *= q
        return out

    def ramified_places(self) -> list[Place]:
        places: list[Place] = sorted(self.ramified_finite)
        if self.definite:
            places.append(INFINITY)
        return places

    def element(self, t: Rational = 0, x: Rational = 0, y: Rational = 0, z: Rational = 0) -> "Quaternion":
        return Quaternion(self, Fraction(t), Fraction(x), Fraction(y), Fraction(z))

    def from_coords(self, coords: Sequence[Rational]) -> "Quaternion":
        return self.element(*coords)

    @property
    def one(self) -> "Quaternion":
        return self.element(1)

    @property
    def i(self) -> "Quaternion":
        return self.element(0, 1)

    @property
    def j(self) -> "Quaternion":
        return self.element(0, 0, 1)

    @property
    def k(self) -> "Quaternion":
        return self.element(0, 0, 0, 1)

    def basis(self) -> tuple["Quaternion", ...]:
        return (self.one, self.i, self.j, self.k)

    def contains_standard_order(self) -> bool:
        return self.a.denominator == 1 and self.b.denominator == 1

    def product_formula_holds(self) -> bool:
        sign = 1
        for v in relevant_places(self.a, self.b):
            sign *= hilbert_symbol(self.a, self.b, v)
        return sign == 1

    def __repr__(self) -> str:
        return f"QuaternionAlgebra({self.a}, {self.b}; ramified={self.ramified_places()})"


@dataclass(frozen=True)
class Quaternion:
    """An element t + x i + y j + z ij."""

    algebra: QuaternionAlgebra = field(repr=False)
    t: Fraction
    x: Fraction
    y: Fraction
    z: Fraction

    def coords(self) -> Tuple[Fraction, Fraction, Fraction, Fraction]:
        return (self.t, self.x, self.y, self.z)

    def _wrap(self, t, x, y, z) -> "Quaternion":
        return Quaternion(self.algebra, t, x, y, z)

    def __add__(self, other: "Quaternion") -> "Quaternion":
        if not isinstance(other, Quaternion):
            other = self.algebra.element(other)
        return self._wrap(self.t + other.t, self.x + other.x, self.y + other.y, self.z + other.z)

    __radd__ = __add__

    def __neg__(self) -> "Quaternion":
        return self._wrap(-self.t, -self.x, -self.y, -self.z)

    def __sub__(self, other: "Quaternion") -> "Quaternion":
        return self + (-other)

    def __mul__(self, other) -> "Quaternion":
        if not isinstance(other, Quaternion):
            s = Fraction(other)
            return self._wrap(s * self.t, s * self.x, s * self.y, s * self.z)
        a, b = self.algebra.a, self.algebra.b
        t1, x1, y1, z1 = self.coords()
        t2, x2, y2, z2 = other.coords()
        return self._wrap(
            t1 * t2 + a * x1 * x2 + b * y1 * y2 - a * b * z1 * z2,
            t1 * x2 + x1 * t2 - b * y1 * z2 + b * z1 * y2,
            t1 * y2 + y1 * t2 + a * x1 * z2 - a * z1 * x2,
            t1 * z2 + z1 * t2 + x1 * y2 - y1 * x2,
        )

    def __rmul__(self, other) -> "Quaternion":
        return self * other

    def __truediv__(self, other: Rational) -> "Quaternion":
        s = Fraction(other)
        if s == 0:
            raise InvalidInputError("division by zero")
        return self * (1 / s)

    def conj(self) -> "Quaternion":
        return self._wrap(self.t, -self.x, -self.y, -self.z)

    def nrd(self) -> Fraction:
        a, b = self.algebra.a, self.algebra.b
        return self.t**2 - a * self.x**2 - b * self.y**2 + a * b * self.z**2

    def trd(self) -> Fraction:
        return 2 * self.t

    def inverse(self) -> "Quaternion":
        n = self.nrd()
        if n == 0:
            raise InvalidInputError("zero divisor has no inverse")
        return self.conj() / n

    def is_zero(self) -> bool:
        return not any(self.coords())

    def is_pure(self) -> bool:
        return self.t == 0

    def __repr__(self) -> str:
        terms = []
        for c, name in zip(self.coords(), ("", "i", "j", "ij")):
            if c:
                terms.append(f"{c}{name}" if name else f"{c}")
        return " + ".join(terms) if terms else "0"


def quaternion_arith(q1: Quaternion, q2: Quaternion) -> dict:
    """Bundle of the basic operations on a pair of elements."""
    out = {
        "product": q1 * q2,
        "sum": q1 + q2,
        "conj": q1.conj(),
        "nrd": q1.nrd(),
        "trd": q1.trd(),
    }
    out["inverse"] = q1.inverse()
    return out


def bilinear_pairing(q1: Quaternion, q2: Quaternion) -> Fraction:
    """trd(q1 conj(q2)) / 2, so that the pairing of q with itself is nrd(q)."""
    return (q1 * q2.conj()).trd() / 2


def algebra_for_discriminant(N_minus: int, require_definite: bool = True) -> QuaternionAlgebra:
    """First (a, b) in a fixed search order ramified exactly at N_minus.

    a runs over -1, -2, -3, -5, ... and, for each a, b runs over -1, -2, -3, ...
    (positive b for indefinite algebras).
    """
    if N_minus < 1 or any(e > 1 for e in factorint(N_minus).values()):
        raise InvalidInputError(f"N_minus={N_minus} is not squarefree")
    target = frozenset(factorint(N_minus))
    if require_definite and len(target) % 2 == 0:
        raise InvalidInputError(
            f"N_minus={N_minus} has an even number of prime factors (even parity)",
            details={"N_minus": N_minus},
        )
    if not require_definite and len(target) % 2 == 1:
        raise InvalidInputError(f"N_minus={N_minus} has odd parity; no indefinite algebra")
    bound = 8 * N_minus + 16
    a_candidates = [-1] + [-q for q in primerange(2, bound)]
    sign = -1 if require_definite else 1
    for a in a_candidates:
        for n in range(1, 8 * N_minus * abs(a) + 16):
            b = sign * n
            alg = QuaternionAlgebra.from_pair(a, b)
            if alg.ramified_finite == target and alg.definite == require_definite:
                if not alg.product_formula_holds():
                    raise InternalInvariantError("Hilbert product formula failed", details={"a": a, "b": b})
                logger.debug("algebra of discriminant %d: (%d, %d)", N_minus, a, b)
                return alg
    raise InternalInvariantError(f"no algebra of discriminant {N_minus} in the search range")


# ─── Local splittings ─────────────────────────────────────────────────────────


@dataclass(frozen=True)
class PadicSplitting:
    """Matrices φ_p(i), φ_p(j) over Q_p, exact rationals accurate mod p^working."""

    p: int
    precision: int
    working: int
    image_i: Mat2
    image_j: Mat2
    denominator_exponent: int = 0
    aligned: bool = False

    def image(self, q: Quaternion) -> Mat2:
        t, x, y, z = q.coords()
        ij = mat_mul(self.image_i, self.image_j)
        out = mat_scale(IDENTITY, t)
        out = mat_add(out, mat_scale(self.image_i, x))
        out = mat_add(out, mat_scale(self.image_j, y))
        return mat_add(out, mat_scale(ij, z))

    def reduce(self, q: Quaternion, k: Optional[int] = None):
        return mat_mod(self.image(q), self.p, self.precision if k is None else k)

    def entry_mod(self, q: Quaternion, entry: Tuple[int, int], k: Optional[int] = None) -> int:
        r, c = entry
        return mod_pk(self.image(q)[r][c], self.p, self.precision if k is None else k)

    def verify(self, alg: QuaternionAlgebra) -> bool:
        """Defining relations, with det/trace compatibility, mod p^precision."""
        p, k = self.p, self.precision
        scale = Fraction(p) ** self.denominator_exponent
        ii = mat_scale(self.image_i, scale)
        jj = mat_scale(self.image_j, scale)
        s2 = scale * scale

        def congruent(x: Mat2, y: Mat2) -> bool:
            return mat_mod(x, p, k) == mat_mod(y, p, k)

        checks = [
            congruent(mat_mul(ii, ii), mat_scale(IDENTITY, alg.a * s2)),
            congruent(mat_mul(jj, jj), mat_scale(IDENTITY, alg.b * s2)),
            congruent(mat_mul(ii, jj), mat_scale(mat_mul(jj, ii), -1)),
        ]
        for q in (alg.one + alg.i + alg.j + alg.k, alg.element(2, 3, -1, 0)):
            img = mat_scale(self.image(q), s2)
            checks.append(mod_pk(mat_det(img) - q.nrd() * s2 * s2, p, k) == 0)
        return all(checks)


def _dyadic_frame(alg: QuaternionAlgebra, K: int) -> tuple[Quaternion, Quaternion]:
    """The frame at 2: a small pure x whose square is a 2-adic square, scaled to e.

    f is the component of a basis vector orthogonal to x.
    """
    box = sorted(product(range(-8, 9), repeat=3), key=lambda v: (max(map(abs, v)), v))
    for a, b, c in box:
        x = alg.element(0, a, b, c)
        t = (x * x).t
        if t == 0 or valuation(t, 2) % 2:
            continue
        v = valuation(t, 2)
        unit = t / Fraction(2) ** v
        if not is_unit_square(unit, 2):
            continue
        e = x * Fraction(1, 2 ** (v // 2) * hensel_sqrt(unit, 2, K + 1))
        break
    else:
        raise InvalidInputError(f"2 is ramified in {alg}", details={"prime": 2})
    norm = bilinear_pairing(x, x)
    for g in (alg.k, alg.j, alg.i):
        f = g * norm - x * bilinear_pairing(g, x)
        if f != alg.element(0):
            return e, f
    raise InternalInvariantError("no basis vector has a component orthogonal to the frame")


def _split_idempotent_frame(alg: QuaternionAlgebra, p: int, K: int) -> tuple[Quaternion, Quaternion]:
    """A pure e with e^2 ≡ 1 (mod p^K) and a pure f anticommuting with it."""
    if p == 2:
        return _dyadic_frame(alg, K)
    a, b = alg.a, alg.b
    s1, s2 = valuation(a, p) // 2, valuation(b, p) // 2
    u1 = alg.i / Fraction(p) ** s1
    u2 = alg.j / Fraction(p) ** s2
    A, C = u1.nrd() * -1, u2.nrd() * -1
    va, vc = valuation(A, p), valuation(C, p)

    def inv_sqrt(x: Fraction) -> Fraction:
        return Fraction(1, hensel_sqrt(x, p, K))

    e: Optional[Quaternion] = None
    if va == 0 and is_unit_square(A, p):
        e = u1 * inv_sqrt(A)
    elif vc == 0 and is_unit_square(C, p):
        e = u2 * inv_sqrt(C)
    elif va == 0 and vc == 0:
        for y in range(1, p):
            w = (1 - C * y * y) / A
            if valuation(w, p) == 0 and is_unit_square(w, p):
                e = u1 * Fraction(hensel_sqrt(w, p, K)) + u2 * y
                break
    elif va == 1 and vc == 1:
        u3 = (u1 * u2) / p
        E = -u3.nrd()
        if valuation(E, p) == 0 and is_unit_square(E, p):
            e = u3 * inv_sqrt(E)
    if e is None:
        raise InvalidInputError(f"p={p} is ramified in {alg}", details={"prime": p})
    for f in (alg.k, alg.j, alg.i):
        if bilinear_pairing(e, f) == 0:
            return e, f
    raise InternalInvariantError("no basis vector anticommutes with the idempotent frame")


def _frame_splitting(alg: QuaternionAlgebra, e: Quaternion, f: Quaternion) -> tuple[Mat2, Mat2]:
    d = (f * f).t
    images = [IDENTITY, mat(1, 0, 0, -1), mat(0, d, 1, 0), mat(0, d, -1, 0)]
    frame = [e.algebra.one, e, f, e * f]
    columns = linalg.transpose([q.coords() for q in frame])

    def phi(q: Quaternion) -> Mat2:
        coeffs = linalg.solve(columns, q.coords())
        out = mat_scale(IDENTITY, 0)
        for c, m in zip(coeffs, images):
            out = mat_add(out, mat_scale(m, c))
        return out

    return phi(alg.i), phi(alg.j)


def _align(p: int, image_i: Mat2, image_j: Mat2, order_basis: Sequence[Quaternion]) -> tuple[Mat2, Mat2]:
    """Conjugate so that the order maps onto M_2(Z_p)."""
    ij = mat_mul(image_i, image_j)

    def phi(q: Quaternion) -> Mat2:
        t, x, y, z = q.coords()
        out = mat_scale(IDENTITY, t)
        for c, m in ((x, image_i), (y, image_j), (z, ij)):
            out = mat_add(out, mat_scale(m, c))
        return out

    vectors = [(phi(q)[0][0], phi(q)[1][0]) for q in order_basis]
    pivot = min(vectors, key=lambda v: valuation(v[0], p))
    if pivot[0] == 0:
        raise InternalInvariantError("order does not span the first column")
    seconds = [w[1] - (w[0] / pivot[0]) * pivot[1] for w in vectors]
    w = min(seconds, key=lambda s: valuation(s, p))
    if w == 0:
        raise InternalInvariantError("order lattice is degenerate at p")
    frame = mat(pivot[0], 0, pivot[1], w)
    frame_inv = mat_inv(frame)
    return mat_prod(frame_inv, image_i, frame), mat_prod(frame_inv, image_j, frame)


@lru_cache(maxsize=256)
def _cached_splitting(alg: QuaternionAlgebra, p: int, M: int, order_basis: Optional[tuple]) -> PadicSplitting:
    K = working_precision(M)
    e, f = _split_idempotent_frame(alg, p, K)
    image_i, image_j = _frame_splitting(alg, e, f)
    if order_basis is not None:
        image_i, image_j = _align(p, image_i, image_j, order_basis)
    exponent = max(0, -min(mat_valuation(image_i, p), mat_valuation(image_j, p)))
    splitting = PadicSplitting(
        p=p,
        precision=M,
        working=K,
        image_i=image_i,
        image_j=image_j,
        denominator_exponent=exponent,
        aligned=order_basis is not None,
    )
    if not splitting.verify(alg):
        raise InternalInvariantError(f"splitting at {p} fails its defining relations")
    logger.debug("splitting at %d built to precision %d (working %d)", p, M, K)
    return splitting


def padic_splitting(
    alg: QuaternionAlgebra,
    p: int,
    M: int,
    order_basis: Optional[Iterable[Quaternion]] = None,
) -> PadicSplitting:
    """An isomorphism B ⊗ Q_p ≅ M_2(Q_p), optionally aligned to an order.

    Deterministic in its arguments.
    """
    if p in alg.ramified_finite:
        raise InvalidInputError(f"p={p} is ramified in the algebra", details={"prime": p})
    if M < 1:
        raise InvalidInputError("precision must be at least 1")
    basis = tuple(order_basis) if order_basis is not None else None
    return _cached_splitting(alg, p, M, basis)

