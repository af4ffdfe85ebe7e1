"""Quaternion orders, Eichler towers and right-ideal class sets.

Lattices here are rank-4 ``QuatLattice`` objects in the coordinates of
``Quaternion.coords()``. Local data at a prime q is read through a splitting
aligned with the fixed maximal order, so that R ⊗ Z_q is a standard Eichler
order of matrices.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import product
from math import gcd, isqrt
from typing import Iterable, Optional, Sequence

from sympy import factorint, isprime, nextprime

from gross_tower import linalg
from gross_tower.exceptions import InternalInvariantError, InvalidInputError
from gross_tower.lattice import QuatLattice, short_vectors
from gross_tower.mass import eichler_mass
from gross_tower.padic import (
    Mat2,
    mat,
    mat_flatten,
    mat_inv,
    mat_mul,
    mat_valuation,
    mod_pk,
    valuation,
)
from gross_tower.quaternion import (
    PadicSplitting,
    Quaternion,
    QuaternionAlgebra,
    bilinear_pairing,
    padic_splitting,
)

logger = logging.getLogger(__name__)


# ─── Lattices of quaternions ──────────────────────────────────────────────────


def lattice_of(elements: Iterable[Quaternion]) -> QuatLattice:
    return QuatLattice.from_generators([q.coords() for q in elements])


def quats_of(alg: QuaternionAlgebra, lattice: QuatLattice) -> list[Quaternion]:
    return [alg.from_coords(row) for row in lattice.basis]


def element_of(alg: QuaternionAlgebra, lattice: QuatLattice, coeffs: Sequence[int]) -> Quaternion:
    return alg.from_coords(lattice.combination(coeffs))


def contains(lattice: QuatLattice, q: Quaternion) -> bool:
    return q.coords() in lattice


def lattice_product(alg: QuaternionAlgebra, left: QuatLattice, right: QuatLattice) -> QuatLattice:
    xs, ys = quats_of(alg, left), quats_of(alg, right)
    return lattice_of(x * y for x in xs for y in ys)


def right_multiply(alg: QuaternionAlgebra, lattice: QuatLattice, b: Quaternion) -> QuatLattice:
    return lattice_of(x * b for x in quats_of(alg, lattice))


def left_multiply(alg: QuaternionAlgebra, b: Quaternion, lattice: QuatLattice) -> QuatLattice:
    return lattice_of(b * x for x in quats_of(alg, lattice))


def conjugate_lattice(alg: QuaternionAlgebra, lattice: QuatLattice) -> QuatLattice:
    return lattice_of(x.conj() for x in quats_of(alg, lattice))


def norm_gram(alg: QuaternionAlgebra, lattice: QuatLattice) -> list[list[Fraction]]:
    """Gram matrix of the bilinear form whose quadratic form is nrd."""
    xs = quats_of(alg, lattice)
    return [[bilinear_pairing(x, y) for y in xs] for x in xs]


def _rational_gcd(values: Iterable[Fraction]) -> Fraction:
    values = [Fraction(v) for v in values if v != 0]
    den = 1
    for v in values:
        den = den * v.denominator // gcd(den, v.denominator)
    g = 0
    for v in values:
        g = gcd(g, int(v * den))
    return Fraction(g, den)


def reduced_norm(alg: QuaternionAlgebra, lattice: QuatLattice) -> Fraction:
    """nrd(L): the positive generator of the Z-module spanned by nrd(L)."""
    xs = quats_of(alg, lattice)
    values = [x.nrd() for x in xs]
    values += [(x * y.conj()).trd() for n, x in enumerate(xs) for y in xs[n + 1 :]]
    return _rational_gcd(values)


def left_order(alg: QuaternionAlgebra, lattice: QuatLattice) -> QuatLattice:
    """{x : x L ⊂ L} as the intersection of the lattices L e^-1."""
    out: Optional[QuatLattice] = None
    for e in quats_of(alg, lattice):
        piece = right_multiply(alg, lattice, e.inverse())
        out = piece if out is None else out.intersection(piece)
    return out


def right_order(alg: QuaternionAlgebra, lattice: QuatLattice) -> QuatLattice:
    out: Optional[QuatLattice] = None
    for e in quats_of(alg, lattice):
        piece = left_multiply(alg, e.inverse(), lattice)
        out = piece if out is None else out.intersection(piece)
    return out


def lattice_inverse(alg: QuaternionAlgebra, lattice: QuatLattice) -> QuatLattice:
    """conj(L)/nrd(L), so that L · L^-1 is the left order of L."""
    return conjugate_lattice(alg, lattice).scale(1 / reduced_norm(alg, lattice))


def is_order(alg: QuaternionAlgebra, lattice: QuatLattice) -> bool:
    if alg.one.coords() not in lattice:
        return False
    xs = quats_of(alg, lattice)
    return all((x * y).coords() in lattice for x in xs for y in xs)


def reduced_discriminant(alg: QuaternionAlgebra, lattice: QuatLattice) -> int:
    xs = quats_of(alg, lattice)
    d = abs(linalg.det([[(x * y).trd() for y in xs] for x in xs]))
    if d.denominator != 1 or isqrt(d.numerator) ** 2 != d.numerator:
        raise InternalInvariantError(f"discriminant {d} is not a square integer")
    return isqrt(d.numerator)


@dataclass(frozen=True)
class Order:
    """An order of B given by its lattice, tagged with its Eichler level."""

    algebra: QuaternionAlgebra = field(repr=False)
    lattice: QuatLattice
    level: int = 1
    is_eichler: bool = True

    def basis(self) -> list[Quaternion]:
        return quats_of(self.algebra, self.lattice)

    def __contains__(self, q: Quaternion) -> bool:
        return contains(self.lattice, q)

    @property
    def discriminant(self) -> int:
        return reduced_discriminant(self.algebra, self.lattice)

    def check_axioms(self) -> bool:
        return is_order(self.algebra, self.lattice)

    def index_in(self, other: "Order") -> int:
        idx = self.lattice.index_in(other.lattice)
        if idx.denominator != 1:
            raise InvalidInputError("order is not contained in the other")
        return int(idx)


def _ring_closure(alg: QuaternionAlgebra, lattice: QuatLattice, rounds: int = 6) -> Optional[QuatLattice]:
    current = lattice
    for _ in range(rounds):
        grown = current + lattice_product(alg, current, current)
        if grown == current:
            return current
        current = grown
    return None


def _is_integral(q: Quaternion) -> bool:
    return q.trd().denominator == 1 and q.nrd().denominator == 1


def maximal_order(alg: QuaternionAlgebra) -> Order:
    """Saturate Z<1, i, j, ij> until the discriminant equals disc(B)."""
    if not alg.contains_standard_order():
        raise InvalidInputError("algebra parameters must be integers")
    lattice = lattice_of(alg.basis())
    target = alg.discriminant
    disc = reduced_discriminant(alg, lattice)
    while disc != target:
        if disc % target:
            raise InternalInvariantError(f"discriminant {disc} is not a multiple of {target}")
        enlarged = None
        for q in sorted(factorint(disc // target)):
            basis = quats_of(alg, lattice)
            for coeffs in product(range(q), repeat=4):
                if not any(coeffs):
                    continue
                x = sum((b * c for b, c in zip(basis, coeffs)), alg.element()) / q
                if not _is_integral(x):
                    continue
                closure = _ring_closure(alg, QuatLattice.from_generators(lattice.rows() + [x.coords()]))
                if closure is not None and is_order(alg, closure):
                    enlarged = closure
                    break
            if enlarged is not None:
                break
        if enlarged is None:
            raise InternalInvariantError(f"cannot enlarge order of discriminant {disc}")
        lattice = enlarged
        disc = reduced_discriminant(alg, lattice)
        logger.debug("saturated order to discriminant %d", disc)
    return Order(alg, lattice, level=1)


# ─── Local replacement ────────────────────────────────────────────────────────


def splitting_preimage(alg: QuaternionAlgebra, splitting: PadicSplitting, m: Mat2) -> Quaternion:
    """The element of B ⊗ Q with image m (a Q-rational matrix)."""
    columns = linalg.transpose([mat_flatten(splitting.image(b)) for b in alg.basis()])
    return alg.from_coords(linalg.solve(columns, mat_flatten(m)))


def local_replace(
    alg: QuaternionAlgebra,
    lattice: QuatLattice,
    q: int,
    x: Mat2,
    splitting: PadicSplitting,
    level_exponent: int = 0,
) -> QuatLattice:
    """The lattice equal to L away from q and to R_q·x at q.

    R_q is the matrix order with lower-left entry ≡ 0 mod q^level_exponent,
    read through ``splitting``.
    """
    x_inv = mat_inv(x)
    elements = quats_of(alg, lattice)
    k_a = max(0, max(level_exponent - mat_valuation(mat_mul(splitting.image(e), x_inv), q) for e in elements))
    qe = q**level_exponent
    local_basis = [mat(1, 0, 0, 0), mat(0, 1, 0, 0), mat(0, 0, qe, 0), mat(0, 0, 0, 1)]
    k_b = 0
    for m in local_basis:
        pre = splitting_preimage(alg, splitting, mat_mul(m, x))
        coords = lattice.coordinates(pre.coords())
        k_b = max(k_b, max(-valuation(c, q) for c in coords if c != 0))
    k = max(k_a, k_b)
    wide = lattice.scale(Fraction(1, q**k))
    mats = [mat_mul(splitting.image(w), x_inv) for w in quats_of(alg, wide)]
    s = max(0, max(-mat_valuation(m, q) for m in mats))
    modulus = q ** (s + level_exponent)
    upper = Fraction(q) ** (s + level_exponent)
    lower = Fraction(q) ** s
    values = [
        [
            mod_pk(m[0][0] * upper, q, s + level_exponent),
            mod_pk(m[0][1] * upper, q, s + level_exponent),
            mod_pk(m[1][1] * upper, q, s + level_exponent),
            mod_pk(m[1][0] * lower, q, s + level_exponent),
        ]
        for m in mats
    ]
    return wide.congruence_kernel(values, modulus)


# ─── Eichler tower ────────────────────────────────────────────────────────────


@dataclass
class EichlerTower:
    """Orders R_0 ⊃ R_1 ⊃ ... of level N⁺p^m inside a fixed maximal order."""

    algebra: QuaternionAlgebra
    N_plus: int
    p: int
    m_max: int
    precision: int
    maximal: Order
    orders: list[Order] = field(default_factory=list)
    _splittings: dict[int, PadicSplitting] = field(default_factory=dict, repr=False)

    @property
    def N_minus(self) -> int:
        return self.algebra.discriminant

    @property
    def N(self) -> int:
        return self.N_minus * self.N_plus

    def splitting_at(self, q: int) -> PadicSplitting:
        """Splitting at q aligned with the maximal order (cached)."""
        if q not in self._splittings:
            self._splittings[q] = padic_splitting(self.algebra, q, self.precision, self.maximal.basis())
        return self._splittings[q]

    @property
    def splitting(self) -> PadicSplitting:
        return self.splitting_at(self.p)

    def order(self, m: int) -> Order:
        if not 0 <= m < len(self.orders):
            raise InvalidInputError(f"level {m} is outside the tower (m_max={self.m_max})")
        return self.orders[m]

    def local_exponent(self, q: int, m: int) -> int:
        """Exponent of q in the level of R_m."""
        if q == self.p:
            return m
        return valuation(self.N_plus, q) if self.N_plus % q == 0 else 0

    def upper_left(self, q: Quaternion, m: int) -> int:
        """Upper-left entry of φ_p(q) mod p^m."""
        return self.splitting.entry_mod(q, (0, 0), m)

    def check_local_shape(self, m: int) -> bool:
        """φ_p(R_m) lies in the standard Eichler order of level p^m."""
        sp = self.splitting
        for b in self.order(m).basis():
            image = sp.image(b)
            if mat_valuation(image, self.p) < 0:
                return False
            if m and mod_pk(image[1][0], self.p, m):
                return False
        return True


def _congruence_order(alg: QuaternionAlgebra, lattice: QuatLattice, sp: PadicSplitting, exponent: int) -> QuatLattice:
    if exponent == 0:
        return lattice
    values = [[sp.entry_mod(b, (1, 0), exponent)] for b in quats_of(alg, lattice)]
    return lattice.congruence_kernel(values, sp.p**exponent)


def eichler_order_tower(
    alg: QuaternionAlgebra,
    N_plus: int,
    p: int,
    m_max: int,
    precision: int = 8,
) -> EichlerTower:
    if not isprime(p):
        raise InvalidInputError(f"p={p} is not prime")
    if (alg.discriminant * N_plus) % p == 0:
        raise InvalidInputError(f"p={p} divides N", details={"prime": p})
    if gcd(N_plus, alg.discriminant) != 1:
        raise InvalidInputError("N_plus must be coprime to the discriminant")
    if not alg.definite:
        raise InvalidInputError("Eichler towers are built in definite algebras only")
    tower = EichlerTower(
        algebra=alg,
        N_plus=N_plus,
        p=p,
        m_max=m_max,
        precision=max(precision, m_max + 1),
        maximal=maximal_order(alg),
    )
    lattice = tower.maximal.lattice
    for q, e in sorted(factorint(N_plus).items()):
        lattice = _congruence_order(alg, lattice, tower.splitting_at(q), e)
    tower.orders.append(Order(alg, lattice, level=N_plus))
    for m in range(1, m_max + 1):
        sub = _congruence_order(alg, lattice, tower.splitting, m)
        tower.orders.append(Order(alg, sub, level=N_plus * p**m))
    for m in range(m_max):
        idx = tower.orders[m + 1].index_in(tower.orders[m])
        if idx != p:
            raise InternalInvariantError(f"[R_{m}:R_{m + 1}] = {idx}, expected {p}")
    logger.info("Eichler tower built: disc %d, N+ %d, p %d, depth %d", alg.discriminant, N_plus, p, m_max)
    return tower


# ─── Units and class sets ─────────────────────────────────────────────────────


def unit_group(alg: QuaternionAlgebra, lattice: QuatLattice) -> tuple[Quaternion, ...]:
    """All elements of reduced norm 1 in an order, sorted by coordinates."""
    found = short_vectors(norm_gram(alg, lattice), 1)
    units = [element_of(alg, lattice, x) for x, value in found if value == 1]
    return tuple(sorted(units, key=lambda u: u.coords()))


def _span_mod(rows: Sequence[Sequence[int]], ell: int) -> set[tuple[int, ...]]:
    basis: list[list[int]] = []
    for r in rows:
        v = [a % ell for a in r]
        for b in basis:
            lead = next(i for i, a in enumerate(b) if a)
            if v[lead]:
                f = v[lead]
                v = [(a - f * c) % ell for a, c in zip(v, b)]
        if any(v):
            lead = next(i for i, a in enumerate(v) if a)
            inv = pow(v[lead], -1, ell)
            v = [a * inv % ell for a in v]
            basis = [
                [(a - b[lead] * c) % ell for a, c in zip(b, v)] if b[lead] else b for b in basis
            ]
            basis.append(v)
    span = set()
    for coeffs in product(range(ell), repeat=len(basis)):
        span.add(tuple(sum(c * b[i] for c, b in zip(coeffs, basis)) % ell for i in range(len(rows[0]))))
    return span


def neighbors(alg: QuaternionAlgebra, order: QuatLattice, ideal: QuatLattice, ell: int) -> list[QuatLattice]:
    """The ell+1 left ideals J with ell·I ⊂ J ⊂ I and [I : J] = ell^2."""
    n_ideal = reduced_norm(alg, ideal)
    elems = quats_of(alg, ideal)
    diag = [int(e.nrd() / n_ideal) % ell for e in elems]
    cross = {(a, b): int((elems[a] * elems[b].conj()).trd() / n_ideal) % ell for a in range(4) for b in range(a + 1, 4)}
    ell_ideal = ideal.scale(ell)
    order_elems = quats_of(alg, order)
    covered: set[tuple[int, ...]] = set()
    found: list[QuatLattice] = []
    for c in product(range(ell), repeat=4):
        if not any(c) or c in covered:
            continue
        value = sum(diag[a] * c[a] * c[a] for a in range(4))
        value += sum(v * c[a] * c[b] for (a, b), v in cross.items())
        if value % ell:
            continue
        beta = sum((e * k for e, k in zip(elems, c)), alg.element())
        J = lattice_of([r * beta for r in order_elems]) + ell_ideal
        coords = [[int(v) for v in ideal.coordinates(row)] for row in J.basis]
        covered |= _span_mod(coords, ell)
        found.append(J)
        if len(found) == ell + 1:
            break
    if len(found) != ell + 1:
        raise InternalInvariantError(f"found {len(found)} {ell}-neighbors, expected {ell + 1}")
    return sorted(found, key=lambda L: L.basis)


@dataclass
class RightIdealClassSet:
    """Representatives I_1, ..., I_h of the left R-ideal classes.

    I_1 is R itself and every representative is trivial at the primes in
    ``avoid`` (they are reached through ``neighbor_prime``-neighbors only).
    """

    order: Order
    reps: list[QuatLattice] = field(default_factory=list)
    right_orders: list[Order] = field(default_factory=list)
    unit_groups: list[tuple[Quaternion, ...]] = field(default_factory=list)
    neighbor_prime: int = 2
    _inverses: list[QuatLattice] = field(default_factory=list, repr=False)
    _norms: list[Fraction] = field(default_factory=list, repr=False)

    @property
    def algebra(self) -> QuaternionAlgebra:
        return self.order.algebra

    @property
    def h(self) -> int:
        return len(self.reps)

    @property
    def mass(self) -> Fraction:
        return sum((Fraction(2, len(g)) for g in self.unit_groups), Fraction(0))

    def _add(self, ideal: QuatLattice) -> None:
        alg = self.algebra
        right = Order(alg, right_order(alg, ideal), level=self.order.level, is_eichler=self.order.is_eichler)
        self.reps.append(ideal)
        self.right_orders.append(right)
        self.unit_groups.append(unit_group(alg, right.lattice))
        self._inverses.append(lattice_inverse(alg, ideal))
        self._norms.append(reduced_norm(alg, ideal))

    def try_classify(self, J: QuatLattice) -> Optional[tuple[int, Quaternion]]:
        alg = self.algebra
        n_J = reduced_norm(alg, J)
        for i in range(self.h):
            target = n_J / self._norms[i]
            quotient = lattice_product(alg, self._inverses[i], J)
            for x, value in short_vectors(norm_gram(alg, quotient), target):
                if value != target:
                    continue
                b = element_of(alg, quotient, x)
                if right_multiply(alg, self.reps[i], b) == J:
                    return i, b
        return None

    def classify(self, J: QuatLattice) -> tuple[int, Quaternion]:
        found = self.try_classify(J)
        if found is None:
            raise InternalInvariantError("lattice matches no ideal class", details={"basis": [list(map(str, r)) for r in J.basis]})
        return found

    def stabilizer_size(self, i: int) -> int:
        return len(self.unit_groups[i]) // 2


def neighbor_prime_for(order: Order, avoid: Iterable[int] = ()) -> int:
    bad = order.algebra.discriminant * order.level
    for q in avoid:
        bad *= q
    ell = 2
    while bad % ell == 0:
        ell = nextprime(ell)
    return ell


def right_class_set(order: Order, *, avoid: Iterable[int] = ()) -> RightIdealClassSet:
    """Breadth-first neighbor search, stopped and certified by the mass formula."""
    alg = order.algebra
    if not alg.definite:
        raise InvalidInputError("class sets are only enumerated in definite algebras")
    ell = neighbor_prime_for(order, avoid)
    target = eichler_mass(alg.discriminant, order.level)
    classes = RightIdealClassSet(order=order, neighbor_prime=ell)
    classes._add(order.lattice)
    cursor = 0
    while classes.mass < target:
        if cursor >= classes.h:
            raise InternalInvariantError(
                "neighbor search exhausted before reaching the mass",
                details={"mass": str(classes.mass), "expected": str(target)},
            )
        for J in neighbors(alg, order.lattice, classes.reps[cursor], ell):
            if classes.try_classify(J) is None:
                classes._add(J)
                logger.debug("new ideal class %d (mass %s of %s)", classes.h, classes.mass, target)
        cursor += 1
    if classes.mass != target:
        raise InternalInvariantError(
            "class set mass does not match the Eichler mass",
            details={"mass": str(classes.mass), "expected": str(target)},
        )
    logger.info("class set of level %d: h = %d", order.level, classes.h)
    return classes


def classify_right_ideal(J: QuatLattice, classes: RightIdealClassSet) -> tuple[int, Quaternion]:
    """(i, b) with J = I_i · b."""
    return classes.classify(J)
