"""Imaginary quadratic fields, ring class groups and their Galois groups.

Elements of K = Q(√-D) are pairs (u, v) of rationals meaning u + v√-D.
Ring class groups Pic(O_c) are modelled by reduced primitive binary
quadratic forms of discriminant c²·D_K; Galois elements are carried as
idele representatives: an optional ideal of O_c plus explicit unit
components at finitely many primes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import product
from math import gcd
from typing import Iterable, Optional

from sympy import factorint, legendre_symbol, nextprime, primerange, totient
from sympy.core.intfunc import igcdex

from gross_tower.config import is_fundamental_discriminant, working_precision
from gross_tower.exceptions import InternalInvariantError, InvalidInputError, PreconditionError
from gross_tower.lattice import QuatLattice, short_vectors
from gross_tower.padic import mod_pk, one_unit_sqrt, teichmuller, valuation, wild_part

logger = logging.getLogger(__name__)

KElt = tuple[Fraction, Fraction]


# ─── The field ────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class ImagQuadField:
    """K = Q(√-D) with fundamental discriminant D_K."""

    D_K: int
    D: int

    @classmethod
    def from_discriminant(cls, D_K: int) -> "ImagQuadField":
        if not is_fundamental_discriminant(D_K):
            raise InvalidInputError(f"D_K={D_K} is not a negative fundamental discriminant")
        return cls(D_K, -D_K if D_K % 4 == 1 else -D_K // 4)

    @classmethod
    def from_D(cls, D: int) -> "ImagQuadField":
        return cls.from_discriminant(-D if (-D) % 4 == 1 else -4 * D)

    # arithmetic on (u, v)

    def mul(self, x: KElt, y: KElt) -> KElt:
        return (x[0] * y[0] - self.D * x[1] * y[1], x[0] * y[1] + x[1] * y[0])

    def conj(self, x: KElt) -> KElt:
        return (x[0], -x[1])

    def norm(self, x: KElt) -> Fraction:
        return x[0] * x[0] + self.D * x[1] * x[1]

    def inv(self, x: KElt) -> KElt:
        n = self.norm(x)
        return (x[0] / n, -x[1] / n)

    def pairing(self, x: KElt, y: KElt) -> Fraction:
        """Bilinear form with pairing(x, x) = N(x)."""
        return x[0] * y[0] + self.D * x[1] * y[1]

    @property
    def omega(self) -> KElt:
        """Generator of O_K over Z."""
        if self.D_K % 4 == 1:
            return (Fraction(1, 2), Fraction(1, 2))
        return (Fraction(0), Fraction(1))

    @property
    def sqrt_disc(self) -> KElt:
        """√D_K in (u, v) coordinates."""
        return (Fraction(0), Fraction(1 if self.D_K % 4 == 1 else 2))

    def order_lattice(self, c: int) -> QuatLattice:
        w = self.omega
        return QuatLattice.from_generators([(1, 0), (c * w[0], c * w[1])])

    def units(self, c: int = 1) -> list[KElt]:
        """The unit group of O_c."""
        one = (Fraction(1), Fraction(0))
        out = [one, (Fraction(-1), Fraction(0))]
        if c == 1 and self.D_K == -4:
            out += [(Fraction(0), Fraction(1)), (Fraction(0), Fraction(-1))]
        if c == 1 and self.D_K == -3:
            zeta = (Fraction(1, 2), Fraction(1, 2))
            power = zeta
            out = []
            for _ in range(6):
                out.append(power)
                power = self.mul(power, zeta)
        return sorted(out)

    def unit_count(self, c: int = 1) -> int:
        return len(self.units(c))

    def kronecker(self, q: int) -> int:
        if q == 2:
            if self.D_K % 2 == 0:
                return 0
            return 1 if self.D_K % 8 == 1 else -1
        if self.D_K % q == 0:
            return 0
        return legendre_symbol(self.D_K % q, q)

    def prime_behavior(self, q: int) -> str:
        return {1: "split", -1: "inert", 0: "ramified"}[self.kronecker(q)]

    def prime_behavior_by_search(self, q: int) -> str:
        """Independent check: roots of x² ≡ D_K modulo 4q."""
        modulus = 4 * q
        roots = sum(1 for x in range(modulus) if (x * x - self.D_K) % modulus == 0)
        if self.D_K % q == 0:
            return "ramified"
        return "split" if roots else "inert"


def check_heegner_hypothesis(N_plus: int, N_minus: int, K: ImagQuadField, p: int) -> tuple[bool, dict]:
    """Every q | N⁺ splits and every q | N⁻ is inert; returns (holds, per-prime report)."""
    N = N_plus * N_minus
    if gcd(K.D_K, N * p) != 1:
        offending = sorted(q for q in factorint(N * p) if K.D_K % q == 0)
        raise InvalidInputError(
            f"D_K={K.D_K} is not coprime to Np (shares {offending})", details={"primes": offending}
        )
    report = {}
    holds = True
    for q in sorted(factorint(N_plus)):
        behavior = K.prime_behavior(q)
        if behavior != K.prime_behavior_by_search(q):
            raise InternalInvariantError(f"splitting of {q} disagrees with brute force")
        report[q] = {"divides": "N_plus", "behavior": behavior, "ok": behavior == "split"}
        holds &= behavior == "split"
    for q in sorted(factorint(N_minus)):
        behavior = K.prime_behavior(q)
        if behavior != K.prime_behavior_by_search(q):
            raise InternalInvariantError(f"splitting of {q} disagrees with brute force")
        report[q] = {"divides": "N_minus", "behavior": behavior, "ok": behavior == "inert"}
        holds &= behavior == "inert"
    return holds, report


# ─── Binary quadratic forms ──────────────────────────────────────────────────


@dataclass(frozen=True, order=True)
class BinaryQF:
    """The form a·x² + b·xy + c·y²."""

    a: int
    b: int
    c: int

    @property
    def discriminant(self) -> int:
        return self.b * self.b - 4 * self.a * self.c

    def is_primitive(self) -> bool:
        return gcd(gcd(self.a, self.b), self.c) == 1

    def is_reduced(self) -> bool:
        a, b, c = self.a, self.b, self.c
        return abs(b) <= a <= c and not (b < 0 and (abs(b) == a or a == c))

    def normalized(self) -> "BinaryQF":
        a, b, c = self.a, self.b, self.c
        if -a < b <= a:
            return self
        r = (a - b) // (2 * a)
        return BinaryQF(a, b + 2 * r * a, a * r * r + b * r + c)

    def reduced(self) -> "BinaryQF":
        f = self.normalized()
        while f.a > f.c or (f.a == f.c and f.b < 0):
            f = BinaryQF(f.c, -f.b, f.a).normalized()
        return f

    def inverse(self) -> "BinaryQF":
        return BinaryQF(self.a, -self.b, self.c).reduced()

    def compose(self, other: "BinaryQF") -> "BinaryQF":
        """Gaussian composition (Cohen, Algorithm 5.4.7), reduced."""
        delta = self.discriminant
        if other.discriminant != delta:
            raise InvalidInputError("forms of different discriminants do not compose")
        f1, f2 = (self, other) if self.a <= other.a else (other, self)
        a1, b1, c1 = f1.a, f1.b, f1.c
        a2, b2, c2 = f2.a, f2.b, f2.c
        s = (b1 + b2) // 2
        n = b2 - s
        if a2 % a1 == 0:
            y1, d = 0, a1
        else:
            u, _, d = map(int, igcdex(a2, a1))
            y1 = u
        if s % d == 0:
            y2, x2, d1 = -1, 0, d
        else:
            x2, y2, d1 = map(int, igcdex(s, d))
            y2 = -y2
        v1, v2 = a1 // d1, a2 // d1
        r = (y1 * y2 * n - x2 * c2) % v1
        b3 = b2 + 2 * v2 * r
        a3 = v1 * v2
        c3 = (b3 * b3 - delta) // (4 * a3)
        return BinaryQF(a3, b3, c3).reduced()

    def __mul__(self, other: "BinaryQF") -> "BinaryQF":
        return self.compose(other)

    def __pow__(self, n: int) -> "BinaryQF":
        result = principal_form(self.discriminant)
        base = self if n >= 0 else self.inverse()
        n = abs(n)
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def to_list(self) -> list[int]:
        return [self.a, self.b, self.c]


def principal_form(delta: int) -> BinaryQF:
    b = delta % 2
    return BinaryQF(1, b, (b * b - delta) // 4)


def reduced_forms(delta: int) -> list[BinaryQF]:
    """All reduced primitive positive definite forms of discriminant delta."""
    out = []
    a = 1
    while 3 * a * a <= -delta:
        for b in range(-a + 1, a + 1):
            if (b - delta) % 2 or (b * b - delta) % (4 * a):
                continue
            c = (b * b - delta) // (4 * a)
            f = BinaryQF(a, b, c)
            if c >= a and f.is_reduced() and f.is_primitive():
                out.append(f)
        a += 1
    return sorted(out)


def class_number_formula(K: ImagQuadField, c: int, h_K: Optional[int] = None) -> int:
    """h(O_c) = h_K·c/[O_K^x : O_c^x]·∏(1 - (D_K/q)/q)."""
    if h_K is None:
        h_K = len(reduced_forms(K.D_K))
    value = Fraction(h_K * c, K.unit_count(1) // K.unit_count(c))
    for q in factorint(c):
        value *= 1 - Fraction(K.kronecker(q), q)
    if value.denominator != 1:
        raise InternalInvariantError("class number formula is not integral")
    return int(value)


# ─── Ideals of orders ─────────────────────────────────────────────────────────


def form_to_ideal(K: ImagQuadField, c: int, f: BinaryQF) -> QuatLattice:
    """The O_c-ideal [a, (-b + √Δ)/2] attached to f."""
    s = K.sqrt_disc
    return QuatLattice.from_generators([(f.a, 0), (Fraction(-f.b, 2) + c * s[0] / 2, c * s[1] / 2)])


def ideal_norm(K: ImagQuadField, c: int, ideal: QuatLattice) -> Fraction:
    return ideal.covolume / K.order_lattice(c).covolume


def ideal_to_form(K: ImagQuadField, c: int, ideal: QuatLattice) -> BinaryQF:
    w1, w2 = ideal.basis
    if w1[0] * w2[1] - w1[1] * w2[0] < 0:
        w1, w2 = w2, w1
    n = ideal_norm(K, c, ideal)
    a = K.norm(w1) / n
    b = -2 * K.pairing(w1, w2) / n
    cc = K.norm(w2) / n
    if a.denominator != 1 or b.denominator != 1 or cc.denominator != 1:
        raise InternalInvariantError("ideal norm form is not integral")
    return BinaryQF(int(a), int(b), int(cc)).reduced()


def ideal_product(K: ImagQuadField, I: QuatLattice, J: QuatLattice) -> QuatLattice:
    return QuatLattice.from_generators([K.mul(x, y) for x in I.basis for y in J.basis])


def principal_generator(K: ImagQuadField, c: int, ideal: QuatLattice) -> Optional[KElt]:
    """λ with ideal = λ·O_c, or None when the ideal is not principal."""
    n = ideal_norm(K, c, ideal)
    gram = [[K.pairing(x, y) for y in ideal.basis] for x in ideal.basis]
    order = K.order_lattice(c)
    for coeffs, value in short_vectors(gram, n):
        if value != n:
            continue
        lam = ideal.combination(coeffs)
        if QuatLattice.from_generators([K.mul(lam, w) for w in order.basis]) == ideal:
            return lam
    return None


# ─── Ring class groups ───────────────────────────────────────────────────────


@dataclass
class RingClassGroup:
    """Pic(O_c) as reduced forms of discriminant c²·D_K."""

    field: ImagQuadField
    conductor: int
    forms: list[BinaryQF]

    @property
    def discriminant(self) -> int:
        return self.conductor**2 * self.field.D_K

    @property
    def identity(self) -> BinaryQF:
        return principal_form(self.discriminant)

    @property
    def order(self) -> int:
        return len(self.forms)

    def compose(self, f: BinaryQF, g: BinaryQF) -> BinaryQF:
        return f.compose(g)

    def element_order(self, f: BinaryQF) -> int:
        k, g = 1, f
        while g != self.identity:
            g = g * f
            k += 1
        return k

    def index(self, f: BinaryQF) -> int:
        return self.forms.index(f.reduced())


def ring_class_group(K: ImagQuadField, c: int) -> RingClassGroup:
    if c < 1:
        raise InvalidInputError("conductor must be positive")
    forms = reduced_forms(c * c * K.D_K)
    group = RingClassGroup(K, c, forms)
    expected = class_number_formula(K, c, len(reduced_forms(K.D_K)))
    if group.order != expected:
        raise InternalInvariantError(
            f"|Pic(O_{c})| = {group.order} but the class number formula gives {expected}"
        )
    return group


# ─── Idele representatives ───────────────────────────────────────────────────


@dataclass(frozen=True)
class GaloisElement:
    """An idele representative: an O_c-ideal (None means trivial) and unit
    components (u, v) at finitely many primes."""

    ideal: Optional[QuatLattice] = None
    local: tuple[tuple[int, KElt], ...] = ()
    label: str = ""

    def component(self, q: int) -> Optional[KElt]:
        for prime, x in self.local:
            if prime == q:
                return x
        return None

    def times(self, K: ImagQuadField, other: "GaloisElement", modulus_at: Optional[dict[int, int]] = None) -> "GaloisElement":
        local = dict(self.local)
        for q, x in other.local:
            local[q] = K.mul(local[q], x) if q in local else x
        if modulus_at:
            for q, modulus in modulus_at.items():
                if q in local:
                    u, v = local[q]
                    local[q] = (Fraction(mod_pk(u, q, modulus)), Fraction(mod_pk(v, q, modulus)))
        if self.ideal is None:
            ideal = other.ideal
        elif other.ideal is None:
            ideal = self.ideal
        else:
            ideal = ideal_product(K, self.ideal, other.ideal)
        label = "*".join(x for x in (self.label, other.label) if x)
        return GaloisElement(ideal, tuple(sorted(local.items())), label)


def reduce_unit(x: KElt, p: int, k: int) -> tuple[int, int]:
    return (mod_pk(x[0], p, k), mod_pk(x[1], p, k))


def _mul_mod(K: ImagQuadField, x: tuple[int, int], y: tuple[int, int], modulus: int) -> tuple[int, int]:
    return ((x[0] * y[0] - K.D * x[1] * y[1]) % modulus, (x[0] * y[1] + x[1] * y[0]) % modulus)


@dataclass
class ExtendedGaloisGroup:
    """Gal(H_{cp^m}(μ_{p^m})/K) as pairs (form class, unit of (O_K/p^m)^x).

    The unit coordinate is taken modulo the image of O_c^x; the product of
    (C1, x1) and (C2, x2) is (C1·C2, x1·x2·λ^-1) where q1·q2 = λ·q3 for the
    chosen prime-ideal representatives.
    """

    field: ImagQuadField
    c: int
    m: int
    p: int
    pic: RingClassGroup
    prime_reps: dict[BinaryQF, tuple[int, QuatLattice]] = field(default_factory=dict)

    @property
    def modulus(self) -> int:
        return self.p**self.m

    @cached_property
    def _units(self) -> list[tuple[int, int]]:
        return [reduce_unit(e, self.p, self.m) for e in self.field.units(self.c)]

    def canonical_unit(self, x: tuple[int, int]) -> tuple[int, int]:
        n = self.modulus
        return min(_mul_mod(self.field, x, e, n) for e in self._units)

    def unit_classes(self) -> list[tuple[int, int]]:
        n = self.modulus
        out = set()
        for u, v in product(range(n), repeat=2):
            if (u * u + self.field.D * v * v) % self.p:
                out.add(self.canonical_unit((u, v)))
        return sorted(out)

    def elements(self) -> list[tuple[BinaryQF, tuple[int, int]]]:
        return [(f, x) for f in self.pic.forms for x in self.unit_classes()]

    @property
    def order(self) -> int:
        return self.pic.order * len(self.unit_classes())

    def identity(self) -> tuple[BinaryQF, tuple[int, int]]:
        return (self.pic.identity, self.canonical_unit((1, 0)))

    def _cocycle(self, f1: BinaryQF, f2: BinaryQF) -> tuple[int, int]:
        """λ^-1 mod p^m with q_{f1}·q_{f2} = λ·q_{f1 f2}."""
        K, c = self.field, self.c
        f3 = f1 * f2
        n1, I1 = self.prime_reps[f1]
        n2, I2 = self.prime_reps[f2]
        n3, I3 = self.prime_reps[f3]
        conj3 = QuatLattice.from_generators([K.conj(w) for w in I3.basis])
        mu = principal_generator(K, c, ideal_product(K, ideal_product(K, I1, I2), conj3))
        if mu is None:
            raise InternalInvariantError("prime-ideal representatives do not compose to a principal ideal")
        lam = (mu[0] / n3, mu[1] / n3)
        return reduce_unit(K.inv(lam), self.p, self.m)

    def multiply(self, g1, g2):
        f1, x1 = g1
        f2, x2 = g2
        x = _mul_mod(self.field, _mul_mod(self.field, x1, x2, self.modulus), self._cocycle(f1, f2), self.modulus)
        return (f1 * f2, self.canonical_unit(x))

    def cyclotomic_subgroup(self) -> list[tuple[BinaryQF, tuple[int, int]]]:
        """Elements fixing H_{cp^m}: scalars α ∈ (Z/p^m)^x."""
        n = self.modulus
        scalars = {self.canonical_unit((a, 0)) for a in range(1, n) if a % self.p}
        return [(self.pic.identity, x) for x in sorted(scalars)]

    def theta_character(self, element) -> int:
        """ϑ = ±α^-1 mod p^m for a scalar element (α, 0), as the smaller sign."""
        f, (u, v) = element
        if f != self.pic.identity or v % self.modulus:
            raise InvalidInputError("ϑ is only read off elements fixing H_{cp^m}")
        a = pow(u, -1, self.modulus)
        return min(a, (-a) % self.modulus)

    def ring_class_quotient_size(self) -> int:
        """Size of the image in Gal(H_{cp^m}/K)."""
        classes = set()
        for f, x in self.elements():
            normal = self._projective(x)
            classes.add((f, normal))
        return len(classes)

    def _projective(self, x: tuple[int, int]) -> tuple[int, int]:
        n, p = self.modulus, self.p
        best = None
        for e in self._units:
            u, v = _mul_mod(self.field, x, e, n)
            if u % p:
                cand = (1, v * pow(u, -1, n) % n)
            else:
                cand = (u * pow(v, -1, n) % n, 1)
            best = cand if best is None or cand < best else best
        return best

    def galois_element(self, element) -> GaloisElement:
        """Idele representative: prime ideal for the class, unit at p."""
        f, (u, v) = element
        _, ideal = self.prime_reps[f]
        return GaloisElement(
            ideal=None if f == self.pic.identity else ideal,
            local=((self.p, (Fraction(u), Fraction(v))),),
            label=f"({f.a},{f.b},{f.c})|{u}+{v}w",
        )


def prime_ideal_for_class(K: ImagQuadField, c: int, f: BinaryQF, avoid: int) -> tuple[int, QuatLattice]:
    """The smallest prime q ∤ avoid represented by the class f, with its ideal."""
    delta = c * c * K.D_K
    q = 2
    while True:
        q = nextprime(q)
        if avoid % q == 0 or delta % q == 0 or K.kronecker(q) != 1:
            continue
        for b in range(-q + 1, q + 1):
            if (b * b - delta) % (4 * q):
                continue
            g = BinaryQF(q, b, (b * b - delta) // (4 * q))
            if g.reduced() == f:
                return q, form_to_ideal(K, c, g)
        if q > 10**5:
            raise InternalInvariantError(f"no small prime represents the class {f}")


def extended_galois_group(K: ImagQuadField, c: int, m: int, p: int, *, avoid: int = 1):
    """Gal(H_{cp^m}(μ_{p^m})/K); m = 0 degenerates to Pic(O_c)."""
    pic = ring_class_group(K, c)
    if m == 0:
        return pic
    group = ExtendedGaloisGroup(K, c, m, p, pic)
    for f in pic.forms:
        if f == pic.identity:
            group.prime_reps[f] = (1, K.order_lattice(c))
        else:
            group.prime_reps[f] = prime_ideal_for_class(K, c, f, avoid * p * c * 2)
    expected = class_number_formula(K, c * p**m) * int(totient(p**m)) // 2
    if group.order != expected:
        raise InternalInvariantError(f"extended group has order {group.order}, expected {expected}")
    return group


# ─── Lift sets ────────────────────────────────────────────────────────────────


def _normalized_lift(K: ImagQuadField, x: KElt, p: int, K_prec: int) -> KElt:
    """x divided by the principal-unit square root of the wild part of N(x)."""
    n = K.norm(x)
    r = one_unit_sqrt(wild_part(n, p, K_prec), p, K_prec)
    return (Fraction(mod_pk(x[0] / r, p, K_prec)), Fraction(mod_pk(x[1] / r, p, K_prec)))


def step_lifts(K: ImagQuadField, c: int, p: int, n: int, precision: int) -> list[GaloisElement]:
    """p-supported lifts of Gal(H_{cp^{n+1}}/H_{cp^n}) with norms in μ_{p-1}."""
    K_prec = working_precision(precision)
    units = [reduce_unit(e, p, 1) for e in K.units(c * p**n)]
    if n >= 1:
        raw = [(Fraction(1), Fraction(p**n * k)) for k in range(p)]
    else:
        seen = set()
        raw = []
        for u, v in product(range(p), repeat=2):
            if (u * u + K.D * v * v) % p == 0:
                continue
            cls = _projective_class(K, (u, v), p, units)
            if cls in seen:
                continue
            seen.add(cls)
            raw.append((Fraction(cls[0]), Fraction(cls[1])))
    lifts = [
        GaloisElement(local=((p, _normalized_lift(K, x, p, K_prec)),), label=f"{int(x[0])}+{int(x[1])}w")
        for x in raw
    ]
    expected = class_number_formula(K, c * p ** (n + 1)) // class_number_formula(K, c * p**n)
    if len(lifts) != expected:
        raise InternalInvariantError(f"{len(lifts)} lifts for a group of order {expected}")
    return lifts


def _projective_class(K: ImagQuadField, x: tuple[int, int], p: int, units: list[tuple[int, int]]) -> tuple[int, int]:
    best = None
    for e in units:
        u, v = _mul_mod(K, x, e, p)
        cand = (1, v * pow(u, -1, p) % p) if u % p else (u * pow(v, -1, p) % p, 1)
        best = cand if best is None or cand < best else best
    return best


def tower_lifts(K: ImagQuadField, c: int, p: int, start: int, stop: int, precision: int) -> list[GaloisElement]:
    """Products of step lifts: representatives of Gal(H_{cp^stop}/H_{cp^start})."""
    K_prec = working_precision(precision)
    out = [GaloisElement()]
    for n in range(start, stop):
        step = step_lifts(K, c, p, n, precision)
        out = [a.times(K, b, {p: K_prec}) for a in out for b in step]
    return out


def ell_lifts(K: ImagQuadField, c: int, ell: int) -> list[GaloisElement]:
    """ℓ-supported lifts of Gal(H_{cℓ}/H_c) for an inert prime ℓ."""
    if K.prime_behavior(ell) != "inert":
        raise PreconditionError(f"ℓ={ell} is not inert in K")
    if K.unit_count(c) != 2:
        raise PreconditionError("the trace over H_{cℓ}/H_c needs O_c^x = {±1}")
    out = [GaloisElement(local=((ell, (Fraction(1), Fraction(0))),), label="1")]
    out += [GaloisElement(local=((ell, (Fraction(k), Fraction(1))),), label=f"{k}+w") for k in range(ell)]
    return out


def lift_norm_is_tame(K: ImagQuadField, lift: GaloisElement, p: int, precision: int) -> bool:
    x = lift.component(p)
    if x is None:
        return True
    n = K.norm(x)
    return mod_pk(n, p, precision) == teichmuller(n, p, precision)


# ─── Anticyclotomic layers ───────────────────────────────────────────────────


def d_of_n(K: ImagQuadField, p: int, n: int) -> int:
    """min{m ≥ 1 : the p-part of h(O_{p^m})/h_K reaches p^n}."""
    h_K = class_number_formula(K, 1)
    m = 1
    while valuation(class_number_formula(K, p**m) // h_K, p) < n:
        m += 1
    return m


@dataclass
class AnticycLayer:
    """G_n = Gal(K_n/K) ≅ Z/p^n, as a quotient of Gal(H_{p^d}/K), d = d(n).

    With h_K = 1 the p-part of Gal(H_{p^d}/K) is read off projective classes
    of local units at p. Otherwise elements go to Pic(O_{p^d}) as reduced
    forms and the discrete log is taken in its p-Sylow subgroup.
    """

    field: ImagQuadField
    p: int
    n: int
    d: int
    generator: tuple[int, int]
    generator_prime: int
    prime_to_p: int
    experimental: bool = False
    class_group: Optional[RingClassGroup] = field(default=None, repr=False)
    generator_ideal: Optional[QuatLattice] = field(default=None, repr=False)
    _log: dict = field(default_factory=dict, repr=False)

    @property
    def order(self) -> int:
        return self.p**self.n

    @property
    def modulus(self) -> int:
        return self.p**self.d

    def generator_element(self) -> GaloisElement:
        local = ((self.p, (Fraction(self.generator[0]), Fraction(self.generator[1]))),)
        return GaloisElement(ideal=self.generator_ideal, local=local, label="gen")

    def _projective(self, x: tuple[int, int]) -> tuple[int, int]:
        units = [reduce_unit(e, self.p, self.d) for e in self.field.units(1)]
        n = self.modulus
        best = None
        for e in units:
            u, v = _mul_mod(self.field, x, e, n)
            cand = (1, v * pow(u, -1, n) % n) if u % self.p else (u * pow(v, -1, n) % n, 1)
            best = cand if best is None or cand < best else best
        return best

    def _power(self, x: tuple[int, int], e: int) -> tuple[int, int]:
        result, base, n = (1, 0), x, self.modulus
        while e:
            if e & 1:
                result = _mul_mod(self.field, result, base, n)
            base = _mul_mod(self.field, base, base, n)
            e >>= 1
        return result

    def class_of(self, element: GaloisElement) -> BinaryQF:
        """Image in Pic(O_{p^d}) of an O_K-ideal times a unit at p.

        The unit x maps to the class of y·O_K ∩ O_{p^d} with y ≡ x⁻¹, the
        ideal I (prime to p) to the class of I ∩ O_{p^d}.
        """
        K, f = self.field, self.modulus
        group = self.class_group or ring_class_group(K, f)
        out = group.identity
        if element.ideal is not None:
            out = out * ideal_to_form(K, f, element.ideal.intersection(K.order_lattice(f)))
        x = element.component(self.p)
        if x is not None:
            y = tuple(Fraction(t) for t in reduce_unit(K.inv(x), self.p, self.d))
            principal = QuatLattice.from_generators([K.mul(y, w) for w in K.order_lattice(1).basis])
            out = out * ideal_to_form(K, f, principal.intersection(K.order_lattice(f)))
        return out

    def project(self, lift: GaloisElement) -> int:
        """Image in Z/p^n of a Galois element."""
        if self.n == 0:
            return 0
        if self.class_group is not None:
            z = self.class_of(lift) ** self.prime_to_p
            if z not in self._log:
                raise InternalInvariantError("class is outside the cyclic p-part")
            return self._log[z] % self.order
        if lift.ideal is not None:
            raise PreconditionError("projection to G_n is implemented for p-supported elements")
        x = lift.component(self.p) or (Fraction(1), Fraction(0))
        z = self._projective(self._power(reduce_unit(x, self.p, self.d), self.prime_to_p))
        if z not in self._log:
            raise InternalInvariantError("element is outside the cyclic p-part")
        return self._log[z]


def _sylow_candidates(K: ImagQuadField, p: int, d: int, group: RingClassGroup) -> Iterable[GaloisElement]:
    """Units at p first, then prime ideals for each class of Pic(O_{p^d})."""
    f = p**d
    for k in range(1, f):
        yield GaloisElement(local=((p, (Fraction(1), Fraction(k))),))
    for k in range(f // p):
        yield GaloisElement(local=((p, (Fraction(p * k), Fraction(1))),))
    O_K = K.order_lattice(1)
    for form in group.forms:
        if form == group.identity:
            continue
        _, ideal = prime_ideal_for_class(K, f, form, 2 * p)
        extended = QuatLattice.from_generators([K.mul(x, w) for x in ideal.basis for w in O_K.basis])
        yield GaloisElement(ideal=extended)


def _class_group_layer(K: ImagQuadField, p: int, n: int, d: int, h_K: int, generator: Optional[GaloisElement]) -> AnticycLayer:
    group = ring_class_group(K, p**d)
    sylow = p ** valuation(group.order, p)
    layer = AnticycLayer(
        K, p, n, d, (1, 0), 0, group.order // sylow, experimental=h_K % p == 0, class_group=group
    )
    candidates = [generator] if generator is not None else _sylow_candidates(K, p, d, group)
    for element in candidates:
        z = layer.class_of(element) ** layer.prime_to_p
        if group.element_order(z) == sylow:
            break
        if generator is not None:
            raise PreconditionError(f"the given element does not generate G_{n}")
    else:
        raise PreconditionError(
            f"the {p}-part of Pic(O_{p**d}) is not cyclic",
            details={"prime": p, "class_number": group.order},
        )
    x = element.component(p)
    if x is not None:
        layer.generator = reduce_unit(x, p, d)
    layer.generator_ideal = element.ideal
    power = group.identity
    for k in range(sylow):
        layer._log[power] = k
        power = power * z
    if len(layer._log) != sylow:
        raise InternalInvariantError("generator of the p-part has the wrong order")
    logger.debug("layer n=%d: d=%d, Pic(O_%d) of order %d", n, d, p**d, group.order)
    return layer


def anticyclotomic_layer(
    K: ImagQuadField,
    p: int,
    n: int,
    *,
    generator_prime: Optional[int] = None,
    generator: Optional[GaloisElement] = None,
) -> AnticycLayer:
    """G_n with a generator coming from a split prime q ≠ p (h_K = 1) or
    from the p-part of Pic(O_{p^d}) (h_K > 1).

    Layers built from the same ``generator_prime`` (or ``generator``) have
    compatible projections: the one for n-1 is the one for n reduced mod p^(n-1).
    """
    h_K = class_number_formula(K, 1)
    d = d_of_n(K, p, n) if n > 0 else 1
    if n == 0:
        return AnticycLayer(K, p, 0, d, (1, 0), generator_prime or 0, 1, experimental=h_K % p == 0)
    if h_K != 1:
        return _class_group_layer(K, p, n, d, h_K, generator)
    group_order = class_number_formula(K, p**d)
    prime_to_p = group_order // p ** valuation(group_order, p)
    layer = AnticycLayer(K, p, n, d, (1, 0), 0, prime_to_p, experimental=h_K % p == 0)
    candidates = [generator_prime] if generator_prime else primerange(3, 10**5)
    for q in candidates:
        if q == p or K.kronecker(q) != 1:
            if generator_prime:
                raise PreconditionError(f"q={q} must be a split prime different from p")
            continue
        pi = _element_of_norm(K, q)
        x = reduce_unit(K.inv(pi), p, d)
        z = layer._projective(layer._power(x, prime_to_p))
        if layer._projective(layer._power(z, p ** (n - 1))) != layer._projective((1, 0)):
            break
        if generator_prime:
            raise PreconditionError(f"q={q} does not generate G_{n}", details={"prime": q})
    else:
        raise InternalInvariantError(f"no small split prime generates G_{n}")
    layer.generator, layer.generator_prime = z, q
    power = layer._projective((1, 0))
    for k in range(layer.order):
        layer._log[power] = k
        power = layer._projective(_mul_mod(K, power, z, layer.modulus))
    if len(layer._log) != layer.order:
        raise InternalInvariantError("generator of G_n has the wrong order")
    logger.debug("layer n=%d: d=%d, generator from q=%d", n, d, q)
    return layer


def anticyclotomic_tower(K: ImagQuadField, p: int, n_max: int) -> list[AnticycLayer]:
    """Layers G_0, ..., G_{n_max} sharing the generator of the top layer."""
    top = anticyclotomic_layer(K, p, n_max)
    if top.class_group is not None:
        shared = {"generator": top.generator_element()}
    else:
        shared = {"generator_prime": top.generator_prime or None}
    return [anticyclotomic_layer(K, p, n, **shared) for n in range(n_max)] + [top]


def _element_of_norm(K: ImagQuadField, q: int) -> KElt:
    w = K.omega
    gram = [[K.pairing(x, y) for y in ((1, 0), w)] for x in ((1, 0), w)]
    for coeffs, value in short_vectors(gram, q):
        if value == q:
            return (coeffs[0] + coeffs[1] * w[0], coeffs[1] * w[1])
    raise InternalInvariantError(f"no element of norm {q}; is O_K principal?")
