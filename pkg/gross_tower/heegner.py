"""Optimal embeddings and compatible families of Heegner points.

A Heegner point on X̃_m is a pair (x̂, g): an adelic element x̂ and the fixed
global embedding g: K → B. The adelic element is carried as a base lattice X,
whose right order meets g(K) exactly in g(O_K), plus explicit local matrices
at p and at the odd inert primes of the conductor chain; everywhere else it
generates X. Galois elements act on the right through ĝ, and the result is
read back as a point (i, t) of X̃_m together with the embedding
f = b·g·b⁻¹ into the right order of I_i, where the lattice of x̂ is I_i·b.

Local models at p follow one orientation throughout: R_m ⊗ Z_p is the order
of matrices with lower-left entry divisible by p^m, π = diag(1, p), and
φ^{(c,m)} = w_m ψ^{(c)} w_m⁻¹ with w_m = [[0, 1], [-p^m, 0]].
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product
from math import gcd, isqrt
from typing import Iterable, Optional, Sequence, Union

from sympy import factorint

from gross_tower.cm_fields import (
    ExtendedGaloisGroup,
    GaloisElement,
    ImagQuadField,
    KElt,
    check_heegner_hypothesis,
    ell_lifts,
    extended_galois_group,
    step_lifts,
    tower_lifts,
)
from gross_tower.config import DEFAULT_PRECISION, working_precision
from gross_tower.exceptions import (
    InternalInvariantError,
    InvalidInputError,
    NonexistenceError,
    PreconditionError,
    PrecisionError,
)
from gross_tower.lattice import QuatLattice, short_vectors
from gross_tower.orders import (
    EichlerTower,
    Order,
    element_of,
    lattice_of,
    left_order,
    local_replace,
    norm_gram,
    quats_of,
    reduced_norm,
    right_multiply,
    right_order,
)
from gross_tower.padic import (
    IDENTITY,
    Mat2,
    hensel_sqrt,
    mat,
    mat_add,
    mat_det,
    mat_inv,
    mat_mod,
    mat_mul,
    mat_prod,
    mat_scale,
    mat_valuation,
    one_unit_sqrt,
    valuation,
    wild_part,
)
from gross_tower.quaternion import Quaternion, QuaternionAlgebra
from gross_tower.shimura import Divisor, ShimuraLevel, ShimuraTower, TildePoint

logger = logging.getLogger(__name__)


# ─── Local models ─────────────────────────────────────────────────────────────


def pi_matrix(q: int, k: int = 1) -> Mat2:
    """diag(1, q^k)."""
    return mat(1, 0, 0, Fraction(q) ** k)


def local_order_exponent(G: Mat2, p: int, n: int) -> int:
    """e such that {x + y√-D : x + y·G ∈ R_n} = Z_p + p^e·Z_p[√-D]."""
    return max(
        -valuation(G[0][1], p),
        n - valuation(G[1][0], p),
        -valuation(G[0][0], p),
        -valuation(G[1][1], p),
    )


def local_conditions(G: Mat2, p: int, n: int, exponent: int) -> dict:
    """Optimality of O_{p^exponent} into R_n and the Γ_1(p^n) unit condition.

    G is the image of √-D. The unit condition asks that x ∈ O^x lands in
    U_n (upper-left entry ≡ 1 mod p^n) exactly when x ≡ 1 mod p^n·O_K.
    """
    e = local_order_exponent(G, p, n)
    return {
        "exponent": e,
        "optimal": e == exponent,
        "unit_condition": e >= n and e + valuation(G[0][0], p) >= n,
    }


@dataclass(frozen=True)
class LocalEmbedding:
    """The matrix model ψ^{(c)}: K_p → M_2(Q_p) and its conjugates φ^{(c,m)}."""

    p: int
    case: str
    h: int
    D: int
    delta: Optional[int] = None
    precision: int = DEFAULT_PRECISION

    def psi(self, x: KElt) -> Mat2:
        u, v = Fraction(x[0]), Fraction(x[1])
        ph = Fraction(self.p) ** self.h
        if self.case == "inert":
            return mat(u, -self.D * v * ph, v / ph, u)
        a, b = u + v * self.delta, u - v * self.delta
        return mat(a, 0, (a - b) / ph, b)

    @property
    def generator(self) -> Mat2:
        return self.psi((0, 1))

    def conjugator(self, m: int) -> Mat2:
        return mat(0, 1, -Fraction(self.p) ** m, 0)

    def phi(self, x: KElt, m: int) -> Mat2:
        w = self.conjugator(m)
        return mat_prod(w, self.psi(x), mat_inv(w))

    def phi_generator(self, m: int) -> Mat2:
        return self.phi((0, 1), m)

    def check(self, n: int) -> dict:
        """Certify φ^{(c,n)} against R_n at the model's precision."""
        g = self.generator
        square = mat_mul(g, g)
        residual = mat_add(square, mat_scale(IDENTITY, self.D))
        report = local_conditions(self.phi_generator(n), self.p, n, self.h + n)
        report["square"] = mat_valuation(residual, self.p) >= self.precision
        report["passed"] = report["optimal"] and report["unit_condition"] and report["square"]
        return report

    def to_dict(self) -> dict:
        return {"p": self.p, "case": self.case, "h": self.h, "precision": self.precision}


def local_embedding(
    K: ImagQuadField,
    c: int,
    p: int,
    n: int = 0,
    precision: int = DEFAULT_PRECISION,
) -> LocalEmbedding:
    """ψ_p^{(c)} with h = v_p(c); φ^{(c,n)} is certified optimal into R_n."""
    behavior = K.prime_behavior(p)
    if behavior == "ramified":
        raise InvalidInputError(f"p={p} ramifies in K", details={"prime": p})
    h = valuation(c, p)
    for attempt in (precision, 2 * precision):
        delta = hensel_sqrt(-K.D, p, working_precision(attempt)) if behavior == "split" else None
        model = LocalEmbedding(p, behavior, h, K.D, delta, attempt)
        report = model.check(n)
        if report["passed"]:
            return model
        logger.debug("local model at %d failed at precision %d: %s", p, attempt, report)
    raise PrecisionError(f"cannot certify the local model at p={p}", details={"prime": p, "n": n})


def _small_coefficients(q: int) -> Iterable[tuple[int, ...]]:
    yield from product(range(min(q, 3)), repeat=4)
    yield from product(range(q), repeat=4)


def intertwiner(target: Mat2, source: Mat2, q: int, precision: int) -> Mat2:
    """u ∈ GL_2(Z_q) with target·u ≡ u·source (mod q^precision).

    Both matrices square to -D; every intertwiner is target·Y + Y·source.
    """
    basis = [mat(1, 0, 0, 0), mat(0, 1, 0, 0), mat(0, 0, 1, 0), mat(0, 0, 0, 1)]
    images = [mat_add(mat_mul(target, y), mat_mul(y, source)) for y in basis]
    for coeffs in _small_coefficients(q):
        if not any(coeffs):
            continue
        u = mat_scale(IDENTITY, 0)
        for k, image in zip(coeffs, images):
            if k:
                u = mat_add(u, mat_scale(image, k))
        if mat_valuation(u, q) < 0 or valuation(mat_det(u), q) != 0:
            continue
        residual = mat_add(mat_mul(target, u), mat_scale(mat_mul(u, source), -1))
        if mat_valuation(residual, q) < precision:
            raise PrecisionError(f"intertwiner at {q} is not exact to precision {precision}", details={"prime": q})
        return u
    raise InternalInvariantError(f"no unit intertwiner at {q}", details={"prime": q})


def _truncate(x: Mat2, q: int, k: int) -> Mat2:
    """x modulo q^k, keeping its denominators."""
    s = max(0, -mat_valuation(x, q))
    scale = Fraction(q) ** s
    reduced = mat_mod(mat_scale(x, scale), q, k + s)
    return mat(*(Fraction(e) / scale for row in reduced for e in row))


# ─── Global embeddings ────────────────────────────────────────────────────────


def global_embedding_seed(alg: QuaternionAlgebra, K: ImagQuadField, *, max_denominator: int = 64) -> Quaternion:
    """A pure quaternion ω with nrd(ω) = D, so that √-D ↦ ω embeds K in B.

    The search takes the smallest denominator d first and, for it, the
    lexicographically smallest nonnegative (x, y, z) with ω = (x·i + y·j + z·ij)/d.
    """
    for q in sorted(alg.ramified_finite):
        behavior = K.prime_behavior(q)
        if behavior != "inert":
            raise NonexistenceError(
                f"{q} divides the discriminant of B but is {behavior} in K, so K does not embed",
                details={"prime": q, "behavior": behavior},
            )
    if not alg.definite:
        raise InvalidInputError("embedding seeds are searched in definite algebras")
    D = K.D
    if -alg.a == D:
        return alg.i
    if -alg.b == D:
        return alg.j
    A, B, C = -alg.a, -alg.b, alg.a * alg.b
    for d in range(1, max_denominator + 1):
        target = D * d * d
        for x in range(isqrt(target // A) + 1):
            rest_x = target - A * x * x
            for y in range(isqrt(rest_x // B) + 1):
                rest_y = rest_x - B * y * y
                if rest_y % C:
                    continue
                z = isqrt(rest_y // C)
                if z * z * C == rest_y:
                    omega = alg.element(0, Fraction(x, d), Fraction(y, d), Fraction(z, d))
                    logger.debug("embedding seed for D=%d: %r", D, omega)
                    return omega
    raise NonexistenceError(f"no embedding seed with denominator at most {max_denominator}", details={"D": D})


def optimal_generator(alg: QuaternionAlgebra, lattice: QuatLattice, K: ImagQuadField) -> Optional[Quaternion]:
    """ω' in the order with Z + Z·(t + ω')/2 ⊂ order, i.e. an optimal image of O_K."""
    t0 = K.D_K % 2
    n0 = (t0 - K.D_K) // 4
    for coeffs, value in short_vectors(norm_gram(alg, lattice), n0):
        if value != n0:
            continue
        tau = element_of(alg, lattice, coeffs)
        if tau.trd() != t0:
            continue
        return tau * 2 - alg.one * t0 if t0 else tau
    return None


def conjugator(omega_from: Quaternion, omega_to: Quaternion) -> Quaternion:
    """β ≠ 0 with omega_from·β = β·omega_to (both square to the same scalar)."""
    for x in omega_from.algebra.basis():
        beta = omega_from * x + x * omega_to
        if not beta.is_zero():
            return beta
    raise InternalInvariantError("embeddings are not conjugate")


def _local_generator(alg: QuaternionAlgebra, lattice: QuatLattice, q: int) -> Quaternion:
    """ξ ∈ L with L ⊗ Z_q = R_q·ξ (its norm has the lattice's q-valuation)."""
    n = reduced_norm(alg, lattice)
    elems = quats_of(alg, lattice)
    for xi in list(elems) + [a + b for a, b in combinations(elems, 2)]:
        if valuation(xi.nrd() / n, q) == 0:
            return xi
    raise InternalInvariantError(f"lattice has no local generator at {q}")


# ─── Optimality ───────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class OptimalEmbedding:
    """f: K → B given by ω = f(√-D), with the order and conductor it is tested against."""

    omega: Quaternion
    target_order: Order = field(repr=False)
    certified_conductor: int
    cm_field: ImagQuadField

    def image(self, x: KElt) -> Quaternion:
        return self.omega.algebra.one * Fraction(x[0]) + self.omega * Fraction(x[1])


@dataclass
class OptimalityCertificate:
    certified: bool
    conductor: int
    found: QuatLattice
    expected: QuatLattice
    local: dict[int, bool]

    def __bool__(self) -> bool:
        return self.certified

    def to_dict(self) -> dict:
        return {
            "certified": self.certified,
            "conductor": self.conductor,
            "local": {str(q): ok for q, ok in sorted(self.local.items())},
        }


def embedded_order(omega: Quaternion, order: Order) -> QuatLattice:
    """{(u, v) : u + v·ω ∈ order} in the coordinates of u + v√-D."""
    alg = order.algebra
    c1 = order.lattice.coordinates(alg.one.coords())
    c2 = order.lattice.coordinates(omega.coords())
    return QuatLattice.from_generators(list(zip(c1, c2))).dual()


def _primes_of(x: Fraction) -> set[int]:
    x = Fraction(x)
    return set(factorint(abs(x.numerator))) | set(factorint(x.denominator))


def verify_optimal(
    f: OptimalEmbedding,
    order: Optional[Order] = None,
    conductor: Optional[int] = None,
) -> OptimalityCertificate:
    """f(K) ∩ order == f(O_c) as exact lattices, with a per-prime report."""
    order = order or f.target_order
    conductor = conductor or f.certified_conductor
    K = f.cm_field
    if f.omega.trd() != 0 or f.omega.nrd() != K.D:
        raise InvalidInputError("ω must be pure with reduced norm D")
    found = embedded_order(f.omega, order)
    expected = K.order_lattice(conductor)
    joint = found + expected
    primes = set(factorint(2 * abs(K.D_K) * conductor * order.algebra.discriminant * order.level))
    primes |= _primes_of(joint.covolume / found.covolume) | _primes_of(joint.covolume / expected.covolume)
    local = {
        q: valuation(found.covolume, q) == valuation(expected.covolume, q) == valuation(joint.covolume, q)
        for q in sorted(primes)
    }
    return OptimalityCertificate(found == expected, conductor, found, expected, local)


# ─── Adelic elements and points ───────────────────────────────────────────────


@dataclass(frozen=True)
class AdelicElement:
    """A base lattice X with explicit local matrices at finitely many primes."""

    base: QuatLattice
    components: tuple[tuple[int, Mat2], ...]

    def component(self, q: int) -> Mat2:
        for prime, x in self.components:
            if prime == q:
                return x
        raise InvalidInputError(f"no explicit component at {q}")

    def primes(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self.components)

    def lattice(self, tower: EichlerTower, m: int) -> QuatLattice:
        """The lattice of the element for the order R_m."""
        L = self.base
        for q, x in self.components:
            L = local_replace(tower.algebra, L, q, x, tower.splitting_at(q), tower.local_exponent(q, m))
        return L


@dataclass(frozen=True)
class HeegnerPoint:
    """P̃_{c,m}, or a Galois translate of it, on X̃_m.

    ``c`` is the conductor index of the family member; the point itself has
    conductor c·p^m. ``key`` identifies the point of X̃_m^{(K)}: the class,
    and the smallest (fiber, embedding) over the stabilizer of I_i.
    """

    level: int
    c: int
    point: TildePoint
    fiber: int
    embedding: Quaternion
    b: Quaternion = field(repr=False)
    adelic: AdelicElement = field(repr=False)
    key: tuple = field(repr=False)
    p: int = 0
    label: str = ""

    @property
    def conductor(self) -> int:
        return self.c * self.p**self.level

    def divisor(self) -> Divisor:
        return Divisor.point(self.level, self.point)

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "c": self.c,
            "conductor": self.conductor,
            "point": self.point.to_list(),
            "embedding": [str(x) for x in self.embedding.coords()],
            "label": self.label,
        }


def _point_key(level: ShimuraLevel, i: int, t: int, f: Quaternion) -> tuple:
    n = level.modulus
    best = None
    for g in level.classes.unit_groups[i]:
        candidate = ((t * level.nu(g)) % n if n > 1 else 0, (g * f * g.inverse()).coords())
        if best is None or candidate < best:
            best = candidate
    return (i,) + best


# ─── Families ─────────────────────────────────────────────────────────────────


@dataclass
class HeegnerFamily:
    """The points P̃_{c',m} for c' ∈ {c·p^h, c·ℓ·p^h} over one Eichler tower."""

    tower: EichlerTower = field(repr=False)
    shimura: ShimuraTower = field(repr=False)
    cm_field: ImagQuadField
    c: int
    m_max: int
    r_max: int
    precision: int
    omega: Quaternion
    base: QuatLattice = field(repr=False)
    base_class: int = 0
    beta: Optional[Quaternion] = None
    ell: Optional[int] = None
    chain: tuple[int, ...] = ()
    models: dict[int, Mat2] = field(default_factory=dict, repr=False)
    local_model: Optional[LocalEmbedding] = None
    _points: dict[tuple[int, int], HeegnerPoint] = field(default_factory=dict, repr=False)
    _groups: dict[int, ExtendedGaloisGroup] = field(default_factory=dict, repr=False)

    @property
    def p(self) -> int:
        return self.tower.p

    @property
    def algebra(self) -> QuaternionAlgebra:
        return self.tower.algebra

    def embed(self, x: KElt) -> Quaternion:
        """g(u + v√-D)."""
        return self.algebra.one * Fraction(x[0]) + self.omega * Fraction(x[1])

    def local_image(self, q: int, x: KElt) -> Mat2:
        sp = self.tower.splitting_at(q)
        return mat_add(mat_scale(IDENTITY, Fraction(x[0])), mat_scale(sp.image(self.omega), Fraction(x[1])))

    def _split_conductor(self, conductor: int) -> tuple[int, dict[int, int]]:
        h = valuation(conductor, self.p)
        rest = conductor // self.p**h
        if rest not in (self.c, self.c * (self.ell or 1)):
            raise PreconditionError(
                f"conductor {conductor} is outside the family of base conductor {self.c}",
                details={"conductor": conductor},
            )
        return h, {q: valuation(rest, q) for q in self.chain}

    def adelic(self, conductor: int, m: int) -> AdelicElement:
        """a^{(conductor, m)}."""
        h, exponents = self._split_conductor(conductor)
        components = {self.p: mat_mul(pi_matrix(self.p, m + h), self.models[self.p])}
        for q in self.chain:
            components[q] = mat_mul(pi_matrix(q, exponents[q]), self.models[q])
        return AdelicElement(self.base, tuple(sorted(components.items(), key=lambda item: item[0])))

    def locate(self, element: AdelicElement, c: int, m: int, label: str = "") -> HeegnerPoint:
        level = self.shimura.level(m)
        lattice = element.lattice(self.tower, m)
        pt, b, t = level.locate(lattice, element.component(self.p))
        f = b * self.omega * b.inverse()
        key = _point_key(level, pt.cls, t, f)
        return HeegnerPoint(m, c, pt, t, f, b, element, key, self.p, label)

    def point(self, conductor: int, m: int) -> HeegnerPoint:
        """P̃_{conductor, m}, verified against the Heegner conditions."""
        if not 0 <= m <= self.m_max:
            raise PreconditionError(f"level {m} is beyond the family depth {self.m_max}")
        if (conductor, m) not in self._points:
            P = self.locate(self.adelic(conductor, m), conductor, m, label=f"P({conductor},{m})")
            report = verify_heegner_point(self, P)
            if not report["passed"]:
                place = "p" if not report["local"]["unit_condition"] or not report["local"]["optimal"] else "global"
                raise InternalInvariantError(
                    f"P({conductor},{m}) fails the Heegner conditions",
                    details={"place": place, "report": {k: v for k, v in report.items() if k != "certificate"}},
                )
            self._points[(conductor, m)] = P
            logger.debug("P(%d,%d) = %s", conductor, m, P.point)
        return self._points[(conductor, m)]

    def act(self, sigma: GaloisElement, P: HeegnerPoint) -> HeegnerPoint:
        """P^σ = [(x̂·ĝ(a_σ), g)]; the ideal part must be prime to the explicit primes."""
        element = P.adelic
        base = element.base
        alg = self.algebra
        if sigma.ideal is not None:
            images = [self.embed(a) for a in sigma.ideal.basis]
            base = lattice_of(x * y for x in quats_of(alg, base) for y in images)
        components = dict(element.components)
        for q, x in sigma.local:
            if q not in components:
                raise PreconditionError(f"no explicit component at {q} to act on", details={"prime": q})
            working = self.tower.splitting_at(q).working
            components[q] = _truncate(mat_mul(components[q], self.local_image(q, x)), q, working)
        moved = AdelicElement(base, tuple(sorted(components.items(), key=lambda item: item[0])))
        label = f"{P.label}^{sigma.label}" if sigma.label else P.label
        return self.locate(moved, P.c, P.level, label)

    def extended_group(self, m: int) -> ExtendedGaloisGroup:
        if m not in self._groups:
            avoid = self.tower.N
            for q in self.chain:
                avoid *= q
            self._groups[m] = extended_galois_group(self.cm_field, self.c, m, self.p, avoid=avoid)
        return self._groups[m]

    def lifts(self, c: int, start: int, stop: int) -> list[GaloisElement]:
        """p-supported lifts of Gal(H_{c'p^stop}/H_{c'p^start}), c' the prime-to-p part of c."""
        c_prime = c // self.p ** valuation(c, self.p)
        return tower_lifts(self.cm_field, c_prime, self.p, start, stop, self.precision)

    def to_dict(self) -> dict:
        return {
            "c": self.c,
            "ell": self.ell,
            "m_max": self.m_max,
            "r_max": self.r_max,
            "omega": [str(x) for x in self.omega.coords()],
            "base_class": self.base_class,
            "local_model": self.local_model.to_dict() if self.local_model else None,
        }


def verify_heegner_point(family: HeegnerFamily, P: HeegnerPoint) -> dict:
    """Conductor-cp^m conditions: global optimality and the p-local unit condition."""
    p, m = family.p, P.level
    level = family.shimura.level(m)
    order = level.classes.right_orders[P.point.cls]
    f = OptimalEmbedding(P.embedding, order, P.conductor, family.cm_field)
    certificate = verify_optimal(f)
    x_p = P.adelic.component(p)
    G = mat_prod(x_p, family.local_image(p, (0, 1)), mat_inv(x_p))
    local = local_conditions(G, p, m, valuation(P.conductor, p))
    return {
        "passed": certificate.certified and local["optimal"] and local["unit_condition"],
        "optimal": certificate.certified,
        "certificate": certificate,
        "local": local,
        "precision": family.precision,
    }


def build_family(
    tower: EichlerTower,
    K: ImagQuadField,
    c: int = 1,
    m_max: int = 2,
    precision: Optional[int] = None,
    *,
    ell: Optional[int] = None,
    r_max: int = 1,
    shimura: Optional[ShimuraTower] = None,
) -> HeegnerFamily:
    """Fix g, the base lattice and the local matrices a_{q,0}; points are built lazily."""
    p = tower.p
    precision = precision or tower.precision
    holds, report = check_heegner_hypothesis(tower.N_plus, tower.N_minus, K, p)
    if not holds:
        raise InvalidInputError("Heegner hypothesis fails", details={str(q): r for q, r in report.items()})
    if gcd(c, tower.N * K.D_K) != 1:
        raise InvalidInputError(f"c={c} must be prime to N·D_K")
    if c % p == 0:
        raise InvalidInputError("the base conductor must be prime to p; p-power conductors come from r_max")
    chain_primes = set(factorint(c))
    if ell is not None:
        if c % ell == 0:
            raise PreconditionError(f"ℓ={ell} divides c")
        chain_primes.add(ell)
    for q in sorted(chain_primes):
        if q == 2 or K.prime_behavior(q) != "inert" or (tower.N * p) % q == 0:
            raise PreconditionError(
                f"{q} must be an odd prime, inert in K and prime to Np", details={"prime": q}
            )
    if m_max + r_max + 1 > precision:
        raise PreconditionError("precision must exceed m_max + r_max")
    alg = tower.algebra
    shimura = shimura or ShimuraTower(tower)
    omega = global_embedding_seed(alg, K)
    level0 = shimura.level(0)
    for i, right in enumerate(level0.classes.right_orders):
        omega_i = optimal_generator(alg, right.lattice, K)
        if omega_i is not None:
            break
    else:
        raise NonexistenceError("no level-0 right order contains an optimal image of O_K")
    beta = conjugator(omega_i, omega)
    base = right_multiply(alg, level0.classes.reps[i], beta)
    model = local_embedding(K, 1, p, 0, precision)
    sp = tower.splitting
    u_p = intertwiner(model.phi_generator(0), sp.image(omega_i), p, precision)
    models = {p: _truncate(mat_mul(u_p, sp.image(beta)), p, sp.working)}
    for q in sorted(chain_primes):
        sq = tower.splitting_at(q)
        xi = _local_generator(alg, base, q)
        u_q = intertwiner(mat(0, -K.D, 1, 0), sq.image(xi * omega * xi.inverse()), q, sq.precision)
        models[q] = _truncate(mat_mul(u_q, sq.image(xi)), q, sq.working)
    family = HeegnerFamily(
        tower=tower,
        shimura=shimura,
        cm_field=K,
        c=c,
        m_max=m_max,
        r_max=r_max,
        precision=precision,
        omega=omega,
        base=base,
        base_class=i,
        beta=beta,
        ell=ell,
        chain=tuple(sorted(chain_primes)),
        models=models,
        local_model=model,
    )
    if local_replace(alg, base, p, models[p], sp, 0) != base:
        raise InternalInvariantError("the local matrix at p does not generate the base lattice")
    logger.info("Heegner family: c=%d, chain %s, base class %d", c, family.chain, i)
    return family


# ─── Galois action and traces ─────────────────────────────────────────────────


def galois_act(
    family: HeegnerFamily,
    sigma: Union[GaloisElement, tuple],
    P: HeegnerPoint,
    group: Optional[ExtendedGaloisGroup] = None,
) -> HeegnerPoint:
    """P^σ for an idele representative or an element of the extended group."""
    if not isinstance(sigma, GaloisElement):
        group = group or family.extended_group(P.level)
        sigma = group.galois_element(sigma)
    return family.act(sigma, P)


def wild_half_character(K: ImagQuadField, lift: GaloisElement, p: int, m: int, precision: int) -> int:
    """The square root of the wild cyclotomic character of a lift, mod p^m.

    The cyclotomic character of an idele supported at p is N(x_p)^-1.
    """
    x = lift.component(p)
    modulus = p**m
    if x is None or modulus == 1:
        return 1 % modulus
    chi = 1 / K.norm(x)
    return one_unit_sqrt(wild_part(chi, p, precision), p, precision) % modulus


def twisted_trace(
    family: HeegnerFamily,
    lifts: Sequence[GaloisElement],
    P: Union[HeegnerPoint, Sequence[HeegnerPoint]],
    *,
    twist: bool = True,
) -> Divisor:
    """Σ_η ⟨ϑ(η)⟩⁻¹·P^η over the given lifts (and over P when it is a list)."""
    points = [P] if isinstance(P, HeegnerPoint) else list(P)
    if not points:
        raise InvalidInputError("nothing to trace")
    m = points[0].level
    level = family.shimura.level(m)
    n = level.modulus
    out = Divisor(m)
    for Q in points:
        for eta in lifts:
            moved = family.act(eta, Q)
            pt = moved.point
            if twist and n > 1:
                d = wild_half_character(family.cm_field, eta, family.p, m, family.tower.splitting.working)
                if d != 1:
                    pt = level.canonical(pt.cls, moved.fiber * pow(d, -1, n))
            out = out + Divisor.point(m, pt)
    return out


def trace(family: HeegnerFamily, lifts: Sequence[GaloisElement], P) -> Divisor:
    return twisted_trace(family, lifts, P, twist=False)


def corestricted_point(family: HeegnerFamily, c: int, m: int) -> Divisor:
    """𝒫_{c,m} = cor_{H_{cp^m}/H_c}(P̃_{c,m})."""
    h = valuation(c, family.p)
    return twisted_trace(family, family.lifts(c, h, h + m), family.point(c, m))


# ─── Verification reports ─────────────────────────────────────────────────────


@dataclass
class IdentityCheck:
    """One evaluated identity: status is "pass", "fail" or "skip"."""

    name: str
    level: int
    status: str
    lhs: Optional[Divisor] = None
    rhs: Optional[Divisor] = None
    reason: str = ""
    params: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status != "fail"

    def to_dict(self) -> dict:
        out = {"name": self.name, "level": self.level, "status": self.status, "params": self.params}
        if self.reason:
            out["reason"] = self.reason
        if self.lhs is not None:
            out["degree"] = self.lhs.degree()
        if self.status == "fail" and self.lhs is not None and self.rhs is not None:
            out["lhs"] = self.lhs.to_dict()
            out["rhs"] = self.rhs.to_dict()
        return out


@dataclass
class VerificationReport:
    checks: list[IdentityCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[IdentityCheck]:
        return [c for c in self.checks if c.status == "fail"]

    def add(self, check: IdentityCheck) -> IdentityCheck:
        self.checks.append(check)
        status = logging.INFO if check.status != "fail" else logging.WARNING
        logger.log(status, "%s at level %d: %s %s", check.name, check.level, check.status, check.reason)
        return check

    def extend(self, other: "VerificationReport") -> "VerificationReport":
        for c in other.checks:
            self.checks.append(c)
        return self

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "counts": {s: sum(1 for c in self.checks if c.status == s) for s in ("pass", "fail", "skip")},
            "checks": [c.to_dict() for c in self.checks],
        }


def _compare(name: str, level: int, lhs: Divisor, rhs: Divisor, **params) -> IdentityCheck:
    return IdentityCheck(name, level, "pass" if lhs == rhs else "fail", lhs, rhs, params=params)


def _skip(name: str, level: int, reason: str, **params) -> IdentityCheck:
    return IdentityCheck(name, level, "skip", reason=reason, params=params)


def _apply(family: HeegnerFamily, op: str, param: int, D: Divisor) -> Divisor:
    level = family.shimura.level(D.level)
    return family.shimura.hecke(op, param, D.level).apply(D, level)


def _ell_precondition(family: HeegnerFamily, ell: Optional[int], m: int) -> Optional[str]:
    if ell is None or ell != family.ell:
        return "the family carries no chain prime ℓ" if ell is None else f"the family was built for ℓ={family.ell}"
    if family.cm_field.unit_count(family.c * family.p**m) != 2:
        return "O_{cp^m} has units beyond ±1"
    return None


def verify_compatibilities(family: HeegnerFamily, ell: Optional[int] = None) -> VerificationReport:
    """Vertical, horizontal and T_ℓ compatibilities of the family as divisor equalities."""
    report = VerificationReport()
    K, p, c = family.cm_field, family.p, family.c
    ell = ell if ell is not None else family.ell
    for m in range(2, family.m_max + 1):
        lhs = _apply(family, "U", p, family.point(c, m - 1).divisor())
        lifts = step_lifts(K, c, p, m - 1, family.precision)
        rhs = family.shimura.pushforward(trace(family, lifts, family.point(c, m)))
        report.add(_compare("vertical", m - 1, lhs, rhs, c=c, m=m))
    if family.m_max < 2:
        report.add(_skip("vertical", 1, "needs m ≥ 2"))
    for r in range(1, family.r_max + 1):
        for m in range(1, family.m_max + 1):
            lhs = _apply(family, "U", p, family.point(c * p ** (r - 1), m).divisor())
            lifts = step_lifts(K, c, p, m + r - 1, family.precision)
            rhs = trace(family, lifts, family.point(c * p**r, m))
            report.add(_compare("horizontal", m, lhs, rhs, c=c, r=r, m=m))
    for m in range(0, family.m_max + 1):
        reason = _ell_precondition(family, ell, m)
        if reason:
            report.add(_skip("T_ell", m, reason, ell=ell))
            continue
        lhs = _apply(family, "T", ell, family.point(c, m).divisor())
        rhs = trace(family, ell_lifts(K, c * p**m, ell), family.point(c * ell, m))
        report.add(_compare("T_ell", m, lhs, rhs, c=c, ell=ell, m=m))
    return report


def euler_relations(family: HeegnerFamily, ell: Optional[int] = None) -> VerificationReport:
    """The corestriction relations for U_p, the tower maps and T_ℓ."""
    report = VerificationReport()
    K, p, c = family.cm_field, family.p, family.c
    K_prec = working_precision(family.precision)
    ell = ell if ell is not None else family.ell
    for m in range(1, family.m_max + 1):
        lhs = _apply(family, "U", p, family.point(c, m).divisor())
        rhs = twisted_trace(family, family.lifts(c, m, m + 1), family.point(c * p, m))
        report.add(_compare("U_p corestriction", m, lhs, rhs, c=c, m=m))
    for m in range(2, family.m_max + 1):
        lhs = family.shimura.pushforward(corestricted_point(family, c, m))
        rhs = _apply(family, "U", p, corestricted_point(family, c, m - 1))
        report.add(_compare("tower relation", m - 1, lhs, rhs, c=c, m=m))
    for m in range(1, family.m_max + 1):
        lhs = _apply(family, "U", p, corestricted_point(family, c, m))
        lifts = [
            eta.times(K, tau, {p: K_prec}) for tau in family.lifts(c, 1, m + 1) for eta in family.lifts(c, 0, 1)
        ]
        rhs = twisted_trace(family, lifts, family.point(c * p, m))
        report.add(_compare("U_p Euler relation", m, lhs, rhs, c=c, m=m))
    for m in range(1, family.m_max + 1):
        reason = _ell_precondition(family, ell, m)
        if reason is None and K.unit_count(c) != 2:
            reason = "O_c has units beyond ±1"
        if reason:
            report.add(_skip("T_ell Euler relation", m, reason, ell=ell))
            continue
        lhs = _apply(family, "T", ell, corestricted_point(family, c, m))
        lifts = [tau.times(K, eta) for tau in family.lifts(c * ell, 0, m) for eta in ell_lifts(K, c, ell)]
        rhs = twisted_trace(family, lifts, family.point(c * ell, m))
        report.add(_compare("T_ell Euler relation", m, lhs, rhs, c=c, ell=ell, m=m))
    return report


def galois_checks(family: HeegnerFamily, m: int = 1, *, max_pairs: int = 256) -> VerificationReport:
    """Diamond/Galois consistency, freeness of the action, and the action law at level m."""
    report = VerificationReport()
    if m < 1:
        report.add(_skip("diamond action", m, "needs m ≥ 1"))
        return report
    group = family.extended_group(m)
    level = family.shimura.level(m)
    P = family.point(family.c, m)
    failures = []
    for sigma in group.cyclotomic_subgroup():
        moved = galois_act(family, sigma, P, group)
        expected = level.canonical(P.point.cls, P.fiber * group.theta_character(sigma))
        if moved.point != expected:
            failures.append(sigma[1])
    report.add(
        IdentityCheck(
            "diamond action",
            m,
            "fail" if failures else "pass",
            reason=f"mismatched scalars {failures}" if failures else "",
            params={"scalars": len(group.cyclotomic_subgroup())},
        )
    )
    elements = group.elements()
    moved = {g: galois_act(family, g, P, group) for g in elements}
    keys = {Q.key for Q in moved.values()}
    report.add(
        IdentityCheck(
            "free action",
            m,
            "pass" if len(keys) == group.order else "fail",
            reason="" if len(keys) == group.order else f"{len(keys)} distinct points for {group.order} elements",
            params={"order": group.order},
        )
    )
    bad = 0
    pairs = list(product(elements, repeat=2))[:max_pairs]
    for g1, g2 in pairs:
        twice = galois_act(family, g2, moved[g1], group)
        if twice.key != moved[group.multiply(g1, g2)].key:
            bad += 1
    report.add(
        IdentityCheck(
            "action law",
            m,
            "fail" if bad else "pass",
            reason=f"{bad} of {len(pairs)} pairs disagree" if bad else "",
            params={"pairs": len(pairs)},
        )
    )
    return report


def consistency_checks(family: HeegnerFamily) -> VerificationReport:
    """Re-derive every stored a^{(c',m)} from its lattice alone.

    For each conductor c' of the family and level m the lattice L built by
    local replacement must be a locally principal R_m-ideal (left order R_m),
    and ω must embed optimally into its right order with conductor c'·p^m.
    The unit condition at p is read off the local embedding data. None of
    this goes through the recursion that produced the matrices.
    """
    report = VerificationReport()
    p, c, K = family.p, family.c, family.cm_field
    tower, alg = family.tower, family.algebra
    conductors = [c * p**h for h in range(family.r_max + 1)]
    if family.ell is not None:
        conductors.append(c * family.ell)
    for conductor in conductors:
        h = valuation(conductor, p)
        for m in range(family.m_max + 1):
            params = {"conductor": conductor}
            element = family.adelic(conductor, m)
            L = element.lattice(tower, m)
            ok = left_order(alg, L) == tower.order(m).lattice
            report.add(IdentityCheck("R_m-ideal", m, "pass" if ok else "fail", params=params))
            found = embedded_order(family.omega, Order(alg, right_order(alg, L), level=tower.order(m).level))
            ok = found == K.order_lattice(conductor * p**m)
            report.add(IdentityCheck("optimal embedding", m, "pass" if ok else "fail", params=params))
            x_p = element.component(p)
            G = mat_prod(x_p, family.local_image(p, (0, 1)), mat_inv(x_p))
            local = local_conditions(G, p, m, h + m)
            ok = local["optimal"] and local["unit_condition"]
            report.add(IdentityCheck("unit condition at p", m, "pass" if ok else "fail", params=params))
    return report
