"""Ordinary projectors, ordinary eigendata and anticyclotomic theta elements.

Everything here is computed modulo p^M. Hecke matrices act on divisors as
columns, so an eigen functional is a row vector v with v·T_ℓ = a_ℓ·v; it is
the finite-level specialization used in place of the big Hecke algebra.
Theta elements live in the group ring (Z/p^M)[G_n] with G_n = Z/p^n written
additively, and characters take values in (Z/p^M)[ζ_{p^n}].
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd, lcm
from typing import Callable, Optional, Sequence

from sympy import Matrix, Poly, Rational, cyclotomic_poly, primitive_root, symbols

from gross_tower.cm_fields import (
    AnticycLayer,
    BinaryQF,
    GaloisElement,
    prime_ideal_for_class,
    ring_class_group,
)
from gross_tower.config import working_precision
from gross_tower.exceptions import (
    InternalInvariantError,
    InvalidInputError,
    NonexistenceError,
    PreconditionError,
    PrecisionError,
)
from gross_tower.heegner import HeegnerFamily
from gross_tower.linalg import left_nullspace, mat_mul_mod, mat_pow_mod, rank_mod_p, rref, solve, vec_mat, vec_mat_mod
from gross_tower.padic import mod_pk
from gross_tower.shimura import Divisor, HeckeMatrix, ShimuraTower, TildePoint

logger = logging.getLogger(__name__)

X = symbols("X")


# ─── Ordinary projector ───────────────────────────────────────────────────────


def charpoly_mod_p(matrix: Sequence[Sequence[int]], p: int) -> Poly:
    return Poly(Matrix(matrix).charpoly(X).as_expr(), X, modulus=p)


def unit_root_count(poly: Poly) -> int:
    """Number of nonzero roots, with multiplicity, of a polynomial over F_p."""
    coeffs = poly.all_coeffs()
    trailing = 0
    for c in reversed(coeffs):
        if c % poly.get_modulus():
            break
        trailing += 1
    return poly.degree() - trailing


@dataclass
class OrdinaryDecomposition:
    """e = lim U_p^t on Div(X̃_m) ⊗ Z/p^M."""

    level: int
    p: int
    precision: int
    idempotent: list[list[int]] = field(repr=False)
    ordinary_rank: int
    exponent: int
    inverse: list[list[int]] = field(repr=False)
    unit_roots: int
    checks: dict[str, bool] = field(default_factory=dict)

    @property
    def modulus(self) -> int:
        return self.p**self.precision

    def project(self, vector: Sequence[int]) -> list[int]:
        """e applied to a column vector."""
        return [sum(r * v for r, v in zip(row, vector)) % self.modulus for row in self.idempotent]

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "p": self.p,
            "precision": self.precision,
            "ordinary_rank": self.ordinary_rank,
            "unit_roots": self.unit_roots,
            "exponent": self.exponent,
            "checks": self.checks,
        }


def ordinary_projector(U: HeckeMatrix, M: int, p: Optional[int] = None) -> OrdinaryDecomposition:
    """The ordinary idempotent as a stable power U^t mod p^M.

    t is a multiple of the orders of the unit roots of U mod p, times
    p^(M-1) and a p-power covering unipotent parts; it is raised by p until
    U^t is idempotent. The rank is certified against the unit-root count of
    the characteristic polynomial mod p.
    """
    if U.op != "U" or U.m < 1:
        raise PreconditionError("the ordinary projector needs U_p at level m ≥ 1")
    p = p or U.param
    modulus = p**M
    n = U.size
    base = [[v % modulus for v in row] for row in U.matrix]
    poly = charpoly_mod_p(U.matrix, p)
    _, factors = poly.factor_list()
    period, multiplicity = 1, 1
    for f, mult in factors:
        if f.as_expr() == X:
            continue
        period = lcm(period, p ** f.degree() - 1)
        multiplicity = max(multiplicity, mult)
    s = 0
    while p**s < multiplicity:
        s += 1
    t = period * p ** (s + M - 1)
    while t < M * n:
        t *= p
    e = mat_pow_mod(base, t, modulus)
    for _ in range(8):
        if mat_mul_mod(e, e, modulus) == e:
            break
        logger.debug("U^%d is not idempotent mod %d^%d; raising the exponent", t, p, M)
        t *= p
        e = mat_pow_mod(base, t, modulus)
    else:
        raise PrecisionError("powers of U_p did not stabilize", details={"prime": p, "precision": M})
    rank = rank_mod_p(e, p)
    roots = unit_root_count(poly)
    if rank != roots:
        raise InternalInvariantError(
            "ordinary rank disagrees with the unit-root count",
            details={"rank": rank, "unit_roots": roots},
        )
    inverse = mat_mul_mod(mat_pow_mod(base, t - 1, modulus), e, modulus)
    eU = mat_mul_mod(base, e, modulus)
    identity = [[int(r == c) for c in range(n)] for r in range(n)]
    complement = [[(identity[r][c] - e[r][c]) % modulus for c in range(n)] for r in range(n)]
    nilpotent = mat_mul_mod(complement, mat_pow_mod(base, M * n, modulus), modulus)
    checks = {
        "idempotent": True,
        "commutes": mat_mul_mod(e, base, modulus) == eU,
        "invertible_on_image": mat_mul_mod(eU, inverse, modulus) == e,
        "non_ordinary_nilpotent": all(v % p == 0 for row in nilpotent for v in row),
    }
    if not all(checks.values()):
        raise InternalInvariantError("ordinary projector failed its certificate", details=checks)
    logger.info("ordinary rank at level %d: %d of %d", U.m, rank, n)
    return OrdinaryDecomposition(U.m, p, M, e, rank, t, inverse, roots, checks)


# ─── Eigendata ────────────────────────────────────────────────────────────────


@dataclass
class EigenData:
    """An ordinary eigen functional on Div(X̃_m) mod p^M."""

    level: int
    p: int
    precision: int
    alpha: int
    vector: tuple[int, ...]
    points: tuple[TildePoint, ...] = field(repr=False)
    eigenvalues: dict[int, int] = field(default_factory=dict)
    _values: dict[TildePoint, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._values = dict(zip(self.points, self.vector))

    @property
    def modulus(self) -> int:
        return self.p**self.precision

    def evaluate(self, pt: TildePoint) -> int:
        return self._values[pt]

    def apply(self, D: Divisor) -> int:
        """η_v(D) = Σ D(x)·v(x)."""
        if D.level != self.level:
            raise InvalidInputError(f"divisor of level {D.level} against eigendata of level {self.level}")
        return sum(c * self._values[pt] for pt, c in D.coeffs.items()) % self.modulus

    def scaled(self, u: int) -> "EigenData":
        if u % self.p == 0:
            raise InvalidInputError("rescaling needs a unit")
        vector = tuple(u * v % self.modulus for v in self.vector)
        return EigenData(self.level, self.p, self.precision, self.alpha, vector, self.points, dict(self.eigenvalues))

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "precision": self.precision,
            "alpha": self.alpha,
            "eigenvalues": {str(k): v for k, v in sorted(self.eigenvalues.items())},
            "vector": list(self.vector),
        }


def _as_fraction(c) -> Fraction:
    return Fraction(int(c.p), int(c.q))


def _poly_eval(coeffs: Sequence[int], x: int, modulus: int) -> int:
    out = 0
    for c in coeffs:
        out = (out * x + c) % modulus
    return out


def _derivative(coeffs: Sequence[int]) -> list[int]:
    k = len(coeffs) - 1
    return [c * (k - i) for i, c in enumerate(coeffs[:-1])]


def hensel_root(coeffs: Sequence[int], r: int, p: int, M: int) -> int:
    """Lift a simple root r mod p of a polynomial (highest degree first) to Z/p^M."""
    modulus = p**M
    deriv = _derivative(coeffs)
    if _poly_eval(deriv, r, p) == 0:
        raise InvalidInputError(f"{r} is not a simple root mod {p}")
    x = r % modulus
    for _ in range(M.bit_length() + 2):
        f = _poly_eval(coeffs, x, modulus)
        if f == 0:
            break
        x = (x - f * pow(_poly_eval(deriv, x, modulus), -1, modulus)) % modulus
    if _poly_eval(coeffs, x, modulus):
        raise PrecisionError("Newton iteration did not converge", details={"prime": p})
    return x


def _divide_linear(coeffs: Sequence[int], root: int, modulus: int) -> list[int]:
    """Quotient of a polynomial by (X - root) mod modulus."""
    out, acc = [], 0
    for c in coeffs[:-1]:
        acc = (acc * root + c) % modulus
        out.append(acc)
    return out


def _available_systems(shimura: ShimuraTower, m: int, ell: int) -> dict:
    T = shimura.hecke("T", ell, m).matrix
    _, factors = Poly(Matrix(T).charpoly(X).as_expr(), X).factor_list()
    return {"ell": ell, "charpoly_factors": [f"({f.as_expr()})^{k}" for f, k in factors]}


def ordinary_eigen(
    shimura: ShimuraTower,
    m: int,
    targets: dict[int, int],
    precision: int,
    *,
    decomposition: Optional[OrdinaryDecomposition] = None,
) -> EigenData:
    """The diamond-invariant functional with the target T_ℓ eigenvalues and a unit U_p eigenvalue.

    A target at p selects the U_p eigenvalue α ≡ a_p (mod p), the unit root
    of X² - a_p·X + p.
    """
    level = shimura.level(m)
    p = level.p
    if m < 1:
        raise PreconditionError("ordinary eigendata live at level m ≥ 1")
    modulus = p**precision
    n = level.tilde_size
    hecke_targets = {ell: a for ell, a in sorted(targets.items()) if ell != p}
    if not hecke_targets:
        raise PreconditionError("at least one T_ℓ eigenvalue is needed to select an eigensystem")
    operators = {ell: shimura.hecke("T", ell, m).matrix for ell in hecke_targets}
    g = int(primitive_root(p**m))
    diamond = shimura.hecke("diamond", g, m).matrix
    blocks = [
        [[T[r][c] - (a if r == c else 0) for c in range(n)] for r in range(n)]
        for T, a in ((operators[ell], hecke_targets[ell]) for ell in hecke_targets)
    ]
    blocks.append([[diamond[r][c] - (1 if r == c else 0) for c in range(n)] for r in range(n)])
    stacked = [sum((blk[r] for blk in blocks), []) for r in range(n)]
    basis = left_nullspace(stacked)
    if not basis:
        raise NonexistenceError(
            "no eigensystem matches the targets",
            details={"targets": {str(k): v for k, v in targets.items()}, "available": _available_systems(shimura, m, next(iter(hecke_targets)))},
        )
    rows = []
    for b in basis:
        den = lcm(*(x.denominator for x in b))
        ints = [int(x * den) for x in b]
        content = gcd(*ints)
        rows.append([x // content for x in ints])
    U = shimura.hecke("U", p, m).matrix
    _, pivots = rref(rows)
    k = len(rows)
    images = [vec_mat(b, U) for b in rows]
    square = [[Fraction(rows[i][pivots[j]]) for i in range(k)] for j in range(k)]
    restricted = []
    for w in images:
        c = solve(square, [w[pc] for pc in pivots])
        combo = [sum(c[i] * rows[i][col] for i in range(k)) for col in range(n)]
        if combo != list(w):
            raise InternalInvariantError("the eigenspace is not stable under U_p")
        restricted.append(c)
    C = Matrix([[Rational(x.numerator, x.denominator) for x in row] for row in restricted])
    charpoly = [_as_fraction(x) for x in C.charpoly(X).all_coeffs()]
    if any(x.denominator % p == 0 for x in charpoly):
        raise PrecisionError("U_p on the eigenspace is not p-integral", details={"prime": p})
    coeffs = [mod_pk(x, p, precision) for x in charpoly]
    deriv = _derivative(coeffs)
    candidates = [
        r for r in range(1, p) if _poly_eval(coeffs, r, p) == 0 and _poly_eval(deriv, r, p) != 0
    ]
    if p in targets:
        candidates = [r for r in candidates if (r - targets[p]) % p == 0]
    if len(candidates) != 1:
        raise NonexistenceError(
            "no simple unit root of U_p on the eigenspace",
            details={"roots_mod_p": candidates, "dimension": k},
        )
    alpha = hensel_root(coeffs, candidates[0], p, precision)
    quotient = _divide_linear(coeffs, alpha, modulus)
    vector = None
    for b in rows + [[x + y for x, y in zip(r1, r2)] for i, r1 in enumerate(rows) for r2 in rows[i + 1 :]]:
        v = [0] * n
        for c in quotient:
            v = [(x + c * y) % modulus for x, y in zip(vec_mat_mod(v, U, modulus), b)]
        if any(x % p for x in v):
            vector = v
            break
    if vector is None:
        raise NonexistenceError("the α-eigenvector vanishes mod p")
    checks = {
        "U_p": vec_mat_mod(vector, U, modulus) == [alpha * x % modulus for x in vector],
        "diamond": vec_mat_mod(vector, diamond, modulus) == vector,
    }
    for ell, a in hecke_targets.items():
        checks[f"T_{ell}"] = vec_mat_mod(vector, operators[ell], modulus) == [a * x % modulus for x in vector]
    if decomposition is not None:
        checks["ordinary"] = [
            sum(vector[r] * decomposition.idempotent[r][c] for r in range(n)) % modulus for c in range(n)
        ] == vector
    if not all(checks.values()):
        raise InternalInvariantError("eigen functional failed its checks", details=checks)
    logger.info("eigensystem %s at level %d: α = %d mod %d^%d", hecke_targets, m, alpha, p, precision)
    return EigenData(m, p, precision, alpha, tuple(vector), tuple(level.points), dict(targets))


# ─── Group rings and characters ───────────────────────────────────────────────


@dataclass(frozen=True)
class ThetaElement:
    """An element of (Z/p^M)[Z/p^n]; index k stands for the k-th power of the generator."""

    n: int
    p: int
    modulus: int
    coefficients: tuple[int, ...]

    @classmethod
    def zero(cls, n: int, p: int, modulus: int) -> "ThetaElement":
        return cls(n, p, modulus, (0,) * p**n)

    @property
    def order(self) -> int:
        return self.p**self.n

    def _like(self, coeffs: Sequence[int]) -> "ThetaElement":
        return ThetaElement(self.n, self.p, self.modulus, tuple(c % self.modulus for c in coeffs))

    def _check(self, other: "ThetaElement") -> None:
        if (self.n, self.p, self.modulus) != (other.n, other.p, other.modulus):
            raise InvalidInputError("group-ring elements of different rings do not mix")

    def __add__(self, other: "ThetaElement") -> "ThetaElement":
        self._check(other)
        return self._like([a + b for a, b in zip(self.coefficients, other.coefficients)])

    def __mul__(self, other: "ThetaElement") -> "ThetaElement":
        self._check(other)
        N = self.order
        out = [0] * N
        for i, a in enumerate(self.coefficients):
            if a:
                for j, b in enumerate(other.coefficients):
                    out[(i + j) % N] += a * b
        return self._like(out)

    def star(self) -> "ThetaElement":
        """σ ↦ σ⁻¹."""
        N = self.order
        return self._like([self.coefficients[-k % N] for k in range(N)])

    def augmentation(self) -> int:
        return sum(self.coefficients) % self.modulus

    def project(self, n: Optional[int] = None) -> "ThetaElement":
        """ν: (Z/p^M)[Z/p^n] → (Z/p^M)[Z/p^(n-1)] (or to any lower layer)."""
        n = self.n - 1 if n is None else n
        if not 0 <= n <= self.n:
            raise InvalidInputError(f"cannot project layer {self.n} to layer {n}")
        N = self.p**n
        out = [0] * N
        for k, a in enumerate(self.coefficients):
            out[k % N] += a
        return ThetaElement(n, self.p, self.modulus, tuple(c % self.modulus for c in out))

    def translate(self, s: int) -> "ThetaElement":
        """Multiplication by the group element s."""
        N = self.order
        out = [0] * N
        for k, a in enumerate(self.coefficients):
            out[(k + s) % N] = a
        return self._like(out)

    def scale(self, u: int) -> "ThetaElement":
        return self._like([u * a for a in self.coefficients])

    def to_dict(self) -> dict:
        return {"n": self.n, "modulus": self.modulus, "coefficients": list(self.coefficients)}


@dataclass(frozen=True)
class CyclotomicInteger:
    """An element of (Z/p^M)[X]/(Φ_{p^k}(X)), coefficients lowest degree first."""

    p: int
    k: int
    modulus: int
    coefficients: tuple[int, ...]

    @staticmethod
    def _cyclotomic(p: int, k: int) -> list[int]:
        return [int(c) for c in reversed(cyclotomic_poly(p**k, X, polys=True).all_coeffs())]

    @classmethod
    def reduce(cls, p: int, k: int, modulus: int, coeffs: Sequence[int]) -> "CyclotomicInteger":
        phi = cls._cyclotomic(p, k)
        deg = len(phi) - 1
        work = [c % modulus for c in coeffs]
        for top in range(len(work) - 1, deg - 1, -1):
            c = work[top]
            if c:
                for i, f in enumerate(phi):
                    work[top - deg + i] = (work[top - deg + i] - c * f) % modulus
        work = (work + [0] * deg)[:deg]
        return cls(p, k, modulus, tuple(work))

    @classmethod
    def root_power(cls, p: int, k: int, modulus: int, e: int) -> "CyclotomicInteger":
        """ζ^e."""
        e %= p**k
        return cls.reduce(p, k, modulus, [0] * e + [1])

    def _check(self, other: "CyclotomicInteger") -> None:
        if (self.p, self.k, self.modulus) != (other.p, other.k, other.modulus):
            raise InvalidInputError("cyclotomic values of different rings do not mix")

    def __add__(self, other: "CyclotomicInteger") -> "CyclotomicInteger":
        self._check(other)
        return CyclotomicInteger(
            self.p, self.k, self.modulus,
            tuple((a + b) % self.modulus for a, b in zip(self.coefficients, other.coefficients)),
        )

    def __mul__(self, other: "CyclotomicInteger") -> "CyclotomicInteger":
        self._check(other)
        out = [0] * (len(self.coefficients) + len(other.coefficients) - 1)
        for i, a in enumerate(self.coefficients):
            for j, b in enumerate(other.coefficients):
                out[i + j] += a * b
        return CyclotomicInteger.reduce(self.p, self.k, self.modulus, out)

    def scale(self, u: int) -> "CyclotomicInteger":
        return CyclotomicInteger(self.p, self.k, self.modulus, tuple(u * a % self.modulus for a in self.coefficients))

    def to_list(self) -> list[int]:
        return list(self.coefficients)


def chi_special_value(theta: ThetaElement, j: int) -> CyclotomicInteger:
    """χ_j(θ) = Σ_k θ_k·ζ^{jk} for the character χ_j(σ) = ζ^j of G_n."""
    p, n, modulus = theta.p, theta.n, theta.modulus
    out = CyclotomicInteger.reduce(p, n, modulus, [0])
    for k, a in enumerate(theta.coefficients):
        if a:
            out = out + CyclotomicInteger.root_power(p, n, modulus, j * k).scale(a)
    return out


# ─── Theta elements from Heegner orbits ───────────────────────────────────────


def _class_representatives(family: HeegnerFamily) -> list[Optional[GaloisElement]]:
    """Prime ideals for the classes of Pic(O_K); None stands for the identity."""
    K, p = family.cm_field, family.p
    pic = ring_class_group(K, 1)
    avoid = family.tower.N * p * 2
    for q in family.chain:
        avoid *= q
    reps: list[Optional[GaloisElement]] = [None]
    for f in pic.forms:
        if f != pic.identity:
            _, ideal = prime_ideal_for_class(K, 1, f, avoid)
            reps.append(GaloisElement(ideal=ideal, label=f"({f.a},{f.b},{f.c})"))
    return reps


def heegner_orbit(
    family: HeegnerFamily,
    layer: AnticycLayer,
    shift: Optional[GaloisElement] = None,
) -> list[tuple[int, TildePoint]]:
    """(π_n(ρ), P̃_{p^d,1}^ρ) over lifts ρ of Gal(H_{p^(d+1)}/K), d = d(n).

    The lifts are products σ·ρ' of prime ideals σ for Pic(O_K) with
    p-supported lifts ρ' of Gal(H_{p^(d+1)}/H_1). With ``shift`` = τ the pairs
    are (π_n(ρ), P̃_{p^d,1}^{ρτ}): the point moves, the index does not, so the
    orbit sums to θ_n translated by π_n(τ).
    """
    p, d = family.p, layer.d
    if family.c != 1:
        raise PreconditionError("theta elements are built from the conductor-one family")
    if family.r_max < d or family.m_max < 1:
        raise PreconditionError(
            f"theta_{layer.n} needs the family to reach conductor p^{d} at level 1",
            details={"required_d": d, "r_max": family.r_max},
        )
    K = family.cm_field
    K_prec = working_precision(family.precision)
    P = family.point(p**d, 1)
    out = []
    for sigma in _class_representatives(family):
        for lift in family.lifts(1, 0, d + 1):
            rho = sigma.times(K, lift) if sigma is not None else lift
            moved = rho.times(K, shift, {p: K_prec}) if shift is not None else rho
            Q = family.act(moved, P)
            out.append((layer.project(rho), Q.point))
    logger.debug("orbit for layer %d: %d translates", layer.n, len(out))
    return out


def theta_element(
    family: HeegnerFamily,
    layer: AnticycLayer,
    eig: EigenData,
    *,
    shift: Optional[GaloisElement] = None,
    orbit: Optional[list[tuple[int, TildePoint]]] = None,
) -> ThetaElement:
    """θ_n = Σ_{σ ∈ G_n} η_v(𝒬_n^σ)·σ⁻¹, scaled by α^{-(n+1)}.

    The scale is α^{-(n+1)}, one power more than α^{-n}: unfolded, this is
    α^{-(n+1)} Σ_ρ v(P̃_{p^d,1}^ρ)·[-π_n(ρ)] with ρ over Gal(H_{p^(d+1)}/K), and
    the extra α⁻¹ normalizes the level-one trace. v is diamond-invariant, so
    the wild twist of the corestriction drops out.
    """
    if eig.level != 1:
        raise PreconditionError("theta elements use eigendata at level 1")
    n, p, modulus = layer.n, family.p, eig.modulus
    orbit = orbit if orbit is not None else heegner_orbit(family, layer, shift)
    coeffs = [0] * p**n
    for k, pt in orbit:
        idx = (-k) % p**n
        coeffs[idx] = (coeffs[idx] + eig.evaluate(pt)) % modulus
    scale = pow(eig.alpha, -(n + 1), modulus)
    return ThetaElement(n, p, modulus, tuple(c * scale % modulus for c in coeffs))


def lp_truncation(theta: ThetaElement) -> ThetaElement:
    """L_n = θ_n·θ_n^*."""
    return theta * theta.star()


def orbit_chi_value(
    family: HeegnerFamily,
    layer: AnticycLayer,
    eig: EigenData,
    j: int,
    orbit: Optional[list[tuple[int, TildePoint]]] = None,
) -> CyclotomicInteger:
    """χ_j(θ_n) summed straight from the Heegner orbit."""
    n, p, modulus = layer.n, family.p, eig.modulus
    orbit = orbit if orbit is not None else heegner_orbit(family, layer)
    out = CyclotomicInteger.reduce(p, n, modulus, [0])
    for k, pt in orbit:
        out = out + CyclotomicInteger.root_power(p, n, modulus, -j * k).scale(eig.evaluate(pt))
    return out.scale(pow(eig.alpha, -(n + 1), modulus))


@dataclass(frozen=True)
class JElement:
    """Σ_{σ ∈ Pic(O_c)} η_v(𝒫_c^σ)·σ⁻¹ with coefficients mod p^M."""

    c: int
    modulus: int
    coefficients: tuple[tuple[BinaryQF, int], ...]

    def augmentation(self) -> int:
        return sum(v for _, v in self.coefficients) % self.modulus

    def evaluate(self, chi: Callable[[BinaryQF], int]) -> int:
        return sum(v * chi(f) for f, v in self.coefficients) % self.modulus

    def to_dict(self) -> dict:
        return {"c": self.c, "coefficients": [[f.to_list(), v] for f, v in self.coefficients]}


def j_element(family: HeegnerFamily, eig: EigenData) -> JElement:
    """The finite-level J-element of the family's base conductor, from 𝒫_{c,1}."""
    if eig.level != 1:
        raise PreconditionError("J-elements use eigendata at level 1")
    K, c, p, modulus = family.cm_field, family.c, family.p, eig.modulus
    pic = ring_class_group(K, c)
    avoid = family.tower.N * p * c * 2
    for q in family.chain:
        avoid *= q
    P = family.point(c, 1)
    translates = [family.act(tau, P) for tau in family.lifts(c, 0, 1)]
    scale = pow(eig.alpha, -1, modulus)
    coeffs = []
    for f in pic.forms:
        sigma = None
        if f != pic.identity:
            _, ideal = prime_ideal_for_class(K, c, f, avoid)
            sigma = GaloisElement(ideal=ideal, label=f"({f.a},{f.b},{f.c})")
        total = 0
        for Q in translates:
            moved = family.act(sigma, Q) if sigma is not None else Q
            total += eig.evaluate(moved.point)
        coeffs.append((f.inverse().reduced(), total * scale % modulus))
    return JElement(c, modulus, tuple(sorted(coeffs, key=lambda item: item[0].to_list())))


def theta_audits(
    family: HeegnerFamily,
    layers: Sequence[AnticycLayer],
    eig: EigenData,
    *,
    unit: int = 2,
) -> dict:
    """θ_n for each layer with compatibility, *-symmetry, translation and rescaling audits."""
    p, K = family.p, family.cm_field
    thetas, orbits = [], []
    for layer in layers:
        orbit = heegner_orbit(family, layer)
        orbits.append(orbit)
        thetas.append(theta_element(family, layer, eig, orbit=orbit))
    rescaled = eig.scaled(unit)
    audits: dict[str, bool] = {}
    results = []
    for idx, (layer, theta) in enumerate(zip(layers, thetas)):
        L = lp_truncation(theta)
        entry = {"n": layer.n, "d": layer.d, "theta": theta.to_dict(), "L": L.to_dict()}
        audits[f"star_symmetric[{layer.n}]"] = L.star() == L
        audits[f"augmentation[{layer.n}]"] = L.augmentation() == theta.augmentation() ** 2 % theta.modulus
        theta_u = theta_element(family, layer, rescaled, orbit=orbits[idx])
        audits[f"rescaling[{layer.n}]"] = theta_u == theta.scale(unit) and lp_truncation(theta_u) == L.scale(unit * unit)
        if layer.n > 0:
            tau = layer.generator_element()
            moved = theta_element(family, layer, eig, shift=tau)
            s = layer.project(tau)
            audits[f"translation[{layer.n}]"] = moved == theta.translate(s) and lp_truncation(moved) == L
            section = GaloisElement(local=((p, (Fraction(1), Fraction(p ** (layer.d + 1)))),), label="section")
            audits[f"section[{layer.n}]"] = theta_element(family, layer, eig, shift=section) == theta
        if idx > 0 and layers[idx - 1].n == layer.n - 1:
            audits[f"compatibility[{layer.n}]"] = theta.project() == thetas[idx - 1]
            audits[f"L_compatibility[{layer.n}]"] = L.project() == lp_truncation(thetas[idx - 1])
        results.append(entry)
    logger.info("theta audits: %d of %d pass", sum(audits.values()), len(audits))
    return {
        "layers": results,
        "thetas": thetas,
        "audits": audits,
        "passed": all(audits.values()),
        "alpha": eig.alpha,
        "field": K.D_K,
    }
